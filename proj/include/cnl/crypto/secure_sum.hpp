#pragma once

#include "cnl/crypto/codec.hpp"

namespace cnl::crypto {

/// Componentwise homomorphic sum. Accepts ciphertexts only; addend counts add
/// up. Throws on empty input, length or scale mismatch, out-of-range
/// components, or more than `max_addends` total addends.
CiphertextVector secure_sum(const PublicKey& pk, const std::vector<CiphertextVector>& inputs,
                            std::size_t max_addends = 64);

}  // namespace cnl::crypto
