#include "cnl/crypto/secure_sum.hpp"

#include <stdexcept>

namespace cnl::crypto {

CiphertextVector secure_sum(const PublicKey& pk, const std::vector<CiphertextVector>& inputs,
                            std::size_t max_addends) {
  if (inputs.empty()) throw std::invalid_argument("secure_sum: no inputs");
  const auto len = inputs.front().components.size();
  const int scale = inputs.front().scale_log2;
  std::size_t addends = 0;
  for (const auto& v : inputs) {
    if (v.components.size() != len) throw std::invalid_argument("secure_sum: length mismatch");
    if (v.scale_log2 != scale) throw std::invalid_argument("secure_sum: scale mismatch");
    if (v.addend_count == 0) throw std::invalid_argument("secure_sum: addend_count must be >= 1");
    addends += v.addend_count;
  }
  if (addends > max_addends) throw std::overflow_error("secure_sum: addend overflow");

  CiphertextVector out = inputs.front();
  for (const auto& c : out.components) {
    if (c <= 0 || c >= pk.n_squared) throw std::invalid_argument("secure_sum: component not under this key");
  }
  for (std::size_t i = 1; i < inputs.size(); ++i) {
    for (std::size_t k = 0; k < len; ++k) out.components[k] = he_add(pk, out.components[k], inputs[i].components[k]);
  }
  out.addend_count = addends;
  return out;
}

}  // namespace cnl::crypto
