#include "cnl/crypto/codec.hpp"

#include <cmath>
#include <stdexcept>

namespace cnl::crypto {

FixedPointCodec::FixedPointCodec(BigInt n, int scale_log2, std::size_t max_addends)
    : n_(std::move(n)), scale_log2_(scale_log2), max_addends_(max_addends) {
  if (scale_log2_ < 0 || scale_log2_ > 52) throw std::invalid_argument("codec: scale_log2 outside [0, 52]");
  if (max_addends_ == 0) throw std::invalid_argument("codec: max_addends must be positive");
  half_ = n_ / 2;
  // |v| < n / (2^{s+1} · max_addends)
  BigInt bound = n_;
  bound >>= static_cast<mp_bitcnt_t>(scale_log2_ + 1);
  bound /= static_cast<unsigned long>(max_addends_);
  max_magnitude_ = bound.get_d();
  if (max_magnitude_ < 1.0) throw std::invalid_argument("codec: modulus too small for this scale");
}

BigInt FixedPointCodec::encode(double v) const {
  if (!std::isfinite(v) || std::abs(v) >= max_magnitude_) {
    throw std::overflow_error("codec: magnitude overflow");
  }
  const double scaled = std::nearbyint(std::ldexp(v, scale_log2_));
  BigInt m(std::abs(scaled));
  if (scaled < 0 && m != 0) m = n_ - m;
  return m;
}

double FixedPointCodec::decode(const BigInt& x) const {
  if (x < 0 || x >= n_) throw std::invalid_argument("codec: value outside [0, n)");
  const BigInt s = x > half_ ? BigInt(x - n_) : x;
  return std::ldexp(s.get_d(), -scale_log2_);
}

double FixedPointCodec::decode_mean(const BigInt& x, std::size_t addend_count) const {
  if (addend_count == 0) throw std::invalid_argument("codec: addend_count must be positive");
  return decode(x) / static_cast<double>(addend_count);
}

nlohmann::json CiphertextVector::to_json() const {
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : components) comps.push_back(to_hex(c));
  return {{"components", comps}, {"scale_log2", scale_log2}, {"addend_count", addend_count}};
}

CiphertextVector CiphertextVector::from_json(const nlohmann::json& j) {
  CiphertextVector c;
  for (const auto& h : j.at("components")) c.components.push_back(from_hex(h.get<std::string>()));
  c.scale_log2 = j.at("scale_log2").get<int>();
  c.addend_count = j.at("addend_count").get<std::size_t>();
  if (c.addend_count == 0) throw std::invalid_argument("ciphertext vector: addend_count must be >= 1");
  return c;
}

CiphertextVector encrypt_vector(const PublicKey& pk, const FixedPointCodec& codec,
                                const std::vector<double>& values, RandomSource& rng) {
  if (codec.modulus() != pk.n) throw std::invalid_argument("encrypt_vector: codec modulus differs from key");
  CiphertextVector out;
  out.scale_log2 = codec.scale_log2();
  out.components.reserve(values.size());
  for (double v : values) out.components.push_back(paillier_encrypt(pk, codec.encode(v), rng));
  return out;
}

std::vector<double> decrypt_vector(const PublicKey& pk, const PrivateKey& sk, const FixedPointCodec& codec,
                                   const CiphertextVector& c) {
  if (c.scale_log2 != codec.scale_log2()) throw std::invalid_argument("decrypt_vector: scale mismatch");
  std::vector<double> out;
  out.reserve(c.components.size());
  for (const auto& x : c.components) out.push_back(codec.decode(paillier_decrypt(pk, sk, x)));
  return out;
}

}  // namespace cnl::crypto
