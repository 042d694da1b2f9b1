#include "cnl/crypto/secure_sum.hpp"
#include "cnl/crypto/seal.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

using namespace cnl::crypto;

namespace {

const KeyPair& test_key_512() {
  static const KeyPair kp = [] {
    auto rs = RandomSource::seeded(2024);
    return paillier_keygen(512, rs, KeyMode::test);
  }();
  return kp;
}

const IdentityKey& identity() {
  static const IdentityKey id = IdentityKey::generate();
  return id;
}

std::vector<double> random_values(std::size_t n, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST(Hex, LowercaseNoLeadingZeros) {
  EXPECT_EQ(to_hex(BigInt(0)), "0");
  EXPECT_EQ(to_hex(BigInt(255)), "ff");
  EXPECT_EQ(from_hex("00ff"), BigInt(255));
  EXPECT_EQ(from_hex("DEADbeef"), BigInt("3735928559"));
  EXPECT_THROW(from_hex("xyz"), std::invalid_argument);
  EXPECT_THROW(from_hex(""), std::invalid_argument);
}

TEST(Primes, MillerRabinAgreesWithTrialDivision) {
  auto rs = RandomSource::seeded(1);
  for (unsigned n = 0; n < 3000; ++n) {
    bool prime = n >= 2;
    for (unsigned d = 2; d * d <= n && prime; ++d) prime = n % d != 0;
    EXPECT_EQ(is_probable_prime(BigInt(n), rs), prime) << n;
  }
  EXPECT_FALSE(is_probable_prime(BigInt(561), rs));  // Carmichael
  EXPECT_FALSE(is_probable_prime(BigInt("3215031751"), rs));  // strong pseudoprime to bases 2,3,5,7
}

TEST(Paillier, TinyTextbookKey) {
  const auto kp = paillier_key_from_primes(5, 7);
  EXPECT_EQ(kp.pub.n, 35);
  EXPECT_EQ(kp.pub.g, 36);
  auto rs = RandomSource::seeded(3);
  EXPECT_EQ(paillier_decrypt(kp.pub, kp.priv, paillier_encrypt(kp.pub, 4, rs)), 4);
  const auto sum = he_add(kp.pub, paillier_encrypt(kp.pub, 3, rs), paillier_encrypt(kp.pub, 4, rs));
  EXPECT_EQ(paillier_decrypt(kp.pub, kp.priv, sum), 7);
  for (int m = 0; m < 35; ++m) EXPECT_EQ(paillier_decrypt(kp.pub, kp.priv, paillier_encrypt(kp.pub, m, rs)), m);
}

TEST(Paillier, RoundTripRandomPlaintexts) {
  const auto& kp = test_key_512();
  auto rs = RandomSource::seeded(5);
  for (int i = 0; i < 1000; ++i) {
    const BigInt m = rs.below(kp.pub.n);
    ASSERT_EQ(paillier_decrypt(kp.pub, kp.priv, paillier_encrypt(kp.pub, m, rs)), m);
  }
  const BigInt edge = kp.pub.n - 1;
  EXPECT_EQ(paillier_decrypt(kp.pub, kp.priv, paillier_encrypt(kp.pub, edge, rs)), edge);
  EXPECT_EQ(paillier_decrypt(kp.pub, kp.priv, paillier_encrypt(kp.pub, 0, rs)), 0);
  EXPECT_THROW(paillier_encrypt(kp.pub, kp.pub.n, rs), std::out_of_range);
}

TEST(Paillier, KeygenDeterminismContract) {
  auto a = RandomSource::seeded(9), b = RandomSource::seeded(9);
  EXPECT_EQ(paillier_keygen(256, a, KeyMode::test).pub.n, paillier_keygen(256, b, KeyMode::test).pub.n);
  auto os1 = RandomSource::os(), os2 = RandomSource::os();
  EXPECT_NE(paillier_keygen(1024, os1).pub.n, paillier_keygen(1024, os2).pub.n);
}

TEST(Paillier, ProductionModeGuards) {
  auto seeded = RandomSource::seeded(1);
  EXPECT_THROW(paillier_keygen(1024, seeded, KeyMode::production), std::invalid_argument);
  auto os = RandomSource::os();
  EXPECT_THROW(paillier_keygen(512, os, KeyMode::production), std::invalid_argument);
}

TEST(Paillier, KeyHasRequestedSizeAndBalancedPrimes) {
  const auto& kp = test_key_512();
  EXPECT_EQ(kp.pub.bits, 512u);
  EXPECT_EQ(kp.pub.n_squared, kp.pub.n * kp.pub.n);
}

TEST(Paillier, FreshRandomnessPerEncryption) {
  const auto& kp = test_key_512();
  auto rs = RandomSource::seeded(6);
  std::set<std::string> seen;
  for (int i = 0; i < 10000; ++i) EXPECT_TRUE(seen.insert(to_hex(paillier_encrypt(kp.pub, 42, rs))).second);
}

TEST(Paillier, TamperedCiphertextDecryptsWrong) {
  const auto& kp = test_key_512();
  auto rs = RandomSource::seeded(7);
  int unchanged = 0;
  for (int i = 0; i < 200; ++i) {
    const BigInt m = rs.below(kp.pub.n);
    const BigInt c = (paillier_encrypt(kp.pub, m, rs) * 2) % kp.pub.n_squared;
    unchanged += paillier_decrypt(kp.pub, kp.priv, c) == m ? 1 : 0;
  }
  EXPECT_EQ(unchanged, 0);
}

TEST(Paillier, HomomorphicAdditionAndIdentity) {
  const auto& kp = test_key_512();
  auto rs = RandomSource::seeded(8);
  for (int i = 0; i < 100; ++i) {
    const BigInt x = rs.below(kp.pub.n), y = rs.below(kp.pub.n);
    const BigInt sum = he_add(kp.pub, paillier_encrypt(kp.pub, x, rs), paillier_encrypt(kp.pub, y, rs));
    EXPECT_EQ(paillier_decrypt(kp.pub, kp.priv, sum), BigInt((x + y) % kp.pub.n));
  }
  const BigInt x = 12345;
  EXPECT_EQ(paillier_decrypt(kp.pub, kp.priv, he_add(kp.pub, paillier_encrypt(kp.pub, x, rs), paillier_encrypt(kp.pub, 0, rs))), x);
  const auto other = paillier_key_from_primes(5, 7);
  EXPECT_THROW(he_add(other.pub, paillier_encrypt(kp.pub, 1, rs), paillier_encrypt(kp.pub, 1, rs)), std::invalid_argument);
}

TEST(Paillier, FoldOf64) {
  const auto& kp = test_key_512();
  auto rs = RandomSource::seeded(10);
  BigInt plain = 0, acc = paillier_encrypt(kp.pub, 0, rs);
  for (int i = 0; i < 64; ++i) {
    const BigInt v = rs.below(kp.pub.n);
    plain = (plain + v) % kp.pub.n;
    acc = he_add(kp.pub, acc, paillier_encrypt(kp.pub, v, rs));
  }
  EXPECT_EQ(paillier_decrypt(kp.pub, kp.priv, acc), plain);
}

TEST(Paillier, MalformedCiphertextRejected) {
  const auto& kp = test_key_512();
  EXPECT_THROW(paillier_decrypt(kp.pub, kp.priv, 0), std::invalid_argument);
  EXPECT_THROW(paillier_decrypt(kp.pub, kp.priv, kp.pub.n_squared), std::invalid_argument);
  EXPECT_THROW(paillier_decrypt(kp.pub, kp.priv, kp.pub.n), std::invalid_argument);
}

TEST(Paillier, PublicKeyJson) {
  const auto& kp = test_key_512();
  const auto j = kp.pub.to_json();
  EXPECT_EQ(j["bits"], 512);
  EXPECT_EQ(j["n"].get<std::string>(), to_hex(kp.pub.n));
  EXPECT_EQ(PublicKey::from_json(j), kp.pub);
}

TEST(Codec, Encoding) {
  const auto& kp = test_key_512();
  const FixedPointCodec codec(kp.pub.n);
  EXPECT_EQ(codec.encode(1.5), BigInt(1572864));
  EXPECT_EQ(codec.encode(-1.0), BigInt(kp.pub.n - 1048576));
  EXPECT_EQ(codec.decode(codec.encode(-1.0)), -1.0);
  EXPECT_THROW(codec.encode(codec.max_magnitude() * 2), std::overflow_error);
  EXPECT_THROW(codec.encode(NAN), std::overflow_error);
}

TEST(Codec, RoundTripWithinHalfStep) {
  const auto& kp = test_key_512();
  const FixedPointCodec codec(kp.pub.n);
  std::mt19937_64 rng(11);
  for (double v : random_values(5000, rng, -1000.0, 1000.0)) {
    EXPECT_LE(std::abs(codec.decode(codec.encode(v)) - v), std::ldexp(1.0, -21));
  }
}

TEST(Codec, HeadroomInvariant) {
  const auto& kp = test_key_512();
  const FixedPointCodec codec(kp.pub.n);
  // max_addends · 2^s · max_magnitude < n/2
  const BigInt lhs = BigInt(codec.max_addends()) * (BigInt(1) << 20) * BigInt(codec.max_magnitude());
  EXPECT_LT(lhs, kp.pub.n / 2);
  EXPECT_THROW(FixedPointCodec(BigInt(35)), std::invalid_argument);
}

TEST(SecureSum, SingleSenderPassthrough) {
  const auto& kp = test_key_512();
  const FixedPointCodec codec(kp.pub.n);
  auto rs = RandomSource::seeded(12);
  const auto c = encrypt_vector(kp.pub, codec, {1.0, -2.0}, rs);
  const auto s = secure_sum(kp.pub, {c});
  EXPECT_EQ(s.addend_count, 1u);
  EXPECT_EQ(s.components, c.components);
}

TEST(SecureSum, EightSendersMatchPlaintextOracle) {
  const auto& kp = test_key_512();
  const FixedPointCodec codec(kp.pub.n);
  auto rs = RandomSource::seeded(13);
  std::mt19937_64 rng(13);
  std::vector<CiphertextVector> parts;
  std::vector<double> oracle(16, 0.0);
  for (int s = 0; s < 8; ++s) {
    const auto v = random_values(16, rng, -10.0, 10.0);
    for (std::size_t i = 0; i < 16; ++i) oracle[i] += v[i];
    parts.push_back(encrypt_vector(kp.pub, codec, v, rs));
  }
  const auto sum = secure_sum(kp.pub, parts);
  EXPECT_EQ(sum.addend_count, 8u);
  const auto got = decrypt_vector(kp.pub, kp.priv, codec, sum);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_LE(std::abs(got[i] - oracle[i]), 8 * std::ldexp(1.0, -21));

  std::reverse(parts.begin(), parts.end());
  EXPECT_EQ(decrypt_vector(kp.pub, kp.priv, codec, secure_sum(kp.pub, parts)), got);
}

TEST(SecureSum, RejectsMismatches) {
  const auto& kp = test_key_512();
  const FixedPointCodec codec(kp.pub.n);
  auto rs = RandomSource::seeded(14);
  auto a = encrypt_vector(kp.pub, codec, {1.0, 2.0}, rs);
  auto b = encrypt_vector(kp.pub, codec, {1.0}, rs);
  EXPECT_THROW(secure_sum(kp.pub, {a, b}), std::invalid_argument);
  auto c = a;
  c.scale_log2 = 16;
  EXPECT_THROW(secure_sum(kp.pub, {a, c}), std::invalid_argument);
  EXPECT_THROW(secure_sum(kp.pub, {}), std::invalid_argument);
  std::vector<CiphertextVector> many(65, a);
  EXPECT_THROW(secure_sum(kp.pub, many), std::overflow_error);
}

TEST(SecureSum, CiphertextVectorJson) {
  const auto& kp = test_key_512();
  const FixedPointCodec codec(kp.pub.n);
  auto rs = RandomSource::seeded(15);
  const auto c = encrypt_vector(kp.pub, codec, {0.25, -3.0}, rs);
  const auto j = c.to_json();
  EXPECT_EQ(j["scale_log2"], 20);
  EXPECT_EQ(j["addend_count"], 1);
  for (const auto& h : j["components"]) {
    const auto s = h.get<std::string>();
    EXPECT_TRUE(std::all_of(s.begin(), s.end(), [](char ch) { return std::isdigit(ch) || (ch >= 'a' && ch <= 'f'); }));
    EXPECT_NE(s.front(), '0');
  }
  EXPECT_EQ(CiphertextVector::from_json(j).components, c.components);
}

TEST(Seal, RoundTripVariousSizes) {
  std::mt19937_64 rng(16);
  for (std::size_t n : {std::size_t{0}, std::size_t{1}, std::size_t{100}, std::size_t{65536}, std::size_t{1} << 20}) {
    Bytes payload(n);
    for (auto& b : payload) b = static_cast<std::uint8_t>(rng());
    EXPECT_EQ(control_open(identity(), control_seal(identity().public_pem(), payload)), payload) << n;
  }
}

TEST(Seal, BitFlipRejected) {
  const Bytes payload = to_bytes("aggregate round 3");
  const Bytes sealed = control_seal(identity().public_pem(), payload);
  for (std::size_t pos : {std::size_t{5}, std::size_t{100}, sealed.size() - 20, sealed.size() - 1}) {
    Bytes bad = sealed;
    bad[pos] ^= 0x01;
    EXPECT_THROW(control_open(identity(), bad), SealError) << pos;
  }
}

TEST(Seal, WrongKeyRejected) {
  const auto other = IdentityKey::generate();
  const Bytes sealed = control_seal(identity().public_pem(), to_bytes("x"));
  EXPECT_THROW(control_open(other, sealed), SealError);
}

TEST(Seal, PemRoundTrip) {
  const auto copy = IdentityKey::from_private_pem(identity().private_pem());
  EXPECT_EQ(copy.public_pem(), identity().public_pem());
}

TEST(Base64, RoundTrip) {
  for (std::size_t n = 0; n < 10; ++n) {
    Bytes b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = static_cast<std::uint8_t>(i * 37);
    EXPECT_EQ(base64_decode(base64_encode(b)), b);
  }
  EXPECT_EQ(base64_encode(to_bytes("foobar")), "Zm9vYmFy");
  EXPECT_THROW(base64_decode("abc"), std::invalid_argument);
}
