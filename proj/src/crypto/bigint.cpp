#include "cnl/crypto/bigint.hpp"

#include <openssl/rand.h>

#include <array>
#include <stdexcept>
#include <vector>

namespace cnl::crypto {

std::string to_hex(const BigInt& v) {
  if (v < 0) throw std::invalid_argument("to_hex: negative value");
  return v.get_str(16);
}

BigInt from_hex(std::string_view hex) {
  if (hex.empty()) throw std::invalid_argument("from_hex: empty string");
  for (char c : hex) {
    const bool ok = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
    if (!ok) throw std::invalid_argument("from_hex: invalid digit");
  }
  BigInt v;
  if (v.set_str(std::string(hex), 16) != 0) throw std::invalid_argument("from_hex: parse failure");
  return v;
}

RandomSource RandomSource::seeded(std::uint64_t seed) {
  RandomSource r;
  r.state_ = std::make_unique<gmp_randclass>(gmp_randinit_mt);
  r.state_->seed(BigInt(std::to_string(seed)));
  return r;
}

RandomSource RandomSource::os() { return RandomSource(); }

RandomSource::RandomSource(RandomSource&&) noexcept = default;
RandomSource& RandomSource::operator=(RandomSource&&) noexcept = default;
RandomSource::~RandomSource() = default;

BigInt RandomSource::bits(std::size_t nbits) {
  if (nbits == 0) return 0;
  if (state_) return state_->get_z_bits(static_cast<mp_bitcnt_t>(nbits));
  std::vector<unsigned char> buf((nbits + 7) / 8);
  if (RAND_bytes(buf.data(), static_cast<int>(buf.size())) != 1) {
    throw std::runtime_error("random source: operating system entropy unavailable");
  }
  const std::size_t extra = buf.size() * 8 - nbits;
  buf[0] = static_cast<unsigned char>(buf[0] & (0xffu >> extra));
  BigInt v;
  mpz_import(v.get_mpz_t(), buf.size(), 1, 1, 1, 0, buf.data());
  return v;
}

BigInt RandomSource::below(const BigInt& bound) {
  if (bound <= 0) throw std::invalid_argument("random source: bound must be positive");
  const std::size_t nbits = mpz_sizeinbase(bound.get_mpz_t(), 2);
  for (;;) {
    BigInt v = bits(nbits);
    if (v < bound) return v;
  }
}

namespace {

constexpr std::array<unsigned, 54> kSmallPrimes = {
    2,   3,   5,   7,   11,  13,  17,  19,  23,  29,  31,  37,  41,  43,  47,  53,  59,  61,
    67,  71,  73,  79,  83,  89,  97,  101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151,
    157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251};

}  // namespace

bool is_probable_prime(const BigInt& n, RandomSource& rng, int rounds) {
  if (n < 2) return false;
  for (unsigned p : kSmallPrimes) {
    if (n == p) return true;
    if (mpz_divisible_ui_p(n.get_mpz_t(), p)) return false;
  }
  const BigInt n1 = n - 1;
  BigInt d = n1;
  unsigned long s = 0;
  while (mpz_even_p(d.get_mpz_t())) {
    d >>= 1;
    ++s;
  }
  const BigInt span = n - 3;
  BigInt x;
  for (int i = 0; i < rounds; ++i) {
    const BigInt a = rng.below(span) + 2;  // [2, n-2]
    mpz_powm(x.get_mpz_t(), a.get_mpz_t(), d.get_mpz_t(), n.get_mpz_t());
    if (x == 1 || x == n1) continue;
    bool witness = true;
    for (unsigned long r = 1; r < s; ++r) {
      x = (x * x) % n;
      if (x == n1) {
        witness = false;
        break;
      }
    }
    if (witness) return false;
  }
  return true;
}

BigInt random_prime(std::size_t nbits, RandomSource& rng, int rounds) {
  if (nbits < 4) throw std::invalid_argument("random_prime: need at least 4 bits");
  for (;;) {
    BigInt c = rng.bits(nbits);
    mpz_setbit(c.get_mpz_t(), nbits - 1);
    mpz_setbit(c.get_mpz_t(), nbits - 2);
    mpz_setbit(c.get_mpz_t(), 0);
    if (is_probable_prime(c, rng, rounds)) return c;
  }
}

}  // namespace cnl::crypto
