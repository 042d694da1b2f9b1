#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

namespace cnl::crypto {

using BigInt = mpz_class;

/// Lowercase hex, no leading zeros; zero is "0".
std::string to_hex(const BigInt& v);
/// Accepts lowercase or uppercase hex digits only. Throws std::invalid_argument.
BigInt from_hex(std::string_view hex);

/// Either a seeded Mersenne-Twister stream (deterministic, test mode) or the
/// operating system CSPRNG. Not thread-safe; give each thread its own.
class RandomSource {
 public:
  static RandomSource seeded(std::uint64_t seed);
  static RandomSource os();

  RandomSource(RandomSource&&) noexcept;
  RandomSource& operator=(RandomSource&&) noexcept;
  ~RandomSource();

  bool is_os() const { return state_ == nullptr; }

  /// Uniform integer with exactly `bits` random bits (may have leading zeros).
  BigInt bits(std::size_t bits);
  /// Uniform in [0, bound). bound must be positive.
  BigInt below(const BigInt& bound);

 private:
  RandomSource() = default;
  std::unique_ptr<gmp_randclass> state_;
};

/// Trial division by small primes, then `rounds` Miller–Rabin rounds with
/// bases drawn from `rng`.
bool is_probable_prime(const BigInt& n, RandomSource& rng, int rounds = 64);

/// Random prime with exactly `bits` bits and the top two bits set.
BigInt random_prime(std::size_t bits, RandomSource& rng, int rounds = 64);

}  // namespace cnl::crypto
