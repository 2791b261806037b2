#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pdslab {

/// Bad argument values or shapes.
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A precondition on the *kind* of input was violated (e.g. unlabeled data
/// handed to a routine that needs rewards).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Configuration or file content failed validation.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// SplitMix64 finalizer; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Thin wrapper over mt19937_64 whose real/integer conversions are fixed here
/// rather than left to the standard library, so streams are identical across
/// toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  /// Draw from an unnormalized nonnegative weight vector.
  std::size_t categorical(std::span<const double> weights);
  /// Standard normal via Box-Muller (no cached second value).
  double normal();

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

/// Shortest representation that round-trips to the same double.
std::string format_double(double v);

}  // namespace pdslab
