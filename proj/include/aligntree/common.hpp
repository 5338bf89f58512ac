#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace aligntree {

// ============================================================================
// Errors
// ============================================================================

/// Base class for every error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or precondition violation (bad temperature, empty list, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A tabular model was queried on a context it has no row for.
class UnknownContextError : public Error {
 public:
  using Error::Error;
};

/// Both weak models assign probability zero to a sequence; the log-ratio is
/// undefined and the candidate must not be ranked.
class UndefinedRatioError : public Error {
 public:
  using Error::Error;
};

/// A model provider failed (network, auth, timeout, missing capability).
class ProviderError : public Error {
 public:
  using Error::Error;
};

/// A remote endpoint answered with something we cannot interpret. Carries the
/// raw payload for diagnosis.
class ProtocolError : public ProviderError {
 public:
  ProtocolError(const std::string& what, std::string payload)
      : ProviderError(what + "\npayload: " + payload), payload_(std::move(payload)) {}
  const std::string& payload() const { return payload_; }

 private:
  std::string payload_;
};

/// The endpoint lacks a capability this operation requires (e.g. echo scoring).
class CapabilityError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

/// Configuration file or RunConfig is invalid.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An enumeration would exceed its configured budget.
class BudgetError : public Error {
 public:
  using Error::Error;
};

// ============================================================================
// Numeric conventions
// ============================================================================

/// Log-probability sentinel for probability zero. Natural log everywhere.
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// ============================================================================
// Deterministic RNG
// ============================================================================

/// Seeded random stream. Wraps splitmix64 so that draws are identical across
/// platforms and standard-library versions (std distributions are not
/// portable). State advances one 64-bit word per draw.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 bits of entropy.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

/// Derives a child seed from (seed, index). Used for nested substreams:
/// best_of_n sample i, per-prompt streams, etc. Extending the index set
/// extends rather than reshuffles the derived streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  Rng mix(seed ^ (0xa076'1d64'78bd'642full + index * 0xe703'7ed1'a0b4'28dbull));
  return mix.next_u64();
}

}  // namespace aligntree
