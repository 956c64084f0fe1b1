#pragma once

#include "kbi/linalg.hpp"

#include <cstdint>
#include <limits>
#include <string_view>

namespace kbi {

/// Counter-based 64-bit generator: output k is a SplitMix64 finalizer
/// applied to key + k * golden-ratio increment. Streams are keyed by
/// (master seed, label, index), so a replicate's draws never depend on
/// which thread runs it or in what order.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t master_seed, std::string_view label, std::uint64_t index = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Zero-mean Laplace with density (rate/2) exp(-rate |x|).
  double laplace(double rate);

  /// Derives an independent child stream.
  RngStream split(std::string_view label, std::uint64_t index = 0) const;

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  explicit RngStream(std::uint64_t key) : key_(key) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// FNV-1a hash of a byte string.
std::uint64_t fnv1a64(std::string_view bytes);

/// Gaussian vector N(mean, cov) via the Cholesky factor of cov.
Vector sample_gaussian(RngStream& rng, const Vector& mean, const Matrix& cov);

}  // namespace kbi
