#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

namespace nirvar {

/// Splittable counter-based generator.
///
/// Each stream is identified by a 64-bit key; the n-th output of a stream is a
/// SplitMix64 finalisation of (key, n). Child streams are derived with
/// split(), so independent tasks (replicas, restarts, windows) can each own a
/// generator whose output does not depend on scheduling order.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Child stream keyed by an integer (replica index, restart number, ...).
  [[nodiscard]] Rng split(std::uint64_t key) const;
  /// Child stream keyed by a name ("graph", "weights", "noise", "gmm").
  [[nodiscard]] Rng split(std::string_view name) const;

  /// Uniform on [0, 1).
  double uniform();
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t key() const { return key_; }

 private:
  Rng(std::uint64_t key, bool /*raw*/) : key_(key) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace nirvar
