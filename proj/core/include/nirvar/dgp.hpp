#pragma once

#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "nirvar/common.hpp"
#include "nirvar/graph.hpp"
#include "nirvar/rng.hpp"

namespace nirvar::dgp {

/// Q features x N series x T time points, stored as an NQ x T matrix whose
/// column t is the stacked vector X_t = (X_t^(1)', ..., X_t^(Q)')'.
class PanelTensor {
 public:
  PanelTensor() = default;
  PanelTensor(int features, int series, Matrix data);

  int features() const { return q_; }
  int series() const { return n_; }
  int length() const { return static_cast<int>(data_.cols()); }

  const Matrix& data() const { return data_; }
  /// N x T block of feature q.
  auto feature(int q) const { return data_.middleRows(static_cast<Index>(q) * n_, n_); }

 private:
  int q_ = 0;
  int n_ = 0;
  Matrix data_;
};

/// Gaussian innovations: sigma2 * I unless a full N x N covariance is given.
struct NoiseSpec {
  double sigma2 = 1.0;
  std::optional<Matrix> covariance;

  void validate(int n) const;
  /// N x N covariance Sigma.
  Matrix sigma(int n) const;
};

struct Uniform01 {};
struct Constant {
  double value = 1.0;
};
/// NQ x NQ weights (joint) or N x NQ weights for a single response.
struct Explicit {
  Matrix weights;
};
using WeightRule = std::variant<Uniform01, Constant, Explicit>;

/// Coefficients of the joint VAR(1) X_t = Xi X_{t-1} + eps_t.
///
/// Row block q of `xi` is Phi_q = (A_q^(1) o W_q^(1) | ... | A_q^(Q) o W_q^(Q)).
struct CoefficientStack {
  int n = 0;
  int q = 0;
  Matrix xi;
  BinaryMatrix support;
  Matrix weights;
  double spectral_radius = 0.0;
  /// Set when scaling was done against expected adjacency and the realised
  /// radius is >= 1.
  bool nonstationary = false;

  /// N x NQ coefficient matrix of response feature `target`.
  Matrix response(int target) const { return xi.middleRows(static_cast<Index>(target) * n, n); }
  graph::AdjacencyStack adjacency(int target) const;
};

/// Largest eigenvalue modulus. Full eigensolve for n <= 512, power
/// iteration (1e-10 relative tolerance, 10000 iterations) above that.
double spectral_radius(const Matrix& m);

/// Phi = A o W rescaled so that rho(Xi) == target_rho.
///
/// `per_response[q]` holds the Q adjacency blocks of response feature q, so a
/// single-feature study passes one stack with one block.
CoefficientStack build_coefficients(std::span<const graph::AdjacencyStack> per_response, const WeightRule& rule,
                                    double target_rho, Rng& rng);

/// Scales against an expected adjacency (NQ x NQ) instead of the sampled one:
/// Phi = A o W * target_rho / rho(E[A] o W). The realised radius may exceed 1,
/// in which case `nonstationary` is set.
CoefficientStack build_coefficients_expected(std::span<const graph::AdjacencyStack> per_response,
                                             const WeightRule& rule, const Matrix& expected_adjacency,
                                             double target_rho, Rng& rng);

/// Redraws coefficients until the realised spectral radius is below 1.
CoefficientStack draw_stationary(const std::function<CoefficientStack(Rng&)>& draw, Rng& rng,
                                 int max_attempts = 1000);

/// Runs the recursion from X = 0, discards `burn_in` steps, returns T steps.
PanelTensor simulate(const CoefficientStack& coeffs, const NoiseSpec& noise, int length, int burn_in, Rng& rng);

/// Stationary covariance Gamma = sum_k Phi^k Sigma (Phi')^k, truncated once the
/// Frobenius norm of a term falls below `tol`.
Matrix lyapunov_covariance(const Matrix& phi, const Matrix& sigma, double tol = 1e-13, int max_terms = 200000);

/// Gamma of the stacked NQ process with Sigma applied independently per feature.
Matrix lyapunov_covariance(const CoefficientStack& coeffs, const NoiseSpec& noise, double tol = 1e-13);

}  // namespace nirvar::dgp
