#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nirvar/common.hpp"
#include "nirvar/dgp.hpp"

namespace nirvar::spectral {

enum class Mode { Covariance, Precision, Correlation };

Mode parse_mode(const std::string& name);
std::string to_string(Mode mode);

/// Per-feature second-moment matrices S^(q) = X^(q) X^(q)' / T, or their
/// inverses (precision) or unit-diagonal rescalings (correlation).
struct CovarianceStack {
  int n = 0;
  int q = 0;
  int length = 0;
  Mode mode = Mode::Covariance;
  std::vector<Matrix> blocks;

  /// Aspect ratio N / T.
  double eta() const { return static_cast<double>(n) / length; }
  /// (S^(1) | ... | S^(Q)), N x NQ.
  Matrix unfolded() const;
};

/// Subtracts each series' sample mean.
dgp::PanelTensor demean(const dgp::PanelTensor& panel);
/// Per-series sample means, length NQ.
Vector series_means(const dgp::PanelTensor& panel);

/// Assumes the panel is already demeaned. Precision mode requires T > N and
/// an invertible covariance.
CovarianceStack covariance_stack(const dgp::PanelTensor& panel, Mode mode);

/// Symmetric eigenvalues in descending order.
Vector sorted_eigenvalues(const Matrix& symmetric);

/// Truncated SVD S = U D V' of the unfolded stack.
struct EmbeddingResult {
  /// Q blocks of N x d right embeddings, (V D^{1/2}) split by feature.
  std::vector<Matrix> right;
  /// U D^{1/2}, N x d.
  Matrix left;
  Matrix u;
  Vector singular_values;
  int rank = 0;
  std::vector<std::string> warnings;
};

/// Keeps the d largest singular values; values below 1e-12 are dropped with
/// a warning. Singular vectors are sign-normalised so the largest-magnitude
/// entry of each column of U is positive.
EmbeddingResult uase(const CovarianceStack& stack, int d);

/// sqrt(1 - 1/lambda) where lambda > 1, 0 otherwise.
Vector scale_spectrum(const Vector& lambda_gamma);

/// U diag(scale_spectrum(D / noise_variance))^{1/2}: the embedding of the
/// coefficient matrix implied by the covariance spectrum.
Matrix rescaled_embedding(const EmbeddingResult& embedding, double noise_variance);

/// Marchenko-Pastur support edges for aspect ratio eta in (0, 1).
struct MPParams {
  double eta = 0.0;
  double sigma2 = 1.0;

  static MPParams make(double eta, double sigma2);

  double x_minus() const;
  double x_plus() const;
  /// Support edges of the reciprocal distribution.
  double y_minus() const;
  double y_plus() const;
};

double mp_density(double x, double eta, double sigma2);
/// Adaptive Simpson integration of mp_density, absolute tolerance 1e-8.
double mp_cdf(double x, double eta, double sigma2);
double imp_density(double y, double eta, double sigma2);
double imp_cdf(double y, double eta, double sigma2);

/// Integrates f over [a, b] by adaptive Simpson's rule.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol, int max_depth = 50);

struct RankSelection {
  int d_hat = 1;
  int exceedances = 0;
  double threshold = 0.0;
  /// No informative eigenvalue; d_hat was forced to 1.
  bool degenerate = false;
};

/// Number of covariance eigenvalues above x_+.
RankSelection select_rank_cov(const Vector& eigenvalues, double eta, double sigma2);
/// Number of precision eigenvalues below y_-.
RankSelection select_rank_prec(const Vector& eigenvalues, double eta, double sigma2);

/// KS distance between the eigenvalue empirical CDF and MP(eta, sigma2).
double mp_ks_statistic(const Vector& eigenvalues, double eta, double sigma2);

struct MPFit {
  double sigma2 = 1.0;
  double ks = 0.0;
};

/// sigma2 minimising the KS distance over [1e-4 median, 10 median]. In
/// correlation mode the scale is fixed at 1.
MPFit fit_mp_scale(const Vector& eigenvalues, double eta, Mode mode = Mode::Covariance);

}  // namespace nirvar::spectral
