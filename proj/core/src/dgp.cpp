#include "nirvar/dgp.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

namespace nirvar::dgp {

PanelTensor::PanelTensor(int features, int series, Matrix data) : q_(features), n_(series), data_(std::move(data)) {
  if (features < 1 || series < 1) throw ConfigError("panel needs Q >= 1 and N >= 1");
  if (data_.rows() != static_cast<Index>(features) * series)
    throw ConfigError("panel data must have N*Q rows");
  if (!data_.allFinite()) throw ConfigError("panel contains non-finite values");
}

void NoiseSpec::validate(int n) const {
  if (covariance) {
    const Matrix& s = *covariance;
    if (s.rows() != n || s.cols() != n) throw ConfigError("noise covariance must be N x N");
    if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw ConfigError("noise covariance must be symmetric");
    if (Eigen::LLT<Matrix>(s).info() != Eigen::Success) throw ConfigError("noise covariance must be positive definite");
  } else if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw ConfigError("noise variance must be positive");
  }
}

Matrix NoiseSpec::sigma(int n) const {
  if (covariance) return *covariance;
  return sigma2 * Matrix::Identity(n, n);
}

graph::AdjacencyStack CoefficientStack::adjacency(int target) const {
  std::vector<BinaryMatrix> blocks;
  for (int r = 0; r < q; ++r)
    blocks.emplace_back(support.block(static_cast<Index>(target) * n, static_cast<Index>(r) * n, n, n));
  return graph::AdjacencyStack(std::move(blocks));
}

double spectral_radius(const Matrix& m) {
  if (m.rows() != m.cols()) throw ConfigError("spectral radius needs a square matrix");
  const Index n = m.rows();
  if (n == 0) return 0.0;
  if (n > 512) {
    Vector v = Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
    double estimate = 0.0;
    for (int it = 0; it < 10000; ++it) {
      Vector w = m * v;
      const double norm = w.norm();
      if (norm == 0.0) return 0.0;
      if (std::abs(norm - estimate) <= 1e-10 * norm) return norm;
      estimate = norm;
      v = w / norm;
    }
    // Not converged (complex dominant pair or near-degenerate spectrum).
  }
  Eigen::EigenSolver<Matrix> es(m, false);
  if (es.info() != Eigen::Success) throw NumericalError("eigenvalue computation failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

namespace {

struct Support {
  int n;
  int q;
  BinaryMatrix a;
};

Support joint_support(std::span<const graph::AdjacencyStack> per_response) {
  if (per_response.empty()) throw ConfigError("need at least one response stack");
  const int q = static_cast<int>(per_response.size());
  const int n = per_response.front().nodes();
  BinaryMatrix a(static_cast<Index>(n) * q, static_cast<Index>(n) * q);
  for (int r = 0; r < q; ++r) {
    const auto& stack = per_response[static_cast<std::size_t>(r)];
    if (stack.nodes() != n || stack.features() != q)
      throw ConfigError("each response stack must have Q blocks of size N x N");
    a.middleRows(static_cast<Index>(r) * n, n) = stack.unfolded();
  }
  return {n, q, std::move(a)};
}

Matrix draw_weights(const WeightRule& rule, const Support& s, Rng& rng) {
  const Index dim = s.a.rows();
  if (std::holds_alternative<Uniform01>(rule)) {
    Matrix w(dim, dim);
    for (Index j = 0; j < dim; ++j)
      for (Index i = 0; i < dim; ++i) w(i, j) = rng.uniform();
    return w;
  }
  if (const auto* c = std::get_if<Constant>(&rule)) return Matrix::Constant(dim, dim, c->value);
  const Matrix& w = std::get<Explicit>(rule).weights;
  if (w.rows() != dim || w.cols() != dim) throw ConfigError("explicit weights must be NQ x NQ");
  return w;
}

void check_target(double target_rho) {
  if (!(target_rho > 0.0 && target_rho < 1.0)) throw ConfigError("target spectral radius must lie in (0, 1)");
}

CoefficientStack finish(const Support& s, const Matrix& weights, double scale) {
  CoefficientStack c;
  c.n = s.n;
  c.q = s.q;
  c.support = s.a;
  c.weights = weights * scale;
  c.xi = s.a.cast<double>().cwiseProduct(c.weights);
  c.spectral_radius = spectral_radius(c.xi);
  c.nonstationary = c.spectral_radius >= 1.0;
  return c;
}

}  // namespace

CoefficientStack build_coefficients(std::span<const graph::AdjacencyStack> per_response, const WeightRule& rule,
                                    double target_rho, Rng& rng) {
  check_target(target_rho);
  const Support s = joint_support(per_response);
  const Matrix w = draw_weights(rule, s, rng);
  const Matrix raw = s.a.cast<double>().cwiseProduct(w);
  const double rho = spectral_radius(raw);
  if (!(rho > 0.0)) throw ConfigError("coefficient matrix has zero spectral radius and cannot be scaled");
  return finish(s, w, target_rho / rho);
}

CoefficientStack build_coefficients_expected(std::span<const graph::AdjacencyStack> per_response,
                                             const WeightRule& rule, const Matrix& expected_adjacency,
                                             double target_rho, Rng& rng) {
  check_target(target_rho);
  const Support s = joint_support(per_response);
  if (expected_adjacency.rows() != s.a.rows() || expected_adjacency.cols() != s.a.cols())
    throw ConfigError("expected adjacency must be NQ x NQ");
  const Matrix w = draw_weights(rule, s, rng);
  const double rho = spectral_radius(expected_adjacency.cwiseProduct(w));
  if (!(rho > 0.0)) throw ConfigError("expected coefficient matrix has zero spectral radius");
  return finish(s, w, target_rho / rho);
}

CoefficientStack draw_stationary(const std::function<CoefficientStack(Rng&)>& draw, Rng& rng, int max_attempts) {
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    Rng stream = rng.split(static_cast<std::uint64_t>(attempt));
    CoefficientStack c = draw(stream);
    if (c.spectral_radius < 1.0) return c;
  }
  throw NumericalError("no stationary coefficient draw after " + std::to_string(max_attempts) + " attempts");
}

PanelTensor simulate(const CoefficientStack& coeffs, const NoiseSpec& noise, int length, int burn_in, Rng& rng) {
  if (length < 1) throw ConfigError("T must be >= 1");
  if (burn_in < 0) throw ConfigError("burn-in must be >= 0");
  if (!(coeffs.spectral_radius < 1.0))
    throw ConfigError("coefficients are not stationary (spectral radius " + std::to_string(coeffs.spectral_radius) +
                      ")");
  noise.validate(coeffs.n);
  const Index dim = coeffs.xi.rows();
  const Index n = coeffs.n;

  std::optional<Matrix> chol;
  if (noise.covariance) chol = Eigen::LLT<Matrix>(*noise.covariance).matrixL().toDenseMatrix();
  const double scale = std::sqrt(noise.sigma2);

  Matrix out(dim, length);
  Vector x = Vector::Zero(dim);
  Vector eps(dim);
  for (int t = 0; t < burn_in + length; ++t) {
    for (Index i = 0; i < dim; ++i) eps(i) = rng.normal();
    if (chol) {
      for (int q = 0; q < coeffs.q; ++q) eps.segment(q * n, n) = (*chol) * eps.segment(q * n, n);
    } else {
      eps *= scale;
    }
    x = coeffs.xi * x + eps;
    if (t >= burn_in) out.col(t - burn_in) = x;
  }
  return PanelTensor(coeffs.q, coeffs.n, std::move(out));
}

Matrix lyapunov_covariance(const Matrix& phi, const Matrix& sigma, double tol, int max_terms) {
  if (phi.rows() != phi.cols() || sigma.rows() != phi.rows() || sigma.cols() != phi.cols())
    throw ConfigError("Lyapunov inputs must be square and conformable");
  Matrix gamma = sigma;
  Matrix term = sigma;
  for (int k = 1; k < max_terms; ++k) {
    term = phi * term * phi.transpose();
    gamma += term;
    if (term.norm() < tol) return gamma;
    if (!term.allFinite()) break;
  }
  throw NumericalError("Lyapunov series did not converge; spectral radius too close to 1");
}

Matrix lyapunov_covariance(const CoefficientStack& coeffs, const NoiseSpec& noise, double tol) {
  noise.validate(coeffs.n);
  const Matrix s = noise.sigma(coeffs.n);
  Matrix full = Matrix::Zero(coeffs.xi.rows(), coeffs.xi.cols());
  for (int q = 0; q < coeffs.q; ++q) full.block(q * coeffs.n, q * coeffs.n, coeffs.n, coeffs.n) = s;
  return lyapunov_covariance(coeffs.xi, full, tol);
}

}  // namespace nirvar::dgp
