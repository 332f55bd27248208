#include "nirvar/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <boost/math/tools/minima.hpp>

#include "nirvar/stats.hpp"

namespace nirvar::spectral {

Mode parse_mode(const std::string& name) {
  if (name == "covariance") return Mode::Covariance;
  if (name == "precision") return Mode::Precision;
  if (name == "correlation") return Mode::Correlation;
  throw ConfigError("unknown embedding mode '" + name + "'");
}

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::Covariance: return "covariance";
    case Mode::Precision: return "precision";
    case Mode::Correlation: return "correlation";
  }
  return "covariance";
}

Matrix CovarianceStack::unfolded() const {
  Matrix s(n, static_cast<Index>(n) * q);
  for (int r = 0; r < q; ++r) s.middleCols(static_cast<Index>(r) * n, n) = blocks[static_cast<std::size_t>(r)];
  return s;
}

Vector series_means(const dgp::PanelTensor& panel) { return panel.data().rowwise().mean(); }

dgp::PanelTensor demean(const dgp::PanelTensor& panel) {
  Matrix centered = panel.data().colwise() - series_means(panel);
  return dgp::PanelTensor(panel.features(), panel.series(), std::move(centered));
}

CovarianceStack covariance_stack(const dgp::PanelTensor& panel, Mode mode) {
  CovarianceStack out;
  out.n = panel.series();
  out.q = panel.features();
  out.length = panel.length();
  out.mode = mode;
  if (mode == Mode::Precision && out.length <= out.n)
    throw ConfigError("precision embedding needs T > N: the covariance matrix is not invertible");

  for (int q = 0; q < out.q; ++q) {
    const auto x = panel.feature(q);
    Matrix s = x * x.transpose() / static_cast<double>(out.length);
    s = 0.5 * (s + s.transpose());
    if (mode == Mode::Precision) {
      Eigen::LDLT<Matrix> ldlt(s);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-12)
        throw NumericalError("covariance matrix of feature " + std::to_string(q + 1) + " is not invertible");
      Matrix omega = ldlt.solve(Matrix::Identity(out.n, out.n));
      s = 0.5 * (omega + omega.transpose());
    } else if (mode == Mode::Correlation) {
      const Vector d = s.diagonal();
      if ((d.array() <= 0.0).any()) throw NumericalError("correlation undefined for a constant series");
      const Vector inv = d.array().rsqrt();
      s = inv.asDiagonal() * s * inv.asDiagonal();
      s.diagonal().setOnes();
    }
    out.blocks.push_back(std::move(s));
  }
  return out;
}

Vector sorted_eigenvalues(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("symmetric eigensolve failed");
  return es.eigenvalues().reverse();
}

EmbeddingResult uase(const CovarianceStack& stack, int d) {
  if (d < 1 || d > stack.n) throw ConfigError("embedding dimension must lie in [1, N]");
  const Matrix s = stack.unfolded();
  Eigen::BDCSVD<Matrix> svd(s, Eigen::ComputeThinU);

  EmbeddingResult out;
  const Vector& sv = svd.singularValues();
  int keep = 0;
  while (keep < d && sv(keep) >= 1e-12) ++keep;
  if (keep < d)
    out.warnings.push_back("requested dimension " + std::to_string(d) + " exceeds numerical rank; kept " +
                           std::to_string(keep));
  if (keep == 0) throw NumericalError("stack has no singular value above 1e-12");

  out.rank = keep;
  out.singular_values = sv.head(keep);
  out.u = svd.matrixU().leftCols(keep);
  for (int j = 0; j < keep; ++j) {
    Index imax = 0;
    out.u.col(j).cwiseAbs().maxCoeff(&imax);
    if (out.u(imax, j) < 0.0) out.u.col(j) *= -1.0;
  }
  const Vector root = out.singular_values.cwiseSqrt();
  out.left = out.u * root.asDiagonal();
  // V_q = S_q' U D^{-1}, so V_q D^{1/2} = S_q' U D^{-1/2}. Computing each block
  // from its own S_q keeps identical layers bit-identical.
  const Vector inv_root = root.cwiseInverse();
  for (int q = 0; q < stack.q; ++q)
    out.right.push_back(stack.blocks[static_cast<std::size_t>(q)].transpose() * out.u * inv_root.asDiagonal());
  return out;
}

Vector scale_spectrum(const Vector& lambda_gamma) {
  Vector out(lambda_gamma.size());
  for (Index i = 0; i < lambda_gamma.size(); ++i) {
    const double l = lambda_gamma(i);
    out(i) = l > 1.0 ? std::sqrt(1.0 - 1.0 / l) : 0.0;
  }
  return out;
}

Matrix rescaled_embedding(const EmbeddingResult& embedding, double noise_variance) {
  if (!(noise_variance > 0.0)) throw ConfigError("noise variance must be positive");
  const Vector lambda_phi = scale_spectrum(embedding.singular_values / noise_variance);
  return embedding.u * lambda_phi.cwiseSqrt().asDiagonal();
}

MPParams MPParams::make(double eta, double sigma2) {
  if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("Marchenko-Pastur aspect ratio must lie in (0, 1)");
  if (!(sigma2 > 0.0)) throw ConfigError("Marchenko-Pastur scale must be positive");
  return {eta, sigma2};
}

double MPParams::x_minus() const { return sigma2 * std::pow(1.0 - std::sqrt(eta), 2); }
double MPParams::x_plus() const { return sigma2 * std::pow(1.0 + std::sqrt(eta), 2); }
double MPParams::y_minus() const { return std::pow((1.0 - std::sqrt(eta)) / (1.0 - eta), 2) / sigma2; }
double MPParams::y_plus() const { return std::pow((1.0 + std::sqrt(eta)) / (1.0 - eta), 2) / sigma2; }

double mp_density(double x, double eta, double sigma2) {
  const auto p = MPParams::make(eta, sigma2);
  const double lo = p.x_minus();
  const double hi = p.x_plus();
  if (x <= lo || x >= hi) return 0.0;
  return std::sqrt((x - lo) * (hi - x)) / (2.0 * std::numbers::pi * sigma2 * eta * x);
}

double imp_density(double y, double eta, double sigma2) {
  const auto p = MPParams::make(eta, sigma2);
  const double lo = p.y_minus();
  const double hi = p.y_plus();
  if (y <= lo || y >= hi) return 0.0;
  return (1.0 - eta) * std::sqrt((hi - y) * (y - lo)) / (2.0 * std::numbers::pi * eta * y * y);
}

namespace {

double simpson_step(const std::function<double(double)>& f, double a, double fa, double b, double fb, double m,
                    double fm, double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

// Both densities have square-root zeros at the support edges. On
// x = lo + w (1 - cos t) / 2 the integrand becomes smooth in t.
struct EdgeMap {
  double lo;
  double width;

  double x(double t) const { return lo + 0.5 * width * (1.0 - std::cos(t)); }
  double t(double x) const { return std::acos(std::clamp(1.0 - 2.0 * (x - lo) / width, -1.0, 1.0)); }
};

constexpr double kCdfTol = 1e-8;

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol, int max_depth) {
  if (a == b) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double m = 0.5 * (a + b);
  const double fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_step(f, a, fa, b, fb, m, fm, whole, tol, max_depth);
}

double mp_cdf(double x, double eta, double sigma2) {
  const auto p = MPParams::make(eta, sigma2);
  if (x <= p.x_minus()) return 0.0;
  if (x >= p.x_plus()) return 1.0;
  const EdgeMap map{p.x_minus(), p.x_plus() - p.x_minus()};
  const double c = map.width * map.width / (8.0 * std::numbers::pi * sigma2 * eta);
  auto integrand = [&](double t) {
    const double s = std::sin(t);
    return c * s * s / map.x(t);
  };
  return std::clamp(adaptive_simpson(integrand, 0.0, map.t(x), kCdfTol), 0.0, 1.0);
}

double imp_cdf(double y, double eta, double sigma2) {
  const auto p = MPParams::make(eta, sigma2);
  if (y <= p.y_minus()) return 0.0;
  if (y >= p.y_plus()) return 1.0;
  const EdgeMap map{p.y_minus(), p.y_plus() - p.y_minus()};
  const double c = (1.0 - eta) * map.width * map.width / (8.0 * std::numbers::pi * eta);
  auto integrand = [&](double t) {
    const double s = std::sin(t);
    const double yt = map.x(t);
    return c * s * s / (yt * yt);
  };
  return std::clamp(adaptive_simpson(integrand, 0.0, map.t(y), kCdfTol), 0.0, 1.0);
}

RankSelection select_rank_cov(const Vector& eigenvalues, double eta, double sigma2) {
  RankSelection r;
  // The upper edge keeps its form for eta >= 1, where N - T eigenvalues are 0.
  if (!(eta > 0.0) || !(sigma2 > 0.0)) throw ConfigError("eta and sigma2 must be positive");
  r.threshold = sigma2 * std::pow(1.0 + std::sqrt(eta), 2);
  r.exceedances = static_cast<int>((eigenvalues.array() > r.threshold).count());
  r.degenerate = r.exceedances == 0;
  r.d_hat = std::max(1, r.exceedances);
  return r;
}

RankSelection select_rank_prec(const Vector& eigenvalues, double eta, double sigma2) {
  RankSelection r;
  r.threshold = MPParams::make(eta, sigma2).y_minus();
  r.exceedances = static_cast<int>((eigenvalues.array() < r.threshold).count());
  r.degenerate = r.exceedances == 0;
  r.d_hat = std::max(1, r.exceedances);
  return r;
}

double mp_ks_statistic(const Vector& eigenvalues, double eta, double sigma2) {
  const auto p = MPParams::make(eta, sigma2);
  std::vector<double> x(eigenvalues.data(), eigenvalues.data() + eigenvalues.size());
  std::sort(x.begin(), x.end());

  // Evaluate the CDF at the sorted points by accumulating interval integrals.
  const EdgeMap map{p.x_minus(), p.x_plus() - p.x_minus()};
  const double c = map.width * map.width / (8.0 * std::numbers::pi * sigma2 * eta);
  auto integrand = [&](double t) {
    const double s = std::sin(t);
    return c * s * s / map.x(t);
  };
  std::vector<double> cdf(x.size());
  double t_prev = 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] <= p.x_minus()) {
      cdf[i] = 0.0;
    } else if (x[i] >= p.x_plus()) {
      cdf[i] = 1.0;
    } else {
      const double t = map.t(x[i]);
      acc += adaptive_simpson(integrand, t_prev, t, kCdfTol / static_cast<double>(x.size()));
      t_prev = t;
      cdf[i] = std::clamp(acc, 0.0, 1.0);
    }
  }
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  std::size_t i = 0;
  while (i < x.size()) {
    std::size_t j = i;
    while (j + 1 < x.size() && x[j + 1] == x[i]) ++j;
    d = std::max({d, static_cast<double>(j + 1) / n - cdf[i], cdf[i] - static_cast<double>(i) / n});
    i = j + 1;
  }
  return d;
}

MPFit fit_mp_scale(const Vector& eigenvalues, double eta, Mode mode) {
  if (mode == Mode::Correlation) return {1.0, mp_ks_statistic(eigenvalues, eta, 1.0)};
  if (eigenvalues.size() < 10) throw ConfigError("MP scale fit needs at least 10 eigenvalues");
  MPParams::make(eta, 1.0);

  double centre = stats::median(std::vector<double>(eigenvalues.data(), eigenvalues.data() + eigenvalues.size()));
  if (!(centre > 0.0)) centre = std::max(eigenvalues.cwiseAbs().mean(), 1e-300);
  const double lo = 1e-4 * centre;
  const double hi = 10.0 * centre;

  auto objective = [&](double s2) { return mp_ks_statistic(eigenvalues, eta, s2); };

  // The KS objective is piecewise smooth with kinks; a log grid brackets the
  // global minimum before the Brent refinement.
  constexpr int kGrid = 160;
  std::vector<double> grid(kGrid), value(kGrid);
  for (int k = 0; k < kGrid; ++k) {
    grid[k] = lo * std::pow(hi / lo, static_cast<double>(k) / (kGrid - 1));
    value[k] = objective(grid[k]);
  }
  const int best = static_cast<int>(std::min_element(value.begin(), value.end()) - value.begin());
  const double a = grid[static_cast<std::size_t>(std::max(0, best - 1))];
  const double b = grid[static_cast<std::size_t>(std::min(kGrid - 1, best + 1))];
  const auto [s2, ks] = boost::math::tools::brent_find_minima(objective, a, b, 24);
  if (ks <= value[static_cast<std::size_t>(best)]) return {s2, ks};
  return {grid[static_cast<std::size_t>(best)], value[static_cast<std::size_t>(best)]};
}

}  // namespace nirvar::spectral
