#include "nirvar/evalbench.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <unordered_map>

#include "nirvar/restricted_var.hpp"
#include "nirvar/spectral.hpp"
#include "nirvar/stats.hpp"

namespace nirvar::eval {
namespace {

double sign(double x) { return x >= 0.0 ? 1.0 : -1.0; }

void check_same_shape(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ConfigError("predictions and realized values differ in shape");
}

double choose2(double n) { return 0.5 * n * (n - 1.0); }

}  // namespace

std::vector<double> pnl_series(const Matrix& predictions, const Matrix& realized) {
  check_same_shape(predictions, realized);
  std::vector<double> out(static_cast<std::size_t>(predictions.rows()), 0.0);
  for (Index t = 0; t < predictions.rows(); ++t)
    for (Index i = 0; i < predictions.cols(); ++i) out[static_cast<std::size_t>(t)] += sign(predictions(t, i)) * realized(t, i);
  return out;
}

std::vector<double> pnl_with_costs(const Matrix& predictions, const Matrix& realized, double cost_bps) {
  if (!(cost_bps >= 0.0)) throw ConfigError("cost_bps must be >= 0");
  auto out = pnl_series(predictions, realized);
  const double cost = cost_bps / 1e4;
  for (Index t = 1; t < predictions.rows(); ++t) {
    int flips = 0;
    for (Index i = 0; i < predictions.cols(); ++i) flips += sign(predictions(t, i)) != sign(predictions(t - 1, i));
    out[static_cast<std::size_t>(t)] -= cost * flips;
  }
  return out;
}

double sharpe(std::span<const double> pnl, double periods) {
  if (pnl.size() < 2) throw NumericalError("Sharpe ratio needs at least two observations");
  const double sd = stats::sample_stdev(pnl);
  if (!(sd > 0.0)) throw NumericalError("Sharpe ratio undefined: PnL has zero spread");
  return std::sqrt(periods) * stats::mean(pnl) / sd;
}

double sortino(std::span<const double> pnl, double periods) {
  std::vector<double> negative;
  for (double x : pnl)
    if (x < 0.0) negative.push_back(x);
  if (negative.size() < 2) throw NumericalError("Sortino ratio undefined: fewer than two negative PnL values");
  const double sd = stats::sample_stdev(negative);
  if (!(sd > 0.0)) throw NumericalError("Sortino ratio undefined: negative PnL has zero spread");
  return std::sqrt(periods) * stats::mean(pnl) / sd;
}

Drawdown max_drawdown(std::span<const double> pnl) {
  const std::size_t n = pnl.size();
  std::vector<double> c(n);
  double acc = 0.0;
  for (std::size_t t = 0; t < n; ++t) c[t] = acc += pnl[t];
  Drawdown out;
  // Running minimum of C_s over s > t.
  double later_min = std::numeric_limits<double>::infinity();
  for (std::size_t t = n; t-- > 0;) {
    if (std::isfinite(later_min)) {
      out.absolute = std::max(out.absolute, c[t] - later_min);
      if (c[t] > 0.0) out.ratio = std::max(out.ratio, (c[t] - later_min) / c[t]);
    }
    later_min = std::min(later_min, c[t]);
  }
  return out;
}

HitLong hit_long_ratios(const Matrix& predictions, const Matrix& realized) {
  check_same_shape(predictions, realized);
  const double total = static_cast<double>(predictions.size());
  if (total == 0) throw ConfigError("no predictions");
  double hits = 0.0, longs = 0.0;
  for (Index t = 0; t < predictions.rows(); ++t)
    for (Index i = 0; i < predictions.cols(); ++i) {
      hits += sign(predictions(t, i)) == sign(realized(t, i));
      longs += predictions(t, i) >= 0.0;
    }
  return {hits / total, longs / total};
}

ErrorPair mae_rmse(const Matrix& predictions, const Matrix& realized) {
  check_same_shape(predictions, realized);
  if (predictions.size() == 0) throw ConfigError("no predictions");
  const auto diff = (predictions - realized).array();
  return {diff.abs().mean(), std::sqrt(diff.square().mean())};
}

std::vector<double> cumulative_mse_ratio(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("MSE series differ in length");
  std::vector<double> out(a.size());
  double sa = 0.0, sb = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    sa += a[t];
    sb += b[t];
    if (!(sb > 0.0)) throw NumericalError("cumulative MSE of the reference model is zero");
    out[t] = sa / sb;
  }
  return out;
}

Matrix flow_imbalance(const Matrix& f) {
  if (f.rows() != f.cols()) throw ConfigError("flow matrix must be square");
  Matrix out = Matrix::Zero(f.rows(), f.cols());
  for (Index i = 0; i < f.rows(); ++i)
    for (Index j = 0; j < f.cols(); ++j) {
      const double s = f(i, j) + f(j, i);
      if (s != 0.0) out(i, j) = (f(i, j) - f(j, i)) / s;
    }
  return out;
}

double nrmse(const Matrix& phi_hat, const Matrix& phi_true, double m_hat, std::optional<double> rho) {
  check_same_shape(phi_hat, phi_true);
  if (!(m_hat > 0.0)) throw ConfigError("M_hat must be positive");
  if (!rho) {
    if (phi_true.rows() != phi_true.cols()) throw ConfigError("pass rho explicitly for non-square coefficients");
    rho = dgp::spectral_radius(phi_true);
  }
  if (!(*rho > 0.0)) throw NumericalError("spectral radius of the true coefficients is zero");
  return (phi_hat - phi_true).norm() / (m_hat * *rho);
}

double ari(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ConfigError("labelings differ in length");
  const double n = static_cast<double>(a.size());
  if (a.size() < 2) return 1.0;
  std::unordered_map<int, int> ia, ib;
  for (int x : a) ia.try_emplace(x, static_cast<int>(ia.size()));
  for (int x : b) ib.try_emplace(x, static_cast<int>(ib.size()));
  Matrix table = Matrix::Zero(static_cast<Index>(ia.size()), static_cast<Index>(ib.size()));
  for (std::size_t t = 0; t < a.size(); ++t) table(ia[a[t]], ib[b[t]]) += 1.0;

  double index = 0.0, sa = 0.0, sb = 0.0;
  for (Index i = 0; i < table.rows(); ++i)
    for (Index j = 0; j < table.cols(); ++j) index += choose2(table(i, j));
  for (Index i = 0; i < table.rows(); ++i) sa += choose2(table.row(i).sum());
  for (Index j = 0; j < table.cols(); ++j) sb += choose2(table.col(j).sum());
  const double expected = sa * sb / choose2(n);
  const double max_index = 0.5 * (sa + sb);
  // Equal only when both are one block or both all singletons.
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

double ari(const graph::CommunityAssignment& a, const graph::CommunityAssignment& b) { return ari(a.labels, b.labels); }

double restriction_error_pct(const BinaryMatrix& a_hat, const BinaryMatrix& a_true) {
  if (a_hat.rows() != a_true.rows() || a_hat.cols() != a_true.cols()) throw ConfigError("adjacency shapes differ");
  if (a_hat.size() == 0) throw ConfigError("empty adjacency");
  return 100.0 * static_cast<double>((a_hat.array() != a_true.array()).count()) / static_cast<double>(a_hat.size());
}

double restriction_error_pct(const graph::AdjacencyStack& a_hat, const graph::AdjacencyStack& a_true) {
  return restriction_error_pct(a_hat.unfolded(), a_true.unfolded());
}

double ks_statistic(std::span<const double> sample, const std::function<double(double)>& cdf) {
  return stats::ks_statistic(sample, cdf);
}

Procrustes procrustes_align(const Matrix& source, const Matrix& target) {
  if (source.rows() != target.rows() || source.cols() != target.cols()) throw ConfigError("Procrustes inputs differ in shape");
  Eigen::JacobiSVD<Matrix> svd(source.transpose() * target, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Procrustes out;
  out.rotation = svd.matrixU() * svd.matrixV().transpose();
  out.residual = (source * out.rotation - target).norm();
  return out;
}

// ---- backtest ---------------------------------------------------------------

std::map<std::string, double> summarize(const Matrix& predictions, const Matrix& realized, std::span<const double> pnl,
                                        double periods_per_year) {
  std::map<std::string, double> m;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto guarded = [&](const char* key, auto&& fn) {
    try {
      m[key] = fn();
    } catch (const std::runtime_error&) {
      m[key] = nan;
    }
  };
  guarded("SR", [&] { return sharpe(pnl, periods_per_year); });
  guarded("SortR", [&] { return sortino(pnl, periods_per_year); });
  const auto dd = max_drawdown(pnl);
  m["MaxDrawdown"] = dd.ratio;
  m["MaxDrawdownAbs"] = dd.absolute;
  const auto hl = hit_long_ratios(predictions, realized);
  m["HitRatio"] = hl.hit;
  m["LongRatio"] = hl.long_share;
  const auto err = mae_rmse(predictions, realized);
  m["MAE"] = err.mae;
  m["RMSE"] = err.rmse;
  m["MSE"] = err.rmse * err.rmse;
  m["MeanPnL"] = stats::mean(pnl);
  return m;
}

namespace {

using Predictor = std::function<Vector(const Eigen::Ref<const Vector>&)>;

void validate_protocol(const dgp::PanelTensor& panel, const BacktestConfig& config) {
  if (config.window < 2) throw ConfigError("window must be >= 2");
  if (panel.length() <= config.window + 1) throw ConfigError("panel must be longer than window + 1");
  if (config.refit_every < 1 || config.recluster_every < 1) throw ConfigError("refit cadences must be >= 1");
  if (config.pipeline.target < 0 || config.pipeline.target >= panel.features())
    throw ConfigError("target feature out of range");
  if (config.pipeline.mode == spectral::Mode::Precision && config.window <= panel.series())
    throw ConfigError("precision mode needs window > N");
}

dgp::PanelTensor window_of(const dgp::PanelTensor& panel, int start, int width) {
  return dgp::PanelTensor(panel.features(), panel.series(), panel.data().middleCols(start, width));
}

// `refit(window, step)` is called on refit steps and returns the predictor.
BacktestReport run_protocol(const dgp::PanelTensor& panel, const BacktestConfig& config,
                            const std::function<Predictor(const dgp::PanelTensor&, int)>& refit) {
  validate_protocol(panel, config);
  const int n = panel.series();
  const int steps = panel.length() - config.window;
  const int target = config.pipeline.target;
  BacktestReport report;
  report.predictions.resize(steps, n);
  report.realized.resize(steps, n);
  Predictor predict;
  for (int s = 0; s < steps; ++s) {
    const int t = config.window + s;
    if (s % config.refit_every == 0) predict = refit(window_of(panel, t - config.window, config.window), s);
    report.times.push_back(t);
    report.predictions.row(s) = predict(panel.data().col(t - 1)).transpose();
    report.realized.row(s) = panel.feature(target).col(t).transpose();
    report.mse.push_back((report.predictions.row(s) - report.realized.row(s)).squaredNorm() / n);
  }
  report.pnl = pnl_with_costs(report.predictions, report.realized, config.cost_bps);
  report.metrics = summarize(report.predictions, report.realized, report.pnl, config.periods_per_year);
  return report;
}

}  // namespace

BacktestReport rolling_backtest(const dgp::PanelTensor& panel, const BacktestConfig& config, Rng& rng) {
  std::optional<ClusterFit> clusters;
  std::vector<int> cluster_steps;
  std::vector<graph::CommunityAssignment> history;
  Rng windows = rng.split("window");
  auto refit = [&](const dgp::PanelTensor& w, int step) -> Predictor {
    if (!clusters || step % config.recluster_every == 0) {
      Rng stream = windows.split(static_cast<std::uint64_t>(step));
      clusters = fit_clusters(w, config.pipeline, stream);
      cluster_steps.push_back(step);
      history.push_back(clusters->labels[static_cast<std::size_t>(config.pipeline.target)]);
    }
    auto fit = std::make_shared<NirvarFit>(fit_with_labels(w, *clusters, config.pipeline));
    const int target = config.pipeline.target;
    return [fit, target](const Eigen::Ref<const Vector>& prev) { return predict_next(*fit, prev, target); };
  };
  auto report = run_protocol(panel, config, refit);
  report.cluster_steps = std::move(cluster_steps);
  report.clusters = std::move(history);
  return report;
}

MetricTable baselines(const dgp::PanelTensor& panel, const BacktestConfig& config) {
  const int n = panel.series();
  const int q = panel.features();
  const int target = config.pipeline.target;
  MetricTable table;

  auto ar1 = [&](const dgp::PanelTensor& w, int) -> Predictor {
    const Vector mu = w.feature(target).rowwise().mean();
    const Matrix x = w.feature(target).colwise() - mu;
    const Index len = x.cols();
    Vector phi(n);
    for (int i = 0; i < n; ++i) {
      const double den = x.row(i).head(len - 1).squaredNorm();
      phi(i) = den > 0.0 ? x.row(i).head(len - 1).dot(x.row(i).tail(len - 1)) / den : 0.0;
    }
    return [mu, phi, n, target](const Eigen::Ref<const Vector>& prev) -> Vector {
      return mu + phi.cwiseProduct(prev.segment(static_cast<Index>(target) * n, n) - mu);
    };
  };
  add_to_table(table, "ar1", run_protocol(panel, config, ar1));

  const std::vector<BinaryMatrix> ones(static_cast<std::size_t>(q), BinaryMatrix::Ones(n, n));
  const var::RestrictionSet dense{graph::AdjacencyStack(ones)};
  auto full_var = [&](const dgp::PanelTensor& w, int) -> Predictor {
    const Vector mu = spectral::series_means(w);
    const auto est = var::estimate(spectral::demean(w), target, dense);
    const Vector mu_t = mu.segment(static_cast<Index>(target) * n, n);
    return [mu, mu_t, phi = est.phi](const Eigen::Ref<const Vector>& prev) -> Vector { return mu_t + phi * (prev - mu); };
  };
  add_to_table(table, "var", run_protocol(panel, config, full_var));
  return table;
}

void add_to_table(MetricTable& table, const std::string& name, const BacktestReport& report) {
  if (!table.metrics.count(name)) table.models.push_back(name);
  table.metrics[name] = report.metrics;
  table.mse[name] = report.mse;
}

}  // namespace nirvar::eval
