#pragma once

#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nirvar/common.hpp"
#include "nirvar/dgp.hpp"
#include "nirvar/graph.hpp"
#include "nirvar/pipeline.hpp"
#include "nirvar/rng.hpp"

namespace nirvar::eval {

// ---- forecast and trading metrics -------------------------------------------

/// PnL_t = sum_i sign(pred_ti) real_ti, rows are time steps. sign(0) = +1.
std::vector<double> pnl_series(const Matrix& predictions, const Matrix& realized);

/// Same, minus cost_bps / 1e4 for every position flip against the previous row.
std::vector<double> pnl_with_costs(const Matrix& predictions, const Matrix& realized, double cost_bps);

/// sqrt(periods) mean / sample stdev. Throws NumericalError on zero spread.
double sharpe(std::span<const double> pnl, double periods = 252.0);
/// Uses the sample stdev of the negative entries; needs at least two of them.
double sortino(std::span<const double> pnl, double periods = 252.0);

struct Drawdown {
  /// max over t < s of (C_t - C_s) / C_t, skipping C_t <= 0. 0 when no pair qualifies.
  double ratio = 0.0;
  /// max over t < s of (C_t - C_s), floored at 0.
  double absolute = 0.0;
};
/// C is the cumulative PnL.
Drawdown max_drawdown(std::span<const double> pnl);

struct HitLong {
  /// Fraction of (t, i) with sign(pred) == sign(real).
  double hit = 0.0;
  /// Fraction of predictions that are >= 0.
  double long_share = 0.0;
};
HitLong hit_long_ratios(const Matrix& predictions, const Matrix& realized);

struct ErrorPair {
  double mae = 0.0;
  double rmse = 0.0;
};
ErrorPair mae_rmse(const Matrix& predictions, const Matrix& realized);

/// Cumulative sum of a divided by cumulative sum of b.
std::vector<double> cumulative_mse_ratio(std::span<const double> mse_a, std::span<const double> mse_b);

/// (F_ij - F_ji) / (F_ij + F_ji), 0 where the pair sums to 0.
Matrix flow_imbalance(const Matrix& counts);

// ---- simulation-study metrics -----------------------------------------------

/// ||Phi_hat - Phi||_F / (M_hat rho). `rho` defaults to the spectral radius
/// of phi_true, which must then be square.
double nrmse(const Matrix& phi_hat, const Matrix& phi_true, double m_hat, std::optional<double> rho = std::nullopt);

/// Adjusted Rand index of two labelings of the same items.
double ari(std::span<const int> a, std::span<const int> b);
double ari(const graph::CommunityAssignment& a, const graph::CommunityAssignment& b);

/// 100 x share of entries where the two 0/1 matrices differ.
double restriction_error_pct(const BinaryMatrix& a_hat, const BinaryMatrix& a_true);
double restriction_error_pct(const graph::AdjacencyStack& a_hat, const graph::AdjacencyStack& a_true);

/// sup |F_n - F|, F_n the empirical CDF.
double ks_statistic(std::span<const double> sample, const std::function<double(double)>& cdf);

struct Procrustes {
  Matrix rotation;
  /// ||source rotation - target||_F
  double residual = 0.0;
};
/// Orthogonal W minimising ||source W - target||_F.
Procrustes procrustes_align(const Matrix& source, const Matrix& target);

// ---- rolling backtest -------------------------------------------------------

constexpr int kNever = std::numeric_limits<int>::max();

struct BacktestConfig {
  int window = 0;
  /// Re-estimate Phi every this many steps; kNever fits once.
  int refit_every = 1;
  /// Re-run embedding and clustering every this many steps.
  int recluster_every = 1;
  PipelineConfig pipeline;
  double periods_per_year = 252.0;
  double cost_bps = 0.0;
};

struct BacktestReport {
  /// Panel column index of each forecast.
  std::vector<int> times;
  Matrix predictions;  // steps x N
  Matrix realized;     // steps x N
  std::vector<double> pnl;
  /// Mean squared error across series at every step.
  std::vector<double> mse;
  /// SR, SortR, MaxDrawdown, MaxDrawdownAbs, HitRatio, LongRatio, MAE, RMSE,
  /// MSE, MeanPnL. Undefined metrics are NaN.
  std::map<std::string, double> metrics;
  /// Target-feature labels after every reclustering, with the step it happened.
  std::vector<int> cluster_steps;
  std::vector<graph::CommunityAssignment> clusters;
};

/// Recomputes the metric map from predictions, realized and pnl.
std::map<std::string, double> summarize(const Matrix& predictions, const Matrix& realized,
                                        std::span<const double> pnl, double periods_per_year);

/// For every t >= W fits on columns [t - W, t) and forecasts column t of the
/// target feature from column t - 1.
BacktestReport rolling_backtest(const dgp::PanelTensor& panel, const BacktestConfig& config, Rng& rng);

struct MetricTable {
  std::vector<std::string> models;
  std::map<std::string, std::map<std::string, double>> metrics;
  std::map<std::string, std::vector<double>> mse;
};

/// AR(1) per series ("ar1") and a dense VAR(1) ("var") run through the same
/// window and refit protocol as the backtest.
MetricTable baselines(const dgp::PanelTensor& panel, const BacktestConfig& config);

/// Adds a model's report to a table.
void add_to_table(MetricTable& table, const std::string& name, const BacktestReport& report);

}  // namespace nirvar::eval
