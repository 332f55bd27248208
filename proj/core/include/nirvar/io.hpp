#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nirvar/common.hpp"
#include "nirvar/dgp.hpp"
#include "nirvar/evalbench.hpp"
#include "nirvar/graph.hpp"
#include "nirvar/pipeline.hpp"

namespace nirvar::io {

namespace fs = std::filesystem;

/// Panel CSV: header "t,f1_s1,...,f1_sN,f2_s1,...", one row per time point,
/// values printed with 17 significant digits so they parse back exactly.
void write_panel_csv(const fs::path& path, const dgp::PanelTensor& panel);

/// Reads the format above. Headers that do not follow the f<q>_s<i> pattern
/// are taken as a single feature with one column per series; a leading "t"
/// or "date" column is skipped.
dgp::PanelTensor read_panel_csv(const fs::path& path);

struct GroundTruth {
  int n = 0;
  int q = 0;
  int k = 0;
  /// 0-based response feature.
  int target = 0;
  /// 0-based labels shared by all features (written 1-based).
  std::vector<int> labels;
  Matrix b;
  /// Q adjacency blocks of the target response.
  std::vector<BinaryMatrix> a_blocks;
  /// N x NQ coefficients of the target response.
  Matrix phi;
  double rho = 0.0;
};

void write_ground_truth(const fs::path& path, const GroundTruth& truth);
GroundTruth read_ground_truth(const fs::path& path);

/// Labels, selected ranks, Phi and fit statistics.
void write_model_json(const fs::path& path, const NirvarFit& fit, const PipelineConfig& config);
/// "series,f1,...,fQ" with 1-based labels.
void write_clusters_csv(const fs::path& path, const std::vector<graph::CommunityAssignment>& labels);
/// "feature,series,x1,...,xd".
void write_embedding_csv(const fs::path& path, const std::vector<Matrix>& coordinates);
/// Eigenvalues, thresholds and selected ranks per feature.
void write_eigen_report(const fs::path& path, const ClusterFit& fit);

/// "t,series,pred,real", series 1-based.
void write_predictions_csv(const fs::path& path, const eval::BacktestReport& report);
/// Reads the predictions format back; pnl and metrics are left empty.
eval::BacktestReport read_predictions_csv(const fs::path& path);
/// "model,metric,value".
void write_metric_table_csv(const fs::path& path, const eval::MetricTable& table);
/// "step,model,mse,delta"; delta is the cumulative MSE of `reference` over
/// that of the model, so values below 1 favour the reference.
void write_mse_csv(const fs::path& path, const eval::MetricTable& table, const std::string& reference);

/// Shortest round-trip decimal form.
std::string format_double(double x);

}  // namespace nirvar::io
