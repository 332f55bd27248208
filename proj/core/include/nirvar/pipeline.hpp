#pragma once

#include <optional>
#include <vector>

#include "nirvar/cluster.hpp"
#include "nirvar/common.hpp"
#include "nirvar/dgp.hpp"
#include "nirvar/restricted_var.hpp"
#include "nirvar/rng.hpp"
#include "nirvar/spectral.hpp"

namespace nirvar {

enum class EmbeddingScaling {
  /// Rescaled for Q = 1 covariance embeddings, square-root singular values otherwise.
  Auto,
  /// Right embedding V D^{1/2}, split by feature.
  SqrtSingular,
  /// U Lambda_Phi^{1/2} with Lambda_Phi recovered from the covariance spectrum.
  Rescaled,
};

EmbeddingScaling parse_scaling(const std::string& name);
std::string to_string(EmbeddingScaling scaling);

struct PipelineConfig {
  spectral::Mode mode = spectral::Mode::Covariance;
  /// 0-based response feature.
  int target = 0;
  std::optional<int> k_override;
  std::optional<int> d_override;
  EmbeddingScaling scaling = EmbeddingScaling::Auto;
  /// Known innovation variance. When empty it is fitted from the covariance
  /// eigenvalues by KS minimisation (fixed at 1 in correlation mode).
  std::optional<double> noise_variance;
  cluster::GmmOptions gmm;
  bool demean = true;
};

/// Embedding and clustering half of the estimator.
struct ClusterFit {
  double eta = 0.0;
  /// Noise scale per feature used for thresholds and rescaling.
  std::vector<double> sigma2;
  /// Eigenvalues (descending) of each feature's embedded matrix.
  std::vector<Vector> eigenvalues;
  std::vector<spectral::RankSelection> ranks;
  /// max over features of the selected ranks (or the override).
  int d = 1;
  int k = 1;
  EmbeddingScaling scaling = EmbeddingScaling::SqrtSingular;
  spectral::EmbeddingResult embedding;
  /// Points handed to the mixture, one N x d block per feature.
  std::vector<Matrix> coordinates;
  std::vector<graph::CommunityAssignment> labels;
  std::vector<double> log_likelihoods;
  std::vector<std::string> warnings;

  graph::AdjacencyStack restrictions() const { return cluster::build_restrictions(labels); }
};

struct NirvarFit {
  ClusterFit clusters;
  var::RestrictionSet restrictions;
  var::EstimateResult estimate;
  /// Series means removed before fitting (zeros when demeaning is off).
  Vector means;
};

/// Noise scale implied by a covariance spectrum: the KS-fitted MP scale.
/// When eta >= 1 the T nonzero eigenvalues are fitted through the dual
/// (T x T) problem, whose aspect ratio is 1 / eta.
double fit_noise_scale(const Vector& covariance_eigenvalues, double eta);

ClusterFit fit_clusters(const dgp::PanelTensor& panel, const PipelineConfig& config, Rng& rng);

/// Restricted least squares of the target feature under clique restrictions
/// built from `labels`.
NirvarFit fit_with_labels(const dgp::PanelTensor& panel, ClusterFit clusters, const PipelineConfig& config);

/// demean -> stack -> rank selection -> UASE -> GMM -> restricted LS.
NirvarFit fit_nirvar(const dgp::PanelTensor& panel, const PipelineConfig& config, Rng& rng);

/// One-step forecast of the target feature from the previous stacked vector.
Vector predict_next(const NirvarFit& fit, const Eigen::Ref<const Vector>& previous, int target);

}  // namespace nirvar
