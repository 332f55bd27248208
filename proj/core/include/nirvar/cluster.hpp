#pragma once

#include <span>
#include <vector>

#include "nirvar/common.hpp"
#include "nirvar/graph.hpp"
#include "nirvar/rng.hpp"

namespace nirvar::cluster {

struct GmmOptions {
  int restarts = 10;
  int max_iterations = 500;
  /// Stop once the log-likelihood gain drops below this.
  double tolerance = 1e-7;
  /// Added to every covariance diagonal.
  double regularization = 1e-6;
};

/// Full-covariance Gaussian mixture fitted by EM.
struct GmmModel {
  int k = 0;
  Matrix means;  // K x d
  std::vector<Matrix> covariances;
  Vector weights;
  double log_likelihood = 0.0;
  Matrix responsibilities;  // N x K
  int iterations = 0;
  bool converged = false;
  int best_restart = 0;
  /// Log-likelihood after every E-step, one trace per restart.
  std::vector<std::vector<double>> traces;
};

/// Best of `options.restarts` EM runs by final log-likelihood. Each run seeds
/// its means by distance-weighted sampling of the data (k-means++ style) and
/// starts every covariance at the global sample covariance.
GmmModel gmm_fit(const Matrix& points, int k, Rng& rng, const GmmOptions& options = {});

/// argmax of each responsibility row; ties go to the lowest component index.
graph::CommunityAssignment hard_assign(const GmmModel& model);

/// Clique restrictions: block q links i and j iff they share a label in feature q.
graph::AdjacencyStack build_restrictions(std::span<const graph::CommunityAssignment> per_feature);

/// sum_q sum_k n_{q,k}^2, the number of ones in the clique stack.
Index restriction_count(std::span<const graph::CommunityAssignment> per_feature);

}  // namespace nirvar::cluster
