#include "nirvar/cluster.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace nirvar::cluster {
namespace {

struct Run {
  Matrix means;
  std::vector<Matrix> covariances;
  Vector weights;
  Matrix responsibilities;
  double log_likelihood = -std::numeric_limits<double>::infinity();
  std::vector<double> trace;
  int iterations = 0;
  bool converged = false;
};

Matrix seed_means(const Matrix& x, int k, Rng& rng) {
  const Index n = x.rows();
  Matrix means(k, x.cols());
  Vector nearest = Vector::Constant(n, std::numeric_limits<double>::infinity());
  auto pick_uniform = [&] { return std::min<Index>(static_cast<Index>(rng.uniform() * static_cast<double>(n)), n - 1); };
  Index chosen = pick_uniform();
  for (int c = 0; c < k; ++c) {
    means.row(c) = x.row(chosen);
    nearest = nearest.cwiseMin((x.rowwise() - x.row(chosen)).rowwise().squaredNorm());
    if (c + 1 == k) break;
    const double total = nearest.sum();
    if (!(total > 0.0)) {
      chosen = pick_uniform();
      continue;
    }
    double u = rng.uniform() * total;
    chosen = n - 1;
    for (Index i = 0; i < n; ++i) {
      u -= nearest(i);
      if (u < 0.0) {
        chosen = i;
        break;
      }
    }
  }
  return means;
}

// Log-space E-step; returns the incomplete-data log-likelihood.
double expectation(const Matrix& x, const Run& run, Matrix& resp) {
  const Index n = x.rows();
  const Index d = x.cols();
  const int k = static_cast<int>(run.means.rows());
  Matrix log_r(n, k);
  for (int c = 0; c < k; ++c) {
    Eigen::LLT<Matrix> llt(run.covariances[static_cast<std::size_t>(c)]);
    if (llt.info() != Eigen::Success) throw NumericalError("mixture covariance lost positive definiteness");
    const Matrix l = llt.matrixL();
    const double log_det = 2.0 * l.diagonal().array().log().sum();
    Matrix centered = (x.rowwise() - run.means.row(c)).transpose();
    llt.matrixL().solveInPlace(centered);
    const Vector maha = centered.colwise().squaredNorm().transpose();
    const double w = run.weights(c);
    const double log_w = w > 0.0 ? std::log(w) : -std::numeric_limits<double>::infinity();
    log_r.col(c) = (log_w - 0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) + log_det)) -
                   0.5 * maha.array();
  }
  double ll = 0.0;
  resp.resize(n, k);
  for (Index i = 0; i < n; ++i) {
    const double m = log_r.row(i).maxCoeff();
    const double lse = m + std::log((log_r.row(i).array() - m).exp().sum());
    ll += lse;
    resp.row(i) = (log_r.row(i).array() - lse).exp();
  }
  return ll;
}

void maximization(const Matrix& x, const Matrix& resp, const Matrix& fallback_cov, double reg, Run& run) {
  const Index n = x.rows();
  const int k = static_cast<int>(resp.cols());
  const Vector nk = resp.colwise().sum().transpose();
  for (int c = 0; c < k; ++c) {
    const double mass = nk(c);
    run.weights(c) = mass / static_cast<double>(n);
    if (mass <= 1e-12) {
      // Empty component: keep its mean, reset its shape.
      run.covariances[static_cast<std::size_t>(c)] = fallback_cov;
      continue;
    }
    run.means.row(c) = resp.col(c).transpose() * x / mass;
    const Matrix centered = x.rowwise() - run.means.row(c);
    Matrix cov = centered.transpose() * resp.col(c).asDiagonal() * centered / mass;
    cov.diagonal().array() += reg;
    run.covariances[static_cast<std::size_t>(c)] = 0.5 * (cov + cov.transpose());
  }
}

Run fit_once(const Matrix& x, int k, const Matrix& global_cov, Rng& rng, const GmmOptions& opt) {
  Run run;
  run.means = seed_means(x, k, rng);
  run.covariances.assign(static_cast<std::size_t>(k), global_cov);
  run.weights = Vector::Constant(k, 1.0 / k);
  Matrix resp;
  for (int it = 0; it < opt.max_iterations; ++it) {
    const double ll = expectation(x, run, resp);
    run.trace.push_back(ll);
    run.iterations = it + 1;
    run.responsibilities = resp;
    const bool gained_little = it > 0 && ll - run.log_likelihood < opt.tolerance;
    run.log_likelihood = ll;
    if (gained_little) {
      run.converged = true;
      break;
    }
    if (it + 1 == opt.max_iterations) break;
    maximization(x, resp, global_cov, opt.regularization, run);
  }
  return run;
}

}  // namespace

GmmModel gmm_fit(const Matrix& points, int k, Rng& rng, const GmmOptions& options) {
  const Index n = points.rows();
  const Index d = points.cols();
  if (k < 1) throw ConfigError("mixture needs K >= 1");
  if (d < 1) throw ConfigError("mixture needs at least one dimension");
  if (n < k) throw ConfigError("mixture needs at least K points");
  if (options.restarts < 1 || options.max_iterations < 1) throw ConfigError("restarts and iterations must be >= 1");
  if (!points.allFinite()) throw ConfigError("points must be finite");

  const Matrix centered = points.rowwise() - points.colwise().mean();
  Matrix global_cov = centered.transpose() * centered / static_cast<double>(n);
  global_cov.diagonal().array() += options.regularization;

  GmmModel best;
  best.log_likelihood = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < options.restarts; ++r) {
    Rng stream = rng.split(static_cast<std::uint64_t>(r));
    Run run = fit_once(points, k, global_cov, stream, options);
    best.traces.push_back(run.trace);
    if (run.log_likelihood > best.log_likelihood) {
      best.k = k;
      best.means = std::move(run.means);
      best.covariances = std::move(run.covariances);
      best.weights = std::move(run.weights);
      best.responsibilities = std::move(run.responsibilities);
      best.log_likelihood = run.log_likelihood;
      best.iterations = run.iterations;
      best.converged = run.converged;
      best.best_restart = r;
    }
  }
  return best;
}

graph::CommunityAssignment hard_assign(const GmmModel& model) {
  graph::CommunityAssignment z{std::vector<int>(static_cast<std::size_t>(model.responsibilities.rows())), model.k};
  for (Index i = 0; i < model.responsibilities.rows(); ++i) {
    int arg = 0;
    for (int c = 1; c < model.k; ++c)
      if (model.responsibilities(i, c) > model.responsibilities(i, arg)) arg = c;
    z.labels[static_cast<std::size_t>(i)] = arg;
  }
  return z;
}

graph::AdjacencyStack build_restrictions(std::span<const graph::CommunityAssignment> per_feature) {
  return graph::clique_stack(per_feature);
}

Index restriction_count(std::span<const graph::CommunityAssignment> per_feature) {
  Index total = 0;
  for (const auto& z : per_feature)
    for (int c : z.counts()) total += static_cast<Index>(c) * c;
  return total;
}

}  // namespace nirvar::cluster
