#include "nirvar/pipeline.hpp"

#include <algorithm>
#include <cmath>

namespace nirvar {

EmbeddingScaling parse_scaling(const std::string& name) {
  if (name == "auto") return EmbeddingScaling::Auto;
  if (name == "sqrt_singular") return EmbeddingScaling::SqrtSingular;
  if (name == "rescaled") return EmbeddingScaling::Rescaled;
  throw ConfigError("unknown embedding scaling '" + name + "' (auto, sqrt_singular, rescaled)");
}

std::string to_string(EmbeddingScaling scaling) {
  switch (scaling) {
    case EmbeddingScaling::Auto: return "auto";
    case EmbeddingScaling::SqrtSingular: return "sqrt_singular";
    case EmbeddingScaling::Rescaled: return "rescaled";
  }
  return "auto";
}

double fit_noise_scale(const Vector& eigenvalues, double eta) {
  if (!(eta > 0.0)) throw ConfigError("eta must be positive");
  if (eta < 1.0) return spectral::fit_mp_scale(eigenvalues, eta).sigma2;
  if (eta == 1.0) throw ConfigError("N == T: supply noise_variance explicitly");
  // Nonzero spectrum of X X'/T equals eta times that of X'X/N ~ MP(1/eta, sigma2).
  const Index nonzero = std::min<Index>(eigenvalues.size(), static_cast<Index>(std::floor(eigenvalues.size() / eta)));
  Vector sorted = eigenvalues;
  std::sort(sorted.data(), sorted.data() + sorted.size(), std::greater<>());
  return spectral::fit_mp_scale(sorted.head(nonzero) / eta, 1.0 / eta).sigma2;
}

ClusterFit fit_clusters(const dgp::PanelTensor& input, const PipelineConfig& config, Rng& rng) {
  const int q = input.features();
  const int n = input.series();
  if (config.target < 0 || config.target >= q) throw ConfigError("target feature out of range");
  if (config.k_override && *config.k_override < 1) throw ConfigError("K must be >= 1");
  if (config.d_override && *config.d_override < 1) throw ConfigError("d must be >= 1");
  if (config.noise_variance && !(*config.noise_variance > 0.0)) throw ConfigError("noise_variance must be positive");

  const dgp::PanelTensor panel = config.demean ? spectral::demean(input) : input;
  ClusterFit fit;
  const auto stack = spectral::covariance_stack(panel, config.mode);
  fit.eta = stack.eta();

  // Noise scale always comes from the covariance spectrum.
  const auto cov = config.mode == spectral::Mode::Covariance ? stack
                                                             : spectral::covariance_stack(panel, spectral::Mode::Covariance);
  for (int f = 0; f < q; ++f) {
    const Vector cov_eigs = spectral::sorted_eigenvalues(cov.blocks[static_cast<std::size_t>(f)]);
    double s2 = 1.0;
    if (config.mode == spectral::Mode::Correlation) {
      s2 = 1.0;
    } else if (config.noise_variance) {
      s2 = *config.noise_variance;
    } else if (n >= 10) {
      s2 = fit_noise_scale(cov_eigs, fit.eta);
    } else {
      fit.warnings.push_back("fewer than 10 series: noise variance fixed at 1");
    }
    fit.sigma2.push_back(s2);

    const Vector eigs = config.mode == spectral::Mode::Covariance
                            ? cov_eigs
                            : spectral::sorted_eigenvalues(stack.blocks[static_cast<std::size_t>(f)]);
    fit.eigenvalues.push_back(eigs);
    fit.ranks.push_back(config.mode == spectral::Mode::Precision ? spectral::select_rank_prec(eigs, fit.eta, s2)
                                                                 : spectral::select_rank_cov(eigs, fit.eta, s2));
    if (fit.ranks.back().degenerate)
      fit.warnings.push_back("feature " + std::to_string(f + 1) + ": no eigenvalue beyond the noise edge, d set to 1");
  }

  int d = 1;
  for (const auto& r : fit.ranks) d = std::max(d, r.d_hat);
  fit.d = config.d_override.value_or(d);
  fit.k = config.k_override.value_or(fit.d);
  if (fit.k > n) throw ConfigError("K exceeds the number of series");

  fit.scaling = config.scaling;
  if (fit.scaling == EmbeddingScaling::Auto)
    fit.scaling = q == 1 && config.mode == spectral::Mode::Covariance ? EmbeddingScaling::Rescaled
                                                                      : EmbeddingScaling::SqrtSingular;
  if (fit.scaling == EmbeddingScaling::Rescaled && (q != 1 || config.mode != spectral::Mode::Covariance))
    throw ConfigError("rescaled embedding needs a single feature in covariance mode");

  fit.embedding = spectral::uase(stack, fit.d);
  for (const auto& w : fit.embedding.warnings) fit.warnings.push_back(w);

  Rng gmm_rng = rng.split("gmm");
  for (int f = 0; f < q; ++f) {
    Matrix points = fit.scaling == EmbeddingScaling::Rescaled
                        ? spectral::rescaled_embedding(fit.embedding, fit.sigma2[0])
                        : fit.embedding.right[static_cast<std::size_t>(f)];
    Rng stream = gmm_rng.split(static_cast<std::uint64_t>(f));
    const auto model = cluster::gmm_fit(points, fit.k, stream, config.gmm);
    fit.labels.push_back(cluster::hard_assign(model));
    fit.log_likelihoods.push_back(model.log_likelihood);
    fit.coordinates.push_back(std::move(points));
  }
  return fit;
}

NirvarFit fit_with_labels(const dgp::PanelTensor& input, ClusterFit clusters, const PipelineConfig& config) {
  const Vector means = config.demean ? spectral::series_means(input) : Vector::Zero(input.data().rows());
  const dgp::PanelTensor panel = config.demean ? spectral::demean(input) : input;
  var::RestrictionSet r(clusters.restrictions());
  auto est = var::estimate(panel, config.target, r);
  return NirvarFit{std::move(clusters), std::move(r), std::move(est), means};
}

NirvarFit fit_nirvar(const dgp::PanelTensor& panel, const PipelineConfig& config, Rng& rng) {
  return fit_with_labels(panel, fit_clusters(panel, config, rng), config);
}

Vector predict_next(const NirvarFit& fit, const Eigen::Ref<const Vector>& previous, int target) {
  const Index n = fit.estimate.phi.rows();
  if (previous.size() != fit.means.size()) throw ConfigError("previous observation has the wrong length");
  return fit.means.segment(static_cast<Index>(target) * n, n) + fit.estimate.phi * (previous - fit.means);
}

}  // namespace nirvar
