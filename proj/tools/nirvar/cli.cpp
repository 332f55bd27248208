#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "nirvar/dgp.hpp"
#include "nirvar/evalbench.hpp"
#include "nirvar/graph.hpp"
#include "nirvar/io.hpp"
#include "nirvar/pipeline.hpp"
#include "nirvar/rng.hpp"
#include "nirvar/spectral.hpp"

namespace nirvar::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- flat config ------------------------------------------------------------

const std::map<std::string, json> kPipelineKeys = {
    {"mode", "covariance"}, {"target", 1},    {"K", 0},         {"d", 0},     {"embedding", "auto"},
    {"noise_variance", 0.0}, {"demean", true}, {"restarts", 10}, {"seed", 0u},
};

std::map<std::string, json> schema_for(const std::string& command) {
  if (command == "simulate")
    return {{"N", 100},       {"Q", 1},          {"K", 2},
            {"T", 1000},      {"burn_in", 500},  {"rho", 0.9},
            {"p_in", 1.0},    {"p_out", 0.0},    {"sigma2", 1.0},
            {"weights", "uniform"}, {"weight_value", 1.0}, {"labels", "contiguous"},
            {"target", 1},    {"panel", "panel.csv"}, {"truth", "truth.json"},
            {"seed", 0u}};
  auto keys = kPipelineKeys;
  if (command == "estimate") {
    keys["panel"] = "panel.csv";
    keys["truth"] = "";
    return keys;
  }
  if (command == "backtest") {
    keys["panel"] = "panel.csv";
    keys["window"] = 250;
    keys["refit_every"] = 1;
    keys["recluster_every"] = 1;
    keys["cost_bps"] = 0.0;
    keys["periods_per_year"] = 252.0;
    keys["baselines"] = false;
    return keys;
  }
  if (command == "eval")
    return {{"predictions", ""}, {"names", ""},  {"reference", ""}, {"periods_per_year", 252.0},
            {"cost_bps", 0.0},   {"model", ""},  {"truth", ""},     {"seed", 0u}};
  if (command == "mpfit") return {{"panel", "panel.csv"}, {"mode", "covariance"}, {"demean", true}, {"seed", 0u}};
  throw ConfigError("unknown command " + command);
}

bool compatible(const json& def, const json& v) {
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_string()) return v.is_string();
  if (def.is_number_unsigned()) return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_number_float()) return v.is_number();
  return false;
}

json parse_override(const json& def, const std::string& key, const std::string& text) {
  try {
    if (def.is_string()) return text;
    const json v = json::parse(text);
    if (!compatible(def, v)) throw ConfigError("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad value for " + key + ": '" + text + "'");
  }
}

json resolve_config(const std::string& command, const std::string& path, const std::vector<std::string>& sets,
                    std::optional<std::uint64_t> seed) {
  const auto schema = schema_for(command);
  json cfg = json::object();
  for (const auto& [k, v] : schema) cfg[k] = v;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path);
    json file;
    try {
      in >> file;
    } catch (const json::exception& e) {
      throw ConfigError(path + ": " + e.what());
    }
    if (!file.is_object()) throw ConfigError(path + ": config must be a flat JSON object");
    for (const auto& [k, v] : file.items()) {
      if (!schema.count(k)) throw ConfigError("unknown config key '" + k + "' for " + command);
      if (!compatible(schema.at(k), v)) throw ConfigError("config key '" + k + "' has the wrong type");
      cfg[k] = v;
    }
  }
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    const std::string key = s.substr(0, eq);
    if (!schema.count(key)) throw ConfigError("unknown config key '" + key + "' for " + command);
    cfg[key] = parse_override(schema.at(key), key, s.substr(eq + 1));
  }
  if (seed) cfg["seed"] = *seed;
  return cfg;
}

void write_config(const fs::path& out_dir, const std::string& command, const json& cfg) {
  fs::create_directories(out_dir);
  std::ofstream f(out_dir / (command + ".config.json"));
  f << cfg.dump(2) << '\n';
}

int positive_int(const json& cfg, const std::string& key, int min = 1) {
  const int v = cfg.at(key).get<int>();
  if (v < min) throw ConfigError(key + " must be >= " + std::to_string(min));
  return v;
}

PipelineConfig pipeline_config(const json& cfg) {
  PipelineConfig p;
  p.mode = spectral::parse_mode(cfg.at("mode").get<std::string>());
  p.target = positive_int(cfg, "target") - 1;
  if (const int k = cfg.at("K").get<int>(); k > 0) p.k_override = k;
  else if (k < 0) throw ConfigError("K must be >= 0 (0 selects K = d)");
  if (const int d = cfg.at("d").get<int>(); d > 0) p.d_override = d;
  else if (d < 0) throw ConfigError("d must be >= 0 (0 selects d by the MP threshold)");
  p.scaling = parse_scaling(cfg.at("embedding").get<std::string>());
  if (const double s = cfg.at("noise_variance").get<double>(); s > 0.0) p.noise_variance = s;
  else if (s < 0.0) throw ConfigError("noise_variance must be >= 0 (0 fits it)");
  p.demean = cfg.at("demean").get<bool>();
  p.gmm.restarts = positive_int(cfg, "restarts");
  return p;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// ---- commands ---------------------------------------------------------------

int cmd_simulate(const json& cfg, const fs::path& out_dir, std::ostream& out) {
  const int n = positive_int(cfg, "N");
  const int q = positive_int(cfg, "Q");
  const int k = positive_int(cfg, "K");
  const int length = positive_int(cfg, "T", 2);
  const int burn_in = positive_int(cfg, "burn_in", 0);
  const int target = positive_int(cfg, "target") - 1;
  if (target >= q) throw ConfigError("target exceeds Q");
  const double rho = cfg.at("rho").get<double>();
  if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("rho must lie in [0, 1)");

  const auto model = graph::BlockModel::planted(k, cfg.at("p_in").get<double>(), cfg.at("p_out").get<double>());
  model.validate();
  const Rng root(cfg.at("seed").get<std::uint64_t>());
  Rng graph_rng = root.split("graph");
  Rng weight_rng = root.split("weights");
  Rng noise_rng = root.split("noise");

  const std::string label_rule = cfg.at("labels").get<std::string>();
  graph::CommunityAssignment z;
  if (label_rule == "contiguous") z = graph::contiguous_communities(n, k);
  else if (label_rule == "sample") z = graph::sample_communities(model, n, graph_rng);
  else throw ConfigError("labels must be 'contiguous' or 'sample'");

  std::vector<graph::AdjacencyStack> per_response;
  for (int r = 0; r < q; ++r) {
    std::vector<BinaryMatrix> blocks;
    for (int f = 0; f < q; ++f) blocks.push_back(graph::sample_adjacency(model, z, graph_rng));
    per_response.emplace_back(std::move(blocks));
  }

  dgp::WeightRule rule;
  const std::string weights = cfg.at("weights").get<std::string>();
  if (weights == "uniform") rule = dgp::Uniform01{};
  else if (weights == "constant") rule = dgp::Constant{cfg.at("weight_value").get<double>()};
  else throw ConfigError("weights must be 'uniform' or 'constant'");

  // rho = 0 keeps the sampled support but zeroes the coefficients (white noise).
  auto coeffs = dgp::build_coefficients(per_response, rule, rho > 0.0 ? rho : 0.5, weight_rng);
  if (rho == 0.0) {
    coeffs.xi.setZero();
    coeffs.weights.setZero();
    coeffs.spectral_radius = 0.0;
  }
  dgp::NoiseSpec noise;
  noise.sigma2 = cfg.at("sigma2").get<double>();
  noise.validate(n);
  const auto panel = dgp::simulate(coeffs, noise, length, burn_in, noise_rng);

  io::GroundTruth truth;
  truth.n = n;
  truth.q = q;
  truth.k = k;
  truth.target = target;
  truth.labels = z.labels;
  truth.b = model.b;
  truth.a_blocks = per_response[static_cast<std::size_t>(target)].blocks();
  truth.phi = coeffs.response(target);
  truth.rho = coeffs.spectral_radius;

  io::write_panel_csv(out_dir / cfg.at("panel").get<std::string>(), panel);
  io::write_ground_truth(out_dir / cfg.at("truth").get<std::string>(), truth);
  out << "realised spectral radius: " << io::format_double(coeffs.spectral_radius) << '\n';
  return kOk;
}

json truth_comparison(const io::GroundTruth& truth, const std::vector<std::vector<int>>& labels, const Matrix& phi,
                      double free_params) {
  if (labels.empty() || static_cast<int>(labels[0].size()) != truth.n) throw ConfigError("model and truth differ in N");
  json ari = json::array();
  std::vector<graph::CommunityAssignment> est;
  for (const auto& z : labels) {
    ari.push_back(eval::ari(z, truth.labels));
    int k = 1;
    for (int x : z) k = std::max(k, x + 1);
    est.push_back({z, k});
  }
  json out{{"ari", ari}};
  if (static_cast<int>(labels.size()) == truth.q) {
    const auto a_hat = graph::clique_stack(est);
    out["restriction_error_pct"] = eval::restriction_error_pct(a_hat, graph::AdjacencyStack(truth.a_blocks));
  }
  if (phi.rows() == truth.phi.rows() && phi.cols() == truth.phi.cols() && truth.rho > 0.0)
    out["nrmse"] = eval::nrmse(phi, truth.phi, free_params, truth.rho);
  return out;
}

int cmd_estimate(const json& cfg, const fs::path& out_dir, std::ostream& out) {
  const auto panel = io::read_panel_csv(cfg.at("panel").get<std::string>());
  const auto pc = pipeline_config(cfg);
  Rng rng(cfg.at("seed").get<std::uint64_t>());
  const auto fit = fit_nirvar(panel, pc, rng);

  io::write_model_json(out_dir / "model.json", fit, pc);
  io::write_clusters_csv(out_dir / "clusters.csv", fit.clusters.labels);
  io::write_embedding_csv(out_dir / "embedding.csv", fit.clusters.coordinates);
  io::write_eigen_report(out_dir / "eigen.json", fit.clusters);
  out << "d = " << fit.clusters.d << ", K = " << fit.clusters.k << ", free parameters = " << fit.restrictions.params()
      << '\n';
  for (const auto& w : fit.clusters.warnings) out << "warning: " << w << '\n';

  if (const auto truth_path = cfg.at("truth").get<std::string>(); !truth_path.empty()) {
    const auto truth = io::read_ground_truth(truth_path);
    std::vector<std::vector<int>> labels;
    for (const auto& z : fit.clusters.labels) labels.push_back(z.labels);
    const json cmp = truth_comparison(truth, labels, fit.estimate.phi, static_cast<double>(fit.restrictions.params()));
    std::ofstream(out_dir / "comparison.json") << cmp.dump(2) << '\n';
    out << "ARI vs truth: " << cmp.at("ari").dump() << '\n';
  }
  return kOk;
}

json metrics_json(const std::map<std::string, double>& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[k] = v;  // NaN serialises as null
  return j;
}

int cmd_backtest(const json& cfg, const fs::path& out_dir, std::ostream& out) {
  const auto panel = io::read_panel_csv(cfg.at("panel").get<std::string>());
  eval::BacktestConfig bc;
  bc.pipeline = pipeline_config(cfg);
  bc.window = positive_int(cfg, "window", 2);
  const int refit = positive_int(cfg, "refit_every", 0);
  const int recluster = positive_int(cfg, "recluster_every", 0);
  bc.refit_every = refit == 0 ? eval::kNever : refit;
  bc.recluster_every = recluster == 0 ? eval::kNever : recluster;
  bc.cost_bps = cfg.at("cost_bps").get<double>();
  bc.periods_per_year = cfg.at("periods_per_year").get<double>();
  Rng rng(cfg.at("seed").get<std::uint64_t>());

  const auto report = eval::rolling_backtest(panel, bc, rng);
  eval::MetricTable table;
  if (cfg.at("baselines").get<bool>()) table = eval::baselines(panel, bc);
  eval::add_to_table(table, "nirvar", report);
  std::rotate(table.models.begin(), table.models.end() - 1, table.models.end());

  io::write_predictions_csv(out_dir / "predictions.csv", report);
  io::write_metric_table_csv(out_dir / "metrics.csv", table);
  io::write_mse_csv(out_dir / "mse.csv", table, "nirvar");
  json clusters = json::array();
  for (std::size_t c = 0; c < report.clusters.size(); ++c) {
    std::vector<int> z = report.clusters[c].labels;
    for (int& x : z) ++x;
    clusters.push_back(json{{"step", report.cluster_steps[c] + 1}, {"z", z}});
  }
  const json rep{{"steps", report.pnl.size()},
                 {"metrics", metrics_json(report.metrics)},
                 {"pnl", report.pnl},
                 {"clusters", clusters}};
  std::ofstream(out_dir / "report.json") << rep.dump(2) << '\n';
  for (const auto& model : table.models) {
    const auto& m = table.metrics.at(model);
    out << model << ": MSE " << io::format_double(m.at("MSE")) << ", SR " << io::format_double(m.at("SR")) << '\n';
  }
  return kOk;
}

int cmd_eval(const json& cfg, const fs::path& out_dir, std::ostream& out) {
  const auto files = split_list(cfg.at("predictions").get<std::string>());
  auto names = split_list(cfg.at("names").get<std::string>());
  const std::string model_path = cfg.at("model").get<std::string>();
  const std::string truth_path = cfg.at("truth").get<std::string>();
  if (files.empty() && (model_path.empty() || truth_path.empty()))
    throw ConfigError("eval needs predictions files or a model and truth pair");

  if (!files.empty()) {
    if (names.empty())
      for (const auto& f : files) names.push_back(fs::path(f).stem().string());
    if (names.size() != files.size()) throw ConfigError("names must match predictions one to one");
    eval::MetricTable table;
    std::size_t steps = 0;
    for (std::size_t m = 0; m < files.size(); ++m) {
      auto r = io::read_predictions_csv(files[m]);
      if (m > 0 && r.mse.size() != steps) throw ConfigError("prediction files cover different numbers of steps");
      steps = r.mse.size();
      r.pnl = eval::pnl_with_costs(r.predictions, r.realized, cfg.at("cost_bps").get<double>());
      r.metrics = eval::summarize(r.predictions, r.realized, r.pnl, cfg.at("periods_per_year").get<double>());
      if (table.metrics.count(names[m])) throw ConfigError("duplicate model name " + names[m]);
      eval::add_to_table(table, names[m], r);
    }
    std::string reference = cfg.at("reference").get<std::string>();
    if (reference.empty()) reference = names.front();
    io::write_metric_table_csv(out_dir / "metrics.csv", table);
    io::write_mse_csv(out_dir / "mse.csv", table, reference);
    for (const auto& name : names)
      out << name << ": MSE " << io::format_double(table.metrics.at(name).at("MSE")) << '\n';
  }

  if (!model_path.empty() && !truth_path.empty()) {
    std::ifstream in(model_path);
    if (!in) throw ConfigError("cannot read " + model_path);
    json model;
    try {
      in >> model;
      std::vector<std::vector<int>> labels = model.at("z").get<std::vector<std::vector<int>>>();
      for (auto& z : labels)
        for (int& x : z) --x;
      const auto rows = model.at("Phi").get<std::vector<std::vector<double>>>();
      Matrix phi(static_cast<Index>(rows.size()), rows.empty() ? 0 : static_cast<Index>(rows[0].size()));
      for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) phi(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
      const json cmp = truth_comparison(io::read_ground_truth(truth_path), labels, phi,
                                        model.at("free_parameters").get<double>());
      std::ofstream(out_dir / "comparison.json") << cmp.dump(2) << '\n';
      out << "comparison: " << cmp.dump() << '\n';
    } catch (const json::exception& e) {
      throw ConfigError(model_path + ": " + e.what());
    }
  }
  return kOk;
}

int cmd_mpfit(const json& cfg, const fs::path& out_dir, std::ostream& out) {
  const auto raw = io::read_panel_csv(cfg.at("panel").get<std::string>());
  const auto mode = spectral::parse_mode(cfg.at("mode").get<std::string>());
  if (mode == spectral::Mode::Precision) throw ConfigError("mpfit works on covariance or correlation spectra");
  const auto panel = cfg.at("demean").get<bool>() ? spectral::demean(raw) : raw;
  const auto stack = spectral::covariance_stack(panel, mode);
  const double eta = stack.eta();
  json features = json::array();
  for (int f = 0; f < stack.q; ++f) {
    Vector eigs = spectral::sorted_eigenvalues(stack.blocks[static_cast<std::size_t>(f)]);
    double fit_eta = eta;
    if (eta >= 1.0) {
      // Fit the nonzero part through the dual problem.
      if (eta == 1.0) throw ConfigError("N == T leaves the MP fit undefined");
      const Index nonzero = static_cast<Index>(std::floor(eigs.size() / eta));
      eigs = Vector(eigs.head(nonzero) / eta);
      fit_eta = 1.0 / eta;
    }
    const auto fit = spectral::fit_mp_scale(eigs, fit_eta, mode);
    const auto rank = spectral::select_rank_cov(spectral::sorted_eigenvalues(stack.blocks[static_cast<std::size_t>(f)]),
                                                eta, fit.sigma2);
    features.push_back(json{{"feature", f + 1},
                            {"sigma2", fit.sigma2},
                            {"ks", fit.ks},
                            {"threshold", rank.threshold},
                            {"d_hat", rank.d_hat},
                            {"degenerate", rank.degenerate}});
    out << "feature " << f + 1 << ": sigma2 = " << io::format_double(fit.sigma2) << ", KS = " << io::format_double(fit.ks)
        << ", d = " << rank.d_hat << '\n';
  }
  std::ofstream(out_dir / "mpfit.json") << json{{"eta", eta}, {"features", features}}.dump(2) << '\n';
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"NIRVAR: network-informed restricted VAR estimation"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir = ".";
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "Flat JSON config file")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--seed", seed, "Top-level random seed");
  app.add_option("--set", sets, "Override a config key (key=value), repeatable");
  for (const char* name : {"simulate", "estimate", "backtest", "eval", "mpfit"}) {
    auto* sub = app.add_subcommand(name);
    sub->fallthrough();
  }
  app.fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const json cfg = resolve_config(command, config_path, sets, seed);
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    write_config(dir, command, cfg);
    if (command == "simulate") return cmd_simulate(cfg, dir, out);
    if (command == "estimate") return cmd_estimate(cfg, dir, out);
    if (command == "backtest") return cmd_backtest(cfg, dir, out);
    if (command == "eval") return cmd_eval(cfg, dir, out);
    return cmd_mpfit(cfg, dir, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInternalError;
  }
}

}  // namespace nirvar::cli
