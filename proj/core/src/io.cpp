#include "nirvar/io.hpp"

#include <charconv>
#include <fstream>
#include <regex>
#include <sstream>

#include "json.hpp"

#include "nirvar/spectral.hpp"

namespace nirvar::io {
namespace {

using nlohmann::json;

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  return in;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const fs::path& path, std::size_t line) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && *b == ' ') ++b;
  const auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e)
    throw ConfigError(path.string() + ":" + std::to_string(line) + ": not a number: '" + s + "'");
  return v;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix json_matrix(const json& rows) {
  if (!rows.is_array() || rows.empty()) throw ConfigError("expected a non-empty array of rows");
  const std::size_t cols = rows[0].size();
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].is_array() || rows[i].size() != cols) throw ConfigError("ragged matrix in JSON");
    for (std::size_t j = 0; j < cols; ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j].get<double>();
  }
  return m;
}

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::vector<int> one_based(const std::vector<int>& labels) {
  std::vector<int> out(labels);
  for (int& x : out) ++x;
  return out;
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void write_panel_csv(const fs::path& path, const dgp::PanelTensor& panel) {
  auto out = open_out(path);
  out << 't';
  for (int q = 0; q < panel.features(); ++q)
    for (int i = 0; i < panel.series(); ++i) out << ",f" << q + 1 << "_s" << i + 1;
  out << '\n';
  for (int t = 0; t < panel.length(); ++t) {
    out << t + 1;
    for (Index r = 0; r < panel.data().rows(); ++r) out << ',' << format_double(panel.data()(r, t));
    out << '\n';
  }
}

dgp::PanelTensor read_panel_csv(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path.string() + ": empty file");
  auto header = split(line);
  std::size_t skip = 0;
  if (!header.empty() && (header[0] == "t" || header[0] == "date")) skip = 1;
  const std::size_t width = header.size() - skip;
  if (width == 0) throw ConfigError(path.string() + ": no series columns");

  int q = 1;
  int n = static_cast<int>(width);
  static const std::regex pattern(R"(f(\d+)_s(\d+))");
  std::smatch m;
  bool tagged = true;
  int max_f = 0, max_s = 0;
  for (std::size_t c = skip; c < header.size() && tagged; ++c) {
    if (!std::regex_match(header[c], m, pattern)) {
      tagged = false;
      break;
    }
    max_f = std::max(max_f, std::stoi(m[1]));
    max_s = std::max(max_s, std::stoi(m[2]));
  }
  if (tagged) {
    if (static_cast<std::size_t>(max_f) * static_cast<std::size_t>(max_s) != width)
      throw ConfigError(path.string() + ": header is not a full feature x series grid");
    for (std::size_t c = skip; c < header.size(); ++c) {
      const std::size_t k = c - skip;
      const std::string want = "f" + std::to_string(k / max_s + 1) + "_s" + std::to_string(k % max_s + 1);
      if (header[c] != want) throw ConfigError(path.string() + ": expected column " + want + ", found " + header[c]);
    }
    q = max_f;
    n = max_s;
  }

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                        " fields");
    std::vector<double> row;
    row.reserve(width);
    for (std::size_t c = skip; c < cells.size(); ++c) row.push_back(parse_double(cells[c], path, line_no));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError(path.string() + ": no data rows");
  Matrix data(static_cast<Index>(width), static_cast<Index>(rows.size()));
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t r = 0; r < width; ++r) data(static_cast<Index>(r), static_cast<Index>(t)) = rows[t][r];
  return dgp::PanelTensor(q, n, std::move(data));
}

void write_ground_truth(const fs::path& path, const GroundTruth& g) {
  json blocks = json::array();
  for (const auto& a : g.a_blocks) blocks.push_back(matrix_json(a.cast<double>()));
  write_json(path, json{{"N", g.n},
                        {"Q", g.q},
                        {"K", g.k},
                        {"target", g.target + 1},
                        {"z", one_based(g.labels)},
                        {"B", matrix_json(g.b)},
                        {"A_blocks", blocks},
                        {"Phi", matrix_json(g.phi)},
                        {"rho", g.rho}});
}

GroundTruth read_ground_truth(const fs::path& path) {
  auto in = open_in(path);
  json j;
  try {
    in >> j;
    GroundTruth g;
    g.n = j.at("N").get<int>();
    g.q = j.at("Q").get<int>();
    g.k = j.at("K").get<int>();
    g.target = j.at("target").get<int>() - 1;
    g.labels = j.at("z").get<std::vector<int>>();
    for (int& x : g.labels) --x;
    g.b = json_matrix(j.at("B"));
    for (const auto& blk : j.at("A_blocks")) g.a_blocks.push_back(json_matrix(blk).cast<std::uint8_t>());
    g.phi = json_matrix(j.at("Phi"));
    g.rho = j.at("rho").get<double>();
    if (static_cast<int>(g.labels.size()) != g.n) throw ConfigError("z must have N entries");
    return g;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_model_json(const fs::path& path, const NirvarFit& fit, const PipelineConfig& config) {
  const auto& c = fit.clusters;
  json labels = json::array();
  for (const auto& z : c.labels) labels.push_back(one_based(z.labels));
  json ranks = json::array();
  for (const auto& r : c.ranks) ranks.push_back(r.d_hat);
  write_json(path, json{{"mode", spectral::to_string(config.mode)},
                        {"target", config.target + 1},
                        {"N", fit.estimate.phi.rows()},
                        {"Q", static_cast<int>(c.labels.size())},
                        {"d", c.d},
                        {"K", c.k},
                        {"embedding", to_string(c.scaling)},
                        {"eta", c.eta},
                        {"noise_scale", c.sigma2},
                        {"ranks", ranks},
                        {"z", labels},
                        {"free_parameters", fit.restrictions.params()},
                        {"residual_variance", fit.estimate.sigma2},
                        {"gmm_log_likelihood", c.log_likelihoods},
                        {"means", vector_json(fit.means)},
                        {"Phi", matrix_json(fit.estimate.phi)},
                        {"warnings", c.warnings}});
}

void write_clusters_csv(const fs::path& path, const std::vector<graph::CommunityAssignment>& labels) {
  auto out = open_out(path);
  out << "series";
  for (std::size_t f = 0; f < labels.size(); ++f) out << ",f" << f + 1;
  out << '\n';
  const std::size_t n = labels.empty() ? 0 : labels[0].labels.size();
  for (std::size_t i = 0; i < n; ++i) {
    out << i + 1;
    for (const auto& z : labels) out << ',' << z.labels[i] + 1;
    out << '\n';
  }
}

void write_embedding_csv(const fs::path& path, const std::vector<Matrix>& coordinates) {
  auto out = open_out(path);
  const Index d = coordinates.empty() ? 0 : coordinates[0].cols();
  out << "feature,series";
  for (Index k = 0; k < d; ++k) out << ",x" << k + 1;
  out << '\n';
  for (std::size_t f = 0; f < coordinates.size(); ++f)
    for (Index i = 0; i < coordinates[f].rows(); ++i) {
      out << f + 1 << ',' << i + 1;
      for (Index k = 0; k < d; ++k) out << ',' << format_double(coordinates[f](i, k));
      out << '\n';
    }
}

void write_eigen_report(const fs::path& path, const ClusterFit& fit) {
  json features = json::array();
  for (std::size_t f = 0; f < fit.ranks.size(); ++f) {
    const auto& r = fit.ranks[f];
    features.push_back(json{{"feature", f + 1},
                            {"eigenvalues", vector_json(fit.eigenvalues[f])},
                            {"noise_scale", fit.sigma2[f]},
                            {"threshold", r.threshold},
                            {"exceedances", r.exceedances},
                            {"d_hat", r.d_hat},
                            {"degenerate", r.degenerate}});
  }
  write_json(path, json{{"eta", fit.eta},
                        {"d", fit.d},
                        {"singular_values", vector_json(fit.embedding.singular_values)},
                        {"features", features}});
}

void write_predictions_csv(const fs::path& path, const eval::BacktestReport& r) {
  auto out = open_out(path);
  out << "t,series,pred,real\n";
  for (Index s = 0; s < r.predictions.rows(); ++s)
    for (Index i = 0; i < r.predictions.cols(); ++i)
      out << r.times[static_cast<std::size_t>(s)] + 1 << ',' << i + 1 << ',' << format_double(r.predictions(s, i)) << ','
          << format_double(r.realized(s, i)) << '\n';
}

eval::BacktestReport read_predictions_csv(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || split(line) != std::vector<std::string>{"t", "series", "pred", "real"})
    throw ConfigError(path.string() + ": expected header t,series,pred,real");
  struct Cell {
    int t, series;
    double pred, real;
  };
  std::vector<Cell> cells;
  std::size_t line_no = 1;
  int n = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split(line);
    if (f.size() != 4) throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected 4 fields");
    Cell c{static_cast<int>(parse_double(f[0], path, line_no)), static_cast<int>(parse_double(f[1], path, line_no)),
           parse_double(f[2], path, line_no), parse_double(f[3], path, line_no)};
    if (c.series < 1) throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": series must be >= 1");
    n = std::max(n, c.series);
    cells.push_back(c);
  }
  if (cells.empty() || cells.size() % static_cast<std::size_t>(n) != 0)
    throw ConfigError(path.string() + ": every time step needs all series");
  const Index steps = static_cast<Index>(cells.size()) / n;
  eval::BacktestReport r;
  r.predictions.resize(steps, n);
  r.realized.resize(steps, n);
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const Index s = static_cast<Index>(k) / n;
    const auto& c = cells[k];
    if (c.series != static_cast<int>(k % static_cast<std::size_t>(n)) + 1)
      throw ConfigError(path.string() + ": rows must be ordered by t, then series");
    if (k % static_cast<std::size_t>(n) == 0) r.times.push_back(c.t - 1);
    else if (r.times.back() != c.t - 1) throw ConfigError(path.string() + ": inconsistent t within a step");
    r.predictions(s, c.series - 1) = c.pred;
    r.realized(s, c.series - 1) = c.real;
  }
  for (Index s = 0; s < steps; ++s) r.mse.push_back((r.predictions.row(s) - r.realized.row(s)).squaredNorm() / n);
  return r;
}

void write_metric_table_csv(const fs::path& path, const eval::MetricTable& table) {
  auto out = open_out(path);
  out << "model,metric,value\n";
  for (const auto& model : table.models)
    for (const auto& [name, value] : table.metrics.at(model)) out << model << ',' << name << ',' << format_double(value) << '\n';
}

void write_mse_csv(const fs::path& path, const eval::MetricTable& table, const std::string& reference) {
  if (!table.mse.count(reference)) throw ConfigError("unknown reference model " + reference);
  const auto& ref = table.mse.at(reference);
  auto out = open_out(path);
  out << "step,model,mse,delta\n";
  for (const auto& model : table.models) {
    const auto& series = table.mse.at(model);
    const auto delta = eval::cumulative_mse_ratio(ref, series);
    for (std::size_t s = 0; s < series.size(); ++s)
      out << s + 1 << ',' << model << ',' << format_double(series[s]) << ',' << format_double(delta[s]) << '\n';
  }
}

}  // namespace nirvar::io
