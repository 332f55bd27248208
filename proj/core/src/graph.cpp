#include "nirvar/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

namespace nirvar::graph {

void BlockModel::validate() const {
  const Index k = b.rows();
  if (k < 1 || b.cols() != k) throw ConfigError("block matrix must be square with K >= 1");
  if (pi.size() != k) throw ConfigError("pi must have K entries");
  if ((b.array() < 0.0).any() || (b.array() > 1.0).any() || !b.allFinite())
    throw ConfigError("block probabilities must lie in [0, 1]");
  if ((pi.array() < 0.0).any() || std::abs(pi.sum() - 1.0) > 1e-12)
    throw ConfigError("pi must be a probability vector");
  if (nu) {
    if (nu->rows() != k) throw ConfigError("latent positions must have K rows");
    if (((*nu) * nu->transpose() - b).cwiseAbs().maxCoeff() > 1e-12)
      throw ConfigError("B does not equal nu nu'");
  }
  if (assortative) {
    if ((b - b.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw ConfigError("assortative block matrix must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(b, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10)
      throw ConfigError("assortative block matrix must be positive semi-definite");
  }
}

BlockModel BlockModel::planted(int k, double p_in, double p_out) {
  if (k < 1) throw ConfigError("K must be >= 1");
  BlockModel m;
  m.b = Matrix::Constant(k, k, p_out);
  m.b.diagonal().setConstant(p_in);
  m.pi = Vector::Constant(k, 1.0 / k);
  m.assortative = p_in >= p_out;
  m.validate();
  return m;
}

BlockModel BlockModel::from_latent_positions(const Matrix& nu, Vector pi) {
  BlockModel m;
  m.b = nu * nu.transpose();
  m.nu = nu;
  m.pi = pi.size() == 0 ? Vector::Constant(nu.rows(), 1.0 / static_cast<double>(nu.rows())) : std::move(pi);
  m.assortative = true;
  m.validate();
  return m;
}

std::vector<int> CommunityAssignment::counts() const {
  std::vector<int> c(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++c[static_cast<std::size_t>(l)];
  return c;
}

int CommunityAssignment::empty_blocks() const {
  const auto c = counts();
  return static_cast<int>(std::count(c.begin(), c.end(), 0));
}

void CommunityAssignment::validate() const {
  if (k < 1) throw ConfigError("K must be >= 1");
  for (int l : labels)
    if (l < 0 || l >= k) throw ConfigError("label " + std::to_string(l) + " outside [0, K)");
}

CommunityAssignment sample_communities(const BlockModel& model, int n, Rng& rng) {
  if (n < 1) throw ConfigError("need at least one node");
  model.validate();
  std::vector<double> cumulative(static_cast<std::size_t>(model.blocks()));
  double acc = 0.0;
  for (int k = 0; k < model.blocks(); ++k) cumulative[static_cast<std::size_t>(k)] = acc += model.pi(k);

  CommunityAssignment z{std::vector<int>(static_cast<std::size_t>(n)), model.blocks()};
  for (auto& label : z.labels) {
    const double u = rng.uniform() * acc;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    label = static_cast<int>(std::min<std::ptrdiff_t>(it - cumulative.begin(), model.blocks() - 1));
  }
  return z;
}

CommunityAssignment contiguous_communities(int n, int k) {
  if (n < 1 || k < 1 || k > n) throw ConfigError("need 1 <= K <= N");
  CommunityAssignment z{std::vector<int>(static_cast<std::size_t>(n)), k};
  for (int i = 0; i < n; ++i) z.labels[static_cast<std::size_t>(i)] = static_cast<int>(static_cast<long>(i) * k / n);
  return z;
}

BinaryMatrix sample_adjacency(const BlockModel& model, const CommunityAssignment& z, Rng& rng) {
  if (z.k != model.blocks()) throw ConfigError("assignment K differs from block model K");
  z.validate();
  const int n = z.size();
  BinaryMatrix a(n, n);
  // Column-major fill keeps the draw order fixed for a given seed.
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      a(i, j) = i == j ? 1 : static_cast<std::uint8_t>(rng.bernoulli(model.b(z.labels[static_cast<std::size_t>(i)], z.labels[static_cast<std::size_t>(j)])));
  return a;
}

Matrix edge_probabilities(const BlockModel& model, const CommunityAssignment& z) {
  const int n = z.size();
  Matrix p(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) p(i, j) = model.b(z.labels[static_cast<std::size_t>(i)], z.labels[static_cast<std::size_t>(j)]);
  return p;
}

AdjacencyStack::AdjacencyStack(std::vector<BinaryMatrix> blocks) : blocks_(std::move(blocks)) {
  if (blocks_.empty()) throw ConfigError("adjacency stack needs at least one block");
  n_ = static_cast<int>(blocks_.front().rows());
  for (const auto& a : blocks_) {
    if (a.rows() != n_ || a.cols() != n_) throw ConfigError("adjacency blocks must all be N x N");
    if ((a.array() > 1).any()) throw ConfigError("adjacency entries must be 0 or 1");
    if ((a.diagonal().array() != 1).any()) throw ConfigError("adjacency blocks must carry self-loops");
  }
}

BinaryMatrix AdjacencyStack::unfolded() const {
  BinaryMatrix out(n_, static_cast<Index>(n_) * features());
  for (int q = 0; q < features(); ++q) out.middleCols(static_cast<Index>(q) * n_, n_) = blocks_[static_cast<std::size_t>(q)];
  return out;
}

Index AdjacencyStack::nonzeros() const {
  Index total = 0;
  for (const auto& a : blocks_) total += a.cast<Index>().sum();
  return total;
}

bool operator==(const AdjacencyStack& a, const AdjacencyStack& b) {
  if (a.n_ != b.n_ || a.blocks_.size() != b.blocks_.size()) return false;
  for (std::size_t q = 0; q < a.blocks_.size(); ++q)
    if (a.blocks_[q] != b.blocks_[q]) return false;
  return true;
}

AdjacencyStack clique_stack(std::span<const CommunityAssignment> per_feature) {
  if (per_feature.empty()) throw ConfigError("need at least one assignment");
  const int n = per_feature.front().size();
  std::vector<BinaryMatrix> blocks;
  blocks.reserve(per_feature.size());
  for (const auto& z : per_feature) {
    if (z.size() != n) throw ConfigError("assignments must all have length N");
    BinaryMatrix a(n, n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) a(i, j) = z.labels[static_cast<std::size_t>(i)] == z.labels[static_cast<std::size_t>(j)];
    blocks.push_back(std::move(a));
  }
  return AdjacencyStack(std::move(blocks));
}

}  // namespace nirvar::graph
