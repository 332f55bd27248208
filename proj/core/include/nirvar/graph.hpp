#pragma once

#include <optional>
#include <span>
#include <vector>

#include "nirvar/common.hpp"
#include "nirvar/rng.hpp"

namespace nirvar::graph {

/// Parameters of a K-block stochastic block model.
///
/// `b(k, l)` is the probability of a directed edge from a node in block k to a
/// node in block l. When latent positions `nu` (K x d) are present the model
/// is the RDPG representation and `b == nu * nu'`.
struct BlockModel {
  Matrix b;
  Vector pi;
  std::optional<Matrix> nu;
  bool assortative = false;

  int blocks() const { return static_cast<int>(b.rows()); }

  /// Throws ConfigError when any invariant is violated.
  void validate() const;

  /// p_in on the diagonal, p_out elsewhere, uniform block priors.
  static BlockModel planted(int k, double p_in, double p_out);
  /// B = nu nu'; pi defaults to uniform when empty.
  static BlockModel from_latent_positions(const Matrix& nu, Vector pi = {});
};

/// Block labels, 0-based internally (files use 1-based labels).
struct CommunityAssignment {
  std::vector<int> labels;
  int k = 1;

  int size() const { return static_cast<int>(labels.size()); }
  std::vector<int> counts() const;
  int empty_blocks() const;
  void validate() const;
};

CommunityAssignment sample_communities(const BlockModel& model, int n, Rng& rng);

/// Contiguous equal-sized blocks: the first n/k nodes get label 0, etc.
CommunityAssignment contiguous_communities(int n, int k);

/// Off-diagonal A_ij ~ Bernoulli(B_{z_i z_j}) independently in both
/// directions; the diagonal is always 1.
BinaryMatrix sample_adjacency(const BlockModel& model, const CommunityAssignment& z, Rng& rng);

/// N x N matrix of B_{z_i z_j}, diagonal included (equals Theta Theta').
Matrix edge_probabilities(const BlockModel& model, const CommunityAssignment& z);

/// Q binary N x N blocks with unit diagonals, viewed as the N x NQ unfolding
/// (A^(1) | ... | A^(Q)).
class AdjacencyStack {
 public:
  explicit AdjacencyStack(std::vector<BinaryMatrix> blocks);

  int nodes() const { return n_; }
  int features() const { return static_cast<int>(blocks_.size()); }
  const BinaryMatrix& block(int q) const { return blocks_.at(static_cast<std::size_t>(q)); }
  const std::vector<BinaryMatrix>& blocks() const { return blocks_; }

  /// Entry (i, c) of the N x NQ unfolding.
  bool at(Index i, Index c) const { return blocks_[static_cast<std::size_t>(c / n_)](i, c % n_) != 0; }
  BinaryMatrix unfolded() const;
  /// |A|_0
  Index nonzeros() const;

  friend bool operator==(const AdjacencyStack& a, const AdjacencyStack& b);

 private:
  int n_ = 0;
  std::vector<BinaryMatrix> blocks_;
};

/// Block q has A_ij = 1 iff z_i == z_j for the q-th assignment.
AdjacencyStack clique_stack(std::span<const CommunityAssignment> per_feature);

}  // namespace nirvar::graph
