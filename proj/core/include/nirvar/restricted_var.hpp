#pragma once

#include <optional>
#include <vector>

#include "nirvar/common.hpp"
#include "nirvar/dgp.hpp"
#include "nirvar/graph.hpp"

namespace nirvar::var {

/// Selection matrix R(A) mapping the free parameters gamma onto vec(Phi).
///
/// vec() stacks columns, so entry (i, c) of the N x NQ unfolding sits at row
/// i + N c of vec(A). Column j of R has its single 1 at the row of the j-th
/// nonzero of vec(A); R is kept as that index map, never materialised unless
/// dense() is called.
class RestrictionSet {
 public:
  explicit RestrictionSet(graph::AdjacencyStack a);

  const graph::AdjacencyStack& adjacency() const { return a_; }
  int nodes() const { return a_.nodes(); }
  int features() const { return a_.features(); }
  /// Number of free parameters, |A|_0.
  Index params() const { return static_cast<Index>(support_.size()); }
  /// N^2 Q, the length of vec(A).
  Index vec_length() const { return static_cast<Index>(nodes()) * nodes() * features(); }

  /// support()[j] is the vec(A) row of parameter j.
  const std::vector<Index>& support() const { return support_; }
  Index row_of(Index param) const { return support_[static_cast<std::size_t>(param)] % nodes(); }
  Index column_of(Index param) const { return support_[static_cast<std::size_t>(param)] / nodes(); }
  /// Parameter index of a vec(A) row, or -1 when that entry is restricted to 0.
  Index param_at(Index vec_row) const { return lookup_[static_cast<std::size_t>(vec_row)]; }

  /// N^2 Q x M dense 0/1 matrix.
  Matrix dense() const;
  /// colsp(R(this)) is a subspace of colsp(R(other)), i.e. support(this) is
  /// contained in support(other).
  bool nested_in(const RestrictionSet& other) const;

 private:
  graph::AdjacencyStack a_;
  std::vector<Index> support_;
  std::vector<Index> lookup_;
};

RestrictionSet restriction_matrix(const graph::AdjacencyStack& a);

struct EstimateResult {
  Vector gamma;
  /// R gamma, length N^2 Q; exactly zero off the support.
  Vector beta;
  /// beta reshaped to N x NQ.
  Matrix phi;
  /// Pooled residual variance RSS / (N T' - M).
  double sigma2 = 0.0;
  /// Residual covariance U U' / T'.
  Matrix residual_covariance;
  int transitions = 0;
  bool generalized = false;
};

/// Lagged design Gram matrix X X' (NQ x NQ) over transitions t = 1..T-1.
Matrix lagged_gram(const dgp::PanelTensor& panel);

/// Least-squares fit of response feature `target` under the restrictions.
///
/// With Sigma = sigma2 I the Kronecker-form estimator decouples into one
/// regression per row of Phi over that row's support, which is what runs.
/// With a full Sigma the GLS normal equations are assembled directly from
/// X X' and Sigma^{-1} (gated to NQ <= 512).
EstimateResult estimate(const dgp::PanelTensor& panel, int target, const RestrictionSet& restrictions,
                        const dgp::NoiseSpec& noise = {});

/// {R_est' (G o Sigma^-1) R_est}^{-1} R_est' (G o Sigma^-1) R_true, with o the
/// Kronecker product. G = X X' gives the finite-sample C; G = Gamma gives its
/// probability limit.
Matrix bias_matrix(const RestrictionSet& truth, const RestrictionSet& est, const Matrix& gram, const Matrix& sigma);

/// {R' (Gamma o Sigma^-1) R}^{-1}, the asymptotic covariance of sqrt(T) gamma-hat.
Matrix asymptotic_covariance(const RestrictionSet& est, const Matrix& gamma, const Matrix& sigma);

/// R V R' for the estimated restrictions minus the same for the true ones.
Matrix variance_difference(const RestrictionSet& truth, const RestrictionSet& est, const Matrix& gamma,
                           const Matrix& sigma);

/// tr[var beta-hat(est)] / tr[var beta-hat(truth)]; requires nesting.
double variance_inflation(const RestrictionSet& truth, const RestrictionSet& est, const Matrix& gamma,
                          const Matrix& sigma);

}  // namespace nirvar::var
