#include "nirvar/restricted_var.hpp"

#include <string>

namespace nirvar::var {

RestrictionSet::RestrictionSet(graph::AdjacencyStack a) : a_(std::move(a)) {
  const Index n = a_.nodes();
  const Index cols = n * a_.features();
  lookup_.assign(static_cast<std::size_t>(vec_length()), -1);
  for (Index c = 0; c < cols; ++c)
    for (Index i = 0; i < n; ++i)
      if (a_.at(i, c)) {
        const Index row = i + n * c;
        lookup_[static_cast<std::size_t>(row)] = static_cast<Index>(support_.size());
        support_.push_back(row);
      }
}

Matrix RestrictionSet::dense() const {
  Matrix r = Matrix::Zero(vec_length(), params());
  for (Index j = 0; j < params(); ++j) r(support_[static_cast<std::size_t>(j)], j) = 1.0;
  return r;
}

bool RestrictionSet::nested_in(const RestrictionSet& other) const {
  if (other.nodes() != nodes() || other.features() != features()) return false;
  for (Index row : support_)
    if (other.param_at(row) < 0) return false;
  return true;
}

RestrictionSet restriction_matrix(const graph::AdjacencyStack& a) { return RestrictionSet(a); }

Matrix lagged_gram(const dgp::PanelTensor& panel) {
  if (panel.length() < 2) throw ConfigError("need at least two time points");
  const auto x = panel.data().leftCols(panel.length() - 1);
  return x * x.transpose();
}

namespace {

void check_conformable(const RestrictionSet& r, int n, int q) {
  if (r.nodes() != n || r.features() != q) throw ConfigError("restrictions do not match the panel dimensions");
}

Matrix checked_inverse(const Matrix& sigma) {
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) throw ConfigError("noise covariance must be positive definite");
  return llt.solve(Matrix::Identity(sigma.rows(), sigma.cols()));
}

// R_a' (G o W) R_b, with W = Sigma^{-1}.
Matrix weighted_cross(const RestrictionSet& a, const RestrictionSet& b, const Matrix& g, const Matrix& w) {
  Matrix out(a.params(), b.params());
  for (Index l = 0; l < b.params(); ++l) {
    const Index cb = b.column_of(l);
    const Index ib = b.row_of(l);
    for (Index j = 0; j < a.params(); ++j) out(j, l) = g(a.column_of(j), cb) * w(a.row_of(j), ib);
  }
  return out;
}

Eigen::LLT<Matrix> factor_information(const Matrix& info) {
  Eigen::LLT<Matrix> llt(info);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-14)
    throw NumericalError("restricted information matrix is singular");
  return llt;
}

void check_moment_inputs(const RestrictionSet& r, const Matrix& gram, const Matrix& sigma) {
  const Index nq = static_cast<Index>(r.nodes()) * r.features();
  if (gram.rows() != nq || gram.cols() != nq) throw ConfigError("second-moment matrix must be NQ x NQ");
  if (sigma.rows() != r.nodes() || sigma.cols() != r.nodes()) throw ConfigError("noise covariance must be N x N");
}

Matrix expand(const RestrictionSet& r, const Matrix& v) {
  Matrix out = Matrix::Zero(r.vec_length(), r.vec_length());
  for (Index l = 0; l < r.params(); ++l)
    for (Index j = 0; j < r.params(); ++j) out(r.support()[static_cast<std::size_t>(j)], r.support()[static_cast<std::size_t>(l)]) = v(j, l);
  return out;
}

}  // namespace

EstimateResult estimate(const dgp::PanelTensor& panel, int target, const RestrictionSet& restrictions,
                        const dgp::NoiseSpec& noise) {
  const int n = panel.series();
  const int q = panel.features();
  if (target < 0 || target >= q) throw ConfigError("target feature out of range");
  check_conformable(restrictions, n, q);
  if (panel.length() < 2) throw ConfigError("need at least two time points");
  noise.validate(n);

  const int transitions = panel.length() - 1;
  const auto x = panel.data().leftCols(transitions);
  const auto y = panel.feature(target).rightCols(transitions);
  const Matrix gram = x * x.transpose();

  EstimateResult out;
  out.transitions = transitions;
  out.gamma.resize(restrictions.params());

  if (!noise.covariance) {
    const Matrix xy = x * y.transpose();  // NQ x N
    std::vector<std::vector<Index>> row_params(static_cast<std::size_t>(n));
    for (Index j = 0; j < restrictions.params(); ++j)
      row_params[static_cast<std::size_t>(restrictions.row_of(j))].push_back(j);
    for (int i = 0; i < n; ++i) {
      const auto& params = row_params[static_cast<std::size_t>(i)];
      const Index m = static_cast<Index>(params.size());
      if (m == 0) continue;
      if (m > transitions) throw NumericalError("row " + std::to_string(i + 1) + " has more free parameters than transitions");
      Matrix g(m, m);
      Vector b(m);
      for (Index a = 0; a < m; ++a) {
        const Index ca = restrictions.column_of(params[static_cast<std::size_t>(a)]);
        b(a) = xy(ca, i);
        for (Index c = 0; c < m; ++c) g(a, c) = gram(ca, restrictions.column_of(params[static_cast<std::size_t>(c)]));
      }
      Eigen::LLT<Matrix> llt(g);
      if (llt.info() != Eigen::Success || llt.rcond() < 1e-14)
        throw NumericalError("restricted Gram matrix of row " + std::to_string(i + 1) + " is singular");
      const Vector sol = llt.solve(b);
      for (Index a = 0; a < m; ++a) out.gamma(params[static_cast<std::size_t>(a)]) = sol(a);
    }
  } else {
    if (static_cast<Index>(n) * q > 512) throw ConfigError("full-covariance GLS is limited to NQ <= 512");
    const Matrix w = checked_inverse(*noise.covariance);
    const Matrix info = weighted_cross(restrictions, restrictions, gram, w);
    const Matrix rhs_full = w * y * x.transpose();  // N x NQ
    Vector rhs(restrictions.params());
    for (Index j = 0; j < restrictions.params(); ++j) rhs(j) = rhs_full(restrictions.row_of(j), restrictions.column_of(j));
    out.gamma = factor_information(info).solve(rhs);
    out.generalized = true;
  }

  out.beta = Vector::Zero(restrictions.vec_length());
  for (Index j = 0; j < restrictions.params(); ++j) out.beta(restrictions.support()[static_cast<std::size_t>(j)]) = out.gamma(j);
  out.phi = Eigen::Map<const Matrix>(out.beta.data(), n, static_cast<Index>(n) * q);

  const Matrix resid = y - out.phi * x;
  out.residual_covariance = resid * resid.transpose() / static_cast<double>(transitions);
  const double rss = resid.squaredNorm();
  const double dof = static_cast<double>(n) * transitions - static_cast<double>(restrictions.params());
  out.sigma2 = dof > 0.0 ? rss / dof : rss / (static_cast<double>(n) * transitions);
  return out;
}

Matrix bias_matrix(const RestrictionSet& truth, const RestrictionSet& est, const Matrix& gram, const Matrix& sigma) {
  check_conformable(truth, est.nodes(), est.features());
  check_moment_inputs(est, gram, sigma);
  const Matrix w = checked_inverse(sigma);
  const auto llt = factor_information(weighted_cross(est, est, gram, w));
  return llt.solve(weighted_cross(est, truth, gram, w));
}

Matrix asymptotic_covariance(const RestrictionSet& est, const Matrix& gamma, const Matrix& sigma) {
  check_moment_inputs(est, gamma, sigma);
  const Matrix w = checked_inverse(sigma);
  const auto llt = factor_information(weighted_cross(est, est, gamma, w));
  Matrix v = llt.solve(Matrix::Identity(est.params(), est.params()));
  return 0.5 * (v + v.transpose());
}

Matrix variance_difference(const RestrictionSet& truth, const RestrictionSet& est, const Matrix& gamma,
                           const Matrix& sigma) {
  check_conformable(truth, est.nodes(), est.features());
  return expand(est, asymptotic_covariance(est, gamma, sigma)) - expand(truth, asymptotic_covariance(truth, gamma, sigma));
}

double variance_inflation(const RestrictionSet& truth, const RestrictionSet& est, const Matrix& gamma,
                          const Matrix& sigma) {
  if (!truth.nested_in(est))
    throw ConfigError("variance inflation needs nested restrictions: the estimated support omits a true edge");
  // R'R = I, so tr(R V R') = tr(V).
  return asymptotic_covariance(est, gamma, sigma).trace() / asymptotic_covariance(truth, gamma, sigma).trace();
}

}  // namespace nirvar::var
