#include <cmath>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "nirvar/dgp.hpp"
#include "nirvar/graph.hpp"

using namespace nirvar;

namespace {

dgp::CoefficientStack fixed_coefficients(const Matrix& xi) {
  dgp::CoefficientStack c;
  c.n = static_cast<int>(xi.rows());
  c.q = 1;
  c.xi = xi;
  c.support = (xi.array() != 0.0).cast<std::uint8_t>().matrix();
  c.weights = xi;
  c.spectral_radius = dgp::spectral_radius(xi);
  return c;
}

// Kronecker oracle: vec(Gamma) = (I - Phi (x) Phi)^{-1} vec(Sigma).
Matrix lyapunov_oracle(const Matrix& phi, const Matrix& sigma) {
  const Index n = phi.rows();
  Matrix k(n * n, n * n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) k.block(i * n, j * n, n, n) = phi(i, j) * phi;
  const Matrix lhs = Matrix::Identity(n * n, n * n) - k;
  const Vector v = lhs.partialPivLu().solve(Eigen::Map<const Vector>(sigma.data(), n * n));
  return Eigen::Map<const Matrix>(v.data(), n, n);
}

Matrix sample_cov(const dgp::PanelTensor& p) {
  return p.data() * p.data().transpose() / static_cast<double>(p.length());
}

}  // namespace

TEST_CASE("panel tensor validates its data") {
  CHECK_THROWS_AS(dgp::PanelTensor(2, 3, Matrix::Zero(5, 10)), ConfigError);
  Matrix d = Matrix::Zero(6, 4);
  d(0, 0) = std::nan("");
  CHECK_THROWS_AS(dgp::PanelTensor(2, 3, d), ConfigError);
  Matrix ok = Matrix::Random(6, 4);
  const dgp::PanelTensor p(2, 3, ok);
  CHECK(p.feature(1).rows() == 3);
  CHECK(p.feature(1)(0, 0) == ok(3, 0));
}

TEST_CASE("noise settings validation") {
  dgp::NoiseSpec s;
  CHECK_NOTHROW(s.validate(3));
  s.sigma2 = 0.0;
  CHECK_THROWS_AS(s.validate(3), ConfigError);
  dgp::NoiseSpec full;
  full.covariance = Matrix::Identity(3, 3);
  (*full.covariance)(0, 1) = 2.0;
  (*full.covariance)(1, 0) = 2.0;
  CHECK_THROWS_AS(full.validate(3), ConfigError);
}

TEST_CASE("spectral radius") {
  Matrix m(2, 2);
  m << 0, 1, -1, 0;  // eigenvalues +-i
  CHECK(dgp::spectral_radius(m) == doctest::Approx(1.0));
  Matrix d = Vector::LinSpaced(5, -3.0, 1.0).asDiagonal();
  CHECK(dgp::spectral_radius(d) == doctest::Approx(3.0));
}

TEST_CASE("coefficients are scaled to the target radius and respect the support") {
  Rng r(11);
  const auto model = graph::BlockModel::planted(3, 0.6, 0.1);
  const auto z = graph::contiguous_communities(30, 3);
  const std::vector<graph::AdjacencyStack> a{graph::AdjacencyStack({graph::sample_adjacency(model, z, r)})};
  const auto c = dgp::build_coefficients(a, dgp::Uniform01{}, 0.9, r);
  CHECK(c.spectral_radius == doctest::Approx(0.9).epsilon(1e-10));
  CHECK(dgp::spectral_radius(c.xi) == doctest::Approx(0.9).epsilon(1e-10));
  CHECK_FALSE(c.nonstationary);
  for (Index i = 0; i < 30; ++i)
    for (Index j = 0; j < 30; ++j)
      if (!a[0].at(i, j)) CHECK(c.xi(i, j) == 0.0);
  CHECK((c.response(0) - c.xi).norm() == 0.0);
  CHECK(c.adjacency(0) == a[0]);

  CHECK_THROWS_AS(dgp::build_coefficients(a, dgp::Uniform01{}, 1.2, r), ConfigError);
  CHECK_THROWS_AS(dgp::build_coefficients(a, dgp::Uniform01{}, 0.0, r), ConfigError);
}

TEST_CASE("multi-feature coefficients stack response blocks") {
  Rng r(2);
  const auto model = graph::BlockModel::planted(2, 0.8, 0.1);
  const auto z = graph::contiguous_communities(6, 2);
  std::vector<graph::AdjacencyStack> per;
  for (int q = 0; q < 2; ++q)
    per.emplace_back(std::vector<BinaryMatrix>{graph::sample_adjacency(model, z, r), graph::sample_adjacency(model, z, r)});
  const auto c = dgp::build_coefficients(per, dgp::Constant{1.0}, 0.5, r);
  CHECK(c.xi.rows() == 12);
  CHECK(c.spectral_radius == doctest::Approx(0.5));
  CHECK(c.adjacency(1) == per[1]);
  // constant weights: nonzeros all equal
  const double w = c.xi.maxCoeff();
  for (Index i = 0; i < 12; ++i)
    for (Index j = 0; j < 12; ++j) CHECK((c.xi(i, j) == 0.0 || c.xi(i, j) == doctest::Approx(w)));
}

TEST_CASE("expected-adjacency scaling and stationary redraws") {
  Rng r(4);
  const auto model = graph::BlockModel::planted(2, 0.5, 0.05);
  const auto z = graph::contiguous_communities(40, 2);
  const Matrix ea = graph::edge_probabilities(model, z);
  auto draw = [&](Rng& g) {
    const std::vector<graph::AdjacencyStack> a{graph::AdjacencyStack({graph::sample_adjacency(model, z, g)})};
    return dgp::build_coefficients_expected(a, dgp::Constant{1.0}, ea, 0.95, g);
  };
  const auto c = dgp::draw_stationary(draw, r);
  CHECK(c.spectral_radius < 1.0);
  CHECK_FALSE(c.nonstationary);
}

TEST_CASE("white noise sample covariance is close to the identity") {
  Rng r(1);
  const auto c = fixed_coefficients(Matrix::Zero(4, 4));
  const auto p = dgp::simulate(c, {}, 5000, 0, r);
  const Matrix s = sample_cov(p);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(s(i, i) - 1.0) < 0.1);
}

TEST_CASE("scalar AR(1) variance") {
  Rng r(8);
  const auto c = fixed_coefficients(Matrix::Constant(1, 1, 0.5));
  const auto p = dgp::simulate(c, {}, 50000, 100, r);
  CHECK(std::abs(sample_cov(p)(0, 0) - 1.0 / (1.0 - 0.25)) < 0.05);
}

TEST_CASE("simulation refuses non-stationary coefficients and is deterministic") {
  Rng r(1);
  CHECK_THROWS_AS(dgp::simulate(fixed_coefficients(Matrix::Constant(1, 1, 1.0)), {}, 10, 0, r), ConfigError);
  Rng a(5), b(5);
  const auto c = fixed_coefficients(Matrix::Constant(2, 2, 0.3));
  CHECK(dgp::simulate(c, {}, 50, 10, a).data() == dgp::simulate(c, {}, 50, 10, b).data());
}

TEST_CASE("full noise covariance is reproduced") {
  Rng r(3);
  dgp::NoiseSpec noise;
  Matrix sig(2, 2);
  sig << 2.0, 0.6, 0.6, 1.0;
  noise.covariance = sig;
  const auto p = dgp::simulate(fixed_coefficients(Matrix::Zero(2, 2)), noise, 100000, 0, r);
  CHECK((sample_cov(p) - sig).cwiseAbs().maxCoeff() < 0.03);
}

TEST_CASE("Lyapunov series matches the Kronecker solve") {
  Rng r(12);
  Matrix phi = Matrix::Random(6, 6);
  phi *= 0.8 / dgp::spectral_radius(phi);
  Matrix a = Matrix::Random(6, 6);
  const Matrix sigma = a * a.transpose() + Matrix::Identity(6, 6);
  const Matrix g = dgp::lyapunov_covariance(phi, sigma);
  const Matrix oracle = lyapunov_oracle(phi, sigma);
  CHECK((g - oracle).norm() / oracle.norm() < 1e-10);
  // fixed point of Gamma = Phi Gamma Phi' + Sigma
  CHECK((phi * g * phi.transpose() + sigma - g).norm() < 1e-9);
}

TEST_CASE("Lyapunov covariance of a symmetric coefficient matrix") {
  // Gamma and Phi share eigenvectors and lambda_Gamma = 1 / (1 - lambda_Phi^2).
  Matrix q = Matrix::Random(8, 8).householderQr().householderQ();
  Vector lam(8);
  lam << 0.9, -0.7, 0.5, 0.3, 0.1, 0.0, -0.2, 0.6;
  const Matrix phi = q * lam.asDiagonal() * q.transpose();
  const Matrix g = dgp::lyapunov_covariance(phi, Matrix::Identity(8, 8));
  const Matrix expected = q * (1.0 / (1.0 - lam.array().square())).matrix().asDiagonal() * q.transpose();
  CHECK((g - expected).norm() < 1e-9);
}

TEST_CASE("joint Lyapunov covariance uses block-diagonal noise") {
  const auto c = fixed_coefficients(Matrix::Constant(1, 1, 0.5));
  dgp::NoiseSpec noise;
  noise.sigma2 = 2.0;
  CHECK(dgp::lyapunov_covariance(c, noise)(0, 0) == doctest::Approx(2.0 / 0.75).epsilon(1e-12));
}

TEST_CASE("sample covariance converges to the Lyapunov covariance") {
  Matrix phi = Matrix::Random(10, 10);
  phi = 0.5 * (phi + phi.transpose()).eval();
  phi *= 0.7 / dgp::spectral_radius(phi);
  const auto c = fixed_coefficients(phi);
  const Matrix g = dgp::lyapunov_covariance(phi, Matrix::Identity(10, 10));
  double prev = 1e300;
  for (int t : {1000, 10000, 100000}) {
    Rng r(static_cast<std::uint64_t>(t));
    const double dist = (sample_cov(dgp::simulate(c, {}, t, 500, r)) - g).norm();
    CHECK(dist < prev);
    prev = dist;
  }
}
