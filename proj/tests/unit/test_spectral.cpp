#include <cmath>
#include <numbers>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "doctest.h"
#include "nirvar/dgp.hpp"
#include "nirvar/spectral.hpp"

using namespace nirvar;

namespace {

dgp::PanelTensor white_noise(int n, int t, double sigma2, std::uint64_t seed, int q = 1) {
  Rng r(seed);
  Matrix d(static_cast<Index>(n) * q, t);
  const double s = std::sqrt(sigma2);
  for (Index j = 0; j < d.cols(); ++j)
    for (Index i = 0; i < d.rows(); ++i) d(i, j) = s * r.normal();
  return dgp::PanelTensor(q, n, d);
}

Vector cov_eigs(const dgp::PanelTensor& p) {
  const auto s = spectral::covariance_stack(spectral::demean(p), spectral::Mode::Covariance);
  return spectral::sorted_eigenvalues(s.blocks[0]);
}

double integrate(const std::function<double(double)>& f, double a, double b) {
  boost::math::quadrature::tanh_sinh<double> q;
  return q.integrate(f, a, b);
}

}  // namespace

TEST_CASE("mode names") {
  CHECK(spectral::parse_mode("precision") == spectral::Mode::Precision);
  CHECK(spectral::to_string(spectral::Mode::Correlation) == "correlation");
  CHECK_THROWS_AS(spectral::parse_mode("bogus"), ConfigError);
}

TEST_CASE("demeaning removes series means") {
  Matrix d = Matrix::Random(4, 30).array() + 3.0;
  const dgp::PanelTensor p(2, 2, d);
  const Vector mu = spectral::series_means(p);
  CHECK((mu - d.rowwise().mean()).norm() < 1e-15);
  CHECK(spectral::demean(p).data().rowwise().mean().norm() < 1e-14);
}

TEST_CASE("white-noise covariance is the identity") {
  const auto p = white_noise(2, 100000, 1.0, 1);
  const auto s = spectral::covariance_stack(p, spectral::Mode::Covariance);
  CHECK((s.blocks[0] - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 0.02);
  CHECK(s.eta() == doctest::Approx(2.0 / 100000));
}

TEST_CASE("stack blocks are symmetric, unfolded, and mode-specific") {
  const auto p = spectral::demean(white_noise(5, 200, 2.0, 2, 2));
  const auto cov = spectral::covariance_stack(p, spectral::Mode::Covariance);
  REQUIRE(cov.blocks.size() == 2);
  CHECK((cov.blocks[1] - cov.blocks[1].transpose()).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(cov.unfolded().cols() == 10);
  CHECK((cov.unfolded().rightCols(5) - cov.blocks[1]).norm() == 0.0);

  const auto prec = spectral::covariance_stack(p, spectral::Mode::Precision);
  CHECK((prec.blocks[0] * cov.blocks[0] - Matrix::Identity(5, 5)).norm() < 1e-10);

  const auto corr = spectral::covariance_stack(p, spectral::Mode::Correlation);
  for (int i = 0; i < 5; ++i) CHECK(corr.blocks[0](i, i) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("precision mode needs T > N and an invertible covariance") {
  CHECK_THROWS_AS(spectral::covariance_stack(white_noise(10, 8, 1.0, 3), spectral::Mode::Precision), ConfigError);
  Matrix d = Matrix::Random(3, 50);
  d.row(2) = d.row(1);
  CHECK_THROWS_AS(spectral::covariance_stack(dgp::PanelTensor(1, 3, d), spectral::Mode::Precision), NumericalError);
}

TEST_CASE("UASE reconstructs the unfolded matrix and equalises identical layers") {
  Matrix a = Matrix::Random(6, 6);
  const Matrix s = a * a.transpose();
  spectral::CovarianceStack stack{6, 2, 100, spectral::Mode::Covariance, {s, s}};
  const auto e = spectral::uase(stack, 6);
  CHECK(e.rank == 6);
  for (Index k = 1; k < e.singular_values.size(); ++k) CHECK(e.singular_values(k) <= e.singular_values(k - 1));
  // Identical layers give identical right embeddings.
  CHECK((e.right[0] - e.right[1]).norm() < 1e-14);
  // (U D^{1/2}) (V D^{1/2})' = S
  Matrix right(12, 6);
  right << e.right[0], e.right[1];
  CHECK((e.left * right.transpose() - stack.unfolded()).norm() < 1e-9);
  // sign convention: largest-magnitude entry of each U column is positive
  for (Index k = 0; k < 6; ++k) {
    Index arg;
    e.u.col(k).cwiseAbs().maxCoeff(&arg);
    CHECK(e.u(arg, k) > 0.0);
  }
}

TEST_CASE("UASE drops numerically zero singular values") {
  Vector v = Vector::Random(5);
  const Matrix s = v * v.transpose();  // rank 1
  spectral::CovarianceStack stack{5, 1, 100, spectral::Mode::Covariance, {s}};
  const auto e = spectral::uase(stack, 3);
  CHECK(e.rank == 1);
  CHECK_FALSE(e.warnings.empty());
  CHECK_THROWS_AS(spectral::uase(stack, 0), ConfigError);
}

TEST_CASE("spectrum rescaling") {
  Vector l(4);
  l << 4.0, 2.0, 1.0, 0.5;
  const Vector s = spectral::scale_spectrum(l);
  CHECK(s(0) == doctest::Approx(std::sqrt(0.75)));
  CHECK(s(1) == doctest::Approx(std::sqrt(0.5)));
  CHECK(s(2) == 0.0);
  CHECK(s(3) == 0.0);
}

TEST_CASE("rescaled embedding of a Lyapunov covariance recovers |lambda_Phi|") {
  Matrix q = Matrix::Random(10, 10).householderQr().householderQ();
  Vector lam = Vector::Zero(10);
  lam.head(3) << 0.9, 0.6, 0.4;
  const Matrix phi = q * lam.asDiagonal() * q.transpose();
  const Matrix g = dgp::lyapunov_covariance(phi, Matrix::Identity(10, 10));
  spectral::CovarianceStack stack{10, 1, 1000, spectral::Mode::Covariance, {g}};
  const auto e = spectral::uase(stack, 3);
  const Matrix x = spectral::rescaled_embedding(e, 1.0);
  // X X' = U Lambda_Phi U' = Phi for this positive semidefinite Phi.
  CHECK((x * x.transpose() - phi).norm() < 1e-8);
}

TEST_CASE("MP support edges") {
  const auto p = spectral::MPParams::make(0.25, 2.0);
  CHECK(p.x_minus() == doctest::Approx(2.0 * 0.25));
  CHECK(p.x_plus() == doctest::Approx(2.0 * 2.25));
  CHECK(p.y_minus() == doctest::Approx(0.5 * std::pow(0.5 / 0.75, 2)));
  CHECK(p.y_plus() == doctest::Approx(0.5 * std::pow(1.5 / 0.75, 2)));
  CHECK(p.x_minus() < p.x_plus());
  CHECK(p.y_minus() < p.y_plus());
  CHECK_THROWS_AS(spectral::MPParams::make(1.0, 1.0), ConfigError);
  CHECK_THROWS_AS(spectral::MPParams::make(0.5, -1.0), ConfigError);
}

TEST_CASE("MP and inverse-MP densities have unit mass") {
  for (double eta : {0.05, 0.25, 0.6}) {
    for (double s2 : {0.5, 1.0, 2.0}) {
      const auto p = spectral::MPParams::make(eta, s2);
      const double m1 = integrate([&](double x) { return spectral::mp_density(x, eta, s2); }, p.x_minus(), p.x_plus());
      const double m2 = integrate([&](double y) { return spectral::imp_density(y, eta, s2); }, p.y_minus(), p.y_plus());
      CHECK(m1 == doctest::Approx(1.0).epsilon(1e-8));
      CHECK(m2 == doctest::Approx(1.0).epsilon(1e-8));
      CHECK(spectral::mp_cdf(p.x_plus() + 1.0, eta, s2) == doctest::Approx(1.0).epsilon(1e-7));
      CHECK(spectral::imp_cdf(p.y_plus(), eta, s2) == doctest::Approx(1.0).epsilon(1e-7));
      CHECK(spectral::mp_cdf(p.x_minus(), eta, s2) == 0.0);
    }
  }
}

TEST_CASE("inverse-MP is the change of variables of MP") {
  const double eta = 0.3, s2 = 1.7;
  const auto p = spectral::MPParams::make(eta, s2);
  for (int k = 1; k < 50; ++k) {
    const double y = p.y_minus() + (p.y_plus() - p.y_minus()) * k / 50.0;
    const double lhs = spectral::imp_density(y, eta, s2);
    const double rhs = spectral::mp_density(1.0 / y, eta, s2) / (y * y);
    CHECK(std::abs(lhs - rhs) < 1e-10);
  }
}

TEST_CASE("MP CDF agrees with a fine trapezoid rule") {
  const double eta = 0.25;
  const auto p = spectral::MPParams::make(eta, 1.0);
  const double x = 1.0;
  const int n = 2000000;
  const double h = (x - p.x_minus()) / n;
  double sum = 0.5 * (spectral::mp_density(p.x_minus(), eta, 1.0) + spectral::mp_density(x, eta, 1.0));
  for (int k = 1; k < n; ++k) sum += spectral::mp_density(p.x_minus() + k * h, eta, 1.0);
  CHECK(spectral::mp_cdf(x, eta, 1.0) == doctest::Approx(sum * h).epsilon(1e-6));
}

TEST_CASE("adaptive Simpson integrates polynomials and smooth functions") {
  CHECK(spectral::adaptive_simpson([](double x) { return x * x * x; }, 0.0, 2.0, 1e-12) == doctest::Approx(4.0));
  CHECK(spectral::adaptive_simpson([](double x) { return std::sin(x); }, 0.0, std::numbers::pi, 1e-10) ==
        doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("rank selection thresholds") {
  Vector eigs(6);
  eigs << 10.0, 5.0, 1.2, 1.0, 0.8, 0.5;
  const auto r = spectral::select_rank_cov(eigs, 0.1, 1.0);
  CHECK(r.threshold == doctest::Approx(std::pow(1 + std::sqrt(0.1), 2)));
  CHECK(r.d_hat == 2);
  CHECK_FALSE(r.degenerate);

  const Vector inv = eigs.cwiseInverse();
  const auto rp = spectral::select_rank_prec(inv, 0.1, 1.0);
  CHECK(rp.threshold == doctest::Approx(std::pow((1 - std::sqrt(0.1)) / 0.9, 2)));
  CHECK(rp.d_hat == 2);

  const auto none = spectral::select_rank_cov(Vector::Constant(5, 0.5), 0.1, 1.0);
  CHECK(none.degenerate);
  CHECK(none.d_hat == 1);
  CHECK(none.exceedances == 0);
}

TEST_CASE("white noise yields no informative eigenvalue") {
  const auto p = white_noise(100, 1000, 1.0, 21);
  const auto r = spectral::select_rank_cov(cov_eigs(p), 0.1, 1.0);
  CHECK(r.exceedances <= 1);
  CHECK(r.d_hat == 1);
}

TEST_CASE("MP KS statistic is small on white noise and large on a wrong scale") {
  const auto p = white_noise(200, 800, 1.0, 5);
  const Vector e = cov_eigs(p);
  CHECK(spectral::mp_ks_statistic(e, 0.25, 1.0) < 0.05);
  CHECK(spectral::mp_ks_statistic(e, 0.25, 3.0) > 0.5);
}

TEST_CASE("MP scale fit recovers sigma2") {
  for (double s2 : {0.5, 2.0}) {
    const auto p = white_noise(500, 2000, s2, 77);
    const auto fit = spectral::fit_mp_scale(cov_eigs(p), 0.25);
    CHECK(std::abs(fit.sigma2 - s2) < 0.075 * s2);
    CHECK(fit.ks < 0.05);
  }
  CHECK(spectral::fit_mp_scale(cov_eigs(white_noise(20, 100, 3.0, 1)), 0.2, spectral::Mode::Correlation).sigma2 == 1.0);
  CHECK_THROWS_AS(spectral::fit_mp_scale(Vector::Ones(5), 0.2), ConfigError);
}
