#include <gtest/gtest.h>

#include "mcfisher/gaussian_fisher.hpp"
#include "mcfisher/poisson_fisher.hpp"
#include "mcfisher/toymodels.hpp"
#include "test_util.hpp"

using namespace mcfisher;
using mcfisher::test::rel_frobenius;

namespace {

Vector at(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) v(k++) = x;
  return v;
}

Grid single_point(double x) {
  Grid g;
  g.points = 1;
  g.x_min = g.x_max = x;
  return g;
}

// Expected log-likelihood of the Gaussian toy model at theta for data drawn
// at theta0, up to a constant: the Fisher matrix is minus its Hessian.
double expected_loglike_gaussian(const std::vector<double>& theta, const std::vector<double>& theta0,
                                 const Vector& x) {
  const Vector mu = toy_mean(theta, x);
  const Vector mu0 = toy_mean(theta0, x);
  double s = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double c = 2.0 * mu(k) * mu(k);
    const double c0 = 2.0 * mu0(k) * mu0(k);
    const double dm = mu0(k) - mu(k);
    s += -0.5 * std::log(c) - 0.5 * (c0 + dm * dm) / c;
  }
  return s;
}

}  // namespace

TEST(ToyMean, SimpleValues) {
  EXPECT_EQ(toy_mean({1, 0, 0}, at({0.1, 0.5, 1.0})), Vector::Ones(3));
  EXPECT_DOUBLE_EQ(toy_mean({1, 1, 1}, at({1.0}))(0), 3.0);
  EXPECT_DOUBLE_EQ(toy_mean({1, 1, 1}, at({0.25}))(0), 1.75);
}

TEST(Grid, LogSpacingPinsEndpoints) {
  const Vector x = Grid{}.values();
  ASSERT_EQ(x.size(), 100);
  EXPECT_EQ(x(0), 1e-4);
  EXPECT_EQ(x(99), 1.0);
  EXPECT_NEAR(x(1) / x(0), x(99) / x(98), 1e-12);
  Grid bad;
  bad.x_min = 0.0;
  EXPECT_THROW(bad.values(), Error);
}

TEST(GaussianToy, Deterministic) {
  const ToyConfig c;
  EXPECT_EQ(gaussian_toy_simulate(c, c.theta_star, 2, 9).data, gaussian_toy_simulate(c, c.theta_star, 2, 9).data);
  EXPECT_NE(gaussian_toy_simulate(c, c.theta_star, 2, 9).data, gaussian_toy_simulate(c, c.theta_star, 2, 10).data);
}

TEST(GaussianToy, VarianceIsTwiceMeanSquared) {
  ToyConfig c;
  c.grid.points = 10;
  const std::size_t n = 100000;
  const DataEnsemble e = gaussian_toy_simulate(c, c.theta_star, n, 21);
  const Vector mu = toy_mean(c.theta_star, c.grid.values());
  const Vector var = sample_variance(e.data, detail::all_indices(e.n()));
  for (Eigen::Index k = 0; k < mu.size(); ++k) {
    const double v = 2.0 * mu(k) * mu(k);
    EXPECT_LT(std::abs(var(k) - v), 5.0 * v * std::sqrt(2.0 / (n - 1))) << k;
  }
}

TEST(GaussianToy, MatchedDerivativeSamplesConverge) {
  // The noise is multiplicative, so a matched pair differs by dmu_i (1 + sqrt2 z):
  // the finite-difference error vanishes as the step shrinks, the scatter does not.
  const ToyConfig c;
  const Vector x = c.grid.values();
  const Matrix exact = toy_mean_derivs(x);
  const Vector mu = toy_mean(c.theta_star, x);
  const std::size_t n = 200;
  const DataEnsemble fid = gaussian_toy_simulate(c, c.theta_star, n, 5);
  for (double step : {1e-1, 1e-3, 1e-5}) {
    for (std::size_t i = 0; i < 3; ++i) {
      std::vector<double> tp = c.theta_star, tm = c.theta_star;
      tp[i] += step;
      tm[i] -= step;
      const RowMatrix s = (gaussian_toy_simulate(c, tp, n, 5).data - gaussian_toy_simulate(c, tm, n, 5).data) /
                          (2.0 * step);
      double worst = 0.0;
      for (Eigen::Index r = 0; r < s.rows(); ++r) {
        for (Eigen::Index k = 0; k < s.cols(); ++k) {
          const double factor = fid.data(r, k) / mu(k);  // 1 + sqrt2 z
          const double expected = exact(static_cast<Eigen::Index>(i), k) * factor;
          worst = std::max(worst, std::abs(s(r, k) - expected) / (1.0 + std::abs(expected)));
        }
      }
      EXPECT_LT(worst, 1e-13 / step) << step << " " << i;
    }
  }
}

TEST(GaussianToyAnalytic, SinglePointHandValue) {
  const FisherMatrix f = gaussian_toy_analytic_fisher({1, 1, 1}, single_point(1.0));
  EXPECT_NEAR(f.matrix(0, 0), 5.0 / 18.0, 1e-15);
}

TEST(GaussianToyAnalytic, SymmetricPositiveDefinite) {
  const FisherMatrix f = gaussian_toy_analytic_fisher({1, 1, 1}, Grid{});
  EXPECT_EQ(f.matrix.matrix(), f.matrix.matrix().transpose());
  EXPECT_GT(eigen_system(f.matrix).values.minCoeff(), 0.0);
  EXPECT_NEAR(f.matrix(0, 0), 5.0 * gaussian_toy_analytic_fisher({1, 1, 1}, Grid{}, false).matrix(0, 0), 1e-9);
}

TEST(GaussianToyAnalytic, MatchesNumericalHessian) {
  const std::vector<double> theta0{1, 1, 1};
  const Vector x = Grid{}.values();
  const double h = 1e-4;
  Matrix hess(3, 3);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      auto shifted = [&](double di, double dj) {
        std::vector<double> t = theta0;
        t[static_cast<std::size_t>(i)] += di;
        t[static_cast<std::size_t>(j)] += dj;
        return expected_loglike_gaussian(t, theta0, x);
      };
      hess(i, j) = -(shifted(h, h) - shifted(h, -h) - shifted(-h, h) + shifted(-h, -h)) / (4 * h * h);
    }
  }
  const FisherMatrix f = gaussian_toy_analytic_fisher(theta0, Grid{});
  EXPECT_LT(rel_frobenius(hess, f.matrix.matrix()), 1e-6);
}

TEST(PoissonToy, ConstantRateMean) {
  ToyConfig c = ToyConfig::poisson_default();
  c.grid.points = 3;
  const std::size_t n = 100000;
  const DataEnsemble e = poisson_toy_simulate(c, {1, 0, 0}, n, 4);
  const Vector m = sample_mean(e.data);
  for (Eigen::Index k = 0; k < 3; ++k) EXPECT_LT(std::abs(m(k) - 1.0), 5.0 * std::sqrt(1.0 / n));
}

TEST(PoissonToy, DeterministicAndVarianceEqualsMean) {
  ToyConfig c = ToyConfig::poisson_default();
  EXPECT_EQ(poisson_toy_simulate(c, c.theta_star, 5, 3).data, poisson_toy_simulate(c, c.theta_star, 5, 3).data);
  const std::size_t n = 40000;
  const DataEnsemble e = poisson_toy_simulate(c, c.theta_star, n, 8);
  const Vector m = sample_mean(e.data);
  const Vector v = sample_variance(e.data, detail::all_indices(e.n()));
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    // sd of a Poisson sample variance ~ sqrt((lambda + 2 lambda^2) / n)
    EXPECT_LT(std::abs(v(k) - m(k)), 5.0 * std::sqrt((m(k) + 2.0 * m(k) * m(k)) / n)) << k;
  }
}

TEST(PoissonToyAnalytic, SinglePointCases) {
  Grid g = single_point(1.0);
  // lambda = theta with only alpha nonzero: F_aa = 1 / theta
  EXPECT_NEAR(poisson_toy_analytic_fisher({2, 0, 0}, g).matrix(0, 0), 0.5, 1e-15);
  const FisherMatrix f = poisson_toy_analytic_fisher({1, 1, 1}, g);
  EXPECT_LT(rel_frobenius(f.matrix.matrix(), Matrix::Constant(3, 3, 1.0 / 3.0)), 1e-15);
}

TEST(PoissonToyAnalytic, MatchesDirectSummation) {
  const Vector x = Grid{}.values();
  Matrix f = Matrix::Zero(3, 3);
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const long double xk = x(k);
    const long double lam = 1.0L + xk + std::sqrt(xk);
    const long double d[3] = {1.0L, xk, std::sqrt(xk)};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) f(i, j) += static_cast<double>(d[i] * d[j] / lam);
    }
  }
  EXPECT_LT(rel_frobenius(poisson_toy_analytic_fisher({1, 1, 1}, Grid{}).matrix.matrix(), f), 1e-10);
}

TEST(ToyEnsembles, SeedRolesAndPairing) {
  ToyConfig c;
  const ToyEnsembles matched = toy_ensembles(c, 10, 4, 1);
  EXPECT_TRUE(matched.derivatives.paired);
  EXPECT_EQ(matched.derivatives.p(), 3u);
  ToyConfig u = ToyConfig::poisson_default();
  const ToyEnsembles unmatched = toy_ensembles(u, 4, 4, 1);
  EXPECT_FALSE(unmatched.derivatives.paired);
  EXPECT_NE(unmatched.derivatives.plus[0].data, unmatched.derivatives.plus[1].data);
  ToyConfig bad;
  bad.steps = {0.1, -0.1, 0.1};
  EXPECT_THROW(toy_ensembles(bad, 10, 4, 1), Error);
}
