#include <gtest/gtest.h>

#include "mcfisher/fisher.hpp"
#include "mcfisher/gaussian_fisher.hpp"
#include "mcfisher/toymodels.hpp"
#include "test_util.hpp"

using namespace mcfisher;
using mcfisher::test::moments;
using mcfisher::test::rel_frobenius;

namespace {

GaussianProducts scalar_products(double mu_deriv, double cov) {
  GaussianProducts p;
  p.mu = Vector::Constant(1, 1.0);
  p.precision = SymMatrix(Matrix::Constant(1, 1, 1.0 / cov));
  p.mu_derivs = Matrix::Constant(1, 1, mu_deriv);
  return p;
}

DerivativeNoise scalar_noise(double var_of_mean) {
  DerivativeNoise n;
  n.mu_derivs = Matrix::Constant(1, 1, 0.0);
  n.cov_of_mean = {Matrix::Constant(1, 1, var_of_mean)};
  return n;
}

Grid single_point(double x) {
  Grid g;
  g.points = 1;
  g.x_min = g.x_max = x;
  return g;
}

}  // namespace

TEST(StandardFisher, ScalarCases) {
  EXPECT_EQ(standard_fisher(scalar_products(1.0, 1.0)).matrix(0, 0), 1.0);
  // x = 1 at theta = (1, 1, 1): mu = 3, C = 18, dmu = 1, dC = 12
  const GaussianProducts p = gaussian_toy_products({1, 1, 1}, single_point(1.0), true);
  EXPECT_NEAR(p.covariance->matrix()(0, 0), 18.0, 1e-14);
  EXPECT_NEAR((*p.cov_derivs)[0](0, 0), 12.0, 1e-14);
  EXPECT_NEAR(standard_fisher(p).matrix(0, 0), 5.0 / 18.0, 1e-15);
}

TEST(StandardFisher, ExactProductsMatchAnalytic) {
  for (bool cov : {false, true}) {
    const FisherMatrix f = standard_fisher(gaussian_toy_products({1, 1, 1}, Grid{}, cov));
    const FisherMatrix a = gaussian_toy_analytic_fisher({1, 1, 1}, Grid{}, cov);
    EXPECT_LT(rel_frobenius(f.matrix.matrix(), a.matrix.matrix()), 1e-10) << cov;
  }
}

TEST(StandardFisher, DimensionMismatchIsAnError) {
  GaussianProducts p = scalar_products(1.0, 1.0);
  p.precision = SymMatrix::identity(2);
  EXPECT_THROW(standard_fisher(p), Error);
}

TEST(GaussianProducts, HartlapAndErrors) {
  const ToyConfig c;
  const ToyEnsembles ens = toy_ensembles(c, 150, 10, 2);
  const auto all_fid = detail::all_indices(150);
  const auto all_d = detail::all_indices(10);
  const GaussianProducts p = gaussian_products(ens.fiducial, all_fid, ens.derivatives, all_d);
  const SymMatrix raw = floored_inverse(*p.covariance).matrix;
  EXPECT_NEAR(p.precision(3, 3) / raw(3, 3), hartlap_factor(150, 100), 1e-12);
  try {
    gaussian_products(ens.fiducial, detail::all_indices(102), ens.derivatives, all_d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("Hartlap factor nonpositive"), std::string::npos);
  }
  EXPECT_THROW(gaussian_products(ens.fiducial, all_fid, ens.derivatives, detail::all_indices(1)), Error);
}

TEST(StandardBias, ScalarCases) {
  const GaussianProducts p = scalar_products(1.0, 1.0);
  EXPECT_EQ(standard_bias(p, scalar_noise(0.0))(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(standard_bias(p, scalar_noise(0.1))(0, 0), 0.1);
}

TEST(PrecisionNoise, ZeroWithoutCovarianceDerivatives) {
  const GaussianProducts p = gaussian_toy_products({1, 1, 1}, Grid{}, false);
  EXPECT_EQ(precision_noise(p, 5000), Matrix::Zero(3, 3));
  const GaussianProducts q = gaussian_toy_products({1, 1, 1}, Grid{}, true);
  EXPECT_GT(precision_noise(q, 5000)(0, 0), 0.0);
  EXPECT_THROW(precision_noise(q, 104), Error);
}

TEST(CovarianceDerivativeNoise, MatchesMonteCarloSpread) {
  // Paired toy ensembles: the spread of the estimated trace term across trials
  // should be what the per-realization estimate says.
  ToyConfig c;
  c.grid.points = 5;
  const GaussianProducts exact = gaussian_toy_products(c.theta_star, c.grid, true);
  const std::size_t n = 200;
  std::vector<double> contracted, predicted;
  for (std::uint64_t t = 0; t < 300; ++t) {
    const ToyEnsembles ens = toy_ensembles(c, 3, n, 1000 + t);
    const IndexSet all = detail::all_indices(n);
    const GaussianProducts d = gaussian_derivative_products(ens.derivatives, all, true);
    const Matrix pc = exact.precision.matrix() * (*d.cov_derivs)[0].matrix();
    contracted.push_back(pc.cwiseProduct(pc.transpose()).sum());
    predicted.push_back(covariance_derivative_noise(ens.derivatives, all, exact.precision)(0, 0));
  }
  // E[tr(P dC P dC)] = tr(P C' P C') + 2 * noise term
  const Matrix pc0 = exact.precision.matrix() * (*exact.cov_derivs)[0].matrix();
  const auto obs = moments(contracted);
  const auto pred = moments(predicted);
  const double excess = obs.mean - pc0.cwiseProduct(pc0.transpose()).sum();
  EXPECT_LT(std::abs(excess - 2.0 * pred.mean), 5.0 * std::hypot(obs.se, 2.0 * pred.se));
}

TEST(Compression, ScalarCases) {
  GaussianProducts a = scalar_products(1.0, 1.0);
  const GaussianCompression map = build_compression(a);
  EXPECT_EQ(map.evaluate(Vector::Constant(1, 2.0))(0), 1.0);
  const GaussianProducts full = gaussian_toy_products({1, 1, 1}, Grid{}, false);
  EXPECT_EQ(build_compression(full).evaluate(full.mu), Vector::Zero(3));
  EXPECT_THROW(map.evaluate(Vector::Zero(2)), Error);
}

TEST(Compression, RowsAgreeWithSingleEvaluation) {
  for (bool cov : {false, true}) {
    const GaussianProducts p = gaussian_toy_products({1, 1, 1}, Grid{}, cov);
    const GaussianCompression map = build_compression(p);
    const ToyConfig c;
    const DataEnsemble e = gaussian_toy_simulate(c, c.theta_star, 5, 3);
    const RowMatrix t = map.evaluate_rows(e.data);
    for (Eigen::Index r = 0; r < 5; ++r) {
      const Vector single = map.evaluate(e.data.row(r).transpose());
      EXPECT_LT((t.row(r).transpose() - single).norm(), 1e-9 * (1.0 + single.norm()));
    }
  }
}

TEST(Compression, ScoreHasZeroMean) {
  const ToyConfig c;
  for (bool cov : {false, true}) {
    const GaussianCompression map = build_compression(gaussian_toy_products(c.theta_star, c.grid, cov));
    const std::size_t n = 100000;
    const RowMatrix t = map.evaluate_rows(gaussian_toy_simulate(c, c.theta_star, n, cov ? 41 : 40).data);
    const Vector mean = sample_mean(t);
    const Vector var = sample_variance(t, detail::all_indices(static_cast<Eigen::Index>(n)));
    for (Eigen::Index i = 0; i < 3; ++i) EXPECT_LT(std::abs(mean(i)), 5.0 * std::sqrt(var(i) / n)) << cov << i;
  }
}

TEST(CompressedMeanDerivs, ExactAndScalar) {
  const GaussianProducts p = gaussian_toy_products({1, 1, 1}, Grid{}, false);
  const Matrix m = compressed_mean_derivs(build_compression(p), p);
  EXPECT_LT(rel_frobenius(m, gaussian_toy_analytic_fisher({1, 1, 1}, Grid{}, false).matrix.matrix()), 1e-12);
  const GaussianProducts s = scalar_products(2.0, 1.0);
  EXPECT_DOUBLE_EQ(compressed_mean_derivs(build_compression(s), s)(0, 0), 4.0);
}

TEST(CompressedMeanDerivs, UnbiasedOverTrials) {
  const ToyConfig c;
  const GaussianProducts exact = gaussian_toy_products(c.theta_star, c.grid, false);
  const GaussianCompression map = build_compression(exact);
  const Matrix truth = gaussian_toy_analytic_fisher(c.theta_star, c.grid, false).matrix.matrix();
  std::vector<std::vector<double>> entries(9);
  for (std::uint64_t t = 0; t < 200; ++t) {
    const ToyEnsembles ens = toy_ensembles(c, 3, 100, 500 + t);
    const GaussianProducts beta = gaussian_derivative_products(ens.derivatives, detail::all_indices(100), false);
    const Matrix m = compressed_mean_derivs(map, beta);
    for (int k = 0; k < 9; ++k) entries[static_cast<std::size_t>(k)].push_back(m(k / 3, k % 3));
  }
  for (int k = 0; k < 9; ++k) {
    const auto mo = moments(entries[static_cast<std::size_t>(k)]);
    EXPECT_LT(std::abs(mo.mean - truth(k / 3, k % 3)), 5.0 * mo.se) << k;
  }
}

TEST(CompressedCovariance, ExactAndScalar) {
  for (bool cov : {false, true}) {
    const GaussianProducts p = gaussian_toy_products({1, 1, 1}, Grid{}, cov);
    const Matrix truth = gaussian_toy_analytic_fisher({1, 1, 1}, Grid{}, cov).matrix.matrix();
    const GaussianCompression map = build_compression(p);
    EXPECT_LT(rel_frobenius(compressed_covariance(map, p, CovarianceForm::alpha_form).matrix(), truth), 1e-10);
    if (!cov) {
      EXPECT_LT(rel_frobenius(compressed_covariance(map, p, CovarianceForm::beta_form).matrix(), truth), 1e-10);
    }
  }
  const GaussianProducts s = scalar_products(2.0, 1.0);
  EXPECT_DOUBLE_EQ(compressed_covariance(build_compression(s), s)(0, 0), 4.0);
}

TEST(CompressedCovariance, AlphaFormIsLessNoisy) {
  const ToyConfig c;
  const IndexSet fid_all = detail::all_indices(400);
  std::vector<double> alpha_trace, beta_trace;
  for (std::uint64_t t = 0; t < 200; ++t) {
    const ToyEnsembles a = toy_ensembles(c, 400, 100, 900 + 2 * t);
    const ToyEnsembles b = toy_ensembles(c, 400, 100, 901 + 2 * t);
    const GaussianProducts pa = gaussian_products(a.fiducial, fid_all, a.derivatives,
                                                  detail::all_indices(100));
    const GaussianProducts pb = gaussian_derivative_products(b.derivatives, detail::all_indices(100), false,
                                                             &b.fiducial, &fid_all);
    const GaussianCompression map = build_compression(pa);
    alpha_trace.push_back(compressed_covariance(map, pb, CovarianceForm::alpha_form).matrix().trace());
    beta_trace.push_back(compressed_covariance(map, pb, CovarianceForm::beta_form).matrix().trace());
  }
  auto var = [](const std::vector<double>& v) {
    const auto m = moments(v);
    return m.se * m.se * static_cast<double>(v.size());
  };
  EXPECT_LT(var(alpha_trace), var(beta_trace));
}

TEST(CompressedFisher, SimpleCases) {
  const Matrix f = gaussian_toy_analytic_fisher({1, 1, 1}, Grid{}, false).matrix.matrix();
  EXPECT_LT(rel_frobenius(compressed_fisher(f, SymMatrix(f)).matrix.matrix(), f), 1e-10);
  EXPECT_DOUBLE_EQ(compressed_fisher(Matrix::Constant(1, 1, 2.0), SymMatrix(Matrix::Constant(1, 1, 4.0))).matrix(0, 0),
                   1.0);
  EXPECT_THROW(compressed_fisher(Matrix::Ones(2, 1), SymMatrix::identity(1)), Error);
}

TEST(CompressedFisher, SuboptimalCompressionUnderestimates) {
  // Noisy compression weights from 360 alpha sims, then a converged beta side:
  // the estimate falls below the analytic information.
  const ToyConfig c;
  const GaussianProducts exact = gaussian_toy_products(c.theta_star, c.grid, false);
  const Matrix truth = gaussian_toy_analytic_fisher(c.theta_star, c.grid, false).matrix.matrix();
  std::vector<std::vector<double>> diag(3);
  for (std::uint64_t t = 0; t < 30; ++t) {
    const ToyEnsembles ens = toy_ensembles(c, 3, 360, 70 + t);
    GaussianProducts alpha = gaussian_derivative_products(ens.derivatives, detail::all_indices(360), false);
    alpha.mu = exact.mu;
    alpha.precision = exact.precision;
    const GaussianCompression map = build_compression(alpha);
    const FisherMatrix f = compressed_fisher(compressed_mean_derivs(map, exact), compressed_covariance(map, exact));
    for (Eigen::Index i = 0; i < 3; ++i) diag[static_cast<std::size_t>(i)].push_back(f.matrix(i, i));
  }
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_LT(moments(diag[static_cast<std::size_t>(i)]).mean, truth(i, i)) << i;
}

TEST(CompressedBias, ScalarCases) {
  const SymMatrix two(Matrix::Constant(1, 1, 2.0));
  EXPECT_EQ(compressed_bias(two, scalar_noise(0.0))(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(compressed_bias(two, scalar_noise(0.2))(0, 0), 0.1);
}

TEST(CompressedBias, MatchesObservedBias) {
  // Fixed compression, fresh beta derivative ensembles: the mean excess of the
  // compressed estimate over its converged value is what compressed_bias predicts.
  const ToyConfig c;
  const GaussianProducts exact = gaussian_toy_products(c.theta_star, c.grid, false);
  const ToyEnsembles a = toy_ensembles(c, 3, 100, 4242);
  GaussianProducts alpha = gaussian_derivative_products(a.derivatives, detail::all_indices(100), false);
  alpha.mu = exact.mu;
  alpha.precision = exact.precision;
  const GaussianCompression map = build_compression(alpha);
  const SymMatrix sigma = compressed_covariance(map, exact);
  const Matrix converged = compressed_fisher(compressed_mean_derivs(map, exact), sigma).matrix.matrix();
  std::vector<std::vector<double>> excess(3), predicted(3);
  const std::size_t n = 20;
  for (std::uint64_t t = 0; t < 400; ++t) {
    const ToyEnsembles b = toy_ensembles(c, 3, n, 7000 + t);
    const IndexSet all = detail::all_indices(n);
    const GaussianProducts beta = gaussian_derivative_products(b.derivatives, all, false);
    const Matrix f = compressed_fisher(compressed_mean_derivs(map, beta), sigma).matrix.matrix();
    const SymMatrix bias = compressed_bias(sigma, derivative_mean_cov(compress_ensemble(b.derivatives, map), all));
    for (Eigen::Index i = 0; i < 3; ++i) {
      excess[static_cast<std::size_t>(i)].push_back(f(i, i) - converged(i, i));
      predicted[static_cast<std::size_t>(i)].push_back(bias(i, i));
    }
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const auto e = moments(excess[i]);
    const auto p = moments(predicted[i]);
    EXPECT_GT(p.mean, 0.0);
    EXPECT_LT(std::abs(e.mean - p.mean), 5.0 * std::hypot(e.se, p.se)) << i;
  }
}
