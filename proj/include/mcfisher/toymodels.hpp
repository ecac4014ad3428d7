#pragma once

// Toy models with known Fisher information: mean mu(x) = alpha + beta x +
// gamma sqrt(x) on a grid, with either Gaussian noise of variance 2 mu^2
// (independent points) or Poisson counts of rate mu.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mcfisher/ensembles.hpp"
#include "mcfisher/fisher.hpp"
#include "mcfisher/gaussian_fisher.hpp"
#include "mcfisher/linalg.hpp"
#include "mcfisher/poisson_fisher.hpp"
#include "mcfisher/random.hpp"

namespace mcfisher {

enum class ToyModel { gaussian, poisson };

inline const char* to_string(ToyModel m) { return m == ToyModel::gaussian ? "gaussian" : "poisson"; }

inline ToyModel toy_model_from_string(const std::string& s) {
  if (s == "gaussian") return ToyModel::gaussian;
  if (s == "poisson") return ToyModel::poisson;
  throw validation_error("unknown toy model '" + s + "' (expected gaussian or poisson)");
}

struct Grid {
  std::size_t points = 100;
  double x_min = 1e-4;
  double x_max = 1.0;
  bool log_spacing = true;

  void validate() const {
    if (points < 1) throw validation_error("grid needs at least one point");
    if (!(x_min > 0.0)) throw validation_error("grid minimum must be positive");
    if (!(x_max >= x_min)) throw validation_error("grid maximum below minimum");
  }

  /// Both endpoints included.
  Vector values() const {
    validate();
    Vector x(static_cast<Eigen::Index>(points));
    if (points == 1) {
      x(0) = x_min;
      return x;
    }
    const double last = static_cast<double>(points - 1);
    for (std::size_t k = 0; k < points; ++k) {
      const double f = static_cast<double>(k) / last;
      x(static_cast<Eigen::Index>(k)) =
          log_spacing ? std::exp(std::log(x_min) + f * (std::log(x_max) - std::log(x_min)))
                      : x_min + f * (x_max - x_min);
    }
    x(0) = x_min;
    x(static_cast<Eigen::Index>(points - 1)) = x_max;
    return x;
  }

  friend bool operator==(const Grid&, const Grid&) = default;
};

inline const std::vector<std::string>& toy_parameter_names() {
  static const std::vector<std::string> names{"alpha", "beta", "gamma"};
  return names;
}

struct ToyConfig {
  ToyModel model = ToyModel::gaussian;
  std::vector<double> theta_star{1.0, 1.0, 1.0};
  Grid grid;
  std::vector<double> steps{0.1, 0.1, 0.1};
  bool seed_matched = true;
  std::size_t n_cov = 5000;
  std::size_t n_deriv = 100;
  double split_fraction = 0.9;

  static ToyConfig gaussian_default() { return {}; }

  static ToyConfig poisson_default() {
    ToyConfig c;
    c.model = ToyModel::poisson;
    c.steps = {0.05, 0.05, 0.05};
    c.seed_matched = false;
    c.n_cov = 1000;
    c.n_deriv = 1000;
    c.split_fraction = 0.5;
    return c;
  }

  static ToyConfig defaults(ToyModel m) { return m == ToyModel::gaussian ? gaussian_default() : poisson_default(); }

  void validate() const {
    grid.validate();
    if (theta_star.size() != 3) throw validation_error("toy model has exactly 3 parameters");
    if (steps.size() != 3) throw validation_error("toy model needs 3 finite-difference steps");
    for (double s : steps) {
      if (!(s > 0.0)) throw validation_error("finite-difference steps must be positive");
    }
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw validation_error("split fraction must lie in (0, 1)");
  }

  friend bool operator==(const ToyConfig&, const ToyConfig&) = default;
};

inline Vector toy_mean(const std::vector<double>& theta, const Vector& x) {
  if (theta.size() != 3) throw validation_error("toy_mean expects theta = (alpha, beta, gamma)");
  return (theta[0] + theta[1] * x.array() + theta[2] * x.array().sqrt()).matrix();
}

/// Rows: d mu / d alpha = 1, d mu / d beta = x, d mu / d gamma = sqrt(x).
inline Matrix toy_mean_derivs(const Vector& x) {
  Matrix m(3, x.size());
  m.row(0).setOnes();
  m.row(1) = x.transpose();
  m.row(2) = x.array().sqrt().matrix().transpose();
  return m;
}

namespace detail {

inline void require_positive_mean(const Vector& mu, const char* what) {
  for (Eigen::Index k = 0; k < mu.size(); ++k) {
    if (!(mu(k) > 0.0)) {
      throw validation_error(std::string(what) + " at grid point " + std::to_string(k) + ": mean " +
                             format_double(mu(k)) + " is not positive");
    }
  }
}

inline DataEnsemble toy_ensemble_shell(const std::vector<double>& theta, std::size_t n, Eigen::Index d) {
  if (n < 1) throw validation_error("toy simulation needs n >= 1");
  DataEnsemble e;
  e.data.resize(static_cast<Eigen::Index>(n), d);
  e.theta = theta;
  e.seed_ids.resize(n);
  for (std::size_t r = 0; r < n; ++r) e.seed_ids[r] = static_cast<std::int64_t>(r);
  return e;
}

}  // namespace detail

/// Realization r at grid point k draws from stream k, counter r of the seed's
/// generator, so two calls with the same seed share every underlying variate.
inline DataEnsemble gaussian_toy_simulate(const ToyConfig& config, const std::vector<double>& theta, std::size_t n,
                                          std::uint64_t seed) {
  const Vector mu = toy_mean(theta, config.grid.values());
  for (Eigen::Index k = 0; k < mu.size(); ++k) {
    if (mu(k) == 0.0) throw validation_error("zero mean at grid point " + std::to_string(k) + " gives zero variance");
  }
  DataEnsemble e = detail::toy_ensemble_shell(theta, n, mu.size());
  const CounterRng rng(seed);
  for (std::size_t r = 0; r < n; ++r) {
    for (Eigen::Index k = 0; k < mu.size(); ++k) {
      const double z = rng.normal(static_cast<std::uint64_t>(k), r);
      e.data(static_cast<Eigen::Index>(r), k) = mu(k) + std::sqrt(2.0) * std::abs(mu(k)) * z;
    }
  }
  e.source = "gaussian toy";
  return e;
}

inline DataEnsemble poisson_toy_simulate(const ToyConfig& config, const std::vector<double>& theta, std::size_t n,
                                         std::uint64_t seed) {
  const Vector lambda = toy_mean(theta, config.grid.values());
  detail::require_positive_mean(lambda, "Poisson rate");
  DataEnsemble e = detail::toy_ensemble_shell(theta, n, lambda.size());
  const CounterRng rng(seed);
  std::vector<PoissonSampler> samplers;
  for (Eigen::Index k = 0; k < lambda.size(); ++k) samplers.emplace_back(lambda(k));
  for (std::size_t r = 0; r < n; ++r) {
    for (Eigen::Index k = 0; k < lambda.size(); ++k) {
      e.data(static_cast<Eigen::Index>(r), k) =
          static_cast<double>(samplers[static_cast<std::size_t>(k)](rng.uniform(static_cast<std::uint64_t>(k), r)));
    }
  }
  e.source = "poisson toy";
  return e;
}

inline DataEnsemble toy_simulate(const ToyConfig& config, const std::vector<double>& theta, std::size_t n,
                                 std::uint64_t seed) {
  return config.model == ToyModel::gaussian ? gaussian_toy_simulate(config, theta, n, seed)
                                            : poisson_toy_simulate(config, theta, n, seed);
}

/// Role tags for derive_seed.
inline constexpr std::uint64_t kFiducialRole = 0;
inline constexpr std::uint64_t kMatchedRole = 1;
inline constexpr std::uint64_t kUnmatchedRoleBase = 16;

struct ToyEnsembles {
  DataEnsemble fiducial;
  DerivativeEnsemble derivatives;
};

/// Fiducial ensemble of n_fid realizations and +/- ensembles of n_deriv. With
/// seed matching every +/- ensemble of every parameter reuses one generator,
/// so realization r sees the same variates throughout; without it each
/// ensemble has its own.
inline ToyEnsembles toy_ensembles(const ToyConfig& config, std::size_t n_fid, std::size_t n_deriv,
                                  std::uint64_t seed) {
  config.validate();
  ToyEnsembles out;
  out.fiducial = toy_simulate(config, config.theta_star, n_fid, derive_seed(seed, kFiducialRole));
  auto& dens = out.derivatives;
  dens.param_names = toy_parameter_names();
  dens.steps = config.steps;
  dens.paired = config.seed_matched;
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<double> plus = config.theta_star;
    std::vector<double> minus = config.theta_star;
    plus[i] += config.steps[i];
    minus[i] -= config.steps[i];
    const std::uint64_t s_plus =
        config.seed_matched ? derive_seed(seed, kMatchedRole) : derive_seed(seed, kUnmatchedRoleBase + 2 * i);
    const std::uint64_t s_minus =
        config.seed_matched ? derive_seed(seed, kMatchedRole) : derive_seed(seed, kUnmatchedRoleBase + 2 * i + 1);
    dens.plus.push_back(toy_simulate(config, plus, n_deriv, s_plus));
    dens.minus.push_back(toy_simulate(config, minus, n_deriv, s_minus));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Analytic oracles.

/// F_ij = sum_x [mu_i mu_j / (2 mu^2) + 2 mu_i mu_j / mu^2]; the second
/// (covariance-derivative) part is dropped when include_cov_term is false,
/// which is the Fisher information the covariance-independent estimators target.
inline FisherMatrix gaussian_toy_analytic_fisher(const std::vector<double>& theta, const Grid& grid,
                                                 bool include_cov_term = true) {
  const Vector x = grid.values();
  const Vector mu = toy_mean(theta, x);
  detail::require_positive_mean(mu, "Gaussian toy");
  const Matrix dm = toy_mean_derivs(x);
  const double per_point = include_cov_term ? 0.5 + 2.0 : 0.5;
  const Vector w = (per_point / mu.array().square()).matrix();
  FisherMatrix f;
  f.matrix = SymMatrix(dm * w.asDiagonal() * dm.transpose());
  f.kind = FisherKind::analytic;
  return f;
}

/// F_ij = sum_x lambda_i lambda_j / lambda.
inline FisherMatrix poisson_toy_analytic_fisher(const std::vector<double>& theta, const Grid& grid) {
  const Vector x = grid.values();
  const Vector lambda = toy_mean(theta, x);
  detail::require_positive_mean(lambda, "Poisson rate");
  const Matrix dm = toy_mean_derivs(x);
  FisherMatrix f;
  f.matrix = SymMatrix(dm * lambda.cwiseInverse().asDiagonal() * dm.transpose());
  f.kind = FisherKind::analytic;
  return f;
}

inline FisherMatrix toy_analytic_fisher(const ToyConfig& config, bool include_cov_term = false) {
  return config.model == ToyModel::gaussian
             ? gaussian_toy_analytic_fisher(config.theta_star, config.grid, include_cov_term)
             : poisson_toy_analytic_fisher(config.theta_star, config.grid);
}

/// Exact products: mean, precision 1/(2 mu^2), mean derivatives and, when
/// requested, C_{,i} = diag(4 mu mu_i).
inline GaussianProducts gaussian_toy_products(const std::vector<double>& theta, const Grid& grid,
                                              bool cov_derivs) {
  const Vector x = grid.values();
  const Vector mu = toy_mean(theta, x);
  detail::require_positive_mean(mu, "Gaussian toy");
  GaussianProducts prod;
  prod.mu = mu;
  prod.covariance = SymMatrix::diagonal((2.0 * mu.array().square()).matrix());
  prod.precision = SymMatrix::diagonal((0.5 / mu.array().square()).matrix());
  prod.mu_derivs = toy_mean_derivs(x);
  if (cov_derivs) {
    std::vector<SymMatrix> cds;
    for (Eigen::Index i = 0; i < 3; ++i) {
      cds.push_back(SymMatrix::diagonal((4.0 * mu.array() * prod.mu_derivs.row(i).transpose().array()).matrix()));
    }
    prod.cov_derivs = std::move(cds);
  }
  return prod;
}

/// Exact products: rate, variance equal to the rate, d ln(lambda) = lambda_i / lambda.
inline PoissonProducts poisson_toy_products(const std::vector<double>& theta, const Grid& grid) {
  const Vector x = grid.values();
  const Vector lambda = toy_mean(theta, x);
  detail::require_positive_mean(lambda, "Poisson rate");
  PoissonProducts prod;
  prod.lambda_hat = lambda;
  prod.var_hat = lambda;
  prod.log_lambda_derivs = toy_mean_derivs(x) * lambda.cwiseInverse().asDiagonal();
  return prod;
}

}  // namespace mcfisher
