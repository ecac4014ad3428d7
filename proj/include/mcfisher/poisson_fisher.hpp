#pragma once

// Poisson-likelihood Fisher estimation and score compression.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mcfisher/ensembles.hpp"
#include "mcfisher/fisher.hpp"
#include "mcfisher/linalg.hpp"

namespace mcfisher {

/// Counts must be nonnegative integers.
inline void validate_counts(const DataEnsemble& e) {
  for (Eigen::Index r = 0; r < e.n(); ++r) {
    for (Eigen::Index c = 0; c < e.d(); ++c) {
      const double v = e.data(r, c);
      if (v < 0.0 || v != std::floor(v)) {
        throw validation_error("row " + std::to_string(r + 1) + " column " + std::to_string(c + 1) + e.where() +
                               ": " + detail::format_double(v) + " is not a nonnegative integer count");
      }
    }
  }
}

struct PoissonProducts {
  Vector lambda_hat;         // d, mean counts
  Vector var_hat;            // d, count variances
  Matrix log_lambda_derivs;  // p x d, d ln(lambda) / d theta_i
  std::size_t n_fid = 0;
  std::size_t n_deriv = 0;

  Eigen::Index d() const { return lambda_hat.size(); }
  Eigen::Index p() const { return log_lambda_derivs.rows(); }

  void check() const {
    if (var_hat.size() != d() || log_lambda_derivs.cols() != d()) {
      throw validation_error("Poisson products: rate, variance and derivative lengths differ");
    }
    for (Eigen::Index x = 0; x < d(); ++x) {
      if (!(lambda_hat(x) > 0.0)) {
        throw validation_error("nonpositive rate " + detail::format_double(lambda_hat(x)) + " at grid point " +
                               std::to_string(x));
      }
    }
    if (!log_lambda_derivs.allFinite() || !var_hat.allFinite()) {
      throw validation_error("Poisson products are not finite");
    }
  }
};

namespace detail {

inline Vector positive_rates(const RowMatrix& counts, const IndexSet& indices, const std::string& what) {
  Vector rate = sample_mean(counts, indices);
  for (Eigen::Index x = 0; x < rate.size(); ++x) {
    if (!(rate(x) > 0.0)) {
      throw validation_error("nonpositive rate " + format_double(rate(x)) + " at grid point " +
                             std::to_string(x) + " in " + what);
    }
  }
  return rate;
}

}  // namespace detail

/// Rates and variances from fiducial counts; log-rate derivatives from the
/// central difference of the logarithms of the +/- sub-ensemble mean rates.
inline PoissonProducts poisson_products(const DataEnsemble& fiducial, const IndexSet& fid_indices,
                                        const DerivativeEnsemble& dens, const IndexSet& deriv_indices) {
  if (fiducial.d() != dens.d()) throw validation_error("fiducial and derivative ensembles differ in data dimension");
  detail::check_indices(fid_indices, fiducial.n(), "fiducial ensemble");
  PoissonProducts prod;
  prod.n_fid = fid_indices.size();
  prod.n_deriv = deriv_indices.size();
  prod.lambda_hat = detail::positive_rates(fiducial.data, fid_indices, "fiducial ensemble");
  prod.var_hat = sample_variance(fiducial.data, fid_indices);
  prod.log_lambda_derivs.resize(static_cast<Eigen::Index>(dens.p()), dens.d());
  for (std::size_t i = 0; i < dens.p(); ++i) {
    detail::check_indices(deriv_indices, std::min(dens.plus[i].n(), dens.minus[i].n()), dens.param_names[i]);
    const Vector lp = detail::positive_rates(dens.plus[i].data, deriv_indices, dens.param_names[i] + " plus");
    const Vector lm = detail::positive_rates(dens.minus[i].data, deriv_indices, dens.param_names[i] + " minus");
    prod.log_lambda_derivs.row(static_cast<Eigen::Index>(i)) =
        ((lp.array().log() - lm.array().log()) / (2.0 * dens.steps[i])).matrix().transpose();
  }
  return prod;
}

/// F_ij = sum_x dln(lambda)/dtheta_i dln(lambda)/dtheta_j Var[d(x)].
inline FisherMatrix poisson_standard_fisher(const PoissonProducts& prod) {
  prod.check();
  FisherMatrix f;
  f.matrix = SymMatrix(prod.log_lambda_derivs * prod.var_hat.asDiagonal() * prod.log_lambda_derivs.transpose());
  f.kind = FisherKind::standard;
  f.n_used = prod.n_deriv;
  return f;
}

/// Noise bias of the standard Poisson estimator, sum_x Var[d(x)] Cov[dlnl_i(x), dlnl_j(x)],
/// with the log-derivative noise propagated to first order (d ln l = d l / l).
/// Only the per-point variances enter, so nothing d x d is formed.
inline SymMatrix poisson_standard_bias(const PoissonProducts& prod, const DerivativeEnsemble& dens,
                                       const IndexSet& deriv_indices) {
  prod.check();
  const std::size_t np = dens.p();
  if (static_cast<Eigen::Index>(np) != prod.p()) throw validation_error("Poisson bias: parameter count mismatch");
  if (deriv_indices.size() < 2) throw validation_error("insufficient realizations for derivative noise");
  const auto n = static_cast<double>(deriv_indices.size());
  Matrix b = Matrix::Zero(prod.p(), prod.p());
  if (!dens.paired) {
    for (std::size_t i = 0; i < np; ++i) {
      const double h = 2.0 * dens.steps[i];
      double acc = 0.0;
      for (const DataEnsemble* e : {&dens.plus[i], &dens.minus[i]}) {
        const Vector rate = detail::positive_rates(e->data, deriv_indices, dens.param_names[i]);
        const Vector var = sample_variance(e->data, deriv_indices);
        acc += (prod.var_hat.array() * var.array() / rate.array().square()).sum();
      }
      b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = acc / (n * h * h);
    }
    return SymMatrix(b);
  }
  // Paired: spread of per-realization linearized log-derivative samples.
  std::vector<Matrix> centered;
  for (std::size_t i = 0; i < np; ++i) {
    const Vector lp = detail::positive_rates(dens.plus[i].data, deriv_indices, dens.param_names[i]);
    const Vector lm = detail::positive_rates(dens.minus[i].data, deriv_indices, dens.param_names[i]);
    Matrix s(static_cast<Eigen::Index>(deriv_indices.size()), prod.d());
    for (std::size_t k = 0; k < deriv_indices.size(); ++k) {
      const auto r = static_cast<Eigen::Index>(deriv_indices[k]);
      s.row(static_cast<Eigen::Index>(k)) =
          (dens.plus[i].data.row(r).array() / lp.transpose().array() -
           dens.minus[i].data.row(r).array() / lm.transpose().array()) / (2.0 * dens.steps[i]);
    }
    s.rowwise() -= s.colwise().mean();
    centered.push_back(std::move(s));
  }
  const bool aligned = detail::aligned_across_parameters(dens);
  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t j = 0; j < np; ++j) {
      if (i != j && !aligned) continue;
      const Vector cov_x = centered[i].cwiseProduct(centered[j]).colwise().sum().transpose() / (n - 1.0);
      b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = prod.var_hat.dot(cov_x) / n;
    }
  }
  return SymMatrix(b);
}

/// t_i = sum_x (d(x) - lambda(x)) dln(lambda)/dtheta_i, frozen from alpha products.
struct PoissonCompression {
  Vector lambda;
  Matrix weights;  // p x d
  IndexSet alpha_indices;

  Eigen::Index p() const { return weights.rows(); }
  Eigen::Index d() const { return weights.cols(); }

  Vector evaluate(const Vector& data) const {
    if (data.size() != d()) {
      throw validation_error("compression expects a data vector of length " + std::to_string(d()) + ", got " +
                             std::to_string(data.size()));
    }
    return weights * (data - lambda);
  }

  RowMatrix evaluate_rows(const RowMatrix& rows) const {
    if (rows.cols() != d()) throw validation_error("compression: data dimension mismatch");
    RowMatrix t = rows * weights.transpose();
    t.rowwise() -= (weights * lambda).transpose();
    return t;
  }
};

inline PoissonCompression build_poisson_compression(const PoissonProducts& alpha, IndexSet alpha_indices = {}) {
  alpha.check();
  return {alpha.lambda_hat, alpha.log_lambda_derivs, std::move(alpha_indices)};
}

inline Vector poisson_compression(const PoissonProducts& prod, const Vector& data) {
  return build_poisson_compression(prod).evaluate(data);
}

/// Compressed Fisher from compressed samples: finite-difference mean
/// derivatives, and the Hartlap-corrected sample covariance of the fiducial
/// statistics (dimension p).
struct CompressedSampleFisher {
  FisherMatrix fisher;
  Matrix mean_derivs;   // statistic x parameter
  SymMatrix covariance; // effective covariance, sample covariance / Hartlap factor
};

inline CompressedSampleFisher compressed_fisher_from_samples(const RowMatrix& t_fid,
                                                             const std::vector<RowMatrix>& t_plus,
                                                             const std::vector<RowMatrix>& t_minus,
                                                             const std::vector<double>& steps,
                                                             bool hartlap = true) {
  const auto p = static_cast<std::size_t>(t_fid.cols());
  if (t_plus.size() != steps.size() || t_minus.size() != steps.size()) {
    throw validation_error("compressed samples: need plus and minus samples for every step");
  }
  if (static_cast<std::size_t>(t_fid.rows()) < p + 3) {
    throw validation_error("Σ̂ not estimable: " + std::to_string(t_fid.rows()) +
                           " fiducial compressed samples, need at least " + std::to_string(p + 3));
  }
  CompressedSampleFisher out;
  out.mean_derivs.resize(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(steps.size()));
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (t_plus[i].cols() != t_fid.cols() || t_minus[i].cols() != t_fid.cols()) {
      throw validation_error("compressed samples: statistic counts differ");
    }
    out.mean_derivs.col(static_cast<Eigen::Index>(i)) =
        (sample_mean(t_plus[i]) - sample_mean(t_minus[i])) / (2.0 * steps[i]);
  }
  const SymMatrix cov = sample_covariance(t_fid);
  const double factor = hartlap ? hartlap_factor(static_cast<std::size_t>(t_fid.rows()), p) : 1.0;
  out.covariance = SymMatrix(cov.matrix() / factor);
  out.fisher = compressed_fisher(out.mean_derivs, out.covariance);
  out.fisher.n_used = static_cast<std::size_t>(t_fid.rows());
  return out;
}

}  // namespace mcfisher
