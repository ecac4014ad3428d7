#pragma once

// Gaussian-likelihood Fisher estimation: the standard plug-in estimator with
// its noise bias, and the alpha/beta compressed estimator.
//
// Two modes. Covariance-independent (no cov_derivs): only the mean derivatives
// carry information and the compression is linear. Covariance-dependent: the
// trace terms in the covariance derivatives are included everywhere.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mcfisher/ensembles.hpp"
#include "mcfisher/fisher.hpp"
#include "mcfisher/linalg.hpp"

namespace mcfisher {

struct GaussianProducts {
  Vector mu;                                   // d
  SymMatrix precision;                         // d x d, Hartlap-corrected when estimated
  std::optional<SymMatrix> covariance;         // d x d, when estimated from samples
  Matrix mu_derivs;                            // p x d
  std::optional<std::vector<SymMatrix>> cov_derivs;  // p of d x d
  std::size_t n_cov = 0;
  std::size_t n_deriv = 0;
  bool precision_floored = false;

  Eigen::Index d() const { return mu_derivs.cols(); }
  Eigen::Index p() const { return mu_derivs.rows(); }
  bool covariance_dependent() const { return cov_derivs.has_value(); }

  void check() const {
    if (precision.dim() != d()) {
      throw validation_error("Gaussian products: precision is " + std::to_string(precision.dim()) +
                             "-dimensional but mean derivatives have " + std::to_string(d()) + " entries");
    }
    if (mu.size() != 0 && mu.size() != d()) throw validation_error("Gaussian products: mean dimension mismatch");
    if (cov_derivs) {
      if (static_cast<Eigen::Index>(cov_derivs->size()) != p()) {
        throw validation_error("Gaussian products: need one covariance derivative per parameter");
      }
      for (const auto& c : *cov_derivs) {
        if (c.dim() != d()) throw validation_error("Gaussian products: covariance derivative dimension mismatch");
      }
    }
  }
};

struct GaussianOptions {
  bool cov_derivs = false;  // include covariance-derivative terms
  bool hartlap = true;      // debias every precision estimated from samples
};

/// Beta-side products: only the mean (and covariance) derivatives are
/// estimated, plus the data covariance when a fiducial subset is given. The
/// precision is left as the identity and is not meant to be used.
inline GaussianProducts gaussian_derivative_products(const DerivativeEnsemble& dens, const IndexSet& deriv_indices,
                                                     bool cov_derivs, const DataEnsemble* fiducial = nullptr,
                                                     const IndexSet* fid_indices = nullptr) {
  if (deriv_indices.size() < 2) {
    throw validation_error("insufficient realizations: need at least 2 derivative simulations");
  }
  GaussianProducts prod;
  prod.n_deriv = deriv_indices.size();
  prod.mu_derivs = mean_derivatives(dens, deriv_indices);
  prod.precision = SymMatrix::identity(dens.d());
  if (cov_derivs) {
    std::vector<SymMatrix> cds;
    for (std::size_t i = 0; i < dens.p(); ++i) {
      const Matrix cp = sample_covariance(dens.plus[i].data, deriv_indices).matrix();
      const Matrix cm = sample_covariance(dens.minus[i].data, deriv_indices).matrix();
      cds.emplace_back((cp - cm) / (2.0 * dens.steps[i]));
    }
    prod.cov_derivs = std::move(cds);
  }
  if (fiducial != nullptr && fid_indices != nullptr) {
    detail::check_indices(*fid_indices, fiducial->n(), "fiducial ensemble");
    prod.mu = sample_mean(fiducial->data, *fid_indices);
    prod.covariance = sample_covariance(fiducial->data, *fid_indices);
    prod.n_cov = fid_indices->size();
  }
  return prod;
}

/// Estimates the products from a fiducial (covariance) subset and a
/// derivative subset of the simulations.
inline GaussianProducts gaussian_products(const DataEnsemble& fiducial, const IndexSet& fid_indices,
                                          const DerivativeEnsemble& dens, const IndexSet& deriv_indices,
                                          const GaussianOptions& opts = {}) {
  if (fiducial.d() != dens.d()) {
    throw validation_error("fiducial and derivative ensembles differ in data dimension");
  }
  GaussianProducts prod;
  const auto d = static_cast<std::size_t>(fiducial.d());
  prod.n_cov = fid_indices.size();
  prod.n_deriv = deriv_indices.size();
  detail::check_indices(fid_indices, fiducial.n(), "fiducial ensemble");
  prod.mu = sample_mean(fiducial.data, fid_indices);
  const SymMatrix cov = sample_covariance(fiducial.data, fid_indices);
  double factor = 1.0;
  if (opts.hartlap) {
    if (prod.n_cov <= d + 2) {
      throw validation_error("Hartlap factor nonpositive: " + std::to_string(prod.n_cov) +
                             " covariance realizations for data dimension " + std::to_string(d) +
                             " (need more than " + std::to_string(d + 2) + ")");
    }
    factor = hartlap_factor(prod.n_cov, d);
  }
  const PsdResult inv = floored_inverse(cov);
  prod.precision = SymMatrix(factor * inv.matrix.matrix());
  prod.precision_floored = inv.floored;
  prod.covariance = cov;
  const GaussianProducts derivs = gaussian_derivative_products(dens, deriv_indices, opts.cov_derivs);
  prod.mu_derivs = derivs.mu_derivs;
  prod.cov_derivs = derivs.cov_derivs;
  return prod;
}

/// F_ij = mu_{,i} C^-1 mu_{,j} + 1/2 tr[C^-1 C_{,i} C^-1 C_{,j}]; the trace
/// term only in covariance-dependent mode.
inline FisherMatrix standard_fisher(const GaussianProducts& prod) {
  prod.check();
  const Matrix& m = prod.mu_derivs;
  const Matrix& pr = prod.precision.matrix();
  Matrix f = m * pr * m.transpose();
  if (prod.cov_derivs) {
    const auto np = static_cast<std::size_t>(prod.p());
    std::vector<Matrix> pc;
    for (const auto& c : *prod.cov_derivs) pc.push_back(pr * c.matrix());
    for (std::size_t i = 0; i < np; ++i) {
      for (std::size_t j = 0; j < np; ++j) {
        // tr(A B) = sum(A .* B^T)
        f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +=
            0.5 * pc[i].cwiseProduct(pc[j].transpose()).sum();
      }
    }
  }
  FisherMatrix out;
  out.matrix = SymMatrix(f);
  out.kind = FisherKind::standard;
  out.n_used = prod.n_deriv;
  out.floored = prod.precision_floored;
  if (prod.precision_floored) out.notes.push_back("data covariance floored before inversion");
  return out;
}

/// Contracted covariance-derivative noise,
/// 1/2 C^-1_ab C^-1_cd Cov[dC_{bc,i}, dC_{da,j}], as a p x p matrix.
///
/// Paired ensembles: each realization contributes a rank-two term to the
/// covariance difference, and the spread of those terms gives the noise of
/// their mean. Unpaired ensembles: Gaussian (Wishart) propagation of the two
/// sub-ensemble covariances, zero between parameters.
inline Matrix covariance_derivative_noise(const DerivativeEnsemble& dens, const IndexSet& indices,
                                          const SymMatrix& precision) {
  const std::size_t np = dens.p();
  const Matrix& pr = precision.matrix();
  const auto n = static_cast<double>(indices.size());
  if (indices.size() < 3) throw validation_error("insufficient realizations for covariance-derivative noise");
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(np), static_cast<Eigen::Index>(np));

  auto centered = [&](const DataEnsemble& e) {
    Matrix u = detail::gather_rows(e.data, indices);
    const Vector mean = sample_mean(e.data, indices);
    u.rowwise() -= mean.transpose();
    return u;
  };

  if (!dens.paired) {
    for (std::size_t i = 0; i < np; ++i) {
      double acc = 0.0;
      for (const DataEnsemble* e : {&dens.plus[i], &dens.minus[i]}) {
        const Matrix pc = pr * sample_covariance(e->data, indices).matrix();
        acc += (pc.cwiseProduct(pc.transpose()).sum() + pc.trace() * pc.trace()) / (n - 1.0);
      }
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) =
          0.5 * acc / (4.0 * dens.steps[i] * dens.steps[i]);
    }
    return out;
  }

  std::vector<Matrix> up, um, pup, pum, cderiv;
  std::vector<double> scale;
  for (std::size_t i = 0; i < np; ++i) {
    up.push_back(centered(dens.plus[i]));
    um.push_back(centered(dens.minus[i]));
    pup.push_back(up.back() * pr);
    pum.push_back(um.back() * pr);
    scale.push_back(n / ((n - 1.0) * 2.0 * dens.steps[i]));
    cderiv.push_back((up.back().transpose() * up.back() - um.back().transpose() * um.back()) /
                     ((n - 1.0) * 2.0 * dens.steps[i]));
  }
  const bool aligned = detail::aligned_across_parameters(dens);
  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t j = 0; j < np; ++j) {
      if (i != j && !aligned) continue;
      const Vector pp = pup[i].cwiseProduct(up[j]).rowwise().sum();
      const Vector pm = pup[i].cwiseProduct(um[j]).rowwise().sum();
      const Vector mp = pum[i].cwiseProduct(up[j]).rowwise().sum();
      const Vector mm = pum[i].cwiseProduct(um[j]).rowwise().sum();
      const double per_realization = scale[i] * scale[j] *
          (pp.squaredNorm() - pm.squaredNorm() - mp.squaredNorm() + mm.squaredNorm());
      const Matrix a = pr * cderiv[i];
      const Matrix b = pr * cderiv[j];
      const double of_mean = a.cwiseProduct(b.transpose()).sum();
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          0.5 * (per_realization - n * of_mean) / (n * (n - 1.0));
    }
  }
  return out;
}

/// Precision-noise term for a Hartlap-corrected inverse of a covariance from
/// `n_cov` Gaussian realizations, using the exact inverse-Wishart second
/// moments. Zero when there are no covariance derivatives.
inline Matrix precision_noise(const GaussianProducts& prod, std::size_t n_cov) {
  const auto np = prod.p();
  Matrix out = Matrix::Zero(np, np);
  if (!prod.cov_derivs) return out;
  const double nu = static_cast<double>(n_cov) - 1.0;
  const double d = static_cast<double>(prod.d());
  if (nu - d - 3.0 <= 0.0) {
    throw validation_error("precision noise needs more than d + 4 covariance realizations");
  }
  const double k = nu - d - 1.0;
  const double denom = (nu - d) * (nu - d - 3.0);
  std::vector<Matrix> pc;
  for (const auto& c : *prod.cov_derivs) pc.push_back(prod.precision.matrix() * c.matrix());
  for (Eigen::Index i = 0; i < np; ++i) {
    for (Eigen::Index j = 0; j < np; ++j) {
      const double tr_prod = pc[i].cwiseProduct(pc[j].transpose()).sum();
      out(i, j) = 0.5 * ((2.0 + k) * tr_prod + k * pc[i].trace() * pc[j].trace()) / denom;
    }
  }
  return out;
}

/// Noise bias of the standard estimator: derivative-of-mean noise, plus the
/// covariance-derivative and precision terms when those inputs are supplied.
inline SymMatrix standard_bias(const GaussianProducts& prod, const DerivativeNoise& deriv_noise,
                               const std::optional<Matrix>& cov_deriv_noise = std::nullopt,
                               const std::optional<std::size_t>& precision_samples = std::nullopt) {
  prod.check();
  if (deriv_noise.mu_derivs.rows() != prod.p()) throw validation_error("standard_bias: missing derivative noise");
  Matrix b = contract_noise(prod.precision, deriv_noise);
  if (cov_deriv_noise) {
    if (cov_deriv_noise->rows() != prod.p() || cov_deriv_noise->cols() != prod.p()) {
      throw validation_error("standard_bias: covariance-derivative noise has the wrong shape");
    }
    b += *cov_deriv_noise;
  }
  if (precision_samples) b += precision_noise(prod, *precision_samples);
  return SymMatrix(b);
}

// ---------------------------------------------------------------------------
// Compression.

/// Frozen score compression built from alpha-subset products:
/// t_i = mu_{,i} C^-1 (d - mu) + 1/2 (d - mu) C^-1 C_{,i} C^-1 (d - mu) - 1/2 tr[C^-1 C_{,i}],
/// the last two terms only in covariance-dependent mode.
struct GaussianCompression {
  std::vector<std::string> param_names;
  Vector mu;
  SymMatrix precision;
  Matrix mu_derivs;                           // p x d
  std::optional<std::vector<SymMatrix>> cov_derivs;
  Matrix weights;                             // p x d, mu_derivs * precision
  std::vector<Matrix> quad;                   // C^-1 C_{,i} C^-1
  Vector offsets;                             // 1/2 tr[C^-1 C_{,i}]
  IndexSet alpha_indices;                     // provenance
  bool floored = false;

  Eigen::Index p() const { return mu_derivs.rows(); }
  Eigen::Index d() const { return mu_derivs.cols(); }

  Vector evaluate(const Vector& data) const {
    if (data.size() != d()) {
      throw validation_error("compression expects a data vector of length " + std::to_string(d()) + ", got " +
                             std::to_string(data.size()));
    }
    const Vector r = data - mu;
    Vector t = weights * r;
    if (cov_derivs) {
      for (Eigen::Index i = 0; i < p(); ++i) t(i) += 0.5 * r.dot(quad[static_cast<std::size_t>(i)] * r) - offsets(i);
    }
    return t;
  }

  RowMatrix evaluate_rows(const RowMatrix& rows) const {
    if (rows.cols() != d()) throw validation_error("compression: data dimension mismatch");
    RowMatrix t = rows * weights.transpose();
    t.rowwise() -= (weights * mu).transpose();
    if (cov_derivs) {
      Matrix r = rows;
      r.rowwise() -= mu.transpose();
      for (Eigen::Index i = 0; i < p(); ++i) {
        const Matrix rq = r * quad[static_cast<std::size_t>(i)];
        t.col(i) += 0.5 * rq.cwiseProduct(r).rowwise().sum() - Vector::Constant(rows.rows(), offsets(i));
      }
    }
    return t;
  }
};

inline GaussianCompression build_compression(const GaussianProducts& alpha,
                                             std::vector<std::string> param_names = {},
                                             IndexSet alpha_indices = {}) {
  alpha.check();
  if (alpha.mu.size() != alpha.d()) throw validation_error("compression needs the alpha-subset mean");
  GaussianCompression map;
  map.param_names = std::move(param_names);
  map.mu = alpha.mu;
  map.precision = alpha.precision;
  map.mu_derivs = alpha.mu_derivs;
  map.cov_derivs = alpha.cov_derivs;
  map.weights = alpha.mu_derivs * alpha.precision.matrix();
  map.offsets = Vector::Zero(alpha.p());
  if (alpha.cov_derivs) {
    for (Eigen::Index i = 0; i < alpha.p(); ++i) {
      const Matrix& c = (*alpha.cov_derivs)[static_cast<std::size_t>(i)].matrix();
      map.quad.push_back(alpha.precision.matrix() * c * alpha.precision.matrix());
      map.offsets(i) = 0.5 * (alpha.precision.matrix() * c).trace();
    }
  }
  map.alpha_indices = std::move(alpha_indices);
  map.floored = alpha.precision_floored;
  return map;
}

/// mu^t_{a,I} = mu^alpha_{,a} C^alpha^-1 mu^beta_{,I} + 1/2 tr[C^beta_{,I} C^alpha^-1 C^alpha_{,a} C^alpha^-1].
/// Row a is the statistic, column I the parameter. Unbiased but in general
/// neither symmetric nor invertible.
inline Matrix compressed_mean_derivs(const GaussianCompression& map, const GaussianProducts& beta) {
  if (beta.d() != map.d() || beta.p() != map.p()) {
    throw validation_error("compressed_mean_derivs: beta products do not match the compression");
  }
  Matrix m = map.weights * beta.mu_derivs.transpose();
  if (map.cov_derivs) {
    if (!beta.cov_derivs) throw validation_error("compressed_mean_derivs: beta products lack covariance derivatives");
    for (Eigen::Index a = 0; a < map.p(); ++a) {
      for (Eigen::Index i = 0; i < map.p(); ++i) {
        m(a, i) += 0.5 * map.quad[static_cast<std::size_t>(a)]
                             .cwiseProduct((*beta.cov_derivs)[static_cast<std::size_t>(i)].matrix())
                             .sum();
      }
    }
  }
  return m;
}

enum class CovarianceForm { alpha_form, beta_form };

/// Covariance of the compressed statistics. alpha_form is the uncompressed
/// Fisher information of the alpha products (the lower-noise choice);
/// beta_form propagates the beta-subset data covariance through the map.
inline SymMatrix compressed_covariance(const GaussianCompression& map, const GaussianProducts& beta,
                                       CovarianceForm form = CovarianceForm::alpha_form) {
  const auto np = map.p();
  Matrix s(np, np);
  if (form == CovarianceForm::alpha_form) {
    s = map.weights * map.mu_derivs.transpose();
    if (map.cov_derivs) {
      for (Eigen::Index a = 0; a < np; ++a) {
        for (Eigen::Index b = 0; b < np; ++b) {
          s(a, b) += 0.5 * map.quad[static_cast<std::size_t>(a)]
                               .cwiseProduct((*map.cov_derivs)[static_cast<std::size_t>(b)].matrix())
                               .sum();
        }
      }
    }
    return SymMatrix(s);
  }
  if (!beta.covariance) throw validation_error("beta-form compressed covariance needs the beta data covariance");
  const Matrix& cb = beta.covariance->matrix();
  if (cb.rows() != map.d()) throw validation_error("compressed_covariance: dimension mismatch");
  s = map.weights * cb * map.weights.transpose();
  if (map.cov_derivs) {
    std::vector<Matrix> qc;
    for (const auto& q : map.quad) qc.push_back(q * cb);
    for (Eigen::Index a = 0; a < np; ++a) {
      for (Eigen::Index b = 0; b < np; ++b) {
        s(a, b) += 0.5 * qc[static_cast<std::size_t>(a)]
                             .cwiseProduct(qc[static_cast<std::size_t>(b)].transpose())
                             .sum();
      }
    }
  }
  return SymMatrix(s);
}

}  // namespace mcfisher
