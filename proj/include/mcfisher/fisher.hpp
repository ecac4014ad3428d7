#pragma once

// Fisher matrix value type and the pieces of the compressed estimator that do
// not depend on the likelihood: evaluating a compression over ensembles and
// turning compressed-statistic moments into a Fisher matrix and its noise bias.

#include <cstddef>
#include <string>
#include <vector>

#include "mcfisher/ensembles.hpp"
#include "mcfisher/linalg.hpp"

namespace mcfisher {

enum class FisherKind { analytic, standard, compressed, combined };

inline const char* to_string(FisherKind kind) {
  switch (kind) {
    case FisherKind::analytic: return "analytic";
    case FisherKind::standard: return "standard";
    case FisherKind::compressed: return "compressed";
    case FisherKind::combined: return "combined";
  }
  return "unknown";
}

inline FisherKind fisher_kind_from_string(const std::string& s) {
  if (s == "analytic") return FisherKind::analytic;
  if (s == "standard") return FisherKind::standard;
  if (s == "compressed") return FisherKind::compressed;
  if (s == "combined") return FisherKind::combined;
  throw validation_error("unknown Fisher kind '" + s + "'");
}

struct FisherMatrix {
  SymMatrix matrix;
  FisherKind kind = FisherKind::standard;
  std::size_t n_used = 0;           // realizations behind the estimate
  bool floored = false;             // an eigenvalue floor was hit on the way
  std::vector<std::string> notes;

  Eigen::Index p() const { return matrix.dim(); }

  friend bool operator==(const FisherMatrix&, const FisherMatrix&) = default;
};

/// Applies a compression (anything with `RowMatrix evaluate_rows(const
/// RowMatrix&) const`) to every plus/minus ensemble, giving the compressed
/// statistics' own derivative ensemble.
template <typename Compression>
DerivativeEnsemble compress_ensemble(const DerivativeEnsemble& dens, const Compression& map) {
  DerivativeEnsemble out;
  out.param_names = dens.param_names;
  out.steps = dens.steps;
  out.paired = dens.paired;
  auto apply = [&](const DataEnsemble& e) {
    DataEnsemble t;
    t.data = map.evaluate_rows(e.data);
    t.seed_ids = e.seed_ids;
    t.theta = e.theta;
    t.source = e.source;
    return t;
  };
  for (const auto& e : dens.plus) out.plus.push_back(apply(e));
  for (const auto& e : dens.minus) out.minus.push_back(apply(e));
  return out;
}

/// F_ij = mu^t_{a,i} Sigma^-1_ab mu^t_{b,j}. `mean_derivs(a, i)` is the
/// derivative of the mean of statistic a with respect to parameter i.
inline FisherMatrix compressed_fisher(const Matrix& mean_derivs, const SymMatrix& cov) {
  if (mean_derivs.rows() != cov.dim()) {
    throw validation_error("compressed_fisher: mean derivatives have " + std::to_string(mean_derivs.rows()) +
                           " statistics but the covariance is " + std::to_string(cov.dim()) + "-dimensional");
  }
  const PsdResult inv = floored_inverse(cov);
  FisherMatrix f;
  f.matrix = SymMatrix(mean_derivs.transpose() * inv.matrix.matrix() * mean_derivs);
  f.kind = FisherKind::compressed;
  f.floored = inv.floored;
  if (inv.floored) f.notes.push_back("compressed covariance floored before inversion");
  return f;
}

/// Noise bias of the compressed estimator, B_ij = Sigma^-1_ab Cov[mu^t_{a,i}, mu^t_{b,j}],
/// with the covariance blocks taken from derivative_mean_cov of the
/// compressed statistics.
inline SymMatrix compressed_bias(const SymMatrix& cov, const DerivativeNoise& noise) {
  const auto np = static_cast<std::size_t>(noise.mu_derivs.rows());
  if (noise.cov_of_mean.size() != np * np) throw validation_error("compressed_bias: missing noise estimate");
  if (noise.mu_derivs.cols() != cov.dim()) {
    throw validation_error("compressed_bias: noise and covariance dimensions differ");
  }
  const Matrix inv = floored_inverse(cov).matrix.matrix();
  Matrix b(static_cast<Eigen::Index>(np), static_cast<Eigen::Index>(np));
  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t j = 0; j < np; ++j) {
      b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = inv.cwiseProduct(noise.block(i, j)).sum();
    }
  }
  return SymMatrix(b);
}

/// The same contraction for the standard estimator's derivative-noise term:
/// B_ij = C^-1_ab Cov[mu_{a,i}, mu_{b,j}].
inline Matrix contract_noise(const SymMatrix& precision, const DerivativeNoise& noise) {
  const auto np = static_cast<std::size_t>(noise.mu_derivs.rows());
  if (noise.cov_of_mean.size() != np * np) throw validation_error("missing derivative noise estimate");
  if (noise.mu_derivs.cols() != precision.dim()) {
    throw validation_error("derivative noise and precision dimensions differ");
  }
  Matrix b(static_cast<Eigen::Index>(np), static_cast<Eigen::Index>(np));
  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t j = 0; j < np; ++j) {
      b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          precision.matrix().cwiseProduct(noise.block(i, j)).sum();
    }
  }
  return b;
}

}  // namespace mcfisher
