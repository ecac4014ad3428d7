#pragma once

// Dense symmetric-matrix primitives.
//
// Every inversion and square root goes through a symmetric eigendecomposition
// so that one eigenvalue floor (kEigenFloor relative to the largest
// eigenvalue) governs the whole library, and the caller always learns whether
// the floor was hit.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mcfisher/error.hpp"

namespace mcfisher {

using Matrix = Eigen::MatrixXd;
/// Storage for ensembles: one realization per contiguous row.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using IndexSet = std::vector<std::size_t>;

inline constexpr double kEigenFloor = 1e-12;

/// Square symmetric matrix. Construction symmetrizes as (M + M^T) / 2, so
/// entry (i, j) equals entry (j, i) exactly.
class SymMatrix {
 public:
  SymMatrix() = default;

  explicit SymMatrix(const Matrix& m) {
    if (m.rows() != m.cols()) {
      throw validation_error("SymMatrix requires a square matrix, got " +
                             std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
    if (m.rows() < 1) throw validation_error("SymMatrix requires dim >= 1");
    m_ = 0.5 * (m + m.transpose());
  }

  static SymMatrix identity(Eigen::Index dim) { return SymMatrix(Matrix::Identity(dim, dim)); }
  static SymMatrix zero(Eigen::Index dim) { return SymMatrix(Matrix::Zero(dim, dim)); }
  static SymMatrix diagonal(const Vector& diag) { return SymMatrix(Matrix(diag.asDiagonal())); }

  Eigen::Index dim() const { return m_.rows(); }
  const Matrix& matrix() const { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

  friend bool operator==(const SymMatrix& a, const SymMatrix& b) {
    return a.m_.rows() == b.m_.rows() && a.m_.cols() == b.m_.cols() && a.m_ == b.m_;
  }

 private:
  Matrix m_;
};

/// Result of an eigenvalue-floored matrix function.
struct PsdResult {
  SymMatrix matrix;
  double min_eigenvalue = 0.0;  // of the input, before flooring
  bool floored = false;
};

struct EigenSystem {
  Vector values;   // ascending
  Matrix vectors;  // columns
};

inline EigenSystem eigen_system(const SymMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m.matrix());
  if (solver.info() != Eigen::Success) throw numeric_error("eigendecomposition failed");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

inline std::string format_values(const Vector& v) {
  std::ostringstream out;
  out.precision(6);
  out << "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) out << (i ? ", " : "") << v(i);
  out << "]";
  return out.str();
}

namespace detail {

// Applies f to the eigenvalues after clamping everything below the floor.
template <typename F>
PsdResult floored_function(const SymMatrix& m, F&& f, const char* what) {
  const EigenSystem es = eigen_system(m);
  const double max_ev = es.values.maxCoeff();
  if (!(max_ev > 0.0)) {
    throw numeric_error(std::string("matrix not positive semidefinite (") + what +
                        "): eigenvalues " + format_values(es.values));
  }
  const double floor = kEigenFloor * max_ev;
  bool floored = false;
  Vector mapped(es.values.size());
  for (Eigen::Index i = 0; i < es.values.size(); ++i) {
    double ev = es.values(i);
    if (ev < floor) {
      ev = floor;
      floored = true;
    }
    mapped(i) = f(ev);
  }
  Matrix out = es.vectors * mapped.asDiagonal() * es.vectors.transpose();
  return {SymMatrix(out), es.values.minCoeff(), floored};
}

// Row order that depends only on row contents, so that reductions summed in
// this order are invariant under row permutation. Rows are keyed by a hash of
// their bit patterns; equal keys fall back to a lexicographic comparison.
template <typename Derived>
IndexSet canonical_row_order(const Eigen::MatrixBase<Derived>& rows, const IndexSet& idx) {
  std::vector<std::pair<std::uint64_t, std::size_t>> keyed(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    std::uint64_t h = 0x243F6A8885A308D3ULL;
    const auto r = static_cast<Eigen::Index>(idx[k]);
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
      h = (h ^ std::bit_cast<std::uint64_t>(static_cast<double>(rows(r, c)))) * 0x9E3779B97F4A7C15ULL;
      h ^= h >> 29;
    }
    keyed[k] = {h, idx[k]};
  }
  std::sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
      const double x = rows(static_cast<Eigen::Index>(a.second), c);
      const double y = rows(static_cast<Eigen::Index>(b.second), c);
      if (x < y) return true;
      if (y < x) return false;
    }
    return false;
  });
  IndexSet out(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) out[k] = keyed[k].second;
  return out;
}

inline IndexSet all_indices(Eigen::Index n) {
  IndexSet idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

template <typename Derived>
Matrix gather_rows(const Eigen::MatrixBase<Derived>& rows, const IndexSet& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), rows.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = rows.row(static_cast<Eigen::Index>(idx[k]));
  }
  return out;
}

template <typename Derived>
Vector mean_in_order(const Eigen::MatrixBase<Derived>& rows, const IndexSet& order) {
  Vector sum = Vector::Zero(rows.cols());
  for (std::size_t r : order) sum += rows.row(static_cast<Eigen::Index>(r)).transpose();
  return sum / static_cast<double>(order.size());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Sample statistics. Rows are realizations, columns are data entries. Sums run
// in a content-defined row order, so permuting the rows changes nothing, not
// even the last bit.

template <typename Derived>
Vector sample_mean(const Eigen::MatrixBase<Derived>& rows, const IndexSet& indices) {
  if (indices.empty() || rows.cols() == 0) throw validation_error("empty ensemble");
  return detail::mean_in_order(rows, detail::canonical_row_order(rows, indices));
}

template <typename Derived>
Vector sample_mean(const Eigen::MatrixBase<Derived>& rows) {
  return sample_mean(rows, detail::all_indices(rows.rows()));
}

/// Unbiased (1/(n-1)) sample covariance.
template <typename Derived>
SymMatrix sample_covariance(const Eigen::MatrixBase<Derived>& rows, const IndexSet& indices) {
  if (indices.size() < 2) {
    throw validation_error("insufficient realizations: sample covariance needs at least 2, got " +
                           std::to_string(indices.size()));
  }
  const IndexSet order = detail::canonical_row_order(rows, indices);
  const Vector mean = detail::mean_in_order(rows, order);
  Matrix centered = detail::gather_rows(rows, order);
  centered.rowwise() -= mean.transpose();
  Matrix cov = centered.transpose() * centered;
  cov /= static_cast<double>(indices.size() - 1);
  return SymMatrix(cov);
}

template <typename Derived>
SymMatrix sample_covariance(const Eigen::MatrixBase<Derived>& rows) {
  return sample_covariance(rows, detail::all_indices(rows.rows()));
}

/// Per-column unbiased variance: the diagonal of sample_covariance without the
/// d x d cost.
template <typename Derived>
Vector sample_variance(const Eigen::MatrixBase<Derived>& rows, const IndexSet& indices) {
  if (indices.size() < 2) {
    throw validation_error("insufficient realizations: sample variance needs at least 2, got " +
                           std::to_string(indices.size()));
  }
  const IndexSet order = detail::canonical_row_order(rows, indices);
  const Vector mean = detail::mean_in_order(rows, order);
  Vector var = Vector::Zero(rows.cols());
  for (std::size_t r : order) {
    var += (rows.row(static_cast<Eigen::Index>(r)).transpose() - mean).cwiseAbs2();
  }
  return var / static_cast<double>(indices.size() - 1);
}

// ---------------------------------------------------------------------------
// Inversion.

/// Inverse with the eigenvalue floor applied; `floored` reports clamping.
inline PsdResult floored_inverse(const SymMatrix& m) {
  return detail::floored_function(m, [](double ev) { return 1.0 / ev; }, "inverse");
}

/// Inverse that refuses singular input: any eigenvalue at or below the floor
/// is an error naming those eigenvalues.
inline SymMatrix strict_inverse(const SymMatrix& m, const std::string& what = "matrix") {
  const EigenSystem es = eigen_system(m);
  const double max_ev = es.values.maxCoeff();
  const double floor = kEigenFloor * std::max(max_ev, 0.0);
  std::vector<double> bad;
  for (Eigen::Index i = 0; i < es.values.size(); ++i) {
    if (!(es.values(i) > floor)) bad.push_back(es.values(i));
  }
  if (!bad.empty()) {
    throw numeric_error(what + " is singular: eigenvalues at or below floor " +
                        format_values(Eigen::Map<Vector>(bad.data(), static_cast<Eigen::Index>(bad.size()))) +
                        " of spectrum " + format_values(es.values));
  }
  Matrix inv = es.vectors * es.values.cwiseInverse().asDiagonal() * es.vectors.transpose();
  return SymMatrix(inv);
}

inline double hartlap_factor(std::size_t n_samples, std::size_t dim) {
  return (static_cast<double>(n_samples) - static_cast<double>(dim) - 2.0) /
         (static_cast<double>(n_samples) - 1.0);
}

/// ((n_s - d - 2) / (n_s - 1)) * cov^-1: the debiased inverse of a sample
/// covariance estimated from n_s realizations of a d-dimensional vector.
inline SymMatrix hartlap_precision(const SymMatrix& cov, std::size_t n_samples, std::size_t dim) {
  if (n_samples <= dim + 2) {
    throw validation_error("Hartlap factor nonpositive: n_s = " + std::to_string(n_samples) +
                           " must exceed d + 2 = " + std::to_string(dim + 2));
  }
  const SymMatrix inv = strict_inverse(cov, "covariance");
  return SymMatrix(hartlap_factor(n_samples, dim) * inv.matrix());
}

// ---------------------------------------------------------------------------
// Square roots and the geometric mean.

/// Principal square root. Eigenvalues below the floor are clamped and flagged.
inline PsdResult sym_sqrt(const SymMatrix& m) {
  return detail::floored_function(m, [](double ev) { return std::sqrt(ev); }, "square root");
}

inline PsdResult sym_inv_sqrt(const SymMatrix& m) {
  return detail::floored_function(m, [](double ev) { return 1.0 / std::sqrt(ev); },
                                  "inverse square root");
}

/// G(A, B) = A^1/2 (A^-1/2 B A^-1/2)^1/2 A^1/2.
inline PsdResult geometric_mean(const SymMatrix& a, const SymMatrix& b) {
  if (a.dim() != b.dim()) {
    throw validation_error("geometric_mean dimension mismatch: " + std::to_string(a.dim()) +
                           " vs " + std::to_string(b.dim()));
  }
  const PsdResult a_half = sym_sqrt(a);
  const PsdResult a_inv_half = sym_inv_sqrt(a);
  const PsdResult b_check = sym_sqrt(b);  // rejects non-PSD b with the same message
  const SymMatrix inner(a_inv_half.matrix.matrix() * b.matrix() * a_inv_half.matrix.matrix());
  const PsdResult inner_half = sym_sqrt(inner);
  const Matrix g = a_half.matrix.matrix() * inner_half.matrix.matrix() * a_half.matrix.matrix();
  return {SymMatrix(g), std::min(a_half.min_eigenvalue, b_check.min_eigenvalue),
          a_half.floored || b_check.floored || inner_half.floored};
}

/// The two terms of (F - dF)^-1 ~ F^-1 + F^-1 dF F^-1.
struct PerturbedInverse {
  SymMatrix first_term;
  SymMatrix second_term;
};

inline PerturbedInverse perturbed_inverse_correction(const SymMatrix& f_hat, const SymMatrix& delta_f) {
  if (f_hat.dim() != delta_f.dim()) {
    throw validation_error("perturbed_inverse_correction dimension mismatch");
  }
  SymMatrix inv = strict_inverse(f_hat, "Fisher matrix");
  SymMatrix second(inv.matrix() * delta_f.matrix() * inv.matrix());
  return {std::move(inv), std::move(second)};
}

}  // namespace mcfisher
