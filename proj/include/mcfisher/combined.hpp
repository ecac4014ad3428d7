#pragma once

// The geometric-mean combination of the standard and compressed estimates,
// shuffle averaging, constraints and the trust diagnostics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mcfisher/ensembles.hpp"
#include "mcfisher/fisher.hpp"
#include "mcfisher/linalg.hpp"
#include "mcfisher/parallel.hpp"

namespace mcfisher {

namespace detail {

inline void require_positive_definite(const FisherMatrix& f, const char* what) {
  const EigenSystem es = eigen_system(f.matrix);
  if (!(es.values.minCoeff() > 0.0)) {
    throw numeric_error(std::string(what) + " Fisher matrix is not positive definite: eigenvalues " +
                        format_values(es.values));
  }
}

}  // namespace detail

/// G(standard, compressed). The standard input must come from the same
/// simulation count as the compression (the alpha subset).
inline FisherMatrix combined_fisher(const FisherMatrix& standard_alpha, const FisherMatrix& compressed) {
  if (standard_alpha.p() != compressed.p()) {
    throw validation_error("combined_fisher: standard is " + std::to_string(standard_alpha.p()) +
                           "x" + std::to_string(standard_alpha.p()) + ", compressed is " +
                           std::to_string(compressed.p()) + "x" + std::to_string(compressed.p()));
  }
  detail::require_positive_definite(standard_alpha, "standard");
  detail::require_positive_definite(compressed, "compressed");
  const PsdResult g = geometric_mean(standard_alpha.matrix, compressed.matrix);
  FisherMatrix out;
  out.matrix = g.matrix;
  out.kind = FisherKind::combined;
  out.n_used = std::max(standard_alpha.n_used, compressed.n_used);
  out.floored = g.floored || standard_alpha.floored || compressed.floored;
  if (g.floored) {
    out.notes.push_back("eigenvalue floor hit in geometric mean (min input eigenvalue " +
                        detail::format_double(g.min_eigenvalue) + ")");
  }
  return out;
}

/// Element-wise mean of Fisher matrices, accumulated in index order.
inline FisherMatrix average_fisher(const std::vector<FisherMatrix>& fs) {
  if (fs.empty()) throw validation_error("average_fisher: nothing to average");
  Matrix sum = Matrix::Zero(fs.front().p(), fs.front().p());
  FisherMatrix out;
  out.kind = fs.front().kind;
  for (const auto& f : fs) {
    if (f.p() != fs.front().p()) throw validation_error("average_fisher: dimension mismatch");
    sum += f.matrix.matrix();
    out.n_used = std::max(out.n_used, f.n_used);
    out.floored = out.floored || f.floored;
  }
  out.matrix = SymMatrix(sum / static_cast<double>(fs.size()));
  return out;
}

struct ShuffleFailure {
  std::size_t index = 0;
  std::string message;

  friend bool operator==(const ShuffleFailure&, const ShuffleFailure&) = default;
};

template <typename T>
struct ShuffleOutcome {
  std::vector<std::optional<T>> per_shuffle;  // index-ordered, empty on failure
  std::vector<ShuffleFailure> failures;

  std::vector<T> successes() const {
    std::vector<T> out;
    for (const auto& r : per_shuffle) {
      if (r) out.push_back(*r);
    }
    return out;
  }
};

/// Runs `per_split` on each of n_shuffles seeded alpha/beta assignments of n
/// realizations. Failing shuffles are collected; if every shuffle fails the
/// first failure is rethrown.
template <typename T, typename PerSplit>
ShuffleOutcome<T> run_shuffles(std::size_t n, double fraction, std::size_t n_shuffles, std::uint64_t seed,
                               PerSplit&& per_split, std::size_t workers = 0) {
  if (n_shuffles < 1) throw validation_error("n_shuffles must be at least 1");
  const auto assignments = shuffle_assignments(n, fraction, n_shuffles, seed);
  ShuffleOutcome<T> out;
  out.per_shuffle.resize(n_shuffles);
  const auto errors = parallel_for(n_shuffles, workers, [&](std::size_t s) {
    out.per_shuffle[s] = per_split(assignments[s]);
  });
  std::exception_ptr first;
  for (std::size_t s = 0; s < n_shuffles; ++s) {
    if (!errors[s]) continue;
    if (!first) first = errors[s];
    try {
      std::rethrow_exception(errors[s]);
    } catch (const std::exception& e) {
      out.failures.push_back({s, e.what()});
    } catch (...) {
      out.failures.push_back({s, "unknown error"});
    }
  }
  if (out.failures.size() == n_shuffles) std::rethrow_exception(first);
  return out;
}

/// Average of the per-shuffle combined Fisher matrices, where
/// `combined_for(split)` returns the combined estimate for one assignment.
template <typename CombinedFor>
FisherMatrix shuffled_combined(std::size_t n, double fraction, std::size_t n_shuffles, std::uint64_t seed,
                               CombinedFor&& combined_for, std::size_t workers = 0) {
  const auto outcome = run_shuffles<FisherMatrix>(n, fraction, n_shuffles, seed,
                                                  std::forward<CombinedFor>(combined_for), workers);
  FisherMatrix out = average_fisher(outcome.successes());
  out.kind = FisherKind::combined;
  for (const auto& f : outcome.failures) {
    out.notes.push_back("shuffle " + std::to_string(f.index) + " failed: " + f.message);
  }
  return out;
}

/// sigma_i = sqrt((F^-1)_ii).
inline Vector parameter_constraints(const FisherMatrix& f) {
  const SymMatrix inv = strict_inverse(f.matrix, "Fisher matrix");
  Vector sigma(f.p());
  for (Eigen::Index i = 0; i < f.p(); ++i) {
    if (!(inv(i, i) > 0.0)) throw numeric_error("Fisher matrix inverse has a nonpositive diagonal");
    sigma(i) = std::sqrt(inv(i, i));
  }
  return sigma;
}

// ---------------------------------------------------------------------------
// Diagnostics.

enum class Verdict { trusted, biased };

inline const char* to_string(Verdict v) { return v == Verdict::trusted ? "TRUSTED" : "BIASED"; }

inline Verdict verdict_from_string(const std::string& s) {
  if (s == "TRUSTED") return Verdict::trusted;
  if (s == "BIASED") return Verdict::biased;
  throw validation_error("unknown verdict '" + s + "'");
}

struct BiasDiagnostic {
  SymMatrix first_term;   // F^-1
  SymMatrix second_term;  // F^-1 dF F^-1
  Vector ratios;          // |second_ii| / |first_ii|
  double max_ratio = 0.0;
  double threshold = 0.2;
  Verdict verdict = Verdict::trusted;

  friend bool operator==(const BiasDiagnostic&, const BiasDiagnostic&) = default;
};

inline BiasDiagnostic bias_dominance_diagnostic(const FisherMatrix& f_hat, const SymMatrix& delta_f,
                                                double threshold = 0.2) {
  if (!(threshold > 0.0)) throw validation_error("diagnostic threshold must be positive");
  auto [first, second] = perturbed_inverse_correction(f_hat.matrix, delta_f);
  BiasDiagnostic out;
  out.ratios.resize(f_hat.p());
  for (Eigen::Index i = 0; i < f_hat.p(); ++i) {
    out.ratios(i) = std::abs(second(i, i)) / std::abs(first(i, i));
  }
  out.max_ratio = out.ratios.maxCoeff();
  out.threshold = threshold;
  out.verdict = out.max_ratio < threshold ? Verdict::trusted : Verdict::biased;
  out.first_term = std::move(first);
  out.second_term = std::move(second);
  return out;
}

enum class Trend { decreasing, increasing, flat, non_monotone };

inline const char* to_string(Trend t) {
  switch (t) {
    case Trend::decreasing: return "decreasing";
    case Trend::increasing: return "increasing";
    case Trend::flat: return "flat";
    case Trend::non_monotone: return "non-monotone";
  }
  return "unknown";
}

inline Trend trend_from_string(const std::string& s) {
  for (Trend t : {Trend::decreasing, Trend::increasing, Trend::flat, Trend::non_monotone}) {
    if (s == to_string(t)) return t;
  }
  throw validation_error("unknown trend '" + s + "'");
}

struct ParameterTrend {
  Trend trend = Trend::flat;
  double top_half_change = 0.0;  // |sigma_last - sigma_mid| / sigma_last
  bool converging = false;
  bool flagged = false;

  friend bool operator==(const ParameterTrend&, const ParameterTrend&) = default;
};

struct TrendReport {
  std::vector<std::size_t> n_values;
  std::vector<ParameterTrend> parameters;
  bool flagged = false;

  friend bool operator==(const TrendReport&, const TrendReport&) = default;
};

struct TrendPoint {
  std::size_t n = 0;
  Vector sigma;

  friend bool operator==(const TrendPoint&, const TrendPoint&) = default;
};

/// Classifies how constraints move with the simulation count. Steps with a
/// relative change below `tolerance` count as flat; "converging" means the
/// top half of the N range moved by less than `converged_change`.
inline TrendReport convergence_trend(const std::vector<TrendPoint>& points, double tolerance = 0.01,
                                     double converged_change = 0.05) {
  if (points.size() < 3) throw validation_error("convergence_trend needs at least 3 distinct N values");
  const Eigen::Index p = points.front().sigma.size();
  TrendReport out;
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (points[k].sigma.size() != p) throw validation_error("convergence_trend: constraint lengths differ");
    if (k > 0 && points[k].n <= points[k - 1].n) {
      throw validation_error("convergence_trend: N values must be strictly increasing (got " +
                             std::to_string(points[k - 1].n) + " then " + std::to_string(points[k].n) + ")");
    }
    out.n_values.push_back(points[k].n);
  }
  const std::size_t mid = points.size() / 2;
  for (Eigen::Index i = 0; i < p; ++i) {
    bool up = false;
    bool down = false;
    for (std::size_t k = 1; k < points.size(); ++k) {
      const double rel = (points[k].sigma(i) - points[k - 1].sigma(i)) / std::abs(points[k - 1].sigma(i));
      if (rel > tolerance) up = true;
      if (rel < -tolerance) down = true;
    }
    ParameterTrend t;
    t.trend = up && down ? Trend::non_monotone : up ? Trend::increasing : down ? Trend::decreasing : Trend::flat;
    const double last = points.back().sigma(i);
    t.top_half_change = std::abs(last - points[mid].sigma(i)) / std::abs(last);
    t.converging = t.top_half_change < converged_change;
    t.flagged = t.trend == Trend::increasing || t.trend == Trend::non_monotone;
    out.flagged = out.flagged || t.flagged;
    out.parameters.push_back(t);
  }
  return out;
}

}  // namespace mcfisher
