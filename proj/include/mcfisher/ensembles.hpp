#pragma once

// Simulation ensembles: ingest, validation, alpha/beta splits, shuffles and
// finite-difference derivative samples.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcfisher/error.hpp"
#include "mcfisher/linalg.hpp"
#include "mcfisher/random.hpp"

namespace mcfisher {

/// Realizations (rows) of a d-dimensional data vector at one parameter point.
struct DataEnsemble {
  RowMatrix data;
  std::vector<std::string> labels;     // empty or one per column
  std::vector<std::int64_t> seed_ids;  // empty or one per row, unique
  std::vector<double> theta;           // parameter point, informational
  std::string source;                  // where the rows came from

  Eigen::Index n() const { return data.rows(); }
  Eigen::Index d() const { return data.cols(); }

  void validate() const {
    if (data.rows() == 0 || data.cols() == 0) throw validation_error("empty ensemble" + where());
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
      for (Eigen::Index c = 0; c < data.cols(); ++c) {
        if (!std::isfinite(data(r, c))) {
          throw validation_error("non-finite value at row " + std::to_string(r + 1) +
                                 " column " + std::to_string(c + 1) + where());
        }
      }
    }
    if (!labels.empty() && static_cast<Eigen::Index>(labels.size()) != data.cols()) {
      throw validation_error("label count does not match data dimension" + where());
    }
    if (!seed_ids.empty()) {
      if (static_cast<Eigen::Index>(seed_ids.size()) != data.rows()) {
        throw validation_error("seed id count does not match realization count" + where());
      }
      std::set<std::int64_t> seen(seed_ids.begin(), seed_ids.end());
      if (seen.size() != seed_ids.size()) throw validation_error("duplicate seed ids" + where());
    }
  }

  std::string where() const { return source.empty() ? std::string{} : " in " + source; }
};

/// Plus/minus ensembles at theta* +/- step_i for each parameter i.
struct DerivativeEnsemble {
  std::vector<std::string> param_names;
  std::vector<double> steps;
  std::vector<DataEnsemble> plus;
  std::vector<DataEnsemble> minus;
  bool paired = false;  // rows of plus and minus share random seeds

  std::size_t p() const { return param_names.size(); }
  Eigen::Index d() const { return plus.empty() ? 0 : plus.front().d(); }

  void validate() const {
    const std::size_t np = param_names.size();
    if (np == 0) throw validation_error("derivative ensemble has no parameters");
    if (steps.size() != np || plus.size() != np || minus.size() != np) {
      throw validation_error("derivative ensemble: parameter, step and ensemble counts differ");
    }
    for (std::size_t i = 0; i < np; ++i) {
      if (!(steps[i] > 0.0) || !std::isfinite(steps[i])) {
        throw validation_error("step for parameter '" + param_names[i] + "' must be positive");
      }
      plus[i].validate();
      minus[i].validate();
      if (plus[i].d() != plus[0].d() || minus[i].d() != plus[0].d()) {
        throw validation_error("inconsistent data dimension in derivative ensembles of '" +
                               param_names[i] + "'");
      }
      if (plus[i].n() != minus[i].n()) {
        throw validation_error("plus and minus row counts differ for parameter '" + param_names[i] +
                               "': " + std::to_string(plus[i].n()) + " vs " +
                               std::to_string(minus[i].n()));
      }
      if (paired && !plus[i].seed_ids.empty() && !minus[i].seed_ids.empty() &&
          plus[i].seed_ids != minus[i].seed_ids) {
        throw validation_error("paired ensembles for '" + param_names[i] +
                               "' do not share seed ids row by row");
      }
    }
  }

  /// Common realization count, or an error when parameters differ.
  std::size_t common_count() const {
    const Eigen::Index n = plus.at(0).n();
    for (const auto& e : plus) {
      if (e.n() != n) throw validation_error("derivative ensembles differ in realization count");
    }
    return static_cast<std::size_t>(n);
  }
};

struct SplitAssignment {
  IndexSet alpha;  // builds the compression
  IndexSet beta;   // estimates the compressed Fisher information
  double fraction = 0.5;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// CSV.

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

/// Parses the ensemble CSV format: one realization per line, comma-separated
/// floats, an optional leading `#` header of column labels. A header whose
/// first label is `seed` marks the first column as integer seed ids.
inline DataEnsemble parse_ensemble_csv(std::istream& in, const std::string& source = {}) {
  DataEnsemble ens;
  ens.source = source;
  const std::string where = source.empty() ? std::string{} : " in " + source;
  bool seed_column = false;
  std::vector<double> values;
  Eigen::Index dim = -1;
  std::size_t row = 0;
  std::size_t line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = detail::trim(line);
    if (view.empty()) continue;
    if (view.front() == '#') {
      if (row > 0 || !ens.labels.empty()) {
        throw validation_error("header row must precede data (line " + std::to_string(line_no) + ")" + where);
      }
      for (auto cell : detail::split_commas(view.substr(1))) ens.labels.emplace_back(cell);
      if (!ens.labels.empty() && ens.labels.front() == "seed") {
        seed_column = true;
        ens.labels.erase(ens.labels.begin());
      }
      continue;
    }
    ++row;
    auto cells = detail::split_commas(view);
    if (seed_column) {
      std::int64_t id = 0;
      const auto res = std::from_chars(cells.front().data(), cells.front().data() + cells.front().size(), id);
      if (res.ec != std::errc{} || res.ptr != cells.front().data() + cells.front().size()) {
        throw validation_error("row " + std::to_string(row) + " column 1: cannot parse seed id '" +
                               std::string(cells.front()) + "'" + where);
      }
      ens.seed_ids.push_back(id);
      cells.erase(cells.begin());
    }
    const auto width = static_cast<Eigen::Index>(cells.size());
    if (dim < 0) dim = width;
    if (width != dim) {
      throw validation_error("inconsistent data dimension at row " + std::to_string(row) + ": expected " +
                             std::to_string(dim) + " values, got " + std::to_string(width) + where);
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      const auto cell = cells[c];
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || res.ec == std::errc::invalid_argument || res.ptr != cell.data() + cell.size()) {
        throw validation_error("row " + std::to_string(row) + " column " +
                               std::to_string(c + 1 + (seed_column ? 1 : 0)) + ": cannot parse '" +
                               std::string(cell) + "' as a number" + where);
      }
      if (res.ec == std::errc::result_out_of_range || !std::isfinite(v)) {
        throw validation_error("non-finite value at row " + std::to_string(row) + " column " +
                               std::to_string(c + 1) + where);
      }
      values.push_back(v);
    }
  }
  if (row == 0 || dim <= 0) throw validation_error("empty ensemble" + where);
  ens.data = Eigen::Map<RowMatrix>(values.data(), static_cast<Eigen::Index>(row), dim);
  ens.validate();
  return ens;
}

inline DataEnsemble load_ensemble_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open ensemble file " + path.string());
  return parse_ensemble_csv(in, path.string());
}

/// Writes the CSV format with shortest round-trip formatting, so loading the
/// file back reproduces every value bit for bit.
inline void write_ensemble_csv(std::ostream& out, const DataEnsemble& ens) {
  const bool with_seeds = !ens.seed_ids.empty();
  if (with_seeds || !ens.labels.empty()) {
    out << '#';
    bool first = true;
    if (with_seeds) {
      out << "seed";
      first = false;
    }
    for (Eigen::Index c = 0; c < ens.d(); ++c) {
      if (!first) out << ',';
      first = false;
      out << (ens.labels.empty() ? "x" + std::to_string(c) : ens.labels[static_cast<std::size_t>(c)]);
    }
    out << '\n';
  }
  for (Eigen::Index r = 0; r < ens.n(); ++r) {
    if (with_seeds) out << ens.seed_ids[static_cast<std::size_t>(r)] << ',';
    for (Eigen::Index c = 0; c < ens.d(); ++c) {
      if (c) out << ',';
      out << detail::format_double(ens.data(r, c));
    }
    out << '\n';
  }
}

inline void save_ensemble(const std::filesystem::path& path, const DataEnsemble& ens) {
  std::ofstream out(path);
  if (!out) throw validation_error("cannot write ensemble file " + path.string());
  write_ensemble_csv(out, ens);
}

// ---------------------------------------------------------------------------
// Manifest.

struct ManifestParameter {
  std::string name;
  double step = 0.0;
  std::filesystem::path plus;
  std::filesystem::path minus;
  bool paired = false;
};

struct Manifest {
  std::filesystem::path fiducial;
  Eigen::Index data_dim = 0;
  std::vector<ManifestParameter> parameters;
};

inline void to_json(nlohmann::json& j, const Manifest& m) {
  j = nlohmann::json{{"fiducial", m.fiducial.generic_string()}, {"data_dim", m.data_dim}};
  auto params = nlohmann::json::array();
  for (const auto& p : m.parameters) {
    params.push_back({{"name", p.name},
                      {"step", p.step},
                      {"plus", p.plus.generic_string()},
                      {"minus", p.minus.generic_string()},
                      {"paired", p.paired}});
  }
  j["parameters"] = params;
}

/// Parses a manifest; relative file paths resolve against `base_dir`.
inline Manifest parse_manifest(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  Manifest m;
  try {
    auto resolve = [&](const std::string& s) {
      std::filesystem::path p(s);
      return p.is_absolute() ? p : base_dir / p;
    };
    m.fiducial = resolve(j.at("fiducial").get<std::string>());
    m.data_dim = j.at("data_dim").get<Eigen::Index>();
    for (const auto& jp : j.at("parameters")) {
      ManifestParameter p;
      p.name = jp.at("name").get<std::string>();
      p.step = jp.at("step").get<double>();
      p.plus = resolve(jp.at("plus").get<std::string>());
      p.minus = resolve(jp.at("minus").get<std::string>());
      p.paired = jp.value("paired", false);
      m.parameters.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("malformed manifest: ") + e.what());
  }
  if (m.data_dim < 1) throw validation_error("manifest data_dim must be positive");
  if (m.parameters.empty()) throw validation_error("manifest lists no parameters");
  // Covariance and derivative simulations must be independent: no file reuse.
  std::set<std::filesystem::path> seen;
  auto claim = [&](const std::filesystem::path& p) {
    const auto key = std::filesystem::weakly_canonical(p);
    if (!seen.insert(key).second) {
      throw validation_error("manifest reuses ensemble file " + p.string() +
                             "; fiducial and derivative simulations must be disjoint");
    }
  };
  claim(m.fiducial);
  std::set<std::string> names;
  for (const auto& p : m.parameters) {
    if (!names.insert(p.name).second) throw validation_error("duplicate parameter name '" + p.name + "'");
    if (!(p.step > 0.0)) throw validation_error("step for parameter '" + p.name + "' must be positive");
    claim(p.plus);
    claim(p.minus);
    if (p.paired != m.parameters.front().paired) {
      throw validation_error("manifest mixes paired and unpaired parameters");
    }
  }
  return m;
}

inline Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw validation_error("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_manifest(j, path.parent_path());
}

struct ManifestEnsembles {
  DataEnsemble fiducial;
  DerivativeEnsemble derivatives;
};

inline void canonicalize(DataEnsemble& ens);

inline ManifestEnsembles load_manifest_ensembles(const Manifest& m) {
  ManifestEnsembles out;
  auto load_checked = [&](const std::filesystem::path& p) {
    DataEnsemble e = load_ensemble_csv(p);
    if (e.d() != m.data_dim) {
      throw validation_error("inconsistent data dimension in " + p.string() + ": manifest says " +
                             std::to_string(m.data_dim) + ", file has " + std::to_string(e.d()));
    }
    canonicalize(e);
    return e;
  };
  out.fiducial = load_checked(m.fiducial);
  out.derivatives.paired = m.parameters.front().paired;
  for (const auto& p : m.parameters) {
    out.derivatives.param_names.push_back(p.name);
    out.derivatives.steps.push_back(p.step);
    out.derivatives.plus.push_back(load_checked(p.plus));
    out.derivatives.minus.push_back(load_checked(p.minus));
  }
  out.derivatives.validate();
  return out;
}

enum class EnsembleFormat { csv, manifest };

/// Loads a single ensemble; for a manifest this is the fiducial ensemble.
inline DataEnsemble load_ensemble(const std::filesystem::path& path, EnsembleFormat format) {
  if (format == EnsembleFormat::csv) return load_ensemble_csv(path);
  const Manifest m = load_manifest(path);
  DataEnsemble e = load_ensemble_csv(m.fiducial);
  if (e.d() != m.data_dim) {
    throw validation_error("inconsistent data dimension in " + m.fiducial.string());
  }
  return e;
}

// ---------------------------------------------------------------------------
// Canonical order. Rows carrying seed ids are sorted by id, so any
// permutation of realizations (with their ids) yields identical downstream
// results. Rows without ids keep their order, which is then the pairing.

inline void canonicalize(DataEnsemble& ens) {
  if (ens.seed_ids.empty()) return;
  IndexSet order = detail::all_indices(ens.n());
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return ens.seed_ids[a] < ens.seed_ids[b]; });
  RowMatrix data(ens.n(), ens.d());
  std::vector<std::int64_t> ids(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    data.row(static_cast<Eigen::Index>(k)) = ens.data.row(static_cast<Eigen::Index>(order[k]));
    ids[k] = ens.seed_ids[order[k]];
  }
  ens.data = std::move(data);
  ens.seed_ids = std::move(ids);
}

inline void canonicalize(DerivativeEnsemble& dens) {
  for (auto& e : dens.plus) canonicalize(e);
  for (auto& e : dens.minus) canonicalize(e);
}

// ---------------------------------------------------------------------------
// Splits.

inline constexpr std::uint64_t kSplitStream = 0x5350'4C49'5400ULL;  // "SPLIT"

/// Uniformly random alpha/beta partition with |alpha| = round(fraction * n).
/// Deterministic in (n, fraction, seed).
inline SplitAssignment split(std::size_t n, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw validation_error("split fraction must lie in (0, 1), got " + detail::format_double(fraction));
  }
  if (n < 3) throw validation_error("split needs at least 3 realizations, got " + std::to_string(n));
  const auto n_alpha = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (n_alpha < 1 || n - n_alpha < 2) {
    throw validation_error("split of " + std::to_string(n) + " realizations at fraction " +
                           detail::format_double(fraction) + " leaves |alpha| = " + std::to_string(n_alpha) +
                           ", |beta| = " + std::to_string(n - std::min(n, n_alpha)) +
                           " (need >= 1 and >= 2)");
  }
  // Fisher-Yates driven by the counter-based generator.
  const CounterRng rng(seed);
  IndexSet perm = detail::all_indices(static_cast<Eigen::Index>(n));
  for (std::size_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i + 1, kSplitStream, i));
    std::swap(perm[i], perm[j]);
  }
  SplitAssignment out;
  out.alpha.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_alpha));
  out.beta.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_alpha), perm.end());
  std::sort(out.alpha.begin(), out.alpha.end());
  std::sort(out.beta.begin(), out.beta.end());
  out.fraction = fraction;
  out.seed = seed;
  return out;
}

/// Seed of shuffle `index` derived from the stream seed.
inline std::uint64_t shuffle_seed(std::uint64_t seed, std::size_t index) {
  return derive_seed(seed, 0x5348'5546'0000ULL + index);  // "SHUF"
}

inline std::vector<SplitAssignment> shuffle_assignments(std::size_t n, double fraction,
                                                        std::size_t n_shuffles, std::uint64_t seed) {
  if (n_shuffles < 1) throw validation_error("n_shuffles must be at least 1");
  std::vector<SplitAssignment> out;
  out.reserve(n_shuffles);
  for (std::size_t s = 0; s < n_shuffles; ++s) out.push_back(split(n, fraction, shuffle_seed(seed, s)));
  return out;
}

// ---------------------------------------------------------------------------
// Derivatives.

/// Per-realization central differences (plus_r - minus_r) / (2 step_i). Needs
/// seed-matched rows.
inline std::vector<RowMatrix> derivative_samples(const DerivativeEnsemble& dens) {
  if (!dens.paired) {
    throw validation_error("per-realization derivative samples need paired (seed-matched) ensembles");
  }
  std::vector<RowMatrix> out;
  out.reserve(dens.p());
  for (std::size_t i = 0; i < dens.p(); ++i) {
    if (dens.plus[i].n() != dens.minus[i].n() || dens.plus[i].d() != dens.minus[i].d()) {
      throw validation_error("row-count mismatch between plus and minus ensembles of '" +
                             dens.param_names[i] + "'");
    }
    out.emplace_back((dens.plus[i].data - dens.minus[i].data) / (2.0 * dens.steps[i]));
  }
  return out;
}

/// Mean derivatives and the covariance of that mean.
///
/// cov_of_mean[i * p + j](a, b) = Cov[mu_{a,i}, mu_{b,j}] of the estimated mean
/// derivative. Paired ensembles use the spread of per-realization samples
/// divided by the count; unpaired ensembles propagate the two sub-ensemble
/// covariances, with zero covariance between different parameters.
struct DerivativeNoise {
  Matrix mu_derivs;                 // p x d
  std::vector<Matrix> cov_of_mean;  // p * p blocks, each d x d
  std::size_t count = 0;

  const Matrix& block(std::size_t i, std::size_t j) const {
    return cov_of_mean.at(i * static_cast<std::size_t>(mu_derivs.rows()) + j);
  }
};

namespace detail {

inline void check_indices(const IndexSet& indices, Eigen::Index n, const std::string& what) {
  for (std::size_t k : indices) {
    if (static_cast<Eigen::Index>(k) >= n) {
      throw validation_error(what + ": realization index " + std::to_string(k) + " out of range (n = " +
                             std::to_string(n) + ")");
    }
  }
}

inline bool aligned_across_parameters(const DerivativeEnsemble& dens) {
  for (std::size_t i = 1; i < dens.p(); ++i) {
    if (dens.plus[i].n() != dens.plus[0].n()) return false;
    if (dens.plus[i].seed_ids != dens.plus[0].seed_ids) return false;
  }
  return true;
}

}  // namespace detail

inline DerivativeNoise derivative_mean_cov(const DerivativeEnsemble& dens, const IndexSet& indices) {
  const std::size_t np = dens.p();
  const Eigen::Index d = dens.d();
  if (indices.size() < 2) {
    throw validation_error("insufficient realizations: derivative noise needs at least 2, got " +
                           std::to_string(indices.size()));
  }
  for (std::size_t i = 0; i < np; ++i) {
    detail::check_indices(indices, std::min(dens.plus[i].n(), dens.minus[i].n()), dens.param_names[i]);
  }
  DerivativeNoise out;
  out.count = indices.size();
  out.mu_derivs.resize(static_cast<Eigen::Index>(np), d);
  out.cov_of_mean.assign(np * np, Matrix::Zero(d, d));
  const double count = static_cast<double>(indices.size());

  if (dens.paired) {
    const auto samples = derivative_samples(dens);
    if (detail::aligned_across_parameters(dens)) {
      // Stack parameters side by side so cross-parameter blocks come from the
      // same realizations.
      RowMatrix stacked(static_cast<Eigen::Index>(indices.size()), static_cast<Eigen::Index>(np) * d);
      for (std::size_t k = 0; k < indices.size(); ++k) {
        for (std::size_t i = 0; i < np; ++i) {
          stacked.block(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i) * d, 1, d) =
              samples[i].row(static_cast<Eigen::Index>(indices[k]));
        }
      }
      const Vector mean = sample_mean(stacked);
      const SymMatrix cov = sample_covariance(stacked);
      for (std::size_t i = 0; i < np; ++i) {
        out.mu_derivs.row(static_cast<Eigen::Index>(i)) =
            mean.segment(static_cast<Eigen::Index>(i) * d, d).transpose();
        for (std::size_t j = 0; j < np; ++j) {
          out.cov_of_mean[i * np + j] =
              cov.matrix().block(static_cast<Eigen::Index>(i) * d, static_cast<Eigen::Index>(j) * d, d, d) / count;
        }
      }
    } else {
      for (std::size_t i = 0; i < np; ++i) {
        out.mu_derivs.row(static_cast<Eigen::Index>(i)) = sample_mean(samples[i], indices).transpose();
        out.cov_of_mean[i * np + i] = sample_covariance(samples[i], indices).matrix() / count;
      }
    }
    return out;
  }

  for (std::size_t i = 0; i < np; ++i) {
    const double scale = 1.0 / (4.0 * dens.steps[i] * dens.steps[i]);
    const Vector mp = sample_mean(dens.plus[i].data, indices);
    const Vector mm = sample_mean(dens.minus[i].data, indices);
    out.mu_derivs.row(static_cast<Eigen::Index>(i)) = ((mp - mm) / (2.0 * dens.steps[i])).transpose();
    const Matrix cp = sample_covariance(dens.plus[i].data, indices).matrix();
    const Matrix cm = sample_covariance(dens.minus[i].data, indices).matrix();
    out.cov_of_mean[i * np + i] = scale * (cp / count + cm / count);
  }
  return out;
}

inline DerivativeNoise derivative_mean_cov(const DerivativeEnsemble& dens) {
  return derivative_mean_cov(dens, detail::all_indices(static_cast<Eigen::Index>(dens.common_count())));
}

/// Central-difference mean derivatives (p x d) without the noise estimate.
inline Matrix mean_derivatives(const DerivativeEnsemble& dens, const IndexSet& indices) {
  Matrix out(static_cast<Eigen::Index>(dens.p()), dens.d());
  for (std::size_t i = 0; i < dens.p(); ++i) {
    detail::check_indices(indices, std::min(dens.plus[i].n(), dens.minus[i].n()), dens.param_names[i]);
    const Vector mp = sample_mean(dens.plus[i].data, indices);
    const Vector mm = sample_mean(dens.minus[i].data, indices);
    out.row(static_cast<Eigen::Index>(i)) = ((mp - mm) / (2.0 * dens.steps[i])).transpose();
  }
  return out;
}

/// Restricts every plus/minus ensemble to the given realizations.
inline DataEnsemble subset(const DataEnsemble& e, const IndexSet& indices) {
  detail::check_indices(indices, e.n(), e.source.empty() ? "subset" : e.source);
  DataEnsemble out;
  out.labels = e.labels;
  out.theta = e.theta;
  out.source = e.source;
  out.data.resize(static_cast<Eigen::Index>(indices.size()), e.d());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    out.data.row(static_cast<Eigen::Index>(k)) = e.data.row(static_cast<Eigen::Index>(indices[k]));
    if (!e.seed_ids.empty()) out.seed_ids.push_back(e.seed_ids[indices[k]]);
  }
  return out;
}

inline DerivativeEnsemble subset(const DerivativeEnsemble& dens, const IndexSet& indices) {
  DerivativeEnsemble out;
  out.param_names = dens.param_names;
  out.steps = dens.steps;
  out.paired = dens.paired;
  for (const auto& e : dens.plus) out.plus.push_back(subset(e, indices));
  for (const auto& e : dens.minus) out.minus.push_back(subset(e, indices));
  return out;
}

}  // namespace mcfisher
