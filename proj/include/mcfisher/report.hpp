#pragma once

// JSON serialization of forecast reports. Doubles are written in shortest
// round-trip form, so parse(serialize(report)) == report exactly.

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "mcfisher/pipeline.hpp"

namespace mcfisher {

using nlohmann::json;

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw validation_error("expected a nonempty matrix (array of rows)");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j.at(static_cast<std::size_t>(i));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw validation_error("matrix rows have differing lengths");
    }
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
  }
  return m;
}

inline json vector_to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Vector vector_from_json(const json& j) {
  if (!j.is_array()) throw validation_error("expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

inline void to_json(json& j, const SymMatrix& m) { j = matrix_to_json(m.matrix()); }
inline void from_json(const json& j, SymMatrix& m) { m = SymMatrix(matrix_from_json(j)); }

inline void to_json(json& j, const FisherMatrix& f) {
  j = json{{"matrix", f.matrix}, {"kind", to_string(f.kind)}, {"n_used", f.n_used},
           {"floored", f.floored}, {"notes", f.notes}};
}

inline void from_json(const json& j, FisherMatrix& f) {
  f.matrix = j.at("matrix").get<SymMatrix>();
  f.kind = fisher_kind_from_string(j.at("kind").get<std::string>());
  f.n_used = j.at("n_used").get<std::size_t>();
  f.floored = j.at("floored").get<bool>();
  f.notes = j.at("notes").get<std::vector<std::string>>();
}

inline void to_json(json& j, const BiasDiagnostic& d) {
  j = json{{"first_term", d.first_term}, {"second_term", d.second_term}, {"ratios", vector_to_json(d.ratios)},
           {"max_ratio", d.max_ratio},   {"threshold", d.threshold},     {"verdict", to_string(d.verdict)}};
}

inline void from_json(const json& j, BiasDiagnostic& d) {
  d.first_term = j.at("first_term").get<SymMatrix>();
  d.second_term = j.at("second_term").get<SymMatrix>();
  d.ratios = vector_from_json(j.at("ratios"));
  d.max_ratio = j.at("max_ratio").get<double>();
  d.threshold = j.at("threshold").get<double>();
  d.verdict = verdict_from_string(j.at("verdict").get<std::string>());
}

inline void to_json(json& j, const TrendPoint& p) { j = json{{"n", p.n}, {"sigma", vector_to_json(p.sigma)}}; }

inline void from_json(const json& j, TrendPoint& p) {
  p.n = j.at("n").get<std::size_t>();
  p.sigma = vector_from_json(j.at("sigma"));
}

inline void to_json(json& j, const ParameterTrend& t) {
  j = json{{"trend", to_string(t.trend)},
           {"top_half_change", t.top_half_change},
           {"converging", t.converging},
           {"flagged", t.flagged}};
}

inline void from_json(const json& j, ParameterTrend& t) {
  t.trend = trend_from_string(j.at("trend").get<std::string>());
  t.top_half_change = j.at("top_half_change").get<double>();
  t.converging = j.at("converging").get<bool>();
  t.flagged = j.at("flagged").get<bool>();
}

inline void to_json(json& j, const TrendReport& t) {
  j = json{{"n_values", t.n_values}, {"parameters", t.parameters}, {"flagged", t.flagged}};
}

inline void from_json(const json& j, TrendReport& t) {
  t.n_values = j.at("n_values").get<std::vector<std::size_t>>();
  t.parameters = j.at("parameters").get<std::vector<ParameterTrend>>();
  t.flagged = j.at("flagged").get<bool>();
}

inline void to_json(json& j, const ShuffleFailure& f) { j = json{{"index", f.index}, {"message", f.message}}; }

inline void from_json(const json& j, ShuffleFailure& f) {
  f.index = j.at("index").get<std::size_t>();
  f.message = j.at("message").get<std::string>();
}

inline void to_json(json& j, const EstimateOptions& o) {
  j = json{{"likelihood", to_string(o.likelihood)},
           {"split_fraction", o.split_fraction},
           {"shuffles", o.shuffles},
           {"cov_derivs", o.cov_derivs},
           {"hartlap", o.hartlap},
           {"threshold", o.threshold},
           {"seed", o.seed},
           {"seed_from_entropy", o.seed_from_entropy},
           {"covariance_form", to_string(o.covariance_form)},
           {"trend", o.trend}};
}

inline void from_json(const json& j, EstimateOptions& o) {
  o.likelihood = likelihood_from_string(j.at("likelihood").get<std::string>());
  o.split_fraction = j.at("split_fraction").get<double>();
  o.shuffles = j.at("shuffles").get<std::size_t>();
  o.cov_derivs = j.at("cov_derivs").get<bool>();
  o.hartlap = j.at("hartlap").get<bool>();
  o.threshold = j.at("threshold").get<double>();
  o.seed = j.at("seed").get<std::uint64_t>();
  o.seed_from_entropy = j.at("seed_from_entropy").get<bool>();
  o.covariance_form = covariance_form_from_string(j.at("covariance_form").get<std::string>());
  o.trend = j.at("trend").get<bool>();
}

inline void to_json(json& j, const EstimatorSummary& s) {
  j = json{{"fisher", s.fisher}, {"sigma", vector_to_json(s.sigma)}};
  j["bias"] = s.bias ? json(*s.bias) : json(nullptr);
  j["diagnostic"] = s.diagnostic ? json(*s.diagnostic) : json(nullptr);
}

inline void from_json(const json& j, EstimatorSummary& s) {
  s.fisher = j.at("fisher").get<FisherMatrix>();
  s.sigma = vector_from_json(j.at("sigma"));
  s.bias.reset();
  s.diagnostic.reset();
  if (j.contains("bias") && !j.at("bias").is_null()) s.bias = j.at("bias").get<SymMatrix>();
  if (j.contains("diagnostic") && !j.at("diagnostic").is_null()) {
    s.diagnostic = j.at("diagnostic").get<BiasDiagnostic>();
  }
}

inline void to_json(json& j, const ForecastReport& r) {
  j = json{{"schema", r.schema},
           {"version", r.version},
           {"options", r.options},
           {"parameters", r.parameters},
           {"data_dim", r.data_dim},
           {"n_fiducial", r.n_fiducial},
           {"n_deriv", r.n_deriv},
           {"n_alpha", r.n_alpha},
           {"n_beta", r.n_beta},
           {"standard", r.standard},
           {"standard_alpha", r.standard_alpha},
           {"compressed", r.compressed},
           {"combined", r.combined},
           {"trend", r.trend},
           {"shuffle_failures", r.shuffle_failures},
           {"notes", r.notes}};
  j["trend_report"] = r.trend_report ? json(*r.trend_report) : json(nullptr);
}

inline void from_json(const json& j, ForecastReport& r) {
  r.schema = j.at("schema").get<int>();
  if (r.schema != 1) throw validation_error("unsupported report schema " + std::to_string(r.schema));
  r.version = j.at("version").get<std::string>();
  r.options = j.at("options").get<EstimateOptions>();
  r.parameters = j.at("parameters").get<std::vector<std::string>>();
  r.data_dim = j.at("data_dim").get<std::size_t>();
  r.n_fiducial = j.at("n_fiducial").get<std::size_t>();
  r.n_deriv = j.at("n_deriv").get<std::size_t>();
  r.n_alpha = j.at("n_alpha").get<std::size_t>();
  r.n_beta = j.at("n_beta").get<std::size_t>();
  r.standard = j.at("standard").get<EstimatorSummary>();
  r.standard_alpha = j.at("standard_alpha").get<EstimatorSummary>();
  r.compressed = j.at("compressed").get<EstimatorSummary>();
  r.combined = j.at("combined").get<EstimatorSummary>();
  r.trend = j.at("trend").get<std::vector<TrendPoint>>();
  r.trend_report.reset();
  if (j.contains("trend_report") && !j.at("trend_report").is_null()) {
    r.trend_report = j.at("trend_report").get<TrendReport>();
  }
  r.shuffle_failures = j.at("shuffle_failures").get<std::vector<ShuffleFailure>>();
  r.notes = j.at("notes").get<std::vector<std::string>>();
}

inline std::string serialize(const ForecastReport& r) { return json(r).dump(2); }

/// Parses a report; malformed JSON or missing fields are validation errors.
inline ForecastReport parse_report(const std::string& text) {
  try {
    return json::parse(text).get<ForecastReport>();
  } catch (const json::exception& e) {
    throw validation_error(std::string("malformed report: ") + e.what());
  }
}

inline ForecastReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open report " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_report(buf.str());
}

}  // namespace mcfisher
