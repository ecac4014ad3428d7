#pragma once

// End-to-end estimation on a fiducial ensemble and a derivative ensemble:
// the standard estimate on everything, the compressed and combined estimates
// averaged over shuffled alpha/beta splits, noise biases, diagnostics and a
// constraint trend over nested subsets.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mcfisher/combined.hpp"
#include "mcfisher/ensembles.hpp"
#include "mcfisher/fisher.hpp"
#include "mcfisher/gaussian_fisher.hpp"
#include "mcfisher/linalg.hpp"
#include "mcfisher/poisson_fisher.hpp"
#include "mcfisher/random.hpp"
#include "mcfisher/toymodels.hpp"
#include "mcfisher/version.hpp"

namespace mcfisher {

enum class Likelihood { gaussian, poisson };

inline const char* to_string(Likelihood l) { return l == Likelihood::gaussian ? "gaussian" : "poisson"; }

inline Likelihood likelihood_from_string(const std::string& s) {
  if (s == "gaussian") return Likelihood::gaussian;
  if (s == "poisson") return Likelihood::poisson;
  throw validation_error("unknown likelihood '" + s + "' (expected gaussian or poisson)");
}

inline const char* to_string(CovarianceForm f) { return f == CovarianceForm::alpha_form ? "alpha" : "beta"; }

inline CovarianceForm covariance_form_from_string(const std::string& s) {
  if (s == "alpha") return CovarianceForm::alpha_form;
  if (s == "beta") return CovarianceForm::beta_form;
  throw validation_error("unknown covariance form '" + s + "' (expected alpha or beta)");
}

struct EstimateOptions {
  Likelihood likelihood = Likelihood::gaussian;
  double split_fraction = 0.5;
  std::size_t shuffles = 10;
  bool cov_derivs = false;
  bool hartlap = true;
  double threshold = 0.2;
  std::uint64_t seed = 0;
  bool seed_from_entropy = false;
  CovarianceForm covariance_form = CovarianceForm::alpha_form;
  bool trend = true;
  std::size_t workers = 0;  // 0 = hardware concurrency; results do not depend on it

  friend bool operator==(const EstimateOptions& a, const EstimateOptions& b) {
    return a.likelihood == b.likelihood && a.split_fraction == b.split_fraction && a.shuffles == b.shuffles &&
           a.cov_derivs == b.cov_derivs && a.hartlap == b.hartlap && a.threshold == b.threshold &&
           a.seed == b.seed && a.seed_from_entropy == b.seed_from_entropy &&
           a.covariance_form == b.covariance_form && a.trend == b.trend;
  }
};

struct EstimatorSummary {
  FisherMatrix fisher;
  Vector sigma;
  std::optional<SymMatrix> bias;
  std::optional<BiasDiagnostic> diagnostic;

  friend bool operator==(const EstimatorSummary&, const EstimatorSummary&) = default;
};

struct ForecastReport {
  int schema = 1;
  std::string version = kVersion;
  EstimateOptions options;
  std::vector<std::string> parameters;
  std::size_t data_dim = 0;
  std::size_t n_fiducial = 0;
  std::size_t n_deriv = 0;
  std::size_t n_alpha = 0;
  std::size_t n_beta = 0;
  EstimatorSummary standard;        // all simulations
  EstimatorSummary standard_alpha;  // alpha subsets, averaged over shuffles
  EstimatorSummary compressed;
  EstimatorSummary combined;
  std::vector<TrendPoint> trend;    // compressed constraints on nested subsets
  std::optional<TrendReport> trend_report;
  std::vector<ShuffleFailure> shuffle_failures;
  std::vector<std::string> notes;

  friend bool operator==(const ForecastReport&, const ForecastReport&) = default;
};

/// One alpha/beta split worth of estimates.
struct SplitEstimate {
  FisherMatrix standard_alpha;
  FisherMatrix compressed;
  FisherMatrix combined;
  SymMatrix compressed_bias;
};

namespace detail {

inline RowMatrix rows_of(const RowMatrix& m, const IndexSet& idx) { return RowMatrix(gather_rows(m, idx)); }

inline SplitAssignment fiducial_split(std::size_t n_fid, double fraction, const SplitAssignment& deriv_split) {
  return split(n_fid, fraction, derive_seed(deriv_split.seed, 1));
}

}  // namespace detail

inline SplitEstimate gaussian_split_estimate(const DataEnsemble& fid, const DerivativeEnsemble& dens,
                                             const SplitAssignment& s, const EstimateOptions& opts) {
  const GaussianOptions g{opts.cov_derivs, opts.hartlap};
  const bool beta_form = opts.covariance_form == CovarianceForm::beta_form;
  const IndexSet fid_all = detail::all_indices(fid.n());
  std::optional<SplitAssignment> fs;
  if (beta_form) fs = detail::fiducial_split(static_cast<std::size_t>(fid.n()), opts.split_fraction, s);
  const GaussianProducts alpha = gaussian_products(fid, fs ? fs->alpha : fid_all, dens, s.alpha, g);
  const GaussianCompression map = build_compression(alpha, dens.param_names, s.alpha);
  const GaussianProducts beta = beta_form
                                    ? gaussian_derivative_products(dens, s.beta, opts.cov_derivs, &fid, &fs->beta)
                                    : gaussian_derivative_products(dens, s.beta, opts.cov_derivs);
  const SymMatrix sigma = compressed_covariance(map, beta, opts.covariance_form);
  SplitEstimate out;
  out.compressed = compressed_fisher(compressed_mean_derivs(map, beta), sigma);
  out.compressed.n_used = s.beta.size();
  const DerivativeEnsemble t = compress_ensemble(dens, map);
  out.compressed_bias = compressed_bias(sigma, derivative_mean_cov(t, s.beta));
  out.standard_alpha = standard_fisher(alpha);
  out.combined = combined_fisher(out.standard_alpha, out.compressed);
  return out;
}

inline SplitEstimate poisson_split_estimate(const DataEnsemble& fid, const DerivativeEnsemble& dens,
                                            const SplitAssignment& s, const EstimateOptions& opts) {
  const SplitAssignment fs = detail::fiducial_split(static_cast<std::size_t>(fid.n()), opts.split_fraction, s);
  const PoissonProducts alpha = poisson_products(fid, fs.alpha, dens, s.alpha);
  const PoissonCompression map = build_poisson_compression(alpha, s.alpha);
  const RowMatrix t_fid = detail::rows_of(map.evaluate_rows(fid.data), fs.beta);
  const DerivativeEnsemble t = compress_ensemble(dens, map);
  std::vector<RowMatrix> t_plus;
  std::vector<RowMatrix> t_minus;
  for (std::size_t i = 0; i < t.p(); ++i) {
    t_plus.push_back(detail::rows_of(t.plus[i].data, s.beta));
    t_minus.push_back(detail::rows_of(t.minus[i].data, s.beta));
  }
  const CompressedSampleFisher cs = compressed_fisher_from_samples(t_fid, t_plus, t_minus, dens.steps, opts.hartlap);
  SplitEstimate out;
  out.compressed = cs.fisher;
  out.compressed_bias = compressed_bias(cs.covariance, derivative_mean_cov(t, s.beta));
  out.standard_alpha = poisson_standard_fisher(alpha);
  out.combined = combined_fisher(out.standard_alpha, out.compressed);
  return out;
}

namespace detail {

inline EstimatorSummary summarize(const FisherMatrix& f, const std::optional<SymMatrix>& bias, double threshold) {
  EstimatorSummary s;
  s.fisher = f;
  s.sigma = parameter_constraints(f);
  s.bias = bias;
  if (bias) s.diagnostic = bias_dominance_diagnostic(f, *bias, threshold);
  return s;
}

struct ShuffledEstimates {
  FisherMatrix standard_alpha;
  FisherMatrix compressed;
  FisherMatrix combined;
  SymMatrix compressed_bias;
  std::vector<ShuffleFailure> failures;
};

inline ShuffledEstimates shuffled_estimates(const DataEnsemble& fid, const DerivativeEnsemble& dens,
                                            const EstimateOptions& opts) {
  auto per_split = [&](const SplitAssignment& s) {
    return opts.likelihood == Likelihood::gaussian ? gaussian_split_estimate(fid, dens, s, opts)
                                                   : poisson_split_estimate(fid, dens, s, opts);
  };
  const auto outcome = run_shuffles<SplitEstimate>(dens.common_count(), opts.split_fraction, opts.shuffles,
                                                   opts.seed, per_split, opts.workers);
  std::vector<FisherMatrix> sa, comp, comb;
  std::vector<FisherMatrix> biases;
  for (const auto& e : outcome.successes()) {
    sa.push_back(e.standard_alpha);
    comp.push_back(e.compressed);
    comb.push_back(e.combined);
    FisherMatrix b;
    b.matrix = e.compressed_bias;
    biases.push_back(b);
  }
  ShuffledEstimates out;
  out.standard_alpha = average_fisher(sa);
  out.compressed = average_fisher(comp);
  out.combined = average_fisher(comb);
  out.compressed_bias = average_fisher(biases).matrix;
  out.failures = outcome.failures;
  return out;
}

// Permutation of [0, n) fixed by the seed.
inline IndexSet seeded_order(std::size_t n, std::uint64_t seed) {
  const CounterRng rng(seed);
  std::vector<std::pair<std::uint64_t, std::size_t>> keys(n);
  for (std::size_t i = 0; i < n; ++i) keys[i] = {rng.bits64(0, i), i};
  std::sort(keys.begin(), keys.end());
  IndexSet out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = keys[i].second;
  return out;
}

inline IndexSet first_sorted(const IndexSet& order, std::size_t k) {
  IndexSet out(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

/// Runs every estimator. Ensembles are taken by value and canonicalized, so
/// the row order of the inputs does not matter when seed ids are present.
inline ForecastReport estimate(DataEnsemble fiducial, DerivativeEnsemble dens, const EstimateOptions& opts) {
  fiducial.validate();
  for (const auto* side : {&dens.plus, &dens.minus}) {
    for (const auto& e : *side) e.validate();
  }
  // Pairing is checked on seed ids, so sort rows first.
  canonicalize(fiducial);
  canonicalize(dens);
  dens.validate();
  if (dens.p() < 1) throw validation_error("no parameters in the derivative ensemble");
  if (fiducial.d() != dens.d()) {
    throw validation_error("fiducial data dimension " + std::to_string(fiducial.d()) +
                           " differs from derivative data dimension " + std::to_string(dens.d()));
  }
  if (!(opts.threshold > 0.0)) throw validation_error("threshold must be positive");
  if (opts.likelihood == Likelihood::poisson) {
    validate_counts(fiducial);
    for (std::size_t i = 0; i < dens.p(); ++i) {
      validate_counts(dens.plus[i]);
      validate_counts(dens.minus[i]);
    }
  }

  ForecastReport r;
  r.options = opts;
  r.parameters = dens.param_names;
  r.data_dim = static_cast<std::size_t>(dens.d());
  r.n_fiducial = static_cast<std::size_t>(fiducial.n());
  r.n_deriv = dens.common_count();
  if (!dens.paired) r.notes.push_back("unpaired derivative ensembles: noise from sub-ensemble covariances");

  const IndexSet fid_all = detail::all_indices(fiducial.n());
  const IndexSet deriv_all = detail::all_indices(static_cast<Eigen::Index>(r.n_deriv));
  if (opts.likelihood == Likelihood::gaussian) {
    const GaussianProducts prod =
        gaussian_products(fiducial, fid_all, dens, deriv_all, GaussianOptions{opts.cov_derivs, opts.hartlap});
    std::optional<Matrix> cov_noise;
    std::optional<std::size_t> precision_samples;
    if (opts.cov_derivs) {
      cov_noise = covariance_derivative_noise(dens, deriv_all, prod.precision);
      if (static_cast<double>(r.n_fiducial) - static_cast<double>(r.data_dim) - 4.0 > 0.0) {
        precision_samples = r.n_fiducial;
      } else {
        r.notes.push_back("too few covariance simulations for the precision-noise bias term");
      }
    }
    const FisherMatrix f = standard_fisher(prod);
    r.standard = detail::summarize(f, standard_bias(prod, derivative_mean_cov(dens), cov_noise, precision_samples),
                                   opts.threshold);
  } else {
    const PoissonProducts prod = poisson_products(fiducial, fid_all, dens, deriv_all);
    r.standard = detail::summarize(poisson_standard_fisher(prod), poisson_standard_bias(prod, dens, deriv_all),
                                   opts.threshold);
  }

  const detail::ShuffledEstimates sh = detail::shuffled_estimates(fiducial, dens, opts);
  const SplitAssignment first = split(r.n_deriv, opts.split_fraction, shuffle_seed(opts.seed, 0));
  r.n_alpha = first.alpha.size();
  r.n_beta = first.beta.size();
  r.standard_alpha = detail::summarize(sh.standard_alpha, std::nullopt, opts.threshold);
  r.compressed = detail::summarize(sh.compressed, sh.compressed_bias, opts.threshold);
  r.combined = detail::summarize(sh.combined, std::nullopt, opts.threshold);
  r.shuffle_failures = sh.failures;
  for (const auto& f : sh.failures) r.notes.push_back("shuffle " + std::to_string(f.index) + " failed: " + f.message);
  if (sh.combined.floored) r.notes.push_back("eigenvalue floor hit in at least one shuffle");

  if (opts.trend) {
    const IndexSet deriv_order = detail::seeded_order(r.n_deriv, derive_seed(opts.seed, 2));
    const IndexSet fid_order = detail::seeded_order(r.n_fiducial, derive_seed(opts.seed, 3));
    for (int k = 1; k <= 3; ++k) {
      const auto nd = static_cast<std::size_t>(std::llround(static_cast<double>(r.n_deriv) * k / 4.0));
      try {
        const DerivativeEnsemble sub = subset(dens, detail::first_sorted(deriv_order, nd));
        const DataEnsemble sub_fid =
            opts.likelihood == Likelihood::poisson
                ? subset(fiducial, detail::first_sorted(
                                       fid_order, static_cast<std::size_t>(
                                                      std::llround(static_cast<double>(r.n_fiducial) * k / 4.0))))
                : fiducial;
        const auto level = detail::shuffled_estimates(sub_fid, sub, opts);
        r.trend.push_back({nd, parameter_constraints(level.compressed)});
      } catch (const Error& e) {
        r.notes.push_back("trend level " + std::to_string(nd) + " skipped: " + e.what());
      }
    }
    r.trend.push_back({r.n_deriv, r.compressed.sigma});
    if (r.trend.size() >= 3) {
      r.trend_report = convergence_trend(r.trend);
    } else {
      r.notes.push_back("too few trend levels for a convergence classification");
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Toy-model trials.

inline EstimateOptions toy_estimate_options(const ToyConfig& config) {
  EstimateOptions o;
  o.likelihood = config.model == ToyModel::gaussian ? Likelihood::gaussian : Likelihood::poisson;
  o.split_fraction = config.split_fraction;
  o.trend = false;
  return o;
}

/// One trial: fresh toy ensembles with n_deriv derivative simulations (and
/// n_cov fiducial ones for the Gaussian model, n_deriv for Poisson), then the
/// full estimation.
inline ForecastReport toy_trial(const ToyConfig& config, std::size_t n_deriv, std::uint64_t trial_seed,
                                EstimateOptions opts) {
  const std::size_t n_fid = config.model == ToyModel::gaussian ? config.n_cov : n_deriv;
  ToyEnsembles ens = toy_ensembles(config, n_fid, n_deriv, trial_seed);
  opts.seed = derive_seed(trial_seed, 0x5348'5546ULL);
  return estimate(std::move(ens.fiducial), std::move(ens.derivatives), opts);
}

inline std::uint64_t trial_seed(std::uint64_t seed, std::size_t n, std::size_t trial) {
  return derive_seed(derive_seed(seed, n), trial);
}

}  // namespace mcfisher
