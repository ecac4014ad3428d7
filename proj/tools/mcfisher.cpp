// mcfisher: Fisher forecasts from simulations.
//
//   mcfisher toy          generate toy-model ensembles and a manifest
//   mcfisher estimate     standard, compressed and combined estimates for a manifest
//   mcfisher convergence  toy-model sweep over simulation counts, as CSV
//   mcfisher diagnose     bias-dominance and convergence verdicts
//
// Errors go to stdout as {"error": {"kind", "message"}}; exit code 2 for bad
// input, 1 for numerical failures.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mcfisher/mcfisher.hpp"

namespace fs = std::filesystem;
using namespace mcfisher;

namespace {

bool on_off(const std::string& v) { return v == "on"; }

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& seed, bool& from_entropy) {
  from_entropy = !seed.has_value();
  if (seed) return *seed;
  std::random_device rd;
  return (std::uint64_t{rd()} << 32) ^ rd();
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw validation_error("cannot write " + out_path);
  out << text;
}

std::string fmt(double v) { return detail::format_double(v); }

std::vector<std::size_t> parse_n_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(tok, &pos);
      if (pos != tok.size() || v < 1) throw std::invalid_argument(tok);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::logic_error&) {
      throw validation_error("--n-list: cannot parse '" + tok + "' as a positive count");
    }
  }
  if (out.empty()) throw validation_error("--n-list is empty");
  for (std::size_t k = 1; k < out.size(); ++k) {
    if (out[k] <= out[k - 1]) throw validation_error("--n-list must be strictly ascending");
  }
  return out;
}

// ---------------------------------------------------------------------------

struct EstimateFlags {
  std::string manifest;
  std::string likelihood = "gaussian";
  double split_fraction = 0.5;
  std::size_t shuffles = 10;
  std::string cov_derivs = "off";
  std::string hartlap = "on";
  double threshold = 0.2;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "json";
  std::string covariance_form = "alpha";
  std::size_t workers = 0;

  void attach(CLI::App* cmd, bool manifest_required) {
    auto* m = cmd->add_option("--manifest", manifest, "Manifest JSON describing the ensembles");
    if (manifest_required) m->required();
    cmd->add_option("--likelihood", likelihood, "Likelihood family")->check(CLI::IsMember({"gaussian", "poisson"}));
    cmd->add_option("--split-fraction", split_fraction, "Fraction of simulations used for the compression");
    cmd->add_option("--shuffles", shuffles, "Number of shuffled alpha/beta splits to average");
    cmd->add_option("--cov-derivs", cov_derivs, "Include covariance derivatives")->check(CLI::IsMember({"on", "off"}));
    cmd->add_option("--hartlap", hartlap, "Hartlap-correct estimated precisions")->check(CLI::IsMember({"on", "off"}));
    cmd->add_option("--threshold", threshold, "Bias-dominance threshold");
    cmd->add_option("--seed", seed, "Seed for splits and shuffles (default: from entropy)");
    cmd->add_option("--out", out, "Output file (default: stdout)");
    cmd->add_option("--covariance-form", covariance_form, "Compressed covariance form")
        ->check(CLI::IsMember({"alpha", "beta"}));
    cmd->add_option("--workers", workers, "Worker threads (0: all cores)");
  }

  EstimateOptions options() const {
    EstimateOptions o;
    o.likelihood = likelihood_from_string(likelihood);
    o.split_fraction = split_fraction;
    o.shuffles = shuffles;
    o.cov_derivs = on_off(cov_derivs);
    o.hartlap = on_off(hartlap);
    o.threshold = threshold;
    o.seed = resolve_seed(seed, o.seed_from_entropy);
    o.covariance_form = covariance_form_from_string(covariance_form);
    o.workers = workers;
    return o;
  }
};

ForecastReport run_estimate(const EstimateFlags& flags) {
  const Manifest m = load_manifest(flags.manifest);
  ManifestEnsembles ens = load_manifest_ensembles(m);
  return estimate(std::move(ens.fiducial), std::move(ens.derivatives), flags.options());
}

std::string report_csv(const ForecastReport& r) {
  std::ostringstream out;
  out << "estimator,parameter,fisher_diag,sigma,bias_diag,verdict\n";
  auto rows = [&](const char* name, const EstimatorSummary& s) {
    for (std::size_t i = 0; i < r.parameters.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      out << name << ',' << r.parameters[i] << ',' << fmt(s.fisher.matrix(k, k)) << ',' << fmt(s.sigma(k)) << ','
          << (s.bias ? fmt((*s.bias)(k, k)) : "") << ',' << (s.diagnostic ? to_string(s.diagnostic->verdict) : "")
          << '\n';
    }
  };
  rows("standard", r.standard);
  rows("compressed", r.compressed);
  rows("combined", r.combined);
  return out.str();
}

int cmd_estimate(const EstimateFlags& flags) {
  if (flags.format != "json" && flags.format != "csv") throw validation_error("--format must be json or csv");
  const ForecastReport r = run_estimate(flags);
  emit(flags.format == "json" ? serialize(r) + "\n" : report_csv(r), flags.out);
  return 0;
}

// ---------------------------------------------------------------------------

struct ToyFlags {
  std::string model = "gaussian";
  std::size_t n_deriv = 100;
  std::optional<std::size_t> n_cov;
  std::optional<double> step;
  std::optional<std::string> matched;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

int cmd_toy(const ToyFlags& flags) {
  ToyConfig c = ToyConfig::defaults(toy_model_from_string(flags.model));
  if (flags.step) c.steps.assign(3, *flags.step);
  if (flags.matched) c.seed_matched = on_off(*flags.matched);
  const std::size_t n_fid = flags.n_cov ? *flags.n_cov : (c.model == ToyModel::gaussian ? c.n_cov : flags.n_deriv);
  bool from_entropy = false;
  const std::uint64_t seed = resolve_seed(flags.seed, from_entropy);
  const ToyEnsembles ens = toy_ensembles(c, n_fid, flags.n_deriv, seed);

  const fs::path dir(flags.out_dir);
  fs::create_directories(dir);
  Manifest m;
  m.fiducial = "fiducial.csv";
  m.data_dim = ens.fiducial.d();
  save_ensemble(dir / m.fiducial, ens.fiducial);
  for (std::size_t i = 0; i < ens.derivatives.p(); ++i) {
    ManifestParameter p;
    p.name = ens.derivatives.param_names[i];
    p.step = ens.derivatives.steps[i];
    p.plus = p.name + "_plus.csv";
    p.minus = p.name + "_minus.csv";
    p.paired = ens.derivatives.paired;
    save_ensemble(dir / p.plus, ens.derivatives.plus[i]);
    save_ensemble(dir / p.minus, ens.derivatives.minus[i]);
    m.parameters.push_back(p);
  }
  std::ofstream(dir / "manifest.json") << nlohmann::json(m).dump(2) << "\n";

  nlohmann::json summary{{"manifest", (dir / "manifest.json").generic_string()},
                         {"model", to_string(c.model)},
                         {"seed", seed},
                         {"seed_from_entropy", from_entropy},
                         {"n_fiducial", n_fid},
                         {"n_deriv", flags.n_deriv},
                         {"paired", c.seed_matched}};
  std::cout << summary.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct ConvergenceFlags {
  std::string model = "gaussian";
  std::string n_list = "50,100,200,400,800";
  std::size_t trials = 10;
  std::size_t shuffles = 10;
  std::optional<double> split_fraction;
  std::optional<std::size_t> n_cov;
  std::string cov_derivs = "off";
  double threshold = 0.2;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t workers = 0;
};

int cmd_convergence(const ConvergenceFlags& flags) {
  if (flags.trials < 1) throw validation_error("--trials must be at least 1");
  ToyConfig c = ToyConfig::defaults(toy_model_from_string(flags.model));
  if (flags.split_fraction) c.split_fraction = *flags.split_fraction;
  if (flags.n_cov) c.n_cov = *flags.n_cov;
  const std::vector<std::size_t> ns = parse_n_list(flags.n_list);
  bool from_entropy = false;
  const std::uint64_t seed = resolve_seed(flags.seed, from_entropy);
  EstimateOptions o = toy_estimate_options(c);
  o.shuffles = flags.shuffles;
  o.cov_derivs = on_off(flags.cov_derivs);
  o.threshold = flags.threshold;
  o.workers = 1;  // parallelism is across trials

  const FisherMatrix truth = toy_analytic_fisher(c, o.cov_derivs);
  const Vector truth_sigma = parameter_constraints(truth);

  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t n : ns) {
    for (std::size_t t = 0; t < flags.trials; ++t) jobs.emplace_back(n, t);
  }
  std::vector<std::string> rows(jobs.size());
  const auto errors = parallel_for(jobs.size(), flags.workers, [&](std::size_t j) {
    const auto [n, t] = jobs[j];
    const ForecastReport r = toy_trial(c, n, trial_seed(seed, n, t), o);
    std::ostringstream out;
    auto row = [&](const char* name, const EstimatorSummary& s) {
      out << n << ',' << t << ',' << name;
      for (Eigen::Index i = 0; i < 3; ++i) out << ',' << fmt(s.fisher.matrix(i, i) / truth.matrix(i, i));
      for (Eigen::Index i = 0; i < 3; ++i) out << ',' << fmt(s.sigma(i) / truth_sigma(i));
      for (Eigen::Index i = 0; i < 3; ++i) out << ',' << (s.bias ? fmt((*s.bias)(i, i)) : "");
      out << ',' << (s.diagnostic ? fmt(s.diagnostic->max_ratio) : "") << ','
          << (s.diagnostic ? to_string(s.diagnostic->verdict) : "") << '\n';
    };
    row("standard", r.standard);
    row("compressed", r.compressed);
    row("combined", r.combined);
    rows[j] = out.str();
  });
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::ostringstream csv;
  csv << "# seed=" << seed << ",model=" << to_string(c.model) << ",split_fraction=" << fmt(c.split_fraction)
      << ",shuffles=" << o.shuffles << ",cov_derivs=" << flags.cov_derivs << '\n';
  csv << "n,trial,estimator,fisher_ratio_alpha,fisher_ratio_beta,fisher_ratio_gamma,"
         "sigma_ratio_alpha,sigma_ratio_beta,sigma_ratio_gamma,bias_alpha,bias_beta,bias_gamma,"
         "bias_ratio,verdict\n";
  for (const auto& r : rows) csv << r;
  emit(csv.str(), flags.out);
  return 0;
}

// ---------------------------------------------------------------------------

struct DiagnoseFlags {
  std::string report;
  EstimateFlags estimate;
  std::optional<double> threshold;
};

nlohmann::json diagnose_json(const ForecastReport& r, double threshold, std::ostream& human) {
  nlohmann::json out{{"threshold", threshold}};
  auto one = [&](const char* name, const EstimatorSummary& s) {
    if (!s.bias) return;
    const BiasDiagnostic d = bias_dominance_diagnostic(s.fisher, *s.bias, threshold);
    out[name] = {{"verdict", to_string(d.verdict)}, {"max_ratio", d.max_ratio}, {"ratios", vector_to_json(d.ratios)}};
    human << name << ": " << to_string(d.verdict) << " (max |second|/|first| = " << fmt(d.max_ratio)
          << ", threshold " << fmt(threshold) << ")\n";
  };
  one("standard", r.standard);
  one("compressed", r.compressed);
  if (r.trend.size() >= 3) {
    const TrendReport t = convergence_trend(r.trend);
    out["trend"] = t;
    for (std::size_t i = 0; i < t.parameters.size(); ++i) {
      const auto& p = t.parameters[i];
      human << "trend " << (i < r.parameters.size() ? r.parameters[i] : std::to_string(i)) << ": "
            << to_string(p.trend) << (p.converging ? ", converging" : ", not converging")
            << (p.flagged ? " [flagged]" : "") << '\n';
    }
  } else {
    out["trend"] = nullptr;
    human << "trend: not available (fewer than 3 levels in the report)\n";
  }
  return out;
}

int cmd_diagnose(const DiagnoseFlags& flags) {
  if (flags.report.empty() == flags.estimate.manifest.empty()) {
    throw validation_error("diagnose needs exactly one of --report or --manifest");
  }
  const ForecastReport r = flags.report.empty() ? run_estimate(flags.estimate) : load_report(flags.report);
  const double threshold = flags.threshold ? *flags.threshold : r.options.threshold;
  const nlohmann::json out = diagnose_json(r, threshold, std::cerr);
  emit(out.dump(2) + "\n", flags.estimate.out);
  return 0;
}

int report_error(ErrorKind kind, const std::string& message) {
  const nlohmann::json j{
      {"error", {{"kind", kind == ErrorKind::validation ? "validation" : "numeric"}, {"message", message}}}};
  std::cout << j.dump(2) << "\n";
  return kind == ErrorKind::validation ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fisher forecasts from simulations"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  ToyFlags toy;
  auto* c_toy = app.add_subcommand("toy", "Generate toy-model ensembles and a manifest");
  c_toy->add_option("--model", toy.model)->check(CLI::IsMember({"gaussian", "poisson"}));
  c_toy->add_option("--n-deriv", toy.n_deriv, "Realizations per +/- ensemble");
  c_toy->add_option("--n-cov", toy.n_cov, "Fiducial realizations");
  c_toy->add_option("--step", toy.step, "Finite-difference step for every parameter");
  c_toy->add_option("--matched", toy.matched, "Seed-matched +/- ensembles")->check(CLI::IsMember({"on", "off"}));
  c_toy->add_option("--seed", toy.seed);
  c_toy->add_option("--out-dir", toy.out_dir)->required();

  EstimateFlags est;
  auto* c_est = app.add_subcommand("estimate", "Run the estimators on a manifest");
  est.attach(c_est, true);
  c_est->add_option("--format", est.format)->check(CLI::IsMember({"json", "csv"}));

  ConvergenceFlags conv;
  auto* c_conv = app.add_subcommand("convergence", "Toy-model sweep over simulation counts");
  c_conv->add_option("--model", conv.model)->check(CLI::IsMember({"gaussian", "poisson"}));
  c_conv->add_option("--n-list", conv.n_list, "Ascending comma-separated derivative simulation counts");
  c_conv->add_option("--trials", conv.trials);
  c_conv->add_option("--shuffles", conv.shuffles);
  c_conv->add_option("--split-fraction", conv.split_fraction);
  c_conv->add_option("--n-cov", conv.n_cov, "Fiducial realizations (Gaussian model)");
  c_conv->add_option("--cov-derivs", conv.cov_derivs)->check(CLI::IsMember({"on", "off"}));
  c_conv->add_option("--threshold", conv.threshold);
  c_conv->add_option("--seed", conv.seed);
  c_conv->add_option("--out", conv.out);
  c_conv->add_option("--workers", conv.workers);

  DiagnoseFlags diag;
  auto* c_diag = app.add_subcommand("diagnose", "Bias-dominance and convergence verdicts");
  c_diag->add_option("--report", diag.report, "Report JSON written by estimate");
  diag.estimate.attach(c_diag, false);
  c_diag->remove_option(c_diag->get_option("--threshold"));
  c_diag->add_option("--threshold", diag.threshold, "Bias-dominance threshold (default: the report's)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report_error(ErrorKind::validation, e.what());
  }

  try {
    if (c_toy->parsed()) return cmd_toy(toy);
    if (c_est->parsed()) return cmd_estimate(est);
    if (c_conv->parsed()) return cmd_convergence(conv);
    if (c_diag->parsed()) return cmd_diagnose(diag);
  } catch (const Error& e) {
    return report_error(e.kind(), e.what());
  } catch (const std::exception& e) {
    return report_error(ErrorKind::numeric, e.what());
  }
  return 0;
}
