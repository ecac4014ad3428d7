#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "cli_runner.hpp"
#include "mcfisher/report.hpp"
#include "mcfisher/toymodels.hpp"

using namespace mcfisher;
using mcfisher::test::fresh_dir;
using mcfisher::test::run_cli;
using mcfisher::test::slurp;
using nlohmann::json;

namespace {

std::string toy(const std::string& dir, const std::string& flags) {
  const auto r = run_cli("toy " + flags + " --out-dir " + dir);
  EXPECT_EQ(r.exit_code, 0) << r.out;
  return dir + "/manifest.json";
}

}  // namespace

TEST(Cli, GaussianEndToEndAgainstAnalytic) {
  const auto dir = fresh_dir("gauss").string();
  const std::string manifest = toy(dir, "--model gaussian --n-deriv 500 --seed 3");
  const auto r = run_cli("estimate --manifest " + manifest + " --split-fraction 0.9 --seed 4 --out " + dir + "/r.json");
  ASSERT_EQ(r.exit_code, 0) << r.out;
  const ForecastReport rep = load_report(dir + "/r.json");
  const Vector truth = parameter_constraints(toy_analytic_fisher(ToyConfig{}));
  for (Eigen::Index i = 0; i < 3; ++i) {
    const double ratio = rep.combined.sigma(i) / truth(i);
    EXPECT_GE(ratio, 0.95) << i;
    EXPECT_LE(ratio, 1.05) << i;
  }
}

TEST(Cli, HartlapFailureIsExitTwo) {
  const auto dir = fresh_dir("hartlap").string();
  const std::string manifest = toy(dir, "--model gaussian --n-deriv 10 --n-cov 102 --seed 1");
  const auto r = run_cli("estimate --manifest " + manifest + " --seed 1");
  EXPECT_EQ(r.exit_code, 2);
  const json j = json::parse(r.out);
  EXPECT_EQ(j["error"]["kind"], "validation");
  EXPECT_NE(j["error"]["message"].get<std::string>().find("Hartlap factor nonpositive"), std::string::npos);
}

TEST(Cli, PoissonPath) {
  const auto dir = fresh_dir("poisson").string();
  const std::string manifest = toy(dir, "--model poisson --n-deriv 3000 --seed 2");
  const auto r = run_cli("estimate --manifest " + manifest + " --likelihood poisson --seed 5");
  ASSERT_EQ(r.exit_code, 0) << r.out;
  const ForecastReport rep = parse_report(r.out);
  EXPECT_EQ(rep.options.likelihood, Likelihood::poisson);
  EXPECT_EQ(rep.n_fiducial, 3000u);
  const auto csv = run_cli("estimate --manifest " + manifest + " --likelihood poisson --seed 5 --format csv");
  EXPECT_EQ(csv.out.rfind("estimator,parameter,", 0), 0u);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli("").exit_code, 2);
  EXPECT_EQ(run_cli("estimate").exit_code, 2);
  EXPECT_EQ(run_cli("diagnose").exit_code, 2);
  EXPECT_EQ(run_cli("estimate --manifest /nonexistent/m.json").exit_code, 2);
  EXPECT_EQ(run_cli("convergence --n-list 100,50").exit_code, 2);
  EXPECT_EQ(run_cli("convergence --trials 0").exit_code, 2);
  EXPECT_EQ(run_cli("estimate --manifest x --likelihood cauchy").exit_code, 2);
  EXPECT_EQ(run_cli("--version").exit_code, 0);
}

TEST(Cli, EntropySeedIsRecorded) {
  const auto dir = fresh_dir("entropy").string();
  const std::string manifest = toy(dir, "--model gaussian --n-deriv 20 --n-cov 300 --seed 1");
  const auto r = run_cli("estimate --manifest " + manifest + " --shuffles 2");
  ASSERT_EQ(r.exit_code, 0);
  const ForecastReport rep = parse_report(r.out);
  EXPECT_TRUE(rep.options.seed_from_entropy);
  const auto again = run_cli("estimate --manifest " + manifest + " --shuffles 2 --seed " +
                             std::to_string(rep.options.seed));
  ForecastReport replay = parse_report(again.out);
  replay.options.seed_from_entropy = true;
  EXPECT_EQ(replay, rep);
}

TEST(Cli, DiagnoseVerdicts) {
  const auto dir = fresh_dir("diagnose").string();
  // Tiny Poisson run: the compressed estimate is noise dominated.
  const std::string small = toy(dir + "/small", "--model poisson --n-deriv 300 --seed 7");
  const auto biased = run_cli("diagnose --manifest " + small + " --likelihood poisson --seed 1");
  ASSERT_EQ(biased.exit_code, 0) << biased.out;
  EXPECT_EQ(json::parse(biased.out)["compressed"]["verdict"], "BIASED");

  // Gaussian toy with many simulations: both diagnostics pass.
  const std::string big = toy(dir + "/big", "--model gaussian --n-deriv 1000 --seed 8");
  const auto est = run_cli("estimate --manifest " + big + " --split-fraction 0.9 --seed 2 --out " + dir + "/big.json");
  ASSERT_EQ(est.exit_code, 0);
  const auto trusted = run_cli("diagnose --report " + dir + "/big.json");
  const json jt = json::parse(trusted.out);
  EXPECT_EQ(jt["standard"]["verdict"], "TRUSTED");
  EXPECT_EQ(jt["compressed"]["verdict"], "TRUSTED");
  EXPECT_TRUE(jt["trend"].is_object());

  // Zero bias matrices give ratio 0.
  ForecastReport rep = load_report(dir + "/big.json");
  rep.standard.bias = SymMatrix::zero(3);
  rep.compressed.bias = SymMatrix::zero(3);
  std::ofstream(dir + "/zero.json") << serialize(rep);
  const json jz = json::parse(run_cli("diagnose --report " + dir + "/zero.json").out);
  EXPECT_EQ(jz["standard"]["verdict"], "TRUSTED");
  EXPECT_EQ(jz["standard"]["max_ratio"], 0.0);
  EXPECT_EQ(jz["compressed"]["max_ratio"], 0.0);
}

TEST(Cli, ConvergenceTable) {
  const auto r = run_cli("convergence --model gaussian --n-list 30,60 --trials 2 --shuffles 2 --seed 3");
  ASSERT_EQ(r.exit_code, 0);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("# seed=3", 0), 0u);
  std::getline(in, line);
  EXPECT_EQ(line.rfind("n,trial,estimator", 0), 0u);
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 2 * 2 * 3);
}
