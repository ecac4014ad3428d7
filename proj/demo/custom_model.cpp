// Plugging in your own simulator: a straight line y = a + b x observed at 20
// points with unit Gaussian noise. Any simulator that fills DataEnsemble rows
// works the same way.

#include <cstdio>
#include <random>

#include "mcfisher/mcfisher.hpp"

using namespace mcfisher;

namespace {

constexpr int kPoints = 20;

DataEnsemble simulate(double a, double b, int n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise;
  DataEnsemble e;
  e.data.resize(n, kPoints);
  for (int r = 0; r < n; ++r) {
    gen.seed(seed + static_cast<std::uint64_t>(r));  // one seed per realization
    e.seed_ids.push_back(r);
    for (int k = 0; k < kPoints; ++k) e.data(r, k) = a + b * (k / double(kPoints)) + noise(gen);
  }
  return e;
}

}  // namespace

int main() {
  const double a = 1.0, b = 2.0, step = 0.1;
  const int n_deriv = 200;

  DerivativeEnsemble dens;
  dens.param_names = {"a", "b"};
  dens.steps = {step, step};
  dens.paired = true;  // plus and minus realizations share seeds
  dens.plus = {simulate(a + step, b, n_deriv, 1000), simulate(a, b + step, n_deriv, 1000)};
  dens.minus = {simulate(a - step, b, n_deriv, 1000), simulate(a, b - step, n_deriv, 1000)};

  EstimateOptions opts;
  opts.seed = 3;
  const ForecastReport r = estimate(simulate(a, b, 2000, 5000), std::move(dens), opts);

  // Exact: F = J^T J with J rows (1, x_k).
  double s0 = 0, s1 = 0, s2 = 0;
  for (int k = 0; k < kPoints; ++k) {
    const double x = k / double(kPoints);
    s0 += 1;
    s1 += x;
    s2 += x * x;
  }
  Matrix exact(2, 2);
  exact << s0, s1, s1, s2;
  FisherMatrix truth;
  truth.matrix = SymMatrix(exact);
  const Vector sigma = parameter_constraints(truth);

  for (Eigen::Index i = 0; i < 2; ++i) {
    std::printf("%s: exact %.4f  standard %.4f  compressed %.4f  combined %.4f\n",
                r.parameters[static_cast<std::size_t>(i)].c_str(), sigma(i), r.standard.sigma(i),
                r.compressed.sigma(i), r.combined.sigma(i));
  }
  std::printf("standard %s, compressed %s\n", to_string(r.standard.diagnostic->verdict),
              to_string(r.compressed.diagnostic->verdict));
}
