// Estimates the Gaussian toy model's Fisher matrix from 100 derivative
// simulations per parameter and compares the three estimators with the exact
// answer.

#include <cstdio>

#include "mcfisher/mcfisher.hpp"

using namespace mcfisher;

int main() {
  const ToyConfig config = ToyConfig::gaussian_default();
  ToyEnsembles ens = toy_ensembles(config, config.n_cov, 100, /*seed=*/42);

  EstimateOptions opts = toy_estimate_options(config);
  opts.seed = 7;
  const ForecastReport r = estimate(std::move(ens.fiducial), std::move(ens.derivatives), opts);

  const Vector truth = parameter_constraints(toy_analytic_fisher(config));
  std::printf("%-8s %10s %10s %10s %10s\n", "param", "exact", "standard", "compressed", "combined");
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    std::printf("%-8s %10.4f %10.4f %10.4f %10.4f\n", r.parameters[static_cast<std::size_t>(i)].c_str(), truth(i),
                r.standard.sigma(i), r.compressed.sigma(i), r.combined.sigma(i));
  }
  std::printf("standard: %s, compressed: %s\n", to_string(r.standard.diagnostic->verdict),
              to_string(r.compressed.diagnostic->verdict));
}
