#pragma once

#include <string>
#include <vector>

#include "rgan/market_sim.hpp"
#include "rgan/portfolio.hpp"
#include "rgan/utility_penalty.hpp"

namespace rgan {

struct EvalSetup {
  TimeGrid grid;
  double rate = 0.0;
  Vec s0;
  double x0 = 1.0;
  CostSpec costs;
  PowerUtility utility;
};

/// Monte Carlo estimate. value is -inf when any path defaulted and the
/// utility is unbounded below; std_error is then NaN.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
  std::size_t defaults = 0;
};

Estimate mean_utility(const Vec& terminal, const PowerUtility& u);

Estimate expected_utility(Policy& policy, const PathBatch& paths, const EvalSetup& setup);
Estimate expected_utility(Policy& policy, const Scenario& scenario, std::size_t n_paths, const EvalSetup& setup,
                          std::uint64_t seed);

struct PoolResult {
  double min = 0.0;
  std::size_t argmin = 0;
  std::vector<Estimate> per_scenario;
};

/// Scenario j is simulated with seed derive_seed(seed, j), or from `shared`
/// increments when given (Euler-type scenarios), so two policies evaluated with
/// the same seed see identical paths.
PoolResult pooled_min_utility(Policy& policy, const std::vector<Scenario>& pool, std::size_t n_paths,
                              const EvalSetup& setup, std::uint64_t seed, const NoiseIncrements* shared = nullptr);

struct RelativeError {
  double value = 0.0;
  bool absolute = false;  // true when the benchmark utility is ~0 and value is a plain difference
  Estimate benchmark;
  Estimate candidate;
};

/// (E(benchmark) - E(candidate)) / |E(benchmark)| on one shared path batch.
RelativeError relative_error(Policy& candidate, Policy& benchmark, const PathBatch& paths, const EvalSetup& setup);

Vec discounted(const Vec& terminal, double rate, double horizon);

/// x0 - lower empirical alpha-quantile of e^{-rT} X_T.
double value_at_risk(const Vec& terminal, double alpha, double rate, double horizon, double x0);

struct HistogramReport {
  double mean = 0.0;
  double std = 0.0;
  double skew = 0.0;
  std::vector<double> edges;  // bins + 1
  std::vector<std::size_t> counts;
};

HistogramReport histogram_report(const Vec& samples, std::size_t bins);
void write_histogram_csv(const std::string& path, const HistogramReport& h);

}  // namespace rgan
