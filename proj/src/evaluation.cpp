#include "rgan/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "rgan/random.hpp"

namespace rgan {

Estimate mean_utility(const Vec& terminal, const PowerUtility& u) {
  Estimate e;
  e.n = static_cast<std::size_t>(terminal.size());
  if (e.n == 0) throw std::invalid_argument("mean_utility: no samples");
  const Vec vals = u(terminal);
  for (Eigen::Index i = 0; i < terminal.size(); ++i) e.defaults += terminal(i) > 0.0 ? 0 : 1;
  if (!vals.allFinite()) {
    e.value = -std::numeric_limits<double>::infinity();
    e.std_error = std::numeric_limits<double>::quiet_NaN();
    return e;
  }
  e.value = vals.mean();
  if (e.n > 1) {
    const double var = (vals.array() - e.value).square().sum() / static_cast<double>(e.n - 1);
    e.std_error = std::sqrt(var / static_cast<double>(e.n));
  }
  return e;
}

Estimate expected_utility(Policy& policy, const PathBatch& paths, const EvalSetup& setup) {
  const WealthLedger led = roll_out(policy, paths, setup.grid, setup.x0, setup.rate, setup.costs);
  return mean_utility(led.terminal(), setup.utility);
}

Estimate expected_utility(Policy& policy, const Scenario& scenario, std::size_t n_paths, const EvalSetup& setup,
                          std::uint64_t seed) {
  const PathBatch paths = simulate_scenario(scenario, setup.grid, setup.s0, n_paths, seed);
  return expected_utility(policy, paths, setup);
}

PoolResult pooled_min_utility(Policy& policy, const std::vector<Scenario>& pool, std::size_t n_paths,
                              const EvalSetup& setup, std::uint64_t seed, const NoiseIncrements* shared) {
  if (shared != nullptr) n_paths = shared->n_paths();
  if (pool.empty()) throw std::invalid_argument("pooled_min_utility: empty pool");
  PoolResult r;
  r.min = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < pool.size(); ++j) {
    const bool euler = std::holds_alternative<ReferenceMarket>(pool[j]) || std::holds_alternative<NoisyMarketScenario>(pool[j]);
    const PathBatch paths =
        simulate_scenario(pool[j], setup.grid, setup.s0, n_paths, derive_seed(seed, j), euler ? shared : nullptr);
    Estimate e = expected_utility(policy, paths, setup);
    if (e.value < r.min || j == 0) {
      r.min = e.value;
      r.argmin = j;
    }
    r.per_scenario.push_back(e);
  }
  return r;
}

RelativeError relative_error(Policy& candidate, Policy& benchmark, const PathBatch& paths, const EvalSetup& setup) {
  RelativeError r;
  r.benchmark = expected_utility(benchmark, paths, setup);
  r.candidate = expected_utility(candidate, paths, setup);
  const double diff = r.benchmark.value - r.candidate.value;
  if (std::abs(r.benchmark.value) < 1e-12) {
    r.absolute = true;
    r.value = diff;
  } else {
    r.value = diff / std::abs(r.benchmark.value);
  }
  return r;
}

Vec discounted(const Vec& terminal, double rate, double horizon) { return terminal * std::exp(-rate * horizon); }

double value_at_risk(const Vec& terminal, double alpha, double rate, double horizon, double x0) {
  if (terminal.size() == 0) throw std::invalid_argument("value_at_risk: no samples");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("value_at_risk: alpha outside [0, 1]");
  Vec d = discounted(terminal, rate, horizon);
  std::vector<double> v(d.data(), d.data() + d.size());
  const auto k = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(v.size() - 1)));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return x0 - v[k];
}

HistogramReport histogram_report(const Vec& samples, std::size_t bins) {
  if (samples.size() == 0) throw std::invalid_argument("histogram_report: no samples");
  if (bins == 0) throw std::invalid_argument("histogram_report: bins must be positive");
  if (!samples.allFinite()) throw std::invalid_argument("histogram_report: non-finite samples");
  HistogramReport h;
  const double n = static_cast<double>(samples.size());
  h.mean = samples.mean();
  const Eigen::ArrayXd c = samples.array() - h.mean;
  const double m2 = c.square().sum() / n;
  const double m3 = c.cube().sum() / n;
  h.std = std::sqrt(m2);
  h.skew = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  double lo = samples.minCoeff(), hi = samples.maxCoeff();
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double w = (hi - lo) / static_cast<double>(bins);
  for (std::size_t k = 0; k <= bins; ++k) h.edges.push_back(lo + w * static_cast<double>(k));
  h.edges.back() = hi;
  h.counts.assign(bins, 0);
  for (Eigen::Index i = 0; i < samples.size(); ++i) {
    auto k = static_cast<std::size_t>((samples(i) - lo) / w);
    h.counts[std::min(k, bins - 1)]++;
  }
  return h;
}

void write_histogram_csv(const std::string& path, const HistogramReport& h) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_histogram_csv: cannot open " + path);
  os.precision(17);
  os << "bin_left,bin_right,count\n";
  for (std::size_t k = 0; k < h.counts.size(); ++k) os << h.edges[k] << ',' << h.edges[k + 1] << ',' << h.counts[k] << '\n';
}

}  // namespace rgan
