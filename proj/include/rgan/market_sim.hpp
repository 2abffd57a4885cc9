#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "rgan/common.hpp"
#include "rgan/time_grid.hpp"

namespace rgan {

struct ReferenceMarket {
  Vec drift;  // mu tilde, per year
  Mat vol;    // sigma tilde, lower triangular, per sqrt(year)
  double rate = 0.0;
  Vec s0;

  std::size_t dim() const { return static_cast<std::size_t>(drift.size()); }
  Mat cov() const { return vol * vol.transpose(); }
  void validate() const;
};

/// Standard normal draws, stored per step as B x d blocks. Scaling by sqrt(dt)
/// happens inside the simulators.
struct NoiseIncrements {
  std::vector<Mat> z;
  std::uint64_t seed = 0;

  static NoiseIncrements generate(std::size_t n_paths, std::size_t n_steps, std::size_t dim, std::uint64_t seed);
  static NoiseIncrements zeros(std::size_t n_paths, std::size_t n_steps, std::size_t dim);

  std::size_t n_paths() const { return z.empty() ? 0 : static_cast<std::size_t>(z.front().rows()); }
  std::size_t n_steps() const { return z.size(); }
  std::size_t dim() const { return z.empty() ? 0 : static_cast<std::size_t>(z.front().cols()); }

  /// Rows [first, first + count).
  NoiseIncrements slice(std::size_t first, std::size_t count) const;
  NoiseIncrements select(const std::vector<std::size_t>& rows) const;
};

struct PathBatch {
  std::vector<Mat> s;      // N+1 blocks of B x d
  std::vector<Mat> drift;  // optional, N blocks of B x d
  std::vector<Mat> vol;    // optional, N blocks of B x d^2 (row-major sigma)
  std::vector<std::uint8_t> floored;

  std::size_t n_paths() const { return s.empty() ? 0 : static_cast<std::size_t>(s.front().rows()); }
  std::size_t n_steps() const { return s.empty() ? 0 : s.size() - 1; }
  std::size_t dim() const { return s.empty() ? 0 : static_cast<std::size_t>(s.front().cols()); }
  Vec terminal(std::size_t asset) const { return s.back().col(static_cast<Eigen::Index>(asset)); }
};

inline constexpr double kPriceFloor = 1e-8;

/// Supplies (mu_n, sigma_n) for step n given the prices at t_n. Outputs are
/// B x d (drift) and B x d^2 (row-major vol).
class MarketParams {
 public:
  virtual ~MarketParams() = default;
  virtual void at(std::size_t n, double t, const Mat& prices, Mat& drift, Mat& vol) const = 0;
};

class ConstantParams final : public MarketParams {
 public:
  ConstantParams(Vec drift, Mat vol);
  void at(std::size_t n, double t, const Mat& prices, Mat& drift, Mat& vol) const override;

 private:
  Vec drift_;
  Eigen::RowVectorXd vol_row_;
};

PathBatch simulate_euler(const TimeGrid& grid, const MarketParams& params, const Vec& s0,
                         const NoiseIncrements& increments, bool keep_params = false);

// ---------------------------------------------------------------------------
// Noisy-parameter pools

enum class NoiseKind { constant, non_constant, cumulative };

NoiseKind noise_kind_from_string(const std::string& s);
std::string to_string(NoiseKind k);

struct NoiseScales {
  double vol = 0.0;
  double drift = 0.0;
};

/// One market of a pool: per-step drift and covariance, plus the Cholesky
/// factor used to simulate it.
struct NoisyMarketScenario {
  NoiseKind kind = NoiseKind::constant;
  std::vector<Vec> drift;
  std::vector<Mat> cov;
  std::vector<Mat> vol;
};

std::vector<NoisyMarketScenario> make_noisy_pool(const ReferenceMarket& ref, NoiseKind kind, NoiseScales scales,
                                                 const TimeGrid& grid, std::size_t n_pool, std::uint64_t seed);

/// Parameters for a batch where path b follows scenarios[b] (validation batches
/// with one path per scenario) or all paths follow scenarios[0].
class ScenarioParams final : public MarketParams {
 public:
  explicit ScenarioParams(std::vector<const NoisyMarketScenario*> per_path);
  void at(std::size_t n, double t, const Mat& prices, Mat& drift, Mat& vol) const override;

 private:
  std::vector<const NoisyMarketScenario*> per_path_;
};

// ---------------------------------------------------------------------------
// GARCH(1,1)

struct GarchCoord {
  double mean = 0.0;
  double omega = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
};

struct GarchModel {
  std::vector<GarchCoord> coords;
  std::vector<GarchCoord> std_errors;
  Mat corr;
  std::vector<std::uint8_t> stationarity_clamped;
  std::vector<double> log_likelihood;

  std::size_t dim() const { return coords.size(); }
  void validate() const;
};

struct GarchFitOptions {
  int max_iter = 2000;
  double tol = 1e-8;
};

/// Columns of `log_returns` are coordinates, rows are consecutive observations.
GarchModel fit_garch(const Mat& log_returns, const GarchFitOptions& opts = {});

/// Pastes several return series (e.g. independent paths) end to end per coordinate.
Mat stack_log_returns(const PathBatch& paths);

std::vector<GarchModel> make_noisy_garch_pool(const GarchModel& model, double se_factor, double corr_std,
                                              std::size_t n_pool, std::uint64_t seed);

PathBatch simulate_garch(const GarchModel& model, const TimeGrid& grid, const Vec& s0, std::size_t n_paths,
                         std::uint64_t seed);

// ---------------------------------------------------------------------------
// Student-t log returns

struct StudentTMarket {
  double nu = 5.0;
  Vec location;  // per year
  Vec scale;     // per sqrt(year), coordinates independent
  double rate = 0.0;
  void validate() const;
};

PathBatch simulate_student_t(const StudentTMarket& market, const TimeGrid& grid, const Vec& s0, std::size_t n_paths,
                             std::uint64_t seed);

// ---------------------------------------------------------------------------

using Scenario = std::variant<ReferenceMarket, NoisyMarketScenario, GarchModel, StudentTMarket>;

/// Simulates `n_paths` from one scenario. Euler-type scenarios consume
/// `increments` when provided, otherwise fresh draws from `seed`.
PathBatch simulate_scenario(const Scenario& sc, const TimeGrid& grid, const Vec& s0, std::size_t n_paths,
                            std::uint64_t seed, const NoiseIncrements* increments = nullptr);

/// Discretized quadratic covariation of log prices, per path (d x d).
Mat log_qcv(const PathBatch& paths, std::size_t path);

}  // namespace rgan
