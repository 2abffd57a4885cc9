#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rgan/common.hpp"
#include "rgan/market_sim.hpp"
#include "rgan/time_grid.hpp"

namespace rgan {

struct CostSpec {
  double prop = 0.0;
  double base = 0.0;
  void validate() const;
};

/// Traded amounts at or below this count as no trade for base costs.
inline constexpr double kTradeTol = 1e-12;

/// What a policy may observe at t_n. `holdings` are the units held going into
/// t_n, i.e. H_{n-1} (zero before the first trade).
struct PolicyInput {
  std::size_t step;
  double time;
  double horizon;
  const Mat& prices;    // B x d
  const Vec& wealth;    // B
  const Mat& holdings;  // B x d
};

class Policy {
 public:
  virtual ~Policy() = default;
  /// Called once before a roll-out over `batch` paths.
  virtual void reset(std::size_t batch) { (void)batch; }
  /// Portfolio weights pi_n, B x d.
  virtual Mat weights(const PolicyInput& in) = 0;
  virtual std::string name() const = 0;
};

class CashPolicy final : public Policy {
 public:
  explicit CashPolicy(std::size_t dim) : dim_(dim) {}
  Mat weights(const PolicyInput& in) override;
  std::string name() const override { return "cash"; }

 private:
  std::size_t dim_;
};

class ConstantWeightPolicy final : public Policy {
 public:
  explicit ConstantWeightPolicy(Vec w, std::string label = "constant") : w_(std::move(w)), label_(std::move(label)) {}
  Mat weights(const PolicyInput& in) override;
  std::string name() const override { return label_; }
  const Vec& weight() const { return w_; }

 private:
  Vec w_;
  std::string label_;
};

struct StepResult {
  Vec wealth;    // X_{n+1}
  Mat holdings;  // H_n
  Mat traded;    // A_n
  Vec cost;      // C_n
};

/// One step of the friction recursion for a batch. `prev_holdings` is
/// H_{n-1} = X_{n-1} pi_{n-1} / S_{n-1}.
StepResult step_wealth(const Vec& wealth, const Mat& weights, const Mat& prev_holdings, const Mat& prices,
                       const Mat& price_change, double rate, double dt, const CostSpec& costs);

struct WealthLedger {
  double x0 = 0.0;
  Mat x;                    // B x (N+1)
  std::vector<Mat> holdings;  // N blocks of B x d
  std::vector<Mat> traded;    // N blocks of B x d
  Mat cost;                 // B x N
  std::vector<std::uint8_t> defaulted;

  Vec terminal() const { return x.col(x.cols() - 1); }
  std::size_t n_defaulted() const;
};

WealthLedger roll_out(Policy& policy, const PathBatch& paths, const TimeGrid& grid, double x0, double rate,
                      const CostSpec& costs);

/// Columns t, path_id, X, H_1..H_d, A_1..A_d, C. Rows at t_N carry zero trades.
void write_ledger_csv(const std::string& path, const WealthLedger& ledger, const TimeGrid& grid,
                      std::size_t max_paths = static_cast<std::size_t>(-1));

}  // namespace rgan
