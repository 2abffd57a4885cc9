#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rgan/autodiff.hpp"
#include "rgan/evaluation.hpp"
#include "rgan/market_sim.hpp"
#include "rgan/network.hpp"
#include "rgan/portfolio.hpp"
#include "rgan/utility_penalty.hpp"

namespace rgan {

enum class Mode { non_robust, vol_robust, fully_robust };

Mode mode_from_string(const std::string& s);
std::string to_string(Mode m);

/// The optimization problem shared by training and evaluation.
struct GanProblem {
  TimeGrid grid;
  ReferenceMarket ref;
  double x0 = 1.0;
  PowerUtility utility;
  CostSpec costs;
  PenaltySpec penalty;
  Mode mode = Mode::fully_robust;

  std::size_t dim() const { return ref.dim(); }
  EvalSetup eval_setup() const { return {grid, ref.rate, ref.s0, x0, costs, utility}; }
};

/// Network input [t/T, S_1..S_d, X].
Mat policy_input(double t_over_T, const Mat& prices, const Vec& wealth);

/// Policy backed by a generator network, evaluated without a tape.
class NeuralPolicy final : public Policy {
 public:
  NeuralPolicy(const Network& net, std::string label = "neural") : net_(net), label_(std::move(label)) {}
  void reset(std::size_t batch) override;
  Mat weights(const PolicyInput& in) override;
  std::string name() const override { return label_; }

 private:
  const Network& net_;
  std::string label_;
  Mat hidden_;
};

Network make_generator(const GanProblem& pb, NetSpec spec, std::uint64_t seed);
/// Discriminator whose output head starts at the reference (mu~, sigma~).
Network make_discriminator(const GanProblem& pb, NetSpec spec, std::uint64_t seed);

struct Episode {
  ad::Var terminal;      // B x 1
  ad::Var mean_utility;  // 1 x 1
  ad::Var penalty;       // 1 x 1, lambda-scaled
  ad::Var gen_loss;      // -(mean utility + penalty)
};

/// Unrolls market and policy jointly on the tape. Both networks must already
/// be bound to `tape`.
Episode forward_episode(ad::Tape& tape, const Network& gen, const Network& disc, const NoiseIncrements& inc,
                        const GanProblem& pb);

/// Tape-free replay of the same episode; returns paths with per-step
/// market parameters and the wealth ledger.
struct EpisodeValues {
  PathBatch paths;
  WealthLedger ledger;
};
EpisodeValues play_episode(const Network& gen, const Network& disc, const NoiseIncrements& inc, const GanProblem& pb);

struct ValidationSpec {
  NoiseKind kind = NoiseKind::cumulative;
  NoiseScales scales{0.15, 0.02};
};

/// Mean utility over validation paths where path j follows its own scenario j.
Estimate early_stopping_metric(const Network& gen, const std::vector<NoisyMarketScenario>& scenarios,
                               const NoiseIncrements& val_inc, const GanProblem& pb);

struct TrainConfig {
  GanProblem problem;
  NetSpec gen_net;
  NetSpec disc_net;
  std::size_t epochs = 150;
  std::size_t batch = 1000;
  double base_lr = 5e-4;
  double lr_decay = 0.2;
  std::size_t decay_every = 100;
  std::size_t gen_steps = 1;   // per alternation cycle
  std::size_t disc_steps = 1;
  ValidationSpec validation;
  /// false: keep the last epoch's generator; the validation metric is only logged.
  bool early_stopping = true;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double gen_loss = 0.0;
  double disc_loss = 0.0;
  double val_metric = 0.0;
  double lr = 0.0;
};

struct TrainState {
  Network gen;
  Network disc;
  Network best_gen;
  double best_metric = 0.0;
  std::size_t best_epoch = 0;
  std::size_t epoch = 0;  // epochs completed
  std::vector<EpochRecord> history;
};

struct DataSplits {
  NoiseIncrements train;
  NoiseIncrements val;
};

struct TrainOptions {
  std::string checkpoint_dir;  // empty: no checkpoints
  bool resume = false;
  std::function<void(const EpochRecord&)> on_epoch;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

TrainState train(const TrainConfig& cfg, const DataSplits& data, const TrainOptions& opts = {});

void write_metric_log(const std::string& path, const std::vector<EpochRecord>& history);

}  // namespace rgan
