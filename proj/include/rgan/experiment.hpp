#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "rgan/closed_form.hpp"
#include "rgan/evaluation.hpp"
#include "rgan/gan_trainer.hpp"

namespace rgan {

/// Full description of one run. Serialized as JSON; keys are listed in docs/config.md.
struct ExperimentConfig {
  std::string preset = "custom";

  // market
  Vec drift;
  Mat vol;
  double rate = 0.015;
  Vec s0;
  double horizon = 1.0;
  std::size_t n_steps = 65;
  double x0 = 1.0;
  std::string utility = "log";
  CostSpec costs;
  std::optional<double> student_nu;  // evaluate in a Student-t market

  // objective
  Mode mode = Mode::vol_robust;
  PenaltyKind penalty = PenaltyKind::additive;
  double lambda1 = 1.0;
  double lambda2 = 1.0;

  // data (path counts before scaling)
  std::size_t n_train = 160000;
  std::size_t n_val = 40000;
  std::size_t n_test = 40000;
  std::uint64_t data_seed = 0;
  double scale = 1.0;

  // training
  std::size_t epochs = 150;
  std::size_t batch = 1000;
  double base_lr = 5e-4;
  double lr_decay = 0.2;
  std::size_t decay_every = 100;
  Arch gen_arch = Arch::ffnn;
  Arch disc_arch = Arch::ffnn;
  std::vector<std::size_t> hidden{64};
  std::size_t gen_steps = 1;
  std::size_t disc_steps = 1;
  NoiseKind val_kind = NoiseKind::cumulative;
  NoiseScales val_scales{0.15, 0.02};
  bool early_stopping = true;
  std::uint64_t seed = 0;

  // evaluation
  std::string pool = "noisy";  // noisy | garch | none
  NoiseKind eval_kind = NoiseKind::cumulative;
  NoiseScales eval_scales{0.075, 0.01};
  std::size_t n_pool = 1000;
  std::size_t garch_fit_paths = 2000;
  double garch_se_factor = 0.75;
  double garch_corr_std = 0.0075;
  double var_alpha = 0.05;
  std::size_t hist_bins = 50;
  std::uint64_t eval_seed = 1;

  std::size_t dim() const { return static_cast<std::size_t>(drift.size()); }
  std::size_t scaled(std::size_t n) const;
  GanProblem problem() const;
  TrainConfig train_config() const;
  ReferenceMarket reference() const;
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig config_from_json(const nlohmann::json& j);

/// Names: sigma-1d, merton-1d, S, AS, PS, PAS, NAS, 5S, <vol>-SD, <vol>-AD,
/// realistic, realistic-garch, small-cost-5.5, small-cost-10, student-t-3.5, student-t-20.
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

/// Applies "key=value" overrides (keys as in the JSON form).
void apply_override(ExperimentConfig& c, const std::string& assignment);

/// 16 hex digits of FNV-1a over the canonical JSON dump.
std::string config_hash(const ExperimentConfig& c);

/// Output root: $RGAN_OUTPUT_ROOT, else "rgan_out".
std::string output_root();
std::string run_dir(const ExperimentConfig& c);

struct Datasets {
  NoiseIncrements train;
  NoiseIncrements val;
  NoiseIncrements test;
};

Datasets make_datasets(const ExperimentConfig& c);

/// Explicit benchmark for the config, if one exists (no costs required).
std::optional<SaddleSolution> explicit_solution(const ExperimentConfig& c);

struct StrategyReport {
  std::string name;
  Estimate reference;
  std::optional<PoolResult> pool;
  std::optional<RelativeError> rel_error;
  double var = 0.0;
  HistogramReport histogram;
};

struct RunReport {
  std::string hash;
  std::vector<StrategyReport> strategies;
  std::optional<SaddleSolution> explicit_sol;
  std::size_t n_pool = 0;
  std::size_t b_test = 0;
};

nlohmann::json to_json(const RunReport& r);

/// report-<hash>.json/.csv and histogram-<strategy>-<hash>.csv under dir.
void write_report(const std::string& dir, const RunReport& r);

/// Evaluates the given generator (optional) and the closed-form strategies.
RunReport evaluate(const ExperimentConfig& c, const Network* gen, const Datasets& data);

struct RunResult {
  TrainState state;
  RunReport report;
  std::string dir;
};

/// gen-data -> train -> evaluate, writing artifacts under run_dir(c).
RunResult run(const ExperimentConfig& c, bool resume = true, bool write = true);

struct GridResult {
  std::vector<double> lambda1;
  std::vector<double> lambda2;
  Mat m_u;  // rows lambda1, cols lambda2; NaN for failed cells
  std::vector<std::string> status;
  std::size_t best_i = 0;
  std::size_t best_j = 0;
  bool boundary_best = false;
};

GridResult grid_search(const ExperimentConfig& base, const std::vector<double>& lambda1,
                       const std::vector<double>& lambda2, bool write = true,
                       const std::function<void(const std::string&)>& log = {});

/// Pooled minimum utility of a trained generator under the config's pool.
PoolResult pooled_metric(const ExperimentConfig& c, Policy& policy, const Datasets& data);

}  // namespace rgan
