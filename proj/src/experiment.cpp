#include "rgan/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "rgan/checkpoint.hpp"
#include "rgan/random.hpp"

namespace rgan {

namespace fs = std::filesystem;
using nlohmann::json;

std::size_t ExperimentConfig::scaled(std::size_t n) const {
  if (n == 0) return 0;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(n) * scale)));
}

ReferenceMarket ExperimentConfig::reference() const { return ReferenceMarket{drift, vol, rate, s0}; }

GanProblem ExperimentConfig::problem() const {
  GanProblem pb;
  pb.grid = TimeGrid::uniform(horizon, n_steps);
  pb.ref = reference();
  pb.x0 = x0;
  pb.utility = PowerUtility::parse(utility);
  pb.costs = costs;
  pb.penalty = PenaltySpec{penalty, lambda1, lambda2, drift, vol};
  pb.mode = mode;
  return pb;
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig t;
  t.problem = problem();
  t.gen_net.arch = gen_arch;
  t.gen_net.hidden = hidden;
  t.disc_net.arch = disc_arch;
  t.disc_net.hidden = hidden;
  t.epochs = epochs;
  t.batch = batch;
  t.base_lr = base_lr;
  t.lr_decay = lr_decay;
  t.decay_every = decay_every;
  t.gen_steps = gen_steps;
  t.disc_steps = disc_steps;
  t.validation = {val_kind, val_scales};
  t.early_stopping = early_stopping;
  t.seed = seed;
  return t;
}

void ExperimentConfig::validate() const {
  reference().validate();
  costs.validate();
  PowerUtility::parse(utility);
  if (n_steps == 0 || !(horizon > 0.0)) throw std::invalid_argument("config: bad time grid");
  if (!(x0 > 0.0)) throw std::invalid_argument("config: x0 must be positive");
  if (!(lambda1 > 0.0) || !(lambda2 > 0.0)) throw std::invalid_argument("config: lambdas must be positive");
  if (!(scale > 0.0)) throw std::invalid_argument("config: scale must be positive");
  if (batch == 0 || n_train == 0) throw std::invalid_argument("config: empty training setup");
  if (pool != "noisy" && pool != "garch" && pool != "none") throw std::invalid_argument("config: pool must be noisy, garch or none");
  if (student_nu && !(*student_nu > 2.0)) throw std::invalid_argument("config: student_nu must exceed 2");
  if (penalty == PenaltyKind::sigma && dim() != 1 && mode != Mode::non_robust)
    throw std::invalid_argument("config: sigma penalty is defined for one asset");
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mat_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec_json(m.row(i).transpose()));
  return rows;
}

Mat json_mat(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) return Mat();
  Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) throw std::invalid_argument("config: ragged matrix");
    for (std::size_t k = 0; k < rows[i].size(); ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  return m;
}

// Compact and stable text for doubles so that hashes survive round trips.
json num(double x) { return x; }

}  // namespace

json to_json(const ExperimentConfig& c) {
  json j;
  j["preset"] = c.preset;
  j["drift"] = vec_json(c.drift);
  j["vol"] = mat_json(c.vol);
  j["rate"] = num(c.rate);
  j["s0"] = vec_json(c.s0);
  j["horizon"] = num(c.horizon);
  j["n_steps"] = c.n_steps;
  j["x0"] = num(c.x0);
  j["utility"] = c.utility;
  j["c_prop"] = num(c.costs.prop);
  j["c_base"] = num(c.costs.base);
  j["student_nu"] = c.student_nu ? json(*c.student_nu) : json(nullptr);
  j["mode"] = to_string(c.mode);
  j["penalty"] = to_string(c.penalty);
  j["lambda1"] = num(c.lambda1);
  j["lambda2"] = num(c.lambda2);
  j["n_train"] = c.n_train;
  j["n_val"] = c.n_val;
  j["n_test"] = c.n_test;
  j["data_seed"] = c.data_seed;
  j["scale"] = num(c.scale);
  j["epochs"] = c.epochs;
  j["batch"] = c.batch;
  j["base_lr"] = num(c.base_lr);
  j["lr_decay"] = num(c.lr_decay);
  j["decay_every"] = c.decay_every;
  j["gen_arch"] = to_string(c.gen_arch);
  j["disc_arch"] = to_string(c.disc_arch);
  j["hidden"] = c.hidden;
  j["gen_steps"] = c.gen_steps;
  j["disc_steps"] = c.disc_steps;
  j["val_kind"] = to_string(c.val_kind);
  j["val_vol_std"] = num(c.val_scales.vol);
  j["val_drift_std"] = num(c.val_scales.drift);
  j["early_stopping"] = c.early_stopping;
  j["seed"] = c.seed;
  j["pool"] = c.pool;
  j["eval_kind"] = to_string(c.eval_kind);
  j["eval_vol_std"] = num(c.eval_scales.vol);
  j["eval_drift_std"] = num(c.eval_scales.drift);
  j["n_pool"] = c.n_pool;
  j["garch_fit_paths"] = c.garch_fit_paths;
  j["garch_se_factor"] = num(c.garch_se_factor);
  j["garch_corr_std"] = num(c.garch_corr_std);
  j["var_alpha"] = num(c.var_alpha);
  j["hist_bins"] = c.hist_bins;
  j["eval_seed"] = c.eval_seed;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
  ExperimentConfig c;
  if (j.contains("preset") && j.at("preset").get<std::string>() != "custom") c = preset(j.at("preset").get<std::string>());
  const json base = to_json(c);
  for (const auto& [k, v] : j.items())
    if (!base.contains(k)) throw std::invalid_argument("config: unknown key '" + k + "'");
  auto has = [&](const char* k) { return j.contains(k); };
  try {
    if (has("preset")) c.preset = j["preset"].get<std::string>();
    if (has("drift")) c.drift = json_vec(j["drift"]);
    if (has("vol")) c.vol = json_mat(j["vol"]);
    if (has("rate")) c.rate = j["rate"].get<double>();
    if (has("s0")) c.s0 = json_vec(j["s0"]);
    if (has("horizon")) c.horizon = j["horizon"].get<double>();
    if (has("n_steps")) c.n_steps = j["n_steps"].get<std::size_t>();
    if (has("x0")) c.x0 = j["x0"].get<double>();
    if (has("utility")) c.utility = j["utility"].get<std::string>();
    if (has("c_prop")) c.costs.prop = j["c_prop"].get<double>();
    if (has("c_base")) c.costs.base = j["c_base"].get<double>();
    if (has("student_nu")) c.student_nu = j["student_nu"].is_null() ? std::nullopt : std::optional<double>(j["student_nu"].get<double>());
    if (has("mode")) c.mode = mode_from_string(j["mode"].get<std::string>());
    if (has("penalty")) c.penalty = penalty_kind_from_string(j["penalty"].get<std::string>());
    if (has("lambda1")) c.lambda1 = j["lambda1"].get<double>();
    if (has("lambda2")) c.lambda2 = j["lambda2"].get<double>();
    if (has("n_train")) c.n_train = j["n_train"].get<std::size_t>();
    if (has("n_val")) c.n_val = j["n_val"].get<std::size_t>();
    if (has("n_test")) c.n_test = j["n_test"].get<std::size_t>();
    if (has("data_seed")) c.data_seed = j["data_seed"].get<std::uint64_t>();
    if (has("scale")) c.scale = j["scale"].get<double>();
    if (has("epochs")) c.epochs = j["epochs"].get<std::size_t>();
    if (has("batch")) c.batch = j["batch"].get<std::size_t>();
    if (has("base_lr")) c.base_lr = j["base_lr"].get<double>();
    if (has("lr_decay")) c.lr_decay = j["lr_decay"].get<double>();
    if (has("decay_every")) c.decay_every = j["decay_every"].get<std::size_t>();
    if (has("gen_arch")) c.gen_arch = arch_from_string(j["gen_arch"].get<std::string>());
    if (has("disc_arch")) c.disc_arch = arch_from_string(j["disc_arch"].get<std::string>());
    if (has("hidden")) c.hidden = j["hidden"].get<std::vector<std::size_t>>();
    if (has("gen_steps")) c.gen_steps = j["gen_steps"].get<std::size_t>();
    if (has("disc_steps")) c.disc_steps = j["disc_steps"].get<std::size_t>();
    if (has("val_kind")) c.val_kind = noise_kind_from_string(j["val_kind"].get<std::string>());
    if (has("val_vol_std")) c.val_scales.vol = j["val_vol_std"].get<double>();
    if (has("val_drift_std")) c.val_scales.drift = j["val_drift_std"].get<double>();
    if (has("early_stopping")) c.early_stopping = j["early_stopping"].get<bool>();
    if (has("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (has("pool")) c.pool = j["pool"].get<std::string>();
    if (has("eval_kind")) c.eval_kind = noise_kind_from_string(j["eval_kind"].get<std::string>());
    if (has("eval_vol_std")) c.eval_scales.vol = j["eval_vol_std"].get<double>();
    if (has("eval_drift_std")) c.eval_scales.drift = j["eval_drift_std"].get<double>();
    if (has("n_pool")) c.n_pool = j["n_pool"].get<std::size_t>();
    if (has("garch_fit_paths")) c.garch_fit_paths = j["garch_fit_paths"].get<std::size_t>();
    if (has("garch_se_factor")) c.garch_se_factor = j["garch_se_factor"].get<double>();
    if (has("garch_corr_std")) c.garch_corr_std = j["garch_corr_std"].get<double>();
    if (has("var_alpha")) c.var_alpha = j["var_alpha"].get<double>();
    if (has("hist_bins")) c.hist_bins = j["hist_bins"].get<std::size_t>();
    if (has("eval_seed")) c.eval_seed = j["eval_seed"].get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

void apply_override(ExperimentConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw std::invalid_argument("override must look like key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json j = to_json(c);
  if (!j.contains(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  j[key] = value;
  j.erase("preset");
  ExperimentConfig out = config_from_json(j);
  out.preset = c.preset;
  c = out;
}

// ---------------------------------------------------------------------------
// presets

namespace {

Mat vol_preset(const std::string& name) {
  Mat v;
  if (name == "S") v = 0.25 * Mat::Identity(2, 2);
  else if (name == "AS") v = Eigen::Vector2d(0.15, 0.35).asDiagonal();
  else if (name == "PS") (v = Mat(2, 2)) << 0.25, 0.0, 0.225, 0.10897247;
  else if (name == "PAS") (v = Mat(2, 2)) << 0.15, 0.0, 0.315, 0.15256146;
  else if (name == "NAS") (v = Mat(2, 2)) << 0.15, 0.0, -0.315, 0.15256146;
  else if (name == "5S") v = 0.25 * Mat::Identity(5, 5);
  return v;
}

ExperimentConfig one_asset(double drift, double rate, double vol) {
  ExperimentConfig c;
  c.drift = Vec::Constant(1, drift);
  c.vol = Mat::Constant(1, 1, vol);
  c.rate = rate;
  c.s0 = Vec::Ones(1);
  return c;
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> n{"sigma-1d", "merton-1d"};
  for (const char* v : {"S", "AS", "PS", "PAS", "NAS", "5S"}) n.emplace_back(v);
  for (const char* v : {"S", "AS", "PS", "PAS", "NAS"})
    for (const char* d : {"SD", "AD"}) n.push_back(std::string(v) + "-" + d);
  for (const char* v : {"realistic", "realistic-garch", "small-cost-5.5", "small-cost-10", "student-t-3.5", "student-t-20"})
    n.emplace_back(v);
  return n;
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  if (name == "sigma-1d") {
    c = one_asset(0.035, 0.015, 0.25);
    c.x0 = 5.0;
    c.penalty = PenaltyKind::sigma;
    c.lambda1 = 10.0;
    c.mode = Mode::vol_robust;
    c.val_scales = {0.0, 0.0};
  } else if (name == "merton-1d") {
    c = one_asset(0.055, 0.015, 0.35);
    c.utility = "tilde_u_0.5";
    c.mode = Mode::non_robust;
    c.val_scales = {0.0, 0.0};
  } else if (Mat v = vol_preset(name); v.size() > 0) {
    const auto d = v.rows();
    c.drift = Vec::Constant(d, 0.035);
    c.vol = v;
    c.s0 = Vec::Ones(d);
    c.mode = Mode::vol_robust;
    c.penalty = PenaltyKind::additive;
    c.val_scales = {0.0, 0.0};
  } else if (auto dash = name.rfind('-'); dash != std::string::npos && (name.substr(dash + 1) == "SD" || name.substr(dash + 1) == "AD") &&
                                         vol_preset(name.substr(0, dash)).rows() == 2) {
    c.vol = vol_preset(name.substr(0, dash));
    c.drift = name.substr(dash + 1) == "SD" ? Vec(Eigen::Vector2d(0.035, 0.035)) : Vec(Eigen::Vector2d(0.035, 0.055));
    c.s0 = Vec::Ones(2);
    c.mode = Mode::fully_robust;
    c.penalty = PenaltyKind::additive;
    c.val_scales = {0.0, 0.0};
    // The worst-case drift sits far from the reference one, so the reference
    // market is a poor selection criterion; keep the final generator instead.
    c.early_stopping = false;
  } else if (name == "realistic" || name == "realistic-garch") {
    c.vol = vol_preset("AS");
    c.drift = Eigen::Vector2d(0.035, 0.055);
    c.s0 = Vec::Ones(2);
    c.costs.prop = 0.01;
    c.mode = Mode::fully_robust;
    c.penalty = PenaltyKind::pathwise;
    c.utility = "u_0.5";
    if (name == "realistic-garch") c.pool = "garch";
  } else if (name == "small-cost-5.5" || name == "small-cost-10" || name == "student-t-3.5" || name == "student-t-20") {
    c = name == "small-cost-5.5" ? one_asset(0.055, 0.015, 0.35) : one_asset(0.10, 0.03, 0.35);
    c.costs.prop = 0.01;
    c.utility = "tilde_u_0.5";
    c.mode = Mode::fully_robust;
    c.penalty = PenaltyKind::pathwise;
    if (name == "student-t-3.5") c.student_nu = 3.5;
    if (name == "student-t-20") c.student_nu = 20.0;
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
  c.preset = name;
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

std::string config_hash(const ExperimentConfig& c) {
  const std::string s = to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string output_root() {
  const char* env = std::getenv("RGAN_OUTPUT_ROOT");
  return env && *env ? env : "rgan_out";
}

std::string run_dir(const ExperimentConfig& c) {
  return (fs::path(output_root()) / (c.preset + "-" + config_hash(c))).string();
}

Datasets make_datasets(const ExperimentConfig& c) {
  const std::size_t ntr = c.scaled(c.n_train), nv = c.scaled(c.n_val), nte = c.scaled(c.n_test);
  const NoiseIncrements all = NoiseIncrements::generate(ntr + nv + nte, c.n_steps, c.dim(), c.data_seed);
  return {all.slice(0, ntr), all.slice(ntr, nv), all.slice(ntr + nv, nte)};
}

std::optional<SaddleSolution> explicit_solution(const ExperimentConfig& c) {
  if (PowerUtility::parse(c.utility).p != 1.0 || c.penalty == PenaltyKind::pathwise) return std::nullopt;
  const Mat cov = c.vol * c.vol.transpose();
  switch (c.mode) {
    case Mode::non_robust: {
      SaddleSolution s;
      s.pi = oracle_weight(cov, c.drift, c.rate);
      s.cov = cov;
      s.drift = c.drift;
      s.residual = (cov * s.pi - (c.drift.array() - c.rate).matrix()).cwiseAbs().maxCoeff();
      return s;
    }
    case Mode::vol_robust:
      if (c.penalty == PenaltyKind::sigma) return solve_1d_robust_vol(c.drift(0), c.rate, c.vol(0, 0), c.lambda1);
      return solve_multid_robust_vol(c.drift, c.rate, cov, c.lambda1,
                                     c.penalty == PenaltyKind::multiplicative ? VolPenalty::multiplicative : VolPenalty::additive);
    case Mode::fully_robust:
      if (c.penalty != PenaltyKind::additive) return std::nullopt;
      return solve_fully_robust(c.drift, c.rate, cov, c.lambda1, c.lambda2);
  }
  return std::nullopt;
}

namespace {

std::vector<Scenario> build_pool(const ExperimentConfig& c) {
  std::vector<Scenario> pool;
  const GanProblem pb = c.problem();
  const std::size_t n = c.scaled(c.n_pool);
  if (c.pool == "noisy") {
    for (auto& s : make_noisy_pool(pb.ref, c.eval_kind, c.eval_scales, pb.grid, n, derive_seed(c.eval_seed, 7)))
      pool.emplace_back(std::move(s));
  } else if (c.pool == "garch") {
    const PathBatch hist = simulate_scenario(pb.ref, pb.grid, pb.ref.s0, c.garch_fit_paths, derive_seed(c.data_seed, 11));
    const GarchModel fitted = fit_garch(stack_log_returns(hist));
    for (auto& g : make_noisy_garch_pool(fitted, c.garch_se_factor, c.garch_corr_std, n, derive_seed(c.eval_seed, 13)))
      pool.emplace_back(std::move(g));
  }
  return pool;
}

PathBatch reference_paths(const ExperimentConfig& c, const Datasets& data) {
  const GanProblem pb = c.problem();
  if (c.student_nu) {
    StudentTMarket m{*c.student_nu, c.drift, c.vol.diagonal(), c.rate};
    return simulate_student_t(m, pb.grid, c.s0, data.test.n_paths(), derive_seed(c.eval_seed, 5));
  }
  return simulate_euler(pb.grid, ConstantParams(c.drift, c.vol), c.s0, data.test);
}

}  // namespace

PoolResult pooled_metric(const ExperimentConfig& c, Policy& policy, const Datasets& data) {
  const std::vector<Scenario> pool = build_pool(c);
  if (pool.empty()) throw std::invalid_argument("pooled_metric: config has no evaluation pool");
  return pooled_min_utility(policy, pool, data.test.n_paths(), c.problem().eval_setup(), derive_seed(c.eval_seed, 9),
                            &data.test);
}

RunReport evaluate(const ExperimentConfig& c, const Network* gen, const Datasets& data) {
  const GanProblem pb = c.problem();
  const EvalSetup setup = pb.eval_setup();
  RunReport rep;
  rep.hash = config_hash(c);
  rep.b_test = data.test.n_paths();
  const PathBatch ref_paths = reference_paths(c, data);
  const std::vector<Scenario> pool = build_pool(c);
  rep.n_pool = pool.size();
  rep.explicit_sol = explicit_solution(c);
  std::optional<PathBatch> star_paths;
  if (rep.explicit_sol)
    star_paths = simulate_euler(pb.grid, ConstantParams(rep.explicit_sol->drift, rep.explicit_sol->vol()), c.s0, data.test);

  std::vector<std::unique_ptr<Policy>> policies;
  if (gen) policies.push_back(std::make_unique<NeuralPolicy>(*gen, "neural"));
  policies.push_back(std::make_unique<CashPolicy>(c.dim()));
  const double p = pb.utility.p;
  policies.push_back(std::make_unique<ConstantWeightPolicy>(merton_weight(c.vol * c.vol.transpose(), c.drift, c.rate, p), "merton"));
  if (rep.explicit_sol) policies.push_back(std::make_unique<ConstantWeightPolicy>(rep.explicit_sol->pi, "explicit"));
  if (c.dim() == 1 && c.costs.prop > 0.0 && p > 0.0)
    policies.push_back(std::make_unique<NoTradePolicy>(
        std::vector<NoTradeParams>{no_trade_params(c.drift(0) - c.rate, c.vol(0, 0), p, c.costs.prop)}));

  std::unique_ptr<ConstantWeightPolicy> bench;
  if (rep.explicit_sol) bench = std::make_unique<ConstantWeightPolicy>(rep.explicit_sol->pi, "explicit");

  for (auto& pol : policies) {
    StrategyReport s;
    s.name = pol->name();
    const WealthLedger led = roll_out(*pol, ref_paths, pb.grid, c.x0, c.rate, c.costs);
    const Vec xt = led.terminal();
    s.reference = mean_utility(xt, pb.utility);
    s.var = value_at_risk(xt, c.var_alpha, c.rate, c.horizon, c.x0);
    s.histogram = histogram_report(discounted(xt, c.rate, c.horizon), c.hist_bins);
    if (!pool.empty())
      s.pool = pooled_min_utility(*pol, pool, data.test.n_paths(), setup, derive_seed(c.eval_seed, 9), &data.test);
    if (star_paths) s.rel_error = relative_error(*pol, *bench, *star_paths, setup);
    rep.strategies.push_back(std::move(s));
  }
  return rep;
}

namespace {

json est_json(const Estimate& e) {
  return {{"value", e.value}, {"std_error", e.std_error}, {"n", e.n}, {"defaults", e.defaults}};
}

void write_report_csv(const std::string& path, const RunReport& r) {
  std::ofstream os(path);
  os.precision(12);
  os << "strategy,E_u,E_u_se,defaults,M_u,M_u_argmin,err_rel,VaR,mean,std,skew,n_pool,B_test,config_hash\n";
  for (const auto& s : r.strategies) {
    os << s.name << ',' << s.reference.value << ',' << s.reference.std_error << ',' << s.reference.defaults << ',';
    if (s.pool) os << s.pool->min << ',' << s.pool->argmin;
    else os << ',';
    os << ',';
    if (s.rel_error) os << s.rel_error->value;
    os << ',' << s.var << ',' << s.histogram.mean << ',' << s.histogram.std << ',' << s.histogram.skew << ',' << r.n_pool
       << ',' << r.b_test << ',' << r.hash << '\n';
  }
}

}  // namespace

json to_json(const RunReport& r) {
  json j;
  j["config_hash"] = r.hash;
  j["n_pool"] = r.n_pool;
  j["B_test"] = r.b_test;
  if (r.explicit_sol) {
    j["explicit"] = {{"pi", vec_json(r.explicit_sol->pi)},
                     {"cov", mat_json(r.explicit_sol->cov)},
                     {"drift", vec_json(r.explicit_sol->drift)},
                     {"residual", r.explicit_sol->residual}};
  }
  json arr = json::array();
  for (const auto& s : r.strategies) {
    json e{{"strategy", s.name},
           {"E_u", est_json(s.reference)},
           {"VaR", s.var},
           {"terminal_discounted", {{"mean", s.histogram.mean}, {"std", s.histogram.std}, {"skew", s.histogram.skew}}}};
    if (s.pool) e["M_u"] = {{"value", s.pool->min}, {"argmin", s.pool->argmin}};
    if (s.rel_error) e["err_rel"] = {{"value", s.rel_error->value}, {"absolute", s.rel_error->absolute}};
    arr.push_back(e);
  }
  j["strategies"] = arr;
  return j;
}

void write_report(const std::string& dir, const RunReport& r) {
  fs::create_directories(dir);
  std::ofstream(fs::path(dir) / ("report-" + r.hash + ".json")) << to_json(r).dump(2) << '\n';
  write_report_csv((fs::path(dir) / ("report-" + r.hash + ".csv")).string(), r);
  for (const auto& s : r.strategies)
    write_histogram_csv((fs::path(dir) / ("histogram-" + s.name + "-" + r.hash + ".csv")).string(), s.histogram);
}

RunResult run(const ExperimentConfig& c, bool resume, bool write) {
  c.validate();
  RunResult out;
  out.dir = run_dir(c);
  const std::string hash = config_hash(c);
  if (write) {
    fs::create_directories(out.dir);
    std::ofstream(fs::path(out.dir) / ("config-" + hash + ".json")) << to_json(c).dump(2) << '\n';
  }
  const Datasets data = make_datasets(c);
  TrainOptions opts;
  if (write) opts.checkpoint_dir = (fs::path(out.dir) / "checkpoints").string();
  opts.resume = resume;
  out.state = train(c.train_config(), {data.train, data.val}, opts);
  out.report = evaluate(c, &out.state.best_gen, data);
  if (write) {
    write_metric_log((fs::path(out.dir) / ("metrics-" + hash + ".csv")).string(), out.state.history);
    write_report(out.dir, out.report);
  }
  return out;
}

GridResult grid_search(const ExperimentConfig& base, const std::vector<double>& l1, const std::vector<double>& l2,
                       bool write, const std::function<void(const std::string&)>& log) {
  if (l1.empty() || l2.empty()) throw std::invalid_argument("grid_search: empty grid");
  GridResult g;
  g.lambda1 = l1;
  g.lambda2 = l2;
  g.m_u = Mat::Constant(static_cast<Eigen::Index>(l1.size()), static_cast<Eigen::Index>(l2.size()),
                        std::numeric_limits<double>::quiet_NaN());
  const Datasets data = make_datasets(base);
  double best = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < l1.size(); ++i)
    for (std::size_t j = 0; j < l2.size(); ++j) {
      ExperimentConfig c = base;
      c.lambda1 = l1[i];
      c.lambda2 = l2[j];
      c.mode = Mode::fully_robust;
      std::string status = "ok";
      try {
        TrainOptions opts;
        if (write) opts.checkpoint_dir = (fs::path(run_dir(c)) / "checkpoints").string();
        opts.resume = true;
        const TrainState st = train(c.train_config(), {data.train, data.val}, opts);
        NeuralPolicy pol(st.best_gen);
        const double m = pooled_metric(c, pol, data).min;
        g.m_u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m;
        if (m > best || !any) {
          best = m;
          g.best_i = i;
          g.best_j = j;
          any = true;
        }
      } catch (const std::exception& e) {
        status = std::string("failed: ") + e.what();
      }
      g.status.push_back(status);
      if (log) log("lambda1=" + std::to_string(l1[i]) + " lambda2=" + std::to_string(l2[j]) + " M_u=" +
                   std::to_string(g.m_u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) + " " + status);
    }
  g.boundary_best = any && ((l1.size() > 1 && (g.best_i == 0 || g.best_i + 1 == l1.size())) ||
                            (l2.size() > 1 && (g.best_j == 0 || g.best_j + 1 == l2.size())));
  if (write) {
    const fs::path dir = fs::path(output_root()) / (base.preset + "-grid-" + config_hash(base));
    fs::create_directories(dir);
    std::ofstream os(dir / ("grid-" + config_hash(base) + ".csv"));
    os.precision(12);
    os << "lambda1,lambda2,M_u,status\n";
    for (std::size_t i = 0; i < l1.size(); ++i)
      for (std::size_t j = 0; j < l2.size(); ++j)
        os << l1[i] << ',' << l2[j] << ',' << g.m_u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) << ",\""
           << g.status[i * l2.size() + j] << "\"\n";
  }
  return g;
}

}  // namespace rgan
