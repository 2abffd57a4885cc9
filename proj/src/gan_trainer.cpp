#include "rgan/gan_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "rgan/checkpoint.hpp"
#include "rgan/random.hpp"

namespace rgan {

namespace fs = std::filesystem;
using ad::Var;

Mode mode_from_string(const std::string& s) {
  if (s == "non_robust") return Mode::non_robust;
  if (s == "vol_robust") return Mode::vol_robust;
  if (s == "fully_robust") return Mode::fully_robust;
  throw std::invalid_argument("unknown mode: " + s);
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::non_robust: return "non_robust";
    case Mode::vol_robust: return "vol_robust";
    case Mode::fully_robust: return "fully_robust";
  }
  return "?";
}

Mat policy_input(double t_over_T, const Mat& prices, const Vec& wealth) {
  Mat in(prices.rows(), prices.cols() + 2);
  in.col(0).setConstant(t_over_T);
  in.middleCols(1, prices.cols()) = prices;
  in.col(prices.cols() + 1) = wealth;
  return in;
}

void NeuralPolicy::reset(std::size_t batch) { hidden_ = net_.initial_hidden(static_cast<Eigen::Index>(batch)); }

Mat NeuralPolicy::weights(const PolicyInput& in) {
  const Mat x = policy_input(in.time / in.horizon, in.prices, in.wealth);
  return net_.infer(in.step, x, net_.spec().arch == Arch::rnn ? &hidden_ : nullptr);
}

namespace {

Eigen::RowVectorXd vol_row(const Mat& v) {
  Eigen::RowVectorXd r(v.size());
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    for (Eigen::Index j = 0; j < v.cols(); ++j) r(i * v.cols() + j) = v(i, j);
  return r;
}

NetSpec complete(NetSpec spec, const GanProblem& pb, std::size_t out) {
  spec.input_dim = pb.dim() + 2;
  spec.output_dim = out;
  spec.n_steps = pb.grid.n_steps();
  return spec;
}

Var tape_utility(const Var& x, const PowerUtility& u) {
  // Floor keeps the loss finite if a training path defaults.
  const Var xc = ad::clamp_min(x, 1e-8);
  if (u.p == 1.0) return ad::log(xc);
  const double q = 1.0 - u.p;
  const Var pw = ad::pow(xc, q);
  return u.shifted ? (pw - 1.0) / q : pw / q;
}

}  // namespace

Network make_generator(const GanProblem& pb, NetSpec spec, std::uint64_t seed) {
  return Network(complete(std::move(spec), pb, pb.dim()), seed);
}

Network make_discriminator(const GanProblem& pb, NetSpec spec, std::uint64_t seed) {
  const std::size_t d = pb.dim();
  Network net(complete(std::move(spec), pb, d + d * d), seed);
  Vec head(static_cast<Eigen::Index>(d + d * d));
  head.head(static_cast<Eigen::Index>(d)) = pb.ref.drift;
  head.tail(static_cast<Eigen::Index>(d * d)) = vol_row(pb.ref.vol).transpose();
  net.set_constant_output(head);
  return net;
}

Episode forward_episode(ad::Tape& tape, const Network& gen, const Network& disc, const NoiseIncrements& inc,
                        const GanProblem& pb) {
  const auto B = static_cast<Eigen::Index>(inc.n_paths());
  const auto d = static_cast<Eigen::Index>(pb.dim());
  const std::size_t N = pb.grid.n_steps();
  if (inc.n_steps() != N || inc.dim() != pb.dim()) throw std::invalid_argument("forward_episode: increments do not match problem");
  if (B == 0) throw std::invalid_argument("forward_episode: empty batch");
  const double T = pb.grid.horizon();
  const double r = pb.ref.rate;
  const PenaltySpec& ps = pb.penalty;
  const bool use_disc = pb.mode != Mode::non_robust;
  const bool robust_drift = pb.mode == Mode::fully_robust;
  const bool pathwise = ps.kind == PenaltyKind::pathwise;

  Var S = tape.constant(pb.ref.s0.transpose().replicate(B, 1));
  const Var S0 = S;
  Var X = tape.constant(Mat::Constant(B, 1, pb.x0));
  Var Hprev = tape.constant(Mat::Zero(B, d));
  Var gh, dh;
  if (gen.spec().arch == Arch::rnn) gh = gen.initial_hidden(tape, B);
  if (use_disc && disc.spec().arch == Arch::rnn) dh = disc.initial_hidden(tape, B);

  const Var ref_drift = tape.constant(pb.ref.drift.transpose().replicate(B, 1));
  const Var ref_vol = tape.constant(vol_row(pb.ref.vol).replicate(B, 1));
  const Var pen_drift_ref = tape.constant(ps.ref_drift.transpose());
  const Var pen_vol_ref = tape.constant(vol_row(ps.ref_vol));
  const Var pen_cov_ref = tape.constant(vol_row(ps.ref_cov()));
  Var fm_kron, eye_row;
  if (use_disc && ps.kind == PenaltyKind::multiplicative) {
    const Mat inv = ps.ref_cov().inverse();
    Mat K = Mat::Zero(d * d, d * d);
    for (Eigen::Index i = 0; i < d; ++i) K.block(i * d, i * d, d, d) = inv;
    fm_kron = tape.constant(K);
    eye_row = tape.constant(vol_row(Mat::Identity(d, d)));
  }

  Var pen_vol_acc, pen_drift_acc, qcv;
  auto accumulate = [](Var& acc, const Var& term) { acc = acc.valid() ? acc + term : term; };

  for (std::size_t n = 0; n < N; ++n) {
    const double dt = pb.grid.dt(n);
    const Var tcol = tape.constant(Mat::Constant(B, 1, pb.grid.time(n) / T));
    const Var input = ad::hcat({tcol, S, X});
    const Var pi = gen.forward(n, input, gen.spec().arch == Arch::rnn ? &gh : nullptr);

    Var drift = ref_drift, vol = ref_vol;
    if (use_disc) {
      const Var out = disc.forward(n, input, disc.spec().arch == Arch::rnn ? &dh : nullptr);
      vol = ad::cols(out, d, d * d);
      if (robust_drift) drift = ad::cols(out, 0, d);
      if (!pathwise) {
        Var vt;
        switch (ps.kind) {
          case PenaltyKind::additive: vt = ad::square(ad::batch_gram(vol) - pen_cov_ref); break;
          case PenaltyKind::multiplicative:
            vt = ad::square(ad::matmul(ad::batch_gram(vol), fm_kron) - eye_row);
            break;
          case PenaltyKind::sigma: vt = ad::square(vol - pen_vol_ref); break;
          case PenaltyKind::pathwise: break;
        }
        accumulate(pen_vol_acc, ad::sum_cols(vt) * dt);
        if (robust_drift) accumulate(pen_drift_acc, ad::sum_cols(ad::square(drift - pen_drift_ref)) * dt);
      }
    }

    const Var dW = tape.constant(inc.z[n] * std::sqrt(dt));
    const Var raw = S + S * drift * dt + S * ad::batch_matvec(vol, dW);
    const Var S_next = ad::clamp_min(raw, kPriceFloor);
    const Var dS = S_next - S;

    const Var H = pi * X / S;
    const Var A = ad::abs(H - Hprev);
    const double grow = 1.0 + r * dt;
    Var X_next = X + ad::sum_cols(H * dS) + (X - ad::sum_cols(H * S)) * (r * dt);
    if (pb.costs.prop > 0.0) X_next = X_next - ad::sum_cols(A * S) * (grow * pb.costs.prop);
    if (pb.costs.base > 0.0) {
      const Mat count = (A.value().array() > kTradeTol).cast<double>().rowwise().sum();
      X_next = X_next - tape.constant(count * (grow * pb.costs.base));
    }

    if (use_disc && pathwise) {
      const Var dl = ad::log(S_next) - ad::log(S);
      accumulate(qcv, ad::batch_outer(dl, dl));
    }
    S = S_next;
    X = X_next;
    Hprev = H;
  }

  Episode ep;
  ep.terminal = X;
  ep.mean_utility = ad::mean_all(tape_utility(X, pb.utility));
  Var pen = tape.constant(0.0);
  if (use_disc) {
    if (pathwise) {
      const Var qref = tape.constant(vol_row(ps.qcv_ref(T)));
      pen = ad::mean_all(ad::sum_cols(ad::square(qcv - qref))) * ps.lambda1;
      if (robust_drift) {
        const Var arr = ad::mean_rows(S / S0);
        pen = pen + ad::sum_all(ad::square(arr - tape.constant(ps.arr_ref(T).transpose()))) * ps.lambda2;
      }
    } else {
      pen = ad::mean_all(pen_vol_acc) * ps.lambda1;
      if (robust_drift) pen = pen + ad::mean_all(pen_drift_acc) * ps.lambda2;
    }
  }
  ep.penalty = pen;
  ep.gen_loss = -(ep.mean_utility + pen);
  return ep;
}

EpisodeValues play_episode(const Network& gen, const Network& disc, const NoiseIncrements& inc, const GanProblem& pb) {
  const auto B = static_cast<Eigen::Index>(inc.n_paths());
  const auto d = static_cast<Eigen::Index>(pb.dim());
  const std::size_t N = pb.grid.n_steps();
  if (inc.n_steps() != N || inc.dim() != pb.dim()) throw std::invalid_argument("play_episode: increments do not match problem");
  const bool use_disc = pb.mode != Mode::non_robust;
  const double T = pb.grid.horizon();
  EpisodeValues ev;
  PathBatch& P = ev.paths;
  WealthLedger& L = ev.ledger;
  P.s.push_back(pb.ref.s0.transpose().replicate(B, 1));
  P.floored.assign(static_cast<std::size_t>(B), 0);
  L.x0 = pb.x0;
  L.x.resize(B, static_cast<Eigen::Index>(N + 1));
  L.x.col(0).setConstant(pb.x0);
  L.cost.resize(B, static_cast<Eigen::Index>(N));
  L.defaulted.assign(static_cast<std::size_t>(B), 0);
  Mat gh = gen.initial_hidden(B), dh = disc.initial_hidden(B);
  Mat prev = Mat::Zero(B, d);
  Vec x = L.x.col(0);
  const Mat ref_drift = pb.ref.drift.transpose().replicate(B, 1);
  const Mat ref_vol = vol_row(pb.ref.vol).replicate(B, 1);
  for (std::size_t n = 0; n < N; ++n) {
    const Mat& s = P.s.back();
    const Mat in = policy_input(pb.grid.time(n) / T, s, x);
    const Mat pi = gen.infer(n, in, gen.spec().arch == Arch::rnn ? &gh : nullptr);
    Mat drift = ref_drift, vol = ref_vol;
    if (use_disc) {
      const Mat out = disc.infer(n, in, disc.spec().arch == Arch::rnn ? &dh : nullptr);
      vol = out.middleCols(d, d * d);
      if (pb.mode == Mode::fully_robust) drift = out.leftCols(d);
    }
    const double dt = pb.grid.dt(n);
    const Mat dW = inc.z[n] * std::sqrt(dt);
    Mat next(B, d);
    for (Eigen::Index b = 0; b < B; ++b)
      for (Eigen::Index i = 0; i < d; ++i) {
        double diff = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) diff += vol(b, i * d + j) * dW(b, j);
        double v = s(b, i) + s(b, i) * drift(b, i) * dt + s(b, i) * diff;
        if (!(v > kPriceFloor)) {
          v = kPriceFloor;
          P.floored[static_cast<std::size_t>(b)] = 1;
        }
        next(b, i) = v;
      }
    StepResult st = step_wealth(x, pi, prev, s, next - s, pb.ref.rate, dt, pb.costs);
    x = st.wealth;
    L.x.col(static_cast<Eigen::Index>(n + 1)) = x;
    L.cost.col(static_cast<Eigen::Index>(n)) = st.cost;
    for (Eigen::Index b = 0; b < B; ++b)
      if (!(x(b) > 0.0)) L.defaulted[static_cast<std::size_t>(b)] = 1;
    prev = st.holdings;
    L.holdings.push_back(std::move(st.holdings));
    L.traded.push_back(std::move(st.traded));
    P.drift.push_back(std::move(drift));
    P.vol.push_back(std::move(vol));
    P.s.push_back(std::move(next));
  }
  return ev;
}

Estimate early_stopping_metric(const Network& gen, const std::vector<NoisyMarketScenario>& scenarios,
                               const NoiseIncrements& val_inc, const GanProblem& pb) {
  if (scenarios.empty()) throw std::invalid_argument("early_stopping_metric: no scenarios");
  const std::size_t B = val_inc.n_paths();
  std::vector<const NoisyMarketScenario*> per_path(B);
  for (std::size_t j = 0; j < B; ++j) per_path[j] = &scenarios[j % scenarios.size()];
  const PathBatch paths = simulate_euler(pb.grid, ScenarioParams(per_path), pb.ref.s0, val_inc);
  NeuralPolicy policy(gen);
  return expected_utility(policy, paths, pb.eval_setup());
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json history_json(const std::vector<EpochRecord>& h) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& e : h) a.push_back({{"epoch", e.epoch}, {"gen_loss", e.gen_loss}, {"disc_loss", e.disc_loss},
                                       {"val_metric", e.val_metric}, {"lr", e.lr}});
  return a;
}

void save_state(const fs::path& dir, const TrainState& st, const TrainConfig& cfg) {
  fs::create_directories(dir);
  save_network((dir / "gen.bin").string(), st.gen);
  save_network((dir / "disc.bin").string(), st.disc);
  save_network((dir / "best_gen.bin").string(), st.best_gen);
  nlohmann::json j{{"epoch", st.epoch},           {"best_metric", st.best_metric}, {"best_epoch", st.best_epoch},
                   {"seed", cfg.seed},            {"mode", to_string(cfg.problem.mode)},
                   {"history", history_json(st.history)}};
  const fs::path tmp = dir / "state.json.tmp";
  {
    std::ofstream os(tmp);
    os << j.dump(2) << '\n';
  }
  fs::rename(tmp, dir / "state.json");
}

bool load_state(const fs::path& dir, TrainState& st) {
  if (!fs::exists(dir / "state.json")) return false;
  std::ifstream is(dir / "state.json");
  const nlohmann::json j = nlohmann::json::parse(is);
  st.gen = load_network((dir / "gen.bin").string());
  st.disc = load_network((dir / "disc.bin").string());
  st.best_gen = load_network((dir / "best_gen.bin").string());
  st.epoch = j.at("epoch").get<std::size_t>();
  st.best_metric = j.at("best_metric").is_null() ? -std::numeric_limits<double>::infinity()
                                                 : j.at("best_metric").get<double>();
  st.best_epoch = j.at("best_epoch").get<std::size_t>();
  st.history.clear();
  for (const auto& e : j.at("history")) {
    auto num = [&](const char* k) {
      return e.at(k).is_null() ? std::numeric_limits<double>::quiet_NaN() : e.at(k).get<double>();
    };
    st.history.push_back({e.at("epoch").get<std::size_t>(), num("gen_loss"), num("disc_loss"), num("val_metric"), num("lr")});
  }
  return true;
}

}  // namespace

namespace {

// Tape nodes are B x width blocks allocated and freed every iteration. Above
// glibc's default mmap threshold each of those is a fresh mapping and the page
// faults dominate, so keep them on the heap.
void tune_allocator() {
#ifdef __GLIBC__
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 32 << 20);
    mallopt(M_TRIM_THRESHOLD, 256 << 20);
  });
#endif
}

}  // namespace

TrainState train(const TrainConfig& cfg, const DataSplits& data, const TrainOptions& opts) {
  tune_allocator();
  const GanProblem& pb = cfg.problem;
  pb.ref.validate();
  pb.costs.validate();
  if (cfg.batch == 0) throw std::invalid_argument("train: batch size must be >= 1");
  if (cfg.gen_steps == 0 && pb.mode != Mode::non_robust) throw std::invalid_argument("train: gen_steps must be >= 1");
  const std::size_t n_train = data.train.n_paths();
  if (n_train == 0) throw std::invalid_argument("train: empty training split");
  if (data.train.n_steps() != pb.grid.n_steps() || data.train.dim() != pb.dim())
    throw std::invalid_argument("train: training increments do not match problem");

  TrainState st;
  st.gen = make_generator(pb, cfg.gen_net, derive_seed(cfg.seed, 1));
  st.disc = make_discriminator(pb, cfg.disc_net, derive_seed(cfg.seed, 2));
  st.best_gen = st.gen;
  st.best_metric = -std::numeric_limits<double>::infinity();
  const fs::path ckpt = opts.checkpoint_dir;
  if (opts.resume && !ckpt.empty()) load_state(ckpt, st);

  std::vector<NoisyMarketScenario> val_pool;
  if (data.val.n_paths() > 0)
    val_pool = make_noisy_pool(pb.ref, cfg.validation.kind, cfg.validation.scales, pb.grid, data.val.n_paths(),
                               derive_seed(cfg.seed, 3));

  const std::size_t B = std::min(cfg.batch, n_train);
  const std::size_t iters = n_train / B;
  const std::size_t cycle = cfg.gen_steps + cfg.disc_steps;
  std::vector<std::size_t> perm(n_train);

  for (std::size_t epoch = st.epoch; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, cfg.base_lr, cfg.lr_decay, cfg.decay_every);
    std::iota(perm.begin(), perm.end(), 0);
    auto eng = stream_engine(cfg.seed, epoch, 0x73687566);
    std::shuffle(perm.begin(), perm.end(), eng);
    double loss_sum = 0.0;
    for (std::size_t it = 0; it < iters; ++it) {
      const std::uint64_t k = static_cast<std::uint64_t>(epoch) * iters + it;
      const bool gen_turn = pb.mode == Mode::non_robust || cycle == 0 || (k % cycle) < cfg.gen_steps;
      const NoiseIncrements batch =
          data.train.select(std::vector<std::size_t>(perm.begin() + static_cast<std::ptrdiff_t>(it * B),
                                                     perm.begin() + static_cast<std::ptrdiff_t>((it + 1) * B)));
      ad::Tape tape;
      st.gen.bind(tape, gen_turn);
      st.disc.bind(tape, !gen_turn);
      const Episode ep = forward_episode(tape, st.gen, st.disc, batch, pb);
      const double loss = ep.gen_loss.scalar();
      if (!std::isfinite(loss))
        throw DivergenceError("train: non-finite loss at epoch " + std::to_string(epoch) + ", iteration " +
                              std::to_string(it));
      loss_sum += loss;
      tape.backward(ep.gen_loss);
      Network& active = gen_turn ? st.gen : st.disc;
      active.params().zero_grad();
      active.collect_grads(tape);
      if (!gen_turn) active.params().grad = -active.params().grad;  // discriminator minimizes -gen_loss
      if (!active.params().grad.allFinite())
        throw DivergenceError("train: non-finite gradient at epoch " + std::to_string(epoch));
      adam_step(active.params(), lr);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.gen_loss = loss_sum / static_cast<double>(iters);
    rec.disc_loss = -rec.gen_loss;
    rec.lr = lr;
    if (!val_pool.empty()) {
      rec.val_metric = early_stopping_metric(st.gen, val_pool, data.val, pb).value;
      if (!cfg.early_stopping || rec.val_metric > st.best_metric || st.history.empty()) {
        st.best_metric = rec.val_metric;
        st.best_epoch = epoch;
        st.best_gen = st.gen;
      }
    } else {
      rec.val_metric = std::numeric_limits<double>::quiet_NaN();
      st.best_gen = st.gen;
      st.best_epoch = epoch;
    }
    st.history.push_back(rec);
    st.epoch = epoch + 1;
    if (opts.on_epoch) opts.on_epoch(rec);
    if (!ckpt.empty()) save_state(ckpt, st, cfg);
  }
  return st;
}

void write_metric_log(const std::string& path, const std::vector<EpochRecord>& history) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_metric_log: cannot open " + path);
  os.precision(17);
  os << "epoch,gen_loss,disc_loss,val_metric,lr\n";
  for (const auto& e : history)
    os << e.epoch << ',' << e.gen_loss << ',' << e.disc_loss << ',' << e.val_metric << ',' << e.lr << '\n';
}

}  // namespace rgan
