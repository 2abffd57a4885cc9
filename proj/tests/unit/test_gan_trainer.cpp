#include "doctest.h"
#include "helpers.hpp"

#include <cmath>
#include <filesystem>

#include "rgan/gan_trainer.hpp"
#include "rgan/random.hpp"

using namespace rgan;

namespace {

GanProblem problem(Mode mode, std::size_t N, double c_prop = 0.0, PenaltyKind kind = PenaltyKind::additive,
                   std::size_t d = 1) {
  GanProblem pb;
  pb.grid = TimeGrid::uniform(1.0, N);
  if (d == 1) {
    pb.ref.drift = Vec::Constant(1, 0.035);
    pb.ref.vol = Mat::Constant(1, 1, 0.25);
  } else {
    pb.ref.drift = Eigen::Vector2d(0.035, 0.045);
    pb.ref.vol.resize(2, 2);
    pb.ref.vol << 0.25, 0.0, 0.1, 0.2;
  }
  pb.ref.rate = 0.015;
  pb.ref.s0 = Vec::Ones(static_cast<Eigen::Index>(d));
  pb.x0 = 1.0;
  pb.costs = {c_prop, 0.0};
  pb.penalty.kind = kind;
  pb.penalty.lambda1 = 2.0;
  pb.penalty.lambda2 = 3.0;
  pb.penalty.ref_drift = pb.ref.drift;
  pb.penalty.ref_vol = pb.ref.vol;
  pb.mode = mode;
  return pb;
}

NetSpec small(Arch a = Arch::ffnn, std::size_t width = 6) { return {a, 0, 0, {width}, 1}; }

TrainConfig config(const GanProblem& pb, std::size_t epochs) {
  TrainConfig c;
  c.problem = pb;
  c.gen_net = small();
  c.disc_net = small();
  c.epochs = epochs;
  c.batch = 50;
  c.seed = 42;
  c.validation.scales = {0.0, 0.0};
  return c;
}

DataSplits splits(const GanProblem& pb, std::size_t n_train, std::size_t n_val) {
  return {NoiseIncrements::generate(n_train, pb.grid.n_steps(), pb.dim(), 1),
          NoiseIncrements::generate(n_val, pb.grid.n_steps(), pb.dim(), 2)};
}

double episode_loss(const Network& gen, const Network& disc, const NoiseIncrements& inc, const GanProblem& pb) {
  ad::Tape t;
  Network g = gen, dn = disc;
  g.bind(t, false);
  dn.bind(t, false);
  return forward_episode(t, g, dn, inc, pb).gen_loss.scalar();
}

// Max relative disagreement between tape gradients of gen_loss and central differences.
double gradient_error(Network& gen, Network& disc, bool wrt_gen, const NoiseIncrements& inc, const GanProblem& pb) {
  ad::Tape t;
  gen.bind(t, wrt_gen);
  disc.bind(t, !wrt_gen);
  t.backward(forward_episode(t, gen, disc, inc, pb).gen_loss);
  Network& net = wrt_gen ? gen : disc;
  net.params().zero_grad();
  net.collect_grads(t);
  const Vec g = net.params().grad;
  Vec fd(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double keep = net.params().values(i);
    net.params().values(i) = keep + 1e-6;
    const double up = episode_loss(gen, disc, inc, pb);
    net.params().values(i) = keep - 1e-6;
    const double dn = episode_loss(gen, disc, inc, pb);
    net.params().values(i) = keep;
    fd(i) = (up - dn) / 2e-6;
  }
  return (fd - g).norm() / std::max(fd.norm(), 1e-12);
}

}  // namespace

TEST_CASE("mode names round-trip") {
  for (Mode m : {Mode::non_robust, Mode::vol_robust, Mode::fully_robust}) CHECK(mode_from_string(to_string(m)) == m);
  CHECK_THROWS(mode_from_string("robust"));
}

TEST_CASE("constant heads: tape episode, replay and Euler roll-out agree") {
  for (std::size_t d : {1u, 2u}) {
    const GanProblem pb = problem(Mode::vol_robust, 8, 0.01, PenaltyKind::additive, d);
    Network gen = make_generator(pb, small(), 1);
    const Network disc = make_discriminator(pb, small(), 2);
    const Vec w = Vec::LinSpaced(static_cast<Eigen::Index>(d), 0.3, 0.6);
    gen.set_constant_output(w);
    const auto inc = NoiseIncrements::generate(40, 8, d, 3);

    ad::Tape t;
    Network g = gen, dn = disc;
    g.bind(t, false);
    dn.bind(t, false);
    const Episode ep = forward_episode(t, g, dn, inc, pb);
    const EpisodeValues ev = play_episode(gen, disc, inc, pb);
    const PathBatch paths = simulate_euler(pb.grid, ConstantParams(pb.ref.drift, pb.ref.vol), pb.ref.s0, inc);
    ConstantWeightPolicy pol(w);
    const WealthLedger led = roll_out(pol, paths, pb.grid, pb.x0, pb.ref.rate, pb.costs);

    CHECK(testing::max_abs_diff(ev.paths.s.back(), paths.s.back()) < 1e-14);
    CHECK(testing::max_abs_diff(ev.ledger.terminal(), led.terminal()) < 1e-13);
    CHECK(testing::max_abs_diff(ep.terminal.value(), led.terminal()) < 1e-13);
    CHECK(std::abs(ep.penalty.scalar()) < 1e-15);
  }
}

TEST_CASE("non-robust cash policy compounds at the riskless rate") {
  const GanProblem pb = problem(Mode::non_robust, 10);
  Network gen = make_generator(pb, small(), 1);
  gen.zero_output();
  const Network disc = make_discriminator(pb, small(), 2);
  const auto inc = NoiseIncrements::generate(7, 10, 1, 4);
  const EpisodeValues ev = play_episode(gen, disc, inc, pb);
  const double expect = std::pow(1.0 + 0.015 * 0.1, 10);
  for (Eigen::Index b = 0; b < 7; ++b) CHECK(ev.ledger.terminal()(b) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(episode_loss(gen, disc, inc, pb) == doctest::Approx(-std::log(expect)).epsilon(1e-13));
}

TEST_CASE("two-path two-step episode by hand") {
  GanProblem pb = problem(Mode::fully_robust, 2, 0.01);
  pb.x0 = 2.0;
  Network gen = make_generator(pb, small(), 1);
  Network disc = make_discriminator(pb, small(), 2);
  gen.set_constant_output(Vec::Constant(1, 0.5));
  Vec head(2);
  head << 0.05, 0.3;
  disc.set_constant_output(head);
  NoiseIncrements inc = NoiseIncrements::zeros(2, 2, 1);
  inc.z[0] << 1.0, -0.5;
  inc.z[1] << 0.2, 2.0;

  const double dt = 0.5, r = 0.015, c = 0.01, mu = 0.05, sg = 0.3;
  double util = 0.0;
  for (int b = 0; b < 2; ++b) {
    double S = 1.0, X = 2.0, Hp = 0.0;
    for (int n = 0; n < 2; ++n) {
      const double Sn = S * (1.0 + mu * dt + sg * std::sqrt(dt) * inc.z[static_cast<std::size_t>(n)](b, 0));
      const double H = 0.5 * X / S;
      const double Xn = X + H * (Sn - S) + (X - H * S) * r * dt - c * std::abs(H - Hp) * S * (1.0 + r * dt);
      S = Sn;
      X = Xn;
      Hp = H;
    }
    util += std::log(X) / 2.0;
  }
  const double pen = 2.0 * std::pow(sg * sg - 0.0625, 2) + 3.0 * std::pow(mu - 0.035, 2);

  ad::Tape t;
  gen.bind(t, false);
  disc.bind(t, false);
  const Episode ep = forward_episode(t, gen, disc, inc, pb);
  CHECK(ep.mean_utility.scalar() == doctest::Approx(util).epsilon(1e-14));
  CHECK(ep.penalty.scalar() == doctest::Approx(pen).epsilon(1e-14));
  CHECK(ep.gen_loss.scalar() == doctest::Approx(-(util + pen)).epsilon(1e-14));

  pb.mode = Mode::vol_robust;
  const EpisodeValues ev = play_episode(gen, disc, inc, pb);
  for (const Mat& m : ev.paths.drift) CHECK(m.cwiseEqual(0.035).all());
  for (const Mat& m : ev.paths.vol) CHECK(m.cwiseEqual(0.3).all());
}

TEST_CASE("tape gradients through the friction roll-out match finite differences") {
  for (Arch arch : {Arch::ffnn, Arch::rnn}) {
    for (std::size_t N : {5u, 10u}) {
      if (arch == Arch::ffnn && N == 10) continue;
      const GanProblem pb = problem(Mode::fully_robust, N, 0.01);
      Network gen = make_generator(pb, small(arch), 7);
      Network disc = make_discriminator(pb, small(arch), 8);
      // move the discriminator off its constant start so both networks matter
      for (Eigen::Index i = 0; i < disc.params().values.size(); ++i) disc.params().values(i) += 0.01 * std::sin(1.0 + i);
      const auto inc = NoiseIncrements::generate(16, N, 1, 9);
      CAPTURE(to_string(arch));
      CAPTURE(N);
      CHECK(gradient_error(gen, disc, true, inc, pb) < 1e-6);
      CHECK(gradient_error(gen, disc, false, inc, pb) < 1e-6);
    }
  }
  const GanProblem pb = problem(Mode::fully_robust, 4, 0.005, PenaltyKind::multiplicative, 2);
  Network gen = make_generator(pb, small(), 3);
  Network disc = make_discriminator(pb, small(), 4);
  for (Eigen::Index i = 0; i < disc.params().values.size(); ++i) disc.params().values(i) += 0.01 * std::cos(2.0 + i);
  const auto inc = NoiseIncrements::generate(8, 4, 2, 5);
  CHECK(gradient_error(gen, disc, true, inc, pb) < 1e-6);
  CHECK(gradient_error(gen, disc, false, inc, pb) < 1e-6);
}

TEST_CASE("zero-noise validation of the cash policy is exact") {
  const GanProblem pb = problem(Mode::vol_robust, 10);
  Network gen = make_generator(pb, small(), 1);
  gen.zero_output();
  const auto pool = make_noisy_pool(pb.ref, NoiseKind::cumulative, {0.0, 0.0}, pb.grid, 5, 3);
  const auto inc = NoiseIncrements::generate(5, 10, 1, 4);
  const Estimate e = early_stopping_metric(gen, pool, inc, pb);
  CHECK(e.value == doctest::Approx(10.0 * std::log(1.0 + 0.0015)).epsilon(1e-13));
  CHECK(e.std_error < 1e-15);
}

TEST_CASE("training bookkeeping") {
  const GanProblem pb = problem(Mode::fully_robust, 5);
  const TrainConfig cfg = config(pb, 3);
  const DataSplits data = splits(pb, 200, 30);
  const TrainState st = train(cfg, data);
  REQUIRE(st.history.size() == 3);
  double best = -1e300;
  for (const auto& e : st.history) {
    CHECK(e.disc_loss == -e.gen_loss);
    CHECK(e.lr == doctest::Approx(5e-4));
    best = std::max(best, e.val_metric);
  }
  CHECK(st.best_metric == best);
  CHECK(st.history[st.best_epoch].val_metric == best);
  const auto pool = make_noisy_pool(pb.ref, cfg.validation.kind, cfg.validation.scales, pb.grid, 30, derive_seed(42, 3));
  CHECK(early_stopping_metric(st.best_gen, pool, data.val, pb).value == best);
  CHECK(st.epoch == 3);
}

TEST_CASE("the non-robust discriminator never moves") {
  const GanProblem pb = problem(Mode::non_robust, 5);
  const TrainConfig cfg = config(pb, 2);
  const TrainState st = train(cfg, splits(pb, 100, 10));
  const Network fresh = make_discriminator(pb, cfg.disc_net, derive_seed(cfg.seed, 2));
  CHECK(st.disc.params().values == fresh.params().values);
  const Network gen0 = make_generator(pb, cfg.gen_net, derive_seed(cfg.seed, 1));
  CHECK(st.gen.params().values != gen0.params().values);
}

TEST_CASE("seeded training is reproducible") {
  const GanProblem pb = problem(Mode::fully_robust, 5, 0.01);
  TrainConfig cfg = config(pb, 2);
  const DataSplits data = splits(pb, 100, 10);
  const TrainState a = train(cfg, data), b = train(cfg, data);
  CHECK(a.gen.params().values == b.gen.params().values);
  CHECK(a.disc.params().values == b.disc.params().values);
  cfg.seed = 43;
  CHECK(train(cfg, data).gen.params().values != a.gen.params().values);
}

TEST_CASE("resuming from a checkpoint matches an uninterrupted run") {
  namespace fs = std::filesystem;
  const GanProblem pb = problem(Mode::fully_robust, 5, 0.01);
  const DataSplits data = splits(pb, 100, 10);
  const fs::path root = fs::temp_directory_path() / "rgan_resume_test";
  fs::remove_all(root);
  TrainConfig cfg = config(pb, 3);
  const TrainState full = train(cfg, data, {(root / "full").string(), false, {}});
  cfg.epochs = 1;
  train(cfg, data, {(root / "split").string(), false, {}});
  cfg.epochs = 3;
  std::size_t seen = 0;
  const TrainState resumed = train(cfg, data, {(root / "split").string(), true, [&](const EpochRecord&) { ++seen; }});
  CHECK(seen == 2);
  CHECK(resumed.gen.params().values == full.gen.params().values);
  CHECK(resumed.disc.params().values == full.disc.params().values);
  CHECK(resumed.best_gen.params().values == full.best_gen.params().values);
  CHECK(resumed.gen.params().step == full.gen.params().step);
  REQUIRE(resumed.history.size() == 3);
  CHECK(resumed.history[2].gen_loss == full.history[2].gen_loss);
  CHECK(fs::exists(root / "full" / "state.json"));
  fs::remove_all(root);
}

TEST_CASE("training rejects bad inputs") {
  const GanProblem pb = problem(Mode::fully_robust, 5);
  TrainConfig cfg = config(pb, 1);
  const DataSplits data = splits(pb, 100, 10);
  cfg.batch = 0;
  CHECK_THROWS(train(cfg, data));
  cfg.batch = 10;
  CHECK_THROWS(train(cfg, splits(problem(Mode::fully_robust, 6), 100, 10)));
  CHECK_THROWS(train(cfg, DataSplits{}));
}

TEST_CASE("without early stopping the last generator is kept") {
  const GanProblem pb = problem(Mode::fully_robust, 5);
  TrainConfig cfg = config(pb, 3);
  cfg.early_stopping = false;
  const TrainState st = train(cfg, splits(pb, 200, 30));
  CHECK(st.best_epoch == 2);
  CHECK(st.best_gen.params().values == st.gen.params().values);
  CHECK(st.best_metric == st.history.back().val_metric);
  CHECK(std::isfinite(st.history[0].val_metric));
}
