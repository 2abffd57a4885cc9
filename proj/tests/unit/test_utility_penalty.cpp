#include "doctest.h"
#include "helpers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "rgan/utility_penalty.hpp"

using namespace rgan;

namespace {

// Batch with constant per-step parameters (drift mu, volatility factor vol).
PathBatch param_batch(std::size_t B, std::size_t N, const Vec& mu, const Mat& vol) {
  const auto d = mu.size();
  PathBatch p;
  p.s.assign(N + 1, Mat::Ones(static_cast<Eigen::Index>(B), d));
  Eigen::RowVectorXd row(d * d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) row(i * d + j) = vol(i, j);
  p.drift.assign(N, mu.transpose().replicate(static_cast<Eigen::Index>(B), 1));
  p.vol.assign(N, row.replicate(static_cast<Eigen::Index>(B), 1));
  return p;
}

PenaltySpec spec2(PenaltyKind k, double l1 = 1.0, double l2 = 1.0) {
  Mat v(2, 2);
  v << 0.15, 0.0, 0.315, 0.15256146;
  return {k, l1, l2, Eigen::Vector2d(0.035, 0.055), v};
}

}  // namespace

TEST_CASE("shifted utilities vanish at one") {
  for (double p : {0.0, 0.5, 1.0, 2.0, 3.5}) CHECK(PowerUtility{p, true}(1.0) == doctest::Approx(0.0));
}

TEST_CASE("unshifted p = 1/2 at the cash value") {
  CHECK(PowerUtility{0.5, false}(std::exp(0.015)) == doctest::Approx(2.0 * std::exp(0.0075)).epsilon(1e-15));
  CHECK(std::abs(PowerUtility{0.5, false}(std::exp(0.015)) - 2.01506) < 1e-5);
}

TEST_CASE("p -> 1 approaches log") {
  CHECK(std::abs(PowerUtility{1.0 + 1e-6, true}(2.0) - std::log(2.0)) < 1e-5);
  CHECK(std::abs(PowerUtility{1.0 - 1e-6, true}(2.0) - std::log(2.0)) < 1e-5);
  CHECK(PowerUtility{1.0, false}(2.0) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("non-positive wealth maps to -inf without throwing") {
  const double ninf = -std::numeric_limits<double>::infinity();
  CHECK(PowerUtility{1.0, true}(0.0) == ninf);
  CHECK(PowerUtility{0.5, false}(-1.0) == ninf);
  CHECK(PowerUtility{2.0, true}(-0.3) == ninf);
}

TEST_CASE("utilities are increasing and concave") {
  for (double p : {0.5, 1.0, 2.0})
    for (bool shifted : {true, false}) {
      const PowerUtility u{p, shifted};
      const double h = 1e-3;
      for (double x = 0.05; x <= 10.0; x += 0.05) {
        CHECK(u(x + h) > u(x));
        CHECK(u(x + h) - 2.0 * u(x) + u(x - h) < 0.0);
      }
    }
}

TEST_CASE("utility names parse and print") {
  CHECK(PowerUtility::parse("log").p == 1.0);
  const auto a = PowerUtility::parse("u_0.5");
  CHECK((a.p == 0.5 && a.shifted));
  const auto b = PowerUtility::parse("tilde_u_0.5");
  CHECK((b.p == 0.5 && !b.shifted));
  CHECK(PowerUtility::parse(b.to_string()).shifted == false);
  CHECK_THROWS(PowerUtility::parse("exp"));
  CHECK_THROWS(PowerUtility::parse("u_-1"));
  CHECK_THROWS(PowerUtility::parse("u_1x"));
}

TEST_CASE("instantaneous penalties vanish at the reference") {
  for (auto k : {PenaltyKind::additive, PenaltyKind::multiplicative, PenaltyKind::sigma}) {
    const auto s = spec2(k, 3.0, 5.0);
    const auto p = param_batch(4, 10, s.ref_drift, s.ref_vol);
    const auto v = penalty_instant(s, p, TimeGrid::uniform(1.0, 10));
    CHECK(v.vol == doctest::Approx(0.0).epsilon(1e-24));
    CHECK(v.drift == 0.0);
  }
}

TEST_CASE("constant deviation integrates to lambda delta^2 T") {
  const double sref = 0.25, delta = 0.01, lam = 10.0, T = 0.7;
  const PenaltySpec s{PenaltyKind::additive, lam, 1.0, Vec::Constant(1, 0.035), Mat::Constant(1, 1, sref)};
  const auto p = param_batch(3, 13, Vec::Constant(1, 0.035), Mat::Constant(1, 1, std::sqrt(sref * sref + delta)));
  CHECK(penalty_instant(s, p, TimeGrid::uniform(T, 13)).vol == doctest::Approx(lam * delta * delta * T).epsilon(1e-10));
}

TEST_CASE("multiplicative penalty at twice the reference is lambda d T") {
  auto s = spec2(PenaltyKind::multiplicative, 2.0);
  const auto p = param_batch(5, 8, s.ref_drift, std::sqrt(2.0) * s.ref_vol);
  CHECK(penalty_instant(s, p, TimeGrid::uniform(1.5, 8)).vol == doctest::Approx(2.0 * 2 * 1.5).epsilon(1e-10));
}

TEST_CASE("drift term and linear scaling in lambda") {
  auto s = spec2(PenaltyKind::additive, 1.0, 1.0);
  const Vec mu = s.ref_drift + Eigen::Vector2d(0.01, -0.02);
  Mat vol = s.ref_vol;
  vol(1, 1) += 0.05;
  const auto p = param_batch(3, 5, mu, vol);
  const auto g = TimeGrid::uniform(1.0, 5);
  const auto v1 = penalty_instant(s, p, g);
  CHECK(v1.drift == doctest::Approx(0.0005).epsilon(1e-12));
  s.lambda1 = 4.0;
  s.lambda2 = 0.5;
  const auto v2 = penalty_instant(s, p, g);
  CHECK(v2.vol == doctest::Approx(4.0 * v1.vol));
  CHECK(v2.drift == doctest::Approx(0.5 * v1.drift));
  CHECK(v1.vol > 0.0);
  CHECK(v1.total() == doctest::Approx(v1.vol + v1.drift));
}

TEST_CASE("sigma penalty measures the volatility factor") {
  const PenaltySpec s{PenaltyKind::sigma, 10.0, 1.0, Vec::Constant(1, 0.035), Mat::Constant(1, 1, 0.25)};
  const auto p = param_batch(2, 4, Vec::Constant(1, 0.035), Mat::Constant(1, 1, 0.3));
  CHECK(penalty_instant(s, p, TimeGrid::uniform(1.0, 4)).vol == doctest::Approx(10.0 * 0.0025));
}

TEST_CASE("instant penalty needs per-step parameters and an invertible reference") {
  auto s = spec2(PenaltyKind::additive);
  PathBatch bare;
  bare.s.assign(3, Mat::Ones(2, 2));
  CHECK_THROWS(penalty_instant(s, bare, TimeGrid::uniform(1.0, 2)));
  auto sing = spec2(PenaltyKind::multiplicative);
  sing.ref_vol = Mat::Zero(2, 2);
  CHECK_THROWS(instant_vol_term(sing, Mat::Identity(2, 2)));
}

TEST_CASE("pathwise penalties: flat paths and exact reference return") {
  PenaltySpec s{PenaltyKind::pathwise, 2.0, 3.0, Vec::Zero(1), Mat::Zero(1, 1)};
  PathBatch flat;
  flat.s.assign(6, Mat::Constant(4, 1, 1.7));
  const auto v = penalty_pathwise(s, flat, TimeGrid::uniform(1.0, 5));
  CHECK(v.vol == 0.0);
  CHECK(v.drift == 0.0);

  s.ref_drift = Vec::Constant(1, 0.05);
  PathBatch one;
  one.s = {Mat::Constant(1, 1, 2.0), Mat::Constant(1, 1, 1.9), Mat::Constant(1, 1, 2.0 * std::exp(0.05))};
  CHECK(penalty_pathwise(s, one, TimeGrid::uniform(1.0, 2)).drift == doctest::Approx(0.0).epsilon(1e-28));
  one.s[1](0, 0) = -1.0;
  CHECK_THROWS(penalty_pathwise(s, one, TimeGrid::uniform(1.0, 2)));
}

TEST_CASE("pathwise penalty: hand-computed two-path value") {
  const PenaltySpec s{PenaltyKind::pathwise, 1.5, 2.0, Vec::Constant(1, 0.1), Mat::Constant(1, 1, 0.2)};
  PathBatch p;
  p.s = {Mat::Ones(2, 1), Mat(2, 1), Mat(2, 1)};
  p.s[1] << 1.1, 0.9;
  p.s[2] << 1.21, 0.99;
  const double T = 0.5;
  // QCV per path: sum of squared log increments
  const double q0 = 2.0 * std::pow(std::log(1.1), 2);
  const double q1 = std::pow(std::log(0.9), 2) + std::pow(std::log(1.1), 2);
  const double qref = 0.04 * T;
  const double r1 = 1.5 * (std::pow(q0 - qref, 2) + std::pow(q1 - qref, 2)) / 2.0;
  const double r2 = 2.0 * std::pow((1.21 + 0.99) / 2.0 - std::exp(0.1 * T), 2);
  const auto v = penalty_pathwise(s, p, TimeGrid::uniform(T, 2));
  CHECK(v.vol == doctest::Approx(r1).epsilon(1e-13));
  CHECK(v.drift == doctest::Approx(r2).epsilon(1e-13));
}

TEST_CASE("R2 is invariant to permuting paths and R1, R2 vanish in expectation only") {
  auto s = spec2(PenaltyKind::pathwise);
  const auto g = TimeGrid::uniform(1.0, 65);
  const auto inc = NoiseIncrements::generate(300, 65, 2, 4);
  const auto p = simulate_euler(g, ConstantParams(s.ref_drift, s.ref_vol), Vec::Ones(2), inc);
  std::vector<std::size_t> idx(300);
  for (std::size_t i = 0; i < 300; ++i) idx[i] = 299 - i;
  std::shuffle(idx.begin(), idx.end(), std::mt19937_64(1));
  const auto q = simulate_euler(g, ConstantParams(s.ref_drift, s.ref_vol), Vec::Ones(2), inc.select(idx));
  const auto a = penalty_pathwise(s, p, g), b = penalty_pathwise(s, q, g);
  CHECK(a.drift == doctest::Approx(b.drift).epsilon(1e-12));
  CHECK(a.vol == doctest::Approx(b.vol).epsilon(1e-12));
  CHECK(a.vol >= 0.0);
  CHECK(a.drift >= 0.0);
}

TEST_CASE("penalty dispatch and names") {
  for (auto k : {PenaltyKind::additive, PenaltyKind::multiplicative, PenaltyKind::sigma, PenaltyKind::pathwise})
    CHECK(penalty_kind_from_string(to_string(k)) == k);
  CHECK_THROWS(penalty_kind_from_string("entropy"));
}
