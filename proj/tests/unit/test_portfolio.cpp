#include "doctest.h"
#include "helpers.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "rgan/portfolio.hpp"
#include "rgan/utility_penalty.hpp"

using namespace rgan;

namespace {

// Weights depending on wealth and prices, to exercise state dependence.
class WobblyPolicy final : public Policy {
 public:
  Mat weights(const PolicyInput& in) override {
    Mat w(in.prices.rows(), in.prices.cols());
    for (Eigen::Index b = 0; b < w.rows(); ++b)
      for (Eigen::Index i = 0; i < w.cols(); ++i)
        w(b, i) = 0.3 + 0.2 * std::sin(3.0 * in.wealth(b) + static_cast<double>(i) + in.prices(b, i) +
                                        static_cast<double>(in.step));
    return w;
  }
  std::string name() const override { return "wobbly"; }
};

class NanPolicy final : public Policy {
 public:
  Mat weights(const PolicyInput& in) override {
    Mat w = Mat::Zero(in.prices.rows(), in.prices.cols());
    if (in.step == 2) w(3, 0) = NAN;
    return w;
  }
  std::string name() const override { return "nan"; }
};

PathBatch bs_paths(std::size_t B, std::size_t N, std::uint64_t seed, double mu = 0.035, double sigma = 0.25) {
  return simulate_euler(TimeGrid::uniform(1.0, N), ConstantParams(Vec::Constant(1, mu), Mat::Constant(1, 1, sigma)),
                        Vec::Ones(1), NoiseIncrements::generate(B, N, 1, seed));
}

PathBatch bs2_paths(std::size_t B, std::size_t N, std::uint64_t seed) {
  Mat v(2, 2);
  v << 0.15, 0.0, 0.315, 0.15256146;
  return simulate_euler(TimeGrid::uniform(1.0, N), ConstantParams(Eigen::Vector2d(0.035, 0.055), v),
                        Eigen::Vector2d(1.0, 1.5), NoiseIncrements::generate(B, N, 2, seed));
}

}  // namespace

TEST_CASE("cash step grows at the bank rate") {
  const Vec x = Vec::Constant(2, 3.0);
  const auto r = step_wealth(x, Mat::Zero(2, 1), Mat::Zero(2, 1), Mat::Ones(2, 1), Mat::Constant(2, 1, 0.2), 0.015,
                             1.0 / 65, {0.01, 0.0});
  CHECK(r.wealth(0) == doctest::Approx(3.0 * (1.0 + 0.015 / 65)).epsilon(1e-15));
  CHECK(r.cost(1) == 0.0);
}

TEST_CASE("initial purchase is charged proportional costs") {
  const auto r = step_wealth(Vec::Ones(1), Mat::Constant(1, 1, 0.5), Mat::Zero(1, 1), Mat::Ones(1, 1),
                             Mat::Zero(1, 1), 0.015, 1.0 / 65, {0.01, 0.0});
  CHECK(r.traded(0, 0) == doctest::Approx(0.5));
  CHECK(r.cost(0) == doctest::Approx(0.0050011538461538).epsilon(1e-12));
}

TEST_CASE("base costs use the trade tolerance") {
  const Mat prev = Mat::Constant(1, 1, 0.5);
  const auto still = step_wealth(Vec::Ones(1), Mat::Constant(1, 1, 0.5), prev, Mat::Ones(1, 1), Mat::Zero(1, 1), 0.0,
                                 0.1, {0.0, 0.02});
  CHECK(still.cost(0) == 0.0);
  const auto moved = step_wealth(Vec::Ones(1), Mat::Constant(1, 1, 0.6), prev, Mat::Ones(1, 1), Mat::Zero(1, 1), 0.0,
                                 0.1, {0.0, 0.02});
  CHECK(moved.cost(0) == doctest::Approx(0.02));
}

TEST_CASE("unchanged holdings trade nothing") {
  // pi_n X_n / S_n equals the previous holdings exactly
  const auto r = step_wealth(Vec::Constant(1, 2.0), Mat::Constant(1, 1, 0.25), Mat::Constant(1, 1, 0.5),
                             Mat::Ones(1, 1), Mat::Zero(1, 1), 0.015, 0.1, {0.01, 0.0});
  CHECK(r.traded(0, 0) == 0.0);
  CHECK(r.cost(0) == 0.0);
}

TEST_CASE("cash policy roll-out compounds discretely") {
  const auto p = bs_paths(10, 65, 1);
  CashPolicy cash(1);
  const auto led = roll_out(cash, p, TimeGrid::uniform(1.0, 65), 1.0, 0.015, {0.01, 0.0});
  const double expect = std::pow(1.0 + 0.015 / 65, 65);
  for (int b = 0; b < 10; ++b) CHECK(led.terminal()(b) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(led.n_defaulted() == 0);
  // unshifted p = 1/2 of the cash terminal value; printed value 2.0151
  CHECK(std::abs(PowerUtility{0.5, false}(led.terminal()(0)) - 2.0151) < 5e-5);
}

TEST_CASE("zero-cost recursion equals the frictionless update") {
  const auto p = bs2_paths(64, 20, 4);
  const auto g = TimeGrid::uniform(1.0, 20);
  WobblyPolicy pol;
  const auto led = roll_out(pol, p, g, 1.3, 0.015, {0.0, 0.0});
  // independent loop oracle
  for (Eigen::Index b = 0; b < 64; ++b) {
    double x = 1.3;
    for (std::size_t n = 0; n < 20; ++n) {
      Vec xb = Vec::Constant(1, x);
      Mat s = p.s[n].row(b);
      const Mat w = pol.weights({n, g.time(n), 1.0, s, xb, Mat::Zero(1, 2)});
      double risky = 0.0, gains = 0.0;
      for (int i = 0; i < 2; ++i) {
        const double h = x * w(0, i) / p.s[n](b, i);
        risky += h * p.s[n](b, i);
        gains += h * (p.s[n + 1](b, i) - p.s[n](b, i));
      }
      x = x + gains + (x - risky) * 0.015 * g.dt(n);
    }
    CHECK(led.terminal()(b) == doctest::Approx(x).epsilon(1e-13));
  }
}

TEST_CASE("holdings identity, cost monotonicity, scale equivariance") {
  const auto p = bs2_paths(32, 15, 9);
  const auto g = TimeGrid::uniform(1.0, 15);
  WobblyPolicy pol;
  const auto led = roll_out(pol, p, g, 1.0, 0.015, {0.005, 0.0});
  for (std::size_t n = 0; n < 15; ++n) {
    const Vec x = led.x.col(static_cast<Eigen::Index>(n));
    PolicyInput in{n, g.time(n), 1.0, p.s[n], x, n == 0 ? Mat::Zero(32, 2) : led.holdings[n - 1]};
    const Mat w = pol.weights(in);
    const Mat lhs = led.holdings[n].cwiseProduct(p.s[n]);
    const Mat rhs = w.array().colwise() * x.array();
    CHECK(testing::max_abs_diff(lhs, rhs) < 1e-13);
    CHECK(led.cost.col(static_cast<Eigen::Index>(n)).minCoeff() >= 0.0);
  }
  CHECK(led.x.col(0).isConstant(1.0));

  ConstantWeightPolicy fixed(Eigen::Vector2d(0.4, -0.2));
  Vec prev = roll_out(fixed, p, g, 1.0, 0.015, {0.0, 0.0}).terminal();
  for (double c : {0.001, 0.01, 0.05}) {
    const Vec cur = roll_out(fixed, p, g, 1.0, 0.015, {c, 0.0}).terminal();
    CHECK((cur.array() <= prev.array()).all());
    prev = cur;
  }

  const Vec one = roll_out(fixed, p, g, 1.0, 0.015, {0.01, 0.0}).terminal();
  const Vec two = roll_out(fixed, p, g, 2.0, 0.015, {0.01, 0.0}).terminal();
  CHECK(testing::max_abs_diff(two, 2.0 * one) < 1e-14);
}

TEST_CASE("Merton weight: E[ln X_T] matches the discrete-compounding value") {
  const double pi = 0.32, mu = 0.035, r = 0.015, sigma = 0.25, dt = 1.0 / 65;
  const auto p = bs_paths(100000, 65, 33, mu, sigma);
  ConstantWeightPolicy pol(Vec::Constant(1, pi));
  const auto led = roll_out(pol, p, TimeGrid::uniform(1.0, 65), 1.0, r, {});
  const auto m = testing::moments(led.terminal().array().log().matrix());
  // per step X' = X (1 + a + b z); Simpson rule for E ln(1 + a + b z)
  const double a = pi * mu * dt + (1.0 - pi) * r * dt, bb = pi * sigma * std::sqrt(dt);
  const int K = 20000;
  const double lo = -12.0, h = 24.0 / K;
  double acc = 0.0;
  for (int k = 0; k <= K; ++k) {
    const double z = lo + k * h;
    const double f = std::log(1.0 + a + bb * z) * std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
    acc += f * (k == 0 || k == K ? 1.0 : (k % 2 ? 4.0 : 2.0));
  }
  const double expect = 65.0 * acc * h / 3.0;
  CHECK(std::abs(m.mean - expect) < 3.0 * m.se());
}

TEST_CASE("negative wealth is tracked as default") {
  const auto p = bs_paths(2000, 65, 5, 0.035, 0.6);
  ConstantWeightPolicy levered(Vec::Constant(1, 8.0));
  const auto led = roll_out(levered, p, TimeGrid::uniform(1.0, 65), 1.0, 0.015, {});
  CHECK(led.n_defaulted() > 0);
  for (std::size_t b = 0; b < 2000; ++b)
    if ((led.x.row(static_cast<Eigen::Index>(b)).array() <= 0.0).any()) CHECK(led.defaulted[b] == 1);
}

TEST_CASE("non-finite policy output names the path") {
  const auto p = bs_paths(5, 4, 2);
  NanPolicy pol;
  try {
    roll_out(pol, p, TimeGrid::uniform(1.0, 4), 1.0, 0.0, {});
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("path 3") != std::string::npos);
  }
}

TEST_CASE("ledger CSV layout") {
  const auto p = bs2_paths(2, 3, 1);
  const auto g = TimeGrid::uniform(1.0, 3);
  ConstantWeightPolicy pol(Eigen::Vector2d(0.1, 0.2));
  const auto led = roll_out(pol, p, g, 1.0, 0.015, {0.01, 0.0});
  const auto path = (std::filesystem::temp_directory_path() / "rgan_ledger.csv").string();
  write_ledger_csv(path, led, g);
  std::ifstream is(path);
  std::string header;
  std::getline(is, header);
  CHECK(header == "t,path_id,X,H_1,H_2,A_1,A_2,C");
  int rows = 0;
  for (std::string line; std::getline(is, line);) ++rows;
  CHECK(rows == 2 * 4);
  std::filesystem::remove(path);
}

TEST_CASE("invalid costs are rejected") {
  CHECK_THROWS(CostSpec{-0.1, 0.0}.validate());
  CHECK_THROWS(CostSpec{0.0, -1.0}.validate());
}
