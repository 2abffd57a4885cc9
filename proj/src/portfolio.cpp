#include "rgan/portfolio.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace rgan {

void CostSpec::validate() const {
  if (!(prop >= 0.0) || !(base >= 0.0)) throw std::invalid_argument("CostSpec: costs must be non-negative");
}

Mat CashPolicy::weights(const PolicyInput& in) {
  return Mat::Zero(in.prices.rows(), static_cast<Eigen::Index>(dim_));
}

Mat ConstantWeightPolicy::weights(const PolicyInput& in) {
  if (in.prices.cols() != w_.size()) throw std::invalid_argument("ConstantWeightPolicy: dimension mismatch");
  return w_.transpose().replicate(in.prices.rows(), 1);
}

StepResult step_wealth(const Vec& wealth, const Mat& weights, const Mat& prev_holdings, const Mat& prices,
                       const Mat& price_change, double rate, double dt, const CostSpec& costs) {
  const auto B = wealth.size();
  const auto d = prices.cols();
  if (weights.rows() != B || weights.cols() != d || prev_holdings.rows() != B || prev_holdings.cols() != d ||
      prices.rows() != B || price_change.rows() != B || price_change.cols() != d)
    throw std::invalid_argument("step_wealth: shape mismatch");
  StepResult r;
  r.holdings = (weights.array().colwise() * wealth.array()) / prices.array();
  r.traded = (r.holdings - prev_holdings).cwiseAbs();
  const double grow = 1.0 + rate * dt;
  r.cost.resize(B);
  for (Eigen::Index b = 0; b < B; ++b) {
    double c = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      const double a = r.traded(b, i);
      c += a * prices(b, i) * costs.prop + (a > kTradeTol ? costs.base : 0.0);
    }
    r.cost(b) = grow * c;
  }
  const Vec gains = (r.holdings.array() * price_change.array()).rowwise().sum();
  const Vec cash = wealth.array() * (1.0 - weights.rowwise().sum().array());
  r.wealth = wealth + gains + cash * (rate * dt) - r.cost;
  return r;
}

std::size_t WealthLedger::n_defaulted() const {
  std::size_t n = 0;
  for (auto f : defaulted) n += f;
  return n;
}

WealthLedger roll_out(Policy& policy, const PathBatch& paths, const TimeGrid& grid, double x0, double rate,
                      const CostSpec& costs) {
  costs.validate();
  const std::size_t N = paths.n_steps();
  if (N != grid.n_steps()) throw std::invalid_argument("roll_out: paths do not match grid");
  const auto B = static_cast<Eigen::Index>(paths.n_paths());
  const auto d = static_cast<Eigen::Index>(paths.dim());
  WealthLedger led;
  led.x0 = x0;
  led.x.resize(B, static_cast<Eigen::Index>(N + 1));
  led.x.col(0).setConstant(x0);
  led.cost.resize(B, static_cast<Eigen::Index>(N));
  led.defaulted.assign(static_cast<std::size_t>(B), x0 <= 0.0 ? 1 : 0);
  policy.reset(static_cast<std::size_t>(B));

  Mat prev = Mat::Zero(B, d);
  Vec x = led.x.col(0);
  for (std::size_t n = 0; n < N; ++n) {
    PolicyInput in{n, grid.time(n), grid.horizon(), paths.s[n], x, prev};
    const Mat w = policy.weights(in);
    if (w.rows() != B || w.cols() != d) throw std::runtime_error("roll_out: policy returned wrong shape");
    for (Eigen::Index b = 0; b < B; ++b)
      if (!w.row(b).allFinite())
        throw std::runtime_error("roll_out: policy '" + policy.name() + "' produced non-finite weights on path " +
                                 std::to_string(b) + " at step " + std::to_string(n));
    StepResult r = step_wealth(x, w, prev, paths.s[n], paths.s[n + 1] - paths.s[n], rate, grid.dt(n), costs);
    x = r.wealth;
    led.x.col(static_cast<Eigen::Index>(n + 1)) = x;
    led.cost.col(static_cast<Eigen::Index>(n)) = r.cost;
    for (Eigen::Index b = 0; b < B; ++b)
      if (!(x(b) > 0.0)) led.defaulted[static_cast<std::size_t>(b)] = 1;
    prev = r.holdings;
    led.holdings.push_back(std::move(r.holdings));
    led.traded.push_back(std::move(r.traded));
  }
  return led;
}

void write_ledger_csv(const std::string& path, const WealthLedger& led, const TimeGrid& grid, std::size_t max_paths) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_ledger_csv: cannot open " + path);
  os.precision(17);
  const auto d = led.holdings.empty() ? 0 : led.holdings.front().cols();
  os << "t,path_id,X";
  for (Eigen::Index i = 0; i < d; ++i) os << ",H_" << (i + 1);
  for (Eigen::Index i = 0; i < d; ++i) os << ",A_" << (i + 1);
  os << ",C\n";
  const auto B = static_cast<Eigen::Index>(std::min(max_paths, static_cast<std::size_t>(led.x.rows())));
  const auto N = static_cast<std::size_t>(led.cost.cols());
  for (Eigen::Index b = 0; b < B; ++b)
    for (std::size_t n = 0; n <= N; ++n) {
      os << grid.time(n) << ',' << b << ',' << led.x(b, static_cast<Eigen::Index>(n));
      for (Eigen::Index i = 0; i < d; ++i) os << ',' << (n < N ? led.holdings[n](b, i) : led.holdings[N - 1](b, i));
      for (Eigen::Index i = 0; i < d; ++i) os << ',' << (n < N ? led.traded[n](b, i) : 0.0);
      os << ',' << (n < N ? led.cost(b, static_cast<Eigen::Index>(n)) : 0.0) << '\n';
    }
}

}  // namespace rgan
