#pragma once

#include <cstddef>
#include <vector>

namespace rgan {

/// Discretization 0 = t_0 < ... < t_N = T. Step n (0-based) spans [t_n, t_{n+1}].
class TimeGrid {
 public:
  TimeGrid() = default;

  static TimeGrid uniform(double horizon, std::size_t n_steps);
  static TimeGrid from_steps(std::vector<double> steps);

  std::size_t n_steps() const { return steps_.size(); }
  double horizon() const { return horizon_; }
  double dt(std::size_t n) const { return steps_.at(n); }
  double time(std::size_t n) const { return times_.at(n); }
  const std::vector<double>& steps() const { return steps_; }

  bool operator==(const TimeGrid&) const = default;

 private:
  double horizon_ = 0.0;
  std::vector<double> steps_;
  std::vector<double> times_;
};

}  // namespace rgan
