#include "rgan/time_grid.hpp"

#include <cmath>
#include <stdexcept>

namespace rgan {

TimeGrid TimeGrid::uniform(double horizon, std::size_t n_steps) {
  if (!(horizon > 0.0) || n_steps == 0) {
    throw std::invalid_argument("TimeGrid: horizon must be positive and n_steps >= 1");
  }
  return from_steps(std::vector<double>(n_steps, horizon / static_cast<double>(n_steps)));
}

TimeGrid TimeGrid::from_steps(std::vector<double> steps) {
  if (steps.empty()) throw std::invalid_argument("TimeGrid: no steps");
  TimeGrid g;
  g.times_.reserve(steps.size() + 1);
  g.times_.push_back(0.0);
  double t = 0.0;
  for (double h : steps) {
    if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("TimeGrid: step sizes must be positive");
    t += h;
    g.times_.push_back(t);
  }
  g.horizon_ = t;
  g.steps_ = std::move(steps);
  return g;
}

}  // namespace rgan
