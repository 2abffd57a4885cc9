#include "rgan/market_sim.hpp"

#include <cmath>
#include <stdexcept>

#include "rgan/linalg.hpp"
#include "rgan/random.hpp"

namespace rgan {

namespace {

Eigen::RowVectorXd row_major(const Mat& m) {
  Eigen::RowVectorXd out(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(i * m.cols() + j) = m(i, j);
  return out;
}

bool all_finite(const Mat& m) { return m.allFinite(); }

}  // namespace

void ReferenceMarket::validate() const {
  const auto d = drift.size();
  if (d == 0) throw std::invalid_argument("ReferenceMarket: empty drift");
  if (vol.rows() != d || vol.cols() != d) throw std::invalid_argument("ReferenceMarket: vol must be d x d");
  if (s0.size() != d) throw std::invalid_argument("ReferenceMarket: s0 must have d entries");
  if ((s0.array() <= 0.0).any()) throw std::invalid_argument("ReferenceMarket: s0 must be positive");
  if (!drift.allFinite() || !vol.allFinite() || !std::isfinite(rate))
    throw std::invalid_argument("ReferenceMarket: non-finite parameter");
}

// ---------------------------------------------------------------------------

NoiseIncrements NoiseIncrements::generate(std::size_t n_paths, std::size_t n_steps, std::size_t dim,
                                          std::uint64_t seed) {
  NoiseIncrements inc = zeros(n_paths, n_steps, dim);
  inc.seed = seed;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t b = 0; b < n_paths; ++b) {
    auto eng = stream_engine(seed, b);
    for (std::size_t n = 0; n < n_steps; ++n)
      for (std::size_t i = 0; i < dim; ++i) inc.z[n](static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(i)) = normal(eng);
  }
  return inc;
}

NoiseIncrements NoiseIncrements::zeros(std::size_t n_paths, std::size_t n_steps, std::size_t dim) {
  NoiseIncrements inc;
  inc.z.assign(n_steps, Mat::Zero(static_cast<Eigen::Index>(n_paths), static_cast<Eigen::Index>(dim)));
  return inc;
}

NoiseIncrements NoiseIncrements::slice(std::size_t first, std::size_t count) const {
  if (first + count > n_paths()) throw std::out_of_range("NoiseIncrements::slice: range exceeds batch");
  NoiseIncrements out;
  out.seed = seed;
  out.z.reserve(z.size());
  for (const auto& blk : z)
    out.z.push_back(blk.middleRows(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count)));
  return out;
}

NoiseIncrements NoiseIncrements::select(const std::vector<std::size_t>& rows) const {
  NoiseIncrements out;
  out.seed = seed;
  out.z.reserve(z.size());
  for (const auto& blk : z) {
    Mat m(static_cast<Eigen::Index>(rows.size()), blk.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (rows[k] >= n_paths()) throw std::out_of_range("NoiseIncrements::select: row out of range");
      m.row(static_cast<Eigen::Index>(k)) = blk.row(static_cast<Eigen::Index>(rows[k]));
    }
    out.z.push_back(std::move(m));
  }
  return out;
}

// ---------------------------------------------------------------------------

ConstantParams::ConstantParams(Vec drift, Mat vol) : drift_(std::move(drift)), vol_row_(row_major(vol)) {
  if (vol.rows() != drift_.size() || vol.cols() != drift_.size())
    throw std::invalid_argument("ConstantParams: vol must be d x d");
  if (!drift_.allFinite() || !vol.allFinite()) throw std::invalid_argument("ConstantParams: non-finite parameter");
}

void ConstantParams::at(std::size_t, double, const Mat& prices, Mat& drift, Mat& vol) const {
  drift = drift_.transpose().replicate(prices.rows(), 1);
  vol = vol_row_.replicate(prices.rows(), 1);
}

PathBatch simulate_euler(const TimeGrid& grid, const MarketParams& params, const Vec& s0,
                         const NoiseIncrements& increments, bool keep_params) {
  const std::size_t n_steps = grid.n_steps();
  const auto d = s0.size();
  if (increments.n_steps() != n_steps) throw std::invalid_argument("simulate_euler: increments do not match grid");
  if (static_cast<Eigen::Index>(increments.dim()) != d && increments.n_paths() > 0)
    throw std::invalid_argument("simulate_euler: increments do not match dimension");
  const auto B = static_cast<Eigen::Index>(increments.n_paths());

  PathBatch out;
  out.s.reserve(n_steps + 1);
  out.s.push_back(s0.transpose().replicate(B, 1));
  out.floored.assign(static_cast<std::size_t>(B), 0);
  Mat drift, vol;
  for (std::size_t n = 0; n < n_steps; ++n) {
    const Mat& s = out.s.back();
    params.at(n, grid.time(n), s, drift, vol);
    if (drift.rows() != B || drift.cols() != d || vol.rows() != B || vol.cols() != d * d)
      throw std::invalid_argument("simulate_euler: parameter provider returned wrong shape");
    if (!all_finite(drift) || !all_finite(vol)) throw std::runtime_error("simulate_euler: non-finite market parameter");
    const double dt = grid.dt(n);
    const double sq = std::sqrt(dt);
    Mat next(B, d);
    for (Eigen::Index b = 0; b < B; ++b) {
      for (Eigen::Index i = 0; i < d; ++i) {
        double diff = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) diff += vol(b, i * d + j) * increments.z[n](b, j);
        double v = s(b, i) + s(b, i) * drift(b, i) * dt + s(b, i) * diff * sq;
        if (!(v > 0.0)) {
          v = kPriceFloor;
          out.floored[static_cast<std::size_t>(b)] = 1;
        }
        next(b, i) = v;
      }
    }
    out.s.push_back(std::move(next));
    if (keep_params) {
      out.drift.push_back(drift);
      out.vol.push_back(vol);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

NoiseKind noise_kind_from_string(const std::string& s) {
  if (s == "constant") return NoiseKind::constant;
  if (s == "non-constant" || s == "non_constant") return NoiseKind::non_constant;
  if (s == "cumulative") return NoiseKind::cumulative;
  throw std::invalid_argument("unknown noise kind: " + s);
}

std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::constant: return "constant";
    case NoiseKind::non_constant: return "non-constant";
    case NoiseKind::cumulative: return "cumulative";
  }
  return "?";
}

namespace {

// Covariance and simulation factor from a perturbed volatility matrix.
void finish_step(const Mat& ref_vol, const Mat& sigma, bool exact, Mat& cov, Mat& factor) {
  if (exact) {
    factor = ref_vol;
    cov = ref_vol * ref_vol.transpose();
    return;
  }
  cov = nearest_psd(sigma * sigma.transpose());
  factor = cholesky_factor(cov);
}

}  // namespace

std::vector<NoisyMarketScenario> make_noisy_pool(const ReferenceMarket& ref, NoiseKind kind, NoiseScales scales,
                                                 const TimeGrid& grid, std::size_t n_pool, std::uint64_t seed) {
  ref.validate();
  if (scales.vol < 0.0 || scales.drift < 0.0) throw std::invalid_argument("make_noisy_pool: negative noise scale");
  if (n_pool == 0) throw std::invalid_argument("make_noisy_pool: n_pool must be >= 1");
  const auto d = static_cast<Eigen::Index>(ref.dim());
  const std::size_t N = grid.n_steps();
  const bool exact_vol = scales.vol == 0.0;
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<NoisyMarketScenario> pool(n_pool);
  for (std::size_t j = 0; j < n_pool; ++j) {
    auto eng = stream_engine(seed, j, 0x706f6f6c);
    auto draw_mat = [&] {
      Mat z(d, d);
      for (Eigen::Index a = 0; a < d; ++a)
        for (Eigen::Index c = 0; c < d; ++c) z(a, c) = normal(eng);
      return z;
    };
    auto draw_vec = [&] {
      Vec z(d);
      for (Eigen::Index a = 0; a < d; ++a) z(a) = normal(eng);
      return z;
    };

    NoisyMarketScenario& sc = pool[j];
    sc.kind = kind;
    sc.drift.resize(N);
    sc.cov.resize(N);
    sc.vol.resize(N);

    Mat zs = Mat::Zero(d, d);
    Vec zm = Vec::Zero(d);
    double prev_t = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      Mat sigma;
      Vec mu;
      switch (kind) {
        case NoiseKind::constant:
          if (n == 0) {
            zs = draw_mat();
            zm = draw_vec();
          }
          sigma = ref.vol + scales.vol * zs;
          mu = ref.drift + scales.drift * zm;
          break;
        case NoiseKind::non_constant:
          sigma = ref.vol + scales.vol * draw_mat();
          mu = ref.drift + scales.drift * draw_vec();
          break;
        case NoiseKind::cumulative: {
          // Brownian parameter path in normalized time; the value used on step
          // n is the path at t_{n+1}, so the last step has std equal to scale.
          const double t_next = grid.time(n + 1) / grid.horizon();
          const double w = std::sqrt(t_next - prev_t);
          prev_t = t_next;
          zs += w * draw_mat();
          zm += w * draw_vec();
          sigma = ref.vol + scales.vol * zs;
          mu = ref.drift + scales.drift * zm;
          break;
        }
      }
      sc.drift[n] = mu;
      finish_step(ref.vol, sigma, exact_vol, sc.cov[n], sc.vol[n]);
    }
  }
  return pool;
}

ScenarioParams::ScenarioParams(std::vector<const NoisyMarketScenario*> per_path) : per_path_(std::move(per_path)) {
  for (auto* p : per_path_)
    if (p == nullptr) throw std::invalid_argument("ScenarioParams: null scenario");
}

void ScenarioParams::at(std::size_t n, double, const Mat& prices, Mat& drift, Mat& vol) const {
  const auto B = prices.rows();
  const auto d = prices.cols();
  if (static_cast<std::size_t>(B) != per_path_.size())
    throw std::invalid_argument("ScenarioParams: batch size does not match scenario list");
  drift.resize(B, d);
  vol.resize(B, d * d);
  const NoisyMarketScenario* last = nullptr;
  Eigen::RowVectorXd vrow, drow;
  for (Eigen::Index b = 0; b < B; ++b) {
    const NoisyMarketScenario* sc = per_path_[static_cast<std::size_t>(b)];
    if (sc != last) {
      if (n >= sc->drift.size()) throw std::out_of_range("ScenarioParams: scenario shorter than grid");
      drow = sc->drift[n].transpose();
      vrow = row_major(sc->vol[n]);
      last = sc;
    }
    drift.row(b) = drow;
    vol.row(b) = vrow;
  }
}

// ---------------------------------------------------------------------------

void StudentTMarket::validate() const {
  if (!(nu > 2.0)) throw std::invalid_argument("StudentTMarket: nu must exceed 2");
  if (location.size() == 0 || scale.size() != location.size())
    throw std::invalid_argument("StudentTMarket: location and scale must have equal, nonzero size");
  if ((scale.array() < 0.0).any()) throw std::invalid_argument("StudentTMarket: scale must be non-negative");
}

PathBatch simulate_student_t(const StudentTMarket& market, const TimeGrid& grid, const Vec& s0, std::size_t n_paths,
                             std::uint64_t seed) {
  market.validate();
  const auto d = market.location.size();
  if (s0.size() != d) throw std::invalid_argument("simulate_student_t: s0 dimension mismatch");
  const auto B = static_cast<Eigen::Index>(n_paths);
  PathBatch out;
  out.s.assign(grid.n_steps() + 1, Mat(B, d));
  out.s[0] = s0.transpose().replicate(B, 1);
  out.floored.assign(n_paths, 0);
  std::student_t_distribution<double> tdist(market.nu);
  for (Eigen::Index b = 0; b < B; ++b) {
    auto eng = stream_engine(seed, static_cast<std::uint64_t>(b), 0x74);
    for (std::size_t n = 0; n < grid.n_steps(); ++n) {
      const double dt = grid.dt(n);
      for (Eigen::Index i = 0; i < d; ++i) {
        const double lr = market.location(i) * dt + market.scale(i) * std::sqrt(dt) * tdist(eng);
        out.s[n + 1](b, i) = out.s[n](b, i) * std::exp(lr);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

PathBatch simulate_scenario(const Scenario& sc, const TimeGrid& grid, const Vec& s0, std::size_t n_paths,
                            std::uint64_t seed, const NoiseIncrements* increments) {
  auto euler = [&](const MarketParams& p, std::size_t d) {
    if (increments != nullptr) {
      if (increments->n_paths() != n_paths) throw std::invalid_argument("simulate_scenario: increment batch mismatch");
      return simulate_euler(grid, p, s0, *increments);
    }
    return simulate_euler(grid, p, s0, NoiseIncrements::generate(n_paths, grid.n_steps(), d, seed));
  };
  if (const auto* ref = std::get_if<ReferenceMarket>(&sc)) {
    return euler(ConstantParams(ref->drift, ref->vol), ref->dim());
  }
  if (const auto* noisy = std::get_if<NoisyMarketScenario>(&sc)) {
    if (noisy->drift.size() != grid.n_steps()) throw std::invalid_argument("simulate_scenario: scenario/grid mismatch");
    ScenarioParams p(std::vector<const NoisyMarketScenario*>(n_paths, noisy));
    return euler(p, static_cast<std::size_t>(noisy->drift.front().size()));
  }
  if (const auto* g = std::get_if<GarchModel>(&sc)) return simulate_garch(*g, grid, s0, n_paths, seed);
  return simulate_student_t(std::get<StudentTMarket>(sc), grid, s0, n_paths, seed);
}

Mat log_qcv(const PathBatch& paths, std::size_t path) {
  const auto d = static_cast<Eigen::Index>(paths.dim());
  const auto b = static_cast<Eigen::Index>(path);
  Mat q = Mat::Zero(d, d);
  for (std::size_t n = 0; n + 1 < paths.s.size(); ++n) {
    const Vec dl = (paths.s[n + 1].row(b).array().log() - paths.s[n].row(b).array().log()).transpose();
    q.noalias() += dl * dl.transpose();
  }
  return q;
}

}  // namespace rgan
