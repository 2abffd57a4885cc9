#pragma once

#include <string>

#include "rgan/common.hpp"
#include "rgan/market_sim.hpp"
#include "rgan/time_grid.hpp"

namespace rgan {

/// Power utility. shifted: (x^{1-p} - 1)/(1-p); unshifted: x^{1-p}/(1-p).
/// p == 1 is log in both variants. Non-positive wealth maps to -inf.
struct PowerUtility {
  double p = 1.0;
  bool shifted = true;

  double operator()(double x) const;
  Vec operator()(const Vec& x) const;

  /// Accepts "log", "u_<p>" (shifted) or "tilde_u_<p>" (unshifted).
  static PowerUtility parse(const std::string& s);
  std::string to_string() const;
};

double utility(const PowerUtility& u, double x);

enum class PenaltyKind {
  additive,        // ||Sigma - Sigma~||_F^2
  multiplicative,  // ||Sigma Sigma~^{-1} - I||_F^2
  sigma,           // ||sigma - sigma~||_F^2 on the volatility matrix itself
  pathwise,        // quadratic covariation and average relative return
};

PenaltyKind penalty_kind_from_string(const std::string& s);
std::string to_string(PenaltyKind k);

struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::additive;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  Vec ref_drift;
  Mat ref_vol;

  Mat ref_cov() const { return ref_vol * ref_vol.transpose(); }
  Mat qcv_ref(double horizon) const { return ref_cov() * horizon; }
  Vec arr_ref(double horizon) const { return (ref_drift * horizon).array().exp(); }
};

struct PenaltyValue {
  double vol = 0.0;    // lambda1 term
  double drift = 0.0;  // lambda2 term
  double total() const { return vol + drift; }
};

/// Riemann sum over the grid of the instantaneous penalty, averaged over paths.
/// `paths` must carry per-step drift and vol (pre-Hadamard market outputs).
PenaltyValue penalty_instant(const PenaltySpec& spec, const PathBatch& paths, const TimeGrid& grid);

/// Integrand at one step for a single (Sigma, mu) pair, without lambda or dt.
double instant_vol_term(const PenaltySpec& spec, const Mat& vol);
double instant_drift_term(const PenaltySpec& spec, const Vec& drift);

PenaltyValue penalty_pathwise(const PenaltySpec& spec, const PathBatch& paths, const TimeGrid& grid);

PenaltyValue penalty(const PenaltySpec& spec, const PathBatch& paths, const TimeGrid& grid);

}  // namespace rgan
