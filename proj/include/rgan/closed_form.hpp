#pragma once

#include <string>

#include "rgan/common.hpp"
#include "rgan/portfolio.hpp"

namespace rgan {

struct SaddleSolution {
  Vec pi;
  Mat cov;    // worst-case covariance (not symmetric for the multiplicative penalty)
  Vec drift;  // worst-case drift, equals the input drift when it is fixed
  double residual = 0.0;  // max-norm residual of the defining system
  int iterations = 0;

  /// Volatility factor for simulating (cov, drift): Cholesky of the symmetric part.
  Mat vol() const;
};

enum class VolPenalty { additive, multiplicative };

/// sigma-penalty quartic sigma^4 - sigma~ sigma^3 - (mu-r)^2/(2 lambda) = 0,
/// pi = (mu-r)/sigma^2. Bisection on [sigma~, sigma~ + 10].
SaddleSolution solve_1d_robust_vol(double mu, double r, double sigma_ref, double lambda1);

/// Scalar Sigma-penalty system (sigma~^2 + pi^2/(4 lambda)) pi = mu - r, by bisection.
SaddleSolution solve_1d_additive(double mu, double r, double sigma_ref, double lambda1);

SaddleSolution solve_multid_robust_vol(const Vec& mu, double r, const Mat& cov_ref, double lambda1,
                                       VolPenalty kind = VolPenalty::additive);

SaddleSolution solve_fully_robust(const Vec& mu_ref, double r, const Mat& cov_ref, double lambda1, double lambda2);

/// Max-norm residuals recomputed from scratch for a given solution.
double residual_multid(const SaddleSolution& s, const Vec& mu, double r, const Mat& cov_ref, double lambda1,
                       VolPenalty kind);
double residual_fully_robust(const SaddleSolution& s, const Vec& mu_ref, double r, const Mat& cov_ref, double lambda1,
                             double lambda2);

double merton_weight(double excess_drift, double r_unused, double sigma, double p);
/// Sigma^{-1}(mu - r)/p by linear solve.
Vec merton_weight(const Mat& cov, const Vec& mu, double r, double p = 1.0);
Vec oracle_weight(const Mat& cov, const Vec& mu, double r);

struct NoTradeParams {
  double pi_ntc = 0.0;
  double half_width = 0.0;
  double lower() const { return pi_ntc - half_width; }
  double upper() const { return pi_ntc + half_width; }
};

/// Delta pi = (3/(2p) (pi(1-pi))^2)^{1/3}; half-width = c^{1/3} Delta pi.
NoTradeParams no_trade_params(double excess_drift, double sigma, double p, double c_prop);

/// Weight after the minimal adjustment: current weight inside [lower, upper]
/// is kept, outside it is projected to the nearer boundary.
double no_trade_target(double current_weight, const NoTradeParams& nt);

/// Per-coordinate no-trade rule. The carried state is the holdings H_{n-1}
/// supplied through PolicyInput, so one instance serves any batch.
class NoTradePolicy final : public Policy {
 public:
  explicit NoTradePolicy(std::vector<NoTradeParams> per_asset) : nt_(std::move(per_asset)) {}
  Mat weights(const PolicyInput& in) override;
  std::string name() const override { return "no_trade"; }
  const std::vector<NoTradeParams>& params() const { return nt_; }

 private:
  std::vector<NoTradeParams> nt_;
};

}  // namespace rgan
