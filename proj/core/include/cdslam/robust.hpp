#pragma once

#include <span>
#include <vector>

namespace cdslam {

/// Thresholds shared by the robust estimators. Residuals are whitened by
/// the MAD scale before the Huber kernel is applied, so `huber_delta` and
/// `outlier_threshold` are in units of sigma.
struct RobustConfig {
  double huber_delta = 2.0;
  double mad_scale = 1.4826;
  double sigma_floor = 1e-3;  // pixels
  int max_lm_iters = 30;
  double lm_lambda_init = 1e-4;
  double convergence_tol = 1e-8;
  // Outer rounds: re-estimate MAD, re-solve, drop residuals beyond
  // outlier_threshold. Stops early once the inlier set is stable.
  int robust_rounds = 4;
  double outlier_threshold = 3.0;

  bool IsValid() const {
    return huber_delta > 0.0 && sigma_floor > 0.0 && mad_scale > 0.0 && max_lm_iters > 0 &&
           lm_lambda_init > 0.0 && robust_rounds > 0 && outlier_threshold > 0.0;
  }
};

struct HuberValue {
  double cost = 0.0;
  double weight = 1.0;
};

/// Huber kernel on a squared residual: r^2 inside the knee,
/// 2 delta |r| - delta^2 outside, with the matching IRLS weight.
HuberValue HuberRho(double r2, double delta);

double Median(std::vector<double> values);

/// max(mad_scale * median(|r - median(r)|), sigma_floor).
double MadSigma(std::span<const double> residuals, double mad_scale, double sigma_floor);

inline double MadSigma(std::span<const double> residuals, const RobustConfig& cfg) {
  return MadSigma(residuals, cfg.mad_scale, cfg.sigma_floor);
}

}  // namespace cdslam
