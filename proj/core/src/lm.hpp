#pragma once

// Levenberg-Marquardt driver shared by the tracker and the bundle adjuster.
// The problem type supplies:
//   double Linearize();                              cost at the current state
//   bool Solve(double lambda, Eigen::VectorXd* dx);  false if not positive definite
//   double Evaluate(const Eigen::VectorXd& dx);      cost at state (+) dx
//   void Accept(const Eigen::VectorXd& dx);

#include <cmath>
#include <limits>

#include <Eigen/Core>

#include "cdslam/error.hpp"

namespace cdslam::detail {

struct LmSettings {
  int max_iters = 30;
  double lambda_init = 1e-4;
  double rel_tol = 1e-8;
};

struct LmOutcome {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;  // accepted steps
  bool converged = false;
};

template <class Problem>
LmOutcome RunLm(Problem& problem, const LmSettings& settings) {
  LmOutcome out;
  double cost = problem.Linearize();
  out.initial_cost = cost;
  double lambda = settings.lambda_init;
  int rejected_in_a_row = 0;
  Eigen::VectorXd dx;

  for (int iter = 0; iter < settings.max_iters; ++iter) {
    if (cost <= std::numeric_limits<double>::min()) {
      out.converged = true;
      break;
    }
    if (!problem.Solve(lambda, &dx)) {
      lambda *= 10.0;
      ++rejected_in_a_row;
      continue;
    }
    if (dx.norm() <= 1e-14) {
      out.converged = true;
      break;
    }
    const double trial = problem.Evaluate(dx);
    if (std::isfinite(trial) && trial < cost) {
      problem.Accept(dx);
      ++out.iterations;
      const double rel = (cost - trial) / cost;
      lambda = std::max(lambda / 10.0, 1e-12);
      rejected_in_a_row = 0;
      cost = problem.Linearize();
      if (rel < settings.rel_tol) {
        out.converged = true;
        break;
      }
    } else {
      // No decrease: at a minimum up to rounding, or the step is too long.
      if (std::isfinite(trial) && trial - cost <= settings.rel_tol * cost) {
        out.converged = true;
        break;
      }
      lambda *= 10.0;
      ++rejected_in_a_row;
    }
  }
  if (!out.converged && rejected_in_a_row >= settings.max_iters) {
    throw Error(ErrorCode::kDiverged, "no damped step decreased the cost");
  }
  out.final_cost = cost;
  return out;
}

}  // namespace cdslam::detail
