#include "cdslam/tracking.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <tuple>

#include <Eigen/Cholesky>
#include <Eigen/Geometry>
#include <Eigen/QR>

#include "cdslam/error.hpp"
#include "lm.hpp"

namespace cdslam {
namespace {

using Matrix2Xd = Eigen::Matrix<double, 2, Eigen::Dynamic>;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Models expose Prepare(state), Residual(i, r, J) at the prepared state,
// Retract(state, dx), Dim() and Size().

class CameraModel {
 public:
  using State = Pose;

  CameraModel(std::span<const StaticCorrespondence> obs, const PinholeCamera& cam)
      : obs_(obs), cam_(cam) {}

  int Dim() const { return 6; }
  int Size() const { return static_cast<int>(obs_.size()); }
  void Prepare(const State& state) { state_ = state; }
  State Retract(const State& state, const Eigen::VectorXd& dx) const {
    return ExpSE3(Twist(Vector6d(dx))) * state;
  }

  bool Residual(int i, Eigen::Vector2d* r, Matrix2Xd* J) const {
    const auto& c = obs_[static_cast<std::size_t>(i)];
    const Eigen::Vector3d p_c = state_ * c.X_w;
    if (!(p_c.z() > kMinDepth)) return false;
    *r = c.uv - ProjectCameraPoint(cam_, p_c);
    if (J) {
      Eigen::Matrix<double, 3, 6> dp;
      dp << Eigen::Matrix3d::Identity(), -Skew(p_c);
      *J = -ProjectionJacobian(cam_, p_c) * dp;
    }
    return true;
  }

 private:
  std::span<const StaticCorrespondence> obs_;
  const PinholeCamera& cam_;
  Pose state_;
};

class ObjectModel {
 public:
  using State = Eigen::VectorXd;

  ObjectModel(std::span<const ObjectMatch> matches, const ObjectTrackInput& input, const PinholeCamera& cam)
      : matches_(matches), input_(input), cam_(cam) {}

  int Dim() const { return input_.projector.dof(); }
  int Size() const { return static_cast<int>(matches_.size()); }
  State Retract(const State& state, const Eigen::VectorXd& dx) const { return state + dx; }

  void Prepare(const State& coords) {
    const Twist xi(Vector6d(input_.projector.world_basis * coords));
    T_wo_ = ExpSE3(xi) * input_.T_wo_prev;
    jl_basis_ = LeftJacobianSE3(xi) * input_.projector.world_basis;
  }

  bool Residual(int i, Eigen::Vector2d* r, Matrix2Xd* J) const {
    const auto& m = matches_[static_cast<std::size_t>(i)];
    const Eigen::Vector3d p_w = T_wo_ * m.X_o;
    const Eigen::Vector3d p_c = input_.T_cw * p_w;
    if (!(p_c.z() > kMinDepth)) return false;
    *r = m.uv - ProjectCameraPoint(cam_, p_c);
    if (J) {
      Eigen::Matrix<double, 3, 6> dp;
      dp << Eigen::Matrix3d::Identity(), -Skew(p_w);
      *J = -ProjectionJacobian(cam_, p_c) * input_.T_cw.rotation() * dp * jl_basis_;
    }
    return true;
  }

  const Pose& pose() const { return T_wo_; }

 private:
  std::span<const ObjectMatch> matches_;
  const ObjectTrackInput& input_;
  const PinholeCamera& cam_;
  Pose T_wo_;
  Matrix6Xd jl_basis_;
};

template <class Model>
class RobustLmProblem {
 public:
  using State = typename Model::State;

  RobustLmProblem(Model& model, State state, const std::vector<bool>& active, double sigma, double delta)
      : model_(model), state_(std::move(state)), active_(active), sigma_(sigma), delta_(delta) {}

  double CostAt(const State& state) {
    model_.Prepare(state);
    double cost = 0.0;
    Eigen::Vector2d r;
    for (int i = 0; i < model_.Size(); ++i) {
      if (!active_[static_cast<std::size_t>(i)]) continue;
      if (!model_.Residual(i, &r, nullptr)) return kInf;
      cost += HuberRho((r / sigma_).squaredNorm(), delta_).cost;
    }
    return cost;
  }

  double Linearize() {
    const int dim = model_.Dim();
    H_.setZero(dim, dim);
    g_.setZero(dim);
    model_.Prepare(state_);
    double cost = 0.0;
    Eigen::Vector2d r;
    Matrix2Xd J(2, dim);
    for (int i = 0; i < model_.Size(); ++i) {
      if (!active_[static_cast<std::size_t>(i)]) continue;
      if (!model_.Residual(i, &r, &J)) return kInf;
      const Eigen::Vector2d rw = r / sigma_;
      const HuberValue h = HuberRho(rw.squaredNorm(), delta_);
      const Matrix2Xd Jw = J / sigma_;
      H_.noalias() += h.weight * Jw.transpose() * Jw;
      g_.noalias() += h.weight * Jw.transpose() * rw;
      cost += h.cost;
    }
    return cost;
  }

  bool Solve(double lambda, Eigen::VectorXd* dx) const {
    Eigen::MatrixXd A = H_;
    A.diagonal() += lambda * H_.diagonal().cwiseMax(1e-12);
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) return false;
    *dx = llt.solve(-g_);
    return dx->allFinite();
  }

  double Evaluate(const Eigen::VectorXd& dx) { return CostAt(model_.Retract(state_, dx)); }
  void Accept(const Eigen::VectorXd& dx) { state_ = model_.Retract(state_, dx); }

  const State& state() const { return state_; }

 private:
  Model& model_;
  State state_;
  const std::vector<bool>& active_;
  double sigma_;
  double delta_;
  Eigen::MatrixXd H_;
  Eigen::VectorXd g_;
};

// Outer loop: MAD scale from the current residuals, robust LM, then drop
// residuals beyond the outlier threshold and repeat until the set settles.
template <class Model>
TrackResult<typename Model::State> RobustSolve(Model& model, typename Model::State state,
                                               const RobustConfig& cfg, int min_active) {
  if (!cfg.IsValid()) throw Error(ErrorCode::kConfigInvalid, "robust config");
  const auto n = static_cast<std::size_t>(model.Size());
  std::vector<bool> active(n, false);
  Eigen::Vector2d r;
  model.Prepare(state);
  for (std::size_t i = 0; i < n; ++i) active[i] = model.Residual(static_cast<int>(i), &r, nullptr);

  TrackResult<typename Model::State> result;
  const detail::LmSettings settings{cfg.max_lm_iters, cfg.lm_lambda_init, cfg.convergence_tol};
  for (int round = 0; round < cfg.robust_rounds; ++round) {
    if (std::count(active.begin(), active.end(), true) < min_active) {
      throw Error(ErrorCode::kInsufficientPoints, "too few usable observations");
    }
    model.Prepare(state);
    std::vector<double> components;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      model.Residual(static_cast<int>(i), &r, nullptr);
      components.push_back(r.x());
      components.push_back(r.y());
    }
    const double sigma = MadSigma(components, cfg);

    RobustLmProblem<Model> problem(model, state, active, sigma, cfg.huber_delta);
    const detail::LmOutcome outcome = detail::RunLm(problem, settings);
    state = problem.state();
    result.initial_cost = outcome.initial_cost;
    result.final_cost = outcome.final_cost;
    result.iterations += outcome.iterations;
    result.converged = outcome.converged;
    result.sigma = sigma;
    result.inliers = active;

    if (round + 1 == cfg.robust_rounds) break;
    model.Prepare(state);
    std::vector<bool> next(n, false);
    for (std::size_t i = 0; i < n; ++i) {
      next[i] = model.Residual(static_cast<int>(i), &r, nullptr) &&
                r.norm() <= cfg.outlier_threshold * sigma;
    }
    if (next == active || std::count(next.begin(), next.end(), true) < min_active) break;
    active = std::move(next);
  }
  result.estimate = state;
  result.inlier_count = static_cast<int>(std::count(result.inliers.begin(), result.inliers.end(), true));
  return result;
}

double HuberCostAt(std::span<const ObjectMatch> matches, const ObjectTrackInput& input,
                   const PinholeCamera& cam, const Eigen::VectorXd& coords, double sigma, double delta) {
  ObjectModel model(matches, input, cam);
  model.Prepare(coords);
  double cost = 0.0;
  Eigen::Vector2d r;
  for (int i = 0; i < model.Size(); ++i) {
    if (!model.Residual(i, &r, nullptr)) return kInf;
    cost += HuberRho((r / sigma).squaredNorm(), delta).cost;
  }
  return cost;
}

}  // namespace

TrackResult<Pose> TrackCamera(std::span<const StaticCorrespondence> correspondences,
                              const PinholeCamera& cam, const Pose& T_cw_init, const RobustConfig& cfg) {
  constexpr int kMinCameraPoints = 6;
  if (static_cast<int>(correspondences.size()) < kMinCameraPoints) {
    throw Error(ErrorCode::kInsufficientPoints,
                std::to_string(correspondences.size()) + " static correspondences");
  }
  if (!T_cw_init.IsValid(1e-6)) throw Error(ErrorCode::kConfigInvalid, "initial camera pose");
  CameraModel model(correspondences, cam);
  return RobustSolve(model, T_cw_init, cfg, kMinCameraPoints);
}

Eigen::VectorXd FreedomCoordinates(const TwistProjector& projector, const Vector6d& xi_w) {
  if (projector.dof() == 0) return Eigen::VectorXd();
  return projector.world_basis.colPivHouseholderQr().solve(xi_w);
}

ObjectTrackResult TrackObjectTwist(std::span<const ObjectMatch> matches, const ObjectTrackInput& input,
                                   const PinholeCamera& cam, const RobustConfig& cfg) {
  ObjectTrackResult out;
  out.matches.assign(matches.begin(), matches.end());
  const TwistProjector& proj = input.projector;

  auto finish = [&](const Eigen::VectorXd& coords) {
    out.coords = coords;
    const Vector6d xi = proj.dof() == 0 ? Vector6d::Zero() : Vector6d(proj.world_basis * coords);
    out.estimate = Twist(xi);
    out.pose = ExpSE3(out.estimate) * input.T_wo_prev;
  };

  if (static_cast<int>(matches.size()) < kMinObjectMatches) {
    if (!input.coast_twist) {
      throw Error(ErrorCode::kInsufficientPoints, std::to_string(matches.size()) + " object matches");
    }
    finish(FreedomCoordinates(proj, input.coast_twist->vector()));
    out.coasted = true;
    return out;
  }
  if (proj.dof() == 0) {
    finish(Eigen::VectorXd());
    out.converged = true;
    out.inliers.assign(matches.size(), true);
    out.inlier_count = static_cast<int>(matches.size());
    return out;
  }

  ObjectModel model(matches, input, cam);
  TrackResult<Eigen::VectorXd> solved =
      RobustSolve(model, FreedomCoordinates(proj, input.initial.vector()), cfg, kMinObjectMatches);
  static_cast<TrackResult<Twist>&>(out) = {Twist(), solved.initial_cost, solved.final_cost,
                                           solved.inlier_count, solved.iterations, solved.converged,
                                           solved.sigma, std::move(solved.inliers)};
  finish(solved.estimate);
  return out;
}

ObjectTrackResult RefineWithMapProjection(const ObjectTrackResult& current,
                                          std::span<const ObjectPoint> cluster_points,
                                          std::span<const Eigen::Vector2d> candidates,
                                          double search_radius_px, const ObjectTrackInput& input,
                                          const PinholeCamera& cam, const RobustConfig& cfg) {
  if (!(search_radius_px > 0.0) || current.coasted) return current;

  std::set<PointId> matched;
  for (const auto& m : current.matches) matched.insert(m.point_id);

  std::vector<std::tuple<double, PointId, std::size_t, Eigen::Vector3d>> pairs;
  for (const auto& point : cluster_points) {
    if (matched.count(point.point_id)) continue;
    const Eigen::Vector3d p_c = input.T_cw * (current.pose * point.X_o);
    if (!(p_c.z() > kMinDepth)) continue;
    const Eigen::Vector2d uv = ProjectCameraPoint(cam, p_c);
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      const double d = (candidates[j] - uv).norm();
      if (d <= search_radius_px) pairs.emplace_back(d, point.point_id, j, point.X_o);
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
    return std::tie(std::get<0>(a), std::get<1>(a), std::get<2>(a)) <
           std::tie(std::get<0>(b), std::get<1>(b), std::get<2>(b));
  });

  std::vector<ObjectMatch> augmented = current.matches;
  std::set<PointId> taken_points;
  std::set<std::size_t> taken_pixels;
  for (const auto& [d, id, j, X_o] : pairs) {
    if (taken_points.count(id) || taken_pixels.count(j)) continue;
    taken_points.insert(id);
    taken_pixels.insert(j);
    augmented.push_back({id, X_o, candidates[j]});
  }
  if (augmented.size() == current.matches.size()) return current;

  ObjectTrackInput seeded = input;
  seeded.initial = current.estimate;
  ObjectTrackResult refined;
  try {
    refined = TrackObjectTwist(augmented, seeded, cam, cfg);
  } catch (const Error&) {
    return current;
  }
  // Compare both estimates on the augmented set under one scale so that
  // the gate measures the re-solve rather than a change of sigma.
  const auto n = static_cast<double>(augmented.size());
  const double before =
      HuberCostAt(augmented, input, cam, current.coords, refined.sigma, cfg.huber_delta) / n;
  const double after =
      HuberCostAt(augmented, input, cam, refined.coords, refined.sigma, cfg.huber_delta) / n;
  if (!(after <= before)) return current;
  return refined;
}

Eigen::Matrix<double, 2, 6> ObjectTwistJacobian(const Eigen::Vector3d& X_o, const Pose& T_cw,
                                                const Pose& T_wo_prev, const Matrix6d& P,
                                                const PinholeCamera& cam, const Twist& xi) {
  const Twist projected(Vector6d(P * xi.vector()));
  const Pose T_wo = ExpSE3(projected) * T_wo_prev;
  const Eigen::Vector3d p_c = T_cw * (T_wo * X_o);
  if (!(p_c.z() > kMinDepth)) throw Error(ErrorCode::kBehindCamera, "object point behind camera");

  const Eigen::Vector4d X_h = X_o.homogeneous();
  const Eigen::MatrixXd point_sel = Kronecker(X_h.transpose(), Eigen::Matrix3d::Identity());          // 3x12
  const Eigen::MatrixXd rotate = Kronecker(Eigen::Matrix4d::Identity(), T_cw.rotation());            // 12x12
  // vec of the top 3x4 block of (hat(d) T) is (T^T (x) I3) vec(hat(d)_3x4).
  const Eigen::MatrixXd right = Kronecker(T_wo.matrix().transpose(), Eigen::Matrix3d::Identity());   // 12x12
  const Eigen::Matrix<double, 3, 6> dp =
      point_sel * rotate * right * DexpBlock() * LeftJacobianSE3(projected) * P;
  return ProjectionJacobian(cam, p_c) * dp;
}

}  // namespace cdslam
