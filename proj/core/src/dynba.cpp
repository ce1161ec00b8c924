#include "cdslam/dynba.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <nlohmann/json.hpp>

#include "cdslam/error.hpp"
#include "cdslam/robust.hpp"
#include "lm.hpp"

namespace cdslam {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Mat<3, 6> LeftIncrement(const Eigen::Vector3d& p) {
  Mat<3, 6> d;
  d << Eigen::Matrix3d::Identity(), -Skew(p);
  return d;
}

// (M^T (x) I3) for the 4x4 homogeneous form of M: vec of the 3x4 block of
// hat(d) * M as a function of vec(hat(d)_3x4).
Matrix12d RightFactorKron(const Pose& m) {
  const Eigen::Matrix4d mm = m.matrix();
  Matrix12d k = Matrix12d::Zero();
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) k.block<3, 3>(3 * i, 3 * j) = mm(j, i) * Eigen::Matrix3d::Identity();
  }
  return k;
}

// (I4 (x) R): vec of the 3x4 block of M * hat(d).
Matrix12d LeftFactorKron(const Pose& m) {
  Matrix12d k = Matrix12d::Zero();
  for (int i = 0; i < 4; ++i) k.block<3, 3>(3 * i, 3 * i) = m.rotation();
  return k;
}

// d log(exp(d) M) / dd and d log(M exp(d)) / dd.
Matrix6d LogLeftJacobian(const Pose& m) { return Dlog(m) * RightFactorKron(m) * DexpBlock(); }
Matrix6d LogRightJacobian(const Pose& m) { return Dlog(m) * LeftFactorKron(m) * DexpBlock(); }

}  // namespace

Eigen::Vector3d StereoProject(const PinholeCamera& cam, const Eigen::Vector3d& p_c, Mat<3, 3>* jacobian) {
  if (!(p_c.z() > kMinDepth)) throw Error(ErrorCode::kBehindCamera, "point depth " + std::to_string(p_c.z()));
  const double iz = 1.0 / p_c.z();
  const Eigen::Vector3d out(cam.fx * p_c.x() * iz + cam.cx, cam.fy * p_c.y() * iz + cam.cy,
                            cam.fx * (p_c.x() - cam.baseline) * iz + cam.cx);
  if (jacobian) {
    const double iz2 = iz * iz;
    *jacobian << cam.fx * iz, 0.0, -cam.fx * p_c.x() * iz2,
                 0.0, cam.fy * iz, -cam.fy * p_c.y() * iz2,
                 cam.fx * iz, 0.0, -cam.fx * (p_c.x() - cam.baseline) * iz2;
  }
  return out;
}

Pose BAProblem::ObjectPose(int twist) const {
  const TwistVar& var = twists[static_cast<std::size_t>(twist)];
  const TwistProjector& proj = projectors.at(var.cluster);
  if (proj.dof() == 0) return var.snapshot;
  return ExpSE3(Twist(Vector6d(proj.world_basis * var.coords))) * var.snapshot;
}

bool BAProblem::CheckLive(std::string* why) const {
  auto fail = [why](const std::string& message) {
    if (why) *why = message;
    return false;
  };
  const auto n_cam = static_cast<int>(cameras.size());
  for (const auto& b : stat_blocks) {
    if (b.camera < 0 || b.camera >= n_cam || b.point < 0 || b.point >= static_cast<int>(static_points.size())) {
      return fail("stat block references a missing variable");
    }
  }
  for (const auto& b : dyna_blocks) {
    if (b.camera < 0 || b.camera >= n_cam || b.twist < 0 || b.twist >= static_cast<int>(twists.size()) ||
        b.point < 0 || b.point >= static_cast<int>(object_points.size())) {
      return fail("dyna block references a missing variable");
    }
    if (object_points[static_cast<std::size_t>(b.point)].cluster != twists[static_cast<std::size_t>(b.twist)].cluster) {
      return fail("dyna block mixes clusters");
    }
  }
  for (const auto& b : const_blocks) {
    for (int k = 0; k < 3; ++k) {
      if (b.twists[k] < 0 || b.twists[k] >= static_cast<int>(twists.size()) ||
          twists[static_cast<std::size_t>(b.twists[k])].cluster != b.cluster) {
        return fail("const block references a missing twist");
      }
    }
    if (!(twists[static_cast<std::size_t>(b.twists[0])].frame_index < twists[static_cast<std::size_t>(b.twists[1])].frame_index &&
          twists[static_cast<std::size_t>(b.twists[1])].frame_index < twists[static_cast<std::size_t>(b.twists[2])].frame_index)) {
      return fail("const block frames not increasing");
    }
  }
  for (const auto& t : twists) {
    auto it = projectors.find(t.cluster);
    if (it == projectors.end() || t.coords.size() != it->second.dof()) {
      return fail("twist variable without matching projector");
    }
  }
  return true;
}

StatEval EvaluateStat(const BAProblem& problem, const StatBlock& block) {
  const Pose& T_cw = problem.cameras[static_cast<std::size_t>(block.camera)].T_cw;
  const Eigen::Vector3d& X_w = problem.static_points[static_cast<std::size_t>(block.point)].X_w;
  const Eigen::Vector3d p_c = T_cw * X_w;
  Mat<3, 3> jp;
  StatEval e;
  e.residual = block.z - StereoProject(problem.camera, p_c, &jp);
  e.d_camera = -jp * LeftIncrement(p_c);
  e.d_point = -jp * T_cw.rotation();
  return e;
}

DynaEval EvaluateDyna(const BAProblem& problem, const DynaBlock& block) {
  const TwistVar& var = problem.twists[static_cast<std::size_t>(block.twist)];
  const TwistProjector& proj = problem.projectors.at(var.cluster);
  const Pose& T_cw = problem.cameras[static_cast<std::size_t>(block.camera)].T_cw;
  const Eigen::Vector3d& X_o = problem.object_points[static_cast<std::size_t>(block.point)].X_o;

  const Vector6d xi = proj.dof() == 0 ? Vector6d::Zero() : Vector6d(proj.world_basis * var.coords);
  const Pose T_wo = ExpSE3(Twist(xi)) * var.snapshot;
  const Eigen::Vector3d p_w = T_wo * X_o;
  const Eigen::Vector3d p_c = T_cw * p_w;
  Mat<3, 3> jp;
  DynaEval e;
  e.residual = block.z - StereoProject(problem.camera, p_c, &jp);
  e.d_camera = -jp * LeftIncrement(p_c);
  e.d_point = -jp * T_cw.rotation() * T_wo.rotation();
  const Mat<3, 6> d_xi = -jp * T_cw.rotation() * LeftIncrement(p_w) * LeftJacobianSE3(Twist(xi));
  e.d_twist = d_xi * proj.p_world;
  e.d_coords = d_xi * proj.world_basis;
  return e;
}

ConstVelEval EvaluateConstVel(const BAProblem& problem, const ConstVelBlock& block) {
  const TwistProjector& proj = problem.projectors.at(block.cluster);
  std::array<Pose, 3> q;
  std::array<Matrix6Xd, 3> jl_basis;
  for (int k = 0; k < 3; ++k) {
    const int idx = block.twists[static_cast<std::size_t>(k)];
    const TwistVar& var = problem.twists[static_cast<std::size_t>(idx)];
    const Vector6d xi = proj.dof() == 0 ? Vector6d::Zero() : Vector6d(proj.world_basis * var.coords);
    q[k] = ExpSE3(Twist(xi)) * var.snapshot;
    jl_basis[k] = LeftJacobianSE3(Twist(xi)) * proj.world_basis;
  }
  const Pose m1 = q[1] * q[0].inverse();
  const Pose m2 = q[2] * q[1].inverse();
  const Matrix6d to_joint = problem.weights.cwiseSqrt().asDiagonal() * proj.pi_l * proj.ad_lw;

  ConstVelEval e;
  e.residual = to_joint * (LogSE3(m2).vector() - LogSE3(m1).vector());
  // Q_a = exp(B c_a) S_a enters m = Q_a Q_b^-1 by left multiplication and
  // Q_b by right multiplication with exp(-d).
  const Matrix6d l1 = LogLeftJacobian(m1);
  const Matrix6d r1 = LogRightJacobian(m1);
  const Matrix6d l2 = LogLeftJacobian(m2);
  const Matrix6d r2 = LogRightJacobian(m2);
  e.d_coords[0] = to_joint * r1 * jl_basis[0];
  e.d_coords[1] = to_joint * (-r2 - l1) * jl_basis[1];
  e.d_coords[2] = to_joint * l2 * jl_basis[2];
  return e;
}

BAProblem BuildProblem(const WorldMap& map, const PinholeCamera& cam, std::span<const int> temporal,
                       std::span<const int> spatial, const BAOptions& options) {
  if (temporal.empty()) throw Error(ErrorCode::kEmptyWindow, "no temporal keyframes");
  BAProblem problem;
  problem.camera = cam;
  problem.weights = options.const_weights;

  std::set<int> temporal_set(temporal.begin(), temporal.end());
  std::set<int> frames(temporal.begin(), temporal.end());
  frames.insert(spatial.begin(), spatial.end());

  std::map<int, int> camera_index;
  for (int f : frames) {
    const KeyFrame* kf = map.FindKeyFrame(f);
    if (!kf) throw Error(ErrorCode::kEmptyWindow, "keyframe " + std::to_string(f) + " not in map");
    camera_index[f] = static_cast<int>(problem.cameras.size());
    problem.cameras.push_back({f, kf->pose, false});
  }
  problem.cameras.front().fixed = true;

  // Twist variables on temporal keyframes for every dynamic cluster with a
  // pose there; the oldest per cluster anchors the object frame.
  std::map<std::pair<ClusterId, int>, int> twist_index;
  for (const auto& [id, cluster] : map.clusters()) {
    if (cluster.is_static) continue;
    bool first = true;
    for (const auto& [frame, pose] : cluster.poses) {
      if (!temporal_set.count(frame)) continue;
      if (first) {
        problem.projectors[id] =
            cluster.joint ? ConjugatedProjector(*cluster.joint) : ConjugatedProjector(MakeJoint(JointType::kFree, Pose()));
      }
      const int dof = problem.projectors[id].dof();
      twist_index[{id, frame}] = static_cast<int>(problem.twists.size());
      problem.twists.push_back({id, frame, pose, Eigen::VectorXd::Zero(dof), first});
      first = false;
    }
  }

  std::map<PointId, int> static_index;
  std::map<PointId, int> object_index;
  for (int f : frames) {
    const KeyFrame& kf = *map.FindKeyFrame(f);
    for (const auto& obs : kf.observations) {
      const MapPoint* point = map.FindPoint(obs.point_id);
      if (!point) continue;
      const Cluster* owner = map.FindCluster(point->owner_cluster);
      const Eigen::Vector3d z(obs.u, obs.v, obs.u - obs.disparity);
      if (owner->is_static) {
        auto [it, inserted] = static_index.try_emplace(obs.point_id, static_cast<int>(problem.static_points.size()));
        if (inserted) problem.static_points.push_back({obs.point_id, point->position, false});
        problem.stat_blocks.push_back({camera_index[f], it->second, z});
      } else if (options.use_dyna) {
        auto tw = twist_index.find({owner->id, f});
        if (tw == twist_index.end()) continue;
        auto [it, inserted] = object_index.try_emplace(obs.point_id, static_cast<int>(problem.object_points.size()));
        if (inserted) problem.object_points.push_back({obs.point_id, owner->id, point->position, false});
        problem.dyna_blocks.push_back({camera_index[f], tw->second, it->second, z});
      }
    }
  }

  if (options.use_const) {
    for (std::size_t k = 0; k + 2 < problem.twists.size(); ++k) {
      const TwistVar& a = problem.twists[k];
      const TwistVar& b = problem.twists[k + 1];
      const TwistVar& c = problem.twists[k + 2];
      if (a.cluster == b.cluster && b.cluster == c.cluster && b.frame_index == a.frame_index + 1 &&
          c.frame_index == b.frame_index + 1) {
        problem.const_blocks.push_back({a.cluster, {static_cast<int>(k), static_cast<int>(k + 1), static_cast<int>(k + 2)}});
      }
    }
  }
  return problem;
}

namespace {

struct Coupling {
  int offset = 0;
  int size = 0;
  Eigen::Matrix<double, Eigen::Dynamic, 3> E;
};

class BASolver {
 public:
  BASolver(BAProblem& problem, const BAOptions& options) : p_(problem), opt_(options) {
    for (const auto& c : p_.cameras) {
      cam_offset_.push_back(c.fixed ? -1 : pose_dim_);
      if (!c.fixed) pose_dim_ += 6;
    }
    for (const auto& t : p_.twists) {
      const int dof = static_cast<int>(t.coords.size());
      twist_offset_.push_back(t.fixed || dof == 0 ? -1 : pose_dim_);
      if (!t.fixed) pose_dim_ += dof;
    }
    for (const auto& s : p_.static_points) {
      spoint_index_.push_back(s.fixed ? -1 : n_points_);
      if (!s.fixed) ++n_points_;
    }
    for (const auto& o : p_.object_points) {
      opoint_index_.push_back(o.fixed ? -1 : n_points_);
      if (!o.fixed) ++n_points_;
    }
  }

  int dim() const { return pose_dim_ + 3 * n_points_; }

  // Deactivates blocks that cannot be projected and fixes the MAD scales.
  void PrepareRound(BAReport* report) {
    stat_active_.assign(p_.stat_blocks.size(), true);
    dyna_active_.assign(p_.dyna_blocks.size(), true);
    std::vector<double> stat_components;
    std::map<ClusterId, std::vector<double>> dyna_components;
    for (std::size_t i = 0; i < p_.stat_blocks.size(); ++i) {
      try {
        const StatEval e = EvaluateStat(p_, p_.stat_blocks[i]);
        stat_components.insert(stat_components.end(), e.residual.data(), e.residual.data() + 3);
      } catch (const Error&) {
        stat_active_[i] = false;
      }
    }
    for (std::size_t i = 0; i < p_.dyna_blocks.size(); ++i) {
      try {
        const DynaEval e = EvaluateDyna(p_, p_.dyna_blocks[i]);
        auto& list = dyna_components[p_.twists[static_cast<std::size_t>(p_.dyna_blocks[i].twist)].cluster];
        list.insert(list.end(), e.residual.data(), e.residual.data() + 3);
      } catch (const Error&) {
        dyna_active_[i] = false;
      }
    }
    sigma_stat_ = stat_components.empty() ? 1.0 : MadSigma(stat_components, opt_.mad_scale, opt_.sigma_floor);
    sigma_dyna_.clear();
    for (const auto& [cluster, list] : dyna_components) {
      sigma_dyna_[cluster] = MadSigma(list, opt_.mad_scale, opt_.sigma_floor);
    }
    report->sigma_static = sigma_stat_;
    report->sigma_dyna = sigma_dyna_;
  }

  double Cost() const {
    double cost = 0.0;
    for (std::size_t i = 0; i < p_.stat_blocks.size(); ++i) {
      if (!stat_active_[i]) continue;
      const Eigen::Vector3d& X_w = p_.static_points[static_cast<std::size_t>(p_.stat_blocks[i].point)].X_w;
      const Eigen::Vector3d p_c = p_.cameras[static_cast<std::size_t>(p_.stat_blocks[i].camera)].T_cw * X_w;
      if (!(p_c.z() > kMinDepth)) return kInf;
      const Eigen::Vector3d r = (p_.stat_blocks[i].z - StereoProject(p_.camera, p_c)) / sigma_stat_;
      cost += HuberRho(r.squaredNorm(), opt_.huber_delta).cost;
    }
    std::vector<Pose> object_poses(p_.twists.size());
    for (std::size_t t = 0; t < p_.twists.size(); ++t) object_poses[t] = p_.ObjectPose(static_cast<int>(t));
    for (std::size_t i = 0; i < p_.dyna_blocks.size(); ++i) {
      if (!dyna_active_[i]) continue;
      const DynaBlock& b = p_.dyna_blocks[i];
      const Pose& T_wo = object_poses[static_cast<std::size_t>(b.twist)];
      const Eigen::Vector3d p_c = p_.cameras[static_cast<std::size_t>(b.camera)].T_cw *
                                  (T_wo * p_.object_points[static_cast<std::size_t>(b.point)].X_o);
      if (!(p_c.z() > kMinDepth)) return kInf;
      const double sigma = sigma_dyna_.at(p_.twists[static_cast<std::size_t>(b.twist)].cluster);
      const Eigen::Vector3d r = (b.z - StereoProject(p_.camera, p_c)) / sigma;
      cost += HuberRho(r.squaredNorm(), opt_.huber_delta).cost;
    }
    for (const auto& b : p_.const_blocks) {
      const TwistProjector& proj = p_.projectors.at(b.cluster);
      const Pose& q0 = object_poses[static_cast<std::size_t>(b.twists[0])];
      const Pose& q1 = object_poses[static_cast<std::size_t>(b.twists[1])];
      const Pose& q2 = object_poses[static_cast<std::size_t>(b.twists[2])];
      Vector6d change;
      try {
        change = LogSE3(q2 * q1.inverse()).vector() - LogSE3(q1 * q0.inverse()).vector();
      } catch (const Error&) {
        return kInf;
      }
      const Vector6d r = p_.weights.cwiseSqrt().asDiagonal() * proj.pi_l * proj.ad_lw * change;
      cost += HuberRho(r.squaredNorm(), opt_.const_huber_delta).cost;
    }
    return cost;
  }

  double Linearize() {
    Hpp_.setZero(pose_dim_, pose_dim_);
    gp_.setZero(pose_dim_);
    C_.assign(static_cast<std::size_t>(n_points_), Eigen::Matrix3d::Zero());
    gx_.assign(static_cast<std::size_t>(n_points_), Eigen::Vector3d::Zero());
    couplings_.assign(static_cast<std::size_t>(n_points_), {});
    double cost = 0.0;

    for (std::size_t i = 0; i < p_.stat_blocks.size(); ++i) {
      if (!stat_active_[i]) continue;
      const StatBlock& b = p_.stat_blocks[i];
      const StatEval e = EvaluateStat(p_, b);
      const Eigen::Vector3d r = e.residual / sigma_stat_;
      const HuberValue h = HuberRho(r.squaredNorm(), opt_.huber_delta);
      cost += h.cost;
      const double s = 1.0 / sigma_stat_;
      AddReprojection(r, h.weight, cam_offset_[static_cast<std::size_t>(b.camera)], s * e.d_camera, -1,
                      Eigen::Matrix<double, 3, Eigen::Dynamic>(), spoint_index_[static_cast<std::size_t>(b.point)],
                      s * e.d_point);
    }
    for (std::size_t i = 0; i < p_.dyna_blocks.size(); ++i) {
      if (!dyna_active_[i]) continue;
      const DynaBlock& b = p_.dyna_blocks[i];
      const DynaEval e = EvaluateDyna(p_, b);
      const double sigma = sigma_dyna_.at(p_.twists[static_cast<std::size_t>(b.twist)].cluster);
      const Eigen::Vector3d r = e.residual / sigma;
      const HuberValue h = HuberRho(r.squaredNorm(), opt_.huber_delta);
      cost += h.cost;
      const double s = 1.0 / sigma;
      AddReprojection(r, h.weight, cam_offset_[static_cast<std::size_t>(b.camera)], s * e.d_camera,
                      twist_offset_[static_cast<std::size_t>(b.twist)], s * e.d_coords,
                      opoint_index_[static_cast<std::size_t>(b.point)], s * e.d_point);
    }
    for (const auto& b : p_.const_blocks) {
      const ConstVelEval e = EvaluateConstVel(p_, b);
      const HuberValue h = HuberRho(e.residual.squaredNorm(), opt_.const_huber_delta);
      cost += h.cost;
      for (int a = 0; a < 3; ++a) {
        const int oa = twist_offset_[static_cast<std::size_t>(b.twists[a])];
        if (oa < 0) continue;
        const auto& Ja = e.d_coords[static_cast<std::size_t>(a)];
        gp_.segment(oa, Ja.cols()) += h.weight * Ja.transpose() * e.residual;
        for (int c = 0; c < 3; ++c) {
          const int oc = twist_offset_[static_cast<std::size_t>(b.twists[c])];
          if (oc < 0) continue;
          const auto& Jc = e.d_coords[static_cast<std::size_t>(c)];
          Hpp_.block(oa, oc, Ja.cols(), Jc.cols()) += h.weight * Ja.transpose() * Jc;
        }
      }
    }
    return cost;
  }

  bool Solve(double lambda, Eigen::VectorXd* dx) {
    dx->setZero(dim());
    if (dim() == 0) return true;
    if (opt_.use_schur) {
      SolveSchur(lambda, dx);
    } else {
      SolveDense(lambda, dx);
    }
    return dx->allFinite();
  }

  double Evaluate(const Eigen::VectorXd& dx) {
    const auto cams = p_.cameras;
    const auto spts = p_.static_points;
    const auto opts = p_.object_points;
    const auto tws = p_.twists;
    Apply(dx);
    const double cost = Cost();
    p_.cameras = cams;
    p_.static_points = spts;
    p_.object_points = opts;
    p_.twists = tws;
    return cost;
  }

  void Accept(const Eigen::VectorXd& dx) { Apply(dx); }

 private:
  void AddReprojection(const Eigen::Vector3d& r, double w, int cam_off, const Mat<3, 6>& Jc, int tw_off,
                       const Eigen::Matrix<double, 3, Eigen::Dynamic>& Jt, int point, const Mat<3, 3>& Jx) {
    if (cam_off >= 0) {
      Hpp_.block<6, 6>(cam_off, cam_off) += w * Jc.transpose() * Jc;
      gp_.segment<6>(cam_off) += w * Jc.transpose() * r;
    }
    if (tw_off >= 0) {
      const auto d = Jt.cols();
      Hpp_.block(tw_off, tw_off, d, d) += w * Jt.transpose() * Jt;
      gp_.segment(tw_off, d) += w * Jt.transpose() * r;
      if (cam_off >= 0) {
        const Eigen::MatrixXd cross = w * Jc.transpose() * Jt;
        Hpp_.block(cam_off, tw_off, 6, d) += cross;
        Hpp_.block(tw_off, cam_off, d, 6) += cross.transpose();
      }
    }
    if (point < 0) return;
    const auto k = static_cast<std::size_t>(point);
    C_[k] += w * Jx.transpose() * Jx;
    gx_[k] += w * Jx.transpose() * r;
    if (cam_off >= 0) AddCoupling(k, cam_off, w * Jc.transpose() * Jx);
    if (tw_off >= 0) AddCoupling(k, tw_off, w * Jt.transpose() * Jx);
  }

  void AddCoupling(std::size_t point, int offset, const Eigen::Matrix<double, Eigen::Dynamic, 3>& E) {
    for (auto& c : couplings_[point]) {
      if (c.offset == offset) {
        c.E += E;
        return;
      }
    }
    couplings_[point].push_back({offset, static_cast<int>(E.rows()), E});
  }

  static void Damp(Eigen::Ref<Eigen::MatrixXd> block, double lambda) {
    for (Eigen::Index i = 0; i < block.rows(); ++i) block(i, i) += lambda * std::max(block(i, i), 1e-12);
  }

  void SolveSchur(double lambda, Eigen::VectorXd* dx) {
    Eigen::MatrixXd S = Hpp_;
    Damp(S, lambda);
    Eigen::VectorXd rhs = -gp_;
    std::vector<Eigen::Matrix3d> c_inv(static_cast<std::size_t>(n_points_));
    for (std::size_t k = 0; k < c_inv.size(); ++k) {
      Eigen::Matrix3d ck = C_[k];
      for (int i = 0; i < 3; ++i) ck(i, i) += lambda * std::max(ck(i, i), 1e-12);
      Eigen::LLT<Eigen::Matrix3d> llt(ck);
      if (llt.info() != Eigen::Success) {
        throw Error(ErrorCode::kSingularReducedSystem, "point block not positive definite");
      }
      c_inv[k] = llt.solve(Eigen::Matrix3d::Identity());
      for (const auto& a : couplings_[k]) {
        const Eigen::Matrix<double, Eigen::Dynamic, 3> ea_ci = a.E * c_inv[k];
        rhs.segment(a.offset, a.size) += ea_ci * gx_[k];
        for (const auto& b : couplings_[k]) {
          S.block(a.offset, b.offset, a.size, b.size) -= ea_ci * b.E.transpose();
        }
      }
    }
    Eigen::VectorXd dp = Eigen::VectorXd::Zero(pose_dim_);
    if (pose_dim_ > 0) {
      Eigen::LLT<Eigen::MatrixXd> llt(S);
      if (llt.info() != Eigen::Success) {
        throw Error(ErrorCode::kSingularReducedSystem, "reduced camera system not positive definite");
      }
      dp = llt.solve(rhs);
    }
    dx->head(pose_dim_) = dp;
    for (std::size_t k = 0; k < c_inv.size(); ++k) {
      Eigen::Vector3d b = -gx_[k];
      for (const auto& a : couplings_[k]) b -= a.E.transpose() * dp.segment(a.offset, a.size);
      dx->segment<3>(pose_dim_ + 3 * static_cast<Eigen::Index>(k)) = c_inv[k] * b;
    }
  }

  void SolveDense(double lambda, Eigen::VectorXd* dx) {
    const int n = dim();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd g(n);
    H.topLeftCorner(pose_dim_, pose_dim_) = Hpp_;
    g.head(pose_dim_) = gp_;
    for (std::size_t k = 0; k < C_.size(); ++k) {
      const Eigen::Index o = pose_dim_ + 3 * static_cast<Eigen::Index>(k);
      H.block<3, 3>(o, o) = C_[k];
      g.segment<3>(o) = gx_[k];
      for (const auto& a : couplings_[k]) {
        H.block(a.offset, o, a.size, 3) = a.E;
        H.block(o, a.offset, 3, a.size) = a.E.transpose();
      }
    }
    Damp(H, lambda);
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::kSingularReducedSystem, "normal equations not positive definite");
    }
    *dx = llt.solve(-g);
  }

  void Apply(const Eigen::VectorXd& dx) {
    for (std::size_t i = 0; i < p_.cameras.size(); ++i) {
      if (cam_offset_[i] < 0) continue;
      p_.cameras[i].T_cw = ExpSE3(Twist(Vector6d(dx.segment<6>(cam_offset_[i])))) * p_.cameras[i].T_cw;
    }
    for (std::size_t i = 0; i < p_.twists.size(); ++i) {
      if (twist_offset_[i] < 0) continue;
      p_.twists[i].coords += dx.segment(twist_offset_[i], p_.twists[i].coords.size());
    }
    for (std::size_t i = 0; i < p_.static_points.size(); ++i) {
      if (spoint_index_[i] < 0) continue;
      p_.static_points[i].X_w += dx.segment<3>(pose_dim_ + 3 * spoint_index_[i]);
    }
    for (std::size_t i = 0; i < p_.object_points.size(); ++i) {
      if (opoint_index_[i] < 0) continue;
      p_.object_points[i].X_o += dx.segment<3>(pose_dim_ + 3 * opoint_index_[i]);
    }
  }

  BAProblem& p_;
  const BAOptions& opt_;
  int pose_dim_ = 0;
  int n_points_ = 0;
  std::vector<int> cam_offset_;
  std::vector<int> twist_offset_;
  std::vector<int> spoint_index_;
  std::vector<int> opoint_index_;
  std::vector<bool> stat_active_;
  std::vector<bool> dyna_active_;
  double sigma_stat_ = 1.0;
  std::map<ClusterId, double> sigma_dyna_;

  Eigen::MatrixXd Hpp_;
  Eigen::VectorXd gp_;
  std::vector<Eigen::Matrix3d> C_;
  std::vector<Eigen::Vector3d> gx_;
  std::vector<std::vector<Coupling>> couplings_;
};

}  // namespace

BAReport SolveBA(BAProblem& problem, const BAOptions& options) {
  std::string why;
  if (!problem.CheckLive(&why)) throw Error(ErrorCode::kConfigInvalid, why);
  BAReport report;
  BASolver solver(problem, options);
  const detail::LmSettings settings{options.max_iters, options.lambda_init, options.convergence_tol};
  for (int round = 0; round < options.outer_rounds; ++round) {
    if (round > 0) FoldTwists(problem);
    solver.PrepareRound(&report);
    const detail::LmOutcome outcome = detail::RunLm(solver, settings);
    if (round == 0) report.initial_cost = outcome.initial_cost;
    report.final_cost = outcome.final_cost;
    report.iterations += outcome.iterations;
    report.converged = outcome.converged;
  }
  return report;
}

void FoldTwists(BAProblem& problem) {
  for (std::size_t t = 0; t < problem.twists.size(); ++t) {
    problem.twists[t].snapshot = problem.ObjectPose(static_cast<int>(t));
    problem.twists[t].coords.setZero();
  }
}

void WriteBack(const BAProblem& problem, WorldMap& map) {
  for (const auto& c : problem.cameras) {
    if (KeyFrame* kf = map.FindKeyFrame(c.frame_index)) kf->pose = c.T_cw;
  }
  for (const auto& s : problem.static_points) {
    if (MapPoint* p = map.FindPoint(s.id)) p->position = s.X_w;
  }
  for (const auto& o : problem.object_points) {
    if (MapPoint* p = map.FindPoint(o.id)) p->position = o.X_o;
  }
  std::map<ClusterId, std::vector<int>> touched;
  for (std::size_t t = 0; t < problem.twists.size(); ++t) {
    const TwistVar& var = problem.twists[t];
    Cluster* cluster = map.FindCluster(var.cluster);
    if (!cluster) continue;
    cluster->poses[var.frame_index] = problem.ObjectPose(static_cast<int>(t));
    touched[var.cluster].push_back(var.frame_index);
  }
  for (const auto& [id, frames] : touched) {
    Cluster& cluster = *map.FindCluster(id);
    const TwistProjector& proj = problem.projectors.at(id);
    for (int f : frames) {
      auto prev = cluster.poses.find(f - 1);
      if (prev == cluster.poses.end()) continue;
      const Vector6d xi = LogSE3(cluster.poses.at(f) * prev->second.inverse()).vector();
      cluster.twists[f] = Twist(Vector6d(proj.p_world * xi));
    }
  }
}

std::string DumpProblem(const BAProblem& problem) {
  using nlohmann::json;
  auto pose_json = [](const Pose& pose) {
    const Vector12d v = pose.vec();
    return std::vector<double>(v.data(), v.data() + 12);
  };
  json root;
  root["format"] = "cdslam-ba-problem";
  root["version"] = 1;
  root["weights"] = std::vector<double>(problem.weights.data(), problem.weights.data() + 6);
  for (const auto& c : problem.cameras) {
    root["cameras"].push_back({{"frame", c.frame_index}, {"fixed", c.fixed}, {"T_cw", pose_json(c.T_cw)}});
  }
  for (const auto& s : problem.static_points) {
    root["static_points"].push_back({{"id", s.id}, {"fixed", s.fixed}, {"X_w", {s.X_w.x(), s.X_w.y(), s.X_w.z()}}});
  }
  for (const auto& o : problem.object_points) {
    root["object_points"].push_back(
        {{"id", o.id}, {"cluster", o.cluster}, {"fixed", o.fixed}, {"X_o", {o.X_o.x(), o.X_o.y(), o.X_o.z()}}});
  }
  for (const auto& t : problem.twists) {
    root["twists"].push_back({{"cluster", t.cluster},
                              {"frame", t.frame_index},
                              {"fixed", t.fixed},
                              {"snapshot", pose_json(t.snapshot)},
                              {"coords", std::vector<double>(t.coords.data(), t.coords.data() + t.coords.size())}});
  }
  for (const auto& b : problem.stat_blocks) root["stat_blocks"].push_back({b.camera, b.point});
  for (const auto& b : problem.dyna_blocks) root["dyna_blocks"].push_back({b.camera, b.twist, b.point});
  for (const auto& b : problem.const_blocks) {
    root["const_blocks"].push_back({b.cluster, b.twists[0], b.twists[1], b.twists[2]});
  }
  return root.dump(1) + "\n";
}

}  // namespace cdslam
