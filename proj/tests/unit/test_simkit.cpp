#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "cdslam/error.hpp"
#include "cdslam/simkit.hpp"

namespace cdslam {
namespace {

TEST(Simkit, SameSeedSameScene) {
  const SceneConfig cfg = DefaultScene(21);
  const GroundTruth a = GenerateScene(cfg);
  const GroundTruth b = GenerateScene(cfg);
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) EXPECT_EQ(a.points[i].position, b.points[i].position);
  for (int f : {0, 17, 99}) {
    const auto oa = RenderObservations(a, f, cfg);
    const auto ob = RenderObservations(b, f, cfg);
    ASSERT_EQ(oa.size(), ob.size());
    for (std::size_t i = 0; i < oa.size(); ++i) {
      EXPECT_EQ(oa[i].u, ob[i].u);
      EXPECT_EQ(oa[i].disparity, ob[i].disparity);
    }
  }
  const GroundTruth c = GenerateScene(DefaultScene(22));
  EXPECT_NE(a.points[0].position, c.points[0].position);
}

TEST(Simkit, ZeroTwistKeepsPoseConstant) {
  const SceneConfig cfg = ParkedCarScene(3);
  const GroundTruth gt = GenerateScene(cfg);
  const GtObject& car = gt.objects.at(0);
  for (const Pose& pose : car.poses) EXPECT_EQ(pose.matrix(), car.poses.front().matrix());
}

TEST(Simkit, PlanarForwardMotion) {
  SceneConfig cfg = ParkedCarScene(3);
  cfg.n_frames = 11;
  cfg.dynamic_objects[0].schedule = {{1, 1 << 30, Twist(Eigen::Vector3d(0.5, 0, 0), Eigen::Vector3d::Zero())}};
  const GroundTruth gt = GenerateScene(cfg);
  const GtObject& car = gt.objects.at(0);
  const Eigen::Vector3d start = car.poses.front().translation();
  const Eigen::Vector3d end = car.poses.back().translation();
  EXPECT_NEAR((end - start).norm(), 5.0, 1e-12);
  for (const Pose& pose : car.poses) {
    EXPECT_NEAR(pose.translation().z(), start.z(), 1e-12);
    EXPECT_LT((pose.rotation() - car.poses.front().rotation()).norm(), 1e-12);
  }
  for (std::size_t f = 1; f < car.poses.size(); ++f) {
    const Pose stepped = ExpSE3(car.world_twists[f]) * car.poses[f - 1];
    EXPECT_LT((stepped.matrix() - car.poses[f].matrix()).norm(), 1e-12);
  }
}

TEST(Simkit, TwistOutsideJointIsRejected) {
  SceneConfig cfg = ParkedCarScene(3);
  cfg.dynamic_objects[0].schedule = {{1, 1 << 30, Twist(Eigen::Vector3d(0, 0, 0.2), Eigen::Vector3d::Zero())}};
  try {
    GenerateScene(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfigInvalid);
  }
}

TEST(Simkit, PixelNoiseHasConfiguredSigma) {
  SceneConfig noisy = DefaultScene(23);
  SceneConfig clean = noisy;
  clean.pixel_noise_sigma = 0.0;
  const GroundTruth gt = GenerateScene(noisy);
  double sum = 0.0;
  double sum2 = 0.0;
  std::size_t n = 0;
  for (int f = 0; f < 100; f += 3) {
    const auto a = RenderObservations(gt, f, noisy);
    const auto b = RenderObservations(gt, f, clean);
    std::map<PointId, const StereoObservation*> by_id;
    for (const auto& o : b) by_id[o.point_id] = &o;
    for (const auto& o : a) {
      auto it = by_id.find(o.point_id);
      if (it == by_id.end()) continue;  // noise pushed it across a visibility edge
      for (double d : {o.u - it->second->u, o.v - it->second->v}) {
        sum += d;
        sum2 += d * d;
        ++n;
      }
    }
  }
  ASSERT_GT(n, 10000u);
  const double mean = sum / static_cast<double>(n);
  const double sd = std::sqrt(sum2 / static_cast<double>(n) - mean * mean);
  EXPECT_GE(sd, 0.48);
  EXPECT_LE(sd, 0.52);
  EXPECT_LT(std::abs(mean), 0.02);
}

TEST(Simkit, RenderedPointsAreVisible) {
  const SceneConfig cfg = DefaultScene(24);
  const GroundTruth gt = GenerateScene(cfg);
  for (int f : {0, 50, 99}) {
    const Pose T_cw = gt.camera_poses[static_cast<std::size_t>(f)].inverse();
    const auto obs = RenderObservations(gt, f, cfg);
    ASSERT_FALSE(obs.empty());
    std::set<PointId> ids;
    for (const auto& o : obs) {
      EXPECT_TRUE(ids.insert(o.point_id).second);
      const GtPoint& p = gt.points[static_cast<std::size_t>(o.point_id)];
      ASSERT_EQ(p.id, o.point_id);
      EXPECT_EQ(p.cluster, o.cluster_id);
      EXPECT_GT((T_cw * gt.WorldPoint(p, f)).z(), 0.0);
    }
    // Points behind the camera never show up.
    for (const auto& p : gt.points) {
      if ((T_cw * gt.WorldPoint(p, f)).z() <= 0.0) EXPECT_EQ(ids.count(p.id), 0u);
    }
  }
}

TEST(Simkit, FarObjectsAreNotSpawned) {
  SceneConfig cfg = DefaultScene(25);
  cfg.far_spawn_distance = 20.0;
  const GroundTruth gt = GenerateScene(cfg);
  const auto obs = RenderObservations(gt, 0, cfg);
  for (const auto& o : obs) {
    if (const GtObject* object = gt.FindObject(o.cluster_id)) {
      EXPECT_LE((object->poses[0].translation() - gt.camera_poses[0].translation()).norm(), 20.0);
    }
  }
}

std::vector<StereoObservation> Synthetic(int first, int count, ClusterId cluster) {
  std::vector<StereoObservation> out;
  for (int i = 0; i < count; ++i) {
    StereoObservation o;
    o.point_id = first + i;
    o.cluster_id = cluster;
    out.push_back(o);
  }
  return out;
}

TEST(Associate, CorruptionRate) {
  SceneConfig cfg = DefaultScene(26);
  cfg.association_corruption = 0.2;
  const auto prev = Synthetic(0, 1000, 1);
  const auto curr = Synthetic(0, 1000, 1);
  const auto matches = Associate(prev, curr, cfg, 7);
  ASSERT_EQ(matches.size(), 1000u);
  int wrong = 0;
  for (const auto& m : matches) {
    EXPECT_EQ(curr[m.curr].cluster_id, prev[m.prev].cluster_id);
    wrong += curr[m.curr].point_id != prev[m.prev].point_id ? 1 : 0;
  }
  // Binomial(1000, 0.2): sd is about 12.6.
  EXPECT_GE(wrong, 160);
  EXPECT_LE(wrong, 240);

  cfg.association_corruption = 0.0;
  for (const auto& m : Associate(prev, curr, cfg, 7)) EXPECT_EQ(curr[m.curr].point_id, prev[m.prev].point_id);
}

TEST(Associate, DisjointFramesGiveNothing) {
  const SceneConfig cfg = DefaultScene(27);
  EXPECT_TRUE(Associate(Synthetic(0, 50, 1), Synthetic(100, 50, 1), cfg, 1).empty());
}

TEST(Substream, ChannelsAreIndependent) {
  auto a = Substream(1, "noise", 3);
  auto b = Substream(1, "noise", 3);
  auto c = Substream(1, "noise", 4);
  auto d = Substream(1, "outliers", 3);
  auto e = Substream(2, "noise", 3);
  const auto first = a();
  EXPECT_EQ(first, b());
  EXPECT_NE(first, c());
  EXPECT_NE(first, d());
  EXPECT_NE(first, e());
}

TEST(ScheduledTwist, PicksSegment) {
  const std::vector<TwistSegment> schedule = {
      {1, 5, Twist(Eigen::Vector3d(1, 0, 0), Eigen::Vector3d::Zero())},
      {6, 9, Twist(Eigen::Vector3d(2, 0, 0), Eigen::Vector3d::Zero())}};
  EXPECT_EQ(ScheduledTwist(schedule, 0).v.x(), 0.0);
  EXPECT_EQ(ScheduledTwist(schedule, 5).v.x(), 1.0);
  EXPECT_EQ(ScheduledTwist(schedule, 6).v.x(), 2.0);
  EXPECT_EQ(ScheduledTwist(schedule, 10).v.x(), 0.0);
}

TEST(SampleBoxSurface, PointsLieOnTheSurface) {
  std::mt19937_64 rng(28);
  const Eigen::Vector3d bbox(4.0, 1.8, 1.5);
  for (const auto& p : SampleBoxSurface(bbox, 500, rng)) {
    const Eigen::Vector3d r = (p.cwiseAbs().array() / (bbox / 2.0).array()).matrix();
    EXPECT_NEAR(r.maxCoeff(), 1.0, 1e-12);
  }
}

TEST(Simkit, FarPointTriangulationErrorGrowsWithDepth) {
  // Depth error of a stereo point scales with z^2 / (f b) * sigma_d.
  const SceneConfig cfg = DefaultScene(29);
  const GroundTruth gt = GenerateScene(cfg);
  const Pose T_cw = gt.camera_poses[0].inverse();
  double near_err = 0.0, far_err = 0.0;
  int near_n = 0, far_n = 0;
  for (const auto& o : RenderObservations(gt, 0, cfg)) {
    if (o.disparity < 1.0) continue;
    const Eigen::Vector3d truth = T_cw * gt.WorldPoint(gt.points[static_cast<std::size_t>(o.point_id)], 0);
    const double err = (TriangulateStereo(cfg.camera, o) - truth).norm();
    if (truth.z() < 10.0) {
      near_err += err;
      ++near_n;
    } else if (truth.z() > 30.0) {
      far_err += err;
      ++far_n;
    }
  }
  ASSERT_GT(near_n, 20);
  ASSERT_GT(far_n, 20);
  EXPECT_GT(far_err / far_n, 5.0 * near_err / near_n);
}

TEST(SceneConfig, Validation) {
  SceneConfig cfg = DefaultScene(30);
  EXPECT_NO_THROW(cfg.Validate());
  cfg.outlier_fraction = 1.5;
  EXPECT_THROW(cfg.Validate(), Error);
  cfg = DefaultScene(30);
  cfg.n_frames = 0;
  EXPECT_THROW(cfg.Validate(), Error);
}

}  // namespace
}  // namespace cdslam
