#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cdslam/error.hpp"
#include "cdslam/trajectory_io.hpp"
#include "cdslam/worldmodel.hpp"

namespace cdslam {
namespace {

KeyFrame MakeFrame(int index, double rate, std::initializer_list<PointId> ids) {
  KeyFrame kf;
  kf.frame_index = index;
  kf.timestamp = index / rate;
  for (PointId id : ids) {
    StereoObservation obs;
    obs.point_id = id;
    obs.frame_index = index;
    kf.observations.push_back(obs);
  }
  return kf;
}

KeyFrame MakeFrameRange(int index, double rate, PointId first, PointId last) {
  KeyFrame kf = MakeFrame(index, rate, {});
  for (PointId id = first; id <= last; ++id) {
    StereoObservation obs;
    obs.point_id = id;
    obs.frame_index = index;
    kf.observations.push_back(obs);
  }
  return kf;
}

TEST(SemanticVote, MajorityAndTieBreak) {
  MapPoint p;
  EXPECT_EQ(FuseSemanticVote(p, "car").EffectiveClass(), "car");

  p.class_votes = {{"car", 3}, {"road", 1}};
  for (int i = 0; i < 3; ++i) p = FuseSemanticVote(p, "road");
  EXPECT_EQ(p.EffectiveClass(), "road");
  EXPECT_EQ(p.class_votes.at("road"), 4);

  MapPoint tie;
  tie.class_votes = {{"road", 2}, {"car", 2}};
  EXPECT_EQ(tie.EffectiveClass(), "car");
}

TEST(StaticityTable, Defaults) {
  const StaticityTable table = StaticityTable::Default();
  for (const char* label : {"car", "bus", "bike", "pedestrian"}) EXPECT_TRUE(table.IsDynamic(label));
  for (const char* label : {"road", "building", "unknown"}) EXPECT_FALSE(table.IsDynamic(label));
}

TEST(WorldMap, AddPointNeedsOwner) {
  WorldMap map;
  EXPECT_THROW(map.AddPoint(1, Eigen::Vector3d::Zero(), 5), Error);
  map.AddCluster(5, "road", true);
  map.AddPoint(1, Eigen::Vector3d(1, 2, 3), 5);
  map.AddPoint(1, Eigen::Vector3d(4, 5, 6), 5);  // update, not a second member
  EXPECT_EQ(map.FindCluster(5)->points.size(), 1u);
  EXPECT_EQ(map.FindPoint(1)->position, Eigen::Vector3d(4, 5, 6));
}

TEST(WorldMap, PromoteDropsUnknownObservations) {
  WorldMap map;
  map.AddCluster(0, "road", true);
  map.AddPoint(1, Eigen::Vector3d::Zero(), 0);
  const KeyFrame& kf = map.PromoteTemporalKeyframe(MakeFrame(3, 10.0, {1, 2}));
  EXPECT_TRUE(kf.is_temporal);
  ASSERT_EQ(kf.observations.size(), 1u);
  EXPECT_EQ(kf.observations[0].point_id, 1);
  EXPECT_EQ(map.TemporalKeyframes(), std::vector<int>{3});
  EXPECT_TRUE(map.CheckInvariants());
}

TEST(CullKeyframes, EmptyMap) {
  WorldMap map;
  EXPECT_TRUE(map.CullKeyframes(100.0).empty());
}

TEST(CullKeyframes, LoneOldKeyframeIsDeleted) {
  WorldMap map;
  map.AddCluster(0, "road", true);
  for (PointId id = 0; id < 40; ++id) map.AddPoint(id, Eigen::Vector3d::Zero(), 0);
  map.PromoteTemporalKeyframe(MakeFrameRange(0, 10.0, 0, 39));
  EXPECT_EQ(map.CullKeyframes(6.0), std::vector<int>{0});
  EXPECT_TRUE(map.keyframes().empty());
}

TEST(CullKeyframes, CovisibleKeyframeBecomesSpatial) {
  WorldMap map;
  map.AddCluster(0, "road", true);
  for (PointId id = 0; id < 100; ++id) map.AddPoint(id, Eigen::Vector3d::Zero(), 0);
  map.PromoteTemporalKeyframe(MakeFrameRange(0, 10.0, 0, 49));
  map.PromoteTemporalKeyframe(MakeFrameRange(60, 10.0, 10, 59));   // shares 40
  map.PromoteTemporalKeyframe(MakeFrameRange(61, 10.0, 70, 99));   // shares none with 0
  EXPECT_TRUE(map.CullKeyframes(6.0).empty());
  EXPECT_EQ(map.SpatialKeyframes(), std::vector<int>{0});
  EXPECT_EQ(map.TemporalKeyframes(), (std::vector<int>{60, 61}));
  EXPECT_TRUE(map.CheckInvariants());
}

TEST(CullKeyframes, BelowCovisibilityThresholdIsDeleted) {
  WorldMap map;
  map.AddCluster(0, "road", true);
  for (PointId id = 0; id < 100; ++id) map.AddPoint(id, Eigen::Vector3d::Zero(), 0);
  map.PromoteTemporalKeyframe(MakeFrameRange(0, 10.0, 0, 49));
  map.PromoteTemporalKeyframe(MakeFrameRange(60, 10.0, 21, 70));  // shares 29
  EXPECT_EQ(map.CullKeyframes(6.0), std::vector<int>{0});
}

TEST(CullKeyframes, WindowBoundAndSkeleton) {
  // A sliding window of 400 point ids, advancing 8 per frame at 10 Hz.
  const double rate = 10.0;
  WorldMap map;
  map.AddCluster(0, "road", true);
  for (PointId id = 0; id < 8 * 200 + 400; ++id) map.AddPoint(id, Eigen::Vector3d::Zero(), 0);
  std::size_t temporal_peak = 0;
  std::size_t spatial_peak = 0;
  for (int f = 0; f < 200; ++f) {
    map.PromoteTemporalKeyframe(MakeFrameRange(f, rate, 8 * f, 8 * f + 399));
    map.CullKeyframes(f / rate);
    temporal_peak = std::max(temporal_peak, map.TemporalKeyframes().size());
    spatial_peak = std::max(spatial_peak, map.SpatialKeyframes().size());
    ASSERT_LE(map.TemporalKeyframes().size(), 50u);
    std::string why;
    ASSERT_TRUE(map.CheckInvariants(&why)) << why;
  }
  EXPECT_EQ(temporal_peak, 50u);
  EXPECT_GT(spatial_peak, 0u);
  EXPECT_LT(spatial_peak, temporal_peak);
}

TEST(DropLostClusters, RemovesPointsAndObservations) {
  WorldMap map;
  map.AddCluster(0, "road", true);
  Cluster& car = map.AddCluster(7, "car", false);
  car.frames_untracked = 11;
  car.poses[0] = Pose::Identity();
  car.twists[0] = Twist::Zero();
  map.AddPoint(1, Eigen::Vector3d::Zero(), 0);
  map.AddPoint(2, Eigen::Vector3d::Zero(), 7);
  map.PromoteTemporalKeyframe(MakeFrame(0, 10.0, {1, 2}));
  EXPECT_EQ(map.DropLostClusters(10), std::vector<ClusterId>{7});
  EXPECT_EQ(map.FindPoint(2), nullptr);
  EXPECT_EQ(map.keyframes().at(0).observations.size(), 1u);
  EXPECT_TRUE(map.CheckInvariants());
}

TEST(CheckInvariants, DetectsViolations) {
  WorldMap map;
  Cluster& road = map.AddCluster(0, "road", true);
  road.poses[0] = Pose::Identity();
  std::string why;
  EXPECT_FALSE(map.CheckInvariants(&why));
  EXPECT_NE(why.find("static"), std::string::npos);

  WorldMap map2;
  Cluster& car = map2.AddCluster(1, "car", false);
  car.poses[0] = Pose::Identity();
  car.poses[1] = Pose::Identity();
  car.twists[0] = Twist::Zero();
  car.twists[2] = Twist::Zero();
  EXPECT_FALSE(map2.CheckInvariants());

  WorldMap map3;
  map3.AddCluster(0, "road", true);
  map3.keyframes()[4] = MakeFrame(4, 10.0, {99});
  EXPECT_FALSE(map3.CheckInvariants());
}

WorldMap SmallMap() {
  WorldMap map;
  map.road_plane = PlaneModel{Eigen::Vector4d(0, 0, 1, 0)};
  map.AddCluster(0, "road", true);
  Cluster& car = map.AddCluster(3, "car", false);
  car.joint = MakeJoint(JointType::kPlanar, Pose::FromTranslation(Eigen::Vector3d(10, -2, 0)), "road", "car");
  car.poses[0] = Pose::FromTranslation(Eigen::Vector3d(10, -2, 0.75));
  car.twists[0] = Twist::Zero();
  car.poses[1] = ExpSE3(Twist(Eigen::Vector3d(0.5, 0, 0), Eigen::Vector3d(0, 0, 0.01))) * car.poses[0];
  car.twists[1] = Twist(Eigen::Vector3d(0.5, 0, 0), Eigen::Vector3d(0, 0, 0.01));
  map.AddPoint(1, Eigen::Vector3d(4.25, 1.5, 0.0), 0).class_votes = {{"road", 2}};
  map.AddPoint(2, Eigen::Vector3d(-1.0, 0.5, 0.25), 3).class_votes = {{"car", 1}, {"road", 1}};
  KeyFrame kf = MakeFrame(0, 10.0, {1, 2});
  kf.observations[0].u = 512.25;
  kf.observations[0].v = 200.5;
  kf.observations[0].disparity = 12.125;
  kf.pose = Pose::FromTranslation(Eigen::Vector3d(0, 0, -1.5));
  map.PromoteTemporalKeyframe(kf);
  map.PromoteTemporalKeyframe(MakeFrame(1, 10.0, {1}));
  return map;
}

TEST(MapSerialization, RoundTrip) {
  const WorldMap map = SmallMap();
  const std::string text = SerializeMap(map);
  const WorldMap back = DeserializeMap(text);
  EXPECT_EQ(SerializeMap(back), text);
  EXPECT_TRUE(back.CheckInvariants());
  ASSERT_NE(back.FindCluster(3), nullptr);
  ASSERT_TRUE(back.FindCluster(3)->joint.has_value());
  EXPECT_EQ(back.FindCluster(3)->joint->type, JointType::kPlanar);
  EXPECT_EQ(back.FindPoint(2)->class_votes, map.FindPoint(2)->class_votes);
}

TEST(MapSerialization, MatchesGolden) {
  const std::string text = SerializeMap(SmallMap());
  const std::filesystem::path golden = std::filesystem::path(CDSLAM_GOLDEN_DIR) / "small_map.json";
  if (std::getenv("CDSLAM_UPDATE_GOLDEN") != nullptr) WriteTextFile(golden, text);
  EXPECT_EQ(text, ReadTextFile(golden));
}

TEST(MapSerialization, RejectsWrongFormat) {
  try {
    DeserializeMap(R"({"format":"other","version":1})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
  EXPECT_THROW(DeserializeMap("not json"), Error);
}

}  // namespace
}  // namespace cdslam
