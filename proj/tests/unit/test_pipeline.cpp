#include <cstdlib>
#include <filesystem>

#include <gtest/gtest.h>

#include "cdslam/experiment.hpp"
#include "cdslam/trajectory_io.hpp"

namespace cdslam {
namespace {

class NoiselessRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    SceneConfig scene = DefaultScene(8);
    scene.pixel_noise_sigma = 0.0;
    out_ = new ExperimentOutput(RunExperiment(scene, PipelineConfig{}));
  }
  static void TearDownTestSuite() {
    delete out_;
    out_ = nullptr;
  }
  static ExperimentOutput* out_;
};
ExperimentOutput* NoiselessRun::out_ = nullptr;

TEST_F(NoiselessRun, CameraIsExact) {
  EXPECT_EQ(out_->camera_est.size(), 100u);
  EXPECT_LT(out_->report.camera_ate, 1e-6);
  EXPECT_LT(out_->report.camera_rpe_t, 1e-6);
}

TEST_F(NoiselessRun, ObjectsAreExact) {
  ASSERT_EQ(out_->report.objects.size(), 3u);
  for (const auto& o : out_->report.objects) {
    EXPECT_GT(o.frames_tracked, 10) << o.id;
    EXPECT_LT(o.ate, 1e-5) << o.id;
    EXPECT_LT(o.twist_error_max, 1e-6) << o.id;
    EXPECT_LT(o.out_of_plane_drift, 1e-8) << o.id;
    EXPECT_NEAR(o.mean_speed_kmh, o.gt_mean_speed_kmh, 1e-4) << o.id;
  }
}

TEST_F(NoiselessRun, MapIsConsistent) {
  std::string why;
  EXPECT_TRUE(out_->map.CheckInvariants(&why)) << why;
  EXPECT_EQ(out_->report.stats.ba_failures, 0);
  EXPECT_GT(out_->report.stats.ba_runs, 10);
}

TEST_F(NoiselessRun, SpatialSkeletonIsSmallerThanWindow) {
  const auto temporal = out_->map.TemporalKeyframes();
  const auto spatial = out_->map.SpatialKeyframes();
  EXPECT_EQ(temporal.size(), 50u);
  EXPECT_GT(spatial.size(), 0u);
  EXPECT_LT(spatial.size(), temporal.size());
  for (int f : spatial) EXPECT_LT(f, temporal.front());
}

TEST_F(NoiselessRun, CarsStartOnceTheRoadIsFitted) {
  ASSERT_TRUE(out_->map.road_plane.has_value());
  int cars = 0;
  for (const auto& [id, cluster] : out_->map.clusters()) {
    if (cluster.is_static) continue;
    ASSERT_TRUE(cluster.joint.has_value()) << id;
    EXPECT_EQ(cluster.joint->type, JointType::kPlanar) << id;
    ASSERT_FALSE(cluster.poses.empty());
    EXPECT_GT(cluster.poses.begin()->first, PipelineConfig{}.road_fit_frame) << id;
    ++cars;
  }
  EXPECT_GT(cars, 0);
}

SceneConfig ShortScene(std::uint64_t seed) {
  SceneConfig scene = DefaultScene(seed);
  scene.n_frames = 30;
  return scene;
}

TEST(Experiment, SameSeedSameReport) {
  const std::string a = FormatReport(RunExperiment(ShortScene(9), PipelineConfig{}).report);
  const std::string b = FormatReport(RunExperiment(ShortScene(9), PipelineConfig{}).report);
  EXPECT_EQ(a, b);
}

TEST(Experiment, GoldenReport) {
  const std::string text = FormatReport(RunExperiment(ShortScene(7), PipelineConfig{}).report);
  const std::filesystem::path golden = std::filesystem::path(CDSLAM_GOLDEN_DIR) / "report_seed7_30frames.txt";
  if (std::getenv("CDSLAM_UPDATE_GOLDEN") != nullptr) WriteTextFile(golden, text);
  EXPECT_EQ(text, ReadTextFile(golden));
}

TEST(Experiment, NoisyRunStaysClose) {
  const ExperimentOutput out = RunExperiment(ShortScene(10), PipelineConfig{});
  EXPECT_LT(out.report.camera_ate, 0.05);
  for (const auto& o : out.report.objects) EXPECT_LT(o.ate, 0.3) << o.id;
}

TEST(Experiment, WritesOutputs) {
  const auto dir = std::filesystem::temp_directory_path() / "cdslam_pipeline_test";
  std::filesystem::remove_all(dir);
  SceneConfig scene = ShortScene(11);
  scene.n_frames = 12;
  const ExperimentOutput out = RunExperiment(scene, PipelineConfig{});
  WriteExperimentOutputs(out, dir, true);
  EXPECT_EQ(ReadTextFile(dir / "report.txt"), FormatReport(out.report));
  EXPECT_TRUE(std::filesystem::exists(dir / "runtime.txt"));
  EXPECT_EQ(ReadTrajectory(dir / "camera_est.txt").size(), 12u);
  std::filesystem::remove_all(dir);
}

TEST(SpeedKmh, HandCase) {
  EXPECT_DOUBLE_EQ(SpeedKmh(Pose(), Pose::FromTranslation(Eigen::Vector3d(0.5, 0, 0)), 10.0), 18.0);
}

}  // namespace
}  // namespace cdslam
