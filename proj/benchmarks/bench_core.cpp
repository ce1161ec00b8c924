#include <random>

#include <benchmark/benchmark.h>

#include "cdslam/dynba.hpp"
#include "cdslam/liegroup.hpp"
#include "cdslam/simkit.hpp"
#include "cdslam/tracking.hpp"
#include "gt_map.hpp"
#include "test_util.hpp"

namespace cdslam {
namespace {

void BM_ExpSE3(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const Twist xi = testing::RandomTwist(rng, 1.0, 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(ExpSE3(xi));
}
BENCHMARK(BM_ExpSE3);

void BM_LogSE3(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const Pose T = ExpSE3(testing::RandomTwist(rng, 1.0, 2.0));
  for (auto _ : state) benchmark::DoNotOptimize(LogSE3(T));
}
BENCHMARK(BM_LogSE3);

void BM_Dlog(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const Pose T = ExpSE3(testing::RandomTwist(rng, 1.0, 2.0));
  for (auto _ : state) benchmark::DoNotOptimize(Dlog(T));
}
BENCHMARK(BM_Dlog);

void BM_ObjectTwistJacobian(benchmark::State& state) {
  const Pose T_wo = Pose::FromTranslation(Eigen::Vector3d(1.0, 0.5, 12.0));
  const Matrix6d P = ConjugatedProjector(MakeJoint(JointType::kPlanar, Pose())).p_world;
  const Twist xi(Eigen::Vector3d(0.3, 0.0, 0.0), Eigen::Vector3d(0.0, 0.0, 0.01));
  const PinholeCamera cam;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ObjectTwistJacobian(Eigen::Vector3d(0.5, 0.2, -0.3), Pose(), T_wo, P, cam, xi));
  }
}
BENCHMARK(BM_ObjectTwistJacobian);

void BM_TrackCamera(benchmark::State& state) {
  SceneConfig scene = DefaultScene(4);
  scene.outlier_fraction = 0.3;
  const GroundTruth gt = GenerateScene(scene);
  std::vector<StaticCorrespondence> corr;
  for (const auto& o : RenderObservations(gt, 25, scene)) {
    if (gt.FindObject(o.cluster_id)) continue;
    corr.push_back({o.point_id, gt.points[static_cast<std::size_t>(o.point_id)].position, o.uv()});
  }
  const Pose init = gt.camera_poses[24].inverse();
  for (auto _ : state) benchmark::DoNotOptimize(TrackCamera(corr, scene.camera, init, RobustConfig{}));
  state.counters["points"] = static_cast<double>(corr.size());
}
BENCHMARK(BM_TrackCamera)->Unit(benchmark::kMillisecond);

// Ten-keyframe window; the argument selects the Schur (1) or dense (0) solve.
void BM_SolveBA(benchmark::State& state) {
  const SceneConfig scene = testing::SmallScene(5, 0.5);
  const GroundTruth gt = GenerateScene(scene);
  const WorldMap map = testing::MapFromGroundTruth(scene, gt, 0, 9);
  const auto frames = testing::FrameRange(0, 9);
  const BAProblem base = BuildProblem(map, scene.camera, frames, {});
  BAOptions options;
  options.use_schur = state.range(0) != 0;
  options.max_iters = 5;
  for (auto _ : state) {
    BAProblem p = base;
    benchmark::DoNotOptimize(SolveBA(p, options));
  }
  state.counters["stat_blocks"] = static_cast<double>(base.stat_blocks.size());
  state.counters["dyna_blocks"] = static_cast<double>(base.dyna_blocks.size());
}
BENCHMARK(BM_SolveBA)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace cdslam

BENCHMARK_MAIN();
