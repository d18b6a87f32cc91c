#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "fixtures.hpp"
#include "panoloc/evaluation.hpp"
#include "panoloc/primitives.hpp"
#include "panoloc/render.hpp"
#include "panoloc/rng.hpp"

using namespace panoloc;
using namespace panoloc::testing;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("panoloc_test_evaluation_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

PoseError err(double terr_cm, double rerr_deg = 0.0) {
  PoseError e;
  e.terr_xyz_cm = e.terr_xy_cm = terr_cm;
  e.rerr_3d_deg = e.rerr_yaw_deg = rerr_deg;
  return e;
}

// Independent segment-distance oracle over every room edge.
double wall_distance_oracle(const Scene& s, const Eigen::Vector2d& p) {
  double best = 1e300;
  for (const Room& r : s.rooms)
    for (std::size_t i = 0; i < r.polygon.size(); ++i) {
      const Eigen::Vector2d a = r.polygon[i], b = r.polygon[(i + 1) % r.polygon.size()];
      double t = (p - a).dot(b - a) / (b - a).squaredNorm();
      t = std::clamp(t, 0.0, 1.0);
      best = std::min(best, (a + t * (b - a) - p).norm());
    }
  return best;
}

double median_oracle(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int count_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  int n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST(QuerySampling, SamplesPassIndependentRecheck) {
  const Scene scene = generate_synthetic_scene(7);
  const PrimitiveSet prims = scene_to_primitives(scene);
  QueryConfig cfg;
  cfg.count = 500;
  const auto a = sample_query_poses(scene, prims, cfg, 99, "scene_x");
  const auto b = sample_query_poses(scene, prims, cfg, 99, "scene_x");
  ASSERT_EQ(a.size(), 500u);
  const CameraIntrinsics k = cfg.intrinsics();
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].pose.translation, b[i].pose.translation);
    EXPECT_EQ(a[i].pose.rotation.coeffs(), b[i].pose.rotation.coeffs());
    EXPECT_EQ(a[i].index, static_cast<int>(i));
    EXPECT_EQ(a[i].scene_id, "scene_x");
    // (a) three classes at 1% each, recounted from a fresh render.
    const SemanticImage sem = render_perspective(prims, a[i].pose, k).semantic;
    std::array<int, kNumClasses> count{};
    for (auto v : sem.data()) ++count[v];
    int classes = 0;
    for (int c = 1; c < kNumClasses; ++c) classes += count[c] >= 0.01 * sem.size();
    ASSERT_GE(classes, 3) << "query " << i;
    // (b) center ray at least 1 m.
    const Eigen::Vector3d fwd = a[i].pose.rotation * Eigen::Vector3d::UnitY();
    const auto hit = intersect_ray(prims, a[i].pose.translation, fwd);
    ASSERT_TRUE(hit.has_value());
    ASSERT_GE(hit->distance, 1.0);
    // (c) 10 cm from every wall, inside a room, heights and tilt in range.
    ASSERT_GE(wall_distance_oracle(scene, a[i].pose.translation.head<2>()), 0.1);
    const auto room = point_room_lookup(scene, a[i].pose.translation);
    ASSERT_TRUE(room.has_value());
    const double h = a[i].pose.translation.z() - scene.rooms[*room].floor_z;
    ASSERT_GE(h, 1.2);
    ASSERT_LE(h, 1.8);
    ASSERT_LE(std::abs(std::asin(fwd.z())), 10 * kDeg + 1e-9);
  }
}

TEST(QuerySampling, BoxRoomWithoutTiltSeesWallFloorCeiling) {
  const Scene scene = box_scene(5.0, 4.0);
  const PrimitiveSet prims = scene_to_primitives(scene);
  QueryConfig cfg;
  cfg.count = 40;
  cfg.tilt_max_deg = 0.0;
  for (const QuerySpec& q : sample_query_poses(scene, prims, cfg, 5)) {
    const auto hist = class_histogram(render_perspective(prims, q.pose, cfg.intrinsics()).semantic);
    EXPECT_GT(hist[static_cast<int>(SemanticClass::kWall)], 0u);
    EXPECT_GT(hist[static_cast<int>(SemanticClass::kFloor)], 0u);
    EXPECT_GT(hist[static_cast<int>(SemanticClass::kCeiling)], 0u);
  }
}

TEST(QuerySampling, WallFacingPoseIsRejected) {
  const Scene scene = box_scene(5.0, 4.0);
  const PrimitiveSet prims = scene_to_primitives(scene);
  const Pose pose{rotation_from_ypr(0, 0, 0), {2.5, 3.8, 1.5}};
  const QueryCheck c = check_query_pose(scene, prims, pose, QueryConfig{});
  EXPECT_FALSE(c.accepted);
  EXPECT_NEAR(c.center_distance, 0.2, 1e-9);
  const Pose inward{rotation_from_ypr(kPi, 0, 0), {2.5, 3.0, 1.5}};
  EXPECT_TRUE(check_query_pose(scene, prims, inward, QueryConfig{}).accepted);
}

TEST(QuerySampling, DegenerateSceneThrows) {
  // No center ray in a 0.3 m box reaches 1 m.
  const Scene scene = box_scene(0.3, 0.3);
  const PrimitiveSet prims = scene_to_primitives(scene);
  QueryConfig cfg;
  cfg.count = 2;
  cfg.max_rejections_per_query = 20;
  EXPECT_THROW(sample_query_poses(scene, prims, cfg, 1), std::runtime_error);
}

TEST(PoseErrorTest, Examples) {
  const Pose gt{rotation_from_ypr(0.4, 0.1, -0.05), {1, 2, 1.5}};
  const PoseError zero = pose_error(gt, gt);
  EXPECT_EQ(zero.terr_xyz_cm, 0.0);
  EXPECT_NEAR(zero.rerr_3d_deg, 0.0, 1e-6);
  EXPECT_NEAR(zero.rerr_yaw_deg, 0.0, 1e-9);

  const PoseError shifted = pose_error(gt, Pose{gt.rotation, gt.translation + Eigen::Vector3d(0.3, 0.4, 0)});
  EXPECT_NEAR(shifted.terr_xyz_cm, 50.0, 1e-9);
  EXPECT_NEAR(shifted.terr_xy_cm, 50.0, 1e-9);

  const Pose flat{rotation_from_ypr(0.4, 0, 0), {0, 0, 0}};
  const PoseError turned = pose_error(flat, Pose{Eigen::Quaterniond(Eigen::AngleAxisd(-30 * kDeg, Eigen::Vector3d::UnitZ())) * flat.rotation, flat.translation});
  EXPECT_NEAR(turned.rerr_3d_deg, 30.0, 1e-9);
  EXPECT_NEAR(turned.rerr_yaw_deg, 30.0, 1e-9);

  const PoseError wrapped = pose_error(Pose{rotation_from_ypr(179 * kDeg, 0, 0), {}}, Pose{rotation_from_ypr(-179 * kDeg, 0, 0), {}});
  EXPECT_NEAR(wrapped.rerr_yaw_deg, 2.0, 1e-9);
}

TEST(Metrics, HandCountExample) {
  std::vector<PoseError> e{err(5), err(40), err(90), err(150)};
  const Metrics m = compute_metrics(e, e);
  EXPECT_EQ(m.n, 4);
  EXPECT_DOUBLE_EQ(m.recall_pct[0], 25.0);
  EXPECT_DOUBLE_EQ(m.recall_pct[1], 50.0);
  EXPECT_DOUBLE_EQ(m.recall_pct[2], 75.0);
  ASSERT_TRUE(m.median_terr_cm.has_value());
  EXPECT_DOUBLE_EQ(*m.median_terr_cm, 40.0);
  EXPECT_DOUBLE_EQ(m.topk_recall_pct, 75.0);
  EXPECT_TRUE(metrics_consistent(m));

  std::vector<PoseError> zeros(6, err(0));
  const Metrics z = compute_metrics(zeros, zeros);
  for (double r : z.recall_pct) EXPECT_DOUBLE_EQ(r, 100.0);
  EXPECT_DOUBLE_EQ(*z.median_terr_cm, 0.0);
  EXPECT_DOUBLE_EQ(*z.median_rerr_deg, 0.0);
  EXPECT_DOUBLE_EQ(z.inlier_pct, 100.0);

  const Metrics far = compute_metrics({err(200)}, {err(200)});
  EXPECT_FALSE(far.median_terr_cm.has_value());

  EXPECT_THROW(compute_metrics({}, {}), std::invalid_argument);
  EXPECT_THROW(compute_metrics(e, {err(1)}), std::invalid_argument);
}

TEST(Metrics, ModeSelectsColumns) {
  PoseError e;
  e.terr_xyz_cm = 120.0;
  e.terr_xy_cm = 80.0;
  e.rerr_3d_deg = 40.0;
  e.rerr_yaw_deg = 10.0;
  const Metrics m3 = compute_metrics({e}, {e}, MetricMode::k3D);
  const Metrics m2 = compute_metrics({e}, {e}, MetricMode::k2D);
  EXPECT_DOUBLE_EQ(m3.recall_pct[2], 0.0);
  EXPECT_DOUBLE_EQ(m2.recall_pct[2], 100.0);
  EXPECT_DOUBLE_EQ(m2.inlier_pct, 100.0);
  EXPECT_DOUBLE_EQ(*m2.median_rerr_deg, 10.0);
}

TEST(Metrics, RecountOracleAndPermutationInvariance) {
  Rng rng(51);
  std::vector<PoseError> errors, topk;
  for (int i = 0; i < 1000; ++i) {
    PoseError e;
    e.terr_xyz_cm = rng.uniform(0, 300);
    e.terr_xy_cm = e.terr_xyz_cm * rng.uniform(0.5, 1.0);
    e.rerr_3d_deg = rng.uniform(0, 60);
    e.rerr_yaw_deg = e.rerr_3d_deg * rng.uniform(0, 1);
    errors.push_back(e);
    PoseError best = e;
    best.terr_xyz_cm *= rng.uniform(0.2, 1.0);
    topk.push_back(best);
  }
  const Metrics m = compute_metrics(errors, topk);
  std::array<int, 3> rc{};
  int inliers = 0, top = 0;
  std::vector<double> below, below_r;
  for (int i = 0; i < 1000; ++i) {
    const double t = errors[i].terr_xyz_cm;
    rc[0] += t < 10;
    rc[1] += t < 50;
    rc[2] += t < 100;
    inliers += t < 100 && errors[i].rerr_3d_deg < 30;
    top += topk[i].terr_xyz_cm < 100;
    if (t < 100) {
      below.push_back(t);
      below_r.push_back(errors[i].rerr_3d_deg);
    }
  }
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(m.recall_count[k], rc[k]);
    EXPECT_DOUBLE_EQ(m.recall_pct[k], 100.0 * rc[k] / 1000);
  }
  EXPECT_EQ(m.inlier_count, inliers);
  EXPECT_EQ(m.topk_count, top);
  EXPECT_EQ(m.n_below_1m, static_cast<int>(below.size()));
  EXPECT_DOUBLE_EQ(*m.median_terr_cm, median_oracle(below));
  EXPECT_DOUBLE_EQ(*m.median_rerr_deg, median_oracle(below_r));
  EXPECT_TRUE(metrics_consistent(m));

  std::vector<int> order(1000);
  std::iota(order.begin(), order.end(), 0);
  for (int trial = 0; trial < 5; ++trial) {
    for (int i = 999; i > 0; --i) std::swap(order[i], order[rng.uniform_int(0, i)]);
    std::vector<PoseError> pe, pt;
    for (int i : order) {
      pe.push_back(errors[i]);
      pt.push_back(topk[i]);
    }
    EXPECT_EQ(compute_metrics(pe, pt), m);
  }
}

TEST(Metrics, ConsistencyCheckFlagsViolations) {
  Metrics m = compute_metrics({err(5), err(60)}, {err(5), err(60)});
  EXPECT_TRUE(metrics_consistent(m));
  m.topk_recall_pct = m.recall_pct[2] - 1.0;
  EXPECT_FALSE(metrics_consistent(m));
  m = compute_metrics({err(5), err(60)}, {err(5), err(60)});
  m.recall_pct[0] = 90.0;
  EXPECT_FALSE(metrics_consistent(m));
}

TEST(Report, RoundTripAndRowCount) {
  std::vector<PoseError> e{err(5, 1), err(40, 3), err(90, 50), err(150, 2), err(12, 4)};
  Metrics m = compute_metrics(e, e, MetricMode::k2D);
  m.config = {{"seed", 3}, {"note", "x"}};
  std::vector<QueryRecord> records(5);
  for (int i = 0; i < 5; ++i) {
    records[i].scene_id = "scene_000";
    records[i].query_index = i;
    records[i].error = e[i];
    records[i].best_of_k = e[i];
    records[i].gt.translation = {1.0 * i, 2, 1.5};
  }
  const auto dir = temp_dir("report");
  RgbImage probe(4, 2);
  write_report(m, records, dir.string(), {DebugView{"query_0000", probe}});
  std::ifstream in(dir / "metrics.json");
  const nlohmann::json j = nlohmann::json::parse(in);
  EXPECT_EQ(metrics_from_json(j), m);
  EXPECT_EQ(j.at("mode"), "2d");
  EXPECT_TRUE(j.contains("recall"));
  EXPECT_EQ(count_lines(dir / "results.csv"), 6);
  std::ifstream csv(dir / "results.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, kResultsCsvHeader);
  EXPECT_TRUE(std::filesystem::exists(dir / "debug" / "query_0000.png"));
  std::filesystem::remove_all(dir);
}

TEST(Report, OverlayCornerProbe) {
  const SemanticImage q(16, 16, 1), t(16, 16, 2), pano(64, 32, 3);
  const CircularBBox box{60, 5, 10, 8};  // wraps the seam
  const RgbImage img = debug_overlay(q, t, pano, box);
  ASSERT_EQ(img.width(), 16 + 16 + 64);
  ASSERT_EQ(img.height(), 32);
  const int x0 = 32;
  for (const auto& [u, v] : std::vector<std::pair<int, int>>{{60, 5}, {5, 5}, {60, 12}, {5, 12}, {63, 5}, {0, 12}})
    EXPECT_EQ(img(x0 + u, v), kBoxColor) << u << "," << v;
  EXPECT_NE(img(x0 + 30, 5), kBoxColor);
  EXPECT_NE(img(x0 + 62, 8), kBoxColor);
  EXPECT_NE(img(x0 + 60, 13), kBoxColor);
  EXPECT_EQ(img(0, 0), colorize(q)(0, 0));
  EXPECT_EQ(img(16, 0), colorize(t)(0, 0));
}

TEST(Suite, SmallRunIsDeterministicAndConsistent) {
  SuiteConfig cfg;
  cfg.scenes = 2;
  cfg.query.count = 3;
  cfg.seed = 17;
  const SuiteResult a = run_synthetic_suite(cfg);
  const SuiteResult b = run_synthetic_suite(cfg);
  ASSERT_EQ(a.records.size(), 6u);
  EXPECT_EQ(metrics_to_json(a.metrics).dump(), metrics_to_json(b.metrics).dump());
  EXPECT_TRUE(metrics_consistent(a.metrics));
  EXPECT_TRUE(metrics_consistent(a.initial_metrics));
  EXPECT_TRUE(a.scores_monotone);
  EXPECT_EQ(a.records[0].scene_id, "scene_000");
  EXPECT_EQ(a.records[3].scene_id, "scene_001");
  EXPECT_GT(a.references, 0u);
  for (const QueryRecord& r : a.records) {
    EXPECT_GE(r.score, r.initial_score);
    EXPECT_LE(r.best_of_k.terr_xyz_cm, r.error.terr_xyz_cm);
  }
  EXPECT_TRUE(a.metrics.config.contains("matcher"));
}
