#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "panoloc/camera.hpp"
#include "panoloc/image.hpp"
#include "panoloc/pipeline.hpp"
#include "panoloc/primitives.hpp"
#include "panoloc/scene.hpp"
#include "panoloc/viewport.hpp"

namespace panoloc {

struct QueryConfig {
  int count = 50;
  double hfov_deg = 90.0;
  double tilt_max_deg = 10.0;  // pitch and roll drawn from +-tilt_max
  double min_height = 1.2;     // above the room floor
  double max_height = 1.8;
  int image_size = 128;
  double presence_threshold = 0.01;
  int min_classes = 3;
  double min_center_distance = 1.0;
  double min_wall_distance = 0.1;
  int max_rejections_per_query = 1000;

  CameraIntrinsics intrinsics() const;
  void validate() const;
};

struct QuerySpec {
  Pose pose;
  double hfov = 0.0;  // radians
  std::string scene_id;
  std::uint64_t seed = 0;
  int index = 0;
  int class_count = 0;
  double center_distance = 0.0;
  double wall_distance = 0.0;
};

struct QueryCheck {
  int class_count = 0;
  double center_distance = 0.0;  // 0 when the center ray misses
  double wall_distance = 0.0;
  bool accepted = false;
};

// Renders the query and evaluates the acceptance rules.
QueryCheck check_query_pose(const Scene& scene, const PrimitiveSet& prims, const Pose& pose,
                            const QueryConfig& cfg);

// Rejection sampling, deterministic in seed. Throws std::runtime_error when
// the rejections exceed max_rejections_per_query * count.
std::vector<QuerySpec> sample_query_poses(const Scene& scene, const PrimitiveSet& prims, const QueryConfig& cfg,
                                          std::uint64_t seed, const std::string& scene_id = {});

struct PoseError {
  double terr_xyz_cm = 0.0;
  double terr_xy_cm = 0.0;
  double rerr_3d_deg = 0.0;
  double rerr_yaw_deg = 0.0;
};

PoseError pose_error(const Pose& gt, const Pose& est);

// 2D: terr_xy and rerr_yaw. 3D: terr_xyz and rerr_3d.
enum class MetricMode { k2D, k3D };

std::string to_string(MetricMode mode);
MetricMode metric_mode_from_string(const std::string& s);

struct Metrics {
  MetricMode mode = MetricMode::k3D;
  std::vector<double> thresholds_cm{10.0, 50.0, 100.0};
  double angle_threshold_deg = 30.0;
  int n = 0;
  int n_below_1m = 0;
  // Over entries with terr below 1 m; empty when there are none.
  std::optional<double> median_terr_cm;
  std::optional<double> median_rerr_deg;
  std::vector<double> recall_pct;  // aligned with thresholds_cm
  std::vector<int> recall_count;
  double inlier_pct = 0.0;  // terr < 1 m and rerr < angle threshold
  int inlier_count = 0;
  double topk_recall_pct = 0.0;  // best-of-k terr < 1 m
  int topk_count = 0;
  nlohmann::json config = nlohmann::json::object();

  bool operator==(const Metrics&) const = default;
};

// Throws std::invalid_argument on empty input or misaligned lists.
Metrics compute_metrics(const std::vector<PoseError>& errors, const std::vector<PoseError>& topk_errors,
                        MetricMode mode = MetricMode::k3D,
                        const std::vector<double>& thresholds_cm = {10.0, 50.0, 100.0},
                        double angle_threshold_deg = 30.0);

// Recall ordering, inlier <= recall at 1 m, top-k >= top-1.
bool metrics_consistent(const Metrics& m);

// Translation and rotation error of `e` under the metric mode.
double terr_cm(const PoseError& e, MetricMode mode);
double rerr_deg(const PoseError& e, MetricMode mode);

struct QueryRecord {
  std::string scene_id;
  int query_index = 0;
  double hfov_deg = 0.0;
  Pose gt;
  Pose est;
  Pose initial_est;  // before the refinement rounds
  PoseError error;
  PoseError initial_error;
  PoseError best_of_k;
  PoseError initial_best_of_k;
  double score = 0.0;
  double initial_score = 0.0;
  bool scores_monotone = true;  // no candidate lost objective score
  int candidates = 0;
};

nlohmann::json metrics_to_json(const Metrics& m);
Metrics metrics_from_json(const nlohmann::json& j);

inline constexpr const char* kResultsCsvHeader =
    "scene,query,hfov_deg,gt_qw,gt_qx,gt_qy,gt_qz,gt_tx,gt_ty,gt_tz,"
    "est_qw,est_qx,est_qy,est_qz,est_tx,est_ty,est_tz,"
    "terr_xyz_cm,terr_xy_cm,rerr_3d_deg,rerr_yaw_deg,score,top1_1m,topk_1m";

// Class palette used by debug images.
RgbImage colorize(const SemanticImage& sem);

// Query | top-1 render | panorama, left to right and top aligned, with the
// circular box outlined on the panorama.
RgbImage debug_overlay(const SemanticImage& query, const SemanticImage& top1_render,
                       const SemanticImage& panorama, const CircularBBox& bbox);
inline constexpr std::array<std::uint8_t, 3> kBoxColor{255, 0, 0};

struct DebugView {
  std::string name;
  RgbImage image;
};

// Writes metrics.json and results.csv into `dir` (created if missing), plus
// one PNG per debug view. Throws std::runtime_error on I/O failure.
void write_report(const Metrics& metrics, const std::vector<QueryRecord>& records, const std::string& dir,
                  const std::vector<DebugView>& debug = {});

struct SuiteConfig {
  int scenes = 20;
  std::uint64_t seed = 1;
  SyntheticSceneParams scene_params;
  QueryConfig query;
  GridConfig grid;
  LocalizeConfig localize;
  int pano_width = kDefaultPanoWidth;
  int pano_height = kDefaultPanoHeight;
  MetricMode mode = MetricMode::k3D;
  int debug_views = 0;  // overlays for the first queries of the first scene

  nlohmann::json to_json() const;
};

struct SuiteResult {
  Metrics metrics;
  Metrics initial_metrics;  // same run, selection before the refinement rounds
  std::vector<QueryRecord> records;
  std::vector<DebugView> debug;
  std::size_t references = 0;
  bool scores_monotone = true;
};

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

// Generated apartments, sampled queries, localization and metrics.
// Results do not depend on the thread count.
SuiteResult run_synthetic_suite(const SuiteConfig& cfg, ReferenceCache* cache = nullptr,
                                const std::function<void(const std::string&)>& log = {});

}  // namespace panoloc
