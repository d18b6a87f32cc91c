#include "panoloc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "panoloc/render.hpp"
#include "panoloc/rng.hpp"

namespace panoloc {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::optional<double> median(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double pct(int count, int n) { return 100.0 * count / n; }

// Uniform position over the union of room footprints: room by area, then
// rejection inside its bounding box.
Eigen::Vector2d sample_footprint(const Scene& scene, Rng& rng, const Room*& room) {
  double total = 0.0;
  for (const auto& r : scene.rooms) total += std::abs(r.area());
  double pick = rng.uniform() * total;
  room = &scene.rooms.back();
  for (const auto& r : scene.rooms) {
    pick -= std::abs(r.area());
    if (pick < 0.0) {
      room = &r;
      break;
    }
  }
  Eigen::Vector2d lo = room->polygon.front(), hi = room->polygon.front();
  for (const auto& p : room->polygon) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const Eigen::Vector2d p(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()));
    if (polygon_contains(room->polygon, p)) return p;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

CameraIntrinsics QueryConfig::intrinsics() const { return CameraIntrinsics{hfov_deg * kDeg, image_size, image_size}; }

void QueryConfig::validate() const {
  if (count < 0) throw std::invalid_argument("query count must be non-negative");
  intrinsics().validate();
  if (!(tilt_max_deg >= 0.0 && tilt_max_deg < 90.0)) throw std::invalid_argument("tilt must lie in [0, 90)");
  if (!(min_height <= max_height)) throw std::invalid_argument("query height range is empty");
  if (max_rejections_per_query < 1) throw std::invalid_argument("rejection limit must be positive");
}

QueryCheck check_query_pose(const Scene& scene, const PrimitiveSet& prims, const Pose& pose,
                            const QueryConfig& cfg) {
  QueryCheck c;
  const CameraIntrinsics k = cfg.intrinsics();
  const RenderBundle view = render_perspective(prims, pose, k);
  c.class_count = static_cast<int>(present_classes(view.semantic, cfg.presence_threshold).size());
  const Eigen::Vector3d axis = pose.rotation * (camera_basis() * Eigen::Vector3d::UnitZ());
  const auto hit = prims.intersect(pose.translation, axis.normalized());
  c.center_distance = hit ? hit->distance : 0.0;
  c.wall_distance = distance_to_nearest_wall(scene, pose.translation.head<2>());
  c.accepted = c.class_count >= cfg.min_classes && hit && c.center_distance >= cfg.min_center_distance &&
               c.wall_distance >= cfg.min_wall_distance && point_room_lookup(scene, pose.translation);
  return c;
}

std::vector<QuerySpec> sample_query_poses(const Scene& scene, const PrimitiveSet& prims, const QueryConfig& cfg,
                                          std::uint64_t seed, const std::string& scene_id) {
  cfg.validate();
  std::vector<QuerySpec> out;
  if (cfg.count == 0) return out;
  if (scene.rooms.empty()) throw std::runtime_error("cannot sample queries in an empty scene");
  Rng rng(seed);
  const long long limit = static_cast<long long>(cfg.max_rejections_per_query) * cfg.count;
  long long rejections = 0;
  while (static_cast<int>(out.size()) < cfg.count) {
    const Room* room = nullptr;
    const Eigen::Vector2d xy = sample_footprint(scene, rng, room);
    const double z = room->floor_z + rng.uniform(cfg.min_height, cfg.max_height);
    const double yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const double pitch = rng.uniform(-cfg.tilt_max_deg, cfg.tilt_max_deg) * kDeg;
    const double roll = rng.uniform(-cfg.tilt_max_deg, cfg.tilt_max_deg) * kDeg;
    Pose pose{rotation_from_ypr(yaw, pitch, roll), Eigen::Vector3d(xy.x(), xy.y(), z)};
    const QueryCheck c = check_query_pose(scene, prims, pose, cfg);
    if (!c.accepted) {
      if (++rejections > limit) {
        throw std::runtime_error("scene too degenerate: query rejection limit reached");
      }
      continue;
    }
    QuerySpec q;
    q.pose = pose;
    q.hfov = cfg.hfov_deg * kDeg;
    q.scene_id = scene_id;
    q.seed = seed;
    q.index = static_cast<int>(out.size());
    q.class_count = c.class_count;
    q.center_distance = c.center_distance;
    q.wall_distance = c.wall_distance;
    out.push_back(std::move(q));
  }
  return out;
}

PoseError pose_error(const Pose& gt, const Pose& est) {
  PoseError e;
  const Eigen::Vector3d d = gt.translation - est.translation;
  e.terr_xyz_cm = d.norm() * 100.0;
  e.terr_xy_cm = d.head<2>().norm() * 100.0;
  e.rerr_3d_deg = rotation_angle_deg(gt.rotation, est.rotation);
  e.rerr_yaw_deg = std::abs(std::remainder(yaw_of(gt.rotation) - yaw_of(est.rotation), 2.0 * std::numbers::pi)) / kDeg;
  return e;
}

std::string to_string(MetricMode mode) { return mode == MetricMode::k2D ? "2d" : "3d"; }

MetricMode metric_mode_from_string(const std::string& s) {
  if (s == "2d") return MetricMode::k2D;
  if (s == "3d") return MetricMode::k3D;
  throw std::invalid_argument("unknown metric mode: " + s);
}

double terr_cm(const PoseError& e, MetricMode mode) { return mode == MetricMode::k2D ? e.terr_xy_cm : e.terr_xyz_cm; }
double rerr_deg(const PoseError& e, MetricMode mode) { return mode == MetricMode::k2D ? e.rerr_yaw_deg : e.rerr_3d_deg; }

Metrics compute_metrics(const std::vector<PoseError>& errors, const std::vector<PoseError>& topk_errors,
                        MetricMode mode, const std::vector<double>& thresholds_cm, double angle_threshold_deg) {
  if (errors.empty()) throw std::invalid_argument("compute_metrics: no errors");
  if (topk_errors.size() != errors.size()) throw std::invalid_argument("compute_metrics: top-k list misaligned");
  Metrics m;
  m.mode = mode;
  m.thresholds_cm = thresholds_cm;
  m.angle_threshold_deg = angle_threshold_deg;
  m.n = static_cast<int>(errors.size());
  m.recall_count.assign(thresholds_cm.size(), 0);
  std::vector<double> terrs, rerrs;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    const double t = terr_cm(errors[i], mode);
    const double r = rerr_deg(errors[i], mode);
    for (std::size_t k = 0; k < thresholds_cm.size(); ++k) {
      if (t < thresholds_cm[k]) ++m.recall_count[k];
    }
    if (t < 100.0) {
      terrs.push_back(t);
      rerrs.push_back(r);
      if (r < angle_threshold_deg) ++m.inlier_count;
    }
    if (terr_cm(topk_errors[i], mode) < 100.0) ++m.topk_count;
  }
  m.n_below_1m = static_cast<int>(terrs.size());
  m.median_terr_cm = median(terrs);
  m.median_rerr_deg = median(rerrs);
  for (int c : m.recall_count) m.recall_pct.push_back(pct(c, m.n));
  m.inlier_pct = pct(m.inlier_count, m.n);
  m.topk_recall_pct = pct(m.topk_count, m.n);
  return m;
}

bool metrics_consistent(const Metrics& m) {
  for (std::size_t k = 1; k < m.recall_count.size(); ++k) {
    if (m.thresholds_cm[k - 1] <= m.thresholds_cm[k] && m.recall_count[k - 1] > m.recall_count[k]) return false;
  }
  for (std::size_t k = 0; k < m.thresholds_cm.size(); ++k) {
    if (m.thresholds_cm[k] == 100.0) {
      if (m.inlier_count > m.recall_count[k] || m.topk_count < m.recall_count[k]) return false;
    }
  }
  for (std::size_t k = 1; k < m.recall_pct.size(); ++k) {
    if (m.thresholds_cm[k - 1] <= m.thresholds_cm[k] && m.recall_pct[k - 1] > m.recall_pct[k]) return false;
  }
  for (std::size_t k = 0; k < m.thresholds_cm.size() && k < m.recall_pct.size(); ++k) {
    if (m.thresholds_cm[k] == 100.0 && (m.inlier_pct > m.recall_pct[k] || m.topk_recall_pct < m.recall_pct[k])) {
      return false;
    }
  }
  return m.inlier_count <= m.n_below_1m;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  // splitmix64 over the three words
  std::uint64_t z = base;
  for (std::uint64_t w : {a, b}) {
    z += 0x9e3779b97f4a7c15ULL + w;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
  }
  return z;
}

nlohmann::json SuiteConfig::to_json() const {
  return {
      {"scenes", scenes},
      {"seed", seed},
      {"scene_params",
       {{"min_rooms", scene_params.min_rooms},
        {"max_rooms", scene_params.max_rooms},
        {"min_room_size", scene_params.min_room_size},
        {"max_room_size", scene_params.max_room_size}}},
      {"query",
       {{"count", query.count},
        {"hfov_deg", query.hfov_deg},
        {"tilt_max_deg", query.tilt_max_deg},
        {"height_range", {query.min_height, query.max_height}},
        {"image_size", query.image_size},
        {"presence_threshold", query.presence_threshold},
        {"min_classes", query.min_classes},
        {"min_center_distance", query.min_center_distance},
        {"min_wall_distance", query.min_wall_distance}}},
      {"grid", {{"spacing", grid.spacing}, {"mode", panoloc::to_string(grid.mode)}, {"h_pano", grid.h_pano}}},
      {"matcher",
       {{"yaw_step_deg", localize.matcher.yaw_step_deg},
        {"pitch_deg", localize.matcher.pitch_deg},
        {"roll_deg", localize.matcher.roll_deg},
        {"polish_count", localize.matcher.polish_count}}},
      {"refine", {{"max_evaluations", localize.refine.max_evaluations}, {"render_size", localize.refine.render_size}}},
      {"top_n", localize.top_n},
      {"refine_rounds", localize.refine_rounds},
      {"pano", {pano_width, pano_height}},
      {"mode", panoloc::to_string(mode)},
  };
}

SuiteResult run_synthetic_suite(const SuiteConfig& cfg, ReferenceCache* cache,
                                const std::function<void(const std::string&)>& log) {
  if (cfg.scenes < 1) throw std::invalid_argument("suite needs at least one scene");
  cfg.query.validate();
  const CameraIntrinsics k = cfg.query.intrinsics();
  SuiteResult result;
  std::vector<PoseError> errors, initial_errors, topk, initial_topk;

  for (int s = 0; s < cfg.scenes; ++s) {
    char id[32];
    std::snprintf(id, sizeof id, "scene_%03d", s);
    auto scene = std::make_shared<const Scene>(generate_synthetic_scene(derive_seed(cfg.seed, s, 0), cfg.scene_params));
    auto prims = std::make_shared<const PrimitiveSet>(scene_to_primitives(*scene));
    const auto positions = sample_reference_positions(*scene, cfg.grid);
    const ReferenceSet refs = build_reference_set(scene, prims, positions, cfg.pano_width, cfg.pano_height,
                                                  cfg.localize.matcher, cfg.grid, cache);
    result.references += refs.size();
    const auto queries = sample_query_poses(*scene, *prims, cfg.query, derive_seed(cfg.seed, s, 1), id);

    std::vector<QueryRecord> records(queries.size());
    std::vector<std::string> failures(queries.size());
    std::vector<DebugView> views(queries.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < queries.size(); ++i) {
      try {
        const QuerySpec& q = queries[i];
        const RenderBundle view = render_perspective(*prims, q.pose, k);
        const LocalizationResult loc = localize(refs, view.semantic, k, cfg.localize);
        QueryRecord& r = records[i];
        r.scene_id = id;
        r.query_index = q.index;
        r.hfov_deg = cfg.query.hfov_deg;
        r.gt = q.pose;
        r.est = loc.selected;
        r.initial_est = loc.initial_selected;
        r.error = pose_error(q.pose, loc.selected);
        r.initial_error = pose_error(q.pose, loc.initial_selected);
        r.score = loc.selected_score;
        r.initial_score = loc.initial_score;
        r.candidates = static_cast<int>(loc.candidates.size());
        r.scores_monotone = loc.selected_score >= loc.initial_score;
        r.best_of_k = r.error;
        r.initial_best_of_k = r.initial_error;
        for (std::size_t c = 0; c < loc.candidates.size(); ++c) {
          const Candidate& cand = loc.candidates[c];
          if (cand.score < cand.initial_score) r.scores_monotone = false;
          const PoseError e = pose_error(q.pose, cand.pose);
          if (terr_cm(e, cfg.mode) < terr_cm(r.best_of_k, cfg.mode)) r.best_of_k = e;
          if (c > 0 && terr_cm(e, cfg.mode) < terr_cm(r.initial_best_of_k, cfg.mode)) r.initial_best_of_k = e;
        }
        if (s == 0 && static_cast<int>(i) < cfg.debug_views) {
          const Candidate& top = loc.candidates.front();
          const RenderBundle top_view = render_perspective(*prims, top.pose, k);
          views[i].name = std::string(id) + "_q" + std::to_string(q.index);
          views[i].image = debug_overlay(view.semantic, top_view.semantic,
                                         refs.references[top.reference_index]->bundle.semantic, top.match.bbox);
        }
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
    for (const auto& f : failures) {
      if (!f.empty()) throw std::runtime_error(std::string(id) + ": " + f);
    }
    for (auto& v : views) {
      if (!v.name.empty()) result.debug.push_back(std::move(v));
    }
    for (auto& r : records) {
      errors.push_back(r.error);
      initial_errors.push_back(r.initial_error);
      topk.push_back(r.best_of_k);
      initial_topk.push_back(r.initial_best_of_k);
      result.scores_monotone = result.scores_monotone && r.scores_monotone;
      result.records.push_back(std::move(r));
    }
    if (log) {
      log(std::string(id) + ": " + std::to_string(scene->rooms.size()) + " rooms, " + std::to_string(refs.size()) +
          " references, " + std::to_string(queries.size()) + " queries");
    }
  }

  result.metrics = compute_metrics(errors, topk, cfg.mode);
  result.metrics.config = cfg.to_json();
  result.initial_metrics = compute_metrics(initial_errors, initial_topk, cfg.mode);
  result.initial_metrics.config = cfg.to_json();
  return result;
}

}  // namespace panoloc
