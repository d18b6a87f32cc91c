#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "panoloc/evaluation.hpp"

namespace panoloc {

namespace fs = std::filesystem;

namespace {

std::string threshold_key(double cm) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%gcm", cm);
  return buf;
}

nlohmann::json optional_number(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

std::optional<double> optional_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

void put(std::string& line, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, ",%.17g", v);
  line += buf;
}

void put_pose(std::string& line, const Pose& p) {
  const Eigen::Quaterniond q = canonical(p.rotation);
  for (double v : {q.w(), q.x(), q.y(), q.z()}) put(line, v);
  for (int i = 0; i < 3; ++i) put(line, p.translation[i]);
}

void blit(RgbImage& dst, const RgbImage& src, int x0) {
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) dst(x0 + x, y) = src(x, y);
  }
}

}  // namespace

nlohmann::json metrics_to_json(const Metrics& m) {
  nlohmann::json recall = nlohmann::json::object();
  for (std::size_t k = 0; k < m.thresholds_cm.size(); ++k) recall[threshold_key(m.thresholds_cm[k])] = m.recall_pct[k];
  return {
      {"mode", to_string(m.mode)},
      {"thresholds_cm", m.thresholds_cm},
      {"angle_threshold_deg", m.angle_threshold_deg},
      {"n", m.n},
      {"median_terr_cm", optional_number(m.median_terr_cm)},
      {"median_rerr_deg", optional_number(m.median_rerr_deg)},
      {"recall", recall},
      {"inlier_pct", m.inlier_pct},
      {"topk_recall_pct", m.topk_recall_pct},
      {"counts",
       {{"below_1m", m.n_below_1m},
        {"recall", m.recall_count},
        {"inlier", m.inlier_count},
        {"topk", m.topk_count}}},
      {"config", m.config},
  };
}

Metrics metrics_from_json(const nlohmann::json& j) {
  Metrics m;
  m.mode = metric_mode_from_string(j.at("mode").get<std::string>());
  m.thresholds_cm = j.at("thresholds_cm").get<std::vector<double>>();
  m.angle_threshold_deg = j.at("angle_threshold_deg").get<double>();
  m.n = j.at("n").get<int>();
  m.median_terr_cm = optional_from(j.at("median_terr_cm"));
  m.median_rerr_deg = optional_from(j.at("median_rerr_deg"));
  for (double t : m.thresholds_cm) m.recall_pct.push_back(j.at("recall").at(threshold_key(t)).get<double>());
  m.inlier_pct = j.at("inlier_pct").get<double>();
  m.topk_recall_pct = j.at("topk_recall_pct").get<double>();
  const auto& counts = j.at("counts");
  m.n_below_1m = counts.at("below_1m").get<int>();
  m.recall_count = counts.at("recall").get<std::vector<int>>();
  m.inlier_count = counts.at("inlier").get<int>();
  m.topk_count = counts.at("topk").get<int>();
  m.config = j.value("config", nlohmann::json::object());
  return m;
}

RgbImage colorize(const SemanticImage& sem) {
  static constexpr std::array<std::array<std::uint8_t, 3>, kNumClasses> kPalette{{
      {0, 0, 0},        // void
      {174, 199, 232},  // wall
      {152, 223, 138},  // floor
      {255, 255, 180},  // ceiling
      {140, 86, 75},    // door
      {23, 190, 207},   // window
      {247, 182, 210},  // opening
  }};
  RgbImage out(sem.width(), sem.height());
  for (int y = 0; y < sem.height(); ++y) {
    for (int x = 0; x < sem.width(); ++x) {
      const int c = sem(x, y);
      out(x, y) = c < kNumClasses ? kPalette[c] : std::array<std::uint8_t, 3>{255, 255, 255};
    }
  }
  return out;
}

RgbImage debug_overlay(const SemanticImage& query, const SemanticImage& top1_render, const SemanticImage& panorama,
                       const CircularBBox& bbox) {
  const int h = std::max({query.height(), top1_render.height(), panorama.height()});
  const int pano_x = query.width() + top1_render.width();
  RgbImage out(pano_x + panorama.width(), h);
  blit(out, colorize(query), 0);
  blit(out, colorize(top1_render), query.width());
  blit(out, colorize(panorama), pano_x);

  const int w = panorama.width();
  if (w == 0 || bbox.width <= 0 || bbox.height <= 0) return out;
  const int v_lo = std::clamp(bbox.v_min, 0, panorama.height() - 1);
  const int v_hi = std::clamp(bbox.v_min + bbox.height - 1, 0, panorama.height() - 1);
  for (int i = 0; i < std::min(bbox.width, w); ++i) {
    const int u = ((bbox.u_min + i) % w + w) % w;
    out(pano_x + u, v_lo) = kBoxColor;
    out(pano_x + u, v_hi) = kBoxColor;
  }
  const int u_lo = ((bbox.u_min % w) + w) % w;
  const int u_hi = ((bbox.u_min + std::min(bbox.width, w) - 1) % w + w) % w;
  for (int v = v_lo; v <= v_hi; ++v) {
    out(pano_x + u_lo, v) = kBoxColor;
    out(pano_x + u_hi, v) = kBoxColor;
  }
  return out;
}

void write_report(const Metrics& metrics, const std::vector<QueryRecord>& records, const std::string& dir,
                  const std::vector<DebugView>& debug) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create report directory " + dir + ": " + ec.message());

  {
    std::ofstream out(fs::path(dir) / "metrics.json");
    out << metrics_to_json(metrics).dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write metrics.json in " + dir);
  }
  {
    std::ofstream out(fs::path(dir) / "results.csv");
    out << kResultsCsvHeader << '\n';
    for (const auto& r : records) {
      std::string line = r.scene_id + "," + std::to_string(r.query_index);
      put(line, r.hfov_deg);
      put_pose(line, r.gt);
      put_pose(line, r.est);
      put(line, r.error.terr_xyz_cm);
      put(line, r.error.terr_xy_cm);
      put(line, r.error.rerr_3d_deg);
      put(line, r.error.rerr_yaw_deg);
      put(line, r.score);
      line += terr_cm(r.error, metrics.mode) < 100.0 ? ",1" : ",0";
      line += terr_cm(r.best_of_k, metrics.mode) < 100.0 ? ",1" : ",0";
      out << line << '\n';
    }
    if (!out) throw std::runtime_error("cannot write results.csv in " + dir);
  }
  if (!debug.empty()) {
    const fs::path debug_dir = fs::path(dir) / "debug";
    fs::create_directories(debug_dir);
    for (const auto& v : debug) write_rgb_png((debug_dir / (v.name + ".png")).string(), v.image);
  }
}

}  // namespace panoloc
