#include "panoloc/matcher.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace panoloc {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
// Grids are single precision; scores closer than this count as ties and
// keep the earlier hypothesis.
constexpr double kScoreTieTol = 1e-6;

// Pixel spans covered by each output cell along one axis, with overlap
// weights in pixel units.
std::vector<std::vector<std::pair<int, double>>> box_weights(int pixels, int cells) {
  std::vector<std::vector<std::pair<int, double>>> out(cells);
  const double scale = static_cast<double>(pixels) / cells;
  for (int c = 0; c < cells; ++c) {
    const double lo = c * scale;
    const double hi = (c + 1) * scale;
    for (int p = static_cast<int>(std::floor(lo)); p < static_cast<int>(std::ceil(hi)) && p < pixels; ++p) {
      const double w = std::min(hi, p + 1.0) - std::max(lo, static_cast<double>(p));
      if (w > 0.0) out[c].emplace_back(p, w);
    }
  }
  return out;
}

struct Tap {
  std::array<int, 4> cell;
  std::array<float, 4> weight;
};

using WarpTable = std::vector<Tap>;

WarpTable build_table(const Eigen::Quaterniond& rotation, double hfov, int n, int grid_w, int grid_h) {
  const CameraIntrinsics k{hfov, n, n};
  const Eigen::Matrix3d to_world = rotation.toRotationMatrix() * camera_basis();
  WarpTable table(static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector3d d = to_world * persp_pixel_to_ray(k, i + 0.5, j + 0.5);
      const Eigen::Vector2d uv = dir_to_equirect_pixel(d, grid_w, grid_h);
      const double x = uv.x() - 0.5;
      const double y = uv.y() - 0.5;
      const double xf = std::floor(x);
      const double yf = std::floor(y);
      const double fx = x - xf;
      const double fy = y - yf;
      const int x0 = ((static_cast<int>(xf) % grid_w) + grid_w) % grid_w;
      const int x1 = (x0 + 1) % grid_w;
      const int y0 = std::clamp(static_cast<int>(yf), 0, grid_h - 1);
      const int y1 = std::clamp(static_cast<int>(yf) + 1, 0, grid_h - 1);
      Tap& t = table[static_cast<std::size_t>(j) * n + i];
      t.cell = {y0 * grid_w + x0, y0 * grid_w + x1, y1 * grid_w + x0, y1 * grid_w + x1};
      t.weight = {static_cast<float>((1 - fx) * (1 - fy)), static_cast<float>(fx * (1 - fy)),
                  static_cast<float>((1 - fx) * fy), static_cast<float>(fx * fy)};
    }
  }
  return table;
}

inline float sample(const ClassGrid& g, const Tap& t, int channel) {
  return t.weight[0] * g.cell(t.cell[0])[channel] + t.weight[1] * g.cell(t.cell[1])[channel] +
         t.weight[2] * g.cell(t.cell[2])[channel] + t.weight[3] * g.cell(t.cell[3])[channel];
}

double score_table(const WarpTable& table, const PanoEncoding& enc, const QueryEncoding& q) {
  if (q.present.empty()) return 0.0;
  double total = 0.0;
  for (int cls : q.present) {
    const int ch = cls - 1;
    double inter = 0.0, uni = 0.0;
    for (std::size_t s = 0; s < table.size(); ++s) {
      const float a = sample(enc.grid, table[s], ch);
      const float b = q.grid.cell(s)[ch];
      inter += std::min(a, b);
      uni += std::max(a, b);
    }
    total += uni > 0.0 ? inter / uni : 1.0;
  }
  return total / static_cast<double>(q.present.size());
}

CameraIntrinsics view_intrinsics(double hfov, int n) { return CameraIntrinsics{hfov, n, n}; }

}  // namespace

ClassGrid box_downsample(const SemanticImage& sem, int grid_width, int grid_height) {
  if (grid_width <= 0 || grid_height <= 0) throw std::invalid_argument("grid size must be positive");
  ClassGrid g(grid_width, grid_height);
  const auto wx = box_weights(sem.width(), grid_width);
  const auto wy = box_weights(sem.height(), grid_height);
  const double cell_area = (static_cast<double>(sem.width()) / grid_width) *
                           (static_cast<double>(sem.height()) / grid_height);
  for (int gy = 0; gy < grid_height; ++gy) {
    for (int gx = 0; gx < grid_width; ++gx) {
      std::array<double, kNumClasses> acc{};
      for (const auto& [py, fy] : wy[gy]) {
        for (const auto& [px, fx] : wx[gx]) acc[sem(px, py)] += fx * fy;
      }
      for (int c = 1; c < kNumClasses; ++c) g.at(c, gx, gy) = static_cast<float>(acc[c] / cell_area);
    }
  }
  return g;
}

PanoEncoding encode_panorama(const SemanticImage& sem, const Eigen::Vector3d& position,
                             const MatcherConfig& cfg) {
  if (sem.width() != 2 * sem.height() || sem.height() == 0) {
    throw std::invalid_argument("panorama must have a 2:1 aspect ratio");
  }
  if (cfg.pano_grid_width != 2 * cfg.pano_grid_height) {
    throw std::invalid_argument("panorama encoding grid must have a 2:1 aspect ratio");
  }
  PanoEncoding enc;
  enc.grid = box_downsample(sem, cfg.pano_grid_width, cfg.pano_grid_height);
  enc.position = position;
  enc.pano_width = sem.width();
  enc.pano_height = sem.height();
  return enc;
}

std::vector<int> present_classes(const SemanticImage& sem, double threshold) {
  const auto hist = class_histogram(sem);
  std::vector<int> out;
  const double total = static_cast<double>(sem.size());
  for (int c = 1; c < kNumClasses; ++c) {
    if (total > 0 && hist[c] / total >= threshold) out.push_back(c);
  }
  return out;
}

QueryEncoding encode_query(const SemanticImage& sem, double hfov, const MatcherConfig& cfg) {
  QueryEncoding q;
  q.grid = box_downsample(sem, cfg.query_grid, cfg.query_grid);
  q.hfov = hfov;
  q.present = present_classes(sem, cfg.presence_threshold);
  return q;
}

std::vector<Eigen::Quaterniond> enumerate_hypotheses(const MatcherConfig& cfg) {
  const double steps = 360.0 / cfg.yaw_step_deg;
  if (!(cfg.yaw_step_deg > 0.0) || std::abs(steps - std::round(steps)) > 1e-9) {
    throw std::invalid_argument("yaw step must be positive and divide 360 evenly");
  }
  if (cfg.pitch_deg.empty() || cfg.roll_deg.empty()) {
    throw std::invalid_argument("pitch and roll sets must be non-empty");
  }
  for (double p : cfg.pitch_deg) {
    if (!(p > -90.0 && p < 90.0)) throw std::invalid_argument("pitch must lie in (-90, 90)");
  }
  const int n_yaw = static_cast<int>(std::round(steps));
  std::vector<Eigen::Quaterniond> out;
  out.reserve(static_cast<std::size_t>(n_yaw) * cfg.pitch_deg.size() * cfg.roll_deg.size());
  for (int i = 0; i < n_yaw; ++i) {
    for (double pitch : cfg.pitch_deg) {
      for (double roll : cfg.roll_deg) {
        out.push_back(rotation_from_ypr(i * cfg.yaw_step_deg * kDeg, pitch * kDeg, roll * kDeg));
      }
    }
  }
  return out;
}

ClassGrid warp_pano_to_view(const PanoEncoding& enc, const Eigen::Quaterniond& rotation, double hfov,
                            int n) {
  const WarpTable table = build_table(rotation, hfov, n, enc.grid.width(), enc.grid.height());
  ClassGrid out(n, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const Tap& t = table[static_cast<std::size_t>(j) * n + i];
      for (int c = 1; c < kNumClasses; ++c) out.at(c, i, j) = sample(enc.grid, t, c - 1);
    }
  }
  return out;
}

double agreement(const ClassGrid& a, const ClassGrid& b, const std::vector<int>& present) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw std::invalid_argument("agreement: grid shapes differ");
  }
  if (present.empty()) return 0.0;
  double total = 0.0;
  const std::size_t cells = static_cast<std::size_t>(a.width()) * a.height();
  for (int cls : present) {
    double inter = 0.0, uni = 0.0;
    for (std::size_t s = 0; s < cells; ++s) {
      const float x = a.cell(s)[cls - 1];
      const float y = b.cell(s)[cls - 1];
      inter += std::min(x, y);
      uni += std::max(x, y);
    }
    total += uni > 0.0 ? inter / uni : 1.0;
  }
  return total / static_cast<double>(present.size());
}

std::vector<MatchResult> match_all(const std::vector<const PanoEncoding*>& encodings,
                                   const QueryEncoding& q, const MatcherConfig& cfg) {
  std::vector<MatchResult> results(encodings.size());
  if (encodings.empty()) return results;
  const auto hypotheses = enumerate_hypotheses(cfg);
  const int gw = encodings.front()->grid.width();
  const int gh = encodings.front()->grid.height();
  const int n = q.grid.width();
  std::vector<WarpTable> tables;
  tables.reserve(hypotheses.size());
  for (const auto& r : hypotheses) tables.push_back(build_table(r, q.hfov, n, gw, gh));

  for (const PanoEncoding* enc : encodings) {
    if (enc->grid.width() != gw || enc->grid.height() != gh) {
      throw std::invalid_argument("match_all: encodings must share one grid size");
    }
  }

  // Each reference writes only its own slot, so the result does not depend
  // on the schedule.
#pragma omp parallel for schedule(dynamic)
  for (std::size_t e = 0; e < encodings.size(); ++e) {
    const PanoEncoding& enc = *encodings[e];
    double best = -1.0;
    int best_h = 0;
    for (std::size_t h = 0; h < tables.size(); ++h) {
      const double s = score_table(tables[h], enc, q);
      if (s > best + kScoreTieTol) {
        best = s;
        best_h = static_cast<int>(h);
      }
    }
    MatchResult& r = results[e];
    r.score = best;
    r.hypothesis_index = best_h;
    r.rotation = hypotheses[best_h];
    r.reference_index = static_cast<int>(e);
    r.bbox = frustum_bbox(r.rotation, view_intrinsics(q.hfov, n), enc.pano_width, enc.pano_height);
  }
  return results;
}

MatchResult match_viewport(const PanoEncoding& enc, const QueryEncoding& q, const MatcherConfig& cfg,
                           int reference_index) {
  MatchResult r = match_all({&enc}, q, cfg).front();
  r.reference_index = reference_index;
  return r;
}

MatchResult polish_match(const PanoEncoding& enc, const QueryEncoding& q, const MatchResult& match,
                         const MatcherConfig& cfg) {
  MatchResult r = match;
  if (!(cfg.polish_step_deg > 0.0) || !(cfg.polish_min_step_deg > 0.0)) return r;
  const int n = q.grid.width();
  const int gw = enc.grid.width();
  const int gh = enc.grid.height();
  for (double step = cfg.polish_step_deg; step >= cfg.polish_min_step_deg;) {
    const Eigen::Quaterniond base = r.rotation;
    bool improved = false;
    for (int axis = 0; axis < 3; ++axis) {
      for (double sign : {1.0, -1.0}) {
        std::array<double, 3> d{};
        d[axis] = sign * step * kDeg;
        const Eigen::Quaterniond cand = canonical(base * rotation_from_ypr(d[0], d[1], d[2]));
        const double s = score_table(build_table(cand, q.hfov, n, gw, gh), enc, q);
        if (s > r.score + kScoreTieTol) {
          r.score = s;
          r.rotation = cand;
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  r.bbox = frustum_bbox(r.rotation, view_intrinsics(q.hfov, n), enc.pano_width, enc.pano_height);
  return r;
}

std::vector<MatchResult> polish_matches(const std::vector<const PanoEncoding*>& encodings, const QueryEncoding& q,
                                        const std::vector<MatchResult>& results, const MatcherConfig& cfg) {
  if (encodings.size() != results.size()) throw std::invalid_argument("polish_matches: size mismatch");
  std::vector<MatchResult> out = results;
  const std::vector<int> order = rank_references(results);
  const int count = std::min<int>(cfg.polish_count, static_cast<int>(order.size()));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < count; ++i) {
    const int e = order[i];
    out[e] = polish_match(*encodings[e], q, results[e], cfg);
  }
  return out;
}

std::vector<int> rank_references(const std::vector<MatchResult>& results) {
  std::vector<int> order(results.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (results[a].score != results[b].score) return results[a].score > results[b].score;
    return results[a].reference_index < results[b].reference_index;
  });
  return order;
}

}  // namespace panoloc
