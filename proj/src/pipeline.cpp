#include "panoloc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace panoloc {

namespace fs = std::filesystem;

namespace {

constexpr double kDedupDistance = 0.01;
constexpr double kDoorInset = 0.10;

struct Box2 {
  Eigen::Vector2d min;
  Eigen::Vector2d max;
};

Box2 polygon_box(const std::vector<Eigen::Vector2d>& poly) {
  Box2 b{poly.front(), poly.front()};
  for (const auto& p : poly) {
    b.min = b.min.cwiseMin(p);
    b.max = b.max.cwiseMax(p);
  }
  return b;
}

// Number of lattice points s/2 + k*s that fit in [0, extent].
int lattice_count(double extent, double s) {
  return std::max(1, static_cast<int>(std::floor((extent - 0.5 * s) / s + 1e-9)) + 1);
}

// Lowest-id room whose footprint holds p, as the camera height is relative
// to that room's floor.
const Room* footprint_room(const Scene& scene, const Eigen::Vector2d& p) {
  const Room* best = nullptr;
  for (const auto& r : scene.rooms) {
    if (polygon_contains(r.polygon, p) && (!best || r.id < best->id)) best = &r;
  }
  return best;
}

void push_unique(std::vector<Eigen::Vector3d>& out, const Eigen::Vector3d& p) {
  for (const auto& q : out) {
    if ((q - p).norm() < kDedupDistance) return;
  }
  out.push_back(p);
}

std::vector<const Room*> rooms_by_id(const Scene& scene) {
  std::vector<const Room*> rooms;
  for (const auto& r : scene.rooms) rooms.push_back(&r);
  std::sort(rooms.begin(), rooms.end(), [](const Room* a, const Room* b) { return a->id < b->id; });
  return rooms;
}

std::vector<Eigen::Vector3d> grid_points(const Scene& scene, const GridConfig& grid, bool with_items) {
  if (!(grid.spacing > 0.0)) throw std::invalid_argument("grid spacing must be positive");
  std::vector<Eigen::Vector3d> out;
  if (scene.rooms.empty()) return out;
  const double s = grid.spacing;
  const auto rooms = rooms_by_id(scene);

  auto accept = [&](const Eigen::Vector2d& xy, int want_room, std::vector<Eigen::Vector3d>& dst) {
    const Room* r = footprint_room(scene, xy);
    if (!r || (want_room >= 0 && r->id != want_room)) return;
    const Eigen::Vector3d p(xy.x(), xy.y(), r->floor_z + grid.h_pano);
    if (point_room_lookup(scene, p)) dst.push_back(p);
  };

  if (grid.mode == GridMode::kGlobal) {
    const SceneBounds b = scene_bounds(scene);
    const int nx = lattice_count(b.max.x() - b.min.x(), s);
    const int ny = lattice_count(b.max.y() - b.min.y(), s);
    // Group by containing room, row-major inside each group.
    for (const Room* room : rooms) {
      std::vector<Eigen::Vector3d> pts;
      for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
          accept({b.min.x() + 0.5 * s + i * s, b.min.y() + 0.5 * s + j * s}, room->id, pts);
        }
      }
      for (const auto& p : pts) push_unique(out, p);
    }
  } else {
    for (const Room* room : rooms) {
      const Box2 b = polygon_box(room->polygon);
      const Eigen::Vector2d extent = b.max - b.min;
      const int nx = lattice_count(extent.x(), s);
      const int ny = lattice_count(extent.y(), s);
      const double x0 = b.min.x() + 0.5 * (extent.x() - (nx - 1) * s);
      const double y0 = b.min.y() + 0.5 * (extent.y() - (ny - 1) * s);
      std::vector<Eigen::Vector3d> pts;
      for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
          const Eigen::Vector2d xy(x0 + i * s, y0 + j * s);
          if (!polygon_contains(room->polygon, xy)) continue;
          const Eigen::Vector3d p(xy.x(), xy.y(), room->floor_z + grid.h_pano);
          if (point_room_lookup(scene, p)) pts.push_back(p);
        }
      }
      if (with_items) {
        for (const auto& item : scene.wall_items) {
          if (item.room != room->id) continue;
          if (item.cls != SemanticClass::kDoor && item.cls != SemanticClass::kOpening) continue;
          if (item.edge < 0 || item.edge >= static_cast<int>(room->polygon.size())) continue;
          const Eigen::Vector2d a = room->edge_start(item.edge);
          const Eigen::Vector2d d = (room->edge_end(item.edge) - a).normalized();
          const Eigen::Vector2d inward(-d.y(), d.x());
          const Eigen::Vector2d xy = a + (item.offset + 0.5 * item.width) * d + kDoorInset * inward;
          const Eigen::Vector3d p(xy.x(), xy.y(), room->floor_z + grid.h_pano);
          if (point_room_lookup(scene, p)) pts.push_back(p);
        }
      }
      for (const auto& p : pts) push_unique(out, p);
    }
  }
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t position_key(std::uint64_t scene_key, const Eigen::Vector3d& p, int w, int h) {
  std::uint64_t k = fnv1a64(p.data(), 3 * sizeof(double), scene_key);
  k = fnv1a64(&w, sizeof w, k);
  return fnv1a64(&h, sizeof h, k);
}

}  // namespace

std::string to_string(GridMode mode) { return mode == GridMode::kGlobal ? "global" : "local"; }

GridMode grid_mode_from_string(const std::string& s) {
  if (s == "global") return GridMode::kGlobal;
  if (s == "local") return GridMode::kLocal;
  throw std::invalid_argument("unknown grid mode: " + s);
}

std::vector<Eigen::Vector3d> sample_reference_positions(const Scene& scene, const GridConfig& grid) {
  return grid_points(scene, grid, true);
}

std::vector<Eigen::Vector3d> sample_grid_positions(const Scene& scene, const GridConfig& grid) {
  return grid_points(scene, grid, false);
}

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t scene_hash(const Scene& scene) {
  const std::string bytes = serialize_scene(scene);
  return fnv1a64(bytes.data(), bytes.size());
}

void ReferenceCache::clear_memory() {
  std::lock_guard lock(mutex_);
  entries_.clear();
}

struct ReferenceSetBuilder {
  static std::shared_ptr<const Reference> find(ReferenceCache& c, std::uint64_t key) {
    std::lock_guard lock(c.mutex_);
    auto it = c.entries_.find(key);
    if (it == c.entries_.end()) return nullptr;
    ++c.memory_hits_;
    return it->second;
  }
  static void store(ReferenceCache& c, std::uint64_t key, std::shared_ptr<const Reference> ref) {
    std::lock_guard lock(c.mutex_);
    c.entries_.emplace(key, std::move(ref));
  }
  static void count_render(ReferenceCache& c) { ++c.renders_; }
  static void count_disk_hit(ReferenceCache& c) { ++c.disk_hits_; }
};

ReferenceSet build_reference_set(std::shared_ptr<const Scene> scene, std::shared_ptr<const PrimitiveSet> prims,
                                 const std::vector<Eigen::Vector3d>& positions, int pano_width,
                                 int pano_height, const MatcherConfig& matcher, const GridConfig& grid,
                                 ReferenceCache* cache) {
  if (!scene || !prims) throw std::invalid_argument("reference set needs a scene and its primitives");
  if (pano_width != 2 * pano_height || pano_height <= 0) {
    throw std::invalid_argument("panorama must have a 2:1 aspect ratio");
  }
  for (const auto& p : positions) {
    if (!point_room_lookup(*scene, p)) {
      throw std::invalid_argument("reference position lies outside every room");
    }
  }

  ReferenceSet set;
  set.scene = scene;
  set.prims = prims;
  set.grid = grid;
  set.matcher = matcher;
  set.pano_width = pano_width;
  set.pano_height = pano_height;
  set.scene_hash = scene_hash(*scene);
  set.references.resize(positions.size());

  const std::size_t n = positions.size();
  std::vector<std::uint64_t> keys(n);
  for (std::size_t i = 0; i < n; ++i) keys[i] = position_key(set.scene_hash, positions[i], pano_width, pano_height);

  fs::path disk_dir;
  nlohmann::json old_meta;
  if (cache && !cache->directory().empty()) {
    disk_dir = fs::path(cache->directory()) / hex64(set.scene_hash);
    fs::create_directories(disk_dir);
    std::ifstream in(disk_dir / "meta.json");
    if (in) old_meta = nlohmann::json::parse(in, nullptr, false);
    if (old_meta.is_discarded()) old_meta = nlohmann::json();
  }
  auto disk_key = [&](std::size_t i) -> std::string {
    if (!old_meta.is_object() || !old_meta.contains("keys")) return {};
    const auto& ks = old_meta["keys"];
    return i < ks.size() && ks[i].is_string() ? ks[i].get<std::string>() : std::string();
  };

  std::vector<char> rendered(n, 0);
  std::vector<std::string> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      if (cache) {
        if (auto hit = ReferenceSetBuilder::find(*cache, keys[i])) {
          set.references[i] = hit;
          continue;
        }
      }
      auto ref = std::make_shared<Reference>();
      ref->position = positions[i];
      const std::string stem = std::to_string(i);
      bool loaded = false;
      if (!disk_dir.empty() && disk_key(i) == hex64(keys[i])) {
        const fs::path sem = disk_dir / (stem + ".sem.png");
        const fs::path depth = disk_dir / (stem + ".depth.png");
        const fs::path norm = disk_dir / (stem + ".norm.png");
        if (fs::exists(sem) && fs::exists(depth) && fs::exists(norm)) {
          ref->bundle.semantic = read_semantic_png(sem.string());
          ref->bundle.depth = read_depth_png(depth.string());
          ref->bundle.normal = read_normal_png(norm.string());
          ref->bundle.pose.translation = positions[i];
          loaded = ref->bundle.semantic.same_shape(pano_width, pano_height);
        }
      }
      if (loaded) {
        ReferenceSetBuilder::count_disk_hit(*cache);
      } else {
        ref->bundle = render_panorama(*prims, positions[i], pano_width, pano_height);
        rendered[i] = 1;
        if (cache) ReferenceSetBuilder::count_render(*cache);
      }
      ref->encoding = encode_panorama(ref->bundle.semantic, positions[i], matcher);
      if (cache) ReferenceSetBuilder::store(*cache, keys[i], ref);
      set.references[i] = std::move(ref);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw std::runtime_error("building reference set: " + e);
  }

  if (!disk_dir.empty()) {
    bool dirty = old_meta.is_null();
    for (std::size_t i = 0; i < n; ++i) {
      if (disk_key(i) != hex64(keys[i])) dirty = true;
    }
    if (dirty) {
      nlohmann::json meta;
      meta["pano_width"] = pano_width;
      meta["pano_height"] = pano_height;
      meta["grid"] = {{"spacing", grid.spacing}, {"mode", to_string(grid.mode)}, {"h_pano", grid.h_pano}};
      meta["positions"] = nlohmann::json::array();
      meta["keys"] = nlohmann::json::array();
      for (std::size_t i = 0; i < n; ++i) {
        const std::string stem = (disk_dir / std::to_string(i)).string();
        const Reference& r = *set.references[i];
        if (disk_key(i) != hex64(keys[i])) {
          write_semantic_png(stem + ".sem.png", r.bundle.semantic);
          write_depth_png(stem + ".depth.png", r.bundle.depth);
          write_normal_png(stem + ".norm.png", r.bundle.normal);
        }
        meta["positions"].push_back({positions[i].x(), positions[i].y(), positions[i].z()});
        meta["keys"].push_back(hex64(keys[i]));
      }
      std::ofstream out(disk_dir / "meta.json");
      out << meta.dump(1) << '\n';
      if (!out) throw std::runtime_error("cannot write cache metadata in " + disk_dir.string());
    }
  }
  return set;
}

LocalizationResult localize(const ReferenceSet& refs, const SemanticImage& query_sem, const CameraIntrinsics& k,
                            const LocalizeConfig& cfg) {
  if (refs.references.empty()) throw std::invalid_argument("localize: empty reference set");
  k.validate();
  if (!query_sem.same_shape(k.width, k.height)) {
    throw std::invalid_argument("localize: query image does not match its intrinsics");
  }
  const auto hist = class_histogram(query_sem);
  if (hist[0] == query_sem.size()) throw std::invalid_argument("localize: query has no labeled pixel");
  if (cfg.top_n < 1) throw std::invalid_argument("localize: top_n must be at least 1");
  if (cfg.refine_rounds < 0) throw std::invalid_argument("localize: negative refine_rounds");
  cfg.refine.validate();

  const QueryEncoding q = encode_query(query_sem, k.hfov, cfg.matcher);
  std::vector<const PanoEncoding*> encodings;
  encodings.reserve(refs.size());
  for (const auto& r : refs.references) encodings.push_back(&r->encoding);
  const std::vector<MatchResult> matches =
      polish_matches(encodings, q, match_all(encodings, q, cfg.matcher), cfg.matcher);
  const std::vector<int> order = rank_references(matches);

  const RenderObjective objective(*refs.prims, query_sem, k, cfg.refine.render_size, cfg.refine.presence_threshold);
  const int n = std::min<int>(cfg.top_n, static_cast<int>(order.size()));
  LocalizationResult result;
  result.candidates.resize(n);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    Candidate& c = result.candidates[i];
    c.reference_index = order[i];
    c.match = matches[order[i]];
    const Pose init{c.match.rotation, refs.references[order[i]]->position};
    const RefineResult r = refine_pose(objective, init, cfg.refine);
    c.pose = r.pose;
    c.score = r.score;
    c.initial_score = r.initial_score;
  }
  std::stable_sort(result.candidates.begin(), result.candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.reference_index < b.reference_index;
  });

  Candidate& best = result.candidates.front();
  result.initial_selected = best.pose;
  result.initial_score = best.score;
  if (cfg.refine_rounds > 0) {
    RefinementContext ctx;
    ctx.scene = refs.scene.get();
    ctx.prims = refs.prims.get();
    ctx.pano_width = refs.pano_width;
    ctx.pano_height = refs.pano_height;
    ctx.matcher = cfg.matcher;
    ctx.refine = cfg.refine;
    ctx.anchor = refs.references[best.reference_index]->position;
    const RefineResult r = iterate_refinement(ctx, objective, query_sem, k, best.pose, cfg.refine_rounds);
    if (r.score > best.score) {
      best.pose = r.pose;
      best.score = r.score;
    }
  }
  result.refinement_rounds = cfg.refine_rounds;
  result.selected = best.pose;
  result.selected_score = best.score;
  return result;
}

nlohmann::json pose_to_json(const Pose& pose) {
  const Eigen::Quaterniond q = canonical(pose.rotation);
  return {{"q", {q.w(), q.x(), q.y(), q.z()}},
          {"t", {pose.translation.x(), pose.translation.y(), pose.translation.z()}}};
}

Pose pose_from_json(const nlohmann::json& j) {
  const auto& q = j.at("q");
  const auto& t = j.at("t");
  if (!q.is_array() || q.size() != 4 || !t.is_array() || t.size() != 3) {
    throw std::invalid_argument("pose must be {q: [w, x, y, z], t: [x, y, z]}");
  }
  Pose p;
  p.rotation = canonical(Eigen::Quaterniond(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                                            q[3].get<double>()));
  p.translation = Eigen::Vector3d(t[0].get<double>(), t[1].get<double>(), t[2].get<double>());
  return p;
}

nlohmann::json to_json(const LocalizationResult& result, const ReferenceSet& refs) {
  nlohmann::json j;
  j["selected"] = pose_to_json(result.selected);
  j["selected_score"] = result.selected_score;
  j["initial_selected"] = pose_to_json(result.initial_selected);
  j["initial_score"] = result.initial_score;
  j["refinement_rounds"] = result.refinement_rounds;
  j["candidates"] = nlohmann::json::array();
  for (const auto& c : result.candidates) {
    const Eigen::Vector3d& p = refs.references.at(c.reference_index)->position;
    j["candidates"].push_back({{"reference_index", c.reference_index},
                               {"reference_position", {p.x(), p.y(), p.z()}},
                               {"match_score", c.match.score},
                               {"hypothesis_index", c.match.hypothesis_index},
                               {"bbox",
                                {{"u_min", c.match.bbox.u_min},
                                 {"v_min", c.match.bbox.v_min},
                                 {"width", c.match.bbox.width},
                                 {"height", c.match.bbox.height}}},
                               {"pose", pose_to_json(c.pose)},
                               {"score", c.score}});
  }
  return j;
}

}  // namespace panoloc
