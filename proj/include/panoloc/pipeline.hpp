#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "panoloc/matcher.hpp"
#include "panoloc/refiner.hpp"
#include "panoloc/render.hpp"
#include "panoloc/scene.hpp"

namespace panoloc {

enum class GridMode { kGlobal, kLocal };

struct GridConfig {
  double spacing = 1.2;  // meters
  GridMode mode = GridMode::kLocal;
  double h_pano = 1.5;  // camera height above the room floor
};

std::string to_string(GridMode mode);
GridMode grid_mode_from_string(const std::string& s);

// Global: one grid over the scene footprint, anchored at the bounding-box
// minimum with a half-spacing inset. Local: a symmetric grid per room plus
// one camera 10 cm inside the midpoint of every door and opening. Points
// closer than 1 cm to an earlier one are dropped.
std::vector<Eigen::Vector3d> sample_reference_positions(const Scene& scene, const GridConfig& grid);

// Same, without door/opening cameras; used to reason about grid density.
std::vector<Eigen::Vector3d> sample_grid_positions(const Scene& scene, const GridConfig& grid);

struct Reference {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  RenderBundle bundle;
  PanoEncoding encoding;
};

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t scene_hash(const Scene& scene);

// Memoizes rendered reference panoramas by (scene bytes, position, dims).
// With a directory, entries persist as
//   <dir>/<scene-hash>/<index>.{sem,depth,norm}.png + meta.json.
// Thread-safe.
class ReferenceCache {
 public:
  explicit ReferenceCache(std::string directory = {}) : directory_(std::move(directory)) {}

  const std::string& directory() const { return directory_; }
  std::size_t render_count() const { return renders_.load(); }
  std::size_t disk_hits() const { return disk_hits_.load(); }
  std::size_t memory_hits() const { return memory_hits_.load(); }
  void clear_memory();

 private:
  friend struct ReferenceSetBuilder;

  std::string directory_;
  std::mutex mutex_;
  std::map<std::uint64_t, std::shared_ptr<const Reference>> entries_;
  std::atomic<std::size_t> renders_{0};
  std::atomic<std::size_t> disk_hits_{0};
  std::atomic<std::size_t> memory_hits_{0};
};

struct ReferenceSet {
  std::shared_ptr<const Scene> scene;
  std::shared_ptr<const PrimitiveSet> prims;
  std::vector<std::shared_ptr<const Reference>> references;
  GridConfig grid;
  MatcherConfig matcher;
  int pano_width = kDefaultPanoWidth;
  int pano_height = kDefaultPanoHeight;
  std::uint64_t scene_hash = 0;

  std::size_t size() const { return references.size(); }
};

// Renders and encodes one panorama per position. Throws
// std::invalid_argument when a position is outside every room.
ReferenceSet build_reference_set(std::shared_ptr<const Scene> scene,
                                 std::shared_ptr<const PrimitiveSet> prims,
                                 const std::vector<Eigen::Vector3d>& positions,
                                 int pano_width = kDefaultPanoWidth, int pano_height = kDefaultPanoHeight,
                                 const MatcherConfig& matcher = {}, const GridConfig& grid = {},
                                 ReferenceCache* cache = nullptr);

struct LocalizeConfig {
  int top_n = 3;
  int refine_rounds = 1;
  MatcherConfig matcher;
  RefineConfig refine;
};

struct Candidate {
  int reference_index = 0;
  MatchResult match;
  Pose pose;
  double score = 0.0;
  double initial_score = 0.0;  // objective at the matcher's pose
};

struct LocalizationResult {
  std::vector<Candidate> candidates;  // by refined score, descending
  Pose selected;
  double selected_score = 0.0;
  // Selection before any refinement round was applied.
  Pose initial_selected;
  double initial_score = 0.0;
  int refinement_rounds = 0;
};

// Throws std::invalid_argument for an empty reference set or a query
// without any non-void pixel.
LocalizationResult localize(const ReferenceSet& refs, const SemanticImage& query_sem,
                            const CameraIntrinsics& k, const LocalizeConfig& cfg = {});

nlohmann::json pose_to_json(const Pose& pose);
Pose pose_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LocalizationResult& result, const ReferenceSet& refs);

}  // namespace panoloc
