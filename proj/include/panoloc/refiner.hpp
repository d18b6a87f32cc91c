#pragma once

#include <optional>
#include <vector>

#include "panoloc/camera.hpp"
#include "panoloc/image.hpp"
#include "panoloc/matcher.hpp"
#include "panoloc/primitives.hpp"
#include "panoloc/scene.hpp"

namespace panoloc {

struct RefineConfig {
  double translation_step = 0.4;  // meters
  double rotation_step_deg = 5.0;
  double shrink = 0.5;
  double min_translation_step = 0.01;
  double min_rotation_step_deg = 0.1;
  int max_evaluations = 400;
  int render_size = 64;
  double bound_xy = 1.4;  // meters from the anchor
  double bound_z = 0.3;
  double presence_threshold = 0.01;

  // Throws std::invalid_argument.
  void validate() const;
};

struct RefineResult {
  Pose pose;
  double score = 0.0;
  double initial_score = 0.0;  // objective at the initial pose
  int evaluations = 0;  // objective calls spent on neighbors
  bool converged = false;
};

// Render-and-compare score of a candidate pose against a semantic query.
// The query is point-sampled on a render_size x render_size lattice of its
// own pixel centers and the candidate is ray cast through exactly those
// centers, so the true pose reproduces the sampled labels bit for bit.
// The score is the class-balanced IoU over classes present in the query.
class RenderObjective {
 public:
  RenderObjective(const PrimitiveSet& prims, const SemanticImage& query, const CameraIntrinsics& k,
                  int render_size = 64, double presence_threshold = 0.01);

  double operator()(const Pose& pose) const;

  const std::vector<int>& present() const { return present_; }
  const PrimitiveSet& primitives() const { return *prims_; }

 private:
  const PrimitiveSet* prims_;
  std::vector<Eigen::Vector3d> rays_;
  std::vector<std::uint8_t> target_;
  std::vector<int> present_;
};

double objective(const PrimitiveSet& prims, const SemanticImage& query_sem, const CameraIntrinsics& k,
                 const Pose& pose, const RefineConfig& cfg = {});

// Compass search over six axes expressed in the frame of the current pose:
// right, forward and up translations plus yaw, pitch and roll increments
// right-multiplied onto the current rotation. Sideways and vertical moves
// are paired with the yaw or pitch that keeps the centered surface point in
// view. When no axis improves, a second poll along a rotated orthonormal
// basis runs before the steps shrink. Translation stays within the
// configured box around `anchor` (default: the initial translation).
// Throws std::invalid_argument when the initial pose lies outside the
// scene geometry or the anchor box.
RefineResult refine_pose(const RenderObjective& objective, const Pose& init, const RefineConfig& cfg = {},
                         const std::optional<Eigen::Vector3d>& anchor = std::nullopt);
RefineResult refine_pose(const PrimitiveSet& prims, const SemanticImage& query_sem,
                         const CameraIntrinsics& k, const Pose& init, const RefineConfig& cfg = {});

// What a refinement round needs to render and match a fresh panorama.
struct RefinementContext {
  const Scene* scene = nullptr;
  const PrimitiveSet* prims = nullptr;
  int pano_width = 256;
  int pano_height = 128;
  MatcherConfig matcher;
  RefineConfig refine;
  std::optional<Eigen::Vector3d> anchor;
};

// Each round renders a panorama at the current estimate, re-seeds the
// rotation from it and refines from both the re-seeded and the current
// pose; the better result is kept only when its score improves. Stops early when the estimate leaves every room.
RefineResult iterate_refinement(const RefinementContext& ctx, const RenderObjective& objective,
                                const SemanticImage& query_sem, const CameraIntrinsics& k,
                                const Pose& estimate, int rounds);

}  // namespace panoloc
