#pragma once

#include <optional>

#include "panoloc/camera.hpp"
#include "panoloc/image.hpp"
#include "panoloc/primitives.hpp"

namespace panoloc {

struct RenderBundle {
  SemanticImage semantic;
  DepthImage depth;
  NormalImage normal;
  Pose pose;                               // panoramas: identity rotation
  std::optional<CameraIntrinsics> intrinsics;  // empty for panoramas
};

inline constexpr int kDefaultPanoWidth = 256;
inline constexpr int kDefaultPanoHeight = 128;

// Nearest hit along a unit direction.
std::optional<Hit> intersect_ray(const PrimitiveSet& prims, const Eigen::Vector3d& origin,
                                 const Eigen::Vector3d& dir);

// Equirectangular render with identity orientation (north-aligned).
RenderBundle render_panorama(const PrimitiveSet& prims, const Eigen::Vector3d& position,
                             int width = kDefaultPanoWidth, int height = kDefaultPanoHeight);

RenderBundle render_perspective(const PrimitiveSet& prims, const Pose& pose,
                                const CameraIntrinsics& k);

// Semantic labels only, for the given optical-frame rays; used by hot loops
// that do not need depth or normals.
void trace_labels(const PrimitiveSet& prims, const Pose& pose,
                  const std::vector<Eigen::Vector3d>& optical_rays, std::vector<std::uint8_t>& out);

}  // namespace panoloc
