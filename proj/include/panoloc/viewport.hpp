#pragma once

#include <optional>

#include "panoloc/camera.hpp"
#include "panoloc/image.hpp"

namespace panoloc {

// Azimuth-wrapping box on an equirectangular grid, integer pixel units.
// Columns u_min .. u_min + width - 1 taken mod the panorama width.
struct CircularBBox {
  int u_min = 0;
  int v_min = 0;
  int width = 0;
  int height = 0;

  bool wraps(int pano_width) const { return u_min + width > pano_width; }
  bool contains(int u, int v, int pano_width) const;
  bool valid(int pano_width, int pano_height) const;
  bool operator==(const CircularBBox&) const = default;
};

// Set pixels: panorama points that land inside the perspective image and
// agree with its depth within max(2 cm, 1%). Throws std::invalid_argument
// when persp_depth does not match k.
BinaryImage compute_viewport_mask(const DepthImage& pano_depth, const Eigen::Vector3d& pano_position,
                                  const DepthImage& persp_depth, const Pose& persp_pose,
                                  const CameraIntrinsics& k);

// Minimal box around the set pixels; the azimuth range is the complement of
// the largest empty cyclic column gap. nullopt for an empty mask.
std::optional<CircularBBox> mask_to_circular_bbox(const BinaryImage& mask);

// Box of the pixels whose centers fall inside the view frustum of a camera
// at the panorama center (pure rotation). Computed from the image border
// arcs; full width when a pole lies inside the frustum.
CircularBBox frustum_bbox(const Eigen::Quaterniond& rotation, const CameraIntrinsics& k,
                          int pano_width, int pano_height);

double circular_iou(const CircularBBox& a, const CircularBBox& b, int pano_width, int pano_height);

}  // namespace panoloc
