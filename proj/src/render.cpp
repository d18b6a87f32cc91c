#include "panoloc/render.hpp"

namespace panoloc {

std::optional<Hit> intersect_ray(const PrimitiveSet& prims, const Eigen::Vector3d& origin,
                                 const Eigen::Vector3d& dir) {
  return prims.intersect(origin, dir);
}

namespace {

void shade(RenderBundle& out, int x, int y, const std::optional<Hit>& hit) {
  if (!hit) return;
  out.semantic(x, y) = static_cast<std::uint8_t>(hit->cls);
  out.depth(x, y) = static_cast<float>(hit->distance);
  out.normal(x, y) = hit->normal.cast<float>();
}

RenderBundle blank(int width, int height) {
  RenderBundle b;
  b.semantic = SemanticImage(width, height, 0);
  b.depth = DepthImage(width, height, 0.0f);
  b.normal = NormalImage(width, height, Eigen::Vector3f::Zero());
  return b;
}

}  // namespace

RenderBundle render_panorama(const PrimitiveSet& prims, const Eigen::Vector3d& position, int width,
                             int height) {
  RenderBundle out = blank(width, height);
  out.pose.translation = position;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Eigen::Vector3d dir = equirect_pixel_to_dir(x + 0.5, y + 0.5, width, height);
      shade(out, x, y, prims.intersect(position, dir));
    }
  }
  return out;
}

RenderBundle render_perspective(const PrimitiveSet& prims, const Pose& pose,
                                const CameraIntrinsics& k) {
  k.validate();
  RenderBundle out = blank(k.width, k.height);
  out.pose = pose;
  out.intrinsics = k;
  const Eigen::Matrix3d to_world = pose.rotation.toRotationMatrix() * camera_basis();
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      const Eigen::Vector3d dir = to_world * persp_pixel_to_ray(k, x + 0.5, y + 0.5);
      shade(out, x, y, prims.intersect(pose.translation, dir));
    }
  }
  return out;
}

void trace_labels(const PrimitiveSet& prims, const Pose& pose,
                  const std::vector<Eigen::Vector3d>& optical_rays, std::vector<std::uint8_t>& out) {
  const Eigen::Matrix3d to_world = pose.rotation.toRotationMatrix() * camera_basis();
  out.resize(optical_rays.size());
  for (std::size_t i = 0; i < optical_rays.size(); ++i) {
    const auto hit = prims.intersect(pose.translation, to_world * optical_rays[i]);
    out[i] = hit ? static_cast<std::uint8_t>(hit->cls) : 0;
  }
}

}  // namespace panoloc
