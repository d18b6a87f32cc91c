#include "panoloc/viewport.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace panoloc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

int positive_mod(int a, int m) { return ((a % m) + m) % m; }

double azimuth(const Eigen::Vector3d& d) {
  return std::hypot(d.x(), d.y()) > 0.0 ? std::atan2(d.x(), d.y()) : 0.0;
}

double elevation(const Eigen::Vector3d& d) { return std::atan2(d.z(), std::hypot(d.x(), d.y())); }

double mod_two_pi(double a) {
  a = std::fmod(a, kTwoPi);
  return a < 0.0 ? a + kTwoPi : a;
}

// Does the direction land inside the (closed) image rectangle?
bool inside_frustum(const Eigen::Matrix3d& world_to_optical, const CameraIntrinsics& k,
                    const Eigen::Vector3d& dir) {
  const Eigen::Vector3d o = world_to_optical * dir;
  if (o.z() <= 0.0) return false;
  const double f = k.focal();
  const double u = f * o.x() / o.z() + 0.5 * k.width;
  const double v = f * o.y() / o.z() + 0.5 * k.height;
  return u >= 0.0 && u <= k.width && v >= 0.0 && v <= k.height;
}

// The continuous extents can exceed the pixel-center extents by a pixel or
// two where the frustum narrows to a corner. Trims border rows and columns
// that hold no pixel center inside the frustum.
void tighten_to_pixel_centers(CircularBBox& box, const Eigen::Matrix3d& world_to_optical,
                              const CameraIntrinsics& k, int w, int h) {
  auto inside = [&](int col, int row) {
    const int u = ((col % w) + w) % w;
    return inside_frustum(world_to_optical, k, equirect_pixel_to_dir(u + 0.5, row + 0.5, w, h));
  };
  auto row_occupied = [&](int row) {
    for (int c = box.u_min; c < box.u_min + box.width; ++c)
      if (inside(c, row)) return true;
    return false;
  };
  auto col_occupied = [&](int col) {
    for (int r = box.v_min; r < box.v_min + box.height; ++r)
      if (inside(col, r)) return true;
    return false;
  };
  while (box.height > 1 && !row_occupied(box.v_min)) {
    ++box.v_min;
    --box.height;
  }
  while (box.height > 1 && !row_occupied(box.v_min + box.height - 1)) --box.height;
  // A pole inside the frustum keeps the full-width box.
  if (box.width == w) return;
  while (box.width > 1 && !col_occupied(box.u_min)) {
    box.u_min = (box.u_min + 1) % w;
    --box.width;
  }
  while (box.width > 1 && !col_occupied(box.u_min + box.width - 1)) --box.width;
}

// Overlap length of [a0, a0 + aw) and [b0, b0 + bw) on a circle of length w.
double cyclic_overlap(double a0, double aw, double b0, double bw, double w) {
  double total = 0.0;
  for (int shift = -1; shift <= 1; ++shift) {
    const double lo = std::max(a0, b0 + shift * w);
    const double hi = std::min(a0 + aw, b0 + bw + shift * w);
    total += std::max(0.0, hi - lo);
  }
  return total;
}

}  // namespace

bool CircularBBox::contains(int u, int v, int pano_width) const {
  if (v < v_min || v >= v_min + height) return false;
  return positive_mod(u - u_min, pano_width) < width;
}

bool CircularBBox::valid(int pano_width, int pano_height) const {
  return u_min >= 0 && u_min < pano_width && v_min >= 0 && height > 0 &&
         v_min + height <= pano_height && width > 0 && width <= pano_width;
}

BinaryImage compute_viewport_mask(const DepthImage& pano_depth, const Eigen::Vector3d& pano_position,
                                  const DepthImage& persp_depth, const Pose& persp_pose,
                                  const CameraIntrinsics& k) {
  k.validate();
  if (!persp_depth.same_shape(k.width, k.height)) {
    throw std::invalid_argument("perspective depth raster does not match the intrinsics");
  }
  const int w = pano_depth.width();
  const int h = pano_depth.height();
  BinaryImage mask(w, h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float d = pano_depth(x, y);
      if (d <= 0.0f) continue;
      const Eigen::Vector3d p = pano_position + d * equirect_pixel_to_dir(x + 0.5, y + 0.5, w, h);
      const auto proj = project_point(persp_pose, k, p);
      if (!proj || proj->u < 0.0 || proj->v < 0.0 || proj->u >= k.width || proj->v >= k.height) {
        continue;
      }
      const float seen = persp_depth(static_cast<int>(proj->u), static_cast<int>(proj->v));
      if (seen <= 0.0f) continue;
      const double tol = std::max(0.02, 0.01 * proj->distance);
      if (std::abs(proj->distance - seen) <= tol) mask(x, y) = 1;
    }
  }
  return mask;
}

std::optional<CircularBBox> mask_to_circular_bbox(const BinaryImage& mask) {
  const int w = mask.width();
  const int h = mask.height();
  std::vector<char> column_used(w, 0);
  int row_lo = h, row_hi = -1;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask(x, y)) continue;
      column_used[x] = 1;
      row_lo = std::min(row_lo, y);
      row_hi = std::max(row_hi, y);
    }
  }
  if (row_hi < 0) return std::nullopt;

  CircularBBox box;
  box.v_min = row_lo;
  box.height = row_hi - row_lo + 1;

  const int first_used =
      static_cast<int>(std::find(column_used.begin(), column_used.end(), 1) - column_used.begin());
  int best_gap = 0, best_gap_start = 0;
  int run = 0, run_start = 0;
  for (int step = 1; step <= w; ++step) {
    const int c = (first_used + step) % w;
    if (!column_used[c]) {
      if (run == 0) run_start = c;
      ++run;
      continue;
    }
    if (run > best_gap) {
      best_gap = run;
      best_gap_start = run_start;
    }
    run = 0;
  }
  if (best_gap == 0) {
    box.u_min = 0;
    box.width = w;
  } else {
    box.u_min = (best_gap_start + best_gap) % w;
    box.width = w - best_gap;
  }
  return box;
}

CircularBBox frustum_bbox(const Eigen::Quaterniond& rotation, const CameraIntrinsics& k,
                          int pano_width, int pano_height) {
  k.validate();
  const Eigen::Matrix3d to_world = rotation.toRotationMatrix() * camera_basis();
  const Eigen::Matrix3d to_optical = to_world.transpose();

  const std::array<Eigen::Vector2d, 4> corners = {Eigen::Vector2d(0, 0), Eigen::Vector2d(k.width, 0),
                                                  Eigen::Vector2d(k.width, k.height),
                                                  Eigen::Vector2d(0, k.height)};
  std::array<Eigen::Vector3d, 4> dirs;
  for (int i = 0; i < 4; ++i) dirs[i] = to_world * persp_pixel_to_ray(k, corners[i].x(), corners[i].y());

  double el_max = -std::numbers::pi, el_min = std::numbers::pi;
  for (const auto& d : dirs) {
    el_max = std::max(el_max, elevation(d));
    el_min = std::min(el_min, elevation(d));
  }
  // Interior elevation extremes of each border arc.
  for (int i = 0; i < 4; ++i) {
    const Eigen::Vector3d& a = dirs[i];
    const Eigen::Vector3d& b = dirs[(i + 1) % 4];
    const Eigen::Vector3d n = a.cross(b).normalized();
    Eigen::Vector3d top = Eigen::Vector3d::UnitZ() - n.z() * n;
    if (top.norm() < 1e-12) continue;
    top.normalize();
    for (const Eigen::Vector3d& p : {top, Eigen::Vector3d(-top)}) {
      if (a.cross(p).dot(n) >= 0.0 && p.cross(b).dot(n) >= 0.0) {
        el_max = std::max(el_max, elevation(p));
        el_min = std::min(el_min, elevation(p));
      }
    }
  }

  const bool north_inside = inside_frustum(to_optical, k, Eigen::Vector3d::UnitZ());
  const bool south_inside = inside_frustum(to_optical, k, -Eigen::Vector3d::UnitZ());
  if (north_inside) el_max = std::numbers::pi / 2;
  if (south_inside) el_min = -std::numbers::pi / 2;

  CircularBBox box;
  const double v_top = (0.5 - el_max / std::numbers::pi) * pano_height;
  const double v_bottom = (0.5 - el_min / std::numbers::pi) * pano_height;
  int row_lo = std::clamp(static_cast<int>(std::ceil(v_top - 0.5)), 0, pano_height - 1);
  int row_hi = std::clamp(static_cast<int>(std::floor(v_bottom - 0.5)), 0, pano_height - 1);
  if (row_hi < row_lo) {
    row_lo = row_hi = std::clamp(static_cast<int>(0.5 * (v_top + v_bottom)), 0, pano_height - 1);
  }
  box.v_min = row_lo;
  box.height = row_hi - row_lo + 1;

  if (north_inside || south_inside) {
    box.u_min = 0;
    box.width = pano_width;
    tighten_to_pixel_centers(box, to_optical, k, pano_width, pano_height);
    return box;
  }

  // Azimuth is monotonic along a great-circle arc that avoids the poles,
  // so the extremes of the unrolled azimuth occur at the corners.
  double unrolled = azimuth(dirs[0]);
  double az_lo = unrolled, az_hi = unrolled;
  for (int i = 0; i < 4; ++i) {
    const Eigen::Vector3d& a = dirs[i];
    const Eigen::Vector3d& b = dirs[(i + 1) % 4];
    const double nz = a.cross(b).z();
    const double fa = azimuth(a), fb = azimuth(b);
    double delta;
    if (nz > 0.0) {
      delta = -mod_two_pi(fa - fb);
    } else if (nz < 0.0) {
      delta = mod_two_pi(fb - fa);
    } else {
      delta = std::remainder(fb - fa, kTwoPi);
    }
    unrolled += delta;
    az_lo = std::min(az_lo, unrolled);
    az_hi = std::max(az_hi, unrolled);
  }
  const double u_lo = (0.5 + az_lo / kTwoPi) * pano_width;
  const double u_hi = (0.5 + az_hi / kTwoPi) * pano_width;
  int col_lo = static_cast<int>(std::ceil(u_lo - 0.5));
  int col_hi = static_cast<int>(std::floor(u_hi - 0.5));
  if (col_hi < col_lo) col_lo = col_hi = static_cast<int>(std::floor(0.5 * (u_lo + u_hi)));
  box.width = std::min(col_hi - col_lo + 1, pano_width);
  box.u_min = positive_mod(col_lo, pano_width);
  tighten_to_pixel_centers(box, to_optical, k, pano_width, pano_height);
  return box;
}

double circular_iou(const CircularBBox& a, const CircularBBox& b, int pano_width, int pano_height) {
  (void)pano_height;
  const double horizontal = cyclic_overlap(a.u_min, a.width, b.u_min, b.width, pano_width);
  const double vertical = std::max(
      0.0, static_cast<double>(std::min(a.v_min + a.height, b.v_min + b.height) - std::max(a.v_min, b.v_min)));
  const double inter = horizontal * vertical;
  const double area_a = static_cast<double>(a.width) * a.height;
  const double area_b = static_cast<double>(b.width) * b.height;
  const double uni = area_a + area_b - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace panoloc
