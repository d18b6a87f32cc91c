#include "panoloc/camera.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace panoloc {

namespace {
constexpr double kSeriesThreshold = 1e-6;
}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation.toRotationMatrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Eigen::Quaterniond canonical(const Eigen::Quaterniond& q) {
  Eigen::Quaterniond n = q.normalized();
  if (n.w() < 0.0) n.coeffs() = -n.coeffs();
  return n;
}

Eigen::Quaterniond quat_exp(const Eigen::Vector3d& v) {
  const double theta = v.norm();
  if (theta < kSeriesThreshold) {
    const double t2 = theta * theta;
    const Eigen::Vector3d xyz = v * (1.0 - t2 / 6.0);
    return Eigen::Quaterniond(1.0 - t2 / 2.0, xyz.x(), xyz.y(), xyz.z()).normalized();
  }
  const Eigen::Vector3d xyz = v * (std::sin(theta) / theta);
  return Eigen::Quaterniond(std::cos(theta), xyz.x(), xyz.y(), xyz.z());
}

Eigen::Vector3d quat_log(const Eigen::Quaterniond& q) {
  const Eigen::Quaterniond c = canonical(q);
  const Eigen::Vector3d xyz = c.vec();
  const double s = xyz.norm();
  if (s < kSeriesThreshold) return xyz * (1.0 + s * s / 6.0);
  return xyz * (std::atan2(s, c.w()) / s);
}

Pose compose_pose(const Pose& reference, const Pose& relative) {
  Pose out;
  out.rotation = canonical(reference.rotation * relative.rotation);
  out.translation = reference.rotation * relative.translation + reference.translation;
  return out;
}

Eigen::Quaterniond rotation_from_ypr(double yaw, double pitch, double roll) {
  const Eigen::Quaterniond q = Eigen::AngleAxisd(-yaw, Eigen::Vector3d::UnitZ()) *
                               Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitX()) *
                               Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitY());
  return canonical(q);
}

double yaw_of(const Eigen::Quaterniond& q) {
  const Eigen::Vector3d f = q * Eigen::Vector3d::UnitY();
  return std::atan2(f.x(), f.y());
}

double rotation_angle_deg(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  const Eigen::Vector4d qa = canonical(a).coeffs();
  const Eigen::Vector4d qb = canonical(b).coeffs();
  const double chord = std::min((qa - qb).norm(), (qa + qb).norm());
  return 4.0 * std::asin(std::min(1.0, chord / 2.0)) * 180.0 / std::numbers::pi;
}

const Eigen::Matrix3d& camera_basis() {
  static const Eigen::Matrix3d b = [] {
    Eigen::Matrix3d m;
    m << 1, 0, 0,
         0, 0, 1,
         0, -1, 0;
    return m;
  }();
  return b;
}

Eigen::Vector3d equirect_pixel_to_dir(double u, double v, int width, int height) {
  const double azimuth = (u / width - 0.5) * 2.0 * std::numbers::pi;
  const double elevation = (0.5 - v / height) * std::numbers::pi;
  const double c = std::cos(elevation);
  return {c * std::sin(azimuth), c * std::cos(azimuth), std::sin(elevation)};
}

Eigen::Vector2d dir_to_equirect_pixel(const Eigen::Vector3d& d, int width, int height) {
  const double horizontal = std::hypot(d.x(), d.y());
  const double azimuth = horizontal > 0.0 ? std::atan2(d.x(), d.y()) : 0.0;
  const double elevation = std::atan2(d.z(), horizontal);
  double u = (0.5 + azimuth / (2.0 * std::numbers::pi)) * width;
  u = std::fmod(u, static_cast<double>(width));
  if (u < 0.0) u += width;
  const double v = (0.5 - elevation / std::numbers::pi) * height;
  return {u, v};
}

double CameraIntrinsics::focal() const { return 0.5 * width / std::tan(0.5 * hfov); }

void CameraIntrinsics::validate() const {
  if (!(hfov > 0.0 && hfov < std::numbers::pi)) {
    throw std::invalid_argument("hfov must lie in (0, pi)");
  }
  if (width < 2 || height < 2) throw std::invalid_argument("image sides must be at least 2 px");
}

Eigen::Vector3d persp_pixel_to_ray(const CameraIntrinsics& k, double u, double v) {
  const double f = k.focal();
  return Eigen::Vector3d((u - 0.5 * k.width) / f, (v - 0.5 * k.height) / f, 1.0).normalized();
}

std::optional<Projection> project_point(const Pose& pose, const CameraIntrinsics& k,
                                        const Eigen::Vector3d& p_world) {
  const Eigen::Vector3d rel = p_world - pose.translation;
  const Eigen::Vector3d optical = camera_basis().transpose() * (pose.rotation.conjugate() * rel);
  if (optical.z() <= 0.0) return std::nullopt;
  const double f = k.focal();
  return Projection{f * optical.x() / optical.z() + 0.5 * k.width,
                    f * optical.y() / optical.z() + 0.5 * k.height, rel.norm()};
}

}  // namespace panoloc
