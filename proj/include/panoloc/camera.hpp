#pragma once

#include <optional>

#include <Eigen/Core>
#include <Eigen/Geometry>

// Conventions used throughout:
//   world: right-handed, z up, +y north.
//   equirectangular: azimuth = atan2(x, y), elevation = atan2(z, |xy|),
//     u = (0.5 + azimuth / 2pi) * W mod W, v = (0.5 - elevation / pi) * H.
//     Pixel centers sit at half-integer coordinates.
//   perspective optical frame: +x right, +y down, +z forward. A pose with
//     identity rotation looks north with +z up; optical axes map to body
//     axes through camera_basis().
namespace panoloc {

struct Pose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  // Body-frame point to world.
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }
  Eigen::Matrix4d matrix() const;
};

// Unit norm, w >= 0.
Eigen::Quaterniond canonical(const Eigen::Quaterniond& q);

// exp(v) = (cos|v|, sin|v| v/|v|). Half-angle convention: a rotation by
// angle a about axis n has log a/2 * n.
Eigen::Quaterniond quat_exp(const Eigen::Vector3d& v);
Eigen::Vector3d quat_log(const Eigen::Quaterniond& q);

// R = R_ref R_rel, t = R_ref t_rel + t_ref.
Pose compose_pose(const Pose& reference, const Pose& relative);

// Heading (clockwise from north), pitch (positive looks up), roll about the
// viewing axis. Angles in radians.
Eigen::Quaterniond rotation_from_ypr(double yaw, double pitch, double roll);
// Heading of the rotated forward axis, atan2(f.x, f.y).
double yaw_of(const Eigen::Quaterniond& q);
// Geodesic rotation angle between two rotations, degrees.
double rotation_angle_deg(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b);

// Optical frame to body frame: (+x, +y, +z) -> (+x, -z, +y).
const Eigen::Matrix3d& camera_basis();

Eigen::Vector3d equirect_pixel_to_dir(double u, double v, int width, int height);
Eigen::Vector2d dir_to_equirect_pixel(const Eigen::Vector3d& d, int width, int height);

struct CameraIntrinsics {
  double hfov = 1.5707963267948966;
  int width = 128;
  int height = 128;

  double focal() const;
  // Throws std::invalid_argument when outside 0 < hfov < pi or a side < 2.
  void validate() const;
};

// Unit optical-frame ray through continuous pixel coordinate (u, v).
Eigen::Vector3d persp_pixel_to_ray(const CameraIntrinsics& k, double u, double v);

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double distance = 0.0;  // Euclidean, |p - t|
};

// nullopt when the point is behind the camera (optical z <= 0). The pixel
// may lie outside the image bounds.
std::optional<Projection> project_point(const Pose& pose, const CameraIntrinsics& k,
                                        const Eigen::Vector3d& p_world);

}  // namespace panoloc
