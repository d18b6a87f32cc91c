#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "panoloc/scene.hpp"

namespace panoloc {

struct Triangle {
  std::array<Eigen::Vector3d, 3> v;
  SemanticClass cls = SemanticClass::kWall;
  int room = -1;  // source room id
  int edge = -1;  // wall edge index; -1 for floor/ceiling caps

  double area() const { return 0.5 * (v[1] - v[0]).cross(v[2] - v[0]).norm(); }
};

struct Hit {
  double distance = 0.0;
  SemanticClass cls = SemanticClass::kVoid;
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();  // faces the ray origin
  int triangle = -1;
};

// Möller–Trumbore test against one triangle, two-sided. Returns the hit
// distance along a unit direction, nullopt on miss or t <= 0.
std::optional<double> intersect_triangle(const Triangle& tri, const Eigen::Vector3d& origin,
                                         const Eigen::Vector3d& dir);

// True when (t, index) should replace the current best (best_t, best_index).
// Distances within 1e-9 count as ties and go to the lower triangle index.
inline bool hit_precedes(double t, int index, double best_t, int best_index) {
  constexpr double kTieTol = 1e-9;
  if (t < best_t - kTieTol) return true;
  if (t <= best_t + kTieTol) return index < best_index;
  return false;
}

// Labeled triangle soup with a bounding volume hierarchy. Immutable after
// construction, safe to share between threads.
class PrimitiveSet {
 public:
  PrimitiveSet() = default;
  explicit PrimitiveSet(std::vector<Triangle> triangles);

  const std::vector<Triangle>& triangles() const { return triangles_; }
  std::size_t size() const { return triangles_.size(); }

  std::optional<Hit> intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) const;
  // Reference path that tests every triangle in order.
  std::optional<Hit> intersect_linear(const Eigen::Vector3d& origin,
                                      const Eigen::Vector3d& dir) const;

  Eigen::Vector3d bounds_min() const { return bounds_min_; }
  Eigen::Vector3d bounds_max() const { return bounds_max_; }

 private:
  struct Node {
    Eigen::Vector3d lo;
    Eigen::Vector3d hi;
    int first = 0;  // leaf: first index into order_; inner: left child
    int count = 0;  // leaf triangle count; 0 for inner nodes
  };

  void build(int node_index, int begin, int end, const std::vector<Eigen::Vector3d>& centroids);
  Hit make_hit(int index, double t, const Eigen::Vector3d& dir) const;

  std::vector<Triangle> triangles_;
  std::vector<Node> nodes_;
  std::vector<int> order_;
  Eigen::Vector3d bounds_min_ = Eigen::Vector3d::Zero();
  Eigen::Vector3d bounds_max_ = Eigen::Vector3d::Zero();
};

// Tessellates a valid scene: polygon caps for floor and ceiling, each wall
// edge split into a rectangle grid around its items. Doors and windows
// become coplanar labeled quads, openings leave a hole. Throws
// InvalidSceneError when validate_scene() reports violations.
PrimitiveSet scene_to_primitives(const Scene& scene);

// Ear-clipping triangulation of a simple CCW polygon; index triples.
std::vector<std::array<int, 3>> triangulate_polygon(const std::vector<Eigen::Vector2d>& polygon);

}  // namespace panoloc
