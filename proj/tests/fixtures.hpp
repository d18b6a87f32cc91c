#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "panoloc/scene.hpp"

namespace panoloc::testing {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kDeg = kPi / 180.0;

inline Room rect_room(int id, double x0, double y0, double x1, double y1, double floor_z = 0.0,
                      double ceiling_z = 2.8) {
  Room r;
  r.id = id;
  r.polygon = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
  r.floor_z = floor_z;
  r.ceiling_z = ceiling_z;
  return r;
}

inline Scene box_scene(double sx = 4.0, double sy = 3.0, double h = 2.8) {
  Scene s;
  s.rooms.push_back(rect_room(0, 0.0, 0.0, sx, sy, 0.0, h));
  return s;
}

inline WallItem item(int room, int edge, SemanticClass cls, double offset, double width, double bottom,
                     double top) {
  WallItem w;
  w.room = room;
  w.edge = edge;
  w.cls = cls;
  w.offset = offset;
  w.width = width;
  w.bottom_z = bottom;
  w.top_z = top;
  return w;
}

// Two rooms side by side along x, sharing the wall x = 4. Room 0 has a
// window on its south wall, room 1 is larger and has a door to room 0 and
// a window on its north wall.
inline Scene two_room_scene() {
  Scene s;
  s.rooms.push_back(rect_room(0, 0.0, 0.0, 4.0, 3.0));
  s.rooms.push_back(rect_room(1, 4.0, 0.0, 10.0, 5.0));
  // Room 0 edge 1 runs (4,0)->(4,3); room 1 edge 3 runs (4,5)->(4,0).
  s.wall_items.push_back(item(0, 1, SemanticClass::kDoor, 1.0, 0.9, 0.0, 2.05));
  // Same door seen from room 1: y in [1.0, 1.9] is offset 5 - 1.9 along edge 3.
  s.wall_items.push_back(item(1, 3, SemanticClass::kDoor, 3.1, 0.9, 0.0, 2.05));
  s.wall_items.push_back(item(0, 0, SemanticClass::kWindow, 0.6, 1.2, 0.9, 2.0));
  s.wall_items.push_back(item(1, 2, SemanticClass::kWindow, 2.0, 1.5, 0.8, 2.1));
  return s;
}

// Independent winding-number test: nonzero winding counts as inside, and
// points on an edge are inside.
inline bool winding_contains(const std::vector<Eigen::Vector2d>& poly, const Eigen::Vector2d& p) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d a = poly[i], b = poly[(i + 1) % n];
    const Eigen::Vector2d ab = b - a, ap = p - a;
    const double cross = ab.x() * ap.y() - ab.y() * ap.x();
    if (std::abs(cross) <= 1e-12 * std::max(1.0, ab.norm()) && ap.dot(ab) >= -1e-12 &&
        ap.dot(ab) <= ab.squaredNorm() + 1e-12) {
      return true;
    }
  }
  int winding = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d a = poly[i], b = poly[(i + 1) % n];
    const double side = (b.x() - a.x()) * (p.y() - a.y()) - (p.x() - a.x()) * (b.y() - a.y());
    if (a.y() <= p.y()) {
      if (b.y() > p.y() && side > 0) ++winding;
    } else if (b.y() <= p.y() && side < 0) {
      --winding;
    }
  }
  return winding != 0;
}

}  // namespace panoloc::testing
