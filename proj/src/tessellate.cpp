#include <algorithm>
#include <cmath>
#include <numeric>

#include "panoloc/primitives.hpp"

namespace panoloc {

namespace {

constexpr double kBreakTol = 1e-9;

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

bool point_in_triangle(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                       const Eigen::Vector2d& c) {
  return cross2(b - a, p - a) >= 0.0 && cross2(c - b, p - b) >= 0.0 && cross2(a - c, p - c) >= 0.0;
}

std::vector<double> unique_sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::vector<double> out;
  for (double x : v) {
    if (out.empty() || x - out.back() > kBreakTol) out.push_back(x);
  }
  return out;
}

void push_quad(std::vector<Triangle>& out, const Eigen::Vector2d& a, const Eigen::Vector2d& dir,
               double u0, double u1, double z0, double z1, SemanticClass cls, int room, int edge) {
  const Eigen::Vector2d p0 = a + dir * u0;
  const Eigen::Vector2d p1 = a + dir * u1;
  const Eigen::Vector3d c00(p0.x(), p0.y(), z0);
  const Eigen::Vector3d c10(p1.x(), p1.y(), z0);
  const Eigen::Vector3d c11(p1.x(), p1.y(), z1);
  const Eigen::Vector3d c01(p0.x(), p0.y(), z1);
  for (const Triangle& t : {Triangle{{c00, c10, c11}, cls, room, edge},
                            Triangle{{c00, c11, c01}, cls, room, edge}}) {
    if (t.area() > 1e-12) out.push_back(t);
  }
}

}  // namespace

std::vector<std::array<int, 3>> triangulate_polygon(const std::vector<Eigen::Vector2d>& polygon) {
  std::vector<int> idx;
  const int n = static_cast<int>(polygon.size());
  // Drop collinear vertices; they cannot form ears and add no area.
  for (int i = 0; i < n; ++i) {
    const auto& prev = polygon[(i + n - 1) % n];
    const auto& next = polygon[(i + 1) % n];
    if (std::abs(cross2(polygon[i] - prev, next - polygon[i])) > 1e-12) idx.push_back(i);
  }
  std::vector<std::array<int, 3>> tris;
  while (idx.size() > 3) {
    const int m = static_cast<int>(idx.size());
    bool clipped = false;
    for (int i = 0; i < m; ++i) {
      const int ia = idx[(i + m - 1) % m], ib = idx[i], ic = idx[(i + 1) % m];
      const auto &a = polygon[ia], &b = polygon[ib], &c = polygon[ic];
      if (cross2(b - a, c - b) <= 1e-12) continue;  // reflex or flat
      bool blocked = false;
      for (int k : idx) {
        if (k == ia || k == ib || k == ic) continue;
        if (point_in_triangle(polygon[k], a, b, c)) {
          blocked = true;
          break;
        }
      }
      if (blocked) continue;
      tris.push_back({ia, ib, ic});
      idx.erase(idx.begin() + i);
      clipped = true;
      break;
    }
    if (!clipped) {
      // Numerically stuck: fan the remainder.
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) tris.push_back({idx[0], idx[k], idx[k + 1]});
      return tris;
    }
  }
  if (idx.size() == 3) tris.push_back({idx[0], idx[1], idx[2]});
  return tris;
}

PrimitiveSet scene_to_primitives(const Scene& scene) {
  const auto violations = validate_scene(scene);
  if (!violations.empty()) {
    throw InvalidSceneError("cannot tessellate invalid scene: " + violations.front());
  }

  std::vector<Triangle> out;
  for (const Room& room : scene.rooms) {
    const auto caps = triangulate_polygon(room.polygon);
    auto lift = [&](int i, double z) {
      return Eigen::Vector3d(room.polygon[i].x(), room.polygon[i].y(), z);
    };
    for (const auto& t : caps) {
      out.push_back({{lift(t[0], room.floor_z), lift(t[1], room.floor_z), lift(t[2], room.floor_z)},
                     SemanticClass::kFloor, room.id, -1});
    }
    for (const auto& t : caps) {
      out.push_back(
          {{lift(t[0], room.ceiling_z), lift(t[2], room.ceiling_z), lift(t[1], room.ceiling_z)},
           SemanticClass::kCeiling, room.id, -1});
    }

    const int n_edges = static_cast<int>(room.polygon.size());
    for (int e = 0; e < n_edges; ++e) {
      const Eigen::Vector2d a = room.edge_start(e);
      const double len = room.edge_length(e);
      const Eigen::Vector2d dir = (room.edge_end(e) - a) / len;

      std::vector<const WallItem*> items;
      std::vector<double> u_breaks{0.0, len};
      for (const WallItem& w : scene.wall_items) {
        if (w.room != room.id || w.edge != e) continue;
        items.push_back(&w);
        u_breaks.push_back(std::clamp(w.offset, 0.0, len));
        u_breaks.push_back(std::clamp(w.offset + w.width, 0.0, len));
      }
      u_breaks = unique_sorted(std::move(u_breaks));

      for (std::size_t c = 0; c + 1 < u_breaks.size(); ++c) {
        const double u0 = u_breaks[c], u1 = u_breaks[c + 1];
        const WallItem* cover = nullptr;
        for (const WallItem* w : items) {
          if (w->offset <= u0 + kBreakTol && w->offset + w->width >= u1 - kBreakTol) {
            cover = w;
            break;
          }
        }
        std::vector<double> z_breaks{room.floor_z, room.ceiling_z};
        if (cover != nullptr) {
          z_breaks.push_back(std::clamp(cover->bottom_z, room.floor_z, room.ceiling_z));
          z_breaks.push_back(std::clamp(cover->top_z, room.floor_z, room.ceiling_z));
        }
        z_breaks = unique_sorted(std::move(z_breaks));
        for (std::size_t r = 0; r + 1 < z_breaks.size(); ++r) {
          const double z0 = z_breaks[r], z1 = z_breaks[r + 1];
          SemanticClass cls = SemanticClass::kWall;
          if (cover != nullptr && z0 >= cover->bottom_z - kBreakTol &&
              z1 <= cover->top_z + kBreakTol) {
            cls = cover->cls;
          }
          if (cls == SemanticClass::kOpening) continue;
          push_quad(out, a, dir, u0, u1, z0, z1, cls, room.id, e);
        }
      }
    }
  }
  return PrimitiveSet(std::move(out));
}

}  // namespace panoloc
