#include "panoloc/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace panoloc {

using nlohmann::json;

std::string_view class_name(SemanticClass c) {
  switch (c) {
    case SemanticClass::kVoid: return "void";
    case SemanticClass::kWall: return "wall";
    case SemanticClass::kFloor: return "floor";
    case SemanticClass::kCeiling: return "ceiling";
    case SemanticClass::kDoor: return "door";
    case SemanticClass::kWindow: return "window";
    case SemanticClass::kOpening: return "opening";
  }
  return "unknown";
}

double Room::area() const {
  double twice = 0.0;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = polygon[i];
    const auto& b = polygon[(i + 1) % n];
    twice += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * twice;
}

double Room::edge_length(int edge) const { return (edge_end(edge) - edge_start(edge)).norm(); }

const Room* Scene::find_room(int id) const {
  for (const auto& r : rooms) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

namespace {

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(where + ": missing field '" + key + "'");
  return *it;
}

double require_number(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_number()) throw SchemaError(where + "." + key + ": expected number");
  return v.get<double>();
}

int require_int(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_number_integer()) throw SchemaError(where + "." + key + ": expected integer");
  return v.get<int>();
}

SemanticClass item_class_from_string(const std::string& s, const std::string& where) {
  if (s == "door") return SemanticClass::kDoor;
  if (s == "window") return SemanticClass::kWindow;
  if (s == "opening") return SemanticClass::kOpening;
  throw SchemaError(where + ".class: expected door|window|opening, got '" + s + "'");
}

}  // namespace

Scene parse_scene(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scene document syntax error at byte ") + std::to_string(e.byte) +
                         ": " + e.what(),
                     e.byte);
  }
  if (!doc.is_object()) throw SchemaError("scene: expected a JSON object");

  Scene scene;
  scene.version = require_int(doc, "version", "scene");

  const json& rooms = require(doc, "rooms", "scene");
  if (!rooms.is_array()) throw SchemaError("scene.rooms: expected array");
  for (std::size_t i = 0; i < rooms.size(); ++i) {
    const std::string where = "rooms[" + std::to_string(i) + "]";
    const json& r = rooms[i];
    if (!r.is_object()) throw SchemaError(where + ": expected object");
    Room room;
    room.id = require_int(r, "id", where);
    room.floor_z = require_number(r, "floor_z", where);
    room.ceiling_z = require_number(r, "ceiling_z", where);
    const json& poly = require(r, "polygon", where);
    if (!poly.is_array()) throw SchemaError(where + ".polygon: expected array");
    if (poly.size() < 3) {
      throw SchemaError(where + ".polygon: needs at least 3 vertices, got " +
                        std::to_string(poly.size()));
    }
    for (std::size_t k = 0; k < poly.size(); ++k) {
      const json& pt = poly[k];
      if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number()) {
        throw SchemaError(where + ".polygon[" + std::to_string(k) + "]: expected [x, y]");
      }
      room.polygon.emplace_back(pt[0].get<double>(), pt[1].get<double>());
    }
    scene.rooms.push_back(std::move(room));
  }

  const json& items = require(doc, "wall_items", "scene");
  if (!items.is_array()) throw SchemaError("scene.wall_items: expected array");
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string where = "wall_items[" + std::to_string(i) + "]";
    const json& it = items[i];
    if (!it.is_object()) throw SchemaError(where + ": expected object");
    WallItem item;
    item.room = require_int(it, "room", where);
    item.edge = require_int(it, "edge", where);
    const json& cls = require(it, "class", where);
    if (!cls.is_string()) throw SchemaError(where + ".class: expected string");
    item.cls = item_class_from_string(cls.get<std::string>(), where);
    item.offset = require_number(it, "offset", where);
    item.width = require_number(it, "width", where);
    item.bottom_z = require_number(it, "bottom_z", where);
    item.top_z = require_number(it, "top_z", where);
    scene.wall_items.push_back(item);
  }
  return scene;
}

std::string serialize_scene(const Scene& scene) {
  json doc;
  doc["version"] = scene.version;
  json rooms = json::array();
  for (const auto& r : scene.rooms) {
    json poly = json::array();
    for (const auto& p : r.polygon) poly.push_back({p.x(), p.y()});
    rooms.push_back(
        {{"id", r.id}, {"floor_z", r.floor_z}, {"ceiling_z", r.ceiling_z}, {"polygon", poly}});
  }
  doc["rooms"] = rooms;
  json items = json::array();
  for (const auto& w : scene.wall_items) {
    items.push_back({{"room", w.room},
                     {"edge", w.edge},
                     {"class", std::string(class_name(w.cls))},
                     {"offset", w.offset},
                     {"width", w.width},
                     {"bottom_z", w.bottom_z},
                     {"top_z", w.top_z}});
  }
  doc["wall_items"] = items;
  return doc.dump(1) + "\n";
}

Scene load_scene(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open scene file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scene(ss.str());
}

void save_scene(const Scene& scene, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write scene file: " + path);
  out << serialize_scene(scene);
}

namespace {

double cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

// Closed-segment intersection test with collinear overlap handling.
bool segments_intersect(const Eigen::Vector2d& p1, const Eigen::Vector2d& p2,
                        const Eigen::Vector2d& q1, const Eigen::Vector2d& q2) {
  constexpr double kEps = 1e-12;
  auto orient = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
    return cross(b - a, c - a);
  };
  auto on_segment = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
    return std::min(a.x(), b.x()) - kEps <= c.x() && c.x() <= std::max(a.x(), b.x()) + kEps &&
           std::min(a.y(), b.y()) - kEps <= c.y() && c.y() <= std::max(a.y(), b.y()) + kEps;
  };
  const double d1 = orient(q1, q2, p1);
  const double d2 = orient(q1, q2, p2);
  const double d3 = orient(p1, p2, q1);
  const double d4 = orient(p1, p2, q2);
  if (((d1 > kEps && d2 < -kEps) || (d1 < -kEps && d2 > kEps)) &&
      ((d3 > kEps && d4 < -kEps) || (d3 < -kEps && d4 > kEps))) {
    return true;
  }
  if (std::abs(d1) <= kEps && on_segment(q1, q2, p1)) return true;
  if (std::abs(d2) <= kEps && on_segment(q1, q2, p2)) return true;
  if (std::abs(d3) <= kEps && on_segment(p1, p2, q1)) return true;
  if (std::abs(d4) <= kEps && on_segment(p1, p2, q2)) return true;
  return false;
}

bool polygon_is_simple(const std::vector<Eigen::Vector2d>& poly) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    if ((poly[(i + 1) % n] - poly[i]).norm() <= 1e-12) return false;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return false;
    }
  }
  return true;
}

std::string item_label(std::size_t index, const WallItem& w) {
  return "wall_item " + std::to_string(index) + " (" + std::string(class_name(w.cls)) + ", room " +
         std::to_string(w.room) + ", edge " + std::to_string(w.edge) + ")";
}

}  // namespace

std::vector<std::string> validate_scene(const Scene& scene) {
  std::vector<std::string> out;
  if (scene.version != 1) out.push_back("scene: unsupported version " + std::to_string(scene.version));

  for (std::size_t i = 0; i < scene.rooms.size(); ++i) {
    const Room& r = scene.rooms[i];
    const std::string label = "room " + std::to_string(r.id);
    for (std::size_t j = 0; j < i; ++j) {
      if (scene.rooms[j].id == r.id) {
        out.push_back(label + ": duplicate room id");
        break;
      }
    }
    if (r.polygon.size() < 3) {
      out.push_back(label + ": polygon has fewer than 3 vertices");
    } else if (std::any_of(r.polygon.begin(), r.polygon.end(),
                           [](const Eigen::Vector2d& p) { return !p.allFinite(); })) {
      out.push_back(label + ": polygon has non-finite coordinates");
    } else if (!polygon_is_simple(r.polygon)) {
      out.push_back(label + ": polygon is not simple (self-intersecting or repeated vertex)");
    } else if (r.area() <= 0.0) {
      out.push_back(label + ": polygon is not counter-clockwise");
    }
    if (!(r.floor_z < r.ceiling_z)) out.push_back(label + ": floor_z must be below ceiling_z");
  }

  for (std::size_t i = 0; i < scene.wall_items.size(); ++i) {
    const WallItem& w = scene.wall_items[i];
    const std::string label = item_label(i, w);
    if (w.cls != SemanticClass::kDoor && w.cls != SemanticClass::kWindow &&
        w.cls != SemanticClass::kOpening) {
      out.push_back(label + ": class must be door, window or opening");
      continue;
    }
    const Room* room = scene.find_room(w.room);
    if (room == nullptr) {
      out.push_back(label + ": references unknown room");
      continue;
    }
    if (w.edge < 0 || w.edge >= static_cast<int>(room->polygon.size())) {
      out.push_back(label + ": edge index out of range");
      continue;
    }
    if (!(w.width > 0.0)) out.push_back(label + ": width must be positive");
    const double len = room->edge_length(w.edge);
    constexpr double kTol = 1e-9;
    if (w.offset < -kTol || w.offset + w.width > len + kTol) {
      std::ostringstream os;
      os << label << ": interval [" << w.offset << ", " << w.offset + w.width
         << "] exceeds edge length " << len;
      out.push_back(os.str());
    }
    if (w.bottom_z < room->floor_z - kTol) out.push_back(label + ": bottom_z below floor");
    if (w.top_z > room->ceiling_z + kTol) out.push_back(label + ": top_z above ceiling");
    if (!(w.bottom_z < w.top_z)) out.push_back(label + ": bottom_z must be below top_z");

    for (std::size_t j = 0; j < i; ++j) {
      const WallItem& o = scene.wall_items[j];
      if (o.room != w.room || o.edge != w.edge) continue;
      const double lo = std::max(o.offset, w.offset);
      const double hi = std::min(o.offset + o.width, w.offset + w.width);
      if (hi - lo > kTol) {
        out.push_back(label + ": overlaps wall_item " + std::to_string(j) + " on the same edge");
      }
    }
  }
  return out;
}

bool polygon_contains(const std::vector<Eigen::Vector2d>& polygon, const Eigen::Vector2d& p) {
  constexpr double kBoundaryTol = 1e-9;
  const std::size_t n = polygon.size();
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Eigen::Vector2d& a = polygon[i];
    const Eigen::Vector2d& b = polygon[j];
    // Boundary check: distance from p to segment ab.
    const Eigen::Vector2d ab = b - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    if ((a + t * ab - p).norm() <= kBoundaryTol) return true;
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x_cross = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x_cross) inside = !inside;
    }
  }
  return inside;
}

std::optional<int> point_room_lookup(const Scene& scene, const Eigen::Vector3d& p) {
  std::optional<int> best;
  for (const auto& r : scene.rooms) {
    if (best && *best <= r.id) continue;
    if (p.z() < r.floor_z || p.z() > r.ceiling_z) continue;
    if (polygon_contains(r.polygon, p.head<2>())) best = r.id;
  }
  return best;
}

double distance_to_nearest_wall(const Scene& scene, const Eigen::Vector2d& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : scene.rooms) {
    const std::size_t n = r.polygon.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector2d a = r.polygon[i];
      const Eigen::Vector2d ab = r.polygon[(i + 1) % n] - a;
      const double len2 = ab.squaredNorm();
      const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
      best = std::min(best, (a + t * ab - p).norm());
    }
  }
  return best;
}

SceneBounds scene_bounds(const Scene& scene) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  SceneBounds b{Eigen::Vector3d::Constant(kInf), Eigen::Vector3d::Constant(-kInf)};
  for (const auto& r : scene.rooms) {
    for (const auto& p : r.polygon) {
      b.min.x() = std::min(b.min.x(), p.x());
      b.min.y() = std::min(b.min.y(), p.y());
      b.max.x() = std::max(b.max.x(), p.x());
      b.max.y() = std::max(b.max.y(), p.y());
    }
    b.min.z() = std::min(b.min.z(), r.floor_z);
    b.max.z() = std::max(b.max.z(), r.ceiling_z);
  }
  return b;
}

}  // namespace panoloc
