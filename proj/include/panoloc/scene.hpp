#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace panoloc {

// Fixed label palette shared by scene, renderer and matcher.
enum class SemanticClass : std::uint8_t {
  kVoid = 0,
  kWall = 1,
  kFloor = 2,
  kCeiling = 3,
  kDoor = 4,
  kWindow = 5,
  kOpening = 6,
};

inline constexpr int kNumClasses = 7;

std::string_view class_name(SemanticClass c);

struct Room {
  int id = 0;
  std::vector<Eigen::Vector2d> polygon;  // counter-clockwise, meters
  double floor_z = 0.0;
  double ceiling_z = 0.0;

  double area() const;  // signed, positive for CCW
  Eigen::Vector2d edge_start(int edge) const { return polygon[edge]; }
  Eigen::Vector2d edge_end(int edge) const {
    return polygon[(edge + 1) % polygon.size()];
  }
  double edge_length(int edge) const;

  bool operator==(const Room&) const = default;
};

struct WallItem {
  int room = 0;
  int edge = 0;
  SemanticClass cls = SemanticClass::kDoor;  // door, window or opening
  double offset = 0.0;
  double width = 0.0;
  double bottom_z = 0.0;
  double top_z = 0.0;

  bool operator==(const WallItem&) const = default;
};

struct Scene {
  int version = 1;
  std::vector<Room> rooms;
  std::vector<WallItem> wall_items;

  // nullptr when no room carries the id.
  const Room* find_room(int id) const;

  bool operator==(const Scene&) const = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t byte_position)
      : std::runtime_error(what), byte_position_(byte_position) {}
  std::size_t byte_position() const { return byte_position_; }

 private:
  std::size_t byte_position_;
};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidSceneError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parses a scene document. Throws ParseError on malformed JSON and
// SchemaError on missing or mistyped fields. Geometric consistency is
// left to validate_scene().
Scene parse_scene(std::string_view text);
std::string serialize_scene(const Scene& scene);

Scene load_scene(const std::string& path);
void save_scene(const Scene& scene, const std::string& path);

// Empty iff every scene invariant holds. Each entry names the offending
// room or wall item.
std::vector<std::string> validate_scene(const Scene& scene);

// Room whose prism contains p (polygon boundary counts as inside); lowest
// id wins when prisms overlap.
std::optional<int> point_room_lookup(const Scene& scene, const Eigen::Vector3d& p);

// 2D containment only, boundary inclusive.
bool polygon_contains(const std::vector<Eigen::Vector2d>& polygon, const Eigen::Vector2d& p);

// Distance from p to the closest wall segment of any room.
double distance_to_nearest_wall(const Scene& scene, const Eigen::Vector2d& p);

struct SceneBounds {
  Eigen::Vector3d min;
  Eigen::Vector3d max;
};
SceneBounds scene_bounds(const Scene& scene);

struct SyntheticSceneParams {
  int min_rooms = 4;
  int max_rooms = 8;
  double min_room_size = 3.0;  // meters, per rectangle side
  double max_room_size = 6.0;
  double door_probability = 0.6;      // door vs. opening per connection
  double window_probability = 0.6;    // per exterior edge
  double extra_connection_probability = 0.25;
};

// Connected apartment of axis-aligned rectangular rooms on a grid.
// Deterministic in seed. Throws std::invalid_argument on infeasible params.
Scene generate_synthetic_scene(std::uint64_t seed, const SyntheticSceneParams& params = {});

}  // namespace panoloc
