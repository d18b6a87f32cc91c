#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <utility>

#include "panoloc/rng.hpp"
#include "panoloc/scene.hpp"

namespace panoloc {

namespace {

double centimeters(double v) { return std::round(v * 100.0) / 100.0; }

struct Cell {
  int col;
  int row;
  auto operator<=>(const Cell&) const = default;
};

// Edge index of a CCW rectangle facing the given neighbor direction.
// 0 south, 1 east, 2 north, 3 west.
int edge_towards(const Cell& from, const Cell& to) {
  if (to.col == from.col + 1) return 1;
  if (to.col == from.col - 1) return 3;
  if (to.row == from.row + 1) return 2;
  return 0;
}

}  // namespace

Scene generate_synthetic_scene(std::uint64_t seed, const SyntheticSceneParams& params) {
  if (params.min_rooms < 1 || params.max_rooms < params.min_rooms) {
    throw std::invalid_argument("room count range must be non-empty and positive");
  }
  if (!(params.min_room_size >= 2.0) || params.max_room_size < params.min_room_size) {
    throw std::invalid_argument("room size range must be non-empty with sides of at least 2 m");
  }

  Rng rng(seed);
  const int n_rooms = rng.uniform_int(params.min_rooms, params.max_rooms);
  const int grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_rooms)))) + 1;

  std::vector<double> col_x(grid + 1, 0.0);
  std::vector<double> row_y(grid + 1, 0.0);
  for (int i = 0; i < grid; ++i) {
    col_x[i + 1] = col_x[i] + centimeters(rng.uniform(params.min_room_size, params.max_room_size));
  }
  for (int i = 0; i < grid; ++i) {
    row_y[i + 1] = row_y[i] + centimeters(rng.uniform(params.min_room_size, params.max_room_size));
  }

  std::map<Cell, int> room_of;
  std::vector<Cell> cells;
  std::vector<std::pair<int, int>> connections;

  auto neighbors = [&](const Cell& c) {
    std::vector<Cell> out;
    const Cell cand[4] = {{c.col, c.row - 1}, {c.col - 1, c.row}, {c.col + 1, c.row}, {c.col, c.row + 1}};
    for (const Cell& n : cand) {
      if (n.col >= 0 && n.row >= 0 && n.col < grid && n.row < grid) out.push_back(n);
    }
    return out;
  };

  const Cell start{rng.uniform_int(0, grid - 1), rng.uniform_int(0, grid - 1)};
  room_of[start] = 0;
  cells.push_back(start);
  while (static_cast<int>(cells.size()) < n_rooms) {
    std::set<Cell> frontier;
    for (const Cell& c : cells) {
      for (const Cell& n : neighbors(c)) {
        if (!room_of.count(n)) frontier.insert(n);
      }
    }
    std::vector<Cell> options(frontier.begin(), frontier.end());
    const Cell next = options[rng.uniform_int(0, static_cast<int>(options.size()) - 1)];
    std::vector<int> parents;
    for (const Cell& n : neighbors(next)) {
      if (auto it = room_of.find(n); it != room_of.end()) parents.push_back(it->second);
    }
    std::sort(parents.begin(), parents.end());
    const int parent = parents[rng.uniform_int(0, static_cast<int>(parents.size()) - 1)];
    const int id = static_cast<int>(cells.size());
    room_of[next] = id;
    cells.push_back(next);
    connections.emplace_back(parent, id);
  }
  for (int a = 0; a < n_rooms; ++a) {
    for (const Cell& n : neighbors(cells[a])) {
      auto it = room_of.find(n);
      if (it == room_of.end() || it->second <= a) continue;
      const int b = it->second;
      const bool exists = std::find(connections.begin(), connections.end(), std::make_pair(a, b)) !=
                              connections.end() ||
                          std::find(connections.begin(), connections.end(), std::make_pair(b, a)) !=
                              connections.end();
      if (!exists && rng.bernoulli(params.extra_connection_probability)) connections.emplace_back(a, b);
    }
  }

  Scene scene;
  for (int id = 0; id < n_rooms; ++id) {
    const Cell& c = cells[id];
    const double x0 = col_x[c.col], x1 = col_x[c.col + 1];
    const double y0 = row_y[c.row], y1 = row_y[c.row + 1];
    Room room;
    room.id = id;
    room.polygon = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
    room.floor_z = 0.0;
    room.ceiling_z = centimeters(rng.uniform(2.5, 3.0));
    scene.rooms.push_back(std::move(room));
  }

  for (const auto& [a, b] : connections) {
    const Room& ra = scene.rooms[a];
    const Room& rb = scene.rooms[b];
    const int edge_a = edge_towards(cells[a], cells[b]);
    const int edge_b = edge_towards(cells[b], cells[a]);
    const double len = ra.edge_length(edge_a);
    const double ceiling = std::min(ra.ceiling_z, rb.ceiling_z);

    WallItem item;
    item.room = a;
    item.edge = edge_a;
    item.bottom_z = 0.0;
    if (rng.bernoulli(params.door_probability)) {
      item.cls = SemanticClass::kDoor;
      item.width = centimeters(rng.uniform(0.8, 1.0));
      item.top_z = centimeters(rng.uniform(2.0, 2.1));
    } else {
      item.cls = SemanticClass::kOpening;
      item.width = centimeters(rng.uniform(1.0, std::min(2.0, len - 0.8)));
      item.top_z = centimeters(rng.uniform(2.1, std::min(2.4, ceiling - 0.1)));
    }
    item.offset = centimeters(rng.uniform(0.3, len - item.width - 0.3));
    scene.wall_items.push_back(item);

    // Matching item on the neighbor's coincident wall, which runs the
    // opposite direction.
    WallItem mirror = item;
    mirror.room = b;
    mirror.edge = edge_b;
    mirror.offset = centimeters(len - item.offset - item.width);
    scene.wall_items.push_back(mirror);
  }

  for (int id = 0; id < n_rooms; ++id) {
    const Room& room = scene.rooms[id];
    for (int e = 0; e < 4; ++e) {
      const Cell& c = cells[id];
      const Cell towards[4] = {{c.col, c.row - 1}, {c.col + 1, c.row}, {c.col, c.row + 1}, {c.col - 1, c.row}};
      if (room_of.count(towards[e])) continue;
      if (!rng.bernoulli(params.window_probability)) continue;
      const double len = room.edge_length(e);
      WallItem w;
      w.room = id;
      w.edge = e;
      w.cls = SemanticClass::kWindow;
      w.width = centimeters(rng.uniform(0.8, std::min(1.8, len - 0.8)));
      w.offset = centimeters(rng.uniform(0.4, len - w.width - 0.4));
      w.bottom_z = centimeters(rng.uniform(0.8, 1.0));
      w.top_z = centimeters(rng.uniform(1.9, std::min(2.2, room.ceiling_z - 0.2)));
      scene.wall_items.push_back(w);
    }
  }
  return scene;
}

}  // namespace panoloc
