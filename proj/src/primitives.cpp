#include "panoloc/primitives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace panoloc {

namespace {

constexpr int kLeafSize = 4;
constexpr int kBins = 12;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Aabb {
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(kInf);
  Eigen::Vector3d hi = Eigen::Vector3d::Constant(-kInf);

  void grow(const Eigen::Vector3d& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void grow(const Aabb& b) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  double half_area() const {
    if (lo.x() > hi.x()) return 0.0;
    const Eigen::Vector3d e = hi - lo;
    return e.x() * e.y() + e.y() * e.z() + e.z() * e.x();
  }
};

Aabb triangle_box(const Triangle& t) {
  Aabb b;
  for (const auto& v : t.v) b.grow(v);
  return b;
}

// Entry distance of the ray into the box, or +inf when missed.
inline double slab_entry(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi,
                         const Eigen::Vector3d& origin, const Eigen::Vector3d& inv_dir) {
  double tnear = 0.0;
  double tfar = kInf;
  for (int a = 0; a < 3; ++a) {
    double t1 = (lo[a] - origin[a]) * inv_dir[a];
    double t2 = (hi[a] - origin[a]) * inv_dir[a];
    if (t1 > t2) std::swap(t1, t2);
    tnear = std::max(tnear, t1);
    tfar = std::min(tfar, t2);
  }
  // Slack keeps rays that graze a flat box (walls, floors).
  return tnear <= tfar + 1e-9 ? tnear : kInf;
}

}  // namespace

std::optional<double> intersect_triangle(const Triangle& tri, const Eigen::Vector3d& origin,
                                         const Eigen::Vector3d& dir) {
  constexpr double kParallel = 1e-14;
  constexpr double kEdgeSlack = 1e-10;
  const Eigen::Vector3d e1 = tri.v[1] - tri.v[0];
  const Eigen::Vector3d e2 = tri.v[2] - tri.v[0];
  const Eigen::Vector3d p = dir.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < kParallel) return std::nullopt;
  const double inv_det = 1.0 / det;
  const Eigen::Vector3d s = origin - tri.v[0];
  const double u = s.dot(p) * inv_det;
  if (u < -kEdgeSlack || u > 1.0 + kEdgeSlack) return std::nullopt;
  const Eigen::Vector3d q = s.cross(e1);
  const double v = dir.dot(q) * inv_det;
  if (v < -kEdgeSlack || u + v > 1.0 + kEdgeSlack) return std::nullopt;
  const double t = e2.dot(q) * inv_det;
  if (t <= 1e-9) return std::nullopt;
  return t;
}

PrimitiveSet::PrimitiveSet(std::vector<Triangle> triangles) : triangles_(std::move(triangles)) {
  const int n = static_cast<int>(triangles_.size());
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0);
  if (n == 0) return;
  std::vector<Eigen::Vector3d> centroids(n);
  Aabb all;
  for (int i = 0; i < n; ++i) {
    centroids[i] = (triangles_[i].v[0] + triangles_[i].v[1] + triangles_[i].v[2]) / 3.0;
    all.grow(triangle_box(triangles_[i]));
  }
  bounds_min_ = all.lo;
  bounds_max_ = all.hi;
  nodes_.reserve(2 * n);
  nodes_.push_back({});
  build(0, 0, n, centroids);
}

void PrimitiveSet::build(int node_index, int begin, int end,
                         const std::vector<Eigen::Vector3d>& centroids) {
  // Children are appended in pairs, so right child = left + 1.
  Aabb box;
  Aabb centroid_box;
  for (int i = begin; i < end; ++i) {
    box.grow(triangle_box(triangles_[order_[i]]));
    centroid_box.grow(centroids[order_[i]]);
  }
  nodes_[node_index].lo = box.lo;
  nodes_[node_index].hi = box.hi;

  const int count = end - begin;
  auto make_leaf = [&] {
    nodes_[node_index].first = begin;
    nodes_[node_index].count = count;
  };
  if (count <= kLeafSize) return make_leaf();

  // Binned SAH over the axis of largest centroid extent.
  const Eigen::Vector3d extent = centroid_box.hi - centroid_box.lo;
  int axis = 0;
  if (extent.y() > extent[axis]) axis = 1;
  if (extent.z() > extent[axis]) axis = 2;
  if (extent[axis] <= 1e-12) return make_leaf();

  struct Bin {
    Aabb box;
    int count = 0;
  };
  std::array<Bin, kBins> bins{};
  const double scale = kBins / extent[axis];
  auto bin_of = [&](int tri) {
    const int b = static_cast<int>((centroids[tri][axis] - centroid_box.lo[axis]) * scale);
    return std::clamp(b, 0, kBins - 1);
  };
  for (int i = begin; i < end; ++i) {
    Bin& b = bins[bin_of(order_[i])];
    b.box.grow(triangle_box(triangles_[order_[i]]));
    ++b.count;
  }
  std::array<double, kBins - 1> left_cost{};
  Aabb acc;
  int acc_count = 0;
  for (int i = 0; i < kBins - 1; ++i) {
    acc.grow(bins[i].box);
    acc_count += bins[i].count;
    left_cost[i] = acc.half_area() * acc_count;
  }
  double best_cost = kInf;
  int best_split = -1;
  acc = Aabb{};
  acc_count = 0;
  for (int i = kBins - 1; i > 0; --i) {
    acc.grow(bins[i].box);
    acc_count += bins[i].count;
    const double cost = left_cost[i - 1] + acc.half_area() * acc_count;
    if (acc_count > 0 && acc_count < count && cost < best_cost) {
      best_cost = cost;
      best_split = i;
    }
  }
  if (best_split < 0) return make_leaf();

  auto mid_it = std::stable_partition(order_.begin() + begin, order_.begin() + end,
                                      [&](int tri) { return bin_of(tri) < best_split; });
  const int mid = static_cast<int>(mid_it - order_.begin());

  const int left = static_cast<int>(nodes_.size());
  nodes_[node_index].first = left;
  nodes_[node_index].count = 0;
  nodes_.push_back({});
  nodes_.push_back({});
  build(left, begin, mid, centroids);
  build(left + 1, mid, end, centroids);
}

Hit PrimitiveSet::make_hit(int index, double t, const Eigen::Vector3d& dir) const {
  const Triangle& tri = triangles_[index];
  Hit h;
  h.distance = t;
  h.cls = tri.cls;
  h.triangle = index;
  Eigen::Vector3d n = (tri.v[1] - tri.v[0]).cross(tri.v[2] - tri.v[0]).normalized();
  if (n.dot(dir) > 0.0) n = -n;
  h.normal = n;
  return h;
}

std::optional<Hit> PrimitiveSet::intersect_linear(const Eigen::Vector3d& origin,
                                                  const Eigen::Vector3d& dir) const {
  double best_t = kInf;
  int best = -1;
  for (int i = 0; i < static_cast<int>(triangles_.size()); ++i) {
    if (auto t = intersect_triangle(triangles_[i], origin, dir)) {
      if (best < 0 || hit_precedes(*t, i, best_t, best)) {
        best_t = *t;
        best = i;
      }
    }
  }
  if (best < 0) return std::nullopt;
  return make_hit(best, best_t, dir);
}

std::optional<Hit> PrimitiveSet::intersect(const Eigen::Vector3d& origin,
                                           const Eigen::Vector3d& dir) const {
  if (nodes_.empty()) return std::nullopt;
  Eigen::Vector3d inv_dir;
  for (int a = 0; a < 3; ++a) {
    inv_dir[a] = dir[a] != 0.0 ? 1.0 / dir[a] : std::copysign(1e300, dir[a]);
  }
  double best_t = kInf;
  int best = -1;
  int stack[64];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (slab_entry(node.lo, node.hi, origin, inv_dir) > best_t + 1e-9) continue;
    if (node.count > 0) {
      for (int k = node.first; k < node.first + node.count; ++k) {
        const int i = order_[k];
        if (auto t = intersect_triangle(triangles_[i], origin, dir)) {
          if (best < 0 || hit_precedes(*t, i, best_t, best)) {
            best_t = *t;
            best = i;
          }
        }
      }
      continue;
    }
    const int l = node.first;
    const int r = node.first + 1;
    const double dl = slab_entry(nodes_[l].lo, nodes_[l].hi, origin, inv_dir);
    const double dr = slab_entry(nodes_[r].lo, nodes_[r].hi, origin, inv_dir);
    // Push the farther child first so the nearer one is visited next.
    if (dl <= dr) {
      if (dr < kInf) stack[top++] = r;
      if (dl < kInf) stack[top++] = l;
    } else {
      if (dl < kInf) stack[top++] = l;
      if (dr < kInf) stack[top++] = r;
    }
  }
  if (best < 0) return std::nullopt;
  return make_hit(best, best_t, dir);
}

}  // namespace panoloc
