#include "panoloc/refiner.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "panoloc/render.hpp"

namespace panoloc {

namespace {
constexpr double kDeg = std::numbers::pi / 180.0;

double radical_inverse(int index, int base) {
  double f = 1.0, r = 0.0;
  for (int i = index; i > 0; i /= base) {
    f /= base;
    r += f * (i % base);
  }
  return r;
}

// Householder reflection of the index-th Halton vector: an orthonormal
// basis whose directions differ from one call to the next.
Eigen::Matrix<double, 6, 6> halton_basis(int index) {
  static constexpr int kPrimes[6] = {2, 3, 5, 7, 11, 13};
  Eigen::Matrix<double, 6, 1> v;
  for (int d = 0; d < 6; ++d) v[d] = radical_inverse(index + 1, kPrimes[d]) - 0.5;
  v.normalize();
  return Eigen::Matrix<double, 6, 6>::Identity() - 2.0 * v * v.transpose();
}
}  // namespace

void RefineConfig::validate() const {
  if (!(translation_step > 0 && rotation_step_deg > 0 && min_translation_step > 0 &&
        min_rotation_step_deg > 0 && bound_xy > 0 && bound_z > 0)) {
    throw std::invalid_argument("refine config: steps and bounds must be positive");
  }
  if (!(shrink > 0.0 && shrink < 1.0)) throw std::invalid_argument("refine config: shrink must lie in (0, 1)");
  if (max_evaluations < 0) throw std::invalid_argument("refine config: negative evaluation budget");
  if (render_size < 2) throw std::invalid_argument("refine config: render size must be at least 2");
}

RenderObjective::RenderObjective(const PrimitiveSet& prims, const SemanticImage& query,
                                 const CameraIntrinsics& k, int render_size, double presence_threshold)
    : prims_(&prims), present_(present_classes(query, presence_threshold)) {
  k.validate();
  if (!query.same_shape(k.width, k.height)) {
    throw std::invalid_argument("query image does not match its intrinsics");
  }
  const int n = render_size;
  rays_.reserve(static_cast<std::size_t>(n) * n);
  target_.reserve(rays_.capacity());
  for (int j = 0; j < n; ++j) {
    const int y = std::min(k.height - 1, static_cast<int>((j + 0.5) * k.height / n));
    for (int i = 0; i < n; ++i) {
      const int x = std::min(k.width - 1, static_cast<int>((i + 0.5) * k.width / n));
      rays_.push_back(persp_pixel_to_ray(k, x + 0.5, y + 0.5));
      target_.push_back(query(x, y));
    }
  }
}

double RenderObjective::operator()(const Pose& pose) const {
  if (present_.empty()) return 0.0;
  thread_local std::vector<std::uint8_t> labels;
  trace_labels(*prims_, pose, rays_, labels);
  std::array<int, kNumClasses> inter{}, uni{};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::uint8_t a = labels[i];
    const std::uint8_t b = target_[i];
    if (a == b) {
      ++inter[a];
      ++uni[a];
    } else {
      ++uni[a];
      ++uni[b];
    }
  }
  double total = 0.0;
  for (int c : present_) total += uni[c] > 0 ? static_cast<double>(inter[c]) / uni[c] : 1.0;
  return total / static_cast<double>(present_.size());
}

double objective(const PrimitiveSet& prims, const SemanticImage& query_sem, const CameraIntrinsics& k,
                 const Pose& pose, const RefineConfig& cfg) {
  return RenderObjective(prims, query_sem, k, cfg.render_size, cfg.presence_threshold)(pose);
}

RefineResult refine_pose(const RenderObjective& objective, const Pose& init, const RefineConfig& cfg,
                         const std::optional<Eigen::Vector3d>& anchor) {
  cfg.validate();
  const PrimitiveSet& prims = objective.primitives();
  constexpr double kSlack = 1e-6;
  if ((init.translation.array() < prims.bounds_min().array() - kSlack).any() ||
      (init.translation.array() > prims.bounds_max().array() + kSlack).any()) {
    throw std::invalid_argument("refine_pose: initial pose lies outside the scene");
  }
  const Eigen::Vector3d center = anchor.value_or(init.translation);
  const Eigen::Vector3d bound(cfg.bound_xy, cfg.bound_xy, cfg.bound_z);
  auto in_bounds = [&](const Eigen::Vector3d& t) {
    return ((t - center).cwiseAbs().array() <= bound.array() + 1e-12).all();
  };
  if (!in_bounds(init.translation)) {
    throw std::invalid_argument("refine_pose: initial pose lies outside the translation bounds");
  }

  // Each poll works in the frame of the current pose. Lateral and vertical
  // moves pivot about the point the current view centers on, which keeps
  // the image center fixed to first order.
  auto pose_at = [&](const Pose& base, double pivot, const std::array<double, 6>& p) {
    const Eigen::Matrix3d r = base.rotation.toRotationMatrix();
    Pose out;
    out.translation = base.translation + p[0] * r.col(0) + p[1] * r.col(1) + p[2] * r.col(2);
    out.rotation = canonical(base.rotation * rotation_from_ypr(p[3] * kDeg - p[0] / pivot,
                                                               p[4] * kDeg - p[2] / pivot, p[5] * kDeg));
    return out;
  };
  auto pivot_of = [&](const Pose& pose) {
    const auto hit = prims.intersect(pose.translation, pose.rotation * Eigen::Vector3d::UnitY());
    return std::clamp(hit ? hit->distance : 3.0, 0.5, 20.0);
  };

  RefineResult result;
  result.pose = init;
  result.score = objective(init);
  result.initial_score = result.score;

  double t_step = cfg.translation_step;
  double r_step = cfg.rotation_step_deg;
  int oblique_polls = 0;
  while (true) {
    if (t_step < cfg.min_translation_step && r_step < cfg.min_rotation_step_deg) {
      result.converged = true;
      break;
    }
    const Pose base = result.pose;
    const double pivot = pivot_of(base);
    bool exhausted = false;
    double best_score = result.score;
    std::optional<Pose> best_pose;
    auto poll = [&](const Eigen::Matrix<double, 6, 6>& basis) {
      for (int axis = 0; axis < 6 && !exhausted; ++axis) {
        for (double sign : {1.0, -1.0}) {
          if (result.evaluations >= cfg.max_evaluations) {
            exhausted = true;
            break;
          }
          std::array<double, 6> cand{};
          for (int d = 0; d < 6; ++d) cand[d] = sign * basis(d, axis) * (d < 3 ? t_step : r_step);
          const Pose pose = pose_at(base, pivot, cand);
          if (!in_bounds(pose.translation)) continue;
          const double s = objective(pose);
          ++result.evaluations;
          if (s > best_score) {
            best_score = s;
            best_pose = pose;
          }
        }
      }
    };
    poll(Eigen::Matrix<double, 6, 6>::Identity());
    // Before shrinking, try oblique directions; narrow ridges of the score
    // often run diagonal to every axis.
    if (!best_pose && !exhausted) poll(halton_basis(oblique_polls++));
    if (best_pose) {
      result.score = best_score;
      result.pose = *best_pose;
    } else if (!exhausted) {
      t_step *= cfg.shrink;
      r_step *= cfg.shrink;
    }
    if (exhausted) break;
  }
  return result;
}

RefineResult refine_pose(const PrimitiveSet& prims, const SemanticImage& query_sem,
                         const CameraIntrinsics& k, const Pose& init, const RefineConfig& cfg) {
  const RenderObjective obj(prims, query_sem, k, cfg.render_size, cfg.presence_threshold);
  return refine_pose(obj, init, cfg);
}

RefineResult iterate_refinement(const RefinementContext& ctx, const RenderObjective& objective,
                                const SemanticImage& query_sem, const CameraIntrinsics& k,
                                const Pose& estimate, int rounds) {
  RefineResult current;
  current.pose = estimate;
  current.score = objective(estimate);
  current.initial_score = current.score;
  current.converged = true;
  if (rounds <= 0) return current;

  const QueryEncoding q = encode_query(query_sem, k.hfov, ctx.matcher);
  for (int round = 0; round < rounds; ++round) {
    if (!point_room_lookup(*ctx.scene, current.pose.translation)) break;
    const RenderBundle pano =
        render_panorama(*ctx.prims, current.pose.translation, ctx.pano_width, ctx.pano_height);
    const PanoEncoding enc = encode_panorama(pano.semantic, current.pose.translation, ctx.matcher);
    const MatchResult m = polish_match(enc, q, match_viewport(enc, q, ctx.matcher), ctx.matcher);
    const Pose seed{m.rotation, current.pose.translation};
    RefineResult next = refine_pose(objective, seed, ctx.refine, ctx.anchor);
    // The re-seeded rotation can land on a symmetric twin of the room, so
    // the current rotation gets its own search as well.
    const RefineResult stay = refine_pose(objective, current.pose, ctx.refine, ctx.anchor);
    current.evaluations += next.evaluations + stay.evaluations;
    if (stay.score > next.score) next = stay;
    if (next.score > current.score) {
      current.pose = next.pose;
      current.score = next.score;
      current.converged = next.converged;
    }
  }
  return current;
}

}  // namespace panoloc
