#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "panoloc/evaluation.hpp"
#include "panoloc/primitives.hpp"
#include "panoloc/refiner.hpp"
#include "panoloc/render.hpp"
#include "panoloc/rng.hpp"

using namespace panoloc;
using namespace panoloc::testing;

namespace {

const CameraIntrinsics kQueryK{kPi / 2, 128, 128};

struct TwoRoom {
  Scene scene = two_room_scene();
  PrimitiveSet prims = scene_to_primitives(scene);
  Pose gt{rotation_from_ypr(-70 * kDeg, -4 * kDeg, 2 * kDeg), {7.2, 2.1, 1.5}};
  SemanticImage query = render_perspective(prims, gt, kQueryK).semantic;
  RenderObjective objective{prims, query, kQueryK};
};

// Box room seen toward a corner, which pins down every degree of freedom.
struct CornerView {
  Scene scene;
  PrimitiveSet prims;
  Pose gt;
  SemanticImage query;

  CornerView(double w, double l, const Eigen::Vector3d& pos, double yaw_jitter, double pitch, double roll,
             int corner) {
    scene = box_scene(w, l, 2.7);
    prims = scene_to_primitives(scene);
    const Eigen::Vector2d corners[4] = {{0, 0}, {w, 0}, {w, l}, {0, l}};
    const Eigen::Vector2d c = corners[corner];
    const double yaw = std::atan2(c.x() - pos.x(), c.y() - pos.y()) + yaw_jitter;
    gt = Pose{rotation_from_ypr(yaw, pitch, roll), pos};
    query = render_perspective(prims, gt, kQueryK).semantic;
  }
};

// Same triangles with every non-void class mapped through `perm`.
PrimitiveSet permuted(const PrimitiveSet& prims, const std::array<int, kNumClasses>& perm) {
  std::vector<Triangle> tris = prims.triangles();
  for (auto& t : tris) t.cls = static_cast<SemanticClass>(perm[static_cast<int>(t.cls)]);
  return PrimitiveSet(std::move(tris));
}

}  // namespace

TEST(Objective, GroundTruthScoresHigh) {
  TwoRoom f;
  EXPECT_GE(f.objective(f.gt), 0.99);
  EXPECT_DOUBLE_EQ(objective(f.prims, f.query, kQueryK, f.gt), f.objective(f.gt));
}

TEST(Objective, OppositeDirectionScoresLow) {
  TwoRoom f;
  const Pose flipped{f.gt.rotation * rotation_from_ypr(kPi, 0, 0), f.gt.translation};
  EXPECT_LT(f.objective(flipped), 0.5);
}

TEST(Objective, InvariantUnderClassPermutation) {
  TwoRoom f;
  const std::array<int, kNumClasses> perm{0, 3, 5, 1, 6, 2, 4};
  const PrimitiveSet p2 = permuted(f.prims, perm);
  SemanticImage q2 = f.query;
  for (auto& v : q2.data()) v = static_cast<std::uint8_t>(perm[v]);
  const RenderObjective o2(p2, q2, kQueryK);
  Rng rng(41);
  for (int i = 0; i < 20; ++i) {
    const Pose p{f.gt.rotation * rotation_from_ypr(rng.uniform(-0.5, 0.5), rng.uniform(-0.2, 0.2), 0),
                 f.gt.translation + Eigen::Vector3d(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 0)};
    EXPECT_DOUBLE_EQ(f.objective(p), o2(p));
  }
}

TEST(Objective, NoPresentClassesScoresZero) {
  TwoRoom f;
  const SemanticImage empty(kQueryK.width, kQueryK.height, 0);
  const RenderObjective o(f.prims, empty, kQueryK);
  EXPECT_TRUE(o.present().empty());
  EXPECT_EQ(o(f.gt), 0.0);
  EXPECT_THROW(RenderObjective(f.prims, SemanticImage(5, 5, 1), kQueryK), std::invalid_argument);
}

TEST(RefinePose, GroundTruthIsAFixedPoint) {
  TwoRoom f;
  const RefineResult r = refine_pose(f.objective, f.gt);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.pose.translation, f.gt.translation);
  EXPECT_EQ(r.pose.rotation.coeffs(), f.gt.rotation.coeffs());
  EXPECT_EQ(r.score, r.initial_score);
}

TEST(RefinePose, ZeroBudgetReturnsInit) {
  TwoRoom f;
  RefineConfig cfg;
  cfg.max_evaluations = 0;
  const Pose init{f.gt.rotation, f.gt.translation + Eigen::Vector3d(0.3, 0, 0)};
  const RefineResult r = refine_pose(f.objective, init, cfg);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.evaluations, 0);
  EXPECT_EQ(r.pose.translation, init.translation);
  EXPECT_EQ(r.pose.rotation.coeffs(), init.rotation.coeffs());
  EXPECT_EQ(r.score, f.objective(init));
}

TEST(RefinePose, BoxRoomRecoversOffset) {
  const CornerView v(5.0, 4.0, {1.8, 1.4, 1.5}, 8 * kDeg, -5 * kDeg, 3 * kDeg, 2);
  const RenderObjective obj(v.prims, v.query, kQueryK);
  const Pose init{v.gt.rotation * rotation_from_ypr(10 * kDeg, 0, 0),
                  v.gt.translation + Eigen::Vector3d(0.5, 0, 0)};
  const RefineResult r = refine_pose(obj, init);
  const PoseError e = pose_error(v.gt, r.pose);
  EXPECT_LT(e.terr_xyz_cm, 5.0);
  EXPECT_LT(e.rerr_3d_deg, 1.0);
  EXPECT_GT(r.score, r.initial_score);
}

TEST(RefinePose, MonotoneBudgetedAndBounded) {
  TwoRoom f;
  Rng rng(42);
  RefineConfig cfg;
  cfg.max_evaluations = 37;
  for (int i = 0; i < 20; ++i) {
    const Pose init{f.gt.rotation * rotation_from_ypr(rng.uniform(-0.3, 0.3), rng.uniform(-0.1, 0.1), 0),
                    f.gt.translation + Eigen::Vector3d(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), 0)};
    const RefineResult r = refine_pose(f.objective, init, i % 2 ? cfg : RefineConfig{});
    EXPECT_GE(r.score, r.initial_score);
    EXPECT_DOUBLE_EQ(r.initial_score, f.objective(init));
    EXPECT_DOUBLE_EQ(r.score, f.objective(r.pose));
    EXPECT_LE(r.evaluations, i % 2 ? 37 : 400);
    const Eigen::Vector3d d = (r.pose.translation - init.translation).cwiseAbs();
    EXPECT_LE(d.x(), 1.4 + 1e-9);
    EXPECT_LE(d.y(), 1.4 + 1e-9);
    EXPECT_LE(d.z(), 0.3 + 1e-9);
  }
}

TEST(RefinePose, Deterministic) {
  TwoRoom f;
  const Pose init{f.gt.rotation * rotation_from_ypr(0.15, 0, 0), f.gt.translation + Eigen::Vector3d(-0.4, 0.3, 0.1)};
  const RefineResult a = refine_pose(f.objective, init);
  const RefineResult b = refine_pose(f.prims, f.query, kQueryK, init);
  EXPECT_EQ(a.pose.translation, b.pose.translation);
  EXPECT_EQ(a.pose.rotation.coeffs(), b.pose.rotation.coeffs());
  EXPECT_EQ(a.score, b.score);
  EXPECT_EQ(a.evaluations, b.evaluations);
}

TEST(RefinePose, RejectsBadInput) {
  TwoRoom f;
  EXPECT_THROW(refine_pose(f.objective, Pose{f.gt.rotation, {50, 50, 1}}), std::invalid_argument);
  EXPECT_THROW(refine_pose(f.objective, f.gt, {}, Eigen::Vector3d(2.0, 1.5, 1.5)), std::invalid_argument);
  RefineConfig bad;
  bad.shrink = 1.0;
  EXPECT_THROW(refine_pose(f.objective, f.gt, bad), std::invalid_argument);
  bad = {};
  bad.translation_step = 0.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(IterateRefinement, ZeroRoundsAndGroundTruth) {
  TwoRoom f;
  RefinementContext ctx;
  ctx.scene = &f.scene;
  ctx.prims = &f.prims;
  const Pose est{f.gt.rotation, f.gt.translation + Eigen::Vector3d(0.4, 0.2, 0)};
  const RefineResult zero = iterate_refinement(ctx, f.objective, f.query, kQueryK, est, 0);
  EXPECT_EQ(zero.pose.translation, est.translation);
  EXPECT_EQ(zero.pose.rotation.coeffs(), est.rotation.coeffs());
  EXPECT_EQ(zero.evaluations, 0);

  const RefineResult at_gt = iterate_refinement(ctx, f.objective, f.query, kQueryK, f.gt, 2);
  EXPECT_EQ(at_gt.pose.translation, f.gt.translation);
  EXPECT_EQ(at_gt.pose.rotation.coeffs(), f.gt.rotation.coeffs());
}

TEST(IterateRefinement, ShrinksLargeOffsetsOnApartments) {
  Rng rng(43);
  int trials = 0, improved = 0;
  for (int s = 0; s < 5; ++s) {
    const Scene scene = generate_synthetic_scene(1000 + s);
    const PrimitiveSet prims = scene_to_primitives(scene);
    QueryConfig qc;
    qc.count = 20;
    const auto queries = sample_query_poses(scene, prims, qc, 2000 + s);
    RefinementContext ctx;
    ctx.scene = &scene;
    ctx.prims = &prims;
    for (const QuerySpec& q : queries) {
      const SemanticImage sem = render_perspective(prims, q.pose, kQueryK).semantic;
      const RenderObjective obj(prims, sem, kQueryK);
      // Horizontal 0.8 m offset that stays inside some room.
      Pose est = q.pose;
      for (int attempt = 0; attempt < 64; ++attempt) {
        const double a = rng.uniform(0, 2 * kPi);
        const Eigen::Vector3d t = q.pose.translation + 0.8 * Eigen::Vector3d(std::cos(a), std::sin(a), 0);
        if (point_room_lookup(scene, t)) {
          est.translation = t;
          break;
        }
      }
      ASSERT_NE(est.translation, q.pose.translation);
      ctx.anchor = est.translation;
      const RefineResult r = iterate_refinement(ctx, obj, sem, kQueryK, est, 1);
      EXPECT_GE(r.score, obj(est));
      ++trials;
      improved += pose_error(q.pose, r.pose).terr_xyz_cm < pose_error(q.pose, est).terr_xyz_cm;
    }
  }
  ASSERT_EQ(trials, 100);
  EXPECT_GE(improved, 90) << improved << " of " << trials << " improved";
}

// Property over the box-room family: sizes 3 to 8 m, offsets up to 0.6 m and
// 15 degrees, views aimed near a corner.
TEST(RefinePose, BoxFamilyRecovery) {
  Rng rng(44);
  int ok = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    const double w = rng.uniform(3, 8), l = rng.uniform(3, 8);
    const Eigen::Vector3d pos(rng.uniform(0.7, w - 0.7), rng.uniform(0.7, l - 0.7), rng.uniform(1.2, 1.8));
    const int corner = rng.uniform_int(0, 3);
    const double jitter = rng.uniform(-20, 20) * kDeg;
    const double pitch = rng.uniform(-10, 10) * kDeg, roll = rng.uniform(-10, 10) * kDeg;
    const CornerView v(w, l, pos, jitter, pitch, roll, corner);
    const RenderObjective obj(v.prims, v.query, kQueryK);
    const double a = rng.uniform(0, 2 * kPi), r = rng.uniform(0, 0.6);
    const Pose init{v.gt.rotation * rotation_from_ypr(rng.uniform(-15, 15) * kDeg, 0, 0),
                    v.gt.translation + Eigen::Vector3d(r * std::cos(a), r * std::sin(a), 0)};
    const PoseError e = pose_error(v.gt, refine_pose(obj, init).pose);
    ok += e.terr_xyz_cm < 5.0 && e.rerr_3d_deg < 1.0;
  }
  EXPECT_GE(ok, 190) << ok << " of " << trials << " recovered";
}
