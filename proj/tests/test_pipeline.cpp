#include <gtest/gtest.h>
#include <omp.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "fixtures.hpp"
#include "panoloc/evaluation.hpp"
#include "panoloc/pipeline.hpp"
#include "panoloc/primitives.hpp"
#include "panoloc/render.hpp"

using namespace panoloc;
using namespace panoloc::testing;

namespace {

const CameraIntrinsics kQueryK{kPi / 2, 128, 128};

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("panoloc_test_pipeline_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

struct TwoRoomRefs {
  std::shared_ptr<const Scene> scene = std::make_shared<const Scene>(two_room_scene());
  std::shared_ptr<const PrimitiveSet> prims = std::make_shared<const PrimitiveSet>(scene_to_primitives(*scene));
  ReferenceSet refs = build_reference_set(scene, prims, sample_reference_positions(*scene, GridConfig{}));

  SemanticImage query(const Pose& pose) const { return render_perspective(*prims, pose, kQueryK).semantic; }
};

std::set<std::pair<long, long>> rounded_xy(const std::vector<Eigen::Vector3d>& pts) {
  std::set<std::pair<long, long>> out;
  for (const auto& p : pts) out.emplace(std::lround(p.x() * 1000), std::lround(p.y() * 1000));
  return out;
}

}  // namespace

TEST(ReferencePositions, GlobalGridExample) {
  const Scene s = box_scene(6.0, 4.0);
  const auto pts = sample_reference_positions(s, GridConfig{1.2, GridMode::kGlobal, 1.5});
  ASSERT_EQ(pts.size(), 15u);
  std::set<std::pair<long, long>> expected;
  for (double x : {0.6, 1.8, 3.0, 4.2, 5.4})
    for (double y : {0.6, 1.8, 3.0}) expected.emplace(std::lround(x * 1000), std::lround(y * 1000));
  EXPECT_EQ(rounded_xy(pts), expected);
  for (const auto& p : pts) {
    EXPECT_NEAR(p.z(), 1.5, 1e-12);
    EXPECT_TRUE(point_room_lookup(s, p).has_value());
  }
  // Row-major: x varies fastest.
  EXPECT_NEAR(pts[0].x(), 0.6, 1e-9);
  EXPECT_NEAR(pts[1].x(), 1.8, 1e-9);
  EXPECT_NEAR(pts[0].y(), pts[1].y(), 1e-12);
}

TEST(ReferencePositions, LocalModeCentersAndAddsDoorways) {
  const Scene s = two_room_scene();
  const auto pts = sample_reference_positions(s, GridConfig{20.0, GridMode::kLocal, 1.5});
  const auto grid = sample_grid_positions(s, GridConfig{20.0, GridMode::kLocal, 1.5});
  ASSERT_EQ(grid.size(), 2u);
  EXPECT_LT((grid[0] - Eigen::Vector3d(2.0, 1.5, 1.5)).norm(), 1e-9);
  EXPECT_LT((grid[1] - Eigen::Vector3d(7.0, 2.5, 1.5)).norm(), 1e-9);
  // Two room centers, and the shared door seen from each side.
  ASSERT_EQ(pts.size(), 4u);
  std::set<std::pair<long, long>> expected{{2000, 1500}, {7000, 2500}, {3900, 1450}, {4100, 1450}};
  EXPECT_EQ(rounded_xy(pts), expected);
  for (const auto& p : pts) EXPECT_TRUE(point_room_lookup(s, p).has_value());
}

TEST(ReferencePositions, NoDuplicatesAndInsideRooms) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Scene s = generate_synthetic_scene(seed);
    for (GridMode mode : {GridMode::kGlobal, GridMode::kLocal}) {
      const auto pts = sample_reference_positions(s, GridConfig{1.2, mode, 1.5});
      ASSERT_FALSE(pts.empty());
      for (std::size_t i = 0; i < pts.size(); ++i) {
        EXPECT_TRUE(point_room_lookup(s, pts[i]).has_value());
        for (std::size_t j = i + 1; j < pts.size(); ++j) EXPECT_GE((pts[i] - pts[j]).norm(), 0.01);
      }
      if (mode == GridMode::kLocal) {
        std::set<int> covered;
        for (const auto& p : pts) covered.insert(*point_room_lookup(s, p));
        EXPECT_EQ(covered.size(), s.rooms.size());
      }
    }
  }
}

TEST(ReferencePositions, HalvingSpacingQuadruplesLargeRooms) {
  SyntheticSceneParams params;
  params.min_room_size = 7.2;
  params.max_room_size = 10.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Scene s = generate_synthetic_scene(seed, params);
    const auto coarse = sample_grid_positions(s, GridConfig{2.4, GridMode::kLocal, 1.5});
    const auto fine = sample_grid_positions(s, GridConfig{1.2, GridMode::kLocal, 1.5});
    const double ratio = static_cast<double>(fine.size()) / coarse.size();
    EXPECT_GE(ratio, 3.2) << "seed " << seed;
    EXPECT_LE(ratio, 4.8) << "seed " << seed;
  }
}

TEST(ReferenceSet, BuildsCachesAndMatchesRecomputation) {
  auto scene = std::make_shared<const Scene>(box_scene(6.0, 4.0));
  auto prims = std::make_shared<const PrimitiveSet>(scene_to_primitives(*scene));
  const auto pts = sample_reference_positions(*scene, GridConfig{1.2, GridMode::kGlobal, 1.5});
  const auto dir = temp_dir("cache");
  ReferenceCache cache(dir.string());
  const ReferenceSet a = build_reference_set(scene, prims, pts, 128, 64, {}, {}, &cache);
  ASSERT_EQ(a.size(), 15u);
  EXPECT_EQ(cache.render_count(), 15u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Reference& r = *a.references[i];
    EXPECT_EQ(class_histogram(r.bundle.semantic)[0], 0u);
    const RenderBundle again = render_panorama(*prims, pts[i], 128, 64);
    EXPECT_EQ(r.bundle.semantic, again.semantic);
    const PanoEncoding enc = encode_panorama(again.semantic, pts[i]);
    EXPECT_EQ(r.encoding.grid, enc.grid);
    EXPECT_EQ(r.encoding.position, enc.position);
  }

  const ReferenceSet b = build_reference_set(scene, prims, pts, 128, 64, {}, {}, &cache);
  EXPECT_EQ(cache.render_count(), 15u);
  EXPECT_EQ(cache.memory_hits(), 15u);
  EXPECT_EQ(b.references[3], a.references[3]);

  ReferenceCache fresh(dir.string());
  const ReferenceSet c = build_reference_set(scene, prims, pts, 128, 64, {}, {}, &fresh);
  EXPECT_EQ(fresh.render_count(), 0u);
  EXPECT_EQ(fresh.disk_hits(), 15u);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(c.references[i]->bundle.semantic, a.references[i]->bundle.semantic);
    EXPECT_EQ(c.references[i]->encoding.grid, a.references[i]->encoding.grid);
  }
  int meta_files = 0, sem_files = 0;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    meta_files += entry.path().filename() == "meta.json";
    sem_files += entry.path().string().ends_with(".sem.png");
  }
  EXPECT_EQ(meta_files, 1);
  EXPECT_EQ(sem_files, 15);

  // A different panorama size is a different key.
  ReferenceCache other(dir.string());
  build_reference_set(scene, prims, pts, 64, 32, {}, {}, &other);
  EXPECT_EQ(other.render_count(), 15u);
  std::filesystem::remove_all(dir);
}

TEST(ReferenceSet, RejectsPositionOutsideRooms) {
  auto scene = std::make_shared<const Scene>(box_scene());
  auto prims = std::make_shared<const PrimitiveSet>(scene_to_primitives(*scene));
  EXPECT_THROW(build_reference_set(scene, prims, {Eigen::Vector3d(9, 9, 1.5)}), std::invalid_argument);
}

TEST(Localize, SelfLocalization) {
  TwoRoomRefs f;
  const Eigen::Vector3d at = f.refs.references[2]->position;
  const Pose gt{rotation_from_ypr(35 * kDeg, 10 * kDeg, 0), at};
  const LocalizationResult r = localize(f.refs, f.query(gt), kQueryK);
  const PoseError e = pose_error(gt, r.selected);
  EXPECT_LT(e.terr_xyz_cm, 2.0);
  EXPECT_LT(e.rerr_3d_deg, 0.5);
}

TEST(Localize, TwoRoomTopReferenceInTheRightRoom) {
  TwoRoomRefs f;
  const Pose gt{rotation_from_ypr(-120 * kDeg, -3 * kDeg, 2 * kDeg), {7.6, 3.1, 1.45}};
  const LocalizationResult r = localize(f.refs, f.query(gt), kQueryK);
  ASSERT_FALSE(r.candidates.empty());
  const auto room = point_room_lookup(*f.refs.scene, f.refs.references[r.candidates.front().reference_index]->position);
  ASSERT_TRUE(room.has_value());
  EXPECT_EQ(*room, 1);
}

TEST(Localize, SingleCandidateContract) {
  TwoRoomRefs f;
  LocalizeConfig cfg;
  cfg.top_n = 1;
  cfg.refine_rounds = 0;
  const LocalizationResult r =
      localize(f.refs, f.query(Pose{rotation_from_ypr(20 * kDeg, 0, 0), {2.5, 1.2, 1.5}}), kQueryK, cfg);
  ASSERT_EQ(r.candidates.size(), 1u);
  EXPECT_EQ(r.refinement_rounds, 0);
  EXPECT_EQ(r.selected.translation, r.candidates[0].pose.translation);
  EXPECT_EQ(r.selected.rotation.coeffs(), r.candidates[0].pose.rotation.coeffs());
  EXPECT_EQ(r.selected_score, r.candidates[0].score);
}

TEST(Localize, Errors) {
  TwoRoomRefs f;
  ReferenceSet empty = f.refs;
  empty.references.clear();
  const SemanticImage q = f.query(Pose{Eigen::Quaterniond::Identity(), {2, 1.5, 1.5}});
  EXPECT_THROW(localize(empty, q, kQueryK), std::invalid_argument);
  EXPECT_THROW(localize(f.refs, SemanticImage(128, 128, 0), kQueryK), std::invalid_argument);
}

TEST(Localize, RoundsBoundsAndOrdering) {
  TwoRoomRefs f;
  const std::vector<Pose> queries{
      Pose{rotation_from_ypr(80 * kDeg, 4 * kDeg, -3 * kDeg), {1.3, 0.9, 1.35}},
      Pose{rotation_from_ypr(-160 * kDeg, -8 * kDeg, 5 * kDeg), {8.7, 4.1, 1.7}},
      Pose{rotation_from_ypr(10 * kDeg, 0, 0), {5.1, 0.8, 1.25}},
  };
  for (const Pose& gt : queries) {
    const SemanticImage q = f.query(gt);
    LocalizeConfig none;
    none.refine_rounds = 0;
    const LocalizationResult r0 = localize(f.refs, q, kQueryK, none);
    const LocalizationResult r1 = localize(f.refs, q, kQueryK);
    EXPECT_GE(r1.selected_score, r0.selected_score);
    EXPECT_EQ(r1.initial_score, r0.selected_score);
    EXPECT_EQ(r1.initial_selected.translation, r0.selected.translation);
    ASSERT_EQ(r1.candidates.size(), 3u);
    for (std::size_t i = 1; i < r1.candidates.size(); ++i)
      EXPECT_GE(r1.candidates[i - 1].score, r1.candidates[i].score);
    for (const Candidate& c : r1.candidates) EXPECT_GE(c.score, c.initial_score);
    bool within = false;
    for (const Candidate& c : r1.candidates) {
      const Eigen::Vector3d d = (r1.selected.translation - f.refs.references[c.reference_index]->position).cwiseAbs();
      within |= d.x() <= 1.4 + 1e-9 && d.y() <= 1.4 + 1e-9 && d.z() <= 0.3 + 1e-9;
    }
    EXPECT_TRUE(within);
  }
}

TEST(Localize, IndependentOfThreadCount) {
  TwoRoomRefs f;
  const SemanticImage q = f.query(Pose{rotation_from_ypr(-45 * kDeg, 5 * kDeg, 0), {6.2, 3.3, 1.5}});
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const LocalizationResult a = localize(f.refs, q, kQueryK);
  omp_set_num_threads(4);
  const LocalizationResult b = localize(f.refs, q, kQueryK);
  omp_set_num_threads(saved);
  EXPECT_EQ(to_json(a, f.refs).dump(), to_json(b, f.refs).dump());
  EXPECT_EQ(a.selected.translation, b.selected.translation);
}

TEST(PoseJson, RoundTrip) {
  const Pose p{rotation_from_ypr(0.3, -0.1, 0.05), {1.25, -3.5, 1.5}};
  const nlohmann::json j = pose_to_json(p);
  ASSERT_EQ(j.at("q").size(), 4u);
  ASSERT_EQ(j.at("t").size(), 3u);
  EXPECT_DOUBLE_EQ(j.at("q")[0].get<double>(), canonical(p.rotation).w());
  const Pose back = pose_from_json(j);
  EXPECT_LT((back.translation - p.translation).norm(), 1e-15);
  EXPECT_LT(rotation_angle_deg(back.rotation, p.rotation), 1e-9);
  EXPECT_THROW(pose_from_json(nlohmann::json{{"q", {1, 0, 0}}, {"t", {0, 0, 0}}}), std::exception);
}
