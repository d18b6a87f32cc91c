#pragma once

#include <vector>

#include "panoloc/camera.hpp"
#include "panoloc/image.hpp"
#include "panoloc/scene.hpp"
#include "panoloc/viewport.hpp"

namespace panoloc {

// Soft one-hot class occupancy. One channel per non-void class (class id
// c lives in channel c - 1), stored cell-interleaved.
class ClassGrid {
 public:
  static constexpr int kChannels = kNumClasses - 1;

  ClassGrid() = default;
  ClassGrid(int width, int height)
      : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height * kChannels, 0.0f) {}

  int width() const { return width_; }
  int height() const { return height_; }

  float& at(int cls, int x, int y) { return data_[index(x, y) * kChannels + cls - 1]; }
  float at(int cls, int x, int y) const { return data_[index(x, y) * kChannels + cls - 1]; }
  const float* cell(std::size_t i) const { return data_.data() + i * kChannels; }
  const std::vector<float>& data() const { return data_; }

  bool operator==(const ClassGrid&) const = default;

 private:
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

// Area-weighted box filter into class fractions.
ClassGrid box_downsample(const SemanticImage& sem, int grid_width, int grid_height);

struct MatcherConfig {
  int pano_grid_width = 128;
  int pano_grid_height = 64;
  int query_grid = 32;
  double yaw_step_deg = 5.0;
  std::vector<double> pitch_deg{-10.0, 0.0, 10.0};
  std::vector<double> roll_deg{0.0};
  double presence_threshold = 0.01;  // fraction of query pixels
  // Continuous rotation search started from the best hypothesis of the
  // highest ranked references.
  int polish_count = 16;
  double polish_step_deg = 5.0;
  double polish_min_step_deg = 0.6;
};

struct PanoEncoding {
  ClassGrid grid;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  int pano_width = 0;
  int pano_height = 0;
};

struct QueryEncoding {
  ClassGrid grid;
  double hfov = 0.0;
  std::vector<int> present;  // class ids at or above the presence threshold
};

struct MatchResult {
  double score = 0.0;
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  CircularBBox bbox;
  int reference_index = 0;
  int hypothesis_index = 0;
};

// Throws std::invalid_argument unless width == 2 * height.
PanoEncoding encode_panorama(const SemanticImage& sem, const Eigen::Vector3d& position,
                             const MatcherConfig& cfg = {});
QueryEncoding encode_query(const SemanticImage& sem, double hfov, const MatcherConfig& cfg = {});

// Classes covering at least `threshold` of the pixels.
std::vector<int> present_classes(const SemanticImage& sem, double threshold);

// Yaw-major, then pitch, then roll. Throws std::invalid_argument when the
// yaw step does not divide 360 or a pitch is not inside (-90, 90).
std::vector<Eigen::Quaterniond> enumerate_hypotheses(const MatcherConfig& cfg);

// Bilinear lookup of the panorama grid along the n x n view rays of a camera
// rotated in place at the panorama center.
ClassGrid warp_pano_to_view(const PanoEncoding& enc, const Eigen::Quaterniond& rotation,
                            double hfov, int n);

// Class-balanced soft IoU over `present` (0/0 counts as 1). Zero when
// `present` is empty. Throws std::invalid_argument on shape mismatch.
double agreement(const ClassGrid& a, const ClassGrid& b, const std::vector<int>& present);

MatchResult match_viewport(const PanoEncoding& enc, const QueryEncoding& q,
                           const MatcherConfig& cfg = {}, int reference_index = 0);

// Same as calling match_viewport for each encoding, sharing the sampling
// tables across references. Hypothesis scores within 1e-6 count as ties and
// go to the earlier hypothesis.
std::vector<MatchResult> match_all(const std::vector<const PanoEncoding*>& encodings,
                                   const QueryEncoding& q, const MatcherConfig& cfg = {});

// Compass search over yaw, pitch and roll increments right-multiplied onto
// the matched rotation, halving the step when no axis improves. The score
// never decreases and the box follows the new rotation.
MatchResult polish_match(const PanoEncoding& enc, const QueryEncoding& q, const MatchResult& match,
                         const MatcherConfig& cfg = {});

// Polishes the polish_count best ranked results; the others are returned
// unchanged. Polished scores stay at or above every unpolished one, so the
// ranking keeps the polished entries in front.
std::vector<MatchResult> polish_matches(const std::vector<const PanoEncoding*>& encodings, const QueryEncoding& q,
                                        const std::vector<MatchResult>& results, const MatcherConfig& cfg = {});

// Positions into `results`, by descending score then ascending
// reference_index.
std::vector<int> rank_references(const std::vector<MatchResult>& results);

}  // namespace panoloc
