#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <vector>

#include "hdt/geometry.hpp"

namespace hdt {

/// Inverted index driving class-aware sampling.
struct CategoryIndex {
  std::vector<LabelId> categories;                  // sorted, non-empty lists
  std::map<LabelId, std::vector<ImageId>> images_of;  // sorted, deduplicated
  std::map<LabelId, std::size_t> instance_counts;

  bool empty() const { return categories.empty(); }
};

/// Groups ground truths by label: images_of(L) lists each image containing
/// at least one L instance, instance_counts(L) counts L records.
CategoryIndex build_index(std::span<const GroundTruth> gts);

struct SamplerConfig {
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  // Stage-1 category draws are independent by default. Without replacement,
  // batch_size must not exceed the category count.
  bool with_replacement_categories = true;

  void validate() const;  // throws ConfigError
};

/// Unbiased draw from [0, n) consuming one or more engine outputs.
/// mersenne_twister_engine output is pinned by the language standard, and
/// this rejection step avoids the library-defined uniform_int_distribution,
/// so sequences reproduce exactly across compilers and platforms.
std::uint64_t bounded_uniform(std::mt19937_64& rng, std::uint64_t n);

/// One two-stage batch: draw batch_size categories uniformly, then one
/// image uniformly from each drawn category's list. Throws DataError on an
/// empty index, ConfigError on invalid cfg. `category_draws`, when given,
/// accumulates stage-1 counts indexed like idx.categories.
std::vector<ImageId> sample_batch(const CategoryIndex& idx,
                                  const SamplerConfig& cfg,
                                  std::mt19937_64& rng,
                                  std::vector<std::size_t>* category_draws = nullptr);

/// Owns the generator, so consecutive batches continue one pinned sequence.
class BatchSampler {
 public:
  BatchSampler(const CategoryIndex& idx, const SamplerConfig& cfg);

  std::vector<ImageId> next_batch();

  /// Stage-1 draw counts so far, indexed like idx.categories.
  const std::vector<std::size_t>& category_draws() const { return draws_; }

 private:
  const CategoryIndex& idx_;
  SamplerConfig cfg_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> draws_;
};

/// The analytic stage-1 target: 1/|categories| for every category.
/// Throws DataError on an empty index.
std::map<LabelId, double> expected_category_frequency(const CategoryIndex& idx);

/// Floor-to-one power curve for negative-region weights.
struct SoftWeightConfig {
  double w_min = 0.25;  // weight at zero overlap, in [0,1]
  double gamma = 1.0;   // curve exponent, > 0

  void validate() const;  // throws ConfigError
};

/// w_min + (1 - w_min) * max_overlap(candidate, gts)^gamma. Monotone
/// non-decreasing in the overlap; w_min at 0, exactly 1 at 1.
double soft_weight(const BBox& candidate, std::span<const BBox> gts,
                   const SoftWeightConfig& cfg);

/// Fixed-size crop window at one scale, in normalized coordinates.
struct Chip {
  double scale = 1.0;
  BBox window;
};

struct ChipPlan {
  ImageId image;
  std::vector<Chip> chips;
  // covered[g] lists indices into `chips` whose window contains gts[g].
  std::vector<std::vector<int>> covered;
};

struct ChipConfig {
  std::vector<double> scales;  // non-empty, all > 0
  int chip_px = 512;           // chip side length in scaled pixels
  double valid_lo_px = 32.0;   // valid range for a box's longer scaled side
  double valid_hi_px = 480.0;

  void validate() const;  // throws ConfigError
};

/// Plans positive chips: per scale, a gt is valid iff its longer side in
/// scaled pixels lies in [valid_lo_px, valid_hi_px]; candidate windows are
/// gt-centered chip_px/scale squares clamped into the image; windows are
/// picked greedily by most newly covered valid gts, ties by smaller
/// chip-center distance to the centroid of still-uncovered valid gt
/// centers. Every valid gt that fits inside a chip window ends up covered.
/// Throws DataError when a gt record names a different image or has an
/// invalid box, ConfigError on bad cfg or non-positive image dimensions.
ChipPlan plan_chips(const ImageId& image, std::span<const GroundTruth> gts,
                    ImageSize image_px, const ChipConfig& cfg);

/// Per-label instance counts, sorted by count descending then label.
std::vector<std::pair<LabelId, std::size_t>> imbalance_stats(
    std::span<const GroundTruth> gts);

struct ChiSquare {
  double statistic = 0.0;
  int degrees_of_freedom = 0;
  double p_value = 1.0;
};

/// Pearson goodness-of-fit of observed counts against the uniform
/// distribution over the same cells. Throws DataError on < 2 cells or a
/// zero total.
ChiSquare chi_square_uniform(std::span<const std::size_t> counts);

}  // namespace hdt
