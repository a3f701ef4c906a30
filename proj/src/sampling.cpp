#include "hdt/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <boost/math/distributions/chi_squared.hpp>

#include "hdt/errors.hpp"

namespace hdt {

CategoryIndex build_index(std::span<const GroundTruth> gts) {
  CategoryIndex idx;
  std::map<LabelId, std::set<ImageId>> images;
  for (const GroundTruth& gt : gts) {
    images[gt.label].insert(gt.image);
    ++idx.instance_counts[gt.label];
  }
  for (auto& [label, set] : images) {
    idx.categories.push_back(label);
    idx.images_of[label].assign(set.begin(), set.end());
  }
  return idx;
}

void SamplerConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
}

std::uint64_t bounded_uniform(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) throw ConfigError("bounded_uniform range must be >= 1");
  if (n == 1) return 0;
  // Accept only the top region whose size is a multiple of n; -n mod n
  // equals 2^64 mod n in wrapping arithmetic.
  const std::uint64_t min_accept = (0 - n) % n;
  std::uint64_t x = rng();
  while (x < min_accept) x = rng();
  return x % n;
}

std::vector<ImageId> sample_batch(const CategoryIndex& idx,
                                  const SamplerConfig& cfg,
                                  std::mt19937_64& rng,
                                  std::vector<std::size_t>* category_draws) {
  cfg.validate();
  if (idx.empty()) throw DataError("cannot sample from an empty index");
  const std::size_t n = idx.categories.size();
  if (!cfg.with_replacement_categories && cfg.batch_size > n)
    throw ConfigError("batch_size exceeds category count without replacement");
  if (category_draws && category_draws->size() != n)
    category_draws->assign(n, 0);

  std::vector<std::size_t> picks;
  picks.reserve(cfg.batch_size);
  if (cfg.with_replacement_categories) {
    for (std::size_t i = 0; i < cfg.batch_size; ++i)
      picks.push_back(static_cast<std::size_t>(bounded_uniform(rng, n)));
  } else {
    // Partial Fisher-Yates over category indices.
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t i = 0; i < cfg.batch_size; ++i) {
      const std::size_t j =
          i + static_cast<std::size_t>(bounded_uniform(rng, n - i));
      std::swap(pool[i], pool[j]);
      picks.push_back(pool[i]);
    }
  }

  std::vector<ImageId> batch;
  batch.reserve(cfg.batch_size);
  for (const std::size_t c : picks) {
    if (category_draws) ++(*category_draws)[c];
    const auto& images = idx.images_of.at(idx.categories[c]);
    batch.push_back(images[bounded_uniform(rng, images.size())]);
  }
  return batch;
}

BatchSampler::BatchSampler(const CategoryIndex& idx, const SamplerConfig& cfg)
    : idx_(idx), cfg_(cfg), rng_(cfg.seed), draws_(idx.categories.size(), 0) {
  cfg_.validate();
  if (idx_.empty()) throw DataError("cannot sample from an empty index");
}

std::vector<ImageId> BatchSampler::next_batch() {
  return sample_batch(idx_, cfg_, rng_, &draws_);
}

std::map<LabelId, double> expected_category_frequency(const CategoryIndex& idx) {
  if (idx.empty()) throw DataError("expected frequency of an empty index");
  std::map<LabelId, double> out;
  const double p = 1.0 / static_cast<double>(idx.categories.size());
  for (const LabelId& c : idx.categories) out[c] = p;
  return out;
}

void SoftWeightConfig::validate() const {
  if (!(w_min >= 0.0 && w_min <= 1.0))
    throw ConfigError("w_min must be in [0,1]");
  if (!(gamma > 0.0)) throw ConfigError("gamma must be > 0");
}

double soft_weight(const BBox& candidate, std::span<const BBox> gts,
                   const SoftWeightConfig& cfg) {
  cfg.validate();
  const double o = max_overlap(candidate, gts);
  if (o >= 1.0) return 1.0;  // exact ceiling regardless of gamma rounding
  return cfg.w_min + (1.0 - cfg.w_min) * std::pow(o, cfg.gamma);
}

void ChipConfig::validate() const {
  if (scales.empty()) throw ConfigError("scales must be non-empty");
  for (const double s : scales) {
    if (!(s > 0.0)) throw ConfigError("scales must be positive");
  }
  if (chip_px < 1) throw ConfigError("chip_px must be >= 1");
  if (!(valid_lo_px >= 0.0 && valid_lo_px < valid_hi_px))
    throw ConfigError("valid pixel range must satisfy 0 <= lo < hi");
}

ChipPlan plan_chips(const ImageId& image, std::span<const GroundTruth> gts,
                    ImageSize image_px, const ChipConfig& cfg) {
  cfg.validate();
  if (image_px.width < 1 || image_px.height < 1)
    throw ConfigError("image dimensions must be positive");
  for (const GroundTruth& gt : gts) {
    if (gt.image != image)
      throw DataError("chip planning got a record for image \"" + gt.image +
                      "\" while planning \"" + image + "\"");
    if (!gt.box.valid()) throw DataError("invalid ground-truth box");
  }

  ChipPlan plan;
  plan.image = image;
  plan.covered.assign(gts.size(), {});

  const double w_px = image_px.width, h_px = image_px.height;
  for (const double scale : cfg.scales) {
    // Window size in normalized coordinates; a chip never exceeds the image.
    const double side_px = static_cast<double>(cfg.chip_px) / scale;
    const double win_w = std::min(1.0, side_px / w_px);
    const double win_h = std::min(1.0, side_px / h_px);

    std::vector<std::size_t> valid;
    std::vector<BBox> candidates;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const BBox& b = gts[g].box;
      const double longer = std::max(b.width() * w_px, b.height() * h_px) * scale;
      if (longer < cfg.valid_lo_px || longer > cfg.valid_hi_px) continue;
      if (b.width() > win_w || b.height() > win_h) continue;  // cannot fit
      valid.push_back(g);
      const double x0 = std::clamp((b.xmin + b.xmax - win_w) / 2.0, 0.0, 1.0 - win_w);
      const double y0 = std::clamp((b.ymin + b.ymax - win_h) / 2.0, 0.0, 1.0 - win_h);
      // Rounding in x0 + win_w can poke past 1.0 by an ulp; keep windows
      // inside the image exactly.
      candidates.push_back(BBox{x0, y0, std::min(x0 + win_w, 1.0),
                                std::min(y0 + win_h, 1.0)});
    }

    // Greedy max-new-coverage over gt-anchored candidates.
    std::vector<bool> covered_here(valid.size(), false);
    std::size_t remaining = valid.size();
    while (remaining > 0) {
      double cx = 0.0, cy = 0.0;
      for (std::size_t v = 0; v < valid.size(); ++v) {
        if (covered_here[v]) continue;
        const BBox& b = gts[valid[v]].box;
        cx += (b.xmin + b.xmax) / 2.0;
        cy += (b.ymin + b.ymax) / 2.0;
      }
      cx /= static_cast<double>(remaining);
      cy /= static_cast<double>(remaining);

      int best = -1;
      std::size_t best_gain = 0;
      double best_dist = 0.0;
      for (std::size_t c = 0; c < candidates.size(); ++c) {
        std::size_t gain = 0;
        for (std::size_t v = 0; v < valid.size(); ++v) {
          if (!covered_here[v] && candidates[c].contains(gts[valid[v]].box))
            ++gain;
        }
        if (gain == 0) continue;
        const double dx = (candidates[c].xmin + candidates[c].xmax) / 2.0 - cx;
        const double dy = (candidates[c].ymin + candidates[c].ymax) / 2.0 - cy;
        const double dist = dx * dx + dy * dy;
        bool better;
        if (best < 0) {
          better = true;
        } else if (gain != best_gain) {
          better = gain > best_gain;
        } else if (dist != best_dist) {
          better = dist < best_dist;
        } else {
          better = candidates[c] < candidates[best];
        }
        if (better) {
          best = static_cast<int>(c);
          best_gain = gain;
          best_dist = dist;
        }
      }
      // Every valid gt fits, so its own candidate always has gain >= 1.
      plan.chips.push_back(Chip{scale, candidates[best]});
      for (std::size_t v = 0; v < valid.size(); ++v) {
        if (!covered_here[v] && candidates[best].contains(gts[valid[v]].box)) {
          covered_here[v] = true;
          --remaining;
        }
      }
    }
  }

  for (std::size_t g = 0; g < gts.size(); ++g) {
    for (std::size_t c = 0; c < plan.chips.size(); ++c) {
      if (plan.chips[c].window.contains(gts[g].box))
        plan.covered[g].push_back(static_cast<int>(c));
    }
  }
  return plan;
}

std::vector<std::pair<LabelId, std::size_t>> imbalance_stats(
    std::span<const GroundTruth> gts) {
  std::map<LabelId, std::size_t> counts;
  for (const GroundTruth& gt : gts) ++counts[gt.label];
  std::vector<std::pair<LabelId, std::size_t>> out(counts.begin(), counts.end());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

ChiSquare chi_square_uniform(std::span<const std::size_t> counts) {
  if (counts.size() < 2)
    throw DataError("chi-square needs at least 2 cells");
  std::size_t total = 0;
  for (const std::size_t c : counts) total += c;
  if (total == 0) throw DataError("chi-square needs a non-zero total");

  const double expected =
      static_cast<double>(total) / static_cast<double>(counts.size());
  ChiSquare result;
  for (const std::size_t c : counts) {
    const double d = static_cast<double>(c) - expected;
    result.statistic += d * d / expected;
  }
  result.degrees_of_freedom = static_cast<int>(counts.size()) - 1;
  const boost::math::chi_squared dist(result.degrees_of_freedom);
  result.p_value = boost::math::cdf(boost::math::complement(dist, result.statistic));
  return result;
}

}  // namespace hdt
