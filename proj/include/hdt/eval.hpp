#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hdt/geometry.hpp"
#include "hdt/hierarchy.hpp"

namespace hdt {

/// Matching outcome for one class: scored detections flagged true/false
/// positive, plus how many ground truths the class has.
struct ClassMatches {
  std::vector<std::pair<double, bool>> scored;  // (score, is_true_positive)
  std::size_t gt_count = 0;
};

struct MatchResult {
  std::map<LabelId, ClassMatches> per_class;
};

/// Same expansion as expand_detections, on annotation records: each gt is
/// replaced by itself plus one copy per ancestor label; exact duplicates
/// (image, label, box) merge to one record.
std::vector<GroundTruth> expand_ground_truth(
    const LabelHierarchy& h, std::span<const GroundTruth> gts,
    const std::unordered_set<LabelId>* evaluated = nullptr);

/// Greedy one-to-one matching per (image, class): detections in score
/// order, each taking the highest-IoU unmatched gt at iou >= threshold.
/// Classes that appear only in detections get gt_count 0.
/// Throws ConfigError unless iou_threshold is in (0,1].
MatchResult match_detections(std::span<const Detection> dets,
                             std::span<const GroundTruth> gts,
                             double iou_threshold);

enum class ApInterpolation {
  AllPoint,     // area under the interpolated precision-recall staircase
  ElevenPoint,  // mean of interpolated precision at recall 0.0, 0.1, .. 1.0
};

/// Average precision of one class. Input order is irrelevant (sorted by
/// score descending, true positives first on ties). 0 when gt_count is 0.
double average_precision(std::vector<std::pair<double, bool>> scored,
                         std::size_t gt_count,
                         ApInterpolation interp = ApInterpolation::AllPoint);

struct EvalOptions {
  double iou_threshold = 0.5;
  // Ground truths are always hierarchy-expanded; whether detection records
  // are expanded too (or the caller already submitted expanded records) is
  // the caller's choice.
  bool expand_detections = true;
  ApInterpolation interpolation = ApInterpolation::AllPoint;
  // When set, only these labels are scored; expansion skips other labels
  // and detection/gt records outside the set are dropped.
  std::optional<std::unordered_set<LabelId>> evaluated;
};

struct EvalReport {
  // Exactly the classes with >= 1 (expanded) ground truth.
  std::map<LabelId, double> per_class_ap;
  std::map<LabelId, std::size_t> gt_counts;
  double mean_ap = 0.0;  // arithmetic mean of per_class_ap values; 0 if none
  std::size_t detection_only_classes = 0;  // classes seen only in detections
};

/// Expands both sides, matches per class, and averages per-class AP.
EvalReport hierarchical_map(const LabelHierarchy& h,
                            std::span<const Detection> dets,
                            std::span<const GroundTruth> gts,
                            const EvalOptions& opts = {});

}  // namespace hdt
