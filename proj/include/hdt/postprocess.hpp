#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hdt/geometry.hpp"
#include "hdt/hierarchy.hpp"

namespace hdt {

/// Per-class NMS parameters with score voting.
struct HnmsConfig {
  double nms_iou = 0.5;        // suppression threshold, in (0,1]
  double vote_iou = 0.9;       // voting threshold, >= nms_iou
  double vote_fraction = 0.3;  // share of a suppressed score added to keeper
  double score_floor = 0.0;    // kept records below this are dropped
  bool clamp_scores = true;    // clamp voted scores at 1.0

  /// Throws ConfigError when any field is out of range.
  void validate() const;
};

/// Greedy per-label NMS over one image's detections. Within each label
/// group, descending-score order; a kept box removes every later box at
/// iou >= nms_iou and collects vote_fraction of each removed score when
/// that iou >= vote_iou. Voting never reorders the pass. Ties break by
/// larger area, then lexicographic box coordinates. Output is sorted by
/// label, then score descending (same tie rule).
/// Throws DataError when detections span multiple image ids.
std::vector<Detection> nms_per_class(std::span<const Detection> dets,
                                     const HnmsConfig& cfg);

/// expand_detections followed by nms_per_class; one image's records.
std::vector<Detection> hnms(const LabelHierarchy& h,
                            std::span<const Detection> dets,
                            const HnmsConfig& cfg,
                            const std::unordered_set<LabelId>* evaluated = nullptr);

/// One model's (or one test scale's) output over a shared image set.
struct EnsembleRun {
  std::string id;
  std::vector<Detection> dets;
};

struct EnsembleInput {
  std::vector<EnsembleRun> runs;  // ids unique
};

/// Scales each run's scores by its weight (default 1.0), hierarchy-expands
/// each run on its own, concatenates, and applies per-class NMS per image.
/// Expanding per run keeps identical records from different runs distinct,
/// so agreement between runs feeds the voting pass; one run at weight 1 is
/// identical to plain hnms. Output is ordered by image, then label, then
/// score descending.
/// Throws ConfigError on duplicate run ids, weights naming unknown runs,
/// missing weights, or weights outside (0,1].
std::vector<Detection> fuse_ensemble(
    const LabelHierarchy& h, const EnsembleInput& inp, const HnmsConfig& cfg,
    const std::optional<std::map<std::string, double>>& run_weights = {},
    const std::unordered_set<LabelId>* evaluated = nullptr);

}  // namespace hdt
