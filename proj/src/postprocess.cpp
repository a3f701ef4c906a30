#include "hdt/postprocess.hpp"

#include <algorithm>
#include <set>

#include "hdt/errors.hpp"

namespace hdt {

namespace {

// Greedy order and output order share this rule: score descending, then
// larger area, then lexicographic box, then label (groups are per label,
// so the label term only matters for the final cross-group sort).
bool score_order(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  const double aa = a.box.area(), ba = b.box.area();
  if (aa != ba) return aa > ba;
  if (a.box != b.box) return a.box < b.box;
  return a.label < b.label;
}

bool output_order(const Detection& a, const Detection& b) {
  if (a.label != b.label) return a.label < b.label;
  return score_order(a, b);
}

}  // namespace

void HnmsConfig::validate() const {
  if (!(nms_iou > 0.0 && nms_iou <= 1.0))
    throw ConfigError("nms_iou must be in (0,1]");
  if (!(vote_iou > 0.0 && vote_iou <= 1.0))
    throw ConfigError("vote_iou must be in (0,1]");
  if (vote_iou < nms_iou)
    throw ConfigError("vote_iou must be >= nms_iou");
  if (!(vote_fraction >= 0.0 && vote_fraction <= 1.0))
    throw ConfigError("vote_fraction must be in [0,1]");
  if (!(score_floor >= 0.0 && score_floor < 1.0))
    throw ConfigError("score_floor must be in [0,1)");
}

std::vector<Detection> nms_per_class(std::span<const Detection> dets,
                                     const HnmsConfig& cfg) {
  cfg.validate();
  if (dets.empty()) return {};
  for (const Detection& d : dets) {
    if (d.image != dets.front().image)
      throw DataError("nms_per_class requires a single image id, got \"" +
                      dets.front().image + "\" and \"" + d.image + "\"");
  }

  std::vector<Detection> sorted(dets.begin(), dets.end());
  std::sort(sorted.begin(), sorted.end(), [](const Detection& a, const Detection& b) {
    if (a.label != b.label) return a.label < b.label;
    return score_order(a, b);
  });

  std::vector<Detection> kept;
  kept.reserve(sorted.size());
  std::size_t group = 0;
  while (group < sorted.size()) {
    std::size_t end = group;
    while (end < sorted.size() && sorted[end].label == sorted[group].label) ++end;

    // Greedy pass over one label group. The order is fixed up front;
    // voting adjusts kept scores but never re-sorts.
    std::vector<bool> removed(end - group, false);
    for (std::size_t i = group; i < end; ++i) {
      if (removed[i - group]) continue;
      Detection keep = sorted[i];
      for (std::size_t j = i + 1; j < end; ++j) {
        if (removed[j - group]) continue;
        const double o = iou(keep.box, sorted[j].box);
        if (o >= cfg.nms_iou) {
          removed[j - group] = true;
          if (o >= cfg.vote_iou)
            keep.score += cfg.vote_fraction * sorted[j].score;
        }
      }
      if (cfg.clamp_scores) keep.score = std::min(keep.score, 1.0);
      if (keep.score >= cfg.score_floor) kept.push_back(keep);
    }
    group = end;
  }

  std::sort(kept.begin(), kept.end(), output_order);
  return kept;
}

std::vector<Detection> hnms(const LabelHierarchy& h,
                            std::span<const Detection> dets,
                            const HnmsConfig& cfg,
                            const std::unordered_set<LabelId>* evaluated) {
  return nms_per_class(expand_detections(h, dets, evaluated), cfg);
}

std::vector<Detection> fuse_ensemble(
    const LabelHierarchy& h, const EnsembleInput& inp, const HnmsConfig& cfg,
    const std::optional<std::map<std::string, double>>& run_weights,
    const std::unordered_set<LabelId>* evaluated) {
  cfg.validate();
  std::set<std::string> ids;
  for (const EnsembleRun& run : inp.runs) {
    if (!ids.insert(run.id).second)
      throw ConfigError("duplicate ensemble run id: " + run.id);
  }
  if (run_weights) {
    for (const auto& [id, w] : *run_weights) {
      if (!ids.count(id)) throw ConfigError("weight for unknown run id: " + id);
      if (!(w > 0.0 && w <= 1.0))
        throw ConfigError("run weight must be in (0,1]: " + id);
    }
    for (const std::string& id : ids) {
      if (!run_weights->count(id))
        throw ConfigError("missing weight for run id: " + id);
    }
  }

  // Expansion (and its exact-duplicate merge) happens per run: duplicates
  // inside one run are data noise, but the same record arriving from two
  // runs is agreement and must survive to the voting pass.
  std::map<ImageId, std::vector<Detection>> by_image;
  for (const EnsembleRun& run : inp.runs) {
    const double w = run_weights ? run_weights->at(run.id) : 1.0;
    std::vector<Detection> weighted = run.dets;
    for (Detection& d : weighted) d.score *= w;
    for (Detection& d : expand_detections(h, weighted, evaluated))
      by_image[d.image].push_back(std::move(d));
  }

  std::vector<Detection> out;
  for (const auto& [image, dets] : by_image) {
    std::vector<Detection> fused = nms_per_class(dets, cfg);
    out.insert(out.end(), fused.begin(), fused.end());
  }
  return out;
}

}  // namespace hdt
