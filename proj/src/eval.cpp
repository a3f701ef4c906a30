#include "hdt/eval.hpp"

#include <algorithm>
#include <unordered_set>

#include "hdt/errors.hpp"

namespace hdt {

namespace {

std::string gt_key(const GroundTruth& gt) {
  std::string key;
  key.reserve(gt.image.size() + gt.label.size() + 2 + 4 * sizeof(double));
  key += gt.image;
  key += '\0';
  key += gt.label;
  key += '\0';
  const double values[4] = {gt.box.xmin + 0.0, gt.box.ymin + 0.0,
                            gt.box.xmax + 0.0, gt.box.ymax + 0.0};
  key.append(reinterpret_cast<const char*>(values), sizeof(values));
  return key;
}

}  // namespace

std::vector<GroundTruth> expand_ground_truth(
    const LabelHierarchy& h, std::span<const GroundTruth> gts,
    const std::unordered_set<LabelId>* evaluated) {
  std::vector<GroundTruth> out;
  out.reserve(gts.size());
  std::unordered_set<std::string> seen;
  for (const GroundTruth& gt : gts) {
    for (const LabelId& label : h.expansion_of(gt.label)) {
      if (h.is_synthetic_root(label) && label != gt.label) continue;
      if (evaluated && !evaluated->count(label)) continue;
      GroundTruth rec{gt.image, label, gt.box};
      if (seen.insert(gt_key(rec)).second) out.push_back(std::move(rec));
    }
  }
  return out;
}

MatchResult match_detections(std::span<const Detection> dets,
                             std::span<const GroundTruth> gts,
                             double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0))
    throw ConfigError("iou_threshold must be in (0,1]");

  struct Bucket {
    std::vector<const Detection*> dets;
    std::vector<const GroundTruth*> gts;
  };
  std::map<std::pair<ImageId, LabelId>, Bucket> buckets;
  for (const Detection& d : dets) buckets[{d.image, d.label}].dets.push_back(&d);
  for (const GroundTruth& g : gts) buckets[{g.image, g.label}].gts.push_back(&g);

  MatchResult result;
  for (const GroundTruth& g : gts) {
    // Ensure classes present only in ground truth still get a gt_count.
    ++result.per_class[g.label].gt_count;
  }
  for (const Detection& d : dets) result.per_class[d.label];

  for (auto& [key, bucket] : buckets) {
    std::sort(bucket.dets.begin(), bucket.dets.end(),
              [](const Detection* a, const Detection* b) {
                if (a->score != b->score) return a->score > b->score;
                return a->box < b->box;
              });
    std::sort(bucket.gts.begin(), bucket.gts.end(),
              [](const GroundTruth* a, const GroundTruth* b) {
                return a->box < b->box;
              });
    std::vector<bool> taken(bucket.gts.size(), false);
    ClassMatches& cls = result.per_class[key.second];
    for (const Detection* d : bucket.dets) {
      int best = -1;
      double best_iou = 0.0;
      for (std::size_t g = 0; g < bucket.gts.size(); ++g) {
        if (taken[g]) continue;
        const double o = iou(d->box, bucket.gts[g]->box);
        if (o >= iou_threshold && (best < 0 || o > best_iou)) {
          best = static_cast<int>(g);
          best_iou = o;
        }
      }
      if (best >= 0) taken[best] = true;
      cls.scored.emplace_back(d->score, best >= 0);
    }
  }
  return result;
}

double average_precision(std::vector<std::pair<double, bool>> scored,
                         std::size_t gt_count, ApInterpolation interp) {
  if (gt_count == 0) return 0.0;
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second > b.second;  // true positives first on score ties
  });

  const double total = static_cast<double>(gt_count);
  std::vector<double> recall(scored.size()), precision(scored.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (scored[i].second) ++tp;
    recall[i] = static_cast<double>(tp) / total;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }

  // Interpolated precision: max precision at recall >= r.
  std::vector<double> suffix_max(precision);
  for (std::size_t i = suffix_max.size(); i-- > 1;)
    suffix_max[i - 1] = std::max(suffix_max[i - 1], suffix_max[i]);

  if (interp == ApInterpolation::ElevenPoint) {
    double sum = 0.0;
    for (int k = 0; k <= 10; ++k) {
      const double r = static_cast<double>(k) / 10.0;
      double p = 0.0;
      for (std::size_t i = 0; i < recall.size(); ++i) {
        if (recall[i] >= r - 1e-12) {
          p = suffix_max[i];
          break;
        }
      }
      sum += p;
    }
    return sum / 11.0;
  }

  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (recall[i] > prev_recall) {
      ap += (recall[i] - prev_recall) * suffix_max[i];
      prev_recall = recall[i];
    }
  }
  return ap;
}

EvalReport hierarchical_map(const LabelHierarchy& h,
                            std::span<const Detection> dets,
                            std::span<const GroundTruth> gts,
                            const EvalOptions& opts) {
  const std::unordered_set<LabelId>* evaluated =
      opts.evaluated ? &*opts.evaluated : nullptr;

  const std::vector<GroundTruth> expanded_gts =
      expand_ground_truth(h, gts, evaluated);

  std::vector<Detection> expanded_dets;
  if (opts.expand_detections) {
    expanded_dets = expand_detections(h, dets, evaluated);
  } else {
    expanded_dets.reserve(dets.size());
    for (const Detection& d : dets) {
      if (!h.contains(d.label)) throw UnknownLabelError(d.label);
      if (evaluated && !evaluated->count(d.label)) continue;
      expanded_dets.push_back(d);
    }
  }

  const MatchResult matches =
      match_detections(expanded_dets, expanded_gts, opts.iou_threshold);

  EvalReport report;
  double sum = 0.0;
  for (const auto& [label, cls] : matches.per_class) {
    if (cls.gt_count == 0) {
      ++report.detection_only_classes;
      continue;
    }
    const double ap =
        average_precision(cls.scored, cls.gt_count, opts.interpolation);
    report.per_class_ap[label] = ap;
    report.gt_counts[label] = cls.gt_count;
    sum += ap;
  }
  if (!report.per_class_ap.empty())
    report.mean_ap = sum / static_cast<double>(report.per_class_ap.size());
  return report;
}

}  // namespace hdt
