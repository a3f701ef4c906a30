#pragma once

#include <algorithm>
#include <compare>
#include <span>
#include <string>

namespace hdt {

using LabelId = std::string;
using ImageId = std::string;

/// Axis-aligned box in normalized image coordinates ([0,1] on both axes).
struct BBox {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() * height(); }

  bool valid() const {
    return 0.0 <= xmin && xmin <= xmax && xmax <= 1.0 && 0.0 <= ymin &&
           ymin <= ymax && ymax <= 1.0;
  }

  /// True when `inner` lies fully inside this box (within eps per edge).
  bool contains(const BBox& inner, double eps = 1e-9) const {
    return inner.xmin >= xmin - eps && inner.xmax <= xmax + eps &&
           inner.ymin >= ymin - eps && inner.ymax <= ymax + eps;
  }

  // Lexicographic on (xmin, ymin, xmax, ymax); used for deterministic ties.
  friend auto operator<=>(const BBox&, const BBox&) = default;
};

/// Intersection-over-union. Total on valid boxes; 0 when the union is empty.
inline double iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
  const double ih = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  // Rounding can nudge inter past uni for near-identical boxes; the true
  // ratio never exceeds 1.
  return uni > 0.0 ? std::min(inter / uni, 1.0) : 0.0;
}

/// Max IoU of `b` against any box in `gts`; 0 for an empty list.
inline double max_overlap(const BBox& b, std::span<const BBox> gts) {
  double best = 0.0;
  for (const BBox& g : gts) best = std::max(best, iou(b, g));
  return best;
}

/// Pixel dimensions of a source image.
struct ImageSize {
  int width = 0;
  int height = 0;
};

/// One scored prediction record; the unit of all post-processing.
struct Detection {
  ImageId image;
  LabelId label;
  double score = 0.0;
  BBox box;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// One annotation record; the unit of sampling and evaluation.
struct GroundTruth {
  ImageId image;
  LabelId label;
  BBox box;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

}  // namespace hdt
