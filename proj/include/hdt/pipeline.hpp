#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <unordered_set>
#include <vector>

#include "hdt/geometry.hpp"
#include "hdt/hierarchy.hpp"
#include "hdt/postprocess.hpp"

namespace hdt::pipeline {

/// One prediction CSV with the score multiplier applied on read.
struct WeightedInput {
  std::filesystem::path path;
  double weight = 1.0;
};

struct HnmsPipelineConfig {
  HnmsConfig hnms;
  std::optional<std::unordered_set<LabelId>> evaluated;
  bool skip_unknown = false;  // drop records with labels missing from the
                              // hierarchy instead of failing
  // Spill threshold for the external sort; bounds resident memory at
  // roughly this many records plus one image's group.
  std::size_t sort_chunk_records = 200000;
  std::filesystem::path temp_dir;  // empty: system temp directory
};

struct PipelineSummary {
  std::size_t input_records = 0;
  std::size_t skipped_unknown = 0;
  std::size_t clamped_scores = 0;
  std::size_t images = 0;
  std::size_t expanded_records = 0;
  std::size_t kept_records = 0;
  std::size_t sort_runs = 0;  // spilled run files (0 when input fit in core)
};

/// Streams one or more prediction CSVs through per-image hierarchical NMS
/// and writes one output CSV ordered by image, label, score descending.
/// Input order within an image is preserved into the NMS stage, images are
/// brought together by an external sort, and memory stays bounded by
/// sort_chunk_records regardless of input size. Each input expands on its
/// own, so identical records from different runs stay distinct into the
/// voting pass. A single input with weight 1.0 is exactly plain per-image
/// hnms.
PipelineSummary run_hnms_pipeline(const LabelHierarchy& h,
                                  const std::vector<WeightedInput>& inputs,
                                  const std::filesystem::path& output,
                                  const HnmsPipelineConfig& cfg);

/// Streams one prediction CSV through hierarchy expansion, first-occurrence
/// deduplication, and straight back out; record order follows the input.
PipelineSummary run_expand_pipeline(const LabelHierarchy& h,
                                    const std::filesystem::path& input,
                                    const std::filesystem::path& output,
                                    const HnmsPipelineConfig& cfg);

}  // namespace hdt::pipeline
