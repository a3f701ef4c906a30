#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "hdt/geometry.hpp"

namespace hdt::io {

/// Splits one CSV line; double quotes guard embedded commas, "" unescapes.
std::vector<std::string> split_csv_line(std::string_view line);

/// Quotes a field when it needs quoting.
std::string csv_escape(std::string_view field);

/// Fixed 6-decimal rendering used for all coordinates and scores.
std::string format_value(double v);

/// Header-mapped row reader over a stream. Rows must match the header width.
class CsvReader {
 public:
  CsvReader(std::istream& in, std::string source_name);

  const std::vector<std::string>& header() const { return header_; }
  int column(const std::string& name) const;          // -1 when absent
  int require_column(const std::string& name) const;  // throws ParseError

  /// Reads the next non-empty row; returns false at end of input.
  bool next(std::vector<std::string>& fields);

  /// 1-based line number of the row most recently returned.
  std::size_t line_number() const { return line_; }
  const std::string& source() const { return source_; }

 private:
  std::istream& in_;
  std::string source_;
  std::vector<std::string> header_;
  std::size_t line_ = 0;
};

/// Per-file bookkeeping the CLI reports.
struct ReadCounters {
  std::size_t records = 0;
  std::size_t clamped_scores = 0;  // scores pulled back into [0,1]
  std::size_t extra_columns = 0;   // header columns ignored
};

/// Column positions for `ImageID,LabelName,Score,XMin,XMax,YMin,YMax`.
struct PredictionColumns {
  int image, label, score, xmin, xmax, ymin, ymax;
  static PredictionColumns resolve(const CsvReader& reader,
                                   ReadCounters* counters = nullptr);
};

/// Column positions for `ImageID,LabelName,XMin,XMax,YMin,YMax`.
struct GroundTruthColumns {
  int image, label, xmin, xmax, ymin, ymax;
  static GroundTruthColumns resolve(const CsvReader& reader,
                                    ReadCounters* counters = nullptr);
};

Detection parse_prediction_row(const std::vector<std::string>& fields,
                               const PredictionColumns& cols,
                               const CsvReader& reader,
                               ReadCounters* counters = nullptr);

GroundTruth parse_ground_truth_row(const std::vector<std::string>& fields,
                                   const GroundTruthColumns& cols,
                                   const CsvReader& reader);

std::vector<Detection> read_predictions(const std::filesystem::path& path,
                                        ReadCounters* counters = nullptr);
std::vector<GroundTruth> read_ground_truth(const std::filesystem::path& path,
                                           ReadCounters* counters = nullptr);

void write_predictions(std::ostream& out, std::span<const Detection> dets);
void write_predictions(const std::filesystem::path& path,
                       std::span<const Detection> dets);

/// `ImageID,Width,Height` records with positive integer dimensions.
std::map<ImageId, ImageSize> read_image_sizes(const std::filesystem::path& path);

/// One label per line; blank lines skipped.
std::unordered_set<LabelId> read_label_set(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace hdt::io
