#include "hdt/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "hdt/errors.hpp"

namespace hdt::io {

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n") == std::string_view::npos)
    return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

CsvReader::CsvReader(std::istream& in, std::string source_name)
    : in_(in), source_(std::move(source_name)) {
  std::string line;
  if (!std::getline(in_, line))
    throw ParseError(source_, 1, "missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  header_ = split_csv_line(line);
  line_ = 1;
}

int CsvReader::column(const std::string& name) const {
  for (std::size_t i = 0; i < header_.size(); ++i)
    if (header_[i] == name) return static_cast<int>(i);
  return -1;
}

int CsvReader::require_column(const std::string& name) const {
  const int idx = column(name);
  if (idx < 0)
    throw ParseError(source_, 1, "missing required column: " + name);
  return idx;
}

bool CsvReader::next(std::vector<std::string>& fields) {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fields = split_csv_line(line);
    if (fields.size() != header_.size())
      throw ParseError(source_, line_,
                       "expected " + std::to_string(header_.size()) +
                           " fields, got " + std::to_string(fields.size()));
    return true;
  }
  return false;
}

namespace {

double parse_field_double(const std::string& field, const CsvReader& reader,
                          const char* what) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end || !std::isfinite(value))
    throw ParseError(reader.source(), reader.line_number(),
                     std::string("bad ") + what + " value: '" + field + "'");
  return value;
}

double parse_coordinate(const std::string& field, const CsvReader& reader,
                        const char* what) {
  double v = parse_field_double(field, reader, what);
  // Tolerate tiny round-trip drift, reject anything truly out of range.
  constexpr double slack = 1e-6;
  if (v < -slack || v > 1.0 + slack)
    throw ParseError(reader.source(), reader.line_number(),
                     std::string(what) + " outside [0,1]: '" + field + "'");
  return std::clamp(v, 0.0, 1.0);
}

BBox parse_box(const std::vector<std::string>& fields, int xmin, int xmax,
               int ymin, int ymax, const CsvReader& reader) {
  BBox box;
  box.xmin = parse_coordinate(fields[xmin], reader, "XMin");
  box.xmax = parse_coordinate(fields[xmax], reader, "XMax");
  box.ymin = parse_coordinate(fields[ymin], reader, "YMin");
  box.ymax = parse_coordinate(fields[ymax], reader, "YMax");
  if (box.xmin > box.xmax || box.ymin > box.ymax)
    throw ParseError(reader.source(), reader.line_number(),
                     "box min exceeds max");
  return box;
}

void check_record_fields(const std::vector<std::string>& fields, int image,
                         int label, const CsvReader& reader) {
  if (fields[image].empty())
    throw ParseError(reader.source(), reader.line_number(), "empty ImageID");
  if (fields[label].empty())
    throw ParseError(reader.source(), reader.line_number(), "empty LabelName");
}

}  // namespace

PredictionColumns PredictionColumns::resolve(const CsvReader& reader,
                                             ReadCounters* counters) {
  PredictionColumns cols{};
  cols.image = reader.require_column("ImageID");
  cols.label = reader.require_column("LabelName");
  cols.score = reader.require_column("Score");
  cols.xmin = reader.require_column("XMin");
  cols.xmax = reader.require_column("XMax");
  cols.ymin = reader.require_column("YMin");
  cols.ymax = reader.require_column("YMax");
  if (counters) counters->extra_columns += reader.header().size() - 7;
  return cols;
}

GroundTruthColumns GroundTruthColumns::resolve(const CsvReader& reader,
                                               ReadCounters* counters) {
  GroundTruthColumns cols{};
  cols.image = reader.require_column("ImageID");
  cols.label = reader.require_column("LabelName");
  cols.xmin = reader.require_column("XMin");
  cols.xmax = reader.require_column("XMax");
  cols.ymin = reader.require_column("YMin");
  cols.ymax = reader.require_column("YMax");
  if (counters) counters->extra_columns += reader.header().size() - 6;
  return cols;
}

Detection parse_prediction_row(const std::vector<std::string>& fields,
                               const PredictionColumns& cols,
                               const CsvReader& reader,
                               ReadCounters* counters) {
  check_record_fields(fields, cols.image, cols.label, reader);
  Detection det;
  det.image = fields[cols.image];
  det.label = fields[cols.label];
  det.score = parse_field_double(fields[cols.score], reader, "Score");
  if (det.score < 0.0 || det.score > 1.0) {
    det.score = std::clamp(det.score, 0.0, 1.0);
    if (counters) ++counters->clamped_scores;
  }
  det.box = parse_box(fields, cols.xmin, cols.xmax, cols.ymin, cols.ymax, reader);
  if (counters) ++counters->records;
  return det;
}

GroundTruth parse_ground_truth_row(const std::vector<std::string>& fields,
                                   const GroundTruthColumns& cols,
                                   const CsvReader& reader) {
  check_record_fields(fields, cols.image, cols.label, reader);
  GroundTruth gt;
  gt.image = fields[cols.image];
  gt.label = fields[cols.label];
  gt.box = parse_box(fields, cols.xmin, cols.xmax, cols.ymin, cols.ymax, reader);
  return gt;
}

std::vector<Detection> read_predictions(const std::filesystem::path& path,
                                        ReadCounters* counters) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path.string());
  CsvReader reader(in, path.string());
  const auto cols = PredictionColumns::resolve(reader, counters);
  std::vector<Detection> out;
  std::vector<std::string> fields;
  while (reader.next(fields))
    out.push_back(parse_prediction_row(fields, cols, reader, counters));
  return out;
}

std::vector<GroundTruth> read_ground_truth(const std::filesystem::path& path,
                                           ReadCounters* counters) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path.string());
  CsvReader reader(in, path.string());
  const auto cols = GroundTruthColumns::resolve(reader, counters);
  std::vector<GroundTruth> out;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    out.push_back(parse_ground_truth_row(fields, cols, reader));
    if (counters) ++counters->records;
  }
  return out;
}

void write_predictions(std::ostream& out, std::span<const Detection> dets) {
  out << "ImageID,LabelName,Score,XMin,XMax,YMin,YMax\n";
  for (const Detection& d : dets) {
    out << csv_escape(d.image) << ',' << csv_escape(d.label) << ','
        << format_value(d.score) << ',' << format_value(d.box.xmin) << ','
        << format_value(d.box.xmax) << ',' << format_value(d.box.ymin) << ','
        << format_value(d.box.ymax) << '\n';
  }
}

void write_predictions(const std::filesystem::path& path,
                       std::span<const Detection> dets) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open file for writing: " + path.string());
  write_predictions(out, dets);
}

std::map<ImageId, ImageSize> read_image_sizes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path.string());
  CsvReader reader(in, path.string());
  const int image = reader.require_column("ImageID");
  const int width = reader.require_column("Width");
  const int height = reader.require_column("Height");
  std::map<ImageId, ImageSize> sizes;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    const double w = parse_field_double(fields[width], reader, "Width");
    const double h = parse_field_double(fields[height], reader, "Height");
    if (w < 1.0 || h < 1.0 || w != std::floor(w) || h != std::floor(h))
      throw ParseError(reader.source(), reader.line_number(),
                       "image dimensions must be positive integers");
    sizes[fields[image]] = ImageSize{static_cast<int>(w), static_cast<int>(h)};
  }
  return sizes;
}

std::unordered_set<LabelId> read_label_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::unordered_set<LabelId> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) labels.insert(line);
  }
  return labels;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace hdt::io
