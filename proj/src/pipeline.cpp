#include "hdt/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <random>
#include <string>

#include "hdt/csv.hpp"
#include "hdt/errors.hpp"

namespace hdt::pipeline {

namespace {

namespace fs = std::filesystem;

// External-sort record: a detection plus its global input position, which
// keeps the merge stable per image, and the run it came from, which keeps
// expansion per run.
struct SortRecord {
  Detection det;
  std::uint64_t seq = 0;
  std::uint32_t run = 0;
};

bool sort_order(const SortRecord& a, const SortRecord& b) {
  if (a.det.image != b.det.image) return a.det.image < b.det.image;
  return a.seq < b.seq;
}

void write_string(std::ostream& out, const std::string& s) {
  const std::uint32_t len = static_cast<std::uint32_t>(s.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

bool read_string(std::istream& in, std::string& s) {
  std::uint32_t len = 0;
  if (!in.read(reinterpret_cast<char*>(&len), sizeof(len))) return false;
  s.resize(len);
  if (len > 0 && !in.read(s.data(), len))
    throw DataError("truncated sort run file");
  return true;
}

void write_record(std::ostream& out, const SortRecord& r) {
  write_string(out, r.det.image);
  write_string(out, r.det.label);
  const double nums[5] = {r.det.score, r.det.box.xmin, r.det.box.ymin,
                          r.det.box.xmax, r.det.box.ymax};
  out.write(reinterpret_cast<const char*>(nums), sizeof(nums));
  out.write(reinterpret_cast<const char*>(&r.seq), sizeof(r.seq));
  out.write(reinterpret_cast<const char*>(&r.run), sizeof(r.run));
}

bool read_record(std::istream& in, SortRecord& r) {
  if (!read_string(in, r.det.image)) return false;
  if (!read_string(in, r.det.label))
    throw DataError("truncated sort run file");
  double nums[5];
  if (!in.read(reinterpret_cast<char*>(nums), sizeof(nums)) ||
      !in.read(reinterpret_cast<char*>(&r.seq), sizeof(r.seq)) ||
      !in.read(reinterpret_cast<char*>(&r.run), sizeof(r.run)))
    throw DataError("truncated sort run file");
  r.det.score = nums[0];
  r.det.box = BBox{nums[1], nums[2], nums[3], nums[4]};
  return true;
}

// Owns the spilled run files; removes them and their directory on exit.
class RunStore {
 public:
  explicit RunStore(fs::path base) {
    std::mt19937_64 rng{std::random_device{}()};
    if (base.empty()) base = fs::temp_directory_path();
    dir_ = base / ("hdt-sort-" + std::to_string(rng()));
    fs::create_directories(dir_);
  }
  ~RunStore() {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }

  void spill(std::vector<SortRecord>& chunk) {
    std::sort(chunk.begin(), chunk.end(), sort_order);
    const fs::path path = dir_ / ("run-" + std::to_string(paths_.size()));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot create sort run file: " + path.string());
    for (const SortRecord& r : chunk) write_record(out, r);
    out.flush();
    if (!out) throw DataError("failed writing sort run file: " + path.string());
    paths_.push_back(path);
    chunk.clear();
  }

  const std::vector<fs::path>& paths() const { return paths_; }

 private:
  fs::path dir_;
  std::vector<fs::path> paths_;
};

// Merges sorted run files and an in-core sorted tail into one ordered
// stream of records.
class MergeSource {
 public:
  MergeSource(const std::vector<fs::path>& runs, std::vector<SortRecord> tail)
      : tail_(std::move(tail)) {
    std::sort(tail_.begin(), tail_.end(), sort_order);
    for (const fs::path& p : runs) {
      auto in = std::make_unique<std::ifstream>(p, std::ios::binary);
      if (!*in) throw DataError("cannot reopen sort run file: " + p.string());
      files_.push_back(std::move(in));
    }
    heads_.resize(files_.size());
    for (std::size_t i = 0; i < files_.size(); ++i) {
      SortRecord r;
      if (read_record(*files_[i], r)) {
        heads_[i] = std::move(r);
        heap_.push(i);
      }
    }
  }

  bool next(SortRecord& out) {
    const bool tail_ok = tail_pos_ < tail_.size();
    if (heap_.empty() && !tail_ok) return false;
    if (heap_.empty() ||
        (tail_ok && sort_order(tail_[tail_pos_], *heads_[heap_.top()]))) {
      out = std::move(tail_[tail_pos_++]);
      return true;
    }
    const std::size_t i = heap_.top();
    heap_.pop();
    out = std::move(*heads_[i]);
    SortRecord r;
    if (read_record(*files_[i], r)) {
      heads_[i] = std::move(r);
      heap_.push(i);
    } else {
      heads_[i].reset();
    }
    return true;
  }

 private:
  struct HeapOrder {
    MergeSource* src;
    bool operator()(std::size_t a, std::size_t b) const {
      // priority_queue keeps the largest on top; invert for a min-heap.
      // Tie on equal keys falls back to run index so order is total.
      const SortRecord& ra = *src->heads_[a];
      const SortRecord& rb = *src->heads_[b];
      if (sort_order(rb, ra)) return true;
      if (sort_order(ra, rb)) return false;
      return a > b;
    }
  };

  std::vector<std::unique_ptr<std::ifstream>> files_;
  std::vector<std::optional<SortRecord>> heads_;
  std::vector<SortRecord> tail_;
  std::size_t tail_pos_ = 0;
  std::priority_queue<std::size_t, std::vector<std::size_t>, HeapOrder> heap_{
      HeapOrder{this}};
};

// Reads every input in order, applying weights and the unknown-label
// policy; hands each surviving record to `sink`.
template <typename Sink>
void read_inputs(const LabelHierarchy& h,
                 const std::vector<WeightedInput>& inputs,
                 const HnmsPipelineConfig& cfg, PipelineSummary& summary,
                 Sink&& sink) {
  for (std::size_t run = 0; run < inputs.size(); ++run) {
    const WeightedInput& input = inputs[run];
    std::ifstream in(input.path);
    if (!in) throw DataError("cannot open file: " + input.path.string());
    io::CsvReader reader(in, input.path.string());
    io::ReadCounters counters;
    const auto cols = io::PredictionColumns::resolve(reader, &counters);
    std::vector<std::string> fields;
    while (reader.next(fields)) {
      Detection det = io::parse_prediction_row(fields, cols, reader, &counters);
      ++summary.input_records;
      if (!h.contains(det.label)) {
        if (cfg.skip_unknown) {
          ++summary.skipped_unknown;
          continue;
        }
        throw ParseError(reader.source(), reader.line_number(),
                         "unknown label: " + det.label);
      }
      det.score *= input.weight;
      sink(std::move(det), static_cast<std::uint32_t>(run));
    }
    summary.clamped_scores += counters.clamped_scores;
  }
}

class OutputWriter {
 public:
  explicit OutputWriter(const fs::path& path) : out_(path), path_(path) {
    if (!out_) throw DataError("cannot create file: " + path.string());
    out_ << "ImageID,LabelName,Score,XMin,XMax,YMin,YMax\n";
  }

  void write(const Detection& d) {
    out_ << io::csv_escape(d.image) << ',' << io::csv_escape(d.label) << ','
         << io::format_value(d.score) << ',' << io::format_value(d.box.xmin)
         << ',' << io::format_value(d.box.xmax) << ','
         << io::format_value(d.box.ymin) << ','
         << io::format_value(d.box.ymax) << '\n';
  }

  void finish() {
    out_.flush();
    if (!out_) throw DataError("failed writing file: " + path_.string());
  }

 private:
  std::ofstream out_;
  fs::path path_;
};

}  // namespace

PipelineSummary run_hnms_pipeline(const LabelHierarchy& h,
                                  const std::vector<WeightedInput>& inputs,
                                  const fs::path& output,
                                  const HnmsPipelineConfig& cfg) {
  cfg.hnms.validate();
  for (const WeightedInput& input : inputs) {
    if (!(input.weight > 0.0 && input.weight <= 1.0))
      throw ConfigError("run weight must be in (0,1]: " + input.path.string());
  }
  const std::size_t chunk_limit = std::max<std::size_t>(1, cfg.sort_chunk_records);
  const std::unordered_set<LabelId>* evaluated =
      cfg.evaluated ? &*cfg.evaluated : nullptr;

  PipelineSummary summary;
  RunStore runs(cfg.temp_dir);
  std::vector<SortRecord> chunk;
  chunk.reserve(std::min<std::size_t>(chunk_limit, 1 << 20));
  std::uint64_t seq = 0;
  read_inputs(h, inputs, cfg, summary, [&](Detection&& det, std::uint32_t run) {
    chunk.push_back(SortRecord{std::move(det), seq++, run});
    if (chunk.size() >= chunk_limit) runs.spill(chunk);
  });
  summary.sort_runs = runs.paths().size();

  OutputWriter writer(output);
  MergeSource merged(runs.paths(), std::move(chunk));

  std::vector<SortRecord> group;
  const auto flush = [&] {
    if (group.empty()) return;
    // Expansion (and its exact-duplicate merge) stays per run: identical
    // records from different runs are agreement and must reach the voting
    // pass. Within an image the merge keeps runs contiguous.
    std::vector<Detection> expanded;
    std::vector<Detection> segment;
    for (std::size_t i = 0; i < group.size();) {
      std::size_t j = i;
      while (j < group.size() && group[j].run == group[i].run) ++j;
      segment.clear();
      for (std::size_t k = i; k < j; ++k)
        segment.push_back(std::move(group[k].det));
      for (Detection& d : expand_detections(h, segment, evaluated))
        expanded.push_back(std::move(d));
      i = j;
    }
    summary.expanded_records += expanded.size();
    for (const Detection& d : nms_per_class(expanded, cfg.hnms)) {
      writer.write(d);
      ++summary.kept_records;
    }
    ++summary.images;
    group.clear();
  };

  SortRecord rec;
  while (merged.next(rec)) {
    if (!group.empty() && group.back().det.image != rec.det.image) flush();
    group.push_back(std::move(rec));
  }
  flush();
  writer.finish();
  return summary;
}

PipelineSummary run_expand_pipeline(const LabelHierarchy& h,
                                    const fs::path& input,
                                    const fs::path& output,
                                    const HnmsPipelineConfig& cfg) {
  const std::unordered_set<LabelId>* evaluated =
      cfg.evaluated ? &*cfg.evaluated : nullptr;

  PipelineSummary summary;
  OutputWriter writer(output);
  // Row-at-a-time expansion with a global first-occurrence filter matches
  // expand_detections over the whole file.
  std::unordered_set<std::string> seen;
  read_inputs(h, {{input, 1.0}}, cfg, summary, [&](Detection&& det, std::uint32_t) {
    const Detection base[1] = {std::move(det)};
    for (const Detection& d : expand_detections(h, base, evaluated)) {
      std::string key;
      key.reserve(d.image.size() + d.label.size() + 2 + 5 * sizeof(double));
      key += d.image;
      key += '\0';
      key += d.label;
      key += '\0';
      const double nums[5] = {d.box.xmin + 0.0, d.box.ymin + 0.0,
                              d.box.xmax + 0.0, d.box.ymax + 0.0, d.score + 0.0};
      key.append(reinterpret_cast<const char*>(nums), sizeof(nums));
      if (seen.insert(std::move(key)).second) {
        writer.write(d);
        ++summary.expanded_records;
        ++summary.kept_records;
      }
    }
  });
  writer.finish();
  return summary;
}

}  // namespace hdt::pipeline
