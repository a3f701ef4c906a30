// hdt: detection-record toolkit over annotation/prediction CSVs.
// Subcommands: hnms, ensemble, eval, sample, chips, stats, expand.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hdt/csv.hpp"
#include "hdt/errors.hpp"
#include "hdt/eval.hpp"
#include "hdt/hierarchy.hpp"
#include "hdt/pipeline.hpp"
#include "hdt/postprocess.hpp"
#include "hdt/sampling.hpp"

namespace {

using namespace hdt;

struct HierarchyOpts {
  std::string hierarchy;
  std::string synthetic_root;
  std::string names;
  std::string evaluated;
  bool skip_unknown = false;
};

void add_hierarchy_options(CLI::App* sub, HierarchyOpts& o,
                           bool with_names = false) {
  sub->add_option("--hierarchy", o.hierarchy, "Hierarchy document (JSON)")
      ->required();
  sub->add_option("--synthetic-root", o.synthetic_root,
                  "Label of a container-only root; kept out of expansions");
  if (with_names)
    sub->add_option("--names", o.names, "LabelName,DisplayName CSV");
  sub->add_option("--evaluated", o.evaluated,
                  "File with one label per line; restricts output labels");
  sub->add_flag("--skip-unknown", o.skip_unknown,
                "Skip records whose label is not in the hierarchy");
}

LabelHierarchy load_hierarchy(const HierarchyOpts& o) {
  HierarchyParseOptions popts;
  if (!o.synthetic_root.empty()) popts.synthetic_root = o.synthetic_root;
  LabelHierarchy h =
      LabelHierarchy::parse(io::read_text_file(o.hierarchy), popts, o.hierarchy);
  if (!o.names.empty())
    h.load_display_names(io::read_text_file(o.names), o.names);
  return h;
}

std::optional<std::unordered_set<LabelId>> load_evaluated(const HierarchyOpts& o) {
  if (o.evaluated.empty()) return std::nullopt;
  return io::read_label_set(o.evaluated);
}

void add_hnms_options(CLI::App* sub, HnmsConfig& cfg, bool& no_clamp) {
  sub->add_option("--nms-iou", cfg.nms_iou, "Suppression IoU threshold")
      ->capture_default_str();
  sub->add_option("--vote-iou", cfg.vote_iou,
                  "Score-voting IoU threshold (>= --nms-iou)")
      ->capture_default_str();
  sub->add_option("--vote-fraction", cfg.vote_fraction,
                  "Share of a suppressed score added to the keeper")
      ->capture_default_str();
  sub->add_option("--score-floor", cfg.score_floor,
                  "Drop kept records with final score below this")
      ->capture_default_str();
  sub->add_flag("--no-clamp-scores", no_clamp, "Let voted scores exceed 1.0");
}

void add_config_file(CLI::App* sub) {
  // The value is consumed before CLI11 parsing; see inject_config.
  sub->add_option("--config", "Flat key=value file; flags given on the "
                              "command line take precedence");
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Expands `--config FILE` into ordinary `--key=value` tokens placed right
// after the subcommand name, skipping keys that already appear on the
// command line, so explicit flags win and unknown keys fail parsing.
std::vector<std::string> inject_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      break;
    }
    if (args[i].starts_with("--config=")) {
      path = args[i].substr(9);
      break;
    }
  }
  if (path.empty()) return args;

  std::size_t sub_pos = args.size();
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (!args[i].starts_with("-")) {
      sub_pos = i;
      break;
    }
  }
  if (sub_pos == args.size()) return args;  // no subcommand; parsing will fail

  std::string text;
  try {
    text = io::read_text_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }

  std::vector<std::string> injected;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#' || stripped[0] == ';') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected key=value");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty())
      throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
    if (key == "config")
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": config files cannot nest");
    const std::string flag = "--" + key;
    bool given = false;
    for (const std::string& arg : args)
      if (arg == flag || arg.starts_with(flag + "=")) given = true;
    if (!given) injected.push_back(flag + "=" + value);
  }
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1,
              injected.begin(), injected.end());
  return args;
}

void print_pipeline_summary(const pipeline::PipelineSummary& s) {
  std::cout << "input records:    " << s.input_records << "\n"
            << "skipped unknown:  " << s.skipped_unknown << "\n"
            << "clamped scores:   " << s.clamped_scores << "\n"
            << "images:           " << s.images << "\n"
            << "expanded records: " << s.expanded_records << "\n"
            << "kept records:     " << s.kept_records << "\n";
}

// Readers used by eval: they keep the row number so unknown-label errors
// can cite the offending line.
std::vector<Detection> read_predictions_checked(const std::string& path,
                                                const LabelHierarchy& h,
                                                bool skip_unknown,
                                                std::size_t& skipped,
                                                io::ReadCounters& counters) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  io::CsvReader reader(in, path);
  const auto cols = io::PredictionColumns::resolve(reader, &counters);
  std::vector<Detection> out;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    Detection det = io::parse_prediction_row(fields, cols, reader, &counters);
    if (!h.contains(det.label)) {
      if (!skip_unknown)
        throw ParseError(reader.source(), reader.line_number(),
                         "unknown label: " + det.label);
      ++skipped;
      continue;
    }
    out.push_back(std::move(det));
  }
  return out;
}

std::vector<GroundTruth> read_ground_truth_checked(const std::string& path,
                                                   const LabelHierarchy& h,
                                                   bool skip_unknown,
                                                   std::size_t& skipped,
                                                   io::ReadCounters& counters) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  io::CsvReader reader(in, path);
  const auto cols = io::GroundTruthColumns::resolve(reader, &counters);
  std::vector<GroundTruth> out;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    GroundTruth gt = io::parse_ground_truth_row(fields, cols, reader);
    ++counters.records;
    if (!h.contains(gt.label)) {
      if (!skip_unknown)
        throw ParseError(reader.source(), reader.line_number(),
                         "unknown label: " + gt.label);
      ++skipped;
      continue;
    }
    out.push_back(std::move(gt));
  }
  return out;
}

void setup_hnms(CLI::App& app) {
  struct Opts {
    HierarchyOpts hier;
    std::string input, output, temp_dir;
    HnmsConfig cfg;
    bool no_clamp = false;
    std::size_t chunk = 200000;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand(
      "hnms", "Per-image NMS with label expansion and score voting");
  add_config_file(sub);
  sub->add_option("--input", o->input, "Prediction CSV")->required();
  sub->add_option("--output", o->output, "Output prediction CSV")->required();
  add_hierarchy_options(sub, o->hier);
  add_hnms_options(sub, o->cfg, o->no_clamp);
  sub->add_option("--sort-chunk-records", o->chunk,
                  "Records held in memory before spilling a sorted run")
      ->capture_default_str();
  sub->add_option("--temp-dir", o->temp_dir, "Directory for spill files");
  sub->callback([o] {
    const LabelHierarchy h = load_hierarchy(o->hier);
    pipeline::HnmsPipelineConfig cfg;
    cfg.hnms = o->cfg;
    cfg.hnms.clamp_scores = !o->no_clamp;
    cfg.evaluated = load_evaluated(o->hier);
    cfg.skip_unknown = o->hier.skip_unknown;
    cfg.sort_chunk_records = o->chunk;
    cfg.temp_dir = o->temp_dir;
    const auto summary =
        pipeline::run_hnms_pipeline(h, {{o->input, 1.0}}, o->output, cfg);
    print_pipeline_summary(summary);
  });
}

void setup_ensemble(CLI::App& app) {
  struct Opts {
    HierarchyOpts hier;
    std::vector<std::string> inputs;
    std::vector<double> weights;
    std::string output, temp_dir;
    HnmsConfig cfg;
    bool no_clamp = false;
    std::size_t chunk = 200000;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand(
      "ensemble", "Fuse several runs' predictions through weighted "
                  "concatenation and per-image NMS");
  add_config_file(sub);
  sub->add_option("--input", o->inputs, "Prediction CSV, one per run")
      ->required();
  sub->add_option("--weight", o->weights,
                  "Score multiplier in (0,1] per run, matching --input order "
                  "(default 1.0 each)");
  sub->add_option("--output", o->output, "Output prediction CSV")->required();
  add_hierarchy_options(sub, o->hier);
  add_hnms_options(sub, o->cfg, o->no_clamp);
  sub->add_option("--sort-chunk-records", o->chunk,
                  "Records held in memory before spilling a sorted run")
      ->capture_default_str();
  sub->add_option("--temp-dir", o->temp_dir, "Directory for spill files");
  sub->callback([o] {
    if (!o->weights.empty() && o->weights.size() != o->inputs.size())
      throw ConfigError("--weight count must match --input count");
    const LabelHierarchy h = load_hierarchy(o->hier);
    pipeline::HnmsPipelineConfig cfg;
    cfg.hnms = o->cfg;
    cfg.hnms.clamp_scores = !o->no_clamp;
    cfg.evaluated = load_evaluated(o->hier);
    cfg.skip_unknown = o->hier.skip_unknown;
    cfg.sort_chunk_records = o->chunk;
    cfg.temp_dir = o->temp_dir;
    std::vector<pipeline::WeightedInput> inputs;
    for (std::size_t i = 0; i < o->inputs.size(); ++i)
      inputs.push_back({o->inputs[i],
                        o->weights.empty() ? 1.0 : o->weights[i]});
    const auto summary = pipeline::run_hnms_pipeline(h, inputs, o->output, cfg);
    print_pipeline_summary(summary);
  });
}

void setup_eval(CLI::App& app) {
  struct Opts {
    HierarchyOpts hier;
    std::string predictions, ground_truth, report;
    double iou_threshold = 0.5;
    bool no_expand = false;
    bool per_class = false;
    std::string interpolation = "all-point";
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand(
      "eval", "Mean average precision with hierarchy-expanded labels");
  add_config_file(sub);
  sub->add_option("--predictions", o->predictions, "Prediction CSV")->required();
  sub->add_option("--ground-truth", o->ground_truth, "Annotation CSV")->required();
  add_hierarchy_options(sub, o->hier, /*with_names=*/true);
  sub->add_option("--iou-threshold", o->iou_threshold, "Match threshold")
      ->capture_default_str();
  sub->add_flag("--no-expand-detections", o->no_expand,
                "Score predictions as submitted instead of expanding their "
                "labels to ancestors");
  sub->add_option("--interpolation", o->interpolation,
                  "AP interpolation: all-point or eleven-point")
      ->check(CLI::IsMember({"all-point", "eleven-point"}))
      ->capture_default_str();
  sub->add_flag("--per-class", o->per_class, "Print the per-class AP table");
  sub->add_option("--report", o->report, "Write the report as JSON here");
  sub->callback([o] {
    const LabelHierarchy h = load_hierarchy(o->hier);
    io::ReadCounters det_counters, gt_counters;
    std::size_t skipped = 0;
    const auto dets = read_predictions_checked(
        o->predictions, h, o->hier.skip_unknown, skipped, det_counters);
    const auto gts = read_ground_truth_checked(
        o->ground_truth, h, o->hier.skip_unknown, skipped, gt_counters);

    EvalOptions opts;
    opts.iou_threshold = o->iou_threshold;
    opts.expand_detections = !o->no_expand;
    opts.interpolation = o->interpolation == "eleven-point"
                             ? ApInterpolation::ElevenPoint
                             : ApInterpolation::AllPoint;
    opts.evaluated = load_evaluated(o->hier);
    const EvalReport report = hierarchical_map(h, dets, gts, opts);

    std::cout << "predictions:            " << det_counters.records << "\n"
              << "ground truths:          " << gt_counters.records << "\n"
              << "skipped unknown:        " << skipped << "\n"
              << "clamped scores:         " << det_counters.clamped_scores << "\n"
              << "evaluated classes:      " << report.per_class_ap.size() << "\n"
              << "detection-only classes: " << report.detection_only_classes
              << "\n";
    if (o->per_class) {
      for (const auto& [label, ap] : report.per_class_ap) {
        std::cout << label;
        if (const std::string* dn = h.display_name(label))
          std::cout << " (" << *dn << ")";
        std::cout << " ap " << io::format_value(ap) << " gts "
                  << report.gt_counts.at(label) << "\n";
      }
    }
    std::cout << "mean_ap: " << io::format_value(report.mean_ap) << "\n";

    if (!o->report.empty()) {
      nlohmann::json j;
      j["mean_ap"] = report.mean_ap;
      j["iou_threshold"] = o->iou_threshold;
      j["expand_detections"] = !o->no_expand;
      j["interpolation"] = o->interpolation;
      j["detection_only_classes"] = report.detection_only_classes;
      j["skipped_unknown"] = skipped;
      auto classes = nlohmann::json::array();
      for (const auto& [label, ap] : report.per_class_ap) {
        nlohmann::json c;
        c["label"] = label;
        c["ap"] = ap;
        c["gt_count"] = report.gt_counts.at(label);
        if (const std::string* dn = h.display_name(label))
          c["display_name"] = *dn;
        classes.push_back(std::move(c));
      }
      j["classes"] = std::move(classes);
      std::ofstream out(o->report);
      if (!out) throw DataError("cannot create file: " + o->report);
      out << j.dump(2) << "\n";
      out.flush();
      if (!out) throw DataError("failed writing file: " + o->report);
    }
  });
}

void setup_sample(CLI::App& app) {
  struct Opts {
    std::string ground_truth, output;
    std::size_t batches = 1;
    SamplerConfig cfg;
    bool without_replacement = false;
    bool histogram = false;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand(
      "sample", "Two-stage class-aware image sampling plan");
  add_config_file(sub);
  sub->add_option("--ground-truth", o->ground_truth, "Annotation CSV")->required();
  sub->add_option("--output", o->output,
                  "Plan file: one image id per line, batches concatenated")
      ->required();
  sub->add_option("--batches", o->batches, "Number of batches")
      ->capture_default_str();
  sub->add_option("--batch-size", o->cfg.batch_size, "Images per batch")
      ->capture_default_str();
  sub->add_option("--seed", o->cfg.seed, "Generator seed")->capture_default_str();
  sub->add_flag("--without-replacement", o->without_replacement,
                "Draw stage-1 categories without replacement within a batch");
  sub->add_flag("--histogram", o->histogram,
                "Print per-category draw counts and a uniformity statistic");
  sub->callback([o] {
    const auto gts = io::read_ground_truth(o->ground_truth);
    const CategoryIndex idx = build_index(gts);
    SamplerConfig cfg = o->cfg;
    cfg.with_replacement_categories = !o->without_replacement;
    BatchSampler sampler(idx, cfg);
    std::ofstream out(o->output);
    if (!out) throw DataError("cannot create file: " + o->output);
    for (std::size_t b = 0; b < o->batches; ++b) {
      for (const ImageId& image : sampler.next_batch()) out << image << "\n";
    }
    out.flush();
    if (!out) throw DataError("failed writing file: " + o->output);

    std::cout << "categories: " << idx.categories.size() << "\n"
              << "draws:      " << o->batches * cfg.batch_size << "\n";
    if (o->histogram) {
      const auto& draws = sampler.category_draws();
      for (std::size_t i = 0; i < idx.categories.size(); ++i)
        std::cout << idx.categories[i] << "," << draws[i] << "\n";
      if (idx.categories.size() >= 2) {
        const ChiSquare chi = chi_square_uniform(draws);
        std::cout << "chi_square: statistic " << io::format_value(chi.statistic)
                  << " df " << chi.degrees_of_freedom << " p "
                  << io::format_value(chi.p_value) << "\n";
      }
    }
  });
}

ImageSize parse_image_size(const std::string& text) {
  const std::size_t x = text.find('x');
  ImageSize size;
  const auto parse_int = [&](std::string_view s, int& out) {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size() && out > 0;
  };
  if (x == std::string::npos ||
      !parse_int(std::string_view(text).substr(0, x), size.width) ||
      !parse_int(std::string_view(text).substr(x + 1), size.height))
    throw ConfigError("--image-size must look like 1024x768");
  return size;
}

void setup_chips(CLI::App& app) {
  struct Opts {
    std::string ground_truth, output, image_sizes, image_size;
    ChipConfig cfg;
  };
  auto o = std::make_shared<Opts>();
  o->cfg.scales = {0.5, 1.0, 2.0};
  auto* sub = app.add_subcommand(
      "chips", "Plan fixed-size positive crop windows per image and scale");
  add_config_file(sub);
  sub->add_option("--ground-truth", o->ground_truth, "Annotation CSV")->required();
  sub->add_option("--output", o->output,
                  "Chip CSV: ImageID,Scale,XMin,XMax,YMin,YMax")
      ->required();
  sub->add_option("--image-sizes", o->image_sizes,
                  "ImageID,Width,Height CSV of pixel dimensions");
  sub->add_option("--image-size", o->image_size,
                  "Uniform WxH pixel dimensions for every image");
  sub->add_option("--scales", o->cfg.scales, "Scales to plan at")
      ->delimiter(',')
      ->capture_default_str();
  sub->add_option("--chip-px", o->cfg.chip_px, "Chip side length, scaled pixels")
      ->capture_default_str();
  sub->add_option("--valid-lo", o->cfg.valid_lo_px,
                  "Smallest valid longer box side, scaled pixels")
      ->capture_default_str();
  sub->add_option("--valid-hi", o->cfg.valid_hi_px,
                  "Largest valid longer box side, scaled pixels")
      ->capture_default_str();
  sub->callback([o] {
    if (o->image_sizes.empty() == o->image_size.empty())
      throw ConfigError("give exactly one of --image-sizes or --image-size");
    std::map<ImageId, ImageSize> sizes;
    ImageSize uniform{};
    if (!o->image_sizes.empty())
      sizes = io::read_image_sizes(o->image_sizes);
    else
      uniform = parse_image_size(o->image_size);

    const auto gts = io::read_ground_truth(o->ground_truth);
    std::map<ImageId, std::vector<GroundTruth>> by_image;
    for (const GroundTruth& gt : gts) by_image[gt.image].push_back(gt);

    std::ofstream out(o->output);
    if (!out) throw DataError("cannot create file: " + o->output);
    out << "ImageID,Scale,XMin,XMax,YMin,YMax\n";
    std::size_t chips = 0, covered = 0;
    for (const auto& [image, records] : by_image) {
      ImageSize size = uniform;
      if (!o->image_sizes.empty()) {
        const auto it = sizes.find(image);
        if (it == sizes.end())
          throw DataError("no image size for image: " + image);
        size = it->second;
      }
      const ChipPlan plan = plan_chips(image, records, size, o->cfg);
      for (const Chip& chip : plan.chips) {
        out << io::csv_escape(image) << ',' << io::format_value(chip.scale)
            << ',' << io::format_value(chip.window.xmin) << ','
            << io::format_value(chip.window.xmax) << ','
            << io::format_value(chip.window.ymin) << ','
            << io::format_value(chip.window.ymax) << "\n";
      }
      chips += plan.chips.size();
      for (const auto& list : plan.covered)
        if (!list.empty()) ++covered;
    }
    out.flush();
    if (!out) throw DataError("failed writing file: " + o->output);
    std::cout << "images:               " << by_image.size() << "\n"
              << "ground truths:        " << gts.size() << "\n"
              << "chips:                " << chips << "\n"
              << "covered ground truths: " << covered << "\n";
  });
}

void setup_stats(CLI::App& app) {
  struct Opts {
    std::string ground_truth, output, names;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand(
      "stats", "Per-label instance counts and the imbalance ratio");
  add_config_file(sub);
  sub->add_option("--ground-truth", o->ground_truth, "Annotation CSV")->required();
  sub->add_option("--output", o->output,
                  "Write the count table here instead of stdout");
  sub->add_option("--names", o->names, "LabelName,DisplayName CSV");
  sub->callback([o] {
    const auto gts = io::read_ground_truth(o->ground_truth);
    const auto stats = imbalance_stats(gts);

    std::unordered_map<LabelId, std::string> names;
    if (!o->names.empty()) {
      const std::string text = io::read_text_file(o->names);
      std::istringstream in(text);
      std::string line;
      std::size_t line_no = 0;
      while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = io::split_csv_line(line);
        if (fields.size() < 2)
          throw ParseError(o->names, line_no, "expected LabelName,DisplayName");
        if (line_no == 1 && fields[0] == "LabelName") continue;
        names[fields[0]] = fields[1];
      }
    }

    std::ofstream file;
    if (!o->output.empty()) {
      file.open(o->output);
      if (!file) throw DataError("cannot create file: " + o->output);
    }
    std::ostream& out = o->output.empty() ? std::cout : file;
    out << (names.empty() ? "LabelName,Count" : "LabelName,DisplayName,Count")
        << "\n";
    for (const auto& [label, count] : stats) {
      out << io::csv_escape(label);
      if (!names.empty()) {
        const auto it = names.find(label);
        out << ',' << io::csv_escape(it == names.end() ? "" : it->second);
      }
      out << ',' << count << "\n";
    }
    out.flush();
    if (!out) throw DataError("failed writing output");

    std::cout << "labels: " << stats.size() << "\n";
    if (!stats.empty()) {
      const auto& [max_label, max_count] = stats.front();
      const auto& [min_label, min_count] = stats.back();
      std::cout << "max: " << max_label << " " << max_count << "\n"
                << "min: " << min_label << " " << min_count << "\n"
                << "imbalance ratio: "
                << io::format_value(static_cast<double>(max_count) /
                                    static_cast<double>(min_count))
                << "\n";
    }
  });
}

void setup_expand(CLI::App& app) {
  struct Opts {
    HierarchyOpts hier;
    std::string input, output;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand(
      "expand", "Rewrite each prediction as itself plus its ancestor labels");
  add_config_file(sub);
  sub->add_option("--input", o->input, "Prediction CSV")->required();
  sub->add_option("--output", o->output, "Output prediction CSV")->required();
  add_hierarchy_options(sub, o->hier);
  sub->callback([o] {
    const LabelHierarchy h = load_hierarchy(o->hier);
    pipeline::HnmsPipelineConfig cfg;
    cfg.evaluated = load_evaluated(o->hier);
    cfg.skip_unknown = o->hier.skip_unknown;
    const auto summary =
        pipeline::run_expand_pipeline(h, o->input, o->output, cfg);
    print_pipeline_summary(summary);
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detection-record toolkit: hierarchical NMS and ensemble "
               "fusion, class-aware sampling, crop planning, dataset stats, "
               "and hierarchy-aware mAP evaluation",
               "hdt"};
  app.require_subcommand(1);
  setup_hnms(app);
  setup_ensemble(app);
  setup_eval(app);
  setup_sample(app);
  setup_chips(app);
  setup_stats(app);
  setup_expand(app);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = inject_config(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const hdt::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
