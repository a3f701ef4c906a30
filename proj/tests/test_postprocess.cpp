#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hdt/errors.hpp"
#include "hdt/hierarchy.hpp"
#include "hdt/postprocess.hpp"
#include "reference.hpp"

using hdt::BBox;
using hdt::Detection;
using hdt::EnsembleInput;
using hdt::EnsembleRun;
using hdt::HnmsConfig;
using hdt::LabelHierarchy;

namespace {

struct Instance {
  std::vector<std::string> labels;
  std::vector<std::pair<int, int>> edges;  // (parent, child), parent < child
  std::vector<Detection> dets;             // one image

  LabelHierarchy hierarchy() const {
    std::vector<std::pair<std::string, std::string>> named;
    for (const auto& [p, c] : edges) named.emplace_back(labels[p], labels[c]);
    return LabelHierarchy::from_edges(labels, named);
  }
};

// Random one-image instance over a hierarchy of up to 5 labels and up to
// 10 boxes. Duplicate injection re-uses an earlier box (exactly or shifted
// by one lattice cell) so suppression and voting paths actually fire;
// cross_label_dups controls whether the copy may change label.
Instance random_instance(ref::Rng& rng, bool cross_label_dups) {
  Instance inst;
  const int n_labels = static_cast<int>(rng.randint(1, 5));
  for (int i = 0; i < n_labels; ++i)
    inst.labels.push_back("H" + std::to_string(i));
  for (int p = 0; p < n_labels; ++p) {
    for (int c = p + 1; c < n_labels; ++c) {
      if (rng.uniform() < 0.35) inst.edges.emplace_back(p, c);
    }
  }

  const int n_dets = static_cast<int>(rng.randint(1, 10));
  for (int i = 0; i < n_dets; ++i) {
    Detection d;
    d.image = "img";
    d.label = inst.labels[static_cast<std::size_t>(
        rng.randint(0, n_labels - 1))];
    d.score = static_cast<double>(rng.randint(0, 1000)) / 1000.0;
    d.box = ref::lattice_box(rng);
    if (i > 0 && rng.uniform() < 0.35) {
      const Detection& src =
          inst.dets[static_cast<std::size_t>(rng.randint(0, i - 1))];
      d.box = src.box;
      if (rng.randint(0, 1) == 0 && d.box.xmax <= 0.99) {
        d.box.xmin += 0.01;
        d.box.xmax += 0.01;
      }
      if (!cross_label_dups) d.label = src.label;
    }
    inst.dets.push_back(std::move(d));
  }
  return inst;
}

HnmsConfig random_cfg(ref::Rng& rng) {
  HnmsConfig cfg;
  const double nms_choices[] = {0.3, 0.5, 0.7};
  cfg.nms_iou = nms_choices[rng.randint(0, 2)];
  const double vote_choices[] = {0.0, 0.9, 1.0};  // 0.0 means "same as nms"
  cfg.vote_iou = vote_choices[rng.randint(0, 2)];
  if (cfg.vote_iou < cfg.nms_iou) cfg.vote_iou = cfg.nms_iou;
  const double fraction_choices[] = {0.0, 0.3, 1.0};
  cfg.vote_fraction = fraction_choices[rng.randint(0, 2)];
  cfg.score_floor = rng.randint(0, 1) == 0 ? 0.0 : 0.35;
  cfg.clamp_scores = rng.randint(0, 1) == 1;
  return cfg;
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_NOTHROW(HnmsConfig{}.validate());

  HnmsConfig cfg;
  cfg.nms_iou = 0.0;
  CHECK_THROWS_AS(cfg.validate(), hdt::ConfigError);
  cfg.nms_iou = 1.2;
  CHECK_THROWS_AS(cfg.validate(), hdt::ConfigError);

  cfg = HnmsConfig{};
  cfg.vote_iou = 0.4;  // below nms_iou
  CHECK_THROWS_AS(cfg.validate(), hdt::ConfigError);

  cfg = HnmsConfig{};
  cfg.vote_fraction = -0.1;
  CHECK_THROWS_AS(cfg.validate(), hdt::ConfigError);
  cfg.vote_fraction = 1.1;
  CHECK_THROWS_AS(cfg.validate(), hdt::ConfigError);

  cfg = HnmsConfig{};
  cfg.score_floor = -0.1;
  CHECK_THROWS_AS(cfg.validate(), hdt::ConfigError);
  cfg.score_floor = 1.0;
  CHECK_THROWS_AS(cfg.validate(), hdt::ConfigError);
}

TEST_CASE("suppressed box above the voting threshold donates score") {
  const BBox b{0.2, 0.2, 0.7, 0.7};
  const std::vector<Detection> in{{"img", "L", 0.8, b}, {"img", "L", 0.6, b}};
  const auto out = hdt::nms_per_class(in, HnmsConfig{});
  REQUIRE(out.size() == 1);
  CHECK(out[0].score == 0.8 + 0.3 * 0.6);
  CHECK(out[0].score == doctest::Approx(0.98));
  CHECK(out[0].box == b);
}

TEST_CASE("suppression below the voting threshold leaves the score alone") {
  // iou = 0.15 / 0.25 = 0.6: suppressed at 0.5 but below the 0.9 vote bar.
  const std::vector<Detection> in{{"img", "L", 0.8, BBox{0.0, 0.0, 0.5, 0.4}},
                                  {"img", "L", 0.6, BBox{0.0, 0.1, 0.5, 0.5}}};
  REQUIRE(hdt::iou(in[0].box, in[1].box) == doctest::Approx(0.6));
  const auto out = hdt::nms_per_class(in, HnmsConfig{});
  REQUIRE(out.size() == 1);
  CHECK(out[0].score == 0.8);
  CHECK(out[0].box == in[0].box);
}

TEST_CASE("votes accumulate over every suppressed box and clamp at one") {
  const BBox b{0.2, 0.2, 0.7, 0.7};
  const std::vector<Detection> in{{"img", "L", 0.9, b},
                                  {"img", "L", 0.5, b},
                                  {"img", "L", 0.5, BBox{0.21, 0.2, 0.71, 0.7}}};
  auto out = hdt::nms_per_class(in, HnmsConfig{});
  REQUIRE(out.size() == 1);
  CHECK(out[0].score == 1.0);

  HnmsConfig raw;
  raw.clamp_scores = false;
  out = hdt::nms_per_class(in, raw);
  REQUIRE(out.size() == 1);
  CHECK(out[0].score == 0.9 + 0.3 * 0.5 + 0.3 * 0.5);
}

TEST_CASE("label groups suppress independently") {
  const BBox b{0.2, 0.2, 0.7, 0.7};
  const std::vector<Detection> in{{"img", "X", 0.8, b}, {"img", "Y", 0.6, b}};
  const auto out = hdt::nms_per_class(in, HnmsConfig{});
  REQUIRE(out.size() == 2);
  CHECK(out[0].score == 0.8);
  CHECK(out[1].score == 0.6);
}

TEST_CASE("single detection and empty input pass through") {
  const std::vector<Detection> one{{"img", "L", 0.4, BBox{0, 0, 0.3, 0.3}}};
  CHECK(hdt::nms_per_class(one, HnmsConfig{}) == one);
  CHECK(hdt::nms_per_class(std::vector<Detection>{}, HnmsConfig{}).empty());
}

TEST_CASE("mixed image ids are rejected") {
  const std::vector<Detection> in{{"a", "L", 0.8, BBox{0, 0, 0.3, 0.3}},
                                  {"b", "L", 0.6, BBox{0, 0, 0.3, 0.3}}};
  CHECK_THROWS_WITH_AS(hdt::nms_per_class(in, HnmsConfig{}),
                       doctest::Contains("\"a\" and \"b\""), hdt::DataError);
}

TEST_CASE("score floor drops weak keepers after voting") {
  HnmsConfig cfg;
  cfg.score_floor = 0.35;
  const BBox b{0.2, 0.2, 0.7, 0.7};

  CHECK(hdt::nms_per_class(
            std::vector<Detection>{{"img", "L", 0.3, b}}, cfg)
            .empty());
  // The vote lifts the keeper over the floor.
  const auto out = hdt::nms_per_class(
      std::vector<Detection>{{"img", "L", 0.3, b}, {"img", "L", 0.2, b}}, cfg);
  REQUIRE(out.size() == 1);
  CHECK(out[0].score == 0.3 + 0.3 * 0.2);
}

TEST_CASE("ties prefer the larger box, then lexicographic coordinates") {
  // Equal scores; the larger box must win the keeper slot.
  const BBox small{0.1, 0.1, 0.5, 0.5};
  const BBox large{0.1, 0.1, 0.52, 0.52};
  REQUIRE(hdt::iou(small, large) > 0.5);
  const std::vector<Detection> in{{"img", "L", 0.7, small},
                                  {"img", "L", 0.7, large}};
  const auto out = hdt::nms_per_class(in, HnmsConfig{});
  REQUIRE(out.size() == 1);
  CHECK(out[0].box == large);
}

TEST_CASE("six random boxes match the exhaustive pass exactly") {
  ref::Rng rng(20240821);
  for (int round = 0; round < 200; ++round) {
    std::vector<Detection> dets;
    for (int i = 0; i < 6; ++i) {
      dets.push_back(Detection{
          "img", "L", static_cast<double>(rng.randint(0, 1000)) / 1000.0,
          ref::lattice_box(rng, 100, 40)});
    }
    const HnmsConfig cfg = random_cfg(rng);
    CHECK(ref::canonical(hdt::nms_per_class(dets, cfg)) ==
          ref::canonical(ref::greedy_nms(dets, cfg)));
  }
}

TEST_CASE("output is grouped by label with scores descending") {
  const std::vector<Detection> in{
      {"img", "B", 0.5, BBox{0.0, 0.0, 0.2, 0.2}},
      {"img", "A", 0.4, BBox{0.4, 0.4, 0.6, 0.6}},
      {"img", "B", 0.9, BBox{0.7, 0.7, 0.9, 0.9}},
      {"img", "A", 0.8, BBox{0.0, 0.5, 0.2, 0.7}},
  };
  const auto out = hdt::nms_per_class(in, HnmsConfig{});
  REQUIRE(out.size() == 4);
  CHECK(out[0].label == "A");
  CHECK(out[0].score == 0.8);
  CHECK(out[1].label == "A");
  CHECK(out[1].score == 0.4);
  CHECK(out[2].label == "B");
  CHECK(out[2].score == 0.9);
  CHECK(out[3].label == "B");
  CHECK(out[3].score == 0.5);
}

TEST_CASE("chain detection keeps every level at the child score") {
  const LabelHierarchy h = LabelHierarchy::from_edges(
      {"A", "B", "C"}, {{"A", "B"}, {"B", "C"}});
  const BBox b{0.1, 0.1, 0.4, 0.4};
  const auto out =
      hdt::hnms(h, std::vector<Detection>{{"img", "C", 0.7, b}}, HnmsConfig{});
  REQUIRE(out.size() == 3);
  CHECK(out[0] == Detection{"img", "A", 0.7, b});
  CHECK(out[1] == Detection{"img", "B", 0.7, b});
  CHECK(out[2] == Detection{"img", "C", 0.7, b});
}

TEST_CASE("expanded child copy suppresses the ancestor-label box and takes its vote") {
  const LabelHierarchy h = LabelHierarchy::from_edges({"A", "C"}, {{"A", "C"}});
  const BBox child_box{0.0, 0.0, 0.5, 0.8};
  const BBox anc_box{0.0, 0.04, 0.5, 0.84};
  REQUIRE(hdt::iou(child_box, anc_box) >= 0.9);
  const std::vector<Detection> in{{"img", "C", 0.9, child_box},
                                  {"img", "A", 0.5, anc_box}};
  const auto out = hdt::hnms(h, in, HnmsConfig{});
  REQUIRE(out.size() == 2);
  CHECK(out[0].label == "A");
  CHECK(out[0].box == child_box);
  CHECK(out[0].score == 1.0);  // 0.9 + 0.3 * 0.5 clamps
  CHECK(out[1] == Detection{"img", "C", 0.9, child_box});
}

TEST_CASE("hierarchy pass equals the oracle on random instances") {
  ref::Rng rng(20240822);
  for (int round = 0; round < 1000; ++round) {
    const Instance inst = random_instance(rng, true);
    const HnmsConfig cfg = random_cfg(rng);
    const auto lib = hdt::hnms(inst.hierarchy(), inst.dets, cfg);
    const auto oracle = ref::hnms(inst.labels, inst.edges, inst.dets, cfg);
    CHECK(ref::canonical(lib) == ref::canonical(oracle));
  }
}

TEST_CASE("kept records obey suppression, score, and geometry bounds") {
  ref::Rng rng(20240823);
  for (int round = 0; round < 800; ++round) {
    const Instance inst = random_instance(rng, true);
    const HnmsConfig cfg = random_cfg(rng);
    const auto out = hdt::hnms(inst.hierarchy(), inst.dets, cfg);
    const auto expanded = ref::expand(inst.labels, inst.edges, inst.dets);

    for (std::size_t i = 0; i < out.size(); ++i) {
      // Geometry is conserved: the box comes from some input record.
      const bool box_known = std::any_of(
          inst.dets.begin(), inst.dets.end(),
          [&](const Detection& d) { return d.box == out[i].box; });
      CHECK(box_known);

      // Score floor and clamp hold.
      CHECK(out[i].score >= cfg.score_floor);
      if (cfg.clamp_scores) CHECK(out[i].score <= 1.0);

      // The keeper's score never drops below its own record, and never
      // exceeds it by more than a full vote from every other same-label
      // record above vote_iou (same-box twins sit at iou 1 and count too).
      double best_base = -1.0, vote_pool = 0.0;
      for (const Detection& e : expanded) {
        if (e.label != out[i].label) continue;
        if (e.box == out[i].box) best_base = std::max(best_base, e.score);
        if (hdt::iou(e.box, out[i].box) >= cfg.vote_iou) vote_pool += e.score;
      }
      REQUIRE(best_base >= 0.0);
      vote_pool -= best_base;  // the keeper itself never votes
      CHECK(out[i].score >= best_base);
      CHECK(out[i].score <= best_base + cfg.vote_fraction * vote_pool + 1e-12);

      // Suppression guarantee: same-label survivors stay under nms_iou.
      for (std::size_t j = i + 1; j < out.size(); ++j) {
        if (out[j].label != out[i].label) continue;
        CHECK(hdt::iou(out[i].box, out[j].box) < cfg.nms_iou);
      }
    }
  }
}

TEST_CASE("output is a fixed point when the first pass fires no votes") {
  // Voting rewrites keeper scores, and a second pass re-expands those
  // records into copies that are no longer exact duplicates and can vote
  // again (next case). When the first pass collects no votes -- nothing
  // overlaps at vote_iou, or vote_fraction is zero -- every output score
  // equals its input record's score, so re-expansion reproduces only
  // records the original keepers deduplicate or suppress again, and the
  // output is a fixed point. "No votes fired" is detected by comparing
  // against a zero-vote-fraction run: suppression is score-independent,
  // so the outputs agree exactly iff no vote changed a score.
  ref::Rng rng(20240824);
  int tested = 0;
  for (int round = 0; round < 2500; ++round) {
    const Instance inst = random_instance(rng, false);
    const HnmsConfig cfg = random_cfg(rng);
    const LabelHierarchy h = inst.hierarchy();
    const auto once = hdt::hnms(h, inst.dets, cfg);
    HnmsConfig muted = cfg;
    muted.vote_fraction = 0.0;
    if (!(once == hdt::hnms(h, inst.dets, muted))) continue;
    ++tested;
    CHECK(ref::canonical(hdt::hnms(h, once, cfg)) == ref::canonical(once));
  }
  CHECK(tested >= 800);
}

TEST_CASE("cross-label agreement above vote_iou re-votes on a second pass") {
  // Documents the boundary of the fixed-point property: with one record
  // under each sibling leaf at the same box, the shared parent keeps the
  // voted score 0.8 + 0.3 * 0.6, while the siblings keep their own scores.
  // A second pass re-expands the siblings, and both copies vote again.
  const LabelHierarchy h = LabelHierarchy::from_edges(
      {"A", "C1", "C2"}, {{"A", "C1"}, {"A", "C2"}});
  const BBox b{0.1, 0.1, 0.6, 0.6};
  const std::vector<Detection> in{{"img", "C1", 0.8, b},
                                  {"img", "C2", 0.6, b}};
  const auto once = hdt::hnms(h, in, HnmsConfig{});
  REQUIRE(once.size() == 3);
  CHECK(once[0].label == "A");
  CHECK(once[0].score == 0.8 + 0.3 * 0.6);

  const auto twice = hdt::hnms(h, once, HnmsConfig{});
  REQUIRE(twice.size() == 3);
  CHECK(twice[0].label == "A");
  CHECK(twice[0].score == 1.0);  // 0.98 + 0.3 * 0.8 + 0.3 * 0.6, clamped
}

TEST_CASE("hnms honors the evaluated filter") {
  const LabelHierarchy h = LabelHierarchy::from_edges(
      {"A", "B", "C"}, {{"A", "B"}, {"B", "C"}});
  const std::unordered_set<std::string> evaluated{"B", "C"};
  const auto out = hdt::hnms(
      h, std::vector<Detection>{{"img", "C", 0.7, BBox{0, 0, 0.4, 0.4}}},
      HnmsConfig{}, &evaluated);
  REQUIRE(out.size() == 2);
  CHECK(out[0].label == "B");
  CHECK(out[1].label == "C");
}

TEST_CASE("single-run ensemble is plain hnms") {
  const LabelHierarchy h = LabelHierarchy::from_edges({"A", "B"}, {{"A", "B"}});
  EnsembleInput inp;
  inp.runs.push_back(EnsembleRun{
      "m0",
      {{"img2", "B", 0.8, BBox{0.1, 0.1, 0.4, 0.4}},
       {"img1", "B", 0.5, BBox{0.2, 0.2, 0.6, 0.6}},
       {"img1", "A", 0.9, BBox{0.2, 0.2, 0.61, 0.61}}}});

  std::vector<Detection> expected;
  for (const std::string image : {"img1", "img2"}) {
    std::vector<Detection> only;
    for (const Detection& d : inp.runs[0].dets)
      if (d.image == image) only.push_back(d);
    const auto part = hdt::hnms(h, only, HnmsConfig{});
    expected.insert(expected.end(), part.begin(), part.end());
  }

  CHECK(hdt::fuse_ensemble(h, inp, HnmsConfig{}) == expected);
  const std::map<std::string, double> weights{{"m0", 1.0}};
  CHECK(hdt::fuse_ensemble(h, inp, HnmsConfig{}, weights) == expected);
}

TEST_CASE("identical detections from two runs reinforce") {
  const LabelHierarchy h = LabelHierarchy::parse(R"({"LabelName": "L"})");
  const BBox b{0.1, 0.1, 0.6, 0.6};
  EnsembleInput inp;
  inp.runs.push_back(EnsembleRun{"m0", {{"img", "L", 0.6, b}}});
  inp.runs.push_back(EnsembleRun{"m1", {{"img", "L", 0.6, b}}});
  const auto out = hdt::fuse_ensemble(h, inp, HnmsConfig{});
  REQUIRE(out.size() == 1);
  CHECK(out[0].score == 0.6 + 0.3 * 0.6);
  CHECK(out[0].score == doctest::Approx(0.78));
}

TEST_CASE("sibling agreement across runs reinforces the shared parent") {
  const LabelHierarchy h = LabelHierarchy::from_edges(
      {"A", "B", "C"}, {{"A", "B"}, {"A", "C"}});
  const BBox b{0.1, 0.1, 0.6, 0.6};
  EnsembleInput inp;
  inp.runs.push_back(EnsembleRun{"m0", {{"img", "B", 0.6, b}}});
  inp.runs.push_back(EnsembleRun{"m1", {{"img", "C", 0.6, b}}});
  const auto out = hdt::fuse_ensemble(h, inp, HnmsConfig{});
  REQUIRE(out.size() == 3);
  CHECK(out[0].label == "A");
  CHECK(out[0].score == 0.6 + 0.3 * 0.6);
  CHECK(out[1] == Detection{"img", "B", 0.6, b});
  CHECK(out[2] == Detection{"img", "C", 0.6, b});
}

TEST_CASE("disjoint runs concatenate") {
  const LabelHierarchy h = LabelHierarchy::parse(R"({"LabelName": "L"})");
  EnsembleInput inp;
  inp.runs.push_back(EnsembleRun{"m0", {{"img", "L", 0.6, BBox{0, 0, 0.2, 0.2}}}});
  inp.runs.push_back(EnsembleRun{"m1", {{"img", "L", 0.5, BBox{0.5, 0.5, 0.9, 0.9}}}});
  CHECK(hdt::fuse_ensemble(h, inp, HnmsConfig{}).size() == 2);
}

TEST_CASE("run weights scale scores before fusion") {
  const LabelHierarchy h = LabelHierarchy::parse(R"({"LabelName": "L"})");
  EnsembleInput inp;
  inp.runs.push_back(EnsembleRun{"m0", {{"img", "L", 0.8, BBox{0, 0, 0.2, 0.2}}}});
  const std::map<std::string, double> weights{{"m0", 0.5}};
  const auto out = hdt::fuse_ensemble(h, inp, HnmsConfig{}, weights);
  REQUIRE(out.size() == 1);
  CHECK(out[0].score == 0.8 * 0.5);
}

TEST_CASE("ensemble input validation") {
  const LabelHierarchy h = LabelHierarchy::parse(R"({"LabelName": "L"})");
  const Detection det{"img", "L", 0.5, BBox{0, 0, 0.2, 0.2}};

  EnsembleInput dup;
  dup.runs.push_back(EnsembleRun{"m0", {det}});
  dup.runs.push_back(EnsembleRun{"m0", {det}});
  CHECK_THROWS_AS(hdt::fuse_ensemble(h, dup, HnmsConfig{}), hdt::ConfigError);

  EnsembleInput one;
  one.runs.push_back(EnsembleRun{"m0", {det}});
  const std::map<std::string, double> unknown{{"m0", 1.0}, {"mX", 1.0}};
  CHECK_THROWS_AS(hdt::fuse_ensemble(h, one, HnmsConfig{}, unknown),
                  hdt::ConfigError);
  const std::map<std::string, double> empty_weights;
  CHECK_THROWS_AS(hdt::fuse_ensemble(h, one, HnmsConfig{}, empty_weights),
                  hdt::ConfigError);
  const std::map<std::string, double> zero{{"m0", 0.0}};
  CHECK_THROWS_AS(hdt::fuse_ensemble(h, one, HnmsConfig{}, zero),
                  hdt::ConfigError);
  const std::map<std::string, double> big{{"m0", 1.2}};
  CHECK_THROWS_AS(hdt::fuse_ensemble(h, one, HnmsConfig{}, big),
                  hdt::ConfigError);
}

TEST_CASE("multi-run fusion matches the per-run expansion oracle") {
  ref::Rng rng(20240825);
  for (int round = 0; round < 300; ++round) {
    const Instance base = random_instance(rng, true);
    const LabelHierarchy h = base.hierarchy();
    const int n_runs = static_cast<int>(rng.randint(1, 3));

    EnsembleInput inp;
    std::map<std::string, std::vector<Detection>> oracle_by_image;
    for (int r = 0; r < n_runs; ++r) {
      EnsembleRun run;
      run.id = "m" + std::to_string(r);
      const int n = static_cast<int>(rng.randint(0, 6));
      for (int i = 0; i < n; ++i) {
        Detection d;
        d.image = "img" + std::to_string(rng.randint(1, 2));
        d.label = base.labels[static_cast<std::size_t>(
            rng.randint(0, static_cast<int>(base.labels.size()) - 1))];
        d.score = static_cast<double>(rng.randint(0, 1000)) / 1000.0;
        d.box = rng.randint(0, 2) == 0 && !run.dets.empty()
                    ? run.dets.back().box
                    : ref::lattice_box(rng);
        run.dets.push_back(std::move(d));
      }
      for (const Detection& d :
           ref::expand(base.labels, base.edges, run.dets))
        oracle_by_image[d.image].push_back(d);
      inp.runs.push_back(std::move(run));
    }

    const HnmsConfig cfg = random_cfg(rng);
    std::vector<Detection> oracle;
    for (const auto& [image, dets] : oracle_by_image) {
      const auto part = ref::greedy_nms(dets, cfg);
      oracle.insert(oracle.end(), part.begin(), part.end());
    }
    CHECK(ref::canonical(hdt::fuse_ensemble(h, inp, cfg)) ==
          ref::canonical(oracle));
  }
}
