#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hdt/geometry.hpp"

namespace hdt {

struct HierarchyParseOptions {
  // Label of a container-only root (a node that is not itself a category).
  // When set, that node is kept in the graph but never appears in any
  // ancestor closure, in depths, or in expanded records.
  std::optional<LabelId> synthetic_root;
};

/// DAG of category labels with parent links and precomputed ancestor
/// closures. Immutable after construction; safe to share across threads.
class LabelHierarchy {
 public:
  /// Parses a nested tag document: a JSON node with `LabelName` and an
  /// optional `Subcategory` list, or a top-level array of such nodes.
  /// A label reached through several nestings gets the union of parents.
  static LabelHierarchy parse(std::string_view text,
                              const HierarchyParseOptions& opts = {},
                              const std::string& source_name = "<hierarchy>");

  /// Builds directly from an explicit node list and parent->child edges.
  static LabelHierarchy from_edges(
      std::vector<LabelId> labels,
      const std::vector<std::pair<LabelId, LabelId>>& parent_child,
      const std::optional<LabelId>& synthetic_root = {});

  std::size_t size() const { return nodes_.size(); }
  bool contains(const LabelId& label) const { return index_.count(label) > 0; }

  /// All labels, sorted.
  const std::vector<LabelId>& labels() const { return labels_; }

  /// Transitive parents of `label`, sorted; never contains the label itself
  /// or the synthetic root. Throws UnknownLabelError.
  const std::vector<LabelId>& ancestors(const LabelId& label) const;

  /// Direct parents, sorted (the synthetic root is included here).
  const std::vector<LabelId>& parents(const LabelId& label) const;

  /// Longest path from a root, not counting the synthetic root as a level.
  int depth(const LabelId& label) const;

  bool is_synthetic_root(const LabelId& label) const;

  /// The label plus its ancestors, ordered by depth descending then label;
  /// the record set one input label expands to.
  const std::vector<LabelId>& expansion_of(const LabelId& label) const;

  /// Attaches display names from `LabelName,DisplayName` CSV text.
  /// Labels absent from the hierarchy are ignored.
  void load_display_names(std::string_view csv_text,
                          const std::string& source_name = "<names>");

  /// Display name if one was loaded, nullptr otherwise.
  const std::string* display_name(const LabelId& label) const;

 private:
  struct Node {
    LabelId label;
    std::vector<LabelId> parents;    // sorted
    std::vector<LabelId> ancestors;  // sorted transitive closure
    std::vector<LabelId> expansion;  // self + ancestors, depth desc
    int depth = 0;
    std::optional<std::string> display;
  };

  int index_of(const LabelId& label) const;  // throws UnknownLabelError

  std::vector<Node> nodes_;
  std::vector<LabelId> labels_;  // sorted; labels_[i] == nodes_[i].label
  std::unordered_map<LabelId, int> index_;
  int synthetic_root_ = -1;
};

/// Replaces each detection by itself plus one copy per ancestor label, all
/// with the same box and score. Exact duplicate records are merged; order is
/// stable by input record, then label depth descending. When `evaluated` is
/// given, only records whose label is in the set are emitted.
std::vector<Detection> expand_detections(
    const LabelHierarchy& h, std::span<const Detection> dets,
    const std::unordered_set<LabelId>* evaluated = nullptr);

}  // namespace hdt
