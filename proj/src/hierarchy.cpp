#include "hdt/hierarchy.hpp"

#include <algorithm>
#include <cstring>
#include <set>
#include <sstream>

#include "hdt/csv.hpp"
#include "hdt/errors.hpp"
#include "json.hpp"

namespace hdt {

namespace {

using nlohmann::json;

std::pair<std::size_t, std::size_t> line_col_of_byte(std::string_view text,
                                                     std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

struct DocumentWalk {
  std::vector<LabelId> labels;
  std::vector<std::pair<LabelId, LabelId>> edges;
  const std::string& source;

  void node(const json& j, const std::string& path, const LabelId* parent) {
    if (!j.is_object())
      throw ParseError(source + ": at " + path + ": node must be an object");
    const auto name_it = j.find("LabelName");
    if (name_it == j.end() || !name_it->is_string())
      throw ParseError(source + ": at " + path +
                       ": node is missing a string LabelName");
    const LabelId label = name_it->get<std::string>();
    if (label.empty())
      throw ParseError(source + ": at " + path + ": LabelName must be non-empty");
    labels.push_back(label);
    if (parent) edges.emplace_back(*parent, label);
    const auto sub_it = j.find("Subcategory");
    if (sub_it != j.end()) {
      if (!sub_it->is_array())
        throw ParseError(source + ": at " + path +
                         ": Subcategory must be an array");
      for (std::size_t i = 0; i < sub_it->size(); ++i)
        node((*sub_it)[i], path + "/Subcategory[" + std::to_string(i) + "]",
             &label);
    }
  }
};

}  // namespace

LabelHierarchy LabelHierarchy::parse(std::string_view text,
                                     const HierarchyParseOptions& opts,
                                     const std::string& source_name) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_col_of_byte(text, e.byte > 0 ? e.byte - 1 : 0);
    std::ostringstream msg;
    msg << "JSON syntax error at column " << col;
    throw ParseError(source_name, line, msg.str());
  }

  DocumentWalk walk{{}, {}, source_name};
  if (doc.is_array()) {
    for (std::size_t i = 0; i < doc.size(); ++i)
      walk.node(doc[i], "$[" + std::to_string(i) + "]", nullptr);
  } else {
    walk.node(doc, "$", nullptr);
  }
  return from_edges(std::move(walk.labels), walk.edges, opts.synthetic_root);
}

LabelHierarchy LabelHierarchy::from_edges(
    std::vector<LabelId> labels,
    const std::vector<std::pair<LabelId, LabelId>>& parent_child,
    const std::optional<LabelId>& synthetic_root) {
  LabelHierarchy h;
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  for (const LabelId& l : labels) {
    if (l.empty()) throw DataError("labels must be non-empty");
  }
  h.labels_ = std::move(labels);
  h.nodes_.resize(h.labels_.size());
  for (std::size_t i = 0; i < h.labels_.size(); ++i) {
    h.nodes_[i].label = h.labels_[i];
    h.index_[h.labels_[i]] = static_cast<int>(i);
  }

  const int n = static_cast<int>(h.nodes_.size());
  std::vector<std::set<int>> parent_ids(n);
  std::vector<std::vector<int>> children(n);
  for (const auto& [parent, child] : parent_child) {
    const auto pit = h.index_.find(parent);
    const auto cit = h.index_.find(child);
    if (pit == h.index_.end()) throw UnknownLabelError(parent);
    if (cit == h.index_.end()) throw UnknownLabelError(child);
    if (parent_ids[cit->second].insert(pit->second).second)
      children[pit->second].push_back(cit->second);
  }

  if (synthetic_root) {
    const auto it = h.index_.find(*synthetic_root);
    if (it == h.index_.end())
      throw ConfigError("synthetic root label not found in hierarchy: " +
                        *synthetic_root);
    if (!parent_ids[it->second].empty())
      throw ConfigError("synthetic root must be a root node: " +
                        *synthetic_root);
    h.synthetic_root_ = it->second;
  }

  // Cycle check plus reverse topological finish order, iteratively.
  enum : unsigned char { kWhite, kGray, kBlack };
  std::vector<unsigned char> color(n, kWhite);
  std::vector<int> topo;
  topo.reserve(n);
  for (int start = 0; start < n; ++start) {
    if (color[start] != kWhite) continue;
    std::vector<std::pair<int, std::size_t>> stack{{start, 0}};
    color[start] = kGray;
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < children[node].size()) {
        const int child = children[node][next++];
        if (color[child] == kGray) throw CycleError(h.labels_[child]);
        if (color[child] == kWhite) {
          color[child] = kGray;
          stack.emplace_back(child, 0);
        }
      } else {
        color[node] = kBlack;
        topo.push_back(node);
        stack.pop_back();
      }
    }
  }
  // Finish order lists children before parents; reverse for parents-first.
  std::reverse(topo.begin(), topo.end());

  std::vector<std::set<int>> closure(n);
  std::vector<int> depth(n, 0);
  for (const int node : topo) {
    for (const int p : parent_ids[node]) {
      if (p != h.synthetic_root_) {
        closure[node].insert(p);
        depth[node] = std::max(depth[node], depth[p] + 1);
      }
      closure[node].insert(closure[p].begin(), closure[p].end());
    }
  }

  for (int i = 0; i < n; ++i) {
    Node& node = h.nodes_[i];
    node.depth = depth[i];
    for (const int p : parent_ids[i]) node.parents.push_back(h.labels_[p]);
    std::sort(node.parents.begin(), node.parents.end());
    for (const int a : closure[i]) node.ancestors.push_back(h.labels_[a]);
    std::sort(node.ancestors.begin(), node.ancestors.end());

    std::vector<int> expansion{i};
    expansion.insert(expansion.end(), closure[i].begin(), closure[i].end());
    std::sort(expansion.begin(), expansion.end(), [&](int a, int b) {
      if (depth[a] != depth[b]) return depth[a] > depth[b];
      return h.labels_[a] < h.labels_[b];
    });
    for (const int e : expansion) node.expansion.push_back(h.labels_[e]);
  }
  return h;
}

int LabelHierarchy::index_of(const LabelId& label) const {
  const auto it = index_.find(label);
  if (it == index_.end()) throw UnknownLabelError(label);
  return it->second;
}

const std::vector<LabelId>& LabelHierarchy::ancestors(const LabelId& label) const {
  return nodes_[index_of(label)].ancestors;
}

const std::vector<LabelId>& LabelHierarchy::parents(const LabelId& label) const {
  return nodes_[index_of(label)].parents;
}

int LabelHierarchy::depth(const LabelId& label) const {
  return nodes_[index_of(label)].depth;
}

bool LabelHierarchy::is_synthetic_root(const LabelId& label) const {
  return synthetic_root_ >= 0 && index_of(label) == synthetic_root_;
}

const std::vector<LabelId>& LabelHierarchy::expansion_of(const LabelId& label) const {
  return nodes_[index_of(label)].expansion;
}

void LabelHierarchy::load_display_names(std::string_view csv_text,
                                        const std::string& source_name) {
  std::istringstream in{std::string(csv_text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = io::split_csv_line(line);
    if (fields.size() < 2)
      throw ParseError(source_name, line_no, "expected LabelName,DisplayName");
    // The official description file ships without a header row; accept both.
    if (line_no == 1 && fields[0] == "LabelName") continue;
    const auto it = index_.find(fields[0]);
    if (it != index_.end()) nodes_[it->second].display = fields[1];
  }
}

const std::string* LabelHierarchy::display_name(const LabelId& label) const {
  const auto& display = nodes_[index_of(label)].display;
  return display ? &*display : nullptr;
}

namespace {

// Exact-match dedup key: image, label, box, score with -0.0 normalized.
std::string record_key(const ImageId& image, const LabelId& label,
                       const BBox& box, double score) {
  std::string key;
  key.reserve(image.size() + label.size() + 2 + 5 * sizeof(double));
  key += image;
  key += '\0';
  key += label;
  key += '\0';
  const double values[5] = {box.xmin + 0.0, box.ymin + 0.0, box.xmax + 0.0,
                            box.ymax + 0.0, score + 0.0};
  key.append(reinterpret_cast<const char*>(values), sizeof(values));
  return key;
}

}  // namespace

std::vector<Detection> expand_detections(
    const LabelHierarchy& h, std::span<const Detection> dets,
    const std::unordered_set<LabelId>* evaluated) {
  std::vector<Detection> out;
  out.reserve(dets.size());
  std::unordered_set<std::string> seen;
  for (const Detection& det : dets) {
    for (const LabelId& label : h.expansion_of(det.label)) {
      if (h.is_synthetic_root(label) && label != det.label) continue;
      if (evaluated && !evaluated->count(label)) continue;
      if (seen.insert(record_key(det.image, label, det.box, det.score)).second)
        out.push_back(Detection{det.image, label, det.score, det.box});
    }
  }
  return out;
}

}  // namespace hdt
