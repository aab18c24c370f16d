#include "dbne/graph.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "dbne/errors.hpp"

namespace dbne {

NodeId IdMap::intern(const std::string& label) {
  auto it = index_.find(label);
  if (it != index_.end()) return it->second;
  const NodeId id = static_cast<NodeId>(labels_.size());
  index_.emplace(label, id);
  labels_.push_back(label);
  return id;
}

std::optional<NodeId> IdMap::find(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Graph::Graph(IdMap ids, NodeId node_count, std::vector<std::pair<NodeId, NodeId>> edges,
             bool directed)
    : ids_(std::move(ids)), node_count_(node_count), directed_(directed) {
  for (const auto& [u, v] : edges) {
    if (u >= node_count_ || v >= node_count_) {
      throw DataError("edge endpoint out of range");
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  offsets_.assign(static_cast<std::size_t>(node_count_) + 1, 0);
  for (const auto& [u, v] : edges) {
    (void)v;
    ++offsets_[u + 1];
  }
  for (std::size_t i = 1; i < offsets_.size(); ++i) offsets_[i] += offsets_[i - 1];
  targets_.resize(edges.size());
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (const auto& [u, v] : edges) {
    targets_[cursor[u]++] = v;
  }
}

std::span<const NodeId> Graph::out_neighbors(NodeId v) const {
  if (v >= node_count_) {
    throw DataError("node index " + std::to_string(v) + " out of range [0, " +
                    std::to_string(node_count_) + ")");
  }
  return {targets_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
}

NodeId Graph::out_degree(NodeId v) const {
  return static_cast<NodeId>(out_neighbors(v).size());
}

namespace {

bool is_blank_or_comment(const std::string& line) {
  const auto pos = line.find_first_not_of(" \t\r\n");
  return pos == std::string::npos || line[pos] == '#';
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

}  // namespace

Graph load_edge_list(const std::string& path, bool directed) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open edge list: " + path);

  IdMap ids;
  std::vector<std::pair<NodeId, NodeId>> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank_or_comment(line)) continue;
    const auto tokens = split_ws(line);
    if (tokens.size() != 2) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": malformed edge line (expected `src dst`)");
    }
    const NodeId u = ids.intern(tokens[0]);
    const NodeId v = ids.intern(tokens[1]);
    if (u == v) continue;  // self-loops carry no diffusion semantics
    edges.emplace_back(u, v);
    if (!directed) edges.emplace_back(v, u);
  }
  if (ids.size() == 0) throw DataError(path + ": empty graph (no nodes)");
  const NodeId n = ids.size();
  return Graph(std::move(ids), n, std::move(edges), directed);
}

void save_edge_list(const Graph& graph, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write edge list: " + path);
  for (NodeId u = 0; u < graph.node_count(); ++u) {
    for (NodeId v : graph.out_neighbors(u)) {
      if (!graph.directed() && v < u) continue;  // one line per undirected edge
      out << graph.ids().label(u) << '\t' << graph.ids().label(v) << '\n';
    }
  }
  if (!out) throw DataError("write failed: " + path);
}

std::vector<NodeId> LabelTable::labeled_nodes() const {
  std::vector<NodeId> out;
  for (NodeId v = 0; v < labels.size(); ++v) {
    if (labels[v] >= 0) out.push_back(v);
  }
  return out;
}

LabelTable load_labels(const std::string& path, const IdMap& ids) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open label file: " + path);

  LabelTable table;
  table.labels.assign(ids.size(), -1);
  std::unordered_map<std::string, std::int32_t> class_ids;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank_or_comment(line)) continue;
    const auto tokens = split_ws(line);
    if (tokens.size() != 2) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": malformed label line (expected `node<TAB>class`)");
    }
    const auto node = ids.find(tokens[0]);
    if (!node) {
      throw DataError(path + ":" + std::to_string(line_no) + ": unknown node `" +
                      tokens[0] + "`");
    }
    auto [it, inserted] =
        class_ids.emplace(tokens[1], static_cast<std::int32_t>(class_ids.size()));
    const std::int32_t cls = it->second;
    (void)inserted;
    std::int32_t& slot = table.labels[*node];
    if (slot >= 0 && slot != cls) {
      throw DataError(path + ":" + std::to_string(line_no) + ": node `" + tokens[0] +
                      "` listed with conflicting classes");
    }
    slot = cls;
  }
  table.class_count = static_cast<std::int32_t>(class_ids.size());
  return table;
}

}  // namespace dbne
