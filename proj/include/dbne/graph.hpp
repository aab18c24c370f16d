#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace dbne {

using NodeId = std::uint32_t;

// Bijection between external node labels and dense indices [0, N).
// Indices are assigned in first-seen order, which makes loading idempotent.
class IdMap {
 public:
  NodeId intern(const std::string& label);
  std::optional<NodeId> find(const std::string& label) const;
  const std::string& label(NodeId v) const { return labels_[v]; }
  NodeId size() const { return static_cast<NodeId>(labels_.size()); }

 private:
  std::unordered_map<std::string, NodeId> index_;
  std::vector<std::string> labels_;
};

// Immutable directed adjacency over dense node indices. Undirected graphs
// store both directions explicitly. Neighbors are sorted ascending, so
// iteration order is deterministic. Safe for unrestricted concurrent reads.
class Graph {
 public:
  Graph(IdMap ids, NodeId node_count, std::vector<std::pair<NodeId, NodeId>> edges,
        bool directed);

  NodeId node_count() const { return node_count_; }
  bool directed() const { return directed_; }

  // Collapsed edge count: each undirected edge counted once.
  std::size_t edge_count() const {
    return directed_ ? targets_.size() : targets_.size() / 2;
  }

  std::span<const NodeId> out_neighbors(NodeId v) const;
  NodeId out_degree(NodeId v) const;

  const IdMap& ids() const { return ids_; }

 private:
  IdMap ids_;
  NodeId node_count_ = 0;
  bool directed_ = true;
  // CSR layout.
  std::vector<std::size_t> offsets_;
  std::vector<NodeId> targets_;
};

// Edge list: UTF-8 text, one `src dst` pair per line (tab or space
// separated), `#`-prefixed comment lines and blank lines ignored.
// Self-loops are dropped; duplicate edges are collapsed. An undirected load
// inserts every edge in both directions.
Graph load_edge_list(const std::string& path, bool directed);
void save_edge_list(const Graph& graph, const std::string& path);

// Class labels for a subset of nodes. Class ids are contiguous in
// first-seen order; unlabeled nodes carry -1.
struct LabelTable {
  std::vector<std::int32_t> labels;  // dense node index -> class id or -1
  std::int32_t class_count = 0;

  std::vector<NodeId> labeled_nodes() const;
};

// Label file: UTF-8 text, one `node<TAB>class` per line. Every node must be
// present in `ids`; a node listed twice with conflicting classes is an error.
LabelTable load_labels(const std::string& path, const IdMap& ids);

class Graph;
inline LabelTable load_labels(const std::string& path, const Graph& graph) {
  return load_labels(path, graph.ids());
}

}  // namespace dbne
