#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bridges {

/// Primitive cell kinds of the gate-level IR. `Opaque` holds arbitrary
/// operator names from ingested dataflow graphs and never appears in
/// netlist-sourced graphs.
enum class NodeKind : std::uint8_t {
  Input, Output, And, Nand, Or, Nor, Xor, Xnor, Not, Buf, Dff, Const0, Const1,
  Opaque,
};

inline constexpr int kGateKindCount = 13;   // spec'd kinds, excluding Opaque
inline constexpr int kKindVocab = 14;       // embedding slots incl. Opaque

const char* to_string(NodeKind k);
std::optional<NodeKind> node_kind_from_string(const std::string& s);

/// Required fan-in count; -1 for Opaque (unconstrained).
int fan_in_arity(NodeKind k);

inline bool is_io(NodeKind k) { return k == NodeKind::Input || k == NodeKind::Output; }

enum class GraphSource : std::uint8_t { Netlist, Dataflow, Synthetic };
enum class Effort : std::uint8_t { Low, Med, High };

const char* to_string(GraphSource s);
const char* to_string(Effort e);
std::optional<GraphSource> graph_source_from_string(const std::string& s);
std::optional<Effort> effort_from_string(const std::string& s);

using EffortTriple = std::array<Effort, 3>;

struct GraphMeta {
  std::string design_id;
  GraphSource source = GraphSource::Netlist;
  double area = 0.0;
  double power = 0.0;
  std::optional<EffortTriple> synth_config;

  bool operator==(const GraphMeta&) const = default;
};

struct GraphNode {
  NodeKind kind = NodeKind::Input;
  std::string opaque_kind;  // set iff kind == Opaque

  bool operator==(const GraphNode&) const = default;
};

struct GraphEdge {
  std::uint32_t src = 0;
  std::uint32_t dst = 0;

  auto operator<=>(const GraphEdge&) const = default;
};

/// Directed gate-level graph. Node ids are dense 0..|V|-1 (the node's index),
/// edges are kept sorted lexicographically and deduplicated; this canonical
/// order is what the interchange writer emits, which is what makes
/// load(save(g)) exact. Immutable after construction.
class CircuitGraph {
public:
  CircuitGraph() = default;

  /// Validates (arity, endpoints, duplicates, combinational cycles) and
  /// throws ValidationError on the first violation. Dataflow-sourced graphs
  /// get relaxed rules: opaque kinds allowed, arity and cycles unchecked.
  static CircuitGraph create(std::vector<GraphNode> nodes, std::vector<GraphEdge> edges,
                             GraphMeta meta);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<GraphNode>& nodes() const { return nodes_; }
  const std::vector<GraphEdge>& edges() const { return edges_; }
  const GraphMeta& meta() const { return meta_; }
  NodeKind kind(std::uint32_t id) const { return nodes_[id].kind; }

  /// Fan-in / fan-out neighbor lists, built once at construction.
  const std::vector<std::vector<std::uint32_t>>& fan_in() const { return fan_in_; }
  const std::vector<std::vector<std::uint32_t>>& fan_out() const { return fan_out_; }

  bool operator==(const CircuitGraph& o) const {
    return nodes_ == o.nodes_ && edges_ == o.edges_ && meta_ == o.meta_;
  }

private:
  std::vector<GraphNode> nodes_;
  std::vector<GraphEdge> edges_;
  GraphMeta meta_;
  std::vector<std::vector<std::uint32_t>> fan_in_, fan_out_;
};

CircuitGraph load_graph(const std::string& path);
CircuitGraph graph_from_json_text(const std::string& text);
void save_graph(const CircuitGraph& g, const std::string& path);
std::string graph_to_json_text(const CircuitGraph& g);

/// Relabels node ids through `perm` (old id -> new id). Kinds and edges move
/// consistently; throws NotABijection if perm repeats or omits an id.
CircuitGraph permute_nodes(const CircuitGraph& g, std::span<const std::uint32_t> perm);

/// |V| — the graph-token count used in dataset statistics.
inline std::size_t graph_token_count(const CircuitGraph& g) { return g.node_count(); }

/// area = count of non-IO nodes; power = sum of per-kind activity weights.
/// Both recomputable from structure alone.
double recompute_area(const CircuitGraph& g);
double recompute_power(const CircuitGraph& g);
double activity_weight(NodeKind k);

}  // namespace bridges
