#include "bridges/circuit_graph.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bridges/error.hpp"

namespace bridges {

using ordered_json = nlohmann::ordered_json;

const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Input: return "input";
    case NodeKind::Output: return "output";
    case NodeKind::And: return "and";
    case NodeKind::Nand: return "nand";
    case NodeKind::Or: return "or";
    case NodeKind::Nor: return "nor";
    case NodeKind::Xor: return "xor";
    case NodeKind::Xnor: return "xnor";
    case NodeKind::Not: return "not";
    case NodeKind::Buf: return "buf";
    case NodeKind::Dff: return "dff";
    case NodeKind::Const0: return "const0";
    case NodeKind::Const1: return "const1";
    case NodeKind::Opaque: return "opaque";
  }
  return "?";
}

std::optional<NodeKind> node_kind_from_string(const std::string& s) {
  static const std::pair<const char*, NodeKind> table[] = {
      {"input", NodeKind::Input}, {"output", NodeKind::Output}, {"and", NodeKind::And},
      {"nand", NodeKind::Nand},   {"or", NodeKind::Or},         {"nor", NodeKind::Nor},
      {"xor", NodeKind::Xor},     {"xnor", NodeKind::Xnor},     {"not", NodeKind::Not},
      {"buf", NodeKind::Buf},     {"dff", NodeKind::Dff},       {"const0", NodeKind::Const0},
      {"const1", NodeKind::Const1}};
  for (const auto& [name, kind] : table)
    if (s == name) return kind;
  return std::nullopt;
}

int fan_in_arity(NodeKind k) {
  switch (k) {
    case NodeKind::And: case NodeKind::Nand: case NodeKind::Or:
    case NodeKind::Nor: case NodeKind::Xor: case NodeKind::Xnor:
      return 2;
    case NodeKind::Not: case NodeKind::Buf: case NodeKind::Dff: case NodeKind::Output:
      return 1;
    case NodeKind::Input: case NodeKind::Const0: case NodeKind::Const1:
      return 0;
    case NodeKind::Opaque:
      return -1;
  }
  return -1;
}

const char* to_string(GraphSource s) {
  switch (s) {
    case GraphSource::Netlist: return "netlist";
    case GraphSource::Dataflow: return "dataflow";
    case GraphSource::Synthetic: return "synthetic";
  }
  return "?";
}

const char* to_string(Effort e) {
  switch (e) {
    case Effort::Low: return "low";
    case Effort::Med: return "med";
    case Effort::High: return "high";
  }
  return "?";
}

std::optional<GraphSource> graph_source_from_string(const std::string& s) {
  if (s == "netlist") return GraphSource::Netlist;
  if (s == "dataflow") return GraphSource::Dataflow;
  if (s == "synthetic") return GraphSource::Synthetic;
  return std::nullopt;
}

std::optional<Effort> effort_from_string(const std::string& s) {
  if (s == "low") return Effort::Low;
  if (s == "med") return Effort::Med;
  if (s == "high") return Effort::High;
  return std::nullopt;
}

double activity_weight(NodeKind k) {
  switch (k) {
    case NodeKind::And: case NodeKind::Nand: case NodeKind::Or: case NodeKind::Nor:
      return 1.0;
    case NodeKind::Xor: case NodeKind::Xnor:
      return 1.5;
    case NodeKind::Not: case NodeKind::Buf:
      return 0.5;
    case NodeKind::Dff:
      return 2.0;
    default:
      return 0.0;  // IO and constants do not switch
  }
}

double recompute_area(const CircuitGraph& g) {
  double a = 0.0;
  for (const auto& n : g.nodes())
    if (!is_io(n.kind)) a += 1.0;
  return a;
}

double recompute_power(const CircuitGraph& g) {
  double p = 0.0;
  for (const auto& n : g.nodes()) p += activity_weight(n.kind);
  return p;
}

namespace {

// Combinational-cycle scan: DFS over edges that do not leave a dff. Any cycle
// found in that subgraph has no dff on it.
void reject_combinational_cycles(const std::vector<GraphNode>& nodes,
                                 const std::vector<std::vector<std::uint32_t>>& fan_out) {
  const std::size_t n = nodes.size();
  std::vector<std::uint8_t> state(n, 0);  // 0=unseen 1=on stack 2=done
  std::vector<std::pair<std::uint32_t, std::size_t>> stack;
  for (std::uint32_t root = 0; root < n; ++root) {
    if (state[root] != 0 || nodes[root].kind == NodeKind::Dff) continue;
    stack.emplace_back(root, 0);
    state[root] = 1;
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      if (next < fan_out[v].size()) {
        const std::uint32_t u = fan_out[v][next++];
        if (nodes[u].kind == NodeKind::Dff) continue;  // cycle broken by flop
        if (state[u] == 1)
          throw ValidationError("cycle", static_cast<int>(u), "combinational cycle");
        if (state[u] == 0) {
          state[u] = 1;
          stack.emplace_back(u, 0);
        }
      } else {
        state[v] = 2;
        stack.pop_back();
      }
    }
  }
}

}  // namespace

CircuitGraph CircuitGraph::create(std::vector<GraphNode> nodes, std::vector<GraphEdge> edges,
                                  GraphMeta meta) {
  const bool relaxed = meta.source == GraphSource::Dataflow;
  const std::size_t n = nodes.size();

  for (std::size_t i = 0; i < n; ++i) {
    if (nodes[i].kind == NodeKind::Opaque && !relaxed)
      throw ValidationError("meta", static_cast<int>(i), "opaque kind outside dataflow source");
  }
  if (meta.area < 0.0) throw ValidationError("meta", -1, "negative area");
  if (meta.power < 0.0) throw ValidationError("meta", -1, "negative power");
  const bool wants_config =
      meta.source == GraphSource::Netlist || meta.source == GraphSource::Synthetic;
  if (wants_config != meta.synth_config.has_value())
    throw ValidationError("meta", -1, wants_config ? "synth_config required for this source"
                                                   : "synth_config not allowed for dataflow");

  std::sort(edges.begin(), edges.end());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    if (e.src >= n)
      throw ValidationError("endpoint", static_cast<int>(e.src), "edge source out of range");
    if (e.dst >= n)
      throw ValidationError("endpoint", static_cast<int>(e.dst), "edge target out of range");
    if (i > 0 && edges[i - 1] == e)
      throw ValidationError("duplicate_edge", static_cast<int>(e.src), "duplicate edge");
  }

  CircuitGraph g;
  g.fan_in_.assign(n, {});
  g.fan_out_.assign(n, {});
  for (const auto& e : edges) {
    g.fan_in_[e.dst].push_back(e.src);
    g.fan_out_[e.src].push_back(e.dst);
  }

  if (!relaxed) {
    for (std::uint32_t i = 0; i < n; ++i) {
      const int want = fan_in_arity(nodes[i].kind);
      if (want >= 0 && static_cast<int>(g.fan_in_[i].size()) != want)
        throw ValidationError("arity", static_cast<int>(i),
                              std::string(to_string(nodes[i].kind)) + " needs " +
                                  std::to_string(want) + " fan-in, has " +
                                  std::to_string(g.fan_in_[i].size()));
    }
    reject_combinational_cycles(nodes, g.fan_out_);
  }

  g.nodes_ = std::move(nodes);
  g.edges_ = std::move(edges);
  g.meta_ = std::move(meta);
  return g;
}

std::string graph_to_json_text(const CircuitGraph& g) {
  ordered_json j;
  j["format"] = "bridges-graph/1";
  auto& jn = j["nodes"] = ordered_json::array();
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    const auto& node = g.nodes()[i];
    ordered_json e;
    e["id"] = i;
    e["kind"] = node.kind == NodeKind::Opaque ? node.opaque_kind : to_string(node.kind);
    jn.push_back(std::move(e));
  }
  auto& je = j["edges"] = ordered_json::array();
  for (const auto& e : g.edges()) je.push_back({e.src, e.dst});
  ordered_json m;
  m["design_id"] = g.meta().design_id;
  m["source"] = to_string(g.meta().source);
  m["area"] = g.meta().area;
  m["power"] = g.meta().power;
  if (g.meta().synth_config) {
    const auto& c = *g.meta().synth_config;
    m["synth_config"] = {to_string(c[0]), to_string(c[1]), to_string(c[2])};
  } else {
    m["synth_config"] = nullptr;
  }
  j["meta"] = std::move(m);
  return j.dump();
}

CircuitGraph graph_from_json_text(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), e.byte);
  }
  try {
    if (j.value("format", "") != "bridges-graph/1")
      throw ParseError("unknown format tag", 0);

    GraphMeta meta;
    const auto& m = j.at("meta");
    meta.design_id = m.at("design_id").get<std::string>();
    const auto src = graph_source_from_string(m.at("source").get<std::string>());
    if (!src) throw ParseError("unknown source: " + m.at("source").get<std::string>(), 0);
    meta.source = *src;
    meta.area = m.at("area").get<double>();
    meta.power = m.at("power").get<double>();
    if (!m.at("synth_config").is_null()) {
      EffortTriple t;
      const auto& c = m.at("synth_config");
      if (!c.is_array() || c.size() != 3) throw ParseError("synth_config must have 3 entries", 0);
      for (int i = 0; i < 3; ++i) {
        const auto e = effort_from_string(c[i].get<std::string>());
        if (!e) throw ParseError("unknown effort: " + c[i].get<std::string>(), 0);
        t[i] = *e;
      }
      meta.synth_config = t;
    }

    const bool relaxed = meta.source == GraphSource::Dataflow;
    std::vector<GraphNode> nodes;
    const auto& jn = j.at("nodes");
    nodes.resize(jn.size());
    std::vector<bool> seen(jn.size(), false);
    for (const auto& e : jn) {
      const auto id = e.at("id").get<long long>();
      if (id < 0 || id >= static_cast<long long>(nodes.size()) || seen[id])
        throw ValidationError("id", static_cast<int>(id), "node ids must be dense and unique");
      seen[id] = true;
      const auto kind_s = e.at("kind").get<std::string>();
      if (auto k = node_kind_from_string(kind_s)) {
        nodes[id].kind = *k;
      } else if (relaxed) {
        nodes[id].kind = NodeKind::Opaque;
        nodes[id].opaque_kind = kind_s;
      } else {
        throw ValidationError("meta", static_cast<int>(id), "unknown node kind: " + kind_s);
      }
    }

    std::vector<GraphEdge> edges;
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw ParseError("edge must be [src,dst]", 0);
      const long long s = e[0].get<long long>(), d = e[1].get<long long>();
      if (s < 0 || d < 0)
        throw ValidationError("endpoint", static_cast<int>(std::min(s, d)), "negative endpoint");
      edges.push_back({static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(d)});
    }
    return CircuitGraph::create(std::move(nodes), std::move(edges), std::move(meta));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(e.what(), 0);
  }
}

CircuitGraph load_graph(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path, 0);
  std::stringstream ss;
  ss << in.rdbuf();
  return graph_from_json_text(ss.str());
}

void save_graph(const CircuitGraph& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WriteError(path);
  out << graph_to_json_text(g) << '\n';
  if (!out.flush()) throw WriteError(path);
}

CircuitGraph permute_nodes(const CircuitGraph& g, std::span<const std::uint32_t> perm) {
  const std::size_t n = g.node_count();
  if (perm.size() != n) throw NotABijection("size " + std::to_string(perm.size()) +
                                            " vs " + std::to_string(n) + " nodes");
  std::vector<bool> hit(n, false);
  for (const auto p : perm) {
    if (p >= n || hit[p]) throw NotABijection("id " + std::to_string(p) + " repeated or out of range");
    hit[p] = true;
  }
  std::vector<GraphNode> nodes(n);
  for (std::uint32_t old_id = 0; old_id < n; ++old_id) nodes[perm[old_id]] = g.nodes()[old_id];
  std::vector<GraphEdge> edges;
  edges.reserve(g.edge_count());
  for (const auto& e : g.edges()) edges.push_back({perm[e.src], perm[e.dst]});
  return CircuitGraph::create(std::move(nodes), std::move(edges), g.meta());
}

}  // namespace bridges
