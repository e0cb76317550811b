#include "bridges/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bridges/error.hpp"
#include "bridges/netlist_parser.hpp"

namespace bridges {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

const char* to_string(Family f) {
  switch (f) {
    case Family::Adder: return "adder";
    case Family::Subtractor: return "subtractor";
    case Family::Comparator: return "comparator";
    case Family::MultiplierShiftAdd: return "multiplier_shiftadd";
    case Family::MuxTree: return "mux_tree";
    case Family::PriorityEncoder: return "priority_encoder";
    case Family::Parity: return "parity";
    case Family::Counter: return "counter";
  }
  return "?";
}

std::optional<Family> family_from_string(const std::string& s) {
  for (int i = 0; i < kFamilyCount; ++i)
    if (s == to_string(static_cast<Family>(i))) return static_cast<Family>(i);
  return std::nullopt;
}

CircuitType circuit_type_of(Family f) {
  switch (f) {
    case Family::Adder: case Family::Subtractor: case Family::Comparator:
    case Family::MultiplierShiftAdd:
      return CircuitType::ArithmeticUnits;
    case Family::MuxTree: case Family::PriorityEncoder:
      return CircuitType::DataPathUnits;
    case Family::Counter:
      return CircuitType::ClockManagementUnits;
    case Family::Parity:
      return CircuitType::SignalProcessingUnits;
  }
  return CircuitType::OtherUnits;
}

const char* to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

std::optional<Split> split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  return std::nullopt;
}

const char* to_string(CircuitType t) {
  switch (t) {
    case CircuitType::EncryptionUnits: return "Encryption Units";
    case CircuitType::DataPathUnits: return "Data Path Units";
    case CircuitType::ControlLogicUnits: return "Control Logic Units";
    case CircuitType::ArithmeticUnits: return "Arithmetic Units";
    case CircuitType::CommunicationProtocolUnits: return "Communication Protocol Units";
    case CircuitType::SignalProcessingUnits: return "Signal Processing Units";
    case CircuitType::ClockManagementUnits: return "Clock Management Units";
    case CircuitType::OtherUnits: return "Other Units";
  }
  return "?";
}

std::optional<CircuitType> circuit_type_from_string(const std::string& s) {
  for (int i = 0; i < kCircuitTypeCount; ++i)
    if (s == to_string(static_cast<CircuitType>(i))) return static_cast<CircuitType>(i);
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Netlist text builder
// ---------------------------------------------------------------------------

namespace {

std::string bit(const std::string& name, int i) { return name + "[" + std::to_string(i) + "]"; }

class NetlistBuilder {
public:
  explicit NetlistBuilder(std::string module_name) : name_(std::move(module_name)) {}

  void input(const std::string& n, int width = 0) {
    ports_.push_back(decl("input", n, width));
    if (width == 0) {
      taps_.push_back(n);
    } else {
      for (int i = 0; i < width; ++i) taps_.push_back(bit(n, i));
    }
  }
  void output(const std::string& n, int width = 0) { ports_.push_back(decl("output", n, width)); }

  std::string wire() {
    std::string n = "w" + std::to_string(next_wire_++);
    wires_.push_back(n);
    taps_.push_back(n);
    return n;
  }

  void gate(const char* kind, const std::string& out, const std::string& a,
            const std::string& b) {
    lines_.push_back(std::string(kind) + " g" + std::to_string(next_gate_++) + "(" + out + ", " +
                     a + ", " + b + ");");
  }
  void gate(const char* kind, const std::string& out, const std::string& a) {
    lines_.push_back(std::string(kind) + " g" + std::to_string(next_gate_++) + "(" + out + ", " +
                     a + ");");
  }
  std::string g2(const char* kind, const std::string& a, const std::string& b) {
    auto o = wire();
    gate(kind, o, a, b);
    return o;
  }
  std::string g1(const char* kind, const std::string& a) {
    auto o = wire();
    gate(kind, o, a);
    return o;
  }
  void dff(const std::string& q, const std::string& d, const std::string& clk) {
    lines_.push_back("dff g" + std::to_string(next_gate_++) + "(" + q + ", " + d + ", " + clk +
                     ");");
  }

  /// Inert double-inverter pairs hung off existing nets; pads the gate count
  /// without touching function.
  void pad(int pairs, Rng& rng) {
    for (int k = 0; k < pairs; ++k) {
      const auto& tap = taps_[rng.below(taps_.size())];
      g1("not", g1("not", tap));
    }
  }

  std::string text() const {
    std::ostringstream os;
    os << "module " << name_ << "(";
    for (std::size_t i = 0; i < ports_.size(); ++i) os << (i ? ", " : "") << ports_[i];
    os << ");\n";
    for (std::size_t i = 0; i < wires_.size(); i += 8) {
      os << "  wire";
      for (std::size_t j = i; j < std::min(i + 8, wires_.size()); ++j)
        os << (j == i ? " " : ", ") << wires_[j];
      os << ";\n";
    }
    for (const auto& l : lines_) os << "  " << l << "\n";
    os << "endmodule\n";
    return os.str();
  }

private:
  static std::string decl(const char* dir, const std::string& n, int width) {
    if (width == 0) return std::string(dir) + " " + n;
    return std::string(dir) + " [" + std::to_string(width - 1) + ":0] " + n;
  }

  std::string name_;
  std::vector<std::string> ports_, wires_, lines_, taps_;
  int next_wire_ = 0, next_gate_ = 0;
};

// ---------------------------------------------------------------------------
// Family builders
// ---------------------------------------------------------------------------

void build_adder(NetlistBuilder& nb, int w, bool cin) {
  nb.input("a", w);
  nb.input("b", w);
  if (cin) nb.input("cin");
  nb.output("sum", w);
  nb.output("cout");
  std::string c;
  for (int i = 0; i < w; ++i) {
    const auto ai = bit("a", i), bi = bit("b", i);
    if (i == 0 && !cin) {
      nb.gate("xor", bit("sum", 0), ai, bi);
      c = nb.g2("and", ai, bi);
      continue;
    }
    const std::string carry = i == 0 ? std::string("cin") : c;
    const auto t = nb.g2("xor", ai, bi);
    nb.gate("xor", bit("sum", i), t, carry);
    const auto p = nb.g2("and", ai, bi);
    const auto q = nb.g2("and", carry, t);
    if (i == w - 1) {
      nb.gate("or", "cout", p, q);
    } else {
      c = nb.g2("or", p, q);
    }
  }
  if (w == 1) nb.gate("buf", "cout", c);  // unreachable for valid widths; keeps builder total
}

void build_subtractor(NetlistBuilder& nb, int w, bool bin) {
  nb.input("a", w);
  nb.input("b", w);
  if (bin) nb.input("bin");
  nb.output("diff", w);
  nb.output("bout");
  std::string bor;
  for (int i = 0; i < w; ++i) {
    const auto ai = bit("a", i), bi = bit("b", i);
    if (i == 0 && !bin) {
      nb.gate("xor", bit("diff", 0), ai, bi);
      bor = nb.g2("and", nb.g1("not", ai), bi);
      continue;
    }
    const std::string borrow = i == 0 ? std::string("bin") : bor;
    const auto t = nb.g2("xor", ai, bi);
    nb.gate("xor", bit("diff", i), t, borrow);
    const auto p = nb.g2("and", nb.g1("not", ai), bi);
    const auto q = nb.g2("and", nb.g2("xnor", ai, bi), borrow);
    if (i == w - 1) {
      nb.gate("or", "bout", p, q);
    } else {
      bor = nb.g2("or", p, q);
    }
  }
}

// mode: 0 = equality flag, 1 = less-than flag, 2 = both
void build_comparator(NetlistBuilder& nb, int w, int mode) {
  nb.input("a", w);
  nb.input("b", w);
  if (mode == 0 || mode == 2) nb.output("eq");
  if (mode == 1 || mode == 2) nb.output("lt");
  std::vector<std::string> e(w);
  const int e_from = mode == 1 ? 1 : 0;
  for (int i = e_from; i < w; ++i) e[i] = nb.g2("xnor", bit("a", i), bit("b", i));
  if (mode == 0 || mode == 2) {
    std::string acc = e[0];
    for (int i = 1; i < w; ++i) {
      if (i == w - 1) {
        nb.gate("and", "eq", acc, e[i]);
      } else {
        acc = nb.g2("and", acc, e[i]);
      }
    }
  }
  if (mode == 1 || mode == 2) {
    auto lt_term = [&](int i) {
      return nb.g2("and", nb.g1("not", bit("a", i)), bit("b", i));
    };
    std::string acc = lt_term(w - 1);
    std::string pfx = e[w - 1];
    for (int i = w - 2; i >= 0; --i) {
      const auto term = nb.g2("and", lt_term(i), pfx);
      if (i == 0) {
        nb.gate("or", "lt", acc, term);
      } else {
        acc = nb.g2("or", acc, term);
        pfx = nb.g2("and", pfx, e[i]);
      }
    }
  }
}

void build_multiplier(NetlistBuilder& nb, int w, bool low_half) {
  nb.input("a", w);
  nb.input("b", w);
  const int out_w = low_half ? w : 2 * w;
  nb.output("p", out_w);
  std::vector<std::string> acc;
  for (int i = 0; i < w; ++i) acc.push_back(nb.g2("and", bit("a", i), bit("b", 0)));
  for (int j = 1; j < w; ++j) {
    std::string carry;
    for (int k = 0; k < w; ++k) {
      const int pos = j + k;
      if (low_half && pos >= w) break;
      const auto pp = nb.g2("and", bit("a", k), bit("b", j));
      if (pos < static_cast<int>(acc.size())) {
        if (carry.empty()) {
          const auto s = nb.g2("xor", acc[pos], pp);
          carry = nb.g2("and", acc[pos], pp);
          acc[pos] = s;
        } else {
          const auto t = nb.g2("xor", acc[pos], pp);
          const auto s = nb.g2("xor", t, carry);
          const auto c1 = nb.g2("and", acc[pos], pp);
          const auto c2 = nb.g2("and", carry, t);
          carry = nb.g2("or", c1, c2);
          acc[pos] = s;
        }
      } else {  // k == w-1, one past the current top
        const auto s = nb.g2("xor", pp, carry);
        carry = nb.g2("and", pp, carry);
        acc.push_back(s);
      }
    }
    if (!low_half) acc.push_back(carry);
  }
  for (int k = 0; k < out_w; ++k) nb.gate("buf", bit("p", k), acc[k]);
}

void build_mux_tree(NetlistBuilder& nb, int w, bool invert) {
  const int sel_w = static_cast<int>(std::ceil(std::log2(static_cast<double>(w))));
  nb.input("d", w);
  nb.input("sel", sel_w);
  nb.output("y");
  std::vector<std::string> level;
  for (int i = 0; i < w; ++i) level.push_back(bit("d", i));
  int l = 0;
  while (level.size() > 1) {
    const auto nsel = nb.g1("not", bit("sel", l));
    std::vector<std::string> next;
    const bool final_merge = level.size() == 2;
    for (std::size_t m = 0; m + 1 < level.size(); m += 2) {
      const auto t0 = nb.g2("and", level[m], nsel);
      const auto t1 = nb.g2("and", level[m + 1], bit("sel", l));
      if (final_merge) {
        nb.gate(invert ? "nor" : "or", "y", t0, t1);
        next.push_back("y");
      } else {
        next.push_back(nb.g2("or", t0, t1));
      }
    }
    if (level.size() % 2 == 1) next.push_back(level.back());
    level = std::move(next);
    ++l;
  }
}

void build_priority_encoder(NetlistBuilder& nb, int w, bool msb_priority) {
  const int idx_w = static_cast<int>(std::ceil(std::log2(static_cast<double>(w))));
  nb.input("r", w);
  nb.output("idx", idx_w);
  nb.output("valid");
  std::vector<int> order(w);
  for (int t = 0; t < w; ++t) order[t] = msb_priority ? w - 1 - t : t;

  std::vector<std::string> grant(w);
  grant[order[0]] = bit("r", order[0]);  // top priority needs no gating
  std::string any = bit("r", order[0]);
  for (int t = 1; t < w; ++t) {
    const int i = order[t];
    if (i > 0)  // index 0 contributes no idx bits, its grant is never read
      grant[i] = nb.g2("and", bit("r", i), nb.g1("not", any));
    if (t < w - 1) any = nb.g2("or", any, bit("r", i));
  }
  nb.gate("or", "valid", any, bit("r", order[w - 1]));

  for (int k = 0; k < idx_w; ++k) {
    std::vector<std::string> members;
    for (int i = 1; i < w; ++i)
      if (i & (1 << k)) members.push_back(grant[i]);
    if (members.size() == 1) {
      nb.gate("buf", bit("idx", k), members[0]);
    } else {
      std::string acc = members[0];
      for (std::size_t m = 1; m < members.size(); ++m) {
        if (m + 1 == members.size()) {
          nb.gate("or", bit("idx", k), acc, members[m]);
        } else {
          acc = nb.g2("or", acc, members[m]);
        }
      }
    }
  }
}

void build_parity(NetlistBuilder& nb, int w, bool odd, bool chain) {
  nb.input("d", w);
  nb.output("p");
  std::vector<std::string> level;
  for (int i = 0; i < w; ++i) level.push_back(bit("d", i));
  if (chain) {
    std::string acc = level[0];
    for (int i = 1; i < w; ++i) {
      if (i == w - 1) {
        nb.gate(odd ? "xnor" : "xor", "p", acc, level[i]);
      } else {
        acc = nb.g2("xor", acc, level[i]);
      }
    }
    return;
  }
  while (level.size() > 1) {
    std::vector<std::string> next;
    const bool final_merge = level.size() == 2;
    for (std::size_t m = 0; m + 1 < level.size(); m += 2) {
      if (final_merge) {
        nb.gate(odd ? "xnor" : "xor", "p", level[m], level[m + 1]);
        next.push_back("p");
      } else {
        next.push_back(nb.g2("xor", level[m], level[m + 1]));
      }
    }
    if (level.size() % 2 == 1) next.push_back(level.back());
    level = std::move(next);
  }
}

void build_counter(NetlistBuilder& nb, int w, bool down) {
  nb.input("clk");
  nb.input("en");
  nb.output("q", w);
  std::string carry = "en";
  for (int i = 0; i < w; ++i) {
    const auto t = nb.g2("xor", bit("q", i), carry);
    if (i < w - 1) {
      const auto src = down ? nb.g1("not", bit("q", i)) : bit("q", i);
      carry = nb.g2("and", src, carry);
    }
    nb.dff(bit("q", i), t, "clk");
  }
}

// ---------------------------------------------------------------------------
// Descriptions
// ---------------------------------------------------------------------------

struct DesignOptions {
  bool flag0 = false;   // cin / bin / invert / msb priority / odd / down / low half
  bool flag1 = false;   // parity chain shape
  int cmp_mode = 0;     // comparator only
  int pad_pairs = 0;
  int template_idx = 0;
};

DesignOptions decode_options(Family f, std::uint64_t seed) {
  DesignOptions o;
  o.flag0 = seed & 1;
  o.flag1 = (seed >> 1) & 1;
  o.cmp_mode = static_cast<int>(seed & 3) % 3;
  o.template_idx = static_cast<int>((seed >> 8) & 0xFF);
  o.pad_pairs = static_cast<int>((seed >> 16) & 0x1F);
  (void)f;
  return o;
}

// Canonical structural-option code: designs with equal (family,width,code,pad)
// have identical graphs, which generate_corpus uses for repeat tracking.
std::uint64_t structural_code(Family f, std::uint64_t seed) {
  const DesignOptions o = decode_options(f, seed);
  switch (f) {
    case Family::Comparator: return static_cast<std::uint64_t>(o.cmp_mode);
    case Family::Parity: return (o.flag0 ? 1u : 0u) | (o.flag1 ? 2u : 0u);
    default: return o.flag0 ? 1u : 0u;
  }
}

std::string option_phrase(Family f, const DesignOptions& o) {
  switch (f) {
    case Family::Adder:
      return o.flag0 ? "with carry input and carry output" : "with carry output only";
    case Family::Subtractor:
      return o.flag0 ? "with borrow input" : "without borrow input";
    case Family::Comparator:
      return o.cmp_mode == 0   ? "producing an equality flag"
             : o.cmp_mode == 1 ? "producing a less than flag"
                               : "producing equality and less than flags";
    case Family::MultiplierShiftAdd:
      return o.flag0 ? "keeping only the low half of the product"
                     : "producing the full double width product";
    case Family::MuxTree:
      return o.flag0 ? "with an inverted output" : "with a direct output";
    case Family::PriorityEncoder:
      return o.flag0 ? "giving highest index priority" : "giving lowest index priority";
    case Family::Parity:
      return std::string(o.flag0 ? "computing odd parity" : "computing even parity") +
             (o.flag1 ? " over a linear chain" : " over a balanced tree");
    case Family::Counter:
      return o.flag0 ? "counting down when enabled" : "counting up when enabled";
  }
  return "";
}

std::string family_phrase(Family f) {
  switch (f) {
    case Family::Adder: return "ripple carry adder";
    case Family::Subtractor: return "binary subtractor";
    case Family::Comparator: return "magnitude comparator";
    case Family::MultiplierShiftAdd: return "shift and add multiplier";
    case Family::MuxTree: return "multiplexer tree";
    case Family::PriorityEncoder: return "priority encoder";
    case Family::Parity: return "parity generator";
    case Family::Counter: return "binary counter";
  }
  return "";
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  std::size_t at = 0;
  while ((at = s.find(from, at)) != std::string::npos) {
    s.replace(at, from.size(), to);
    at += to.size();
  }
  return s;
}

std::string render_description(Family f, int width, const DesignOptions& o,
                               const CircuitGraph& g) {
  static const char* kTemplates[] = {
      "This module implements a {W} bit {FAM} {OPT}. The netlist is built from {N} primitive "
      "gates over {V} graph nodes in total.",
      "A gate level {FAM} circuit of width {W} {OPT}. The structural implementation contains "
      "{N} logic cells connected by {E} wires.",
      "Structural netlist describing a {W} bit {FAM} {OPT}. Logic synthesis mapped the design "
      "onto {N} two input primitive gates.",
  };
  long n_gates = 0, n_xor = 0;
  for (const auto& node : g.nodes()) {
    if (!is_io(node.kind)) ++n_gates;
    if (node.kind == NodeKind::Xor || node.kind == NodeKind::Xnor) ++n_xor;
  }
  std::string t = kTemplates[o.template_idx % 3];
  t = replace_all(t, "{W}", std::to_string(width));
  t = replace_all(t, "{FAM}", family_phrase(f));
  t = replace_all(t, "{OPT}", option_phrase(f, o));
  t = replace_all(t, "{N}", std::to_string(n_gates));
  t = replace_all(t, "{V}", std::to_string(g.node_count()));
  t = replace_all(t, "{E}", std::to_string(g.edge_count()));
  t = replace_all(t, "{X}", std::to_string(n_xor));
  return t;
}

char hex_digit(int v) { return v < 10 ? char('0' + v) : char('a' + v - 10); }

std::string seed_hex(std::uint64_t seed) {
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, seed >>= 4) s[i] = hex_digit(static_cast<int>(seed & 0xF));
  return s;
}

}  // namespace

CircuitGraph with_meta(const CircuitGraph& g, GraphMeta meta) {
  return CircuitGraph::create(std::vector<GraphNode>(g.nodes()),
                              std::vector<GraphEdge>(g.edges()), std::move(meta));
}

DesignRecord generate_design(const DesignSpec& spec) {
  if (spec.width < 2 || spec.width > 16) throw UnsupportedWidth(spec.width);
  const DesignOptions o = decode_options(spec.family, spec.seed);

  NetlistBuilder nb(std::string(to_string(spec.family)) + "_w" + std::to_string(spec.width));
  switch (spec.family) {
    case Family::Adder: build_adder(nb, spec.width, o.flag0); break;
    case Family::Subtractor: build_subtractor(nb, spec.width, o.flag0); break;
    case Family::Comparator: build_comparator(nb, spec.width, o.cmp_mode); break;
    case Family::MultiplierShiftAdd: build_multiplier(nb, spec.width, o.flag0); break;
    case Family::MuxTree: build_mux_tree(nb, spec.width, o.flag0); break;
    case Family::PriorityEncoder: build_priority_encoder(nb, spec.width, o.flag0); break;
    case Family::Parity: build_parity(nb, spec.width, o.flag0, o.flag1); break;
    case Family::Counter: build_counter(nb, spec.width, o.flag0); break;
  }
  if (o.pad_pairs > 0) {
    Rng pad_rng(hash_seed(spec.seed, 0x9ad));
    nb.pad(o.pad_pairs, pad_rng);
  }

  DesignRecord rec;
  rec.design_id = std::string(to_string(spec.family)) + "_w" +
                  (spec.width < 10 ? "0" : "") + std::to_string(spec.width) + "_" +
                  seed_hex(spec.seed);
  rec.rtl_text = anonymize(nb.text(), spec.seed);
  rec.circuit_type = circuit_type_of(spec.family);

  CircuitGraph parsed = parse_netlist(rec.rtl_text);
  GraphMeta meta;
  meta.design_id = rec.design_id;
  meta.source = GraphSource::Synthetic;
  meta.synth_config = EffortTriple{Effort::Med, Effort::Med, Effort::Med};
  CircuitGraph g = with_meta(parsed, std::move(meta));
  GraphMeta m2 = g.meta();
  m2.area = recompute_area(g);
  m2.power = recompute_power(g);
  g = with_meta(g, std::move(m2));

  rec.description = render_description(spec.family, spec.width, o, g);
  rec.graphs.push_back(std::move(g));
  return rec;
}

// ---------------------------------------------------------------------------
// Semantics-preserving rewrites
// ---------------------------------------------------------------------------

namespace {

struct MutableGraph {
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;

  explicit MutableGraph(const CircuitGraph& g) : nodes(g.nodes()), edges(g.edges()) {}

  std::uint32_t add_node(NodeKind k) {
    nodes.push_back({k, {}});
    return static_cast<std::uint32_t>(nodes.size() - 1);
  }

  CircuitGraph freeze(const CircuitGraph& base, std::optional<EffortTriple> cfg) {
    GraphMeta meta = base.meta();
    if (cfg) meta.synth_config = cfg;
    auto g = CircuitGraph::create(std::move(nodes), std::move(edges), meta);
    GraphMeta m2 = g.meta();
    m2.area = recompute_area(g);
    m2.power = recompute_power(g);
    return with_meta(g, std::move(m2));
  }
};

void splice_chain(MutableGraph& mg, std::size_t edge_idx, std::initializer_list<NodeKind> kinds) {
  const GraphEdge e = mg.edges[edge_idx];
  mg.edges.erase(mg.edges.begin() + static_cast<long>(edge_idx));
  std::uint32_t prev = e.src;
  for (const auto k : kinds) {
    const auto id = mg.add_node(k);
    mg.edges.push_back({prev, id});
    prev = id;
  }
  mg.edges.push_back({prev, e.dst});
}

void negation_pair_inplace(MutableGraph& mg, Rng& rng) {
  if (mg.edges.empty()) return;
  splice_chain(mg, rng.below(mg.edges.size()), {NodeKind::Not, NodeKind::Not});
}

void buffer_inplace(MutableGraph& mg, Rng& rng) {
  if (mg.edges.empty()) return;
  splice_chain(mg, rng.below(mg.edges.size()), {NodeKind::Buf});
}

void demorgan_inplace(MutableGraph& mg, Rng& rng) {
  std::vector<std::uint32_t> candidates;
  for (std::uint32_t i = 0; i < mg.nodes.size(); ++i) {
    const auto k = mg.nodes[i].kind;
    if (k == NodeKind::And || k == NodeKind::Or || k == NodeKind::Nand || k == NodeKind::Nor)
      candidates.push_back(i);
  }
  if (candidates.empty()) return;
  const auto g = candidates[rng.below(candidates.size())];
  switch (mg.nodes[g].kind) {
    case NodeKind::And: mg.nodes[g].kind = NodeKind::Nor; break;   // a&b = ~(~a | ~b)
    case NodeKind::Or: mg.nodes[g].kind = NodeKind::Nand; break;   // a|b = ~(~a & ~b)
    case NodeKind::Nand: mg.nodes[g].kind = NodeKind::Or; break;
    case NodeKind::Nor: mg.nodes[g].kind = NodeKind::And; break;
    default: break;
  }
  // invert both fan-in edges (collect first; splicing reorders the list)
  std::vector<std::size_t> fan_in_edges;
  for (std::size_t i = 0; i < mg.edges.size(); ++i)
    if (mg.edges[i].dst == g) fan_in_edges.push_back(i);
  std::sort(fan_in_edges.rbegin(), fan_in_edges.rend());
  for (const auto idx : fan_in_edges) splice_chain(mg, idx, {NodeKind::Not});
}

}  // namespace

CircuitGraph rewrite_negation_pair(const CircuitGraph& g, Rng& rng) {
  MutableGraph mg(g);
  negation_pair_inplace(mg, rng);
  return mg.freeze(g, g.meta().synth_config);
}

CircuitGraph rewrite_demorgan(const CircuitGraph& g, Rng& rng) {
  MutableGraph mg(g);
  demorgan_inplace(mg, rng);
  return mg.freeze(g, g.meta().synth_config);
}

CircuitGraph rewrite_buffer(const CircuitGraph& g, Rng& rng) {
  MutableGraph mg(g);
  buffer_inplace(mg, rng);
  return mg.freeze(g, g.meta().synth_config);
}

void synth_variants(DesignRecord& record, int n_variants, std::uint64_t seed) {
  if (record.graphs.empty()) throw EmptyCorpus();
  if (n_variants <= 0) return;
  n_variants = std::min(n_variants, 27);
  const CircuitGraph& base = record.graphs[0];
  const double gates = recompute_area(base);

  auto intensity = [&](Effort e) {
    const double frac = e == Effort::Low ? 0.02 : e == Effort::Med ? 0.05 : 0.10;
    return std::max(1, static_cast<int>(std::ceil(frac * gates)));
  };

  const int offset = static_cast<int>(record.graphs.size()) - 1;
  for (int k = 0; k < n_variants; ++k) {
    const int t = (offset + k) % 27;
    const EffortTriple cfg = {static_cast<Effort>(t / 9), static_cast<Effort>((t / 3) % 3),
                              static_cast<Effort>(t % 3)};
    Rng rng(hash_seed(hash_seed(seed, fnv1a64(record.design_id)), static_cast<std::uint64_t>(t)));
    MutableGraph mg(base);
    for (int i = 0; i < intensity(cfg[0]); ++i) negation_pair_inplace(mg, rng);
    for (int i = 0; i < intensity(cfg[1]); ++i) demorgan_inplace(mg, rng);
    for (int i = 0; i < intensity(cfg[2]); ++i) buffer_inplace(mg, rng);
    record.graphs.push_back(mg.freeze(base, cfg));
  }
}

// ---------------------------------------------------------------------------
// Splits & stats
// ---------------------------------------------------------------------------

void split_dataset(std::vector<DesignRecord>& records, std::uint64_t seed) {
  if (records.empty()) throw EmptyCorpus();
  const std::size_t n = records.size();
  const double ideal[3] = {n * 18.0 / 20.0, n * 1.0 / 20.0, n * 1.0 / 20.0};
  std::size_t count[3];
  double frac[3];
  std::size_t used = 0;
  for (int i = 0; i < 3; ++i) {
    count[i] = static_cast<std::size_t>(ideal[i]);
    frac[i] = ideal[i] - static_cast<double>(count[i]);
    used += count[i];
  }
  while (used < n) {  // remainders to the largest fractional part, train wins ties
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (frac[i] > frac[best]) best = i;
    ++count[best];
    frac[best] = -1.0;
    ++used;
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::size_t at = 0;
  for (int s = 0; s < 3; ++s)
    for (std::size_t k = 0; k < count[s]; ++k)
      records[order[at++]].split = static_cast<Split>(s);
}

CorpusStats corpus_stats(const std::vector<DesignRecord>& records) {
  CorpusStats st;
  st.node_histogram.assign(7, 0);  // [1,10) .. [1e6,1e7)
  for (const auto& r : records) {
    ++st.designs_per_split[to_string(r.split)];
    ++st.designs_per_type[to_string(r.circuit_type)];
    for (const auto& g : r.graphs) {
      ++st.total_graphs;
      const auto v = static_cast<long>(graph_token_count(g));
      st.total_graph_tokens += v;
      if (v >= 1) {
        int b = 0;
        long edge = 10;
        while (b + 1 < static_cast<int>(st.node_histogram.size()) && v >= edge) {
          ++b;
          edge *= 10;
        }
        ++st.node_histogram[b];
      }
    }
  }
  return st;
}

std::string CorpusStats::to_json() const {
  ordered_json j;
  j["designs_per_split"] = designs_per_split;
  j["designs_per_type"] = designs_per_type;
  auto& h = j["node_histogram"] = ordered_json::array();
  long lo = 1;
  for (const auto c : node_histogram) {
    ordered_json b;
    b["bucket"] = "[" + std::to_string(lo) + "," + std::to_string(lo * 10) + ")";
    b["count"] = c;
    h.push_back(std::move(b));
    lo *= 10;
  }
  j["total_graphs"] = total_graphs;
  j["total_graph_tokens"] = total_graph_tokens;
  return j.dump(2);
}

std::string CorpusStats::to_table() const {
  std::ostringstream os;
  os << "split     designs\n";
  for (const auto& [k, v] : designs_per_split)
    os << k << std::string(10 - k.size(), ' ') << v << "\n";
  os << "\ncircuit type                    designs\n";
  for (const auto& [k, v] : designs_per_type)
    os << k << std::string(32 - k.size(), ' ') << v << "\n";
  os << "\nnode-count bucket   graphs\n";
  long lo = 1;
  for (const auto c : node_histogram) {
    const std::string b = "[" + std::to_string(lo) + "," + std::to_string(lo * 10) + ")";
    os << b << std::string(20 - b.size(), ' ') << c << "\n";
    lo *= 10;
  }
  os << "\ntotal graphs        " << total_graphs << "\n";
  os << "total graph tokens  " << total_graph_tokens << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Corpus persistence
// ---------------------------------------------------------------------------

void save_record(const DesignRecord& r, const std::string& design_dir) {
  fs::create_directories(design_dir);
  ordered_json j;
  j["design_id"] = r.design_id;
  j["rtl_text"] = r.rtl_text;
  j["description"] = r.description;
  j["circuit_type"] = to_string(r.circuit_type);
  j["split"] = to_string(r.split);
  j["graph_count"] = r.graphs.size();
  std::ofstream out(design_dir + "/record.json", std::ios::binary | std::ios::trunc);
  if (!out) throw WriteError(design_dir + "/record.json");
  out << j.dump(2) << '\n';
  for (std::size_t k = 0; k < r.graphs.size(); ++k)
    save_graph(r.graphs[k], design_dir + "/graph_" + std::to_string(k) + ".json");
}

DesignRecord load_record(const std::string& design_dir) {
  std::ifstream in(design_dir + "/record.json", std::ios::binary);
  if (!in) throw ParseError("cannot open " + design_dir + "/record.json", 0);
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), e.byte);
  }
  DesignRecord r;
  r.design_id = j.at("design_id").get<std::string>();
  r.rtl_text = j.at("rtl_text").get<std::string>();
  r.description = j.at("description").get<std::string>();
  const auto ct = circuit_type_from_string(j.at("circuit_type").get<std::string>());
  if (!ct) throw ParseError("unknown circuit_type", 0);
  r.circuit_type = *ct;
  const auto sp = split_from_string(j.at("split").get<std::string>());
  if (!sp) throw ParseError("unknown split", 0);
  r.split = *sp;
  const auto n = j.at("graph_count").get<std::size_t>();
  for (std::size_t k = 0; k < n; ++k)
    r.graphs.push_back(load_graph(design_dir + "/graph_" + std::to_string(k) + ".json"));
  return r;
}

void save_corpus(const std::vector<DesignRecord>& records, const std::string& dir) {
  fs::create_directories(dir + "/designs");
  for (const auto& r : records) save_record(r, dir + "/designs/" + r.design_id);
}

std::vector<DesignRecord> load_corpus(const std::string& dir) {
  const std::string base = dir + "/designs";
  if (!fs::exists(base)) throw ParseError("no designs/ directory under " + dir, 0);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(base))
    if (e.is_directory()) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  std::vector<DesignRecord> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(load_record(base + "/" + n));
  return out;
}

std::vector<DesignRecord> generate_corpus(const GenCorpusOptions& opt) {
  const int widths = opt.width_max - opt.width_min + 1;
  std::map<std::tuple<Family, int, std::uint64_t>, int> shape_counts;
  std::vector<DesignRecord> records;
  records.reserve(opt.n_designs);
  for (int i = 0; i < opt.n_designs; ++i) {
    DesignSpec spec;
    spec.family = static_cast<Family>(i % kFamilyCount);
    spec.width = opt.width_min + (i / kFamilyCount) % widths;
    const std::uint64_t base = hash_seed(opt.seed, static_cast<std::uint64_t>(i));
    // repeats of the same (family,width,options) shape get increasing pad so
    // their graphs and stated gate counts stay distinct
    const std::uint64_t code = structural_code(spec.family, base);
    const int repeat = shape_counts[{spec.family, spec.width, code}]++;
    const std::uint64_t pad = std::min<std::uint64_t>(static_cast<std::uint64_t>(repeat), 31);
    spec.seed = (base & ~0x1F0000ULL) | (pad << 16);
    records.push_back(generate_design(spec));
    if (opt.n_variants > 0) synth_variants(records.back(), opt.n_variants, opt.seed);
  }
  split_dataset(records, hash_seed(opt.seed, 0x5417));
  return records;
}

}  // namespace bridges
