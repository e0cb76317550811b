#include "bridges/netlist_parser.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "bridges/error.hpp"

namespace bridges {

namespace {

const std::unordered_set<std::string> kKeywords = {
    "module", "endmodule", "input", "output", "wire",
    "and", "nand", "or", "nor", "xor", "xnor", "not", "buf", "dff"};

bool is_gate_keyword(const std::string& s) {
  return s != "module" && s != "endmodule" && s != "input" && s != "output" && s != "wire" &&
         kKeywords.count(s) > 0;
}

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

}  // namespace

std::vector<NetlistToken> lex_netlist(const std::string& text) {
  std::vector<NetlistToken> out;
  std::size_t i = 0;
  int line = 1, col = 1;
  std::string ws;

  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k, ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };

  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ws += c;
      advance(1);
      continue;
    }
    if (c == '/' && i + 1 < text.size() && text[i + 1] == '/') {
      const std::size_t end = text.find('\n', i);
      const std::size_t n = (end == std::string::npos ? text.size() : end) - i;
      ws.append(text, i, n);
      advance(n);
      continue;
    }
    if (c == '/' && i + 1 < text.size() && text[i + 1] == '*') {
      const std::size_t end = text.find("*/", i + 2);
      if (end == std::string::npos) throw SyntaxError(line, col, "closing */");
      const std::size_t n = end + 2 - i;
      ws.append(text, i, n);
      advance(n);
      continue;
    }

    NetlistToken tok;
    tok.line = line;
    tok.col = col;
    tok.leading_ws = std::move(ws);
    ws.clear();

    if (ident_start(c)) {
      std::size_t j = i;
      while (j < text.size() && ident_char(text[j])) ++j;
      tok.text.assign(text, i, j - i);
      tok.kind = kKeywords.count(tok.text) ? NetlistToken::Kind::Keyword
                                           : NetlistToken::Kind::Ident;
      advance(j - i);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      // plain decimal, or a based literal like 4'b0101 / 1'b0
      std::size_t j = i;
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      if (j < text.size() && text[j] == '\'') {
        ++j;
        if (j < text.size() && (text[j] == 'b' || text[j] == 'B' || text[j] == 'd' ||
                                text[j] == 'D' || text[j] == 'h' || text[j] == 'H')) {
          ++j;
          while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) ||
                                     text[j] == '_'))
            ++j;
        } else {
          throw SyntaxError(line, col, "base specifier after '");
        }
      }
      tok.kind = NetlistToken::Kind::Number;
      tok.text.assign(text, i, j - i);
      advance(j - i);
    } else if (std::string("()[]{},;:.=#").find(c) != std::string::npos) {
      tok.kind = NetlistToken::Kind::Punct;
      tok.text.assign(1, c);
      advance(1);
    } else {
      throw SyntaxError(line, col, "token (got '" + std::string(1, c) + "')");
    }
    out.push_back(std::move(tok));
  }

  NetlistToken eof;
  eof.kind = NetlistToken::Kind::Eof;
  eof.line = line;
  eof.col = col;
  eof.leading_ws = std::move(ws);
  out.push_back(std::move(eof));
  return out;
}

namespace {

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct PortDecl {
  std::string name;
  bool is_input = false;
  int lo = 0, hi = 0;  // inclusive bit range; lo==hi==0 for scalars
  bool ranged = false;
};

class Parser {
public:
  explicit Parser(const std::string& text) : toks_(lex_netlist(text)) {}

  CircuitGraph run() {
    expect_keyword("module");
    module_name_ = expect(NetlistToken::Kind::Ident, "module name").text;
    parse_header();
    while (!at_keyword("endmodule")) {
      if (peek().kind == NetlistToken::Kind::Eof)
        throw SyntaxError(peek().line, peek().col, "endmodule");
      parse_item();
    }
    next();  // endmodule
    return build_graph();
  }

private:
  const NetlistToken& peek(int ahead = 0) const {
    const std::size_t i = std::min(pos_ + ahead, toks_.size() - 1);
    return toks_[i];
  }
  const NetlistToken& next() { return toks_[std::min(pos_++, toks_.size() - 1)]; }
  bool at_keyword(const char* kw) const {
    return peek().kind == NetlistToken::Kind::Keyword && peek().text == kw;
  }
  bool at_punct(const char* p) const {
    return peek().kind == NetlistToken::Kind::Punct && peek().text == p;
  }
  const NetlistToken& expect(NetlistToken::Kind k, const char* what) {
    if (peek().kind != k) throw SyntaxError(peek().line, peek().col, what);
    return next();
  }
  void expect_punct(const char* p) {
    if (!at_punct(p)) throw SyntaxError(peek().line, peek().col, std::string("'") + p + "'");
    next();
  }
  void expect_keyword(const char* kw) {
    if (!at_keyword(kw)) throw SyntaxError(peek().line, peek().col, kw);
    next();
  }

  std::pair<int, int> parse_range() {  // returns {hi, lo}
    expect_punct("[");
    const int a = parse_number("range msb");
    expect_punct(":");
    const int b = parse_number("range lsb");
    expect_punct("]");
    if (b > a) throw SyntaxError(peek().line, peek().col, "range [hi:lo] with hi >= lo");
    return {a, b};
  }

  int parse_number(const char* what) {
    const auto& t = expect(NetlistToken::Kind::Number, what);
    if (t.text.find('\'') != std::string::npos)
      throw SyntaxError(t.line, t.col, "plain decimal number");
    return std::stoi(t.text);
  }

  void parse_header() {
    expect_punct("(");
    if (!at_punct(")")) {
      bool ansi = at_keyword("input") || at_keyword("output");
      bool cur_input = true;
      int cur_hi = 0, cur_lo = 0;
      bool cur_ranged = false;
      while (true) {
        if (ansi && (at_keyword("input") || at_keyword("output"))) {
          cur_input = peek().text == "input";
          next();
          cur_ranged = false;
          cur_hi = cur_lo = 0;
          if (at_punct("[")) {
            auto [hi, lo] = parse_range();
            cur_hi = hi;
            cur_lo = lo;
            cur_ranged = true;
          }
        }
        const auto& name = expect(NetlistToken::Kind::Ident, "port name");
        header_order_.push_back(name.text);
        if (ansi) declare_port(name, cur_input, cur_hi, cur_lo, cur_ranged);
        if (at_punct(",")) {
          next();
          continue;
        }
        break;
      }
    }
    expect_punct(")");
    expect_punct(";");
  }

  void declare_port(const NetlistToken& at, bool is_input, int hi, int lo, bool ranged) {
    if (ports_.count(at.text)) throw SyntaxError(at.line, at.col, "unique port name");
    PortDecl p;
    p.name = at.text;
    p.is_input = is_input;
    p.hi = hi;
    p.lo = lo;
    p.ranged = ranged;
    ports_[at.text] = p;
    declare_net(at, at.text, hi, lo, ranged);
  }

  void declare_net(const NetlistToken& at, const std::string& name, int hi, int lo, bool ranged) {
    if (nets_.count(name)) throw SyntaxError(at.line, at.col, "unique net name");
    nets_[name] = ranged ? std::pair<int, int>{hi, lo} : std::pair<int, int>{0, 0};
    net_ranged_[name] = ranged;
  }

  void parse_item() {
    if (at_keyword("input") || at_keyword("output") || at_keyword("wire")) {
      const bool is_wire = peek().text == "wire";
      const bool is_input = peek().text == "input";
      next();
      int hi = 0, lo = 0;
      bool ranged = false;
      if (at_punct("[")) {
        auto [h, l] = parse_range();
        hi = h;
        lo = l;
        ranged = true;
      }
      while (true) {
        const auto& name = expect(NetlistToken::Kind::Ident, "declaration name");
        if (is_wire) {
          declare_net(name, name.text, hi, lo, ranged);
        } else {
          // non-ANSI port direction: must appear in the header list
          if (std::find(header_order_.begin(), header_order_.end(), name.text) ==
              header_order_.end())
            throw SyntaxError(name.line, name.col, "port listed in module header");
          declare_port(name, is_input, hi, lo, ranged);
        }
        if (at_punct(",")) {
          next();
          continue;
        }
        break;
      }
      expect_punct(";");
      return;
    }

    if (peek().kind == NetlistToken::Kind::Keyword && is_gate_keyword(peek().text)) {
      parse_instance(peek().text, /*primitive=*/true);
      return;
    }
    if (peek().kind == NetlistToken::Kind::Ident) {
      // Non-primitive instantiation: the module survived synthesis undefined.
      throw UndefinedModuleError(peek().text);
    }
    throw SyntaxError(peek().line, peek().col, "declaration or gate instance");
  }

  struct Conn {
    enum class K { Net, Const0, Const1 } k = K::Net;
    std::string net;
    int line = 0, col = 0;
  };

  Conn parse_conn() {
    Conn c;
    c.line = peek().line;
    c.col = peek().col;
    if (peek().kind == NetlistToken::Kind::Number) {
      const auto& t = next();
      if (t.text == "1'b0" || t.text == "1'B0") {
        c.k = Conn::K::Const0;
      } else if (t.text == "1'b1" || t.text == "1'B1") {
        c.k = Conn::K::Const1;
      } else {
        throw SyntaxError(t.line, t.col, "1'b0 or 1'b1 constant");
      }
      return c;
    }
    const auto& name = expect(NetlistToken::Kind::Ident, "net name");
    if (at_punct("[")) {
      next();
      const int idx = parse_number("bit index");
      expect_punct("]");
      c.net = name.text + "[" + std::to_string(idx) + "]";
      auto it = nets_.find(name.text);
      if (it == nets_.end() || !net_ranged_[name.text] || idx < it->second.second ||
          idx > it->second.first)
        throw SyntaxError(name.line, name.col, "declared bit of a ranged net");
    } else {
      auto it = nets_.find(name.text);
      if (it == nets_.end()) throw SyntaxError(name.line, name.col, "declared net");
      if (net_ranged_[name.text]) {
        if (it->second.first != it->second.second)
          throw SyntaxError(name.line, name.col, "scalar net (got multi-bit)");
        c.net = name.text + "[" + std::to_string(it->second.second) + "]";
      } else {
        c.net = name.text;
      }
    }
    return c;
  }

  void parse_instance(const std::string& kind, bool /*primitive*/) {
    const auto& kw = next();
    if (peek().kind == NetlistToken::Kind::Ident) next();  // optional instance name
    expect_punct("(");
    std::vector<Conn> conns;
    while (true) {
      conns.push_back(parse_conn());
      if (at_punct(",")) {
        next();
        continue;
      }
      break;
    }
    expect_punct(")");
    expect_punct(";");

    const NodeKind nk = *node_kind_from_string(kind);
    std::size_t want = kind == "dff" ? 3 : (fan_in_arity(nk) + 1);
    if (conns.size() != want)
      throw SyntaxError(kw.line, kw.col,
                        kind + " with " + std::to_string(want) + " connections");
    Instance inst;
    inst.kind = nk;
    inst.out = conns[0];
    inst.ins.assign(conns.begin() + 1, conns.end());
    if (kind == "dff") inst.ins.pop_back();  // drop the clock pin
    instances_.push_back(std::move(inst));
  }

  // --- graph construction ---

  struct Instance {
    NodeKind kind;
    Conn out;
    std::vector<Conn> ins;
  };

  std::vector<std::string> port_bits(const PortDecl& p) const {
    std::vector<std::string> bits;
    if (!p.ranged) {
      bits.push_back(p.name);
    } else {
      for (int b = p.lo; b <= p.hi; ++b) bits.push_back(p.name + "[" + std::to_string(b) + "]");
    }
    return bits;
  }

  CircuitGraph build_graph() {
    std::vector<GraphNode> nodes;
    std::unordered_map<std::string, std::uint32_t> driver;

    auto set_driver = [&](const std::string& net, std::uint32_t id) {
      if (!driver.emplace(net, id).second) throw MultipleDriverError(net);
    };

    // 1) primary input bits, header port order, LSB first
    for (const auto& pname : header_order_) {
      auto it = ports_.find(pname);
      if (it == ports_.end())
        throw SyntaxError(1, 1, "direction declaration for port " + pname);
      if (!it->second.is_input) continue;
      for (const auto& bit : port_bits(it->second)) {
        nodes.push_back({NodeKind::Input, {}});
        set_driver(bit, static_cast<std::uint32_t>(nodes.size() - 1));
      }
    }

    // 2) gates in instantiation order; constants materialize at first use
    std::uint32_t const_node[2] = {UINT32_MAX, UINT32_MAX};
    std::vector<std::uint32_t> gate_ids;
    std::vector<GraphEdge> edges;
    for (auto& inst : instances_) {
      for (auto& in : inst.ins) {
        if (in.k == Conn::K::Net) continue;
        const int which = in.k == Conn::K::Const1 ? 1 : 0;
        if (const_node[which] == UINT32_MAX) {
          nodes.push_back({which ? NodeKind::Const1 : NodeKind::Const0, {}});
          const_node[which] = static_cast<std::uint32_t>(nodes.size() - 1);
        }
      }
      nodes.push_back({inst.kind, {}});
      const auto id = static_cast<std::uint32_t>(nodes.size() - 1);
      gate_ids.push_back(id);
      if (inst.out.k != Conn::K::Net)
        throw SyntaxError(inst.out.line, inst.out.col, "net on output pin");
      set_driver(inst.out.net, id);
    }

    auto resolve = [&](const Conn& c) -> std::uint32_t {
      if (c.k == Conn::K::Const0) return const_node[0];
      if (c.k == Conn::K::Const1) return const_node[1];
      auto it = driver.find(c.net);
      if (it == driver.end())
        throw SyntaxError(c.line, c.col, "driven net (no driver for " + c.net + ")");
      return it->second;
    };

    for (std::size_t gi = 0; gi < instances_.size(); ++gi) {
      const auto& inst = instances_[gi];
      const auto dst = gate_ids[gi];
      std::vector<std::uint32_t> srcs;
      for (const auto& in : inst.ins) srcs.push_back(resolve(in));
      // parallel edges are not representable; split the repeat with a buffer
      for (std::size_t k = 1; k < srcs.size(); ++k) {
        if (srcs[k] == srcs[0]) {
          nodes.push_back({NodeKind::Buf, {}});
          const auto buf_id = static_cast<std::uint32_t>(nodes.size() - 1);
          edges.push_back({srcs[k], buf_id});
          srcs[k] = buf_id;
        }
      }
      for (const auto s : srcs) edges.push_back({s, dst});
    }

    // 3) output bits, header port order, LSB first
    for (const auto& pname : header_order_) {
      const auto& p = ports_.at(pname);
      if (p.is_input) continue;
      for (const auto& bit : port_bits(p)) {
        nodes.push_back({NodeKind::Output, {}});
        const auto id = static_cast<std::uint32_t>(nodes.size() - 1);
        auto it = driver.find(bit);
        if (it != driver.end()) edges.push_back({it->second, id});
        // undriven output ports fail arity validation below
      }
    }

    GraphMeta meta;
    meta.design_id = module_name_;
    meta.source = GraphSource::Netlist;
    meta.synth_config = EffortTriple{Effort::Med, Effort::Med, Effort::Med};
    auto g = CircuitGraph::create(std::move(nodes), std::move(edges), std::move(meta));
    GraphMeta final_meta = g.meta();
    final_meta.area = recompute_area(g);
    final_meta.power = recompute_power(g);
    return CircuitGraph::create(std::vector<GraphNode>(g.nodes()),
                                std::vector<GraphEdge>(g.edges()), std::move(final_meta));
  }

  std::vector<NetlistToken> toks_;
  std::size_t pos_ = 0;
  std::string module_name_;
  std::vector<std::string> header_order_;
  std::map<std::string, PortDecl> ports_;
  std::map<std::string, std::pair<int, int>> nets_;  // name -> {hi, lo}
  std::map<std::string, bool> net_ranged_;
  std::vector<Instance> instances_;
};

std::string strip_comments_from_ws(const std::string& ws) {
  std::string out;
  std::size_t i = 0;
  while (i < ws.size()) {
    if (ws[i] == '/' && i + 1 < ws.size() && ws[i + 1] == '/') {
      while (i < ws.size() && ws[i] != '\n') ++i;
      out += ' ';
    } else if (ws[i] == '/' && i + 1 < ws.size() && ws[i + 1] == '*') {
      const auto end = ws.find("*/", i + 2);
      i = end == std::string::npos ? ws.size() : end + 2;
      out += ' ';
    } else {
      out += ws[i++];
    }
  }
  return out;
}

}  // namespace

CircuitGraph parse_netlist(const std::string& text) { return Parser(text).run(); }

std::string anonymize(const std::string& text, std::uint64_t /*seed*/) {
  auto toks = lex_netlist(text);
  std::unordered_map<std::string, std::string> module_map, inst_map;

  auto module_alias = [&](const std::string& name) -> const std::string& {
    auto it = module_map.find(name);
    if (it == module_map.end())
      it = module_map.emplace(name, "mod_" + std::to_string(module_map.size())).first;
    return it->second;
  };
  auto inst_alias = [&](const std::string& name) -> const std::string& {
    auto it = inst_map.find(name);
    if (it == inst_map.end())
      it = inst_map.emplace(name, "inst_" + std::to_string(inst_map.size())).first;
    return it->second;
  };

  std::vector<std::string> replaced(toks.size());
  for (std::size_t i = 0; i < toks.size(); ++i) replaced[i] = toks[i].text;

  for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
    const auto& t = toks[i];
    if (t.kind == NetlistToken::Kind::Keyword && t.text == "module" &&
        toks[i + 1].kind == NetlistToken::Kind::Ident) {
      replaced[i + 1] = module_alias(toks[i + 1].text);
      ++i;
      continue;
    }
    const bool inst_head =
        (t.kind == NetlistToken::Kind::Ident ||
         (t.kind == NetlistToken::Kind::Keyword && is_gate_keyword(t.text))) &&
        i + 2 < toks.size() && toks[i + 1].kind == NetlistToken::Kind::Ident &&
        toks[i + 2].kind == NetlistToken::Kind::Punct && toks[i + 2].text == "(";
    if (inst_head) {
      if (t.kind == NetlistToken::Kind::Ident) replaced[i] = module_alias(t.text);
      replaced[i + 1] = inst_alias(toks[i + 1].text);
      ++i;
    }
  }

  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    out += strip_comments_from_ws(toks[i].leading_ws);
    out += replaced[i];
  }
  return out;
}

std::pair<std::vector<NetlistFileResult>, NetlistBatchSummary> parse_and_validate_corpus(
    const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> paths;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".v") paths.push_back(e.path().string());
  std::sort(paths.begin(), paths.end());

  std::vector<NetlistFileResult> results;
  NetlistBatchSummary summary;
  for (const auto& p : paths) {
    NetlistFileResult r;
    r.path = p;
    try {
      std::ifstream in(p, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      r.graph = parse_netlist(ss.str());
      ++summary.ok;
    } catch (const SyntaxError& e) {
      r.error_kind = "syntax";
      r.error_message = e.what();
      ++summary.syntax;
    } catch (const UndefinedModuleError& e) {
      r.error_kind = "blackbox";
      r.error_message = e.what();
      ++summary.blackbox;
    } catch (const MultipleDriverError& e) {
      r.error_kind = "multidriver";
      r.error_message = e.what();
      ++summary.multidriver;
    } catch (const Error& e) {
      r.error_kind = "other";
      r.error_message = e.what();
      ++summary.other;
    }
    results.push_back(std::move(r));
  }
  return {std::move(results), summary};
}

}  // namespace bridges
