#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bridges/circuit_graph.hpp"

namespace bridges {

struct NetlistToken {
  enum class Kind { Ident, Keyword, Punct, Number, Eof };
  Kind kind = Kind::Eof;
  std::string text;
  int line = 1;
  int col = 1;
  /// Whitespace (and comments) preceding the token; concatenating
  /// leading_ws + text over the stream reproduces the input byte-for-byte.
  std::string leading_ws;
};

/// Tokenizes the structural-Verilog subset. Throws SyntaxError on characters
/// outside the subset.
std::vector<NetlistToken> lex_netlist(const std::string& text);

/// Parses one structural module (gate primitives + dff) into a validated
/// CircuitGraph. Node ids: primary input bits (port order, LSB first), then
/// gates in instantiation order (constants slot in at first use), then
/// output bits (port order, LSB first).
///
/// A gate whose two input pins resolve to the same driver gets a buffer
/// inserted on the second pin; the IR is a simple graph and cannot carry
/// parallel edges.
CircuitGraph parse_netlist(const std::string& text);

/// Replaces module names with mod_k and instance names with inst_k, numbered
/// by first appearance. Net and port names are preserved; comments are
/// stripped. Deterministic and idempotent. `seed` is reserved for a future
/// salted mode and currently unused.
std::string anonymize(const std::string& text, std::uint64_t seed);

struct NetlistFileResult {
  std::string path;
  std::optional<CircuitGraph> graph;
  std::string error_kind;  // "syntax" | "blackbox" | "multidriver" | "other"
  std::string error_message;
};

struct NetlistBatchSummary {
  int ok = 0;
  int syntax = 0;
  int blackbox = 0;
  int multidriver = 0;
  int other = 0;
};

/// Parses every .v file under `dir` (sorted by path); one failure never
/// aborts the batch.
std::pair<std::vector<NetlistFileResult>, NetlistBatchSummary> parse_and_validate_corpus(
    const std::string& dir);

}  // namespace bridges
