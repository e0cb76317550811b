#include "bridges/sim.hpp"

#include <algorithm>

#include "bridges/error.hpp"

namespace bridges {

Simulator::Simulator(const CircuitGraph& g) : g_(g) {
  const std::size_t n = g.node_count();
  for (std::uint32_t i = 0; i < n; ++i) {
    switch (g.kind(i)) {
      case NodeKind::Input: inputs_.push_back(i); break;
      case NodeKind::Output: outputs_.push_back(i); break;
      case NodeKind::Dff: dffs_.push_back(i); break;
      case NodeKind::Opaque:
        throw ValidationError("meta", static_cast<int>(i), "cannot simulate opaque node");
      default: break;
    }
  }
  // Kahn's ordering over combinational dependencies; dff outputs are sources.
  std::vector<int> pending(n, 0);
  std::vector<std::uint32_t> ready;
  for (std::uint32_t i = 0; i < n; ++i) {
    if (g.kind(i) == NodeKind::Dff) {
      pending[i] = 0;  // state value is free
    } else {
      pending[i] = static_cast<int>(g.fan_in()[i].size());
    }
    if (pending[i] == 0) ready.push_back(i);
  }
  topo_.reserve(n);
  while (!ready.empty()) {
    const std::uint32_t v = ready.back();
    ready.pop_back();
    topo_.push_back(v);
    for (const auto u : g.fan_out()[v]) {
      if (g.kind(u) == NodeKind::Dff) continue;
      if (--pending[u] == 0) ready.push_back(u);
    }
  }
  if (topo_.size() != n)
    throw ValidationError("cycle", -1, "graph not combinationally orderable");
}

std::uint64_t Simulator::eval(std::uint64_t assignment) const {
  const std::size_t n = g_.node_count();
  std::vector<std::uint8_t> value(n, 0);

  std::size_t bit = 0;
  for (const auto id : inputs_) value[id] = (assignment >> bit++) & 1;
  for (const auto id : dffs_) value[id] = (assignment >> bit++) & 1;

  for (const auto v : topo_) {
    const auto& fi = g_.fan_in()[v];
    switch (g_.kind(v)) {
      case NodeKind::Input: case NodeKind::Dff: break;
      case NodeKind::Const0: value[v] = 0; break;
      case NodeKind::Const1: value[v] = 1; break;
      case NodeKind::And: value[v] = value[fi[0]] & value[fi[1]]; break;
      case NodeKind::Nand: value[v] = 1 ^ (value[fi[0]] & value[fi[1]]); break;
      case NodeKind::Or: value[v] = value[fi[0]] | value[fi[1]]; break;
      case NodeKind::Nor: value[v] = 1 ^ (value[fi[0]] | value[fi[1]]); break;
      case NodeKind::Xor: value[v] = value[fi[0]] ^ value[fi[1]]; break;
      case NodeKind::Xnor: value[v] = 1 ^ (value[fi[0]] ^ value[fi[1]]); break;
      case NodeKind::Not: value[v] = 1 ^ value[fi[0]]; break;
      case NodeKind::Buf: case NodeKind::Output: value[v] = value[fi[0]]; break;
      case NodeKind::Opaque: break;
    }
  }

  std::uint64_t out = 0;
  bit = 0;
  for (const auto id : outputs_) out |= static_cast<std::uint64_t>(value[id]) << bit++;
  for (const auto id : dffs_) {
    // next state = value at the dff's data pin
    out |= static_cast<std::uint64_t>(value[g_.fan_in()[id][0]]) << bit++;
  }
  return out;
}

bool functionally_equivalent(const CircuitGraph& a, const CircuitGraph& b, int max_free_bits) {
  const Simulator sa(a), sb(b);
  if (sa.primary_inputs().size() != sb.primary_inputs().size()) return false;
  if (sa.primary_outputs().size() != sb.primary_outputs().size()) return false;
  if (sa.state_nodes().size() != sb.state_nodes().size()) return false;
  const std::size_t bits = sa.free_bit_count();
  if (bits > static_cast<std::size_t>(max_free_bits))
    throw Error("too many free bits for exhaustive simulation: " + std::to_string(bits));
  const std::uint64_t cases = 1ULL << bits;
  for (std::uint64_t x = 0; x < cases; ++x)
    if (sa.eval(x) != sb.eval(x)) return false;
  return true;
}

}  // namespace bridges
