#pragma once

#include <cstdint>
#include <vector>

#include "bridges/circuit_graph.hpp"

namespace bridges {

/// Combinational evaluator over a gate-level graph. Sequential graphs are
/// handled by treating every dff output as a pseudo-input (current state) and
/// every dff data pin as a pseudo-output (next state), so two graphs are
/// equivalent iff their output *and* next-state functions agree on every
/// (input, state) assignment.
class Simulator {
public:
  explicit Simulator(const CircuitGraph& g);

  std::size_t free_bit_count() const { return inputs_.size() + dffs_.size(); }
  const std::vector<std::uint32_t>& primary_inputs() const { return inputs_; }
  const std::vector<std::uint32_t>& primary_outputs() const { return outputs_; }
  const std::vector<std::uint32_t>& state_nodes() const { return dffs_; }

  /// `assignment` packs input bits (low bits, in primary-input id order) then
  /// state bits. Returns output bits (id order) then next-state bits, packed
  /// the same way.
  std::uint64_t eval(std::uint64_t assignment) const;

private:
  const CircuitGraph& g_;
  std::vector<std::uint32_t> inputs_, outputs_, dffs_;
  std::vector<std::uint32_t> topo_;  // combinational eval order
};

/// Exhaustive equivalence check; graphs must agree on (#inputs, #outputs,
/// #state bits). Returns false on any mismatch. Refuses graphs with more than
/// `max_free_bits` free bits (2^bits assignments).
bool functionally_equivalent(const CircuitGraph& a, const CircuitGraph& b,
                             int max_free_bits = 22);

}  // namespace bridges
