#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bridges/circuit_graph.hpp"
#include "bridges/circuit_type.hpp"
#include "bridges/rng.hpp"

namespace bridges {

enum class Family : std::uint8_t {
  Adder, Subtractor, Comparator, MultiplierShiftAdd, MuxTree, PriorityEncoder, Parity, Counter,
};
inline constexpr int kFamilyCount = 8;

const char* to_string(Family f);
std::optional<Family> family_from_string(const std::string& s);

/// Fixed family -> circuit-type mapping table.
CircuitType circuit_type_of(Family f);

enum class Split : std::uint8_t { Train, Val, Test };
const char* to_string(Split s);
std::optional<Split> split_from_string(const std::string& s);

struct DesignSpec {
  Family family = Family::Adder;
  int width = 2;  // [2,16]
  std::uint64_t seed = 0;
};

struct DesignRecord {
  std::string design_id;
  std::string rtl_text;     // anonymized structural netlist
  std::string description;  // templated English, >= 12 tokens
  CircuitType circuit_type = CircuitType::OtherUnits;
  std::vector<CircuitGraph> graphs;  // [0] = base, [1..] = synthesis variants
  Split split = Split::Train;
};

/// Deterministic in `spec`. Low seed bits select structural options, bits
/// 8..15 pick the description template, bits 16..20 pad the netlist with
/// inert double-inverter pairs (structural diversity across same-shape
/// designs). Throws UnsupportedWidth outside [2,16].
DesignRecord generate_design(const DesignSpec& spec);

/// Appends up to `n_variants` (<= 27) semantics-preserving rewrites of
/// graphs[0], one per (low/med/high)^3 effort triple in lexicographic order.
/// Effort maps to an application count of ceil(frac * gates), frac = 0.02 /
/// 0.05 / 0.10, min 1: triple[0] -> double-negation pairs, triple[1] ->
/// De Morgan rewrites, triple[2] -> buffer insertions.
void synth_variants(DesignRecord& record, int n_variants, std::uint64_t seed = 0);

// Individual rewrites (exposed for tests). Each returns a new graph with
// area/power recomputed and `config` recorded.
CircuitGraph rewrite_negation_pair(const CircuitGraph& g, Rng& rng);
CircuitGraph rewrite_demorgan(const CircuitGraph& g, Rng& rng);
CircuitGraph rewrite_buffer(const CircuitGraph& g, Rng& rng);

/// Replaces a graph's metadata (revalidates under the new source rules).
CircuitGraph with_meta(const CircuitGraph& g, GraphMeta meta);

/// 18:1:1 per-design assignment: deterministic for a fixed seed, each split
/// within one design of the exact ratio, remainders to the largest bucket.
void split_dataset(std::vector<DesignRecord>& records, std::uint64_t seed);

struct CorpusStats {
  std::map<std::string, long> designs_per_split;
  std::map<std::string, long> designs_per_type;
  std::vector<long> node_histogram;  // decade buckets [1,10), [10,100), ...
  long total_graphs = 0;
  long total_graph_tokens = 0;  // sum of |V| over all graphs

  std::string to_json() const;
  std::string to_table() const;
};

CorpusStats corpus_stats(const std::vector<DesignRecord>& records);

/// Corpus directory layout: <dir>/designs/<design_id>/record.json plus one
/// graph_<k>.json interchange file per variant.
void save_corpus(const std::vector<DesignRecord>& records, const std::string& dir);
std::vector<DesignRecord> load_corpus(const std::string& dir);
void save_record(const DesignRecord& r, const std::string& design_dir);
DesignRecord load_record(const std::string& design_dir);

struct GenCorpusOptions {
  int n_designs = 64;
  std::uint64_t seed = 0;
  int n_variants = 0;  // synthesis-variant graphs per design
  int width_min = 2;
  int width_max = 16;
};

/// Round-robins families, cycles widths, and derives per-design seeds with
/// hash_seed(seed, i). Designs that would collide structurally with an
/// earlier (family,width,options) draw get extra netlist padding so every
/// design in the corpus has a distinct gate count within its shape class.
std::vector<DesignRecord> generate_corpus(const GenCorpusOptions& opt);

}  // namespace bridges
