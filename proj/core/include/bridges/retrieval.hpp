#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bridges/model.hpp"

namespace bridges {

struct IndexEntry {
  std::string design_id;
  std::vector<float> graph_queries;  // q x d_proj row-major, unit rows
  std::vector<float> text_rep;       // d_proj, unit
  double area = 0.0;
  double power = 0.0;
  CircuitType circuit_type = CircuitType::OtherUnits;
};

struct RetrievalIndex {
  std::string fingerprint;
  int q = 0;
  int d_proj = 0;
  std::vector<IndexEntry> entries;
};

/// One entry per record, graph variant 0 by convention.
RetrievalIndex build_index(const Stage1Model& m, const std::vector<const DesignRecord*>& records);

/// File layout: header JSON line, raw little-endian f32 block
/// (N x (q+1) x d_proj), entry-table JSON line.
void save_index(const RetrievalIndex& idx, const std::string& path);
RetrievalIndex load_index(const std::string& path);

enum class Direction { Function2Design, Design2Function };

/// A query embedding: rows == 1 for text probes, rows == q for graph probes.
struct Probe {
  std::vector<float> data;
  int rows = 1;
};

Probe text_probe(const Stage1Model& m, const std::string& description);
Probe graph_probe(const Stage1Model& m, const CircuitGraph& g,
                  const std::vector<int>& code_ids = {});

/// Exhaustive max-over-queries scan; descending score, ties by design_id.
/// Throws FingerprintMismatch unless probe_fingerprint matches the index.
std::vector<std::string> query(const RetrievalIndex& idx, const Probe& probe, Direction dir,
                               int k, const std::string& probe_fingerprint);

struct RetrievalMetrics {
  double acc_f2d = 0, r20_f2d = 0;
  double acc_d2f = 0, r20_d2f = 0;
};

struct RetrievalReport {
  RetrievalMetrics in_batch;
  RetrievalMetrics fullset;
  int n_designs = 0;
  int in_batch_size = 0;
};

/// Both directions, in-batch (seeded batches) and fullset protocols, over an
/// index built from `test` (variant 0 per design).
RetrievalReport eval_retrieval(const Stage1Model& m, const std::vector<const DesignRecord*>& test,
                               int in_batch_size = 64, std::uint64_t seed = 0);

struct PpaEstimate {
  double area = 0.0;
  double power = 0.0;
  std::string neighbor_id;
};

/// Training-free estimate: the top-1 neighbor's stored metrics. Graph-graph
/// similarity is the max dot product over all (probe row, entry row) pairs.
PpaEstimate estimate_ppa(const RetrievalIndex& idx, const Stage1Model& m, const CircuitGraph& g,
                         const std::vector<int>& code_ids = {});

struct PpaBuckets {
  double area_lt1 = 0, area_lt10 = 0, area_lt50 = 0;
  double power_lt1 = 0, power_lt10 = 0, power_lt50 = 0;
  std::vector<double> area_mape, power_mape;  // per probe, estimate vs probe truth
};

/// MAPE bucket table over probe graphs; ground truth is each probe graph's
/// own area/power metadata. Throws ZeroGroundTruth when a truth is zero.
PpaBuckets eval_ppa(const RetrievalIndex& idx, const Stage1Model& m,
                    const std::vector<const CircuitGraph*>& probes);

}  // namespace bridges
