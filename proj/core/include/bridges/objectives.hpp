#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bridges/model.hpp"

namespace bridges {

/// One contrastive/matching/generation batch. text_ids are content ids
/// (specials added per objective); no two items may share a design_id.
struct LossBatch {
  std::vector<const CircuitGraph*> graphs;
  std::vector<std::vector<int>> text_ids;
  std::vector<std::vector<int>> code_ids;
  std::vector<std::string> design_ids;

  long size() const { return static_cast<long>(graphs.size()); }
};

/// Pooled design embeddings for every batch item, computed once and shared
/// by the three objectives.
template <class S>
std::vector<TensorT<S>> design_embeddings(const Stage1ModelT<S>& m, const LossBatch& batch);

/// Symmetric InfoNCE over the max-over-queries similarity matrix, scaled by
/// the learned temperature. Fills `sims` (row-major B x B, pre-temperature)
/// when given. Throws DuplicateDesignInBatch and requires B >= 2.
template <class S>
TensorT<S> gtc_loss(const Stage1ModelT<S>& m, const LossBatch& batch,
                    const std::vector<TensorT<S>>& h_g, std::vector<double>* sims = nullptr);

/// Row/column argmax off the diagonal, ties to the smallest index. Returns
/// (hard negative text for each graph, hard negative graph for each text).
std::pair<std::vector<int>, std::vector<int>> mine_hard_negatives(
    const std::vector<double>& sims, long b);

/// Binary matching loss over (positive, hard-negative-text, hard-negative-
/// graph) triples; per-query 2-class logits averaged across queries.
template <class S>
TensorT<S> gtm_loss(const Stage1ModelT<S>& m, const LossBatch& batch,
                    const std::vector<TensorT<S>>& h_g, const std::vector<int>& neg_text,
                    const std::vector<int>& neg_graph);

/// Graph-grounded next-token loss (BOS-shifted, EOS-terminated), token-count
/// weighted across the batch.
template <class S>
TensorT<S> gtg_loss(const Stage1ModelT<S>& m, const LossBatch& batch,
                    const std::vector<TensorT<S>>& h_g);

template <class S>
struct Stage1StepOut {
  TensorT<S> total, l_gtc, l_gtm, l_gtg;
  std::vector<double> sims;
};

/// L = L_GTC + L_GTM + L_GTG with equal weights.
template <class S>
Stage1StepOut<S> stage1_losses(const Stage1ModelT<S>& m, const LossBatch& batch);

/// Content ids for a record's description, truncated to fit max_text_len
/// with one special token.
std::vector<int> content_ids_for(const Stage1Model& m, const DesignRecord& rec);
std::vector<int> code_ids_for(const Stage1Model& m, const DesignRecord& rec);

/// exp(mean token NLL) of the record's description under the GTG head.
/// zero_graph replaces the design embedding with zeros at evaluation.
double perplexity(const Stage1Model& m, const DesignRecord& rec, bool zero_graph = false,
                  int variant = 0);
double perplexity_over(const Stage1Model& m, const std::vector<const DesignRecord*>& recs,
                       bool zero_graph = false);

/// Deterministic argmax decoding until EOS or max_len content tokens.
std::vector<int> greedy_decode(const Stage1Model& m, const CircuitGraph& g, int max_len);

struct TrainConfig {
  int epochs = 10;
  int batch_size = 32;
  std::uint64_t seed = 0;
  double lr = 1e-3;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double warmup_frac = 0.05;  // linear warmup, then cosine decay to zero
  bool early_stop = true;
  int eval_batch = 32;
  std::string log_path;  // JSONL, one line per step; empty = no file
};

struct StepLog {
  long step;
  double l_gtc, l_gtm, l_gtg, lr, tau;
};

struct TrainResult {
  Stage1Model model;
  std::vector<StepLog> steps;
  std::vector<double> val_accuracy;
  int epochs_run = 0;
};

/// Joint stage-1 training. Deterministic for a fixed seed on one thread;
/// stops early when validation in-batch retrieval accuracy drops for two
/// consecutive epochs. Throws NumericError on a non-finite loss.
TrainResult train_stage1(const std::vector<DesignRecord>& records, const ModelConfig& cfg,
                         const TrainConfig& tc);

/// In-batch Function2Design top-1 accuracy over seeded batches (used for
/// early stopping; the retrieval module owns the full evaluation).
double in_batch_f2d_accuracy(const Stage1Model& m, const std::vector<const DesignRecord*>& recs,
                             int batch_size, std::uint64_t seed);

}  // namespace bridges
