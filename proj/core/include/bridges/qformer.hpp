#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bridges/param_store.hpp"
#include "bridges/tensor.hpp"

namespace bridges {

struct QFormerConfig {
  int blocks = 4;          // paper full scale: 12
  int heads = 4;
  int d_model = 64;        // d2 = d3, one hidden width
  int n_queries = 8;
  int d_graph = 64;        // width of the pooled graph rows (= encoder d1)
  int vocab_size = 0;      // set from the tokenizer
  int max_text_len = 64;   // includes CLS/BOS; paper context cap: 2048
  int d_proj = 32;         // contrastive projection width
  int ffn_mult = 4;

  void validate() const {
    if (blocks < 1 || heads < 1 || n_queries < 1) throw ShapeMismatch("qformer config");
    if (d_model % heads != 0) throw ShapeMismatch("d_model must divide by heads");
    if (vocab_size <= 0) throw ShapeMismatch("vocab_size unset");
  }
};

/// The three attention regimes of stage-1 training.
enum class MaskKind { Unimodal, BimodalFull, MultimodalCausal };

/// (q+T)x(q+T) self-attention mask.
///  - Unimodal: query block and text block each self-attend, no cross talk.
///  - BimodalFull: everything attends to everything.
///  - MultimodalCausal: queries attend only to queries; text position i
///    attends to every query and to text positions <= i.
AttnMask make_mask(MaskKind kind, long q, long t);

template <class S>
struct QFormerT {
  QFormerConfig cfg;
  TensorT<S> query_table;   // [q x d]
  TensorT<S> token_embed;   // [V x d]; also the tied LM head weight
  TensorT<S> pos_embed;     // [T_max x d]
  TensorT<S> head_bias;     // [V]

  struct Block {
    TensorT<S> wq, wk, wv, wo;        // [d x d]
    TensorT<S> bq, bk, bv, bo;        // [d]
    TensorT<S> ln1_g, ln1_b;
    bool has_cross = false;           // even-indexed blocks
    TensorT<S> cwq, cwo;              // [d x d]
    TensorT<S> cwk, cwv;              // [d x d_graph]
    TensorT<S> cbq, cbk, cbv, cbo;
    TensorT<S> lnx_g, lnx_b;
    TensorT<S> ffn_w1, ffn_b1;        // [4d x d], [4d]
    TensorT<S> ffn_w2, ffn_b2;        // [d x 4d], [d]
    TensorT<S> ln2_g, ln2_b;
  };
  std::vector<Block> blocks;
  TensorT<S> lnf_g, lnf_b;

  TensorT<S> gtc_graph_w, gtc_graph_b;  // [d_proj x d]
  TensorT<S> gtc_text_w, gtc_text_b;    // [d_proj x d]
  TensorT<S> gtm_w, gtm_b;              // [2 x d], zero-initialized
  TensorT<S> temperature;               // [1], init 0.07, clamped >= 1e-3
};

using QFormer = QFormerT<float>;

template <class S>
QFormerT<S> init_qformer(const QFormerConfig& cfg, std::uint64_t seed, ParamStoreT<S>& store);
template <class S>
QFormerT<S> bind_qformer(const QFormerConfig& cfg, ParamStoreT<S>& store);

template <class S>
struct QFormerOutput {
  TensorT<S> h_q;          // [q x d]
  TensorT<S> text_states;  // [T x d], undefined when text absent
  TensorT<S> text_logits;  // [T x V], undefined when text absent
};

/// Shared-trunk forward. `h_graph` ([4 x d_graph]) may be null: cross
/// attention sublayers then pass queries through unchanged. `text_ids` may
/// be null (graph-only pass); when present it must already carry its special
/// tokens (CLS or BOS). Throws TextTooLong past max_text_len.
template <class S>
QFormerOutput<S> qformer_forward(const QFormerT<S>& qf, const TensorT<S>* h_graph,
                                 const std::vector<int>* text_ids, MaskKind kind);

/// CLS-position output state of a unimodal pass over [CLS] + content ids.
template <class S>
TensorT<S> text_representation(const QFormerT<S>& qf, const std::vector<int>& content_ids);

/// L2-normalized GTC projections.
template <class S>
TensorT<S> gtc_project_graph(const QFormerT<S>& qf, const TensorT<S>& h_q);     // [q x d_proj]
template <class S>
TensorT<S> gtc_project_text(const QFormerT<S>& qf, const TensorT<S>& text_rep); // [1 x d_proj]

/// max over query rows of <projected query, projected text> (scalar tensor).
template <class S>
TensorT<S> gtc_similarity(const QFormerT<S>& qf, const TensorT<S>& h_q,
                          const TensorT<S>& text_rep);

}  // namespace bridges
