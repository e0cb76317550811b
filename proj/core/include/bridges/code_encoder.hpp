#pragma once

#include <cstdint>
#include <vector>

#include "bridges/param_store.hpp"
#include "bridges/tensor.hpp"

namespace bridges {

/// Design encoder for the code-text retrieval baseline: token + position
/// embeddings, one GELU projection, LayerNorm, and the same 4-row pooling as
/// the graph encoder, so the projector sees an identical interface.
struct CodeEncoderConfig {
  int d1 = 64;            // must match EncoderConfig::d1 / QFormerConfig::d_graph
  int vocab_size = 0;
  int max_code_len = 128; // code tokens beyond this are truncated

  void validate() const {
    if (vocab_size <= 0) throw ShapeMismatch("code vocab unset");
    if (max_code_len < 1) throw ShapeMismatch("max_code_len");
  }
};

template <class S>
struct CodeEncoderT {
  CodeEncoderConfig cfg;
  TensorT<S> token_embed;  // [V x d1]
  TensorT<S> pos_embed;    // [max_code_len x d1]
  TensorT<S> w, b;         // [d1 x d1], [d1]
  TensorT<S> ln_g, ln_b;
};

using CodeEncoder = CodeEncoderT<float>;

template <class S>
CodeEncoderT<S> init_code_encoder(const CodeEncoderConfig& cfg, std::uint64_t seed,
                                  ParamStoreT<S>& store);
template <class S>
CodeEncoderT<S> bind_code_encoder(const CodeEncoderConfig& cfg, ParamStoreT<S>& store);

/// Pooled [4 x d1] design embedding from code token ids (truncated here).
template <class S>
TensorT<S> encode_code(const CodeEncoderT<S>& ce, const std::vector<int>& code_ids);

}  // namespace bridges
