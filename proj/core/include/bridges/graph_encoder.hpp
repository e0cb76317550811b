#pragma once

#include <cstdint>
#include <string>

#include "bridges/circuit_graph.hpp"
#include "bridges/param_store.hpp"
#include "bridges/tensor.hpp"

namespace bridges {

struct EncoderConfig {
  int layers = 3;              // paper full scale: 5
  int d1 = 64;                 // node embedding width; paper full scale: 512
  int kind_vocab = kKindVocab;

  void validate() const {
    if (layers < 1) throw ShapeMismatch("encoder needs >= 1 layer");
    if (d1 < 8 || d1 % 4 != 0) throw ShapeMismatch("d1 must be >= 8 and divisible by 4");
    if (kind_vocab < kKindVocab) throw ShapeMismatch("kind_vocab too small");
  }
};

/// Closed-form trainable-parameter count (asserted at init).
long encoder_param_count(const EncoderConfig& cfg);

/// Message-passing encoder over the gate graph. Per layer, fan-in and
/// fan-out messages are mean-aggregated through direction-specific matrices
/// and fused by a residual LayerNorm(GELU(U.[h; m_in; m_out])) update.
template <class S>
struct EncoderT {
  EncoderConfig cfg;
  TensorT<S> kind_embed;  // [kind_vocab x d1]
  struct Layer {
    TensorT<S> w_in, w_out;        // [d1 x d1] each
    TensorT<S> update_w, update_b; // [d1 x 3*d1], [d1]
    TensorT<S> ln_gamma, ln_beta;  // [d1]
  };
  std::vector<Layer> layers;
};

using Encoder = EncoderT<float>;

/// Creates parameters (registered under "enc.*"), deterministic in seed.
template <class S>
EncoderT<S> init_encoder(const EncoderConfig& cfg, std::uint64_t seed, ParamStoreT<S>& store);

/// Binds an encoder onto parameters already in the store (checkpoint load,
/// double-precision widening).
template <class S>
EncoderT<S> bind_encoder(const EncoderConfig& cfg, ParamStoreT<S>& store);

/// Node embeddings h_V, [|V| x d1]. Throws EmptyGraph on |V| = 0.
template <class S>
TensorT<S> encode_nodes(const CircuitGraph& g, const EncoderT<S>& enc);

/// Stacked pooled graph embedding h_G, rows (mean, max, sum, min), [4 x d1].
template <class S>
TensorT<S> encode_graph(const CircuitGraph& g, const EncoderT<S>& enc);

inline constexpr int kPoolRows = 4;

}  // namespace bridges
