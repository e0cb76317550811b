#pragma once

#include <optional>
#include <string>

#include "bridges/code_encoder.hpp"
#include "bridges/corpus.hpp"
#include "bridges/graph_encoder.hpp"
#include "bridges/param_store.hpp"
#include "bridges/qformer.hpp"
#include "bridges/tokenizer.hpp"

namespace bridges {

/// Which design-side encoder feeds the projector: the graph encoder (the
/// real model) or the code-text encoder (the retrieval baseline).
enum class DesignBranch { Graph, CodeText };

const char* to_string(DesignBranch b);
std::optional<DesignBranch> design_branch_from_string(const std::string& s);

struct ModelConfig {
  DesignBranch branch = DesignBranch::Graph;
  EncoderConfig encoder;
  QFormerConfig qformer;
  CodeEncoderConfig code_encoder;
};

/// Everything one trained stage-1 checkpoint means: parameters, bound
/// module views, and the tokenizers that define its vocabulary.
template <class S>
struct Stage1ModelT {
  ModelConfig cfg;
  ParamStoreT<S> store;
  EncoderT<S> encoder;          // branch == Graph
  CodeEncoderT<S> code_encoder; // branch == CodeText
  QFormerT<S> qformer;
  TextTokenizer text_tok;
  TextTokenizer code_tok;  // only meaningful for the code branch

  /// Pooled [4 x d] design embedding through the configured branch.
  TensorT<S> design_embedding(const CircuitGraph& g, const std::vector<int>& code_ids) const {
    if (cfg.branch == DesignBranch::Graph) return encode_graph(g, encoder);
    return encode_code(code_encoder, code_ids);
  }
};

using Stage1Model = Stage1ModelT<float>;

/// Fresh model with tokenizers built from the records' train split.
Stage1Model init_stage1_model(const ModelConfig& cfg, const std::vector<DesignRecord>& records,
                              std::uint64_t seed);

/// Bundle persistence. base path "m" writes m.ckpt (tensor_core format),
/// m.json (configs), m.vocab and, for the code branch, m.code_vocab.
void save_model(const Stage1Model& model, const std::string& base_path);
Stage1Model load_model(const std::string& base_path);

std::string model_fingerprint(const Stage1Model& model);

/// Double-precision mirror for the finite-difference oracle.
Stage1ModelT<double> widen_model(const Stage1Model& model);

}  // namespace bridges
