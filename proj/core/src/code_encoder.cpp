#include "bridges/code_encoder.hpp"

#include <cmath>

#include "bridges/rng.hpp"

namespace bridges {

namespace {

template <class S>
TensorT<S> init_uniform(Shape shape, long fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<S> data(shape_numel(shape));
  for (auto& v : data) v = static_cast<S>(rng.uniform(-bound, bound));
  return TensorT<S>::param(std::move(shape), std::move(data));
}

template <class S>
TensorT<S> init_normal(Shape shape, double stddev, Rng& rng) {
  std::vector<S> data(shape_numel(shape));
  for (auto& v : data) v = static_cast<S>(rng.normal(0.0, stddev));
  return TensorT<S>::param(std::move(shape), std::move(data));
}

template <class S>
TensorT<S> init_const(Shape shape, double value) {
  return TensorT<S>::param(shape, std::vector<S>(shape_numel(shape), static_cast<S>(value)));
}

}  // namespace

template <class S>
CodeEncoderT<S> init_code_encoder(const CodeEncoderConfig& cfg, std::uint64_t seed,
                                  ParamStoreT<S>& store) {
  cfg.validate();
  Rng rng(hash_seed(seed, 0xC0DE));
  CodeEncoderT<S> ce;
  ce.cfg = cfg;
  const long d = cfg.d1;
  ce.token_embed = store.add("cenc.token_embed", init_normal<S>({cfg.vocab_size, d}, 0.02, rng));
  ce.pos_embed = store.add("cenc.pos_embed", init_normal<S>({cfg.max_code_len, d}, 0.02, rng));
  ce.w = store.add("cenc.w", init_uniform<S>({d, d}, d, rng));
  ce.b = store.add("cenc.b", init_const<S>({d}, 0.0));
  ce.ln_g = store.add("cenc.ln_g", init_const<S>({d}, 1.0));
  ce.ln_b = store.add("cenc.ln_b", init_const<S>({d}, 0.0));
  return ce;
}

template <class S>
CodeEncoderT<S> bind_code_encoder(const CodeEncoderConfig& cfg, ParamStoreT<S>& store) {
  cfg.validate();
  CodeEncoderT<S> ce;
  ce.cfg = cfg;
  ce.token_embed = store.at("cenc.token_embed");
  ce.pos_embed = store.at("cenc.pos_embed");
  ce.w = store.at("cenc.w");
  ce.b = store.at("cenc.b");
  ce.ln_g = store.at("cenc.ln_g");
  ce.ln_b = store.at("cenc.ln_b");
  return ce;
}

template <class S>
TensorT<S> encode_code(const CodeEncoderT<S>& ce, const std::vector<int>& code_ids) {
  std::vector<int> ids = code_ids;
  if (static_cast<int>(ids.size()) > ce.cfg.max_code_len) ids.resize(ce.cfg.max_code_len);
  if (ids.empty()) throw ShapeMismatch("encode_code with no tokens");
  std::vector<int> pos(ids.size());
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<int>(i);
  TensorT<S> x = add(embedding_rows(ce.token_embed, ids), embedding_rows(ce.pos_embed, pos));
  TensorT<S> h = layer_norm(gelu(linear(x, ce.w, ce.b)), ce.ln_g, ce.ln_b);
  return pool4(h);
}

#define BRIDGES_INSTANTIATE_CE(S)                                                            \
  template CodeEncoderT<S> init_code_encoder(const CodeEncoderConfig&, std::uint64_t,        \
                                             ParamStoreT<S>&);                               \
  template CodeEncoderT<S> bind_code_encoder(const CodeEncoderConfig&, ParamStoreT<S>&);     \
  template TensorT<S> encode_code(const CodeEncoderT<S>&, const std::vector<int>&);

BRIDGES_INSTANTIATE_CE(float)
BRIDGES_INSTANTIATE_CE(double)

#undef BRIDGES_INSTANTIATE_CE

}  // namespace bridges
