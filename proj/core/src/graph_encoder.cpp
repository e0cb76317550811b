#include "bridges/graph_encoder.hpp"

#include <cmath>

#include "bridges/rng.hpp"

namespace bridges {

long encoder_param_count(const EncoderConfig& cfg) {
  const long d = cfg.d1;
  // per layer: W_in + W_out (2*d^2), update (3*d^2 + d), layer norm (2*d)
  return static_cast<long>(cfg.kind_vocab) * d + cfg.layers * (5 * d * d + 3 * d);
}

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

std::string layer_name(int l, const char* field) {
  return "enc.l" + std::to_string(l) + "." + field;
}

}  // namespace

template <class S>
EncoderT<S> init_encoder(const EncoderConfig& cfg, std::uint64_t seed, ParamStoreT<S>& store) {
  cfg.validate();
  Rng rng(hash_seed(seed, 0xE11C));
  EncoderT<S> enc;
  enc.cfg = cfg;
  const long d = cfg.d1;
  long count = 0;
  auto reg = [&](const std::string& name, TensorT<S> t) -> TensorT<S>& {
    count += t.numel();
    return store.add(name, std::move(t));
  };
  enc.kind_embed = reg("enc.kind_embed", init_normal<S>({cfg.kind_vocab, d}, 0.02, rng));
  for (int l = 0; l < cfg.layers; ++l) {
    typename EncoderT<S>::Layer layer;
    layer.w_in = reg(layer_name(l, "w_in"), init_uniform<S>({d, d}, d, rng));
    layer.w_out = reg(layer_name(l, "w_out"), init_uniform<S>({d, d}, d, rng));
    layer.update_w = reg(layer_name(l, "update_w"), init_uniform<S>({d, 3 * d}, 3 * d, rng));
    layer.update_b = reg(layer_name(l, "update_b"), init_const<S>({d}, 0.0));
    layer.ln_gamma = reg(layer_name(l, "ln_gamma"), init_const<S>({d}, 1.0));
    layer.ln_beta = reg(layer_name(l, "ln_beta"), init_const<S>({d}, 0.0));
    enc.layers.push_back(std::move(layer));
  }
  if (count != encoder_param_count(cfg))
    throw Error("encoder parameter count mismatch vs closed form");
  return enc;
}

template <class S>
EncoderT<S> bind_encoder(const EncoderConfig& cfg, ParamStoreT<S>& store) {
  cfg.validate();
  EncoderT<S> enc;
  enc.cfg = cfg;
  enc.kind_embed = store.at("enc.kind_embed");
  for (int l = 0; l < cfg.layers; ++l) {
    typename EncoderT<S>::Layer layer;
    layer.w_in = store.at(layer_name(l, "w_in"));
    layer.w_out = store.at(layer_name(l, "w_out"));
    layer.update_w = store.at(layer_name(l, "update_w"));
    layer.update_b = store.at(layer_name(l, "update_b"));
    layer.ln_gamma = store.at(layer_name(l, "ln_gamma"));
    layer.ln_beta = store.at(layer_name(l, "ln_beta"));
    enc.layers.push_back(std::move(layer));
  }
  return enc;
}

template <class S>
TensorT<S> encode_nodes(const CircuitGraph& g, const EncoderT<S>& enc) {
  const long n = static_cast<long>(g.node_count());
  if (n == 0) throw EmptyGraph();

  std::vector<int> kinds(n);
  for (long i = 0; i < n; ++i) kinds[i] = static_cast<int>(g.kind(static_cast<std::uint32_t>(i)));

  auto adj_in = std::make_shared<Adjacency>();
  adj_in->rows = n;
  adj_in->nbrs = g.fan_in();
  auto adj_out = std::make_shared<Adjacency>();
  adj_out->rows = n;
  adj_out->nbrs = g.fan_out();

  TensorT<S> h = embedding_rows(enc.kind_embed, kinds);
  const TensorT<S> no_bias;
  for (const auto& layer : enc.layers) {
    // mean over neighbors commutes with the direction matrix; aggregate
    // first, multiply once
    TensorT<S> m_in = linear(spmm_mean<S>(adj_in, h), layer.w_in, no_bias);
    TensorT<S> m_out = linear(spmm_mean<S>(adj_out, h), layer.w_out, no_bias);
    TensorT<S> cat = concat_cols<S>({h, m_in, m_out});
    TensorT<S> z = linear(cat, layer.update_w, layer.update_b);
    TensorT<S> ln = layer_norm(gelu(z), layer.ln_gamma, layer.ln_beta);
    h = add(ln, h);
  }
  return h;
}

template <class S>
TensorT<S> encode_graph(const CircuitGraph& g, const EncoderT<S>& enc) {
  return pool4(encode_nodes(g, enc));
}

template EncoderT<float> init_encoder(const EncoderConfig&, std::uint64_t, ParamStoreT<float>&);
template EncoderT<double> init_encoder(const EncoderConfig&, std::uint64_t, ParamStoreT<double>&);
template EncoderT<float> bind_encoder(const EncoderConfig&, ParamStoreT<float>&);
template EncoderT<double> bind_encoder(const EncoderConfig&, ParamStoreT<double>&);
template TensorT<float> encode_nodes(const CircuitGraph&, const EncoderT<float>&);
template TensorT<double> encode_nodes(const CircuitGraph&, const EncoderT<double>&);
template TensorT<float> encode_graph(const CircuitGraph&, const EncoderT<float>&);
template TensorT<double> encode_graph(const CircuitGraph&, const EncoderT<double>&);

}  // namespace bridges
