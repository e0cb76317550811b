#include "bridges/qformer.hpp"

#include <cmath>

#include "bridges/rng.hpp"
#include "bridges/tokenizer.hpp"

namespace bridges {

AttnMask make_mask(MaskKind kind, long q, long t) {
  const long s = q + t;
  AttnMask m = AttnMask::full(s, s, false);
  switch (kind) {
    case MaskKind::Unimodal:
      for (long i = 0; i < q; ++i)
        for (long j = 0; j < q; ++j) m.at(i, j) = 1;
      for (long i = q; i < s; ++i)
        for (long j = q; j < s; ++j) m.at(i, j) = 1;
      break;
    case MaskKind::BimodalFull:
      std::fill(m.allow.begin(), m.allow.end(), 1);
      break;
    case MaskKind::MultimodalCausal:
      for (long i = 0; i < q; ++i)
        for (long j = 0; j < q; ++j) m.at(i, j) = 1;
      for (long i = q; i < s; ++i) {
        for (long j = 0; j < q; ++j) m.at(i, j) = 1;
        for (long j = q; j <= i; ++j) m.at(i, j) = 1;
      }
      break;
  }
  return m;
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

std::string bname(int b, const char* field) {
  return "qf.b" + std::to_string(b) + "." + field;
}

}  // namespace

template <class S>
QFormerT<S> init_qformer(const QFormerConfig& cfg, std::uint64_t seed, ParamStoreT<S>& store) {
  cfg.validate();
  Rng rng(hash_seed(seed, 0x9F0));
  QFormerT<S> qf;
  qf.cfg = cfg;
  const long d = cfg.d_model, dg = cfg.d_graph, h = cfg.ffn_mult * d;
  auto reg = [&](const std::string& n, TensorT<S> t) -> TensorT<S>& {
    return store.add(n, std::move(t));
  };
  qf.query_table = reg("qf.query_table", init_normal<S>({cfg.n_queries, d}, 0.02, rng));
  qf.token_embed = reg("qf.token_embed", init_normal<S>({cfg.vocab_size, d}, 0.02, rng));
  qf.pos_embed = reg("qf.pos_embed", init_normal<S>({cfg.max_text_len, d}, 0.02, rng));
  qf.head_bias = reg("qf.head_bias", init_const<S>({cfg.vocab_size}, 0.0));
  for (int b = 0; b < cfg.blocks; ++b) {
    typename QFormerT<S>::Block blk;
    blk.wq = reg(bname(b, "wq"), init_uniform<S>({d, d}, d, rng));
    blk.wk = reg(bname(b, "wk"), init_uniform<S>({d, d}, d, rng));
    blk.wv = reg(bname(b, "wv"), init_uniform<S>({d, d}, d, rng));
    blk.wo = reg(bname(b, "wo"), init_uniform<S>({d, d}, d, rng));
    blk.bq = reg(bname(b, "bq"), init_const<S>({d}, 0.0));
    blk.bk = reg(bname(b, "bk"), init_const<S>({d}, 0.0));
    blk.bv = reg(bname(b, "bv"), init_const<S>({d}, 0.0));
    blk.bo = reg(bname(b, "bo"), init_const<S>({d}, 0.0));
    blk.ln1_g = reg(bname(b, "ln1_g"), init_const<S>({d}, 1.0));
    blk.ln1_b = reg(bname(b, "ln1_b"), init_const<S>({d}, 0.0));
    blk.has_cross = (b % 2 == 0);  // cross-attention on even-indexed blocks
    if (blk.has_cross) {
      blk.cwq = reg(bname(b, "cwq"), init_uniform<S>({d, d}, d, rng));
      blk.cwk = reg(bname(b, "cwk"), init_uniform<S>({d, dg}, dg, rng));
      blk.cwv = reg(bname(b, "cwv"), init_uniform<S>({d, dg}, dg, rng));
      blk.cwo = reg(bname(b, "cwo"), init_uniform<S>({d, d}, d, rng));
      blk.cbq = reg(bname(b, "cbq"), init_const<S>({d}, 0.0));
      blk.cbk = reg(bname(b, "cbk"), init_const<S>({d}, 0.0));
      blk.cbv = reg(bname(b, "cbv"), init_const<S>({d}, 0.0));
      blk.cbo = reg(bname(b, "cbo"), init_const<S>({d}, 0.0));
      blk.lnx_g = reg(bname(b, "lnx_g"), init_const<S>({d}, 1.0));
      blk.lnx_b = reg(bname(b, "lnx_b"), init_const<S>({d}, 0.0));
    }
    blk.ffn_w1 = reg(bname(b, "ffn_w1"), init_uniform<S>({h, d}, d, rng));
    blk.ffn_b1 = reg(bname(b, "ffn_b1"), init_const<S>({h}, 0.0));
    blk.ffn_w2 = reg(bname(b, "ffn_w2"), init_uniform<S>({d, h}, h, rng));
    blk.ffn_b2 = reg(bname(b, "ffn_b2"), init_const<S>({d}, 0.0));
    blk.ln2_g = reg(bname(b, "ln2_g"), init_const<S>({d}, 1.0));
    blk.ln2_b = reg(bname(b, "ln2_b"), init_const<S>({d}, 0.0));
    qf.blocks.push_back(std::move(blk));
  }
  qf.lnf_g = reg("qf.lnf_g", init_const<S>({d}, 1.0));
  qf.lnf_b = reg("qf.lnf_b", init_const<S>({d}, 0.0));
  qf.gtc_graph_w = reg("qf.gtc_graph_w", init_uniform<S>({cfg.d_proj, d}, d, rng));
  qf.gtc_graph_b = reg("qf.gtc_graph_b", init_const<S>({cfg.d_proj}, 0.0));
  qf.gtc_text_w = reg("qf.gtc_text_w", init_uniform<S>({cfg.d_proj, d}, d, rng));
  qf.gtc_text_b = reg("qf.gtc_text_b", init_const<S>({cfg.d_proj}, 0.0));
  qf.gtm_w = reg("qf.gtm_w", init_const<S>({2, d}, 0.0));  // ln 2 at step zero
  qf.gtm_b = reg("qf.gtm_b", init_const<S>({2}, 0.0));
  qf.temperature = reg("qf.tau", init_const<S>({1}, 0.07));
  return qf;
}

template <class S>
QFormerT<S> bind_qformer(const QFormerConfig& cfg, ParamStoreT<S>& store) {
  cfg.validate();
  QFormerT<S> qf;
  qf.cfg = cfg;
  qf.query_table = store.at("qf.query_table");
  qf.token_embed = store.at("qf.token_embed");
  qf.pos_embed = store.at("qf.pos_embed");
  qf.head_bias = store.at("qf.head_bias");
  for (int b = 0; b < cfg.blocks; ++b) {
    typename QFormerT<S>::Block blk;
    blk.wq = store.at(bname(b, "wq"));
    blk.wk = store.at(bname(b, "wk"));
    blk.wv = store.at(bname(b, "wv"));
    blk.wo = store.at(bname(b, "wo"));
    blk.bq = store.at(bname(b, "bq"));
    blk.bk = store.at(bname(b, "bk"));
    blk.bv = store.at(bname(b, "bv"));
    blk.bo = store.at(bname(b, "bo"));
    blk.ln1_g = store.at(bname(b, "ln1_g"));
    blk.ln1_b = store.at(bname(b, "ln1_b"));
    blk.has_cross = (b % 2 == 0);
    if (blk.has_cross) {
      blk.cwq = store.at(bname(b, "cwq"));
      blk.cwk = store.at(bname(b, "cwk"));
      blk.cwv = store.at(bname(b, "cwv"));
      blk.cwo = store.at(bname(b, "cwo"));
      blk.cbq = store.at(bname(b, "cbq"));
      blk.cbk = store.at(bname(b, "cbk"));
      blk.cbv = store.at(bname(b, "cbv"));
      blk.cbo = store.at(bname(b, "cbo"));
      blk.lnx_g = store.at(bname(b, "lnx_g"));
      blk.lnx_b = store.at(bname(b, "lnx_b"));
    }
    blk.ffn_w1 = store.at(bname(b, "ffn_w1"));
    blk.ffn_b1 = store.at(bname(b, "ffn_b1"));
    blk.ffn_w2 = store.at(bname(b, "ffn_w2"));
    blk.ffn_b2 = store.at(bname(b, "ffn_b2"));
    blk.ln2_g = store.at(bname(b, "ln2_g"));
    blk.ln2_b = store.at(bname(b, "ln2_b"));
    qf.blocks.push_back(std::move(blk));
  }
  qf.lnf_g = store.at("qf.lnf_g");
  qf.lnf_b = store.at("qf.lnf_b");
  qf.gtc_graph_w = store.at("qf.gtc_graph_w");
  qf.gtc_graph_b = store.at("qf.gtc_graph_b");
  qf.gtc_text_w = store.at("qf.gtc_text_w");
  qf.gtc_text_b = store.at("qf.gtc_text_b");
  qf.gtm_w = store.at("qf.gtm_w");
  qf.gtm_b = store.at("qf.gtm_b");
  qf.temperature = store.at("qf.tau");
  return qf;
}

template <class S>
QFormerOutput<S> qformer_forward(const QFormerT<S>& qf, const TensorT<S>* h_graph,
                                 const std::vector<int>* text_ids, MaskKind kind) {
  const auto& cfg = qf.cfg;
  if (!h_graph && !text_ids) throw ShapeMismatch("qformer needs a graph or text");
  const long q = cfg.n_queries;
  const long t = text_ids ? static_cast<long>(text_ids->size()) : 0;
  if (t > cfg.max_text_len) throw TextTooLong(t, cfg.max_text_len);
  if (h_graph && ((*h_graph).rows() != 4 || (*h_graph).cols() != cfg.d_graph))
    throw ShapeMismatch("pooled graph embedding must be [4 x d_graph]");

  std::vector<int> query_ids(q);
  for (long i = 0; i < q; ++i) query_ids[i] = static_cast<int>(i);
  TensorT<S> x = embedding_rows(qf.query_table, query_ids);
  if (t > 0) {
    std::vector<int> pos_ids(t);
    for (long i = 0; i < t; ++i) pos_ids[i] = static_cast<int>(i);
    TensorT<S> txt = add(embedding_rows(qf.token_embed, *text_ids),
                         embedding_rows(qf.pos_embed, pos_ids));
    x = concat_rows<S>({x, txt});
  }

  const auto mask = std::make_shared<const AttnMask>(make_mask(kind, q, t));
  for (const auto& blk : qf.blocks) {
    {
      TensorT<S> ln = layer_norm(x, blk.ln1_g, blk.ln1_b);
      TensorT<S> attn = multihead_attention(linear(ln, blk.wq, blk.bq),
                                            linear(ln, blk.wk, blk.bk),
                                            linear(ln, blk.wv, blk.bv), mask, cfg.heads);
      x = add(x, linear(attn, blk.wo, blk.bo));
    }
    if (blk.has_cross && h_graph) {
      // queries only; the 4 pooled rows act as keys and values
      TensorT<S> xq = t > 0 ? slice_rows(x, 0, q) : x;
      TensorT<S> ln = layer_norm(xq, blk.lnx_g, blk.lnx_b);
      TensorT<S> attn = multihead_attention(linear(ln, blk.cwq, blk.cbq),
                                            linear(*h_graph, blk.cwk, blk.cbk),
                                            linear(*h_graph, blk.cwv, blk.cbv), nullptr,
                                            cfg.heads);
      TensorT<S> xq2 = add(xq, linear(attn, blk.cwo, blk.cbo));
      x = t > 0 ? concat_rows<S>({xq2, slice_rows(x, q, q + t)}) : xq2;
    }
    {
      TensorT<S> ln = layer_norm(x, blk.ln2_g, blk.ln2_b);
      TensorT<S> h1 = gelu(linear(ln, blk.ffn_w1, blk.ffn_b1));
      x = add(x, linear(h1, blk.ffn_w2, blk.ffn_b2));
    }
  }
  TensorT<S> states = layer_norm(x, qf.lnf_g, qf.lnf_b);

  QFormerOutput<S> out;
  out.h_q = t > 0 ? slice_rows(states, 0, q) : states;
  if (t > 0) {
    out.text_states = slice_rows(states, q, q + t);
    out.text_logits = linear(out.text_states, qf.token_embed, qf.head_bias);  // tied head
  }
  return out;
}

template <class S>
TensorT<S> text_representation(const QFormerT<S>& qf, const std::vector<int>& content_ids) {
  if (content_ids.empty()) throw ShapeMismatch("text_representation of empty text");
  std::vector<int> ids;
  ids.reserve(content_ids.size() + 1);
  ids.push_back(TextTokenizer::kCls);
  ids.insert(ids.end(), content_ids.begin(), content_ids.end());
  auto out = qformer_forward(qf, nullptr, &ids, MaskKind::Unimodal);
  return slice_rows(out.text_states, 0, 1);
}

template <class S>
TensorT<S> gtc_project_graph(const QFormerT<S>& qf, const TensorT<S>& h_q) {
  return l2_normalize_rows(linear(h_q, qf.gtc_graph_w, qf.gtc_graph_b));
}

template <class S>
TensorT<S> gtc_project_text(const QFormerT<S>& qf, const TensorT<S>& text_rep) {
  return l2_normalize_rows(linear(text_rep, qf.gtc_text_w, qf.gtc_text_b));
}

template <class S>
TensorT<S> gtc_similarity(const QFormerT<S>& qf, const TensorT<S>& h_q,
                          const TensorT<S>& text_rep) {
  TensorT<S> gq = gtc_project_graph(qf, h_q);                       // [q x dp]
  TensorT<S> tp = gtc_project_text(qf, text_rep);                   // [1 x dp]
  TensorT<S> sims = matmul(gq, transpose(tp));                      // [q x 1]
  return colmax(sims);                                              // [1 x 1]
}

#define BRIDGES_INSTANTIATE_QF(S)                                                               \
  template QFormerT<S> init_qformer(const QFormerConfig&, std::uint64_t, ParamStoreT<S>&);      \
  template QFormerT<S> bind_qformer(const QFormerConfig&, ParamStoreT<S>&);                     \
  template QFormerOutput<S> qformer_forward(const QFormerT<S>&, const TensorT<S>*,              \
                                            const std::vector<int>*, MaskKind);                 \
  template TensorT<S> text_representation(const QFormerT<S>&, const std::vector<int>&);         \
  template TensorT<S> gtc_project_graph(const QFormerT<S>&, const TensorT<S>&);                 \
  template TensorT<S> gtc_project_text(const QFormerT<S>&, const TensorT<S>&);                  \
  template TensorT<S> gtc_similarity(const QFormerT<S>&, const TensorT<S>&, const TensorT<S>&);

BRIDGES_INSTANTIATE_QF(float)
BRIDGES_INSTANTIATE_QF(double)

#undef BRIDGES_INSTANTIATE_QF

}  // namespace bridges
