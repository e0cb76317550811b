#include "bridges/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "bridges/rng.hpp"
#include "bridges/tokenizer.hpp"

namespace bridges {

namespace {

std::vector<int> with_cls(const std::vector<int>& content) {
  std::vector<int> ids;
  ids.reserve(content.size() + 1);
  ids.push_back(TextTokenizer::kCls);
  ids.insert(ids.end(), content.begin(), content.end());
  return ids;
}

std::vector<int> with_bos(const std::vector<int>& content) {
  std::vector<int> ids;
  ids.reserve(content.size() + 1);
  ids.push_back(TextTokenizer::kBos);
  ids.insert(ids.end(), content.begin(), content.end());
  return ids;
}

std::vector<int> shifted_targets(const std::vector<int>& content) {
  std::vector<int> t = content;
  t.push_back(TextTokenizer::kEos);
  return t;
}

}  // namespace

template <class S>
std::vector<TensorT<S>> design_embeddings(const Stage1ModelT<S>& m, const LossBatch& batch) {
  std::vector<TensorT<S>> h;
  h.reserve(batch.graphs.size());
  for (long i = 0; i < batch.size(); ++i)
    h.push_back(m.design_embedding(*batch.graphs[i],
                                   batch.code_ids.empty() ? std::vector<int>{}
                                                          : batch.code_ids[i]));
  return h;
}

template <class S>
TensorT<S> gtc_loss(const Stage1ModelT<S>& m, const LossBatch& batch,
                    const std::vector<TensorT<S>>& h_g, std::vector<double>* sims) {
  const long b = batch.size();
  if (b < 2) throw ShapeMismatch("contrastive batch needs B >= 2");
  {
    std::set<std::string> ids;
    for (const auto& id : batch.design_ids)
      if (!ids.insert(id).second) throw DuplicateDesignInBatch(id);
  }

  std::vector<TensorT<S>> graph_proj;  // [q x dp] per item
  std::vector<TensorT<S>> text_proj;   // [1 x dp] per item
  for (long i = 0; i < b; ++i) {
    auto out = qformer_forward(m.qformer, &h_g[i], nullptr, MaskKind::Unimodal);
    graph_proj.push_back(gtc_project_graph(m.qformer, out.h_q));
    TensorT<S> rep = text_representation(m.qformer, batch.text_ids[i]);
    text_proj.push_back(gtc_project_text(m.qformer, rep));
  }
  TensorT<S> text_stack = concat_rows(text_proj);  // [B x dp]

  std::vector<TensorT<S>> rows;
  rows.reserve(b);
  for (long i = 0; i < b; ++i) {
    TensorT<S> all = matmul(graph_proj[i], transpose(text_stack));  // [q x B]
    rows.push_back(colmax(all));                                    // [1 x B]
  }
  TensorT<S> sim = concat_rows(rows);  // [B x B]
  if (sims) {
    sims->assign(sim.data().begin(), sim.data().end());
  }

  TensorT<S> logits = mul_scalar_param(sim, reciprocal(m.qformer.temperature));
  std::vector<int> diag(b);
  for (long i = 0; i < b; ++i) diag[i] = static_cast<int>(i);
  TensorT<S> loss_g2t = cross_entropy(logits, diag);
  TensorT<S> loss_t2g = cross_entropy(transpose(logits), diag);
  return scale(add(loss_g2t, loss_t2g), 0.5);
}

std::pair<std::vector<int>, std::vector<int>> mine_hard_negatives(const std::vector<double>& sims,
                                                                  long b) {
  if (b < 2 || static_cast<long>(sims.size()) != b * b)
    throw ShapeMismatch("similarity matrix must be B x B with B >= 2");
  std::vector<int> neg_text(b), neg_graph(b);
  for (long i = 0; i < b; ++i) {
    long best = -1;
    for (long j = 0; j < b; ++j) {
      if (j == i) continue;
      if (best < 0 || sims[i * b + j] > sims[i * b + best]) best = j;
    }
    neg_text[i] = static_cast<int>(best);
  }
  for (long j = 0; j < b; ++j) {
    long best = -1;
    for (long i = 0; i < b; ++i) {
      if (i == j) continue;
      if (best < 0 || sims[i * b + j] > sims[best * b + j]) best = i;
    }
    neg_graph[j] = static_cast<int>(best);
  }
  return {std::move(neg_text), std::move(neg_graph)};
}

template <class S>
TensorT<S> gtm_loss(const Stage1ModelT<S>& m, const LossBatch& batch,
                    const std::vector<TensorT<S>>& h_g, const std::vector<int>& neg_text,
                    const std::vector<int>& neg_graph) {
  const long b = batch.size();
  if (b < 2) throw ShapeMismatch("matching batch needs B >= 2");
  std::vector<TensorT<S>> rows;
  std::vector<int> labels;
  rows.reserve(3 * b);
  labels.reserve(3 * b);
  auto score_pair = [&](const TensorT<S>& hg, const std::vector<int>& content) {
    const auto ids = with_cls(content);
    auto out = qformer_forward(m.qformer, &hg, &ids, MaskKind::BimodalFull);
    TensorT<S> logits = linear(out.h_q, m.qformer.gtm_w, m.qformer.gtm_b);  // [q x 2]
    return mean_rows(logits);                                               // [1 x 2]
  };
  for (long i = 0; i < b; ++i) {
    rows.push_back(score_pair(h_g[i], batch.text_ids[i]));
    labels.push_back(1);
    rows.push_back(score_pair(h_g[i], batch.text_ids[neg_text[i]]));
    labels.push_back(0);
    rows.push_back(score_pair(h_g[neg_graph[i]], batch.text_ids[i]));
    labels.push_back(0);
  }
  return cross_entropy(concat_rows(rows), labels);
}

template <class S>
TensorT<S> gtg_loss(const Stage1ModelT<S>& m, const LossBatch& batch,
                    const std::vector<TensorT<S>>& h_g) {
  const long b = batch.size();
  TensorT<S> weighted_sum;
  long total_tokens = 0;
  for (long i = 0; i < b; ++i) {
    const auto ids = with_bos(batch.text_ids[i]);
    const auto targets = shifted_targets(batch.text_ids[i]);
    auto out = qformer_forward(m.qformer, &h_g[i], &ids, MaskKind::MultimodalCausal);
    TensorT<S> item = cross_entropy(out.text_logits, targets);  // mean over this item's tokens
    const long n = static_cast<long>(targets.size());
    total_tokens += n;
    TensorT<S> contrib = scale(item, static_cast<double>(n));
    weighted_sum = weighted_sum.defined() ? add(weighted_sum, contrib) : contrib;
  }
  return scale(weighted_sum, 1.0 / static_cast<double>(total_tokens));
}

template <class S>
Stage1StepOut<S> stage1_losses(const Stage1ModelT<S>& m, const LossBatch& batch) {
  Stage1StepOut<S> out;
  auto h_g = design_embeddings(m, batch);
  out.l_gtc = gtc_loss(m, batch, h_g, &out.sims);
  auto [neg_text, neg_graph] = mine_hard_negatives(out.sims, batch.size());
  out.l_gtm = gtm_loss(m, batch, h_g, neg_text, neg_graph);
  out.l_gtg = gtg_loss(m, batch, h_g);
  out.total = add(add(out.l_gtc, out.l_gtm), out.l_gtg);
  return out;
}

std::vector<int> content_ids_for(const Stage1Model& m, const DesignRecord& rec) {
  auto ids = m.text_tok.encode(rec.description);
  const std::size_t cap = static_cast<std::size_t>(m.cfg.qformer.max_text_len - 1);
  if (ids.size() > cap) ids.resize(cap);
  return ids;
}

std::vector<int> code_ids_for(const Stage1Model& m, const DesignRecord& rec) {
  auto ids = m.code_tok.encode(rec.rtl_text);
  const std::size_t cap = static_cast<std::size_t>(m.cfg.code_encoder.max_code_len);
  if (ids.size() > cap) ids.resize(cap);
  return ids;
}

namespace {

Tensor zero_design_embedding(const Stage1Model& m) {
  return Tensor::zeros({4, m.cfg.qformer.d_graph});
}

double gtg_nll(const Stage1Model& m, const Tensor& hg, const std::vector<int>& content) {
  NoGradGuard ng;
  const auto ids = with_bos(content);
  const auto targets = shifted_targets(content);
  auto out = qformer_forward(m.qformer, &hg, &ids, MaskKind::MultimodalCausal);
  return cross_entropy(out.text_logits, targets).item();
}

}  // namespace

double perplexity(const Stage1Model& m, const DesignRecord& rec, bool zero_graph, int variant) {
  NoGradGuard ng;
  const auto content = content_ids_for(m, rec);
  Tensor hg = zero_graph ? zero_design_embedding(m)
                         : m.design_embedding(rec.graphs.at(variant), code_ids_for(m, rec));
  return std::exp(gtg_nll(m, hg, content));
}

double perplexity_over(const Stage1Model& m, const std::vector<const DesignRecord*>& recs,
                       bool zero_graph) {
  NoGradGuard ng;
  double nll = 0;
  long tokens = 0;
  for (const auto* rec : recs) {
    const auto content = content_ids_for(m, *rec);
    Tensor hg = zero_graph ? zero_design_embedding(m)
                           : m.design_embedding(rec->graphs.at(0), code_ids_for(m, *rec));
    const long n = static_cast<long>(content.size()) + 1;
    nll += gtg_nll(m, hg, content) * static_cast<double>(n);
    tokens += n;
  }
  return std::exp(nll / static_cast<double>(tokens));
}

std::vector<int> greedy_decode(const Stage1Model& m, const CircuitGraph& g, int max_len) {
  NoGradGuard ng;
  Tensor hg = m.design_embedding(g, {});
  std::vector<int> content;
  for (int step = 0; step < max_len; ++step) {
    std::vector<int> ids = with_bos(content);
    if (static_cast<int>(ids.size()) > m.cfg.qformer.max_text_len) break;
    auto out = qformer_forward(m.qformer, &hg, &ids, MaskKind::MultimodalCausal);
    const long t = out.text_logits.rows(), v = out.text_logits.cols();
    const float* last = out.text_logits.data().data() + (t - 1) * v;
    long best = 0;
    for (long j = 1; j < v; ++j)
      if (last[j] > last[best]) best = j;
    if (best == TextTokenizer::kEos) break;
    content.push_back(static_cast<int>(best));
  }
  return content;
}

double in_batch_f2d_accuracy(const Stage1Model& m, const std::vector<const DesignRecord*>& recs,
                             int batch_size, std::uint64_t seed) {
  NoGradGuard ng;
  if (recs.empty()) return 0.0;
  std::vector<std::size_t> order(recs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  long hits = 0, probes = 0;
  for (std::size_t at = 0; at < order.size(); at += batch_size) {
    const std::size_t end = std::min(order.size(), at + batch_size);
    const long n = static_cast<long>(end - at);
    if (n < 2) break;
    std::vector<std::vector<float>> gq(n);  // q x dp flattened
    std::vector<std::vector<float>> tp(n);  // dp
    for (long i = 0; i < n; ++i) {
      const auto* rec = recs[order[at + i]];
      Tensor hg = m.design_embedding(rec->graphs.at(0), code_ids_for(m, *rec));
      auto out = qformer_forward(m.qformer, &hg, nullptr, MaskKind::Unimodal);
      gq[i] = gtc_project_graph(m.qformer, out.h_q).data();
      tp[i] = gtc_project_text(m.qformer, text_representation(m.qformer, content_ids_for(m, *rec)))
                  .data();
    }
    const long q = m.cfg.qformer.n_queries, dp = m.cfg.qformer.d_proj;
    for (long probe = 0; probe < n; ++probe) {
      long best = 0;
      double best_score = -1e30;
      for (long cand = 0; cand < n; ++cand) {
        double s = -1e30;
        for (long r = 0; r < q; ++r) {
          double dot = 0;
          for (long c = 0; c < dp; ++c) dot += gq[cand][r * dp + c] * tp[probe][c];
          s = std::max(s, dot);
        }
        if (s > best_score) {
          best_score = s;
          best = cand;
        }
      }
      hits += best == probe;
      ++probes;
    }
  }
  return probes == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(probes);
}

TrainResult train_stage1(const std::vector<DesignRecord>& records, const ModelConfig& cfg,
                         const TrainConfig& tc) {
  TrainResult result;
  result.model = init_stage1_model(cfg, records, tc.seed);
  Stage1Model& m = result.model;

  std::vector<std::size_t> train_idx;
  std::vector<const DesignRecord*> val_recs;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].split == Split::Train) train_idx.push_back(i);
    if (records[i].split == Split::Val) val_recs.push_back(&records[i]);
  }
  if (tc.epochs > 0 && static_cast<int>(train_idx.size()) < tc.batch_size)
    throw Error("train split smaller than one batch");

  std::vector<std::vector<int>> text_cache(records.size()), code_cache(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    text_cache[i] = content_ids_for(m, records[i]);
    if (m.cfg.branch == DesignBranch::CodeText) code_cache[i] = code_ids_for(m, records[i]);
  }

  const long steps_per_epoch = static_cast<long>(train_idx.size()) / tc.batch_size;
  const long total_steps = steps_per_epoch * tc.epochs;
  const long warmup = std::max<long>(1, static_cast<long>(tc.warmup_frac * total_steps));
  auto lr_at = [&](long step) {  // 1-based
    if (step <= warmup) return tc.lr * static_cast<double>(step) / static_cast<double>(warmup);
    const double t = static_cast<double>(step - warmup) /
                     static_cast<double>(std::max<long>(1, total_steps - warmup));
    return tc.lr * 0.5 * (1.0 + std::cos(3.141592653589793238462643 * std::min(1.0, t)));
  };

  std::ofstream log;
  if (!tc.log_path.empty()) {
    log.open(tc.log_path, std::ios::trunc);
    if (!log) throw WriteError(tc.log_path);
  }

  AdamWConfig adam;
  adam.beta1 = tc.beta1;
  adam.beta2 = tc.beta2;
  adam.weight_decay = tc.weight_decay;

  long step = 0;
  int decreases = 0;
  double prev_acc = -1.0;
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    std::vector<std::size_t> order = train_idx;
    Rng shuffle_rng(hash_seed(tc.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    for (long bstart = 0; bstart + tc.batch_size <= static_cast<long>(order.size());
         bstart += tc.batch_size) {
      LossBatch batch;
      for (long k = 0; k < tc.batch_size; ++k) {
        const std::size_t ri = order[bstart + k];
        const auto& rec = records[ri];
        const std::size_t variant =
            rec.graphs.size() > 1
                ? hash_seed(hash_seed(tc.seed, 0x7A41A47), static_cast<std::uint64_t>(epoch) *
                                                                   records.size() + ri) %
                      rec.graphs.size()
                : 0;
        batch.graphs.push_back(&rec.graphs[variant]);
        batch.text_ids.push_back(text_cache[ri]);
        batch.code_ids.push_back(code_cache[ri]);
        batch.design_ids.push_back(rec.design_id);
      }

      auto losses = stage1_losses(m, batch);
      ++step;
      const double lg = losses.l_gtc.item(), lm = losses.l_gtm.item(), lt = losses.l_gtg.item();
      if (!std::isfinite(lg) || !std::isfinite(lm) || !std::isfinite(lt))
        throw NumericError(step);

      backward(losses.total);
      adam.lr = lr_at(step);
      adamw_step(m.store, adam);
      m.store.zero_grad();
      auto& tau = m.qformer.temperature.data();
      if (tau[0] < 1e-3f) tau[0] = 1e-3f;

      StepLog sl{step, lg, lm, lt, adam.lr, static_cast<double>(tau[0])};
      result.steps.push_back(sl);
      if (log.is_open()) {
        nlohmann::ordered_json j;
        j["step"] = sl.step;
        j["l_gtc"] = sl.l_gtc;
        j["l_gtm"] = sl.l_gtm;
        j["l_gtg"] = sl.l_gtg;
        j["lr"] = sl.lr;
        j["tau"] = sl.tau;
        log << j.dump() << '\n';
      }
    }
    result.epochs_run = epoch + 1;

    if (!val_recs.empty()) {
      const double acc = in_batch_f2d_accuracy(m, val_recs, tc.eval_batch,
                                               hash_seed(tc.seed, 2000));
      result.val_accuracy.push_back(acc);
      if (prev_acc >= 0.0 && acc < prev_acc) {
        ++decreases;
      } else {
        decreases = 0;
      }
      prev_acc = acc;
      if (tc.early_stop && decreases >= 2) break;
    }
  }
  return result;
}

// --- instantiations ---

#define BRIDGES_INSTANTIATE_OBJ(S)                                                            \
  template std::vector<TensorT<S>> design_embeddings(const Stage1ModelT<S>&, const LossBatch&); \
  template TensorT<S> gtc_loss(const Stage1ModelT<S>&, const LossBatch&,                      \
                               const std::vector<TensorT<S>>&, std::vector<double>*);         \
  template TensorT<S> gtm_loss(const Stage1ModelT<S>&, const LossBatch&,                      \
                               const std::vector<TensorT<S>>&, const std::vector<int>&,       \
                               const std::vector<int>&);                                      \
  template TensorT<S> gtg_loss(const Stage1ModelT<S>&, const LossBatch&,                      \
                               const std::vector<TensorT<S>>&);                               \
  template Stage1StepOut<S> stage1_losses(const Stage1ModelT<S>&, const LossBatch&);

BRIDGES_INSTANTIATE_OBJ(float)
BRIDGES_INSTANTIATE_OBJ(double)

#undef BRIDGES_INSTANTIATE_OBJ

}  // namespace bridges
