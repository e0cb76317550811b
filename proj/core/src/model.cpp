#include "bridges/model.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace bridges {

using ordered_json = nlohmann::ordered_json;

const char* to_string(DesignBranch b) {
  return b == DesignBranch::Graph ? "graph" : "code_text";
}

std::optional<DesignBranch> design_branch_from_string(const std::string& s) {
  if (s == "graph") return DesignBranch::Graph;
  if (s == "code_text") return DesignBranch::CodeText;
  return std::nullopt;
}

Stage1Model init_stage1_model(const ModelConfig& cfg_in, const std::vector<DesignRecord>& records,
                              std::uint64_t seed) {
  Stage1Model m;
  m.cfg = cfg_in;

  std::vector<std::string> train_texts, train_code;
  for (const auto& r : records) {
    if (r.split != Split::Train) continue;
    train_texts.push_back(r.description);
    train_code.push_back(r.rtl_text);
  }
  if (train_texts.empty())  // tiny fixtures may have no split assigned yet
    for (const auto& r : records) {
      train_texts.push_back(r.description);
      train_code.push_back(r.rtl_text);
    }
  m.text_tok = TextTokenizer::build(train_texts);
  m.cfg.qformer.vocab_size = m.text_tok.vocab_size();
  m.cfg.qformer.d_graph = m.cfg.encoder.d1;
  m.cfg.code_encoder.d1 = m.cfg.encoder.d1;

  if (m.cfg.branch == DesignBranch::Graph) {
    m.encoder = init_encoder(m.cfg.encoder, seed, m.store);
  } else {
    m.code_tok = TextTokenizer::build(train_code);
    m.cfg.code_encoder.vocab_size = m.code_tok.vocab_size();
    m.code_encoder = init_code_encoder(m.cfg.code_encoder, seed, m.store);
  }
  m.qformer = init_qformer(m.cfg.qformer, hash_seed(seed, 1), m.store);
  return m;
}

namespace {

ordered_json config_to_json(const ModelConfig& cfg) {
  ordered_json j;
  j["branch"] = to_string(cfg.branch);
  j["encoder"] = {{"layers", cfg.encoder.layers},
                  {"d1", cfg.encoder.d1},
                  {"kind_vocab", cfg.encoder.kind_vocab}};
  j["qformer"] = {{"blocks", cfg.qformer.blocks},
                  {"heads", cfg.qformer.heads},
                  {"d_model", cfg.qformer.d_model},
                  {"n_queries", cfg.qformer.n_queries},
                  {"d_graph", cfg.qformer.d_graph},
                  {"vocab_size", cfg.qformer.vocab_size},
                  {"max_text_len", cfg.qformer.max_text_len},
                  {"d_proj", cfg.qformer.d_proj},
                  {"ffn_mult", cfg.qformer.ffn_mult},
                  {"cross_attention_blocks", "even"}};
  j["code_encoder"] = {{"d1", cfg.code_encoder.d1},
                       {"vocab_size", cfg.code_encoder.vocab_size},
                       {"max_code_len", cfg.code_encoder.max_code_len}};
  return j;
}

ModelConfig config_from_json(const ordered_json& j) {
  ModelConfig cfg;
  const auto b = design_branch_from_string(j.at("branch").get<std::string>());
  if (!b) throw ParseError("unknown branch", 0);
  cfg.branch = *b;
  const auto& e = j.at("encoder");
  cfg.encoder.layers = e.at("layers").get<int>();
  cfg.encoder.d1 = e.at("d1").get<int>();
  cfg.encoder.kind_vocab = e.at("kind_vocab").get<int>();
  const auto& q = j.at("qformer");
  cfg.qformer.blocks = q.at("blocks").get<int>();
  cfg.qformer.heads = q.at("heads").get<int>();
  cfg.qformer.d_model = q.at("d_model").get<int>();
  cfg.qformer.n_queries = q.at("n_queries").get<int>();
  cfg.qformer.d_graph = q.at("d_graph").get<int>();
  cfg.qformer.vocab_size = q.at("vocab_size").get<int>();
  cfg.qformer.max_text_len = q.at("max_text_len").get<int>();
  cfg.qformer.d_proj = q.at("d_proj").get<int>();
  cfg.qformer.ffn_mult = q.at("ffn_mult").get<int>();
  const auto& c = j.at("code_encoder");
  cfg.code_encoder.d1 = c.at("d1").get<int>();
  cfg.code_encoder.vocab_size = c.at("vocab_size").get<int>();
  cfg.code_encoder.max_code_len = c.at("max_code_len").get<int>();
  return cfg;
}

}  // namespace

void save_model(const Stage1Model& model, const std::string& base_path) {
  save_checkpoint(model.store, base_path + ".ckpt");
  ordered_json j = config_to_json(model.cfg);
  j["fingerprint"] = checkpoint_fingerprint(model.store);
  std::ofstream out(base_path + ".json", std::ios::binary | std::ios::trunc);
  if (!out) throw WriteError(base_path + ".json");
  out << j.dump(2) << '\n';
  model.text_tok.save(base_path + ".vocab");
  if (model.cfg.branch == DesignBranch::CodeText) model.code_tok.save(base_path + ".code_vocab");
}

Stage1Model load_model(const std::string& base_path) {
  std::ifstream in(base_path + ".json", std::ios::binary);
  if (!in) throw ParseError("cannot open " + base_path + ".json", 0);
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), e.byte);
  }
  Stage1Model m;
  m.cfg = config_from_json(j);
  m.store = load_checkpoint(base_path + ".ckpt");
  m.text_tok = TextTokenizer::load(base_path + ".vocab");
  if (m.cfg.branch == DesignBranch::Graph) {
    m.encoder = bind_encoder(m.cfg.encoder, m.store);
  } else {
    m.code_tok = TextTokenizer::load(base_path + ".code_vocab");
    m.code_encoder = bind_code_encoder(m.cfg.code_encoder, m.store);
  }
  m.qformer = bind_qformer(m.cfg.qformer, m.store);
  return m;
}

std::string model_fingerprint(const Stage1Model& model) {
  return checkpoint_fingerprint(model.store);
}

Stage1ModelT<double> widen_model(const Stage1Model& model) {
  Stage1ModelT<double> m;
  m.cfg = model.cfg;
  m.store = widen(model.store);
  if (model.cfg.branch == DesignBranch::Graph) {
    m.encoder = bind_encoder(m.cfg.encoder, m.store);
  } else {
    m.code_encoder = bind_code_encoder(m.cfg.code_encoder, m.store);
  }
  m.qformer = bind_qformer(m.cfg.qformer, m.store);
  m.text_tok = model.text_tok;
  m.code_tok = model.code_tok;
  return m;
}

}  // namespace bridges
