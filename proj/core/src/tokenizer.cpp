#include "bridges/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "bridges/error.hpp"

namespace bridges {

std::vector<std::string> TextTokenizer::normalize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (const char raw : text) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      flush();
      out.push_back(std::string(1, c));
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      cur += c;
    } else {
      flush();
      out.push_back(std::string(1, c));
    }
  }
  flush();
  return out;
}

TextTokenizer TextTokenizer::build(const std::vector<std::string>& texts, int min_count) {
  std::map<std::string, long> counts;  // ordered: deterministic id assignment
  for (const auto& t : texts)
    for (const auto& tok : normalize(t)) ++counts[tok];

  TextTokenizer tk;
  tk.id_to_token_ = {"<pad>", "<cls>", "<bos>", "<eos>", "<unk>"};
  for (int i = 0; i < kReserved; ++i) tk.token_to_id_[tk.id_to_token_[i]] = i;
  for (const auto& [tok, n] : counts) {
    if (n < min_count) continue;
    tk.token_to_id_[tok] = static_cast<int>(tk.id_to_token_.size());
    tk.id_to_token_.push_back(tok);
  }
  return tk;
}

std::vector<int> TextTokenizer::encode(const std::string& text) const {
  std::vector<int> ids;
  for (const auto& tok : normalize(text)) ids.push_back(id_of(tok));
  return ids;
}

std::string TextTokenizer::decode(const std::vector<int>& ids) const {
  std::string out;
  for (const auto id : ids) {
    if (id < 0 || id >= vocab_size()) throw VocabOverflow(id);
    if (id < kReserved) continue;
    if (!out.empty()) out += ' ';
    out += id_to_token_[id];
  }
  return out;
}

void TextTokenizer::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WriteError(path);
  for (std::size_t i = 0; i < id_to_token_.size(); ++i)
    out << id_to_token_[i] << '\t' << i << '\n';
  if (!out.flush()) throw WriteError(path);
}

TextTokenizer TextTokenizer::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open vocabulary " + path, 0);
  TextTokenizer tk;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("vocabulary line without tab", 0);
    const std::string tok = line.substr(0, tab);
    const int id = std::stoi(line.substr(tab + 1));
    if (id != static_cast<int>(tk.id_to_token_.size()))
      throw ParseError("vocabulary ids must be dense and ordered", 0);
    tk.id_to_token_.push_back(tok);
    tk.token_to_id_[tok] = id;
  }
  if (tk.vocab_size() < kReserved) throw ParseError("vocabulary missing reserved tokens", 0);
  return tk;
}

}  // namespace bridges
