#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace bridges {

/// Word-level tokenizer built from corpus text. Normalization: lowercase,
/// punctuation split off as single-character tokens, and numerals split into
/// single digits (so an unseen count like "137" still encodes as in-vocab
/// digit tokens instead of collapsing to UNK). decode() joins tokens with
/// single spaces; round-tripping preserves token characters, only whitespace
/// placement changes.
class TextTokenizer {
public:
  static constexpr int kPad = 0, kCls = 1, kBos = 2, kEos = 3, kUnk = 4;
  static constexpr int kReserved = 5;

  static std::vector<std::string> normalize(const std::string& text);

  static TextTokenizer build(const std::vector<std::string>& texts, int min_count = 1);

  /// Content token ids only; callers prepend CLS/BOS and append EOS as the
  /// objective requires.
  std::vector<int> encode(const std::string& text) const;
  std::string decode(const std::vector<int>& ids) const;

  int vocab_size() const { return static_cast<int>(id_to_token_.size()); }
  int id_of(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
  }

  /// UTF-8 lines "token<TAB>id".
  void save(const std::string& path) const;
  static TextTokenizer load(const std::string& path);

private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

}  // namespace bridges
