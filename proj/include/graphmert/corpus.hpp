// Copyright 2026 The GraphMERT KG Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Raw documents -> normalized text -> WordPiece ids -> 128-token windows.

#pragma once

#include <cstdint>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "graphmert/common.hpp"

namespace graphmert {

inline constexpr int kRootCount = 128;
inline constexpr int kSchemaVersion = 1;

struct Document {
  std::string doc_id;
  std::string text;
};

class Vocabulary {
 public:
  static constexpr std::string_view kPad = "[PAD]";
  static constexpr std::string_view kMask = "[MASK]";
  static constexpr std::string_view kUnk = "[UNK]";

  Vocabulary() = default;

  explicit Vocabulary(std::vector<std::string> tokens)
      : tokens_(std::move(tokens)) {
    for (size_t i = 0; i < tokens_.size(); ++i) {
      auto [it, inserted] = index_.emplace(tokens_[i], static_cast<int>(i));
      if (!inserted) {
        throw Error(ErrorKind::kSchemaMismatch,
                    "duplicate vocabulary token '" + tokens_[i] + "'");
      }
    }
    pad_ = require(kPad);
    mask_ = require(kMask);
    unk_ = require(kUnk);
  }

  // One token per line; the line number is the id.
  static Vocabulary load(const std::string& path) {
    std::vector<std::string> tokens;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      tokens.push_back(line);
    }
    while (!tokens.empty() && tokens.back().empty()) tokens.pop_back();
    return Vocabulary(std::move(tokens));
  }

  void save(const std::string& path) const {
    std::string out;
    for (const auto& t : tokens_) out += t + "\n";
    write_file(path, out);
  }

  int size() const { return static_cast<int>(tokens_.size()); }
  int pad_id() const { return pad_; }
  int mask_id() const { return mask_; }
  int unk_id() const { return unk_; }

  const std::string& token(int id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // Returns -1 when absent.
  int find(std::string_view tok) const {
    auto it = index_.find(std::string(tok));
    return it == index_.end() ? -1 : it->second;
  }

  // Bracketed control tokens such as [PAD], [MASK], [CLS].
  bool is_special(int id) const {
    const auto& t = tokens_.at(id);
    return t.size() > 2 && t.front() == '[' && t.back() == ']';
  }

 private:
  int require(std::string_view tok) const {
    int id = find(tok);
    if (id < 0) {
      throw Error(ErrorKind::kSchemaMismatch,
                  "vocabulary lacks required token " + std::string(tok));
    }
    return id;
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  int pad_ = -1, mask_ = -1, unk_ = -1;
};

struct TokenSequence {
  std::string seq_id;
  std::string doc_id;
  std::vector<int> token_ids;             // exactly kRootCount
  std::vector<std::string> token_strings;  // aligned with token_ids

  int non_pad_count(int pad_id) const {
    int n = 0;
    for (int id : token_ids) n += id != pad_id;
    return n;
  }
};

struct NormalizeOptions {
  // Applied repeatedly at the start of the lowercased text.
  std::vector<std::string> boilerplate_patterns = {
      R"(^(abstract|background|introduction)\b[\s:.\-]*)"};
};

inline std::string collapse_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
        c == '\v') {
      pending_space = !out.empty();
    } else {
      if (pending_space) out += ' ';
      pending_space = false;
      out += c;
    }
  }
  return out;
}

inline std::string normalize(std::string_view text,
                             const NormalizeOptions& opts = {}) {
  std::string out = collapse_whitespace(to_lower_ascii(text));
  std::vector<std::regex> patterns;
  for (const auto& p : opts.boilerplate_patterns) {
    patterns.emplace_back(p, std::regex::ECMAScript);
  }
  bool changed = true;
  while (changed && !out.empty()) {
    changed = false;
    for (const auto& re : patterns) {
      std::smatch m;
      if (std::regex_search(out, m, re,
                            std::regex_constants::match_continuous) &&
          m.length(0) > 0) {
        out = out.substr(static_cast<size_t>(m.length(0)));
        changed = true;
      }
    }
  }
  return collapse_whitespace(out);
}

inline bool is_ascii_punct(unsigned char c) {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) ||
         (c >= 91 && c <= 96) || (c >= 123 && c <= 126);
}

// Whitespace split, with every ASCII punctuation character as its own word.
inline std::vector<std::string> pre_tokenize(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) words.push_back(std::move(cur)), cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      flush();
    } else if (is_ascii_punct(c)) {
      flush();
      words.emplace_back(1, ch);
    } else {
      cur += ch;
    }
  }
  flush();
  return words;
}

// Greedy longest-match-first WordPiece over one word. A word that cannot be
// fully covered maps to a single UNK.
inline void wordpiece(std::string_view word, const Vocabulary& vocab,
                      std::vector<int>& out) {
  std::vector<int> pieces;
  size_t start = 0;
  while (start < word.size()) {
    int found = -1;
    size_t end = word.size();
    for (; end > start; --end) {
      std::string piece(word.substr(start, end - start));
      if (start > 0) piece = "##" + piece;
      found = vocab.find(piece);
      if (found >= 0) break;
    }
    if (found < 0) {
      out.push_back(vocab.unk_id());
      return;
    }
    pieces.push_back(found);
    start = end;
  }
  out.insert(out.end(), pieces.begin(), pieces.end());
}

inline std::vector<int> tokenize(std::string_view text, const Vocabulary& vocab) {
  std::vector<int> ids;
  for (const auto& w : pre_tokenize(text)) wordpiece(w, vocab, ids);
  return ids;
}

// Joins token strings, gluing "##" continuations to the previous piece.
inline std::string detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (t.rfind("##", 0) == 0 && !out.empty()) {
      out += t.substr(2);
    } else {
      if (!out.empty()) out += ' ';
      out += t;
    }
  }
  return out;
}

inline std::string detokenize_ids(const std::vector<int>& ids,
                                  const Vocabulary& vocab, bool skip_pad = true) {
  std::vector<std::string> toks;
  for (int id : ids) {
    if (skip_pad && id == vocab.pad_id()) continue;
    toks.push_back(vocab.token(id));
  }
  return detokenize(toks);
}

// Non-overlapping windows of kRootCount ids; the last one is PAD-filled.
inline std::vector<TokenSequence> segment(const Document& doc,
                                          const Vocabulary& vocab) {
  const std::vector<int> ids = tokenize(doc.text, vocab);
  std::vector<TokenSequence> out;
  for (size_t begin = 0; begin < ids.size(); begin += kRootCount) {
    TokenSequence seq;
    seq.doc_id = doc.doc_id;
    seq.seq_id = doc.doc_id + "#" + std::to_string(out.size());
    seq.token_ids.assign(kRootCount, vocab.pad_id());
    const size_t n = std::min<size_t>(kRootCount, ids.size() - begin);
    std::copy_n(ids.begin() + static_cast<long>(begin), n, seq.token_ids.begin());
    for (int id : seq.token_ids) seq.token_strings.push_back(vocab.token(id));
    out.push_back(std::move(seq));
  }
  return out;
}

inline std::string sequence_text(const TokenSequence& seq, const Vocabulary& vocab) {
  return detokenize_ids(seq.token_ids, vocab);
}

inline std::vector<Document> read_corpus(const std::string& path) {
  std::vector<Document> docs;
  std::set<std::string> seen;
  for (const auto& row : read_jsonl(path)) {
    if (!row.contains("doc_id") || !row.contains("text")) {
      throw Error(ErrorKind::kSchemaMismatch,
                  path + ": corpus rows need doc_id and text");
    }
    Document d{row["doc_id"].get<std::string>(), row["text"].get<std::string>()};
    if (!seen.insert(d.doc_id).second) {
      throw Error(ErrorKind::kSchemaMismatch, "duplicate doc_id " + d.doc_id);
    }
    docs.push_back(std::move(d));
  }
  return docs;
}

inline json to_json(const TokenSequence& s) {
  return json{{"schema_version", kSchemaVersion},
              {"seq_id", s.seq_id},
              {"doc_id", s.doc_id},
              {"token_ids", s.token_ids},
              {"tokens", s.token_strings}};
}

inline TokenSequence sequence_from_json(const json& j, const Vocabulary& vocab) {
  TokenSequence s;
  s.seq_id = j.at("seq_id").get<std::string>();
  s.doc_id = j.at("doc_id").get<std::string>();
  s.token_ids = j.at("token_ids").get<std::vector<int>>();
  if (static_cast<int>(s.token_ids.size()) != kRootCount) {
    throw Error(ErrorKind::kSchemaMismatch,
                s.seq_id + ": expected " + std::to_string(kRootCount) + " ids");
  }
  for (int id : s.token_ids) {
    if (id < 0 || id >= vocab.size()) {
      throw Error(ErrorKind::kSchemaMismatch, s.seq_id + ": token id out of range");
    }
    s.token_strings.push_back(vocab.token(id));
  }
  return s;
}

}  // namespace graphmert
