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

// Triple-level KG scoring with a judge model: the supported fraction per
// (triple, context) pair, and ontological validity (yes / maybe / no).
//
// Judge answers are cached on disk:
//   <cache_dir>/<kk>/<key>.json   {"key", "prompt_hash", "response"}
// where key = fnv1a(prompt) ^ fnv1a(triple) ^ fnv1a(context) mixed, and kk is
// its first two hex digits.

#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "graphmert/extractor.hpp"
#include "graphmert/prompts.hpp"
#include "graphmert/services.hpp"

namespace graphmert {

class JudgeCache {
 public:
  explicit JudgeCache(std::string dir = "") : dir_(std::move(dir)) {
    if (!dir_.empty()) std::filesystem::create_directories(dir_);
  }

  bool enabled() const { return !dir_.empty(); }

  static std::string key(const std::string& prompt, const std::string& triple,
                         const std::string& context) {
    const uint64_t h = splitmix64(fnv1a(prompt) ^ splitmix64(fnv1a(triple) ^ splitmix64(fnv1a(context))));
    return hex64(h);
  }

  std::optional<std::string> get(const std::string& key) const {
    if (!enabled()) return std::nullopt;
    const auto path = file(key);
    std::lock_guard lock(mu_);
    if (!std::filesystem::exists(path)) return std::nullopt;
    try {
      const json j = json::parse(read_file(path.string()));
      if (j.value("key", "") != key) return std::nullopt;
      return j.at("response").get<std::string>();
    } catch (const json::exception&) {
      return std::nullopt;  // a torn entry is a miss
    }
  }

  void put(const std::string& key, const std::string& prompt, const std::string& response) {
    if (!enabled()) return;
    const auto path = file(key);
    std::lock_guard lock(mu_);
    std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    write_file(tmp, json{{"key", key}, {"prompt_hash", hex64(fnv1a(prompt))}, {"response", response}}.dump());
    std::filesystem::rename(tmp, path);
  }

  size_t hits() const { return hits_; }
  size_t misses() const { return misses_; }
  void count(bool hit) {
    std::lock_guard lock(mu_);
    ++(hit ? hits_ : misses_);
  }

 private:
  std::filesystem::path file(const std::string& key) const {
    return std::filesystem::path(dir_) / key.substr(0, 2) / (key + ".json");
  }

  std::string dir_;
  mutable std::mutex mu_;
  size_t hits_ = 0, misses_ = 0;
};

// Asks the judge, going through the cache. Returns nullopt on client failure.
inline std::optional<std::string> ask_judge(ChatClient& judge, JudgeCache& cache,
                                            const ChatRequest& req, const std::string& triple,
                                            const std::string& context) {
  const std::string k = JudgeCache::key(req.prompt, triple, context);
  if (auto hit = cache.get(k)) {
    cache.count(true);
    return hit;
  }
  cache.count(false);
  try {
    const ChatResponse r = judge.complete(req);
    cache.put(k, req.prompt, r.text);
    return r.text;
  } catch (const ClientError&) {
    return std::nullopt;
  }
}

struct JudgedTriple {
  std::string head, relation, tail;
  std::string context_id;
  Verdict verdict = Verdict::kUnparseable;
  bool judged = false;  // false: the judge could not be reached
  std::string raw;
};

struct RelationScore {
  size_t judged = 0;
  size_t yes = 0;
  size_t maybe = 0;
  size_t no = 0;
};

struct FactScoreReport {
  prompts::FactMode mode = prompts::FactMode::kContextOnly;
  bool strict = false;
  size_t pairs = 0;        // (triple, context) pairs
  size_t judged = 0;       // pairs with a judge answer
  size_t unparseable = 0;  // answers without a verdict
  size_t supported = 0;
  double score = 0.0;
  double coverage = 0.0;
  std::map<std::string, RelationScore> per_relation;
  std::vector<JudgedTriple> verdicts;
};

struct ValidityReport {
  size_t triples = 0;
  size_t judged = 0;  // triples with a yes/maybe/no verdict
  size_t unparseable = 0;
  size_t unjudged = 0;
  size_t yes = 0, maybe = 0, no = 0;
  double yes_fraction = 0.0, maybe_fraction = 0.0, no_fraction = 0.0;
  std::map<std::string, RelationScore> per_relation;
  std::vector<JudgedTriple> verdicts;
};

struct VerifierConfig {
  bool strict = false;  // drop unparseable answers from the denominator
  size_t validity_batch = 20;
  int jobs = 1;
  std::string domain = kDefaultDomain;
};

namespace detail {

// Canonical triple order so that scores never depend on input order.
inline std::vector<ExtractedTriple> canonical(std::vector<ExtractedTriple> kg) {
  std::sort(kg.begin(), kg.end(), [](const ExtractedTriple& a, const ExtractedTriple& b) {
    return std::tie(a.head, a.relation, a.tail) < std::tie(b.head, b.relation, b.tail);
  });
  return kg;
}

}  // namespace detail

// Supported fraction over (triple, context) pairs; contexts come from each
// triple's provenance.
inline FactScoreReport factscore(const std::vector<ExtractedTriple>& kg,
                                 const std::map<std::string, std::string>& contexts,
                                 ChatClient& judge, const ClientConfig& client_cfg,
                                 prompts::FactMode mode, JudgeCache& cache,
                                 const VerifierConfig& cfg = {}) {
  FactScoreReport rep;
  rep.mode = mode;
  rep.strict = cfg.strict;
  for (const auto& t : detail::canonical(kg)) {
    for (const auto& seq : t.provenance) {
      if (!contexts.count(seq)) throw invalid_argument("no context for provenance " + seq);
      rep.verdicts.push_back({t.head, t.relation, t.tail, seq, Verdict::kUnparseable, false, ""});
    }
  }
  rep.pairs = rep.verdicts.size();
  parallel_for(rep.verdicts.size(), cfg.jobs, [&](size_t i) {
    JudgedTriple& jt = rep.verdicts[i];
    const std::string& ctx = contexts.at(jt.context_id);
    const ChatRequest req = make_chat_request(
        client_cfg, prompts::factscore(ctx, jt.head, jt.relation, jt.tail, mode, cfg.domain),
        json{{"task", "factscore"},
             {"mode", prompts::fact_mode_name(mode)},
             {"context", ctx},
             {"head", jt.head},
             {"relation", jt.relation},
             {"tail", jt.tail}});
    if (auto raw = ask_judge(judge, cache, req, linearize(jt.head, jt.relation, jt.tail), ctx)) {
      jt.judged = true;
      jt.raw = *raw;
      jt.verdict = parse_verdict(*raw, VerdictScheme::kBinary);
    }
  });
  size_t denominator = 0;
  for (const auto& jt : rep.verdicts) {
    if (!jt.judged) continue;
    ++rep.judged;
    const bool parsed = jt.verdict != Verdict::kUnparseable;
    rep.unparseable += !parsed;
    if (!parsed && cfg.strict) continue;
    ++denominator;
    auto& rs = rep.per_relation[jt.relation];
    ++rs.judged;
    if (jt.verdict == Verdict::kYes) {
      ++rep.supported;
      ++rs.yes;
    } else {
      ++rs.no;
    }
  }
  rep.score = denominator ? static_cast<double>(rep.supported) / static_cast<double>(denominator) : 0.0;
  rep.coverage = rep.pairs ? static_cast<double>(rep.judged) / static_cast<double>(rep.pairs) : 0.0;
  return rep;
}

inline ValidityReport validity_score(const std::vector<ExtractedTriple>& kg, ChatClient& judge,
                                     const ClientConfig& client_cfg, JudgeCache& cache,
                                     const VerifierConfig& cfg = {}) {
  ValidityReport rep;
  for (const auto& t : detail::canonical(kg)) {
    rep.verdicts.push_back({t.head, t.relation, t.tail, "", Verdict::kUnparseable, false, ""});
  }
  rep.triples = rep.verdicts.size();
  const size_t batch = std::max<size_t>(1, cfg.validity_batch);
  const size_t batches = (rep.verdicts.size() + batch - 1) / batch;
  parallel_for(batches, cfg.jobs, [&](size_t b) {
    const size_t lo = b * batch, hi = std::min(rep.verdicts.size(), lo + batch);
    std::vector<std::vector<std::string>> rows;
    json meta_rows = json::array();
    std::string key_material;
    for (size_t i = lo; i < hi; ++i) {
      const auto& jt = rep.verdicts[i];
      rows.push_back({jt.head, jt.relation, jt.tail});
      meta_rows.push_back({jt.head, jt.relation, jt.tail});
      key_material += linearize(jt.head, jt.relation, jt.tail) + '\n';
    }
    const ChatRequest req = make_chat_request(client_cfg, prompts::validity(rows, cfg.domain),
                                              json{{"task", "validity"}, {"triples", meta_rows}});
    const auto raw = ask_judge(judge, cache, req, key_material, "");
    if (!raw) return;
    const auto verdicts = parse_validity_batch(*raw, hi - lo);
    for (size_t i = lo; i < hi; ++i) {
      rep.verdicts[i].judged = true;
      rep.verdicts[i].raw = *raw;
      rep.verdicts[i].verdict = verdicts[i - lo];
    }
  });
  for (const auto& jt : rep.verdicts) {
    if (!jt.judged) {
      ++rep.unjudged;
      continue;
    }
    if (jt.verdict == Verdict::kUnparseable) {
      ++rep.unparseable;
      continue;
    }
    ++rep.judged;
    auto& rs = rep.per_relation[jt.relation];
    ++rs.judged;
    switch (jt.verdict) {
      case Verdict::kYes: ++rep.yes, ++rs.yes; break;
      case Verdict::kMaybe: ++rep.maybe, ++rs.maybe; break;
      default: ++rep.no, ++rs.no; break;
    }
  }
  if (rep.judged) {
    const double n = static_cast<double>(rep.judged);
    rep.yes_fraction = rep.yes / n;
    rep.maybe_fraction = rep.maybe / n;
    rep.no_fraction = rep.no / n;
  }
  return rep;
}

inline json to_json(const std::map<std::string, RelationScore>& per) {
  json out = json::object();
  for (const auto& [r, s] : per) {
    out[r] = {{"judged", s.judged}, {"yes", s.yes}, {"maybe", s.maybe}, {"no", s.no}};
  }
  return out;
}

inline json to_json(const FactScoreReport& r) {
  return json{{"mode", prompts::fact_mode_name(r.mode)},
              {"strict", r.strict},
              {"pairs", r.pairs},
              {"judged", r.judged},
              {"unparseable", r.unparseable},
              {"supported", r.supported},
              {"score", r.score},
              {"coverage", r.coverage},
              {"per_relation", to_json(r.per_relation)}};
}

inline json to_json(const ValidityReport& r) {
  return json{{"triples", r.triples},
              {"judged", r.judged},
              {"unparseable", r.unparseable},
              {"unjudged", r.unjudged},
              {"yes", r.yes_fraction},
              {"maybe", r.maybe_fraction},
              {"no", r.no_fraction},
              {"counts", {{"yes", r.yes}, {"maybe", r.maybe}, {"no", r.no}}},
              {"per_relation", to_json(r.per_relation)}};
}

inline json to_json(const JudgedTriple& j) {
  return json{{"schema_version", kSchemaVersion},
              {"head", j.head},
              {"relation", j.relation},
              {"tail", j.tail},
              {"context", j.context_id},
              {"judged", j.judged},
              {"verdict", verdict_name(j.verdict)}};
}

// Plain-text summary for terminals.
inline std::string format_report(const std::vector<FactScoreReport>& facts,
                                 const ValidityReport& validity) {
  std::string out;
  char buf[256];
  for (const auto& f : facts) {
    std::snprintf(buf, sizeof buf, "FActScore* (%s): %.4f  [%zu/%zu supported, coverage %.3f]\n",
                  prompts::fact_mode_name(f.mode), f.score, f.supported, f.judged, f.coverage);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "ValidityScore: yes %.4f  maybe %.4f  no %.4f  [%zu judged]\n",
                validity.yes_fraction, validity.maybe_fraction, validity.no_fraction, validity.judged);
  out += buf;
  out += "relation                          judged   yes  maybe   no\n";
  for (const auto& [r, s] : validity.per_relation) {
    std::snprintf(buf, sizeof buf, "%-32s %7zu %5zu %6zu %4zu\n", r.c_str(), s.judged, s.yes,
                  s.maybe, s.no);
    out += buf;
  }
  return out;
}

}  // namespace graphmert
