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

// Pipeline stages behind the CLI. Each stage reads the artifacts of earlier
// stages from the work directory, writes its own under <workdir>/<stage>/,
// and records a manifest (input hashes, config hash, output hashes).
// Wall-clock timings go to a separate timings.json so that manifests stay
// byte-identical across reruns.
//
//   ingest   sequences.jsonl
//   link     mentions.jsonl matched.jsonl
//   inject   graphs.jsonl seed_kg.jsonl relations.json relation_stats.json
//   train    checkpoint.bin metrics.jsonl
//   extract  queries.jsonl kg.jsonl extraction_stats.json
//   verify   verdicts.jsonl report.json report.txt cache/
//   stats    stats.json

#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "graphmert/extractor.hpp"
#include "graphmert/injector.hpp"
#include "graphmert/linker.hpp"
#include "graphmert/masking.hpp"
#include "graphmert/mock_clients.hpp"
#include "graphmert/model/checkpoint.hpp"
#include "graphmert/model/trainer.hpp"
#include "graphmert/services_http.hpp"
#include "graphmert/verifier.hpp"

namespace graphmert {

struct RunConfig {
  std::string corpus, vocab, seed_triples, concepts, blocklist;
  std::string workdir = "work";
  double alpha = 0.55;
  double beta = 0.67;
  int top_k = 20;
  ModelConfig model;
  TrainConfig train;
  MaskingConfig masking;
  int batch_size = 8;
  int log_every = 10;
  ClientConfig client;
  LinkerConfig linker;
  size_t triples_per_entity = 40;
  int index_clusters = 0;  // 0: exact scan
  bool numeric_filter = false;
  bool strict_verdicts = false;
  size_t validity_batch = 20;
  std::string domain = kDefaultDomain;
  uint64_t seed = 42;
  int jobs = 1;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw invalid_argument("alpha must be in (0,1)");
    if (!(beta > 0.0 && beta < 1.0)) throw invalid_argument("beta must be in (0,1)");
    if (top_k < 1) throw invalid_argument("top-k must be >= 1");
    if (batch_size < 1) throw invalid_argument("batch_size must be >= 1");
    if (jobs < 1) throw invalid_argument("jobs must be >= 1");
    model.validate();
  }
};

inline json to_json(const RunConfig& c) {
  return json{{"corpus", c.corpus},
              {"vocab", c.vocab},
              {"seed_triples", c.seed_triples},
              {"concepts", c.concepts},
              {"blocklist", c.blocklist},
              {"workdir", c.workdir},
              {"alpha", c.alpha},
              {"beta", c.beta},
              {"top_k", c.top_k},
              {"model", to_json(c.model)},
              {"train", to_json(c.train)},
              {"masking",
               {{"root_rate", c.masking.root_rate},
                {"span_geometric_p", c.masking.span_geometric_p},
                {"max_span", c.masking.max_span},
                {"leaf_rate", c.masking.leaf_rate},
                {"mask_prob", c.masking.mask_prob},
                {"random_prob", c.masking.random_prob}}},
              {"batch_size", c.batch_size},
              {"log_every", c.log_every},
              {"client", to_json(c.client)},
              {"linker", {{"top_k", c.linker.top_k}, {"jaccard_threshold", c.linker.jaccard_threshold}}},
              {"triples_per_entity", c.triples_per_entity},
              {"index_clusters", c.index_clusters},
              {"numeric_filter", c.numeric_filter},
              {"strict_verdicts", c.strict_verdicts},
              {"validity_batch", c.validity_batch},
              {"domain", c.domain},
              {"seed", c.seed},
              {"jobs", c.jobs}};
}

// Relative paths resolve against `base_dir` (the config file's directory).
inline RunConfig run_config_from_json(const json& j, const std::string& base_dir = "") {
  RunConfig c;
  auto path = [&](const char* key, std::string fallback) {
    std::string p = j.value(key, fallback);
    if (!p.empty() && !base_dir.empty() && std::filesystem::path(p).is_relative()) {
      p = (std::filesystem::path(base_dir) / p).lexically_normal().string();
    }
    return p;
  };
  c.corpus = path("corpus", c.corpus);
  c.vocab = path("vocab", c.vocab);
  c.seed_triples = path("seed_triples", c.seed_triples);
  c.concepts = path("concepts", c.concepts);
  c.blocklist = path("blocklist", c.blocklist);
  c.workdir = path("workdir", c.workdir);
  c.alpha = j.value("alpha", c.alpha);
  c.beta = j.value("beta", c.beta);
  c.top_k = j.value("top_k", c.top_k);
  if (j.contains("model")) c.model = model_config_from_json(j["model"], c.model);
  if (j.contains("train")) c.train = train_config_from_json(j["train"], c.train);
  if (j.contains("masking")) {
    const json& m = j["masking"];
    c.masking.root_rate = m.value("root_rate", c.masking.root_rate);
    c.masking.span_geometric_p = m.value("span_geometric_p", c.masking.span_geometric_p);
    c.masking.max_span = m.value("max_span", c.masking.max_span);
    c.masking.leaf_rate = m.value("leaf_rate", c.masking.leaf_rate);
    c.masking.mask_prob = m.value("mask_prob", c.masking.mask_prob);
    c.masking.random_prob = m.value("random_prob", c.masking.random_prob);
  }
  c.batch_size = j.value("batch_size", c.batch_size);
  c.log_every = j.value("log_every", c.log_every);
  if (j.contains("client")) c.client = client_config_from_json(j["client"], c.client);
  if (!c.client.cache_dir.empty() && !base_dir.empty() &&
      std::filesystem::path(c.client.cache_dir).is_relative()) {
    c.client.cache_dir = (std::filesystem::path(base_dir) / c.client.cache_dir).string();
  }
  if (j.contains("linker")) {
    c.linker.top_k = j["linker"].value("top_k", c.linker.top_k);
    c.linker.jaccard_threshold = j["linker"].value("jaccard_threshold", c.linker.jaccard_threshold);
  }
  c.triples_per_entity = j.value("triples_per_entity", c.triples_per_entity);
  c.index_clusters = j.value("index_clusters", c.index_clusters);
  c.numeric_filter = j.value("numeric_filter", c.numeric_filter);
  c.strict_verdicts = j.value("strict_verdicts", c.strict_verdicts);
  c.validity_batch = j.value("validity_batch", c.validity_batch);
  c.domain = j.value("domain", c.domain);
  c.seed = j.value("seed", c.seed);
  c.jobs = j.value("jobs", c.jobs);
  return c;
}

// ---------------------------------------------------------------------------
// Logging and clients.

// (level, event, fields). Levels: "debug", "info", "warn", "error".
using LogSink = std::function<void(const std::string&, const std::string&, const json&)>;

struct Clients {
  std::unique_ptr<ChatClient> chat;
  std::unique_ptr<EmbeddingClient> raw_embedder;
  std::unique_ptr<MemoizingEmbeddingClient> embedder;
};

inline Clients make_clients(const RunConfig& cfg, const LogSink& log) {
  Clients c;
  MetricsHook hook = [log](const RequestEvent& e) {
    if (!log) return;
    log(e.ok ? "debug" : "warn", "request",
        json{{"kind", e.kind}, {"backend", e.backend}, {"attempt", e.attempt}, {"ok", e.ok},
             {"latency_ms", e.latency_ms}, {"error", e.error}});
  };
  if (cfg.client.backend == "mock") {
    c.chat = std::make_unique<MockChatClient>(mock_responder(cfg.seed));
    c.raw_embedder = make_mock_embedder(cfg.client, cfg.seed);
  } else {
    c.chat = make_http_chat_client(cfg.client, hook);
    c.raw_embedder = make_http_embedding_client(cfg.client, hook);
  }
  c.embedder = std::make_unique<MemoizingEmbeddingClient>(*c.raw_embedder);
  return c;
}

// ---------------------------------------------------------------------------
// Stage files.

namespace stage {

inline std::string dir(const RunConfig& c, const std::string& stage) {
  return (std::filesystem::path(c.workdir) / stage).string();
}

inline std::string file(const RunConfig& c, const std::string& stage, const std::string& name) {
  return (std::filesystem::path(c.workdir) / stage / name).string();
}

inline void require(const std::string& path, const std::string& hint) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorKind::kMissingInput, "missing " + path + (hint.empty() ? "" : " (" + hint + ")"));
  }
}

inline std::string hash_file(const std::string& path) { return hex64(fnv1a(read_file(path))); }

// Rows of a stage file must carry the current schema version.
inline std::vector<json> read_rows(const std::string& path) {
  auto rows = read_jsonl(path);
  for (const auto& r : rows) {
    if (r.value("schema_version", -1) != kSchemaVersion) {
      throw Error(ErrorKind::kSchemaMismatch, path + ": schema_version mismatch");
    }
  }
  return rows;
}

class Recorder {
 public:
  Recorder(const RunConfig& cfg, std::string stage, json config_slice)
      : cfg_(cfg), stage_(std::move(stage)), config_(std::move(config_slice)),
        start_(std::chrono::steady_clock::now()) {
    std::filesystem::create_directories(dir(cfg_, stage_));
  }

  void input(const std::string& name, const std::string& path) { inputs_[name] = hash_file(path); }
  std::string out(const std::string& name) {
    outputs_.push_back(name);
    return file(cfg_, stage_, name);
  }

  json finish(json summary) {
    json outs = json::object();
    for (const auto& o : outputs_) outs[o] = hash_file(file(cfg_, stage_, o));
    const json manifest{{"schema_version", kSchemaVersion},
                        {"stage", stage_},
                        {"config_hash", hex64(fnv1a(config_.dump()))},
                        {"config", config_},
                        {"inputs", inputs_},
                        {"outputs", outs},
                        {"summary", summary}};
    write_file(file(cfg_, stage_, "manifest.json"), manifest.dump(2) + "\n");
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_file(file(cfg_, stage_, "timings.json"), json{{"stage", stage_}, {"seconds", secs}}.dump() + "\n");
    summary["seconds"] = secs;
    return summary;
  }

 private:
  const RunConfig& cfg_;
  std::string stage_;
  json config_;
  json inputs_ = json::object();
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point start_;
};

inline std::vector<TokenSequence> load_sequences(const RunConfig& c, const Vocabulary& vocab) {
  const std::string p = file(c, "ingest", "sequences.jsonl");
  require(p, "run `ingest` first");
  std::vector<TokenSequence> out;
  for (const auto& r : read_rows(p)) out.push_back(sequence_from_json(r, vocab));
  return out;
}

inline RelationSet load_relations(const RunConfig& c) {
  const std::string p = file(c, "inject", "relations.json");
  require(p, "run `inject` first");
  return RelationSet(json::parse(read_file(p)).at("relations").get<std::vector<std::string>>());
}

inline std::vector<ChainGraph> load_graphs(const RunConfig& c, const RelationSet& rel,
                                           const Vocabulary& vocab) {
  const std::string p = file(c, "inject", "graphs.jsonl");
  require(p, "run `inject` first");
  std::vector<ChainGraph> out;
  for (const auto& r : read_rows(p)) out.push_back(graph_from_json(r, rel, vocab));
  return out;
}

inline Vocabulary load_vocab(const RunConfig& c) {
  require(c.vocab, "vocabulary file");
  return Vocabulary::load(c.vocab);
}

}  // namespace stage

inline json to_json(const Mention& m) {
  return json{{"seq_id", m.seq_id}, {"surface", m.surface}, {"span", to_json(m.root_span)}};
}

// ---------------------------------------------------------------------------
// Training loop shared by the CLI and tests.

struct TrainingOptions {
  int steps = 0;  // 0: train.total_steps
  int batch_size = 8;
  uint64_t seed = 42;
  int jobs = 1;
  std::function<void(const StepMetrics&)> on_step;
};

// Batches draw graphs uniformly with replacement; masks and dropout come
// from streams derived from (seed, step).
inline std::vector<StepMetrics> train_on_graphs(GraphmertModel& model, Trainer& trainer,
                                                const std::vector<ChainGraph>& graphs,
                                                const Vocabulary& vocab,
                                                const MaskingConfig& masking,
                                                const TrainingOptions& opt) {
  if (graphs.empty()) throw invalid_argument("training needs at least one graph");
  const auto replaceable = replaceable_ids(vocab);
  const int steps = opt.steps > 0 ? opt.steps : trainer.config().total_steps;
  std::vector<StepMetrics> history;
  const int pad = vocab.pad_id();
  for (int s = trainer.optimizer().step(); s < steps; ++s) {
    Rng rng = Rng::derive(opt.seed, static_cast<uint64_t>(s));
    std::vector<PreparedExample> batch;
    int targets = 0;
    for (int b = 0; b < opt.batch_size; ++b) {
      const ChainGraph& g = graphs[rng.uniform_int(graphs.size())];
      Rng mask_rng(rng.next_u64());
      const MaskPlan plan = make_mask_plan(g, vocab, replaceable, mask_rng, masking);
      batch.push_back(prepare_example(g, plan, pad, masking.max_span));
      targets += static_cast<int>(batch.back().targets.size());
    }
    if (targets == 0) continue;
    const StepMetrics m = trainer.step(batch, rng.next_u64(), opt.jobs);
    history.push_back(m);
    if (opt.on_step) opt.on_step(m);
  }
  (void)model;
  return history;
}

// ---------------------------------------------------------------------------
// Stages.

inline json run_ingest(const RunConfig& c, const LogSink& log = {}) {
  stage::require(c.corpus, "corpus file");
  const Vocabulary vocab = stage::load_vocab(c);
  stage::Recorder rec(c, "ingest", json{{"normalize", NormalizeOptions{}.boilerplate_patterns}});
  rec.input("corpus", c.corpus);
  rec.input("vocab", c.vocab);
  const auto docs = read_corpus(c.corpus);
  std::vector<json> rows;
  size_t tokens = 0, unk = 0;
  for (auto d : docs) {
    d.text = normalize(d.text);
    for (const auto& s : segment(d, vocab)) {
      for (int id : s.token_ids) {
        tokens += id != vocab.pad_id();
        unk += id == vocab.unk_id();
      }
      rows.push_back(to_json(s));
    }
  }
  write_jsonl(rec.out("sequences.jsonl"), rows);
  const json summary{{"documents", docs.size()}, {"sequences", rows.size()}, {"tokens", tokens},
                     {"unk_tokens", unk}};
  if (log) log("info", "ingest.done", summary);
  return rec.finish(summary);
}

inline json run_link(const RunConfig& c, Clients& clients, const LogSink& log = {}) {
  const Vocabulary vocab = stage::load_vocab(c);
  const auto sequences = stage::load_sequences(c, vocab);
  stage::require(c.concepts, "concept list");
  stage::require(c.seed_triples, "seed triples");
  stage::Recorder rec(c, "link",
                      json{{"linker", {{"top_k", c.linker.top_k}, {"jaccard_threshold", c.linker.jaccard_threshold}}},
                           {"triples_per_entity", c.triples_per_entity},
                           {"index_clusters", c.index_clusters},
                           {"client", to_json(c.client)},
                           {"seed", c.seed},
                           {"domain", c.domain}});
  rec.input("sequences", stage::file(c, "ingest", "sequences.jsonl"));
  rec.input("concepts", c.concepts);
  rec.input("seed_triples", c.seed_triples);
  std::set<std::string> blocklist(default_blocklist().begin(), default_blocklist().end());
  if (!c.blocklist.empty()) {
    stage::require(c.blocklist, "blocklist");
    rec.input("blocklist", c.blocklist);
    blocklist = load_blocklist(c.blocklist);
  }

  std::vector<std::pair<std::string, std::string>> id_name;
  for (const auto& r : read_jsonl(c.concepts)) {
    id_name.emplace_back(r.at("concept_id").get<std::string>(), r.at("name").get<std::string>());
  }
  const ConceptIndex index = ConceptIndex::build(id_name, *clients.embedder);
  std::unique_ptr<ClusteredIndex> clustered;
  if (c.index_clusters > 0) clustered = std::make_unique<ClusteredIndex>(index, c.index_clusters, c.seed);
  const KgStore store = KgStore::from_jsonl(c.seed_triples);
  const auto dictionary = store.heads();

  struct PerSeq {
    std::vector<json> mentions;
    std::vector<MatchedTriple> matched;
    bool discovery_failed = false;
  };
  std::vector<PerSeq> per(sequences.size());
  parallel_for(sequences.size(), c.jobs, [&](size_t i) {
    const TokenSequence& seq = sequences[i];
    std::vector<std::string> surfaces = dictionary;
    try {
      for (const auto& m : discover_mentions_chat(*clients.chat, c.client, seq, vocab, c.domain)) {
        surfaces.push_back(m.surface);
      }
    } catch (const ClientError&) {
      per[i].discovery_failed = true;
    }
    const auto mentions = resolve_mentions(seq, surfaces, vocab);
    std::vector<LinkedEntity> linked;
    for (const auto& m : mentions) {
      const auto v = clients.embedder->embed({m.surface, EmbeddingRole::kConceptLinking}).vector;
      std::optional<LinkedEntity> le;
      if (clustered) {
        // Same Jaccard gate over the clustered index's candidates.
        const auto grams = char3grams(m.surface);
        for (const auto& cand : clustered->search(v, c.linker.top_k)) {
          const ConceptEntry& ce = index.concepts()[cand.index];
          const double jac = jaccard(grams, char3grams(ce.name));
          if (jac > c.linker.jaccard_threshold) {
            le = LinkedEntity{m, ce.concept_id, ce.name, cand.cosine, jac};
            break;
          }
        }
      } else {
        le = link(m, v, index, c.linker);
      }
      json row = to_json(m);
      row["schema_version"] = kSchemaVersion;
      row["concept_id"] = le ? json(le->concept_id) : json();
      row["concept_name"] = le ? json(le->concept_name) : json();
      row["cosine"] = le ? json(le->cosine) : json();
      row["jaccard"] = le ? json(le->jaccard) : json();
      per[i].mentions.push_back(std::move(row));
      if (le) linked.push_back(*le);
    }
    const std::string text = sequence_text(seq, vocab);
    for (const auto& ec : select_triples(text, linked, store, blocklist, *clients.embedder,
                                         c.triples_per_entity)) {
      for (const auto& st : ec.triples) {
        MatchedTriple mt;
        mt.seq_id = seq.seq_id;
        mt.head_span = ec.entity.mention.root_span;
        mt.matched_head_id = make_matched_head_id(seq.seq_id, mt.head_span);
        mt.head = ec.entity.mention.surface;
        mt.relation = st.triple.relation;
        mt.tail = normalize(st.triple.tail, NormalizeOptions{{}});
        mt.score = st.score;
        per[i].matched.push_back(std::move(mt));
      }
    }
  });
  std::vector<json> mention_rows;
  std::vector<MatchedTriple> matched;
  size_t failures = 0;
  for (auto& p : per) {
    failures += p.discovery_failed;
    for (auto& m : p.mentions) mention_rows.push_back(std::move(m));
    for (auto& m : p.matched) matched.push_back(std::move(m));
  }
  std::sort(matched.begin(), matched.end(), matched_less);
  std::vector<json> matched_rows;
  for (const auto& m : matched) matched_rows.push_back(to_json(m));
  write_jsonl(rec.out("mentions.jsonl"), mention_rows);
  write_jsonl(rec.out("matched.jsonl"), matched_rows);
  size_t linked_count = 0;
  for (const auto& r : mention_rows) linked_count += !r["concept_id"].is_null();
  const json summary{{"sequences", sequences.size()}, {"mentions", mention_rows.size()},
                     {"linked", linked_count}, {"matched_triples", matched.size()},
                     {"discovery_failures", failures}};
  if (log) log("info", "link.done", summary);
  return rec.finish(summary);
}

inline json run_inject(const RunConfig& c, const LogSink& log = {}) {
  const Vocabulary vocab = stage::load_vocab(c);
  const auto sequences = stage::load_sequences(c, vocab);
  const std::string matched_path = stage::file(c, "link", "matched.jsonl");
  stage::require(matched_path, "run `link` first");
  InjectionConfig icfg;
  icfg.alpha = c.alpha;
  stage::Recorder rec(c, "inject", json{{"injection", to_json(icfg)}});
  rec.input("sequences", stage::file(c, "ingest", "sequences.jsonl"));
  rec.input("matched", matched_path);
  std::vector<MatchedTriple> matched;
  for (const auto& r : stage::read_rows(matched_path)) matched.push_back(matched_from_json(r));

  std::set<std::string> names;
  for (const auto& m : matched) names.insert(m.relation);
  const RelationSet all(std::vector<std::string>(names.begin(), names.end()));
  const InjectionResult res = inject_seed_kg(sequences, matched, all, vocab, icfg);

  // The injected seed KG fixes the relation vocabulary used by the model.
  std::set<std::string> used;
  for (const auto& m : res.seed_kg) used.insert(m.relation);
  const RelationSet relations(std::vector<std::string>(used.begin(), used.end()));
  std::vector<json> graph_rows;
  for (const auto& g : res.graphs) {
    ChainGraph remapped = g;
    for (auto& grp : remapped.leaves) {
      if (grp.has_relation()) grp.relation = relations.id(all.name(grp.relation));
    }
    graph_rows.push_back(to_json(remapped, relations));
  }
  std::vector<json> kg_rows;
  for (const auto& m : res.seed_kg) kg_rows.push_back(to_json(m));
  write_jsonl(rec.out("graphs.jsonl"), graph_rows);
  write_jsonl(rec.out("seed_kg.jsonl"), kg_rows);
  write_file(rec.out("relations.json"), json{{"relations", relations.names()}}.dump(2) + "\n");
  write_file(rec.out("relation_stats.json"), to_json(res.report).dump(2) + "\n");
  const json summary = to_json(res.report);
  if (log) log("info", "inject.done", summary);
  return rec.finish(summary);
}

inline json run_train(const RunConfig& c, const LogSink& log = {}) {
  const Vocabulary vocab = stage::load_vocab(c);
  const RelationSet relations = stage::load_relations(c);
  const auto graphs = stage::load_graphs(c, relations, vocab);
  ModelConfig mc = c.model;
  mc.vocab = vocab.size();
  mc.relations = relations.size();
  mc.validate();
  stage::Recorder rec(c, "train",
                      json{{"model", to_json(mc)},
                           {"train", to_json(c.train)},
                           {"batch_size", c.batch_size},
                           {"seed", c.seed},
                           // Gradient sums are grouped per worker.
                           {"jobs", c.jobs}});
  rec.input("graphs", stage::file(c, "inject", "graphs.jsonl"));
  rec.input("relations", stage::file(c, "inject", "relations.json"));
  rec.input("vocab", c.vocab);

  GraphmertModel model = GraphmertModel::create(mc, c.seed);
  Trainer trainer(model, c.train);
  std::vector<json> metric_rows;
  TrainingOptions opt;
  opt.batch_size = c.batch_size;
  opt.seed = c.seed;
  opt.jobs = c.jobs;
  opt.on_step = [&](const StepMetrics& m) {
    const bool last = m.step + 1 == c.train.total_steps;
    if (m.step % std::max(1, c.log_every) == 0 || last) {
      json row = to_json(m);
      row["schema_version"] = kSchemaVersion;
      metric_rows.push_back(row);
      if (log) log("info", "train.step", row);
    }
  };
  const auto history = train_on_graphs(model, trainer, graphs, vocab, c.masking, opt);

  Checkpoint ck;
  ck.config = mc;
  ck.relations = relations.names();
  ck.params = model.params();
  ck.adam_m = trainer.optimizer().first_moment();
  ck.adam_v = trainer.optimizer().second_moment();
  ck.step = trainer.optimizer().step();
  ck.seed = c.seed;
  ck.extra = json{{"train", to_json(c.train)}};
  save_checkpoint(rec.out("checkpoint.bin"), ck);
  write_jsonl(rec.out("metrics.jsonl"), metric_rows);
  json summary{{"steps", history.size()}};
  if (!history.empty()) {
    summary["initial_loss"] = history.front().loss;
    summary["final_loss"] = history.back().loss;
    summary["decay_offset"] = history.back().p;
  }
  if (log) log("info", "train.done", summary);
  return rec.finish(summary);
}

inline json run_extract(const RunConfig& c, Clients& clients, const LogSink& log = {}) {
  const Vocabulary vocab = stage::load_vocab(c);
  const std::string ck_path = stage::file(c, "train", "checkpoint.bin");
  stage::require(ck_path, "missing checkpoint: run `train` first");
  const RelationSet relations = stage::load_relations(c);
  const auto graphs = stage::load_graphs(c, relations, vocab);
  const std::string mentions_path = stage::file(c, "link", "mentions.jsonl");
  stage::require(mentions_path, "run `link` first");
  stage::require(c.seed_triples, "seed triples");
  ExtractionConfig ecfg;
  ecfg.top_k = static_cast<size_t>(c.top_k);
  ecfg.beta = c.beta;
  ecfg.numeric_filter = c.numeric_filter;
  ecfg.jobs = c.jobs;
  stage::Recorder rec(c, "extract",
                      json{{"top_k", ecfg.top_k},
                           {"beta", ecfg.beta},
                           {"numeric_filter", ecfg.numeric_filter},
                           {"numeric_density", ecfg.numeric_density},
                           {"client", to_json(c.client)},
                           {"seed", c.seed},
                           {"domain", c.domain}});
  rec.input("checkpoint", ck_path);
  rec.input("graphs", stage::file(c, "inject", "graphs.jsonl"));
  rec.input("mentions", mentions_path);
  rec.input("seed_triples", c.seed_triples);

  Checkpoint ck = load_checkpoint(ck_path);
  if (ck.relations != relations.names()) {
    throw Error(ErrorKind::kSchemaMismatch, "checkpoint relations differ from inject/relations.json");
  }
  GraphmertModel model = GraphmertModel::create(ck.config, ck.seed);
  model.params() = ck.params;

  const KgStore store = KgStore::from_jsonl(c.seed_triples);
  std::map<std::string, const ChainGraph*> by_seq;
  for (const auto& g : graphs) by_seq[g.seq_id] = &g;

  // Queries: every linked mention with the relations its concept carries in
  // the seed KG, plus whatever the helper model proposes, restricted to the
  // trained relation vocabulary.
  std::map<std::string, std::vector<json>> mentions_by_seq;
  for (const auto& r : stage::read_rows(mentions_path)) {
    if (r["concept_name"].is_null()) continue;
    mentions_by_seq[r.at("seq_id").get<std::string>()].push_back(r);
  }
  std::vector<std::vector<ExtractionQuery>> per_seq(graphs.size());
  std::vector<char> matching_failed(graphs.size(), 0);
  parallel_for(graphs.size(), c.jobs, [&](size_t gi) {
    const ChainGraph& g = graphs[gi];
    auto it = mentions_by_seq.find(g.seq_id);
    if (it == mentions_by_seq.end()) return;
    std::vector<std::string> heads;
    for (const auto& m : it->second) heads.push_back(m.at("surface").get<std::string>());
    json proposed = json::object();
    try {
      const std::string text = sequence_text(g.roots, vocab);
      const ChatResponse r = clients.chat->complete(make_chat_request(
          c.client, prompts::relation_matching(text, heads, relations.names(), c.domain),
          json{{"task", "relation_matching"}, {"sequence", text}, {"heads", heads},
               {"relations", relations.names()}}));
      proposed = parse_object(r.text);
    } catch (const ClientError&) {
      matching_failed[gi] = 1;
    }
    for (const auto& m : it->second) {
      const std::string head = m.at("surface").get<std::string>();
      std::set<std::string> rels;
      for (const auto& t : store.by_head(m.at("concept_name").get<std::string>())) {
        if (relations.contains(t.relation)) rels.insert(t.relation);
      }
      if (proposed.contains(head) && proposed[head].is_array()) {
        for (const auto& r : proposed[head]) {
          if (r.is_string() && relations.contains(r.get<std::string>())) rels.insert(r.get<std::string>());
        }
      }
      for (const auto& r : rels) {
        per_seq[gi].push_back({g.seq_id, head, span_from_json(m.at("span")), r});
      }
    }
  });
  std::vector<ExtractionQuery> queries;
  for (auto& v : per_seq) queries.insert(queries.end(), v.begin(), v.end());

  const ExtractionResult res = extract(model, by_seq, queries, relations, vocab, *clients.chat,
                                       *clients.embedder, c.client, ecfg);
  std::vector<json> query_rows, kg_rows;
  for (const auto& r : res.records) {
    json row = to_json(r);
    row["schema_version"] = kSchemaVersion;
    query_rows.push_back(std::move(row));
  }
  for (const auto& t : res.kg) kg_rows.push_back(to_json(t));
  write_jsonl(rec.out("queries.jsonl"), query_rows);
  write_jsonl(rec.out("kg.jsonl"), kg_rows);
  size_t mf = 0;
  for (char f : matching_failed) mf += f;
  json summary = to_json(res.counts);
  summary["relation_matching_failures"] = mf;
  write_file(rec.out("extraction_stats.json"), summary.dump(2) + "\n");
  if (log) log("info", "extract.done", summary);
  return rec.finish(summary);
}

inline json run_verify(const RunConfig& c, Clients& clients, const LogSink& log = {}) {
  const Vocabulary vocab = stage::load_vocab(c);
  const std::string kg_path = stage::file(c, "extract", "kg.jsonl");
  stage::require(kg_path, "run `extract` first");
  const auto sequences = stage::load_sequences(c, vocab);
  VerifierConfig vcfg;
  vcfg.strict = c.strict_verdicts;
  vcfg.validity_batch = c.validity_batch;
  vcfg.jobs = c.jobs;
  vcfg.domain = c.domain;
  stage::Recorder rec(c, "verify",
                      json{{"strict", vcfg.strict},
                           {"validity_batch", vcfg.validity_batch},
                           {"client", to_json(c.client)},
                           {"seed", c.seed},
                           {"domain", vcfg.domain}});
  rec.input("kg", kg_path);
  rec.input("sequences", stage::file(c, "ingest", "sequences.jsonl"));
  std::vector<ExtractedTriple> kg;
  for (const auto& r : stage::read_rows(kg_path)) kg.push_back(extracted_from_json(r));
  std::map<std::string, std::string> contexts;
  for (const auto& s : sequences) contexts[s.seq_id] = sequence_text(s, vocab);

  JudgeCache cache(c.client.cache_dir.empty() ? stage::file(c, "verify", "cache") : c.client.cache_dir);
  std::vector<FactScoreReport> facts;
  for (auto mode : {prompts::FactMode::kContextOnly, prompts::FactMode::kGeneralTruth}) {
    facts.push_back(factscore(kg, contexts, *clients.chat, c.client, mode, cache, vcfg));
  }
  const ValidityReport validity = validity_score(kg, *clients.chat, c.client, cache, vcfg);

  std::vector<json> verdict_rows;
  for (const auto& f : facts) {
    for (const auto& v : f.verdicts) {
      json row = to_json(v);
      row["score"] = std::string("factscore_") + prompts::fact_mode_name(f.mode);
      verdict_rows.push_back(std::move(row));
    }
  }
  for (const auto& v : validity.verdicts) {
    json row = to_json(v);
    row["score"] = "validity";
    verdict_rows.push_back(std::move(row));
  }
  json report{{"schema_version", kSchemaVersion}, {"total_triples", kg.size()},
              {"factscore", json::array()}, {"validity", to_json(validity)}};
  for (const auto& f : facts) report["factscore"].push_back(to_json(f));
  write_jsonl(rec.out("verdicts.jsonl"), verdict_rows);
  write_file(rec.out("report.json"), report.dump(2) + "\n");
  write_file(rec.out("report.txt"), format_report(facts, validity));
  json summary{{"total_triples", kg.size()},
               {"factscore_context", facts[0].score},
               {"factscore_general_truth", facts[1].score},
               {"coverage", facts[0].coverage},
               {"validity_yes", validity.yes_fraction},
               {"validity_maybe", validity.maybe_fraction},
               {"validity_no", validity.no_fraction}};
  if (log) {
    log("info", "verify.done", summary);
    log("debug", "verify.cache", json{{"hits", cache.hits()}, {"misses", cache.misses()}});
  }
  return rec.finish(summary);
}

// Summary over whatever stages have run; per-relation injection counts use
// the (#, relation, injections) table layout.
inline json run_stats(const RunConfig& c, const LogSink& log = {}) {
  json out{{"schema_version", kSchemaVersion}};
  for (const char* s : {"ingest", "link", "inject", "train", "extract", "verify"}) {
    const std::string m = stage::file(c, s, "manifest.json");
    if (std::filesystem::exists(m)) out["stages"][s] = json::parse(read_file(m)).at("summary");
  }
  const std::string rs = stage::file(c, "inject", "relation_stats.json");
  if (std::filesystem::exists(rs)) {
    out["relation_table"] = json::parse(read_file(rs)).at("relations");
  }
  if (!out.contains("stages")) {
    throw Error(ErrorKind::kMissingInput, "no stage artifacts under " + c.workdir);
  }
  std::filesystem::create_directories(stage::dir(c, "stats"));
  write_file(stage::file(c, "stats", "stats.json"), out.dump(2) + "\n");
  if (log) log("info", "stats.done", json{{"stages", out["stages"].size()}});
  return out;
}

}  // namespace graphmert
