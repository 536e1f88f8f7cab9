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

// graphmert_cli: ingest | link | inject | train | extract | verify | stats
//
// Exit codes: 0 ok, 1 internal, 2 invalid argument, 3 missing input,
// 4 schema mismatch, 5 non-finite loss, 6 client failure.

#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "graphmert/pipeline.hpp"

namespace {

using graphmert::json;

std::string human_fields(const json& fields) {
  std::string out;
  for (auto it = fields.begin(); it != fields.end(); ++it) {
    out += " " + it.key() + "=" + (it->is_string() ? it->get<std::string>() : it->dump());
  }
  return out;
}

graphmert::LogSink make_log_sink(bool verbose) {
  auto logger = spdlog::stderr_color_mt("graphmert");
  if (verbose) {
    logger->set_pattern("%H:%M:%S.%e %^%-5l%$ %v");
    logger->set_level(spdlog::level::debug);
  } else {
    logger->set_pattern(R"({"ts":"%Y-%m-%dT%H:%M:%S.%eZ","level":"%l",%v})",
                        spdlog::pattern_time_type::utc);
    logger->set_level(spdlog::level::info);
  }
  return [logger, verbose](const std::string& level, const std::string& event, const json& fields) {
    const auto lvl = spdlog::level::from_str(level);
    if (!logger->should_log(lvl)) return;
    if (verbose) {
      logger->log(lvl, "{}{}", event, human_fields(fields));
    } else {
      logger->log(lvl, "\"event\":{},\"fields\":{}", json(event).dump(), fields.dump());
    }
  };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Build a knowledge graph from a text corpus with a graph encoder"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<double> alpha, beta, lambda;
  std::optional<int> top_k, jobs;
  std::optional<uint64_t> seed;
  std::optional<std::string> workdir;
  std::optional<int> steps;
  bool mock = false;
  bool verbose = false;
  app.add_option("--config", config_path, "Run configuration (JSON)")->check(CLI::ExistingFile);
  app.add_option("--alpha", alpha, "Injection relevance threshold");
  app.add_option("--beta", beta, "Extraction similarity threshold");
  app.add_option("--top-k", top_k, "Tokens offered per extraction query");
  app.add_option("--lambda", lambda, "Decay-mask base");
  app.add_option("--jobs", jobs, "Worker cap");
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--workdir", workdir, "Stage artifact directory");
  app.add_flag("--mock-clients", mock, "Use the deterministic offline clients");
  app.add_flag("--verbose,-v", verbose, "Human-readable debug logging");

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"ingest", "Normalize and segment the corpus into 128-token sequences"},
      {"link", "Discover head mentions, link them to concepts, score seed triples"},
      {"inject", "Select at most one seed triple per head and build chain graphs"},
      {"train", "Train the graph encoder on the chain graphs"},
      {"extract", "Predict tails, compose them with the helper model, filter"},
      {"verify", "Score the extracted KG with the judge model"},
      {"stats", "Summarize all stage artifacts"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    if (name == "train") sub->add_option("--steps", steps, "Override train.total_steps");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(graphmert::ErrorKind::kInvalidArgument);
  }

  const graphmert::LogSink log = make_log_sink(verbose);
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    graphmert::RunConfig cfg;
    if (!config_path.empty()) {
      const json j = json::parse(graphmert::read_file(config_path));
      cfg = graphmert::run_config_from_json(
          j, std::filesystem::path(config_path).parent_path().string());
    }
    if (alpha) cfg.alpha = *alpha;
    if (beta) cfg.beta = *beta;
    if (top_k) cfg.top_k = *top_k;
    if (lambda) cfg.model.lambda = *lambda;
    if (jobs) cfg.jobs = *jobs;
    if (seed) cfg.seed = *seed;
    if (workdir) cfg.workdir = *workdir;
    if (steps) cfg.train.total_steps = *steps;
    if (mock) cfg.client.backend = "mock";
    cfg.validate();
    log("info", "command.start", json{{"command", command}, {"workdir", cfg.workdir},
                                      {"backend", cfg.client.backend}});

    json summary;
    if (command == "ingest") {
      summary = graphmert::run_ingest(cfg, log);
    } else if (command == "inject") {
      summary = graphmert::run_inject(cfg, log);
    } else if (command == "train") {
      summary = graphmert::run_train(cfg, log);
    } else if (command == "stats") {
      summary = graphmert::run_stats(cfg, log);
    } else {
      graphmert::Clients clients = graphmert::make_clients(cfg, log);
      if (command == "link") summary = graphmert::run_link(cfg, clients, log);
      if (command == "extract") summary = graphmert::run_extract(cfg, clients, log);
      if (command == "verify") summary = graphmert::run_verify(cfg, clients, log);
    }
    std::cout << summary.dump(2) << std::endl;
    return 0;
  } catch (const graphmert::Error& e) {
    log("error", "command.failed", json{{"command", command}, {"kind", static_cast<int>(e.kind())},
                                        {"message", e.what()}});
    return static_cast<int>(e.kind());
  } catch (const json::exception& e) {
    log("error", "command.failed", json{{"command", command}, {"message", e.what()}});
    return static_cast<int>(graphmert::ErrorKind::kSchemaMismatch);
  } catch (const std::exception& e) {
    log("error", "command.failed", json{{"command", command}, {"message", e.what()}});
    return static_cast<int>(graphmert::ErrorKind::kInternal);
  }
}
