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

// Regenerates the bundled toy fixture:
//   make_fixture --out fixtures/toy [--docs 200] [--seed 7]

#include <iostream>

#include <CLI11.hpp>

#include "graphmert/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write the synthetic toy corpus and its run configuration"};
  std::string out = "fixtures/toy";
  graphmert::SyntheticConfig sc;
  app.add_option("--out", out, "Output directory");
  app.add_option("--docs", sc.docs, "Number of documents");
  app.add_option("--seed", sc.seed, "Generator seed");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto corpus = graphmert::make_synthetic_corpus(sc);
    graphmert::write_synthetic_corpus(corpus, out);
    const graphmert::json config{
        {"corpus", "corpus.jsonl"},
        {"vocab", "vocab.txt"},
        {"seed_triples", "seed_triples.jsonl"},
        {"concepts", "concepts.jsonl"},
        {"blocklist", "blocklist.txt"},
        {"workdir", "work"},
        {"alpha", 0.55},
        {"beta", 0.67},
        {"top_k", 20},
        {"model",
         {{"layers", 2}, {"heads", 2}, {"hidden", 32}, {"intermediate", 64}, {"lambda", 0.6},
          {"dropout", 0.1}, {"relation_dropout", 0.3}}},
        {"train", {{"max_lr", 2e-3}, {"warmup_steps", 50}, {"total_steps", 1000}}},
        {"batch_size", 8},
        {"log_every", 25},
        {"client", {{"backend", "mock"}, {"mock_embedder", "bow"}, {"embedding_dim", 256}}},
        {"seed", 42},
        {"jobs", 1}};
    graphmert::write_file(out + "/config.json", config.dump(2) + "\n");
    std::cout << "wrote " << corpus.docs.size() << " documents, " << corpus.seed_triples.size()
              << " seed triples, " << corpus.concepts.size() << " concepts to " << out << "\n";
  } catch (const graphmert::Error& e) {
    std::cerr << e.what() << "\n";
    return static_cast<int>(e.kind());
  }
  return 0;
}
