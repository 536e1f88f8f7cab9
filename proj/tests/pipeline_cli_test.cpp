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


#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

#include "graphmert/pipeline.hpp"
#include "test_util.hpp"

namespace graphmert {
namespace {

namespace fs = std::filesystem;

TEST(RunConfig, PathsResolveAgainstTheConfigDirectory) {
  const RunConfig c = run_config_from_json(
      {{"corpus", "corpus.jsonl"}, {"vocab", "/abs/vocab.txt"}, {"workdir", "../work"}, {"alpha", 0.4},
       {"model", {{"hidden", 16}, {"heads", 2}}}, {"client", {{"cache_dir", "cache"}}}},
      "/data/run");
  EXPECT_EQ(c.corpus, "/data/run/corpus.jsonl");
  EXPECT_EQ(c.vocab, "/abs/vocab.txt");
  EXPECT_EQ(c.workdir, "/data/work");
  EXPECT_EQ(c.client.cache_dir, "/data/run/cache");
  EXPECT_EQ(c.alpha, 0.4);
  EXPECT_EQ(c.model.hidden, 16);
  EXPECT_NO_THROW(c.validate());
}

TEST(RunConfig, JsonRoundTrip) {
  RunConfig c;
  c.beta = 0.7;
  c.masking.root_rate = 0.2;
  c.linker.jaccard_threshold = 0.6;
  c.numeric_filter = true;
  c.seed = 9;
  EXPECT_EQ(to_json(run_config_from_json(to_json(c))).dump(), to_json(c).dump());
}

TEST(RunConfig, Validation) {
  auto bad = [](auto mutate) {
    RunConfig c;
    mutate(c);
    return c;
  };
  EXPECT_THROW(bad([](RunConfig& c) { c.alpha = 0.0; }).validate(), Error);
  EXPECT_THROW(bad([](RunConfig& c) { c.alpha = 1.0; }).validate(), Error);
  EXPECT_THROW(bad([](RunConfig& c) { c.beta = 1.5; }).validate(), Error);
  EXPECT_THROW(bad([](RunConfig& c) { c.top_k = 0; }).validate(), Error);
  EXPECT_THROW(bad([](RunConfig& c) { c.jobs = 0; }).validate(), Error);
  EXPECT_THROW(bad([](RunConfig& c) { c.batch_size = 0; }).validate(), Error);
  EXPECT_THROW(run_config_from_json({{"client", {{"backend", "carrier-pigeon"}}}}), Error);
}

// Runs the CLI against the bundled fixture, sending stdout to `out`.
int cli(const std::string& args, const std::string& out = "/dev/null") {
  const std::string cmd = std::string(GRAPHMERT_CLI_PATH) + " --config " GRAPHMERT_FIXTURE_DIR "/config.json " +
                          args + " > " + out + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { work_ = testing::scratch_dir("cli_work"); }
  static std::string work_;
  std::string flags() const { return "--mock-clients --workdir " + work_; }
};
std::string Cli::work_;

TEST_F(Cli, StagesWriteManifestsAndStatsSeesThem) {
  ASSERT_EQ(cli("ingest " + flags()), 0);
  ASSERT_EQ(cli("link " + flags()), 0);
  ASSERT_EQ(cli("inject " + flags()), 0);
  for (const char* s : {"ingest", "link", "inject"}) {
    const json m = json::parse(read_file(work_ + "/" + s + "/manifest.json"));
    EXPECT_EQ(m.at("stage"), s);
    EXPECT_EQ(m.at("schema_version"), kSchemaVersion);
    EXPECT_FALSE(m.at("outputs").empty()) << s;
    for (const auto& [name, hash] : m.at("outputs").items()) {
      EXPECT_EQ(hash, hex64(fnv1a(read_file(work_ + "/" + s + "/" + name)))) << s << "/" << name;
    }
  }
  const std::string out = work_ + "/stats.out";
  ASSERT_EQ(cli("stats " + flags(), out), 0);
  const json stats = json::parse(read_file(out));
  EXPECT_TRUE(stats.at("stages").contains("inject"));
  EXPECT_FALSE(stats.at("stages").contains("train"));
  EXPECT_FALSE(stats.at("relation_table").empty());

  // Stage order is enforced.
  EXPECT_EQ(cli("extract " + flags()), static_cast<int>(ErrorKind::kMissingInput));
  EXPECT_EQ(cli("verify " + flags()), static_cast<int>(ErrorKind::kMissingInput));
}

TEST_F(Cli, ArgumentAndConfigErrors) {
  EXPECT_EQ(cli("ingest " + flags() + " --alpha 1.5"), static_cast<int>(ErrorKind::kInvalidArgument));
  EXPECT_EQ(cli("frobnicate"), static_cast<int>(ErrorKind::kInvalidArgument));
  EXPECT_EQ(cli(""), static_cast<int>(ErrorKind::kInvalidArgument));
  EXPECT_EQ(cli("stats --workdir " + work_ + "/nothing-here"), static_cast<int>(ErrorKind::kMissingInput));

  const std::string dir = testing::scratch_dir("cli_bad_config");
  write_file(dir + "/broken.json", "{\"alpha\": ");
  const std::string base = std::string(GRAPHMERT_CLI_PATH) + " --config " + dir + "/broken.json stats >/dev/null 2>&1";
  const int status = std::system(base.c_str());
  EXPECT_EQ(WEXITSTATUS(status), static_cast<int>(ErrorKind::kSchemaMismatch));
}

}  // namespace
}  // namespace graphmert
