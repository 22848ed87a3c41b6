// Copyright 2026 The DMDK Authors.
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


#include <sys/wait.h>

#include <cstdlib>

#include "support.hpp"

namespace dmdk {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::string kData = DMDK_DATA_DIR;

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

CliRun run_cli(const fs::path& dir, const std::string& args) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + DMDK_CLI_PATH + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = testing::read_file(out);
  r.err = testing::read_file(err);
  return r;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

std::vector<json> read_jsonl(const fs::path& p) {
  std::vector<json> out;
  std::istringstream in(testing::read_file(p));
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

// Writes a corpus whose feature paths point at the sample features.
fs::path write_corpus_file(const fs::path& dir, const std::vector<json>& records) {
  std::string text;
  for (auto r : records) {
    if (!r.contains("features")) r["features"] = {kData + "/sample/features/r1.fmat"};
    text += r.dump() + "\n";
  }
  const fs::path p = dir / "corpus.jsonl";
  testing::write_file(p, text);
  return p;
}

fs::path write_config(const fs::path& dir, json overrides) {
  json cfg = json::parse(testing::read_file(DMDK_CONFIG_DIR "/desk.json"));
  cfg["paths"] = {{"base_graph", kData + "/base_graph.json"}, {"lexicon", kData + "/lexicon.tsv"}};
  cfg.merge_patch(overrides);
  const fs::path p = dir / "run.json";
  testing::write_file(p, cfg.dump(2));
  return p;
}

TEST(Cli, UsageErrorsExitOne) {
  const auto dir = testing::scratch_dir();
  EXPECT_EQ(run_cli(dir, "").code, 1);
  EXPECT_EQ(run_cli(dir, "frobnicate").code, 1);
  EXPECT_EQ(run_cli(dir, "train --corpus x.jsonl").code, 1);
  EXPECT_EQ(run_cli(dir, "build-graph --base a --in b --out-dir c --format svg").code, 1);
  const CliRun help = run_cli(dir, "--help");
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("gradcheck"), std::string::npos);
}

TEST(Cli, ValidationAndIoErrorsExitTwo) {
  const auto dir = testing::scratch_dir();
  EXPECT_EQ(run_cli(dir, "config --config " + q(dir / "absent.json")).code, 2);
  testing::write_file(dir / "bad.json", R"({"model": {"dim": 30, "heads": 4}})");
  const CliRun bad = run_cli(dir, "config --config " + q(dir / "bad.json"));
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("config.model.dim"), std::string::npos) << bad.err;
  testing::write_file(dir / "typo.json", R"({"train": {"learnig_rate": 0.1}})");
  EXPECT_EQ(run_cli(dir, "config --config " + q(dir / "typo.json")).code, 2);
}

TEST(Cli, ConfigPrintsEffectiveConfigWithSeedOverride) {
  const auto dir = testing::scratch_dir();
  const CliRun r = run_cli(dir, std::string("config --config ") + DMDK_CONFIG_DIR "/desk.json --seed 123");
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["train"]["seed"], 123);
  EXPECT_EQ(j["model"]["dim"], 32);
  EXPECT_EQ(j["decode"]["max_length"], 16);
  EXPECT_EQ(j["model"]["layer_norm_eps"], 1e-5);
}

// ---------------------------------------------------------------- tag

TEST(CliTag, HeartAndCardiomegaly) {
  const auto dir = testing::scratch_dir();
  const auto in = write_corpus_file(dir, {{{"id", "h1"}, {"report", "The heart shows cardiomegaly."}}});
  const CliRun r = run_cli(dir, "tag --lexicon " + q(kData + "/lexicon.tsv") + " --in " + q(in) + " --out " +
                                 q(dir / "tagged.jsonl"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto out = read_jsonl(dir / "tagged.jsonl");
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0]["entities"], json::parse(R"([{"text": "heart", "type": "ANATOMY"},
                                                  {"text": "cardiomegaly", "type": "OBSERVATION"}])"));
}

TEST(CliTag, AlreadyTaggedRecordsPassThrough) {
  const auto dir = testing::scratch_dir();
  const json ents = json::parse(R"([{"text": "spine", "type": "ANATOMY"}])");
  const auto in = write_corpus_file(dir, {{{"id", "a"}, {"report", "the heart is normal ."}, {"entities", ents}}});
  ASSERT_EQ(run_cli(dir, "tag --lexicon " + q(kData + "/lexicon.tsv") + " --in " + q(in) + " --out " +
                             q(dir / "out.jsonl"))
                .code,
            0);
  const auto out = read_jsonl(dir / "out.jsonl");
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0]["entities"], ents);
  EXPECT_EQ(out[0]["report"], "the heart is normal .");
}

TEST(CliTag, EmptyCorpusGivesEmptyOutput) {
  const auto dir = testing::scratch_dir();
  testing::write_file(dir / "empty.jsonl", "");
  ASSERT_EQ(run_cli(dir, "tag --lexicon " + q(kData + "/lexicon.tsv") + " --in " + q(dir / "empty.jsonl") +
                             " --out " + q(dir / "out.jsonl"))
                .code,
            0);
  EXPECT_EQ(testing::read_file(dir / "out.jsonl"), "");
}

TEST(CliTag, RewritesRelativeFeaturePathsForNewLocation) {
  const auto dir = testing::scratch_dir();
  fs::create_directories(dir / "sub");
  const CliRun r = run_cli(dir, "tag --lexicon " + q(kData + "/lexicon.tsv") + " --in " +
                                 q(kData + "/sample/untagged.jsonl") + " --out " + q(dir / "sub" / "t.jsonl"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto out = read_jsonl(dir / "sub" / "t.jsonl");
  ASSERT_EQ(out.size(), 8u);
  for (const auto& rec : out) {
    const fs::path feat = dir / "sub" / rec["features"][0].get<std::string>();
    EXPECT_TRUE(fs::exists(feat)) << feat;
    EXPECT_TRUE(rec.contains("entities"));
  }
}

TEST(CliTag, MalformedLineIsReportedWithLocation) {
  const auto dir = testing::scratch_dir();
  testing::write_file(dir / "bad.jsonl", "{\"id\": \"a\", \"features\": [\"x\"], \"report\": \"r\"}\n{oops\n");
  const CliRun r = run_cli(dir, "tag --lexicon " + q(kData + "/lexicon.tsv") + " --in " + q(dir / "bad.jsonl") +
                                 " --out " + q(dir / "o.jsonl"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bad.jsonl:2"), std::string::npos) << r.err;
}

// ---------------------------------------------------------------- build-graph

TEST(CliBuildGraph, OneFilePerRecord) {
  const auto dir = testing::scratch_dir();
  const CliRun r = run_cli(dir, "build-graph --base " + q(kData + "/base_graph.json") + " --in " +
                                 q(kData + "/sample/corpus.jsonl") + " --out-dir " + q(dir / "g") + " --format json");
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir / "g")) files += e.path().extension() == ".json" ? 1 : 0;
  EXPECT_EQ(files, 8u);
  const json trachea = json::parse(testing::read_file(dir / "g" / "r7.json"));
  EXPECT_NE(trachea.dump().find("\"trachea\""), std::string::npos);
}

TEST(CliBuildGraph, ThreeRecordsThreeDotFiles) {
  const auto dir = testing::scratch_dir();
  const json e = json::parse(R"([{"text": "heart", "type": "ANATOMY"}])");
  const auto in = write_corpus_file(dir, {{{"id", "x1"}, {"entities", e}},
                                          {{"id", "x2"}, {"entities", e}},
                                          {{"id", "x3"}, {"entities", e}}});
  ASSERT_EQ(run_cli(dir, "build-graph --base " + q(kData + "/base_graph.json") + " --in " + q(in) + " --out-dir " +
                             q(dir / "g"))
                .code,
            0);
  for (const char* id : {"x1", "x2", "x3"}) {
    const std::string dot = testing::read_file(dir / "g" / (std::string(id) + ".dot"));
    EXPECT_EQ(dot.rfind("graph", 0), 0u) << dot.substr(0, 40);
  }
}

TEST(CliBuildGraph, NoPairsGivesBaseGraph) {
  const auto dir = testing::scratch_dir();
  const auto in = write_corpus_file(
      dir, {{{"id", "np"}, {"entities", json::parse(R"([{"text": "clear", "type": "OBSERVATION"}])")}}});
  ASSERT_EQ(run_cli(dir, "build-graph --base " + q(kData + "/base_graph.json") + " --in " + q(in) + " --out-dir " +
                             q(dir / "g") + " --format json")
                .code,
            0);
  const auto base = load_base_graph(kData + "/base_graph.json");
  EXPECT_EQ(testing::read_file(dir / "g" / "np.json"), export_graph(base, GraphFormat::kJson));
}

TEST(CliBuildGraph, UntaggedRecordIsNamed) {
  const auto dir = testing::scratch_dir();
  const CliRun r = run_cli(dir, "build-graph --base " + q(kData + "/base_graph.json") + " --in " +
                                 q(kData + "/sample/untagged.jsonl") + " --out-dir " + q(dir / "g"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("'r1'"), std::string::npos) << r.err;
}

// ---------------------------------------------------------------- train / generate / evaluate

TEST(CliTrain, ZeroEpochsCheckpointEqualsInitialization) {
  const auto dir = testing::scratch_dir();
  const auto cfg_path = write_config(dir, {{"train", {{"epochs", 0}}}});
  const std::string corpus = kData + "/sample/corpus.jsonl";
  const CliRun r = run_cli(dir, "train --config " + q(cfg_path) + " --corpus " + q(corpus) + " --out " + q(dir / "run"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(testing::read_file(dir / "run" / "losses.tsv"), "epoch\tloss\n");

  RunConfig cfg = load_config(cfg_path);
  const auto records = load_corpus(corpus, CorpusUse::kTraining);
  cfg.model.feature_dim = 16;
  auto ctx = build_context(records, load_base_graph(kData + "/base_graph.json"), load_lexicon(kData + "/lexicon.tsv"),
                           cfg.train.min_freq);
  const Model init = Model::init(cfg.model, std::move(ctx), cfg.train.seed);
  const auto expected = checkpoint_bytes(init, cfg);
  EXPECT_EQ(testing::read_file(dir / "run" / "model.ckpt"), std::string(expected.begin(), expected.end()));
  const json eff = json::parse(testing::read_file(dir / "run" / "effective_config.json"));
  EXPECT_EQ(eff, config_to_json(cfg));
}

TEST(CliTrain, OverfitThenGenerateAndEvaluate) {
  const auto dir = testing::scratch_dir();
  const std::string corpus = kData + "/sample/corpus.jsonl";
  const CliRun t = run_cli(dir, std::string("train --config ") + DMDK_CONFIG_DIR "/desk.json --corpus " + q(corpus) +
                                 " --out " + q(dir / "run"));
  ASSERT_EQ(t.code, 0) << t.err;
  std::istringstream trace(testing::read_file(dir / "run" / "losses.tsv"));
  std::string line;
  std::size_t rows = 0;
  double last = 0.0;
  std::getline(trace, line);
  EXPECT_EQ(line, "epoch\tloss");
  while (std::getline(trace, line)) {
    ++rows;
    last = std::stod(line.substr(line.find('\t') + 1));
  }
  EXPECT_EQ(rows, 500u);
  EXPECT_LT(last, 0.1);

  const CliRun g = run_cli(dir, "generate --model " + q(dir / "run") + " --corpus " + q(corpus) + " --out " +
                                 q(dir / "preds.jsonl"));
  ASSERT_EQ(g.code, 0) << g.err;
  EXPECT_EQ(read_jsonl(dir / "preds.jsonl").size(), 8u);
  const CliRun e = run_cli(dir, "evaluate --preds " + q(dir / "preds.jsonl") + " --refs " +
                                 q(kData + "/sample/refs.jsonl") + " --out " + q(dir / "metrics.json"));
  ASSERT_EQ(e.code, 0) << e.err;
  const json m = json::parse(testing::read_file(dir / "metrics.json"));
  EXPECT_EQ(m["bleu_4"], 1.0);
  EXPECT_EQ(m["rouge_l"], 1.0);
  EXPECT_NE(e.out.find("BLEU-4"), std::string::npos);

  const CliRun short_gen = run_cli(dir, "generate --model " + q(dir / "run" / "model.ckpt") + " --corpus " + q(corpus) +
                                         " --out " + q(dir / "short.jsonl") + " --max-length 2");
  ASSERT_EQ(short_gen.code, 0) << short_gen.err;
  for (const auto& p : read_jsonl(dir / "short.jsonl")) EXPECT_LE(tokenize(p["text"].get<std::string>()).size(), 2u);
}

TEST(CliTrain, DivergenceExitsThree) {
  const auto dir = testing::scratch_dir();
  const auto cfg_path = write_config(dir, {{"train", {{"epochs", 3}, {"learning_rate", 1e308}}}});
  const CliRun r = run_cli(dir, "train --config " + q(cfg_path) + " --corpus " + q(kData + "/sample/corpus.jsonl") +
                                 " --out " + q(dir / "run"));
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("diverged"), std::string::npos) << r.err;
}

TEST(CliGenerate, MissingCheckpointExitsTwo) {
  const auto dir = testing::scratch_dir();
  const CliRun r = run_cli(dir, "generate --model " + q(dir / "nothing") + " --corpus " +
                                 q(kData + "/sample/corpus.jsonl") + " --out " + q(dir / "p.jsonl"));
  EXPECT_EQ(r.code, 2);
}

TEST(CliEvaluate, MismatchedIdsExitTwo) {
  const auto dir = testing::scratch_dir();
  testing::write_file(dir / "p.jsonl", "{\"id\": \"r1\", \"text\": \"x\"}\n");
  const CliRun r = run_cli(dir, "evaluate --preds " + q(dir / "p.jsonl") + " --refs " + q(kData + "/sample/refs.jsonl"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("r8"), std::string::npos) << r.err;
}

// ---------------------------------------------------------------- gradcheck

TEST(CliGradcheck, ShippedConfigExitsZero) {
  const auto dir = testing::scratch_dir();
  const CliRun r = run_cli(dir, std::string("gradcheck --config ") + DMDK_CONFIG_DIR "/gradcheck.json");
  ASSERT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find(", 0 failed"), std::string::npos) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST(CliGradcheck, TightToleranceExitsThree) {
  const auto dir = testing::scratch_dir();
  json cfg = json::parse(testing::read_file(DMDK_CONFIG_DIR "/gradcheck.json"));
  cfg["paths"]["base_graph"] = kData + "/gradcheck_graph.json";
  cfg["gradcheck"]["tolerance"] = 1e-30;
  testing::write_file(dir / "g.json", cfg.dump());
  const CliRun r = run_cli(dir, "gradcheck --config " + q(dir / "g.json"));
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("FAIL"), std::string::npos);
}

}  // namespace
}  // namespace dmdk
