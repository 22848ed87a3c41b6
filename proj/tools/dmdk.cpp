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

// dmdk: tag, build-graph, train, generate, evaluate, gradcheck, config.
//
// Exit codes: 0 success, 1 usage, 2 invalid input, 3 runtime failure
// (divergence, failed gradient check).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dmdk/dmdk.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitRuntime = 3;

struct Loaded {
  dmdk::RunConfig config;
  fs::path dir;  // relative config paths resolve against this

  fs::path resolve(const std::string& p) const {
    fs::path q(p);
    return q.is_absolute() ? q : dir / q;
  }
};

Loaded load_run_config(const std::string& path, std::optional<std::uint64_t> seed) {
  Loaded l{dmdk::load_config(path), fs::path(path).parent_path()};
  if (seed) l.config.train.seed = *seed;
  return l;
}

dmdk::KnowledgeGraph base_graph_of(const Loaded& l) {
  if (l.config.paths.base_graph.empty()) throw dmdk::ValidationError("config.paths.base_graph is required");
  return dmdk::load_base_graph(l.resolve(l.config.paths.base_graph));
}

dmdk::Lexicon lexicon_of(const Loaded& l) {
  if (l.config.paths.lexicon.empty()) return {};
  return dmdk::load_lexicon(l.resolve(l.config.paths.lexicon));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw dmdk::IoError("cannot write " + path.string());
  out << text;
  if (!out) throw dmdk::IoError("failed writing " + path.string());
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<dmdk::Sample> prepare_all(const std::vector<dmdk::CorpusRecord>& records,
                                      const dmdk::ModelContext& ctx, std::size_t feature_dim) {
  std::vector<dmdk::Sample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    dmdk::Sample s = dmdk::prepare_sample(r, ctx);
    for (const auto& v : s.views) {
      if (v.cols() != feature_dim) {
        throw dmdk::ValidationError("record '" + r.id + "' has feature width " + std::to_string(v.cols()) +
                                    ", model expects " + std::to_string(feature_dim));
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

// Raw feature width, taken from the first record when the config leaves it 0.
std::size_t resolve_feature_dim(const dmdk::ModelConfig& cfg, const std::vector<dmdk::CorpusRecord>& records) {
  if (cfg.feature_dim != 0) return cfg.feature_dim;
  return dmdk::load_features(records.front().feature_path(0)).cols();
}

int cmd_tag(const std::string& lexicon_path, const std::string& in, const std::string& out) {
  const dmdk::Lexicon lex = dmdk::load_lexicon(lexicon_path);
  auto records = dmdk::load_corpus(in, dmdk::CorpusUse::kInference);
  const fs::path in_dir = fs::absolute(fs::path(in)).parent_path();
  const fs::path out_dir = fs::absolute(fs::path(out)).parent_path();
  std::size_t tagged = 0;
  for (auto& r : records) {
    if (!r.entities) {
      r.entities = dmdk::lexicon_tag(dmdk::tokenize(r.report), lex);
      ++tagged;
    }
    // Keep relative feature paths valid from the output location.
    if (in_dir != out_dir) {
      for (std::size_t i = 0; i < r.features.size(); ++i) {
        if (fs::path(r.features[i]).is_absolute()) continue;
        r.features[i] = fs::relative(fs::absolute(r.feature_path(i)), out_dir).generic_string();
      }
    }
  }
  dmdk::write_corpus(out, records);
  dmdk::log::info("tagged " + std::to_string(tagged) + " of " + std::to_string(records.size()) + " records");
  return 0;
}

int cmd_build_graph(const std::string& base_path, const std::string& in, const std::string& out_dir,
                    const std::string& format) {
  const auto base = dmdk::load_base_graph(base_path);
  const auto records = dmdk::load_corpus(in, dmdk::CorpusUse::kInference);
  const auto fmt = format == "json" ? dmdk::GraphFormat::kJson : dmdk::GraphFormat::kDot;
  const auto fallback = base.non_root_names();
  fs::create_directories(out_dir);
  for (const auto& r : records) {
    if (!r.entities) throw dmdk::ValidationError("record '" + r.id + "' is not tagged; run `dmdk tag` first");
    const auto labels = dmdk::extract_topic_labels(*r.entities, fallback);
    const auto graph = dmdk::build_specific_graph(base, labels, dmdk::extract_relations(*r.entities));
    write_text(fs::path(out_dir) / (r.id + "." + format), dmdk::export_graph(graph, fmt));
  }
  dmdk::log::info("wrote " + std::to_string(records.size()) + " graphs to " + out_dir);
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& corpus, const std::string& out_dir,
              std::optional<std::uint64_t> seed) {
  Loaded l = load_run_config(config_path, seed);
  auto& cfg = l.config;
  const auto records = dmdk::load_corpus(corpus, dmdk::CorpusUse::kTraining);
  if (records.empty()) throw dmdk::ValidationError(corpus + ": corpus is empty");
  cfg.model.feature_dim = resolve_feature_dim(cfg.model, records);
  auto ctx = dmdk::build_context(records, base_graph_of(l), lexicon_of(l), cfg.train.min_freq, cfg.fallback_labels);
  dmdk::Model model = dmdk::Model::init(cfg.model, std::move(ctx), cfg.train.seed);
  const auto samples = prepare_all(records, model.context, cfg.model.feature_dim);

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  const std::string effective = dmdk::config_to_json(cfg).dump(2) + "\n";
  write_text(dir / "effective_config.json", effective);
  dmdk::log::info("effective config:\n" + effective);
  dmdk::log::info("vocabulary " + std::to_string(model.context.vocab.size()) + ", graph nodes " +
                  std::to_string(model.context.nodes.size()) + ", samples " + std::to_string(samples.size()));

  std::ofstream trace(dir / "losses.tsv", std::ios::binary);
  if (!trace) throw dmdk::IoError("cannot write " + (dir / "losses.tsv").string());
  trace << "epoch\tloss\n";
  dmdk::train(model, samples, cfg.train_options(), [&](std::size_t epoch, double loss) {
    trace << epoch + 1 << "\t" << fmt_double(loss) << "\n" << std::flush;
    dmdk::log::info("epoch " + std::to_string(epoch + 1) + " loss " + fmt_double(loss));
  });
  dmdk::save_checkpoint(dir / "model.ckpt", model, cfg);
  return 0;
}

int cmd_generate(const std::string& model_path, const std::string& corpus, const std::string& out,
                 std::optional<std::size_t> max_length) {
  fs::path ckpt(model_path);
  if (fs::is_directory(ckpt)) ckpt /= "model.ckpt";
  const auto loaded = dmdk::load_checkpoint(ckpt);
  const auto& model = loaded.model;
  const auto records = dmdk::load_corpus(corpus, dmdk::CorpusUse::kInference);
  const auto samples = prepare_all(records, model.context, model.config.feature_dim);
  const std::size_t limit = max_length.value_or(loaded.config.decode.max_length);
  std::string text;
  for (const auto& s : samples) {
    const auto tokens = dmdk::generate_report(model, s, limit);
    text += nlohmann::json{{"id", s.id}, {"text", dmdk::join(tokens)}}.dump() + "\n";
  }
  write_text(out, text);
  return 0;
}

int cmd_evaluate(const std::string& preds, const std::string& refs, const std::string& out, bool smooth) {
  dmdk::EvaluationOptions opts;
  opts.smooth_sentence_bleu = smooth;
  const auto report = dmdk::evaluate_corpus(preds, refs, opts);
  if (!out.empty()) write_text(out, dmdk::report_to_json(report).dump(2) + "\n");
  std::cout << dmdk::report_table(report);
  return 0;
}

int cmd_gradcheck(const std::string& config_path, const std::string& corpus, std::optional<std::uint64_t> seed,
                  std::size_t vocab, std::size_t count) {
  Loaded l = load_run_config(config_path, seed);
  auto& cfg = l.config;
  dmdk::ModelContext ctx;
  std::vector<dmdk::Sample> samples;
  std::optional<dmdk::Model> model;
  if (!corpus.empty()) {
    const auto records = dmdk::load_corpus(corpus, dmdk::CorpusUse::kTraining);
    if (records.empty()) throw dmdk::ValidationError(corpus + ": corpus is empty");
    cfg.model.feature_dim = resolve_feature_dim(cfg.model, records);
    model = dmdk::Model::init(cfg.model,
                              dmdk::build_context(records, base_graph_of(l), lexicon_of(l), cfg.train.min_freq,
                                                  cfg.fallback_labels),
                              cfg.train.seed);
    samples = prepare_all(records, model->context, cfg.model.feature_dim);
  } else {
    if (vocab <= dmdk::Vocabulary::kSpecials.size()) throw dmdk::ValidationError("--vocab must exceed 4");
    if (cfg.model.feature_dim == 0) cfg.model.feature_dim = 6;
    auto problem = dmdk::make_synthetic_problem(base_graph_of(l), cfg.model.feature_dim,
                                                vocab - dmdk::Vocabulary::kSpecials.size(), count, cfg.train.seed);
    model = dmdk::Model::init(cfg.model, std::move(problem.context), cfg.train.seed);
    samples = std::move(problem.samples);
  }
  const auto entries = dmdk::gradient_check(*model, samples, cfg.gradcheck.step);
  double worst = 0.0;
  std::size_t failed = 0;
  for (const auto& e : entries) {
    const bool ok = e.relative_error < cfg.gradcheck.tolerance;
    failed += ok ? 0 : 1;
    worst = std::max(worst, e.relative_error);
    std::printf("%-4s %-32s %6zu  rel %.3e  abs %.3e\n", ok ? "ok" : "FAIL", e.name.c_str(), e.size,
                e.relative_error, e.max_abs_error);
  }
  std::printf("%zu parameters, %zu failed, worst relative error %.3e (tolerance %.1e)\n", entries.size(), failed,
              worst, cfg.gradcheck.tolerance);
  return failed == 0 ? 0 : kExitRuntime;
}

int cmd_config(const std::string& config_path, std::optional<std::uint64_t> seed) {
  std::cout << dmdk::config_to_json(load_run_config(config_path, seed).config).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-enhanced radiology report generation"};
  app.require_subcommand(1);

  std::string lexicon, in, out, base, out_dir, format = "dot", config, corpus, model, preds, refs;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_length;
  std::size_t vocab = 16, count = 2;
  bool smooth = false;

  auto* tag = app.add_subcommand("tag", "Fill in entities for untagged records with the lexicon tagger");
  tag->add_option("--lexicon", lexicon, "Lexicon TSV")->required();
  tag->add_option("--in", in, "Input corpus JSONL")->required();
  tag->add_option("--out", out, "Output corpus JSONL")->required();

  auto* graph = app.add_subcommand("build-graph", "Write the sample-specific graph of every record");
  graph->add_option("--base", base, "Base graph JSON")->required();
  graph->add_option("--in", in, "Tagged corpus JSONL")->required();
  graph->add_option("--out-dir", out_dir, "Output directory")->required();
  graph->add_option("--format", format, "dot or json")->check(CLI::IsMember({"dot", "json"}));

  auto* train = app.add_subcommand("train", "Train a model; writes model.ckpt, losses.tsv, effective_config.json");
  train->add_option("--config", config, "Run config JSON")->required();
  train->add_option("--corpus", corpus, "Training corpus JSONL")->required();
  train->add_option("--out", out_dir, "Output directory")->required();
  train->add_option("--seed", seed, "Override train.seed");

  auto* gen = app.add_subcommand("generate", "Greedy-decode a report for every record");
  gen->add_option("--model", model, "Checkpoint file or training output directory")->required();
  gen->add_option("--corpus", corpus, "Corpus JSONL")->required();
  gen->add_option("--out", out, "Predictions JSONL")->required();
  gen->add_option("--max-length", max_length, "Override decode.max_length")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("evaluate", "Score predictions against references");
  eval->add_option("--preds", preds, "Predictions JSONL")->required();
  eval->add_option("--refs", refs, "References JSONL")->required();
  eval->add_option("--out", out, "Metric report JSON");
  eval->add_flag("--smooth", smooth, "Add-one smoothing for per-sample BLEU");

  auto* grad = app.add_subcommand("gradcheck", "Compare reverse-mode gradients with finite differences");
  grad->add_option("--config", config, "Run config JSON")->required();
  grad->add_option("--corpus", corpus, "Corpus JSONL; synthetic data when omitted");
  grad->add_option("--seed", seed, "Override train.seed");
  grad->add_option("--vocab", vocab, "Synthetic vocabulary size, specials included");
  grad->add_option("--samples", count, "Synthetic sample count")->check(CLI::PositiveNumber);

  auto* show = app.add_subcommand("config", "Print the effective config");
  show->add_option("--config", config, "Run config JSON")->required();
  show->add_option("--seed", seed, "Override train.seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*tag) return cmd_tag(lexicon, in, out);
    if (*graph) return cmd_build_graph(base, in, out_dir, format);
    if (*train) return cmd_train(config, corpus, out_dir, seed);
    if (*gen) return cmd_generate(model, corpus, out, max_length);
    if (*eval) return cmd_evaluate(preds, refs, out, smooth);
    if (*grad) return cmd_gradcheck(config, corpus, seed, vocab, count);
    if (*show) return cmd_config(config, seed);
  } catch (const dmdk::ValidationError& e) {
    dmdk::log::error(e.what());
    return kExitInvalid;
  } catch (const dmdk::IoError& e) {
    dmdk::log::error(e.what());
    return kExitInvalid;
  } catch (const std::exception& e) {
    dmdk::log::error(e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
