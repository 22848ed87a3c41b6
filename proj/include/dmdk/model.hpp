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

// The report generator.
//
// Per sample the encoder produces three memories of shape N x d:
//
//   X  = fuse_views(project(raw views))
//   W' = MHA(X, Embed(topic labels))          label branch
//   M' = MHA(X, GCN(sample graph))            graph branch
//   X' = MHA(X, l1 X + l2 W' + l3 M')         knowledge fusion
//
// Disabled branches are replaced by X itself. Each decoder layer runs masked
// self-attention, then cross-attention over X', W' and M' in that order,
// then the feed-forward block; every sublayer has a residual connection and
// a layer norm. A linear head and softmax give next-token probabilities.

#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dmdk/attention.hpp"
#include "dmdk/features.hpp"
#include "dmdk/graph.hpp"
#include "dmdk/knowledge.hpp"
#include "dmdk/optim.hpp"
#include "dmdk/text.hpp"

namespace dmdk {

enum class AblationMode { kBase, kDke, kSke, kFull };
enum class NormPlacement { kPost, kPre };

inline bool uses_labels(AblationMode m) { return m == AblationMode::kDke || m == AblationMode::kFull; }
inline bool uses_graph(AblationMode m) { return m == AblationMode::kSke || m == AblationMode::kFull; }

// Mixture weights of the knowledge fusion, normalized to sum to one.
class FusionWeights {
 public:
  static FusionWeights normalized(std::array<double, 3> raw) {
    for (double v : raw) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw ValidationError("fusion weights must be finite and strictly positive");
      }
    }
    // Snapping the ratios to a 2^-32 grid absorbs the last-bit noise of
    // rescaled inputs, so (c l1, c l2, c l3) yields the same weights as
    // (l1, l2, l3). The last weight takes the exact remainder; every weight
    // is a multiple of 2^-32 and the sum is exactly one.
    constexpr double kGrid = 4294967296.0;
    const double total = raw[0] + raw[1] + raw[2];
    FusionWeights w;
    w.values_[0] = std::nearbyint(raw[0] / total * kGrid) / kGrid;
    w.values_[1] = std::nearbyint(raw[1] / total * kGrid) / kGrid;
    w.values_[2] = 1.0 - w.values_[0] - w.values_[1];
    for (double v : w.values_) {
      if (!(v > 0.0)) throw ValidationError("fusion weight ratio is below 2^-32 resolution");
    }
    return w;
  }

  double visual() const { return values_[0]; }
  double labels() const { return values_[1]; }
  double graph() const { return values_[2]; }
  const std::array<double, 3>& values() const { return values_; }

 private:
  std::array<double, 3> values_{1.0 / 3, 1.0 / 3, 1.0 / 3};
};

// X' = MHA(X, l1 X + l2 W' + l3 M').
inline Var fuse_knowledge(const Var& visual, const Var& labels, const Var& graph,
                          const FusionWeights& weights, const MhaParams& params) {
  if (!visual->value.same_shape(labels->value) || !visual->value.same_shape(graph->value)) {
    throw ShapeError("fuse_knowledge: X " + visual->value.shape_string() + ", W' " +
                     labels->value.shape_string() + ", M' " + graph->value.shape_string() +
                     " must share one shape");
  }
  Var mix = add(add(scale(visual, weights.visual()), scale(labels, weights.labels())),
                scale(graph, weights.graph()));
  return multi_head_attention(visual, mix, params);
}

struct ModelConfig {
  std::size_t dim = 512;
  std::size_t heads = 8;
  std::size_t decoder_layers = 3;
  std::size_t gcn_layers = 2;
  std::size_t ffn_multiplier = 4;
  std::size_t feature_dim = 0;  // raw feature width; 0 until known
  PositionalKind positional = PositionalKind::kSinusoidal;
  std::size_t max_positions = 512;
  NormPlacement norm = NormPlacement::kPost;
  double layer_norm_eps = 1e-5;
  ViewFusion view_fusion = ViewFusion::kConcat;
  AblationMode mode = AblationMode::kFull;
  std::array<double, 3> fusion_lambda{1.0, 1.0, 1.0};
};

struct DecoderLayer {
  MhaParams self_attn;
  MhaParams visual_attn;  // over X'
  MhaParams label_attn;   // over W'
  MhaParams graph_attn;   // over M'
  FfnParams ffn;
  std::array<LayerNormParams, 5> norms;
};

// Everything the model needs beyond its weights.
struct ModelContext {
  Vocabulary vocab;
  NodeVocabulary nodes;
  KnowledgeGraph base_graph;
  std::vector<std::string> fallback_labels;
  Lexicon lexicon;
};

struct Model {
  ModelConfig config;
  ModelContext context;
  FusionWeights fusion;

  ProjectionParams projection;
  EmbeddingTable embedding;
  MhaParams dke_attn;
  GcnParams gcn;
  MhaParams ske_attn;
  MhaParams fusion_attn;
  std::vector<DecoderLayer> layers;
  LayerNormParams final_norm;  // pre-norm placement only
  Var head_weight;             // d x vocab
  Var head_bias;               // 1 x vocab

  static Model init(const ModelConfig& cfg, ModelContext ctx, std::uint64_t seed) {
    if (cfg.feature_dim == 0) throw ValidationError("model feature_dim is not set");
    if (cfg.dim == 0 || cfg.heads == 0 || cfg.dim % cfg.heads != 0) {
      throw ValidationError("model width " + std::to_string(cfg.dim) +
                            " must be a positive multiple of heads " + std::to_string(cfg.heads));
    }
    if (cfg.decoder_layers < 1) throw ValidationError("decoder needs at least one layer");
    if (ctx.fallback_labels.empty()) ctx.fallback_labels = ctx.base_graph.non_root_names();
    if (ctx.fallback_labels.empty()) throw ValidationError("no fallback topic labels available");
    Rng rng(seed);
    Model m;
    m.config = cfg;
    m.fusion = FusionWeights::normalized(cfg.fusion_lambda);
    const std::size_t d = cfg.dim;
    m.projection = ProjectionParams::init(cfg.feature_dim, d, rng);
    m.embedding = EmbeddingTable::init(ctx.vocab.size(), d, cfg.positional, cfg.max_positions, rng);
    m.dke_attn = MhaParams::init(d, cfg.heads, rng);
    m.gcn = GcnParams::init(ctx.nodes, d, cfg.gcn_layers, rng);
    m.ske_attn = MhaParams::init(d, cfg.heads, rng);
    m.fusion_attn = MhaParams::init(d, cfg.heads, rng);
    for (std::size_t l = 0; l < cfg.decoder_layers; ++l) {
      DecoderLayer layer{MhaParams::init(d, cfg.heads, rng), MhaParams::init(d, cfg.heads, rng),
                         MhaParams::init(d, cfg.heads, rng), MhaParams::init(d, cfg.heads, rng),
                         FfnParams::init(d, cfg.ffn_multiplier, rng), {}};
      for (auto& n : layer.norms) n = LayerNormParams::init(d);
      m.layers.push_back(std::move(layer));
    }
    m.final_norm = LayerNormParams::init(d);
    m.head_weight = parameter(xavier_uniform(d, ctx.vocab.size(), rng));
    m.head_bias = parameter(Matrix(1, ctx.vocab.size()));
    m.context = std::move(ctx);
    return m;
  }

  std::vector<std::pair<std::string, Var>> named_parameters() const {
    std::vector<std::pair<std::string, Var>> out;
    out.emplace_back("projection.weight", projection.weight);
    out.emplace_back("projection.bias", projection.bias);
    out.emplace_back("embedding.tokens", embedding.tokens);
    if (embedding.positional == PositionalKind::kLearned) {
      out.emplace_back("embedding.positions", embedding.learned_positions);
    }
    dke_attn.append_parameters("dke", out);
    out.emplace_back("gcn.embeddings", gcn.embeddings);
    for (std::size_t l = 0; l < gcn.layers.size(); ++l) {
      out.emplace_back("gcn.layer" + std::to_string(l), gcn.layers[l]);
    }
    ske_attn.append_parameters("ske", out);
    fusion_attn.append_parameters("fusion", out);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::string p = "decoder" + std::to_string(l);
      const auto& L = layers[l];
      L.self_attn.append_parameters(p + ".self", out);
      L.visual_attn.append_parameters(p + ".visual", out);
      L.label_attn.append_parameters(p + ".labels", out);
      L.graph_attn.append_parameters(p + ".graph", out);
      L.ffn.append_parameters(p + ".ffn", out);
      for (std::size_t k = 0; k < L.norms.size(); ++k) {
        out.emplace_back(p + ".norm" + std::to_string(k) + ".gain", L.norms[k].gain);
        out.emplace_back(p + ".norm" + std::to_string(k) + ".bias", L.norms[k].bias);
      }
    }
    if (config.norm == NormPlacement::kPre) {
      out.emplace_back("final_norm.gain", final_norm.gain);
      out.emplace_back("final_norm.bias", final_norm.bias);
    }
    out.emplace_back("head.weight", head_weight);
    out.emplace_back("head.bias", head_bias);
    return out;
  }

  std::vector<Var> parameters() const {
    std::vector<Var> out;
    for (auto& [n, v] : named_parameters()) out.push_back(v);
    return out;
  }
};

// A corpus record with everything resolved: feature matrices loaded,
// entities tagged, topic labels and sample graph built, report encoded.
struct Sample {
  std::string id;
  std::vector<Matrix> views;
  EntitySequence entities;
  DiseaseTopicLabels labels;
  RelationTriples triples;
  KnowledgeGraph graph;
  std::vector<std::size_t> report;  // token ids, no BOS/EOS
};

// Entities come from the record when annotated, otherwise from the lexicon
// tagger over the report (empty when there is no report).
inline EntitySequence resolve_entities(const CorpusRecord& r, const Lexicon& lexicon) {
  if (r.entities) return *r.entities;
  if (r.report.empty() || lexicon.empty()) return {};
  const Tokens t = tokenize(r.report);
  return lexicon_tag(t, lexicon);
}

inline Sample make_sample(std::string id, std::vector<Matrix> views, EntitySequence entities,
                          const Tokens& report, const ModelContext& ctx) {
  Sample s;
  s.id = std::move(id);
  s.views = std::move(views);
  s.entities = std::move(entities);
  s.labels = extract_topic_labels(s.entities, ctx.fallback_labels);
  s.triples = extract_relations(s.entities);
  s.graph = build_specific_graph(ctx.base_graph, s.labels, s.triples);
  s.report = ctx.vocab.encode(report);
  return s;
}

inline Sample prepare_sample(const CorpusRecord& r, const ModelContext& ctx) {
  std::vector<Matrix> views;
  for (std::size_t i = 0; i < r.features.size(); ++i) views.push_back(load_features(r.feature_path(i)));
  return make_sample(r.id, std::move(views), resolve_entities(r, ctx.lexicon), tokenize(r.report), ctx);
}

// Vocabulary from the training reports; node names from the base graph
// followed by every entity text seen in training.
inline ModelContext build_context(std::span<const CorpusRecord> records, KnowledgeGraph base_graph,
                                  Lexicon lexicon, std::size_t min_freq,
                                  std::vector<std::string> fallback_labels = {}) {
  ModelContext ctx;
  std::vector<Tokens> reports;
  for (const auto& r : records) reports.push_back(tokenize(r.report));
  ctx.vocab = build_vocab(reports, min_freq);
  for (const auto& n : base_graph.nodes()) ctx.nodes.add(n.name);
  for (const auto& r : records)
    for (const auto& e : resolve_entities(r, lexicon)) ctx.nodes.add(e.text);
  ctx.fallback_labels = fallback_labels.empty() ? base_graph.non_root_names() : std::move(fallback_labels);
  ctx.base_graph = std::move(base_graph);
  ctx.lexicon = std::move(lexicon);
  return ctx;
}

struct Memory {
  Var visual;  // X'
  Var labels;  // W'
  Var graph;   // M'
};

inline Var encode_visual(const Model& m, const Sample& s) {
  if (s.views.empty() || s.views.size() > 2) {
    throw ValidationError("sample '" + s.id + "' needs one or two feature views");
  }
  Var a = project_features(constant(s.views[0]), m.projection);
  if (s.views.size() == 1) return a;
  Var b = project_features(constant(s.views[1]), m.projection);
  return fuse_views(a, &b, m.config.view_fusion);
}

inline Memory encode_sample(const Model& m, const Sample& s) {
  Var x = encode_visual(m, s);
  Var w = x;
  Var g = x;
  if (uses_labels(m.config.mode)) {
    w = enhance_visual(x, encode_labels(s.labels, m.embedding, m.context.vocab), m.dke_attn);
  }
  if (uses_graph(m.config.mode)) {
    g = graph_attend(x, gcn_encode(s.graph, m.gcn), m.ske_attn);
  }
  return {fuse_knowledge(x, w, g, m.fusion, m.fusion_attn), w, g};
}

namespace detail {

inline Var sublayer(const Var& y, const LayerNormParams& norm, const ModelConfig& cfg,
                    const std::function<Var(const Var&)>& body) {
  if (cfg.norm == NormPlacement::kPost) return layer_norm(add(y, body(y)), norm, cfg.layer_norm_eps);
  return add(y, body(layer_norm(y, norm, cfg.layer_norm_eps)));
}

}  // namespace detail

// Logits for every position of `inputs` (len x vocab).
inline Var decoder_logits(const Model& m, const Memory& mem, std::span<const std::size_t> inputs) {
  if (inputs.empty()) throw ValidationError("decoder input must not be empty");
  const ModelConfig& cfg = m.config;
  Var y = embed_tokens(inputs, m.embedding);
  for (const auto& L : m.layers) {
    y = detail::sublayer(y, L.norms[0], cfg,
                         [&](const Var& h) { return multi_head_attention(h, h, L.self_attn, true); });
    y = detail::sublayer(y, L.norms[1], cfg,
                         [&](const Var& h) { return multi_head_attention(h, mem.visual, L.visual_attn); });
    y = detail::sublayer(y, L.norms[2], cfg,
                         [&](const Var& h) { return multi_head_attention(h, mem.labels, L.label_attn); });
    y = detail::sublayer(y, L.norms[3], cfg,
                         [&](const Var& h) { return multi_head_attention(h, mem.graph, L.graph_attn); });
    y = detail::sublayer(y, L.norms[4], cfg, [&](const Var& h) { return feed_forward(h, L.ffn); });
  }
  if (cfg.norm == NormPlacement::kPre) y = layer_norm(y, m.final_norm, cfg.layer_norm_eps);
  return add_row(matmul(y, m.head_weight), m.head_bias);
}

// Next-token distribution after `prefix` (which starts with BOS): 1 x vocab.
inline Matrix decode_step(const Model& m, const Memory& mem, std::span<const std::size_t> prefix) {
  if (prefix.empty()) throw ValidationError("decode_step: empty prefix");
  for (std::size_t t : prefix) {
    if (t >= m.context.vocab.size()) {
      throw ValidationError("decode_step: token " + std::to_string(t) + " outside vocabulary");
    }
  }
  const Matrix logits = decoder_logits(m, mem, prefix)->value;
  Matrix last(1, logits.cols());
  auto src = logits.row_span(logits.rows() - 1);
  std::copy(src.begin(), src.end(), last.row_span(0).begin());
  return kernel::softmax_rows(last);
}

// Argmax decoding from BOS until EOS or `max_length` tokens; ties go to the
// lowest index. The result holds neither BOS nor EOS.
inline std::vector<std::size_t> generate_greedy(const Model& m, const Memory& mem, std::size_t max_length) {
  std::vector<std::size_t> seq{Vocabulary::kBos};
  while (seq.size() - 1 < max_length) {
    const Matrix p = decode_step(m, mem, seq);
    std::size_t best = 0;
    for (std::size_t j = 1; j < p.cols(); ++j)
      if (p(0, j) > p(0, best)) best = j;
    if (best == Vocabulary::kEos) break;
    seq.push_back(best);
  }
  return {seq.begin() + 1, seq.end()};
}

inline Tokens generate_report(const Model& m, const Sample& s, std::size_t max_length) {
  const Memory mem = encode_sample(m, s);
  const auto ids = generate_greedy(m, mem, max_length);
  return m.context.vocab.decode(ids);
}

// Cross-entropy of one sample: inputs BOS + report, targets report + EOS.
inline Var sample_loss(const Model& m, const Sample& s) {
  std::vector<std::size_t> in{Vocabulary::kBos};
  in.insert(in.end(), s.report.begin(), s.report.end());
  std::vector<std::size_t> target(s.report.begin(), s.report.end());
  target.push_back(Vocabulary::kEos);
  return cross_entropy(decoder_logits(m, encode_sample(m, s), in), target);
}

// Mean over the batch of each sample's mean per-token cross-entropy.
inline Var teacher_forcing_loss(const Model& m, std::span<const Sample> batch) {
  if (batch.empty()) throw ValidationError("teacher_forcing_loss: empty batch");
  std::vector<Var> losses;
  losses.reserve(batch.size());
  for (const auto& s : batch) losses.push_back(sample_loss(m, s));
  return mean_of(losses);
}

struct TrainOptions {
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  bool shuffle = true;
  std::uint64_t seed = 42;
  AdamConfig adam;
};

struct TrainResult {
  std::vector<double> epoch_losses;  // mean sample loss per epoch
};

inline TrainResult train(Model& m, std::span<const Sample> samples, const TrainOptions& opts,
                         const std::function<void(std::size_t, double)>& on_epoch = {}) {
  if (samples.empty()) throw ValidationError("train: empty corpus");
  if (opts.batch_size == 0) throw ValidationError("train: batch size must be positive");
  const std::vector<Var> params = m.parameters();
  Adam adam(opts.adam);
  Rng rng(opts.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  TrainResult result;
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    if (opts.shuffle) rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
      const std::size_t end = std::min(order.size(), start + opts.batch_size);
      std::vector<Var> losses;
      for (std::size_t i = start; i < end; ++i) losses.push_back(sample_loss(m, samples[order[i]]));
      Var loss = mean_of(losses);
      const double value = loss->value(0, 0);
      if (!std::isfinite(value)) {
        throw DivergenceError("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                              ", batch starting at " + std::to_string(start));
      }
      zero_grad(params);
      backward(loss);
      adam.step(params);
      total += value * static_cast<double>(end - start);
    }
    const double epoch_loss = total / static_cast<double>(samples.size());
    result.epoch_losses.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  return result;
}

struct GradCheckEntry {
  std::string name;
  std::size_t size = 0;
  double relative_error = 0.0;
  double max_abs_error = 0.0;
};

// Compares reverse-mode gradients of the teacher-forcing loss with central
// differences for every parameter.
inline std::vector<GradCheckEntry> gradient_check(Model& m, std::span<const Sample> samples, double step) {
  const auto named = m.named_parameters();
  std::vector<Var> params;
  for (auto& [n, v] : named) params.push_back(v);
  zero_grad(params);
  backward(teacher_forcing_loss(m, samples));
  std::vector<Matrix> analytic;
  for (const auto& p : params) analytic.push_back(gradient_of(p));
  zero_grad(params);
  auto f = [&] { return teacher_forcing_loss(m, samples)->value(0, 0); };
  std::vector<GradCheckEntry> out;
  for (std::size_t k = 0; k < named.size(); ++k) {
    const Matrix numeric = finite_diff_grad(f, named[k].second->value, step);
    GradCheckEntry e;
    e.name = named[k].first;
    e.size = numeric.size();
    e.relative_error = relative_error(analytic[k], numeric);
    e.max_abs_error = max_abs_diff(analytic[k], numeric);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace dmdk
