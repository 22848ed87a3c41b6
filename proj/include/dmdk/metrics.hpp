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

// Caption metrics: corpus BLEU-1..N with clipped n-gram precision, ROUGE-L
// on the longest common subsequence, and CIDEr with TF-IDF n-gram vectors.
// The ground-truth sentences are the references.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "dmdk/error.hpp"
#include "dmdk/text.hpp"
#include "json.hpp"

namespace dmdk {

using NGram = std::vector<std::string>;
using NGramCounts = std::map<NGram, std::size_t>;
using ReferenceSet = std::vector<Tokens>;

inline NGramCounts ngram_counts(std::span<const std::string> tokens, std::size_t n) {
  if (n < 1) throw ValidationError("n-gram order must be at least 1");
  NGramCounts out;
  if (tokens.size() < n) return out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) ++out[NGram(tokens.begin() + i, tokens.begin() + i + n)];
  return out;
}

struct BleuOptions {
  std::size_t max_order = 4;
  // Add-one smoothing of P_n for n >= 2; off for corpus scores.
  bool smooth = false;
};

// Corpus BLEU-1..max_order. Entry k-1 is BLEU-k.
inline std::vector<double> bleu(std::span<const Tokens> candidates,
                                std::span<const ReferenceSet> references,
                                BleuOptions opts = {}) {
  if (candidates.size() != references.size()) {
    throw ValidationError("bleu: " + std::to_string(candidates.size()) + " candidates but " +
                          std::to_string(references.size()) + " reference sets");
  }
  if (candidates.empty()) throw ValidationError("bleu: empty corpus");
  if (opts.max_order < 1) throw ValidationError("bleu: order must be at least 1");
  const std::size_t N = opts.max_order;
  std::vector<double> matched(N, 0.0), total(N, 0.0);
  double c = 0.0, r = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Tokens& cand = candidates[i];
    const ReferenceSet& refs = references[i];
    if (refs.empty()) throw ValidationError("bleu: sample " + std::to_string(i) + " has no reference");
    c += static_cast<double>(cand.size());
    std::size_t best = refs.front().size();
    for (const auto& ref : refs) {
      const auto dist = [&](std::size_t len) {
        return len > cand.size() ? len - cand.size() : cand.size() - len;
      };
      if (dist(ref.size()) < dist(best) || (dist(ref.size()) == dist(best) && ref.size() < best)) {
        best = ref.size();
      }
    }
    r += static_cast<double>(best);
    for (std::size_t n = 1; n <= N; ++n) {
      const NGramCounts cc = ngram_counts(cand, n);
      NGramCounts max_ref;
      for (const auto& ref : refs)
        for (const auto& [g, k] : ngram_counts(ref, n)) max_ref[g] = std::max(max_ref[g], k);
      for (const auto& [g, k] : cc) {
        auto it = max_ref.find(g);
        matched[n - 1] += static_cast<double>(std::min(k, it == max_ref.end() ? 0 : it->second));
        total[n - 1] += static_cast<double>(k);
      }
    }
  }
  std::vector<double> out(N, 0.0);
  if (c == 0.0) return out;
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t k = 1; k <= N; ++k) {
    double m = matched[k - 1], t = total[k - 1];
    if (opts.smooth && k >= 2) {
      m += 1.0;
      t += 1.0;
    }
    if (m == 0.0 || t == 0.0) zero = true;
    if (!zero) log_sum += std::log(m / t);
    out[k - 1] = zero ? 0.0 : bp * std::exp(log_sum / static_cast<double>(k));
  }
  return out;
}

inline std::vector<double> bleu(std::span<const Tokens> candidates, std::span<const Tokens> references,
                                BleuOptions opts = {}) {
  std::vector<ReferenceSet> refs;
  refs.reserve(references.size());
  for (const auto& r : references) refs.push_back({r});
  return bleu(candidates, std::span<const ReferenceSet>(refs), opts);
}

inline std::size_t lcs_len(std::span<const std::string> x, std::span<const std::string> y) {
  std::vector<std::size_t> prev(y.size() + 1, 0), cur(y.size() + 1, 0);
  for (std::size_t i = 1; i <= x.size(); ++i) {
    for (std::size_t j = 1; j <= y.size(); ++j) {
      cur[j] = x[i - 1] == y[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[y.size()];
}

// F-measure of LCS recall (over the reference length) and precision (over
// the candidate length). Empty input scores 0.
inline double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference,
                      double beta = 1.2) {
  if (candidate.empty() || reference.empty()) {
    log::warn("rouge_l: empty candidate or reference scored as 0");
    return 0.0;
  }
  const double lcs = static_cast<double>(lcs_len(candidate, reference));
  if (lcs == 0.0) return 0.0;
  const double recall = lcs / static_cast<double>(reference.size());
  const double precision = lcs / static_cast<double>(candidate.size());
  const double b2 = beta * beta;
  return (1.0 + b2) * recall * precision / (recall + b2 * precision);
}

inline double rouge_l(std::span<const std::string> candidate, const ReferenceSet& references,
                      double beta = 1.2) {
  double best = 0.0;
  for (const auto& r : references) best = std::max(best, rouge_l(candidate, r, beta));
  return best;
}

struct CiderResult {
  double corpus = 0.0;
  std::vector<double> per_sample;
};

// CIDEr with uniform order weights 1/N. Document frequency counts the
// images whose reference set contains the n-gram; n-grams absent from all
// references get document frequency 1. Cosine against a zero vector is 0.
inline CiderResult cider(std::span<const Tokens> candidates, std::span<const ReferenceSet> references,
                         std::size_t max_order = 4) {
  if (candidates.size() != references.size()) {
    throw ValidationError("cider: " + std::to_string(candidates.size()) + " candidates but " +
                          std::to_string(references.size()) + " reference sets");
  }
  if (candidates.empty()) throw ValidationError("cider: empty corpus");
  const double num_images = static_cast<double>(candidates.size());
  CiderResult out;
  out.per_sample.assign(candidates.size(), 0.0);
  for (std::size_t n = 1; n <= max_order; ++n) {
    std::map<NGram, double> df;
    for (const auto& refs : references) {
      std::set<NGram> present;
      for (const auto& ref : refs)
        for (const auto& [g, k] : ngram_counts(ref, n)) present.insert(g);
      for (const auto& g : present) df[g] += 1.0;
    }
    auto vectorize = [&](const Tokens& s) {
      std::map<NGram, double> v;
      const NGramCounts counts = ngram_counts(s, n);
      double total = 0.0;
      for (const auto& [g, k] : counts) total += static_cast<double>(k);
      for (const auto& [g, k] : counts) {
        auto it = df.find(g);
        const double d = it == df.end() ? 1.0 : std::max(1.0, it->second);
        v[g] = static_cast<double>(k) / total * std::log(num_images / d);
      }
      return v;
    };
    auto norm = [](const std::map<NGram, double>& v) {
      double s = 0.0;
      for (const auto& [g, x] : v) s += x * x;
      return std::sqrt(s);
    };
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const auto vc = vectorize(candidates[i]);
      const double nc = norm(vc);
      double acc = 0.0;
      for (const auto& ref : references[i]) {
        const auto vr = vectorize(ref);
        const double nr = norm(vr);
        if (nc == 0.0 || nr == 0.0) continue;
        double dot = 0.0;
        for (const auto& [g, x] : vc) {
          auto it = vr.find(g);
          if (it != vr.end()) dot += x * it->second;
        }
        acc += dot / (nc * nr);
      }
      out.per_sample[i] += acc / static_cast<double>(references[i].size()) / static_cast<double>(max_order);
    }
  }
  double s = 0.0;
  for (double v : out.per_sample) s += v;
  out.corpus = s / num_images;
  return out;
}

struct SampleScores {
  std::string id;
  std::vector<double> bleu;
  double rouge_l = 0.0;
  double cider = 0.0;
};

struct MetricReport {
  std::vector<double> bleu;  // BLEU-1..4
  double rouge_l = 0.0;
  double cider = 0.0;
  std::vector<SampleScores> samples;
};

struct EvaluationOptions {
  std::size_t max_order = 4;
  double rouge_beta = 1.2;
  bool smooth_sentence_bleu = false;
};

inline MetricReport score_corpus(const std::vector<std::string>& ids, std::span<const Tokens> candidates,
                                 std::span<const ReferenceSet> references, EvaluationOptions opts = {}) {
  MetricReport rep;
  rep.bleu = bleu(candidates, references, {opts.max_order, false});
  const CiderResult cd = cider(candidates, references, opts.max_order);
  rep.cider = cd.corpus;
  double rsum = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    SampleScores s;
    s.id = ids[i];
    s.bleu = bleu(candidates.subspan(i, 1), references.subspan(i, 1),
                  {opts.max_order, opts.smooth_sentence_bleu});
    s.rouge_l = rouge_l(candidates[i], references[i], opts.rouge_beta);
    s.cider = cd.per_sample[i];
    rsum += s.rouge_l;
    rep.samples.push_back(std::move(s));
  }
  rep.rouge_l = rsum / static_cast<double>(candidates.size());
  return rep;
}

// JSON-lines with string "id" and "text" (references may use "report").
// Repeated ids in a reference file add references to the same sample.
inline std::vector<std::pair<std::string, std::string>> load_texts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(where + ": malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) {
      throw ValidationError(where + ": missing string field \"id\"");
    }
    const char* key = j.contains("text") ? "text" : "report";
    if (!j.contains(key) || !j[key].is_string()) throw ValidationError(where + ": missing string field \"text\"");
    out.emplace_back(j["id"].get<std::string>(), j[key].get<std::string>());
  }
  return out;
}

inline MetricReport evaluate_corpus(const std::filesystem::path& predictions,
                                    const std::filesystem::path& references, EvaluationOptions opts = {}) {
  const auto preds = load_texts(predictions);
  const auto refs = load_texts(references);
  std::vector<std::string> ids;
  std::map<std::string, ReferenceSet> ref_sets;
  for (const auto& [id, text] : refs) {
    if (!ref_sets.count(id)) ids.push_back(id);
    ref_sets[id].push_back(tokenize(text));
  }
  std::map<std::string, Tokens> cand;
  for (const auto& [id, text] : preds) {
    if (cand.count(id)) throw ValidationError("duplicate prediction for id '" + id + "'");
    Tokens t = tokenize(text);
    if (t.empty()) throw ValidationError("empty prediction for id '" + id + "'");
    cand.emplace(id, std::move(t));
  }
  std::vector<std::string> missing, extra;
  for (const auto& id : ids)
    if (!cand.count(id)) missing.push_back(id);
  for (const auto& [id, t] : cand)
    if (!ref_sets.count(id)) extra.push_back(id);
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "prediction/reference ids do not match;";
    if (!missing.empty()) msg += " missing predictions: " + join(missing, ", ") + ";";
    if (!extra.empty()) msg += " unknown ids: " + join(extra, ", ") + ";";
    throw ValidationError(msg);
  }
  if (ids.empty()) throw ValidationError("no samples to evaluate");
  std::vector<Tokens> c;
  std::vector<ReferenceSet> r;
  for (const auto& id : ids) {
    c.push_back(cand[id]);
    r.push_back(ref_sets[id]);
  }
  return score_corpus(ids, c, r, opts);
}

inline nlohmann::json report_to_json(const MetricReport& rep) {
  nlohmann::json j;
  for (std::size_t k = 0; k < rep.bleu.size(); ++k) j["bleu_" + std::to_string(k + 1)] = rep.bleu[k];
  j["rouge_l"] = rep.rouge_l;
  j["cider"] = rep.cider;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : rep.samples) {
    rows.push_back({{"id", s.id}, {"bleu", s.bleu}, {"rouge_l", s.rouge_l}, {"cider", s.cider}});
  }
  j["samples"] = std::move(rows);
  return j;
}

inline std::string report_table(const MetricReport& rep) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  for (std::size_t k = 0; k < rep.bleu.size(); ++k) os << std::setw(9) << ("BLEU-" + std::to_string(k + 1));
  os << std::setw(9) << "ROUGE-L" << std::setw(9) << "CIDEr" << "\n";
  for (double b : rep.bleu) os << std::setw(9) << b;
  os << std::setw(9) << rep.rouge_l << std::setw(9) << rep.cider << "\n";
  return os.str();
}

}  // namespace dmdk
