#pragma once

// Phase two: vote-aware pair sampling and contrastive fine-tuning.
//
// A positive pair is two reviews of the same class whose vote counts differ by
// less than lambda. Each positive is followed by K negatives that keep the
// positive's anchor and swap the other side for a review of a different class
// whose votes differ from the anchor's by at least lambda.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "revprio/corpus.hpp"
#include "revprio/encoder.hpp"
#include "revprio/error.hpp"
#include "revprio/rng.hpp"

namespace revprio {

struct PairSamplerConfig {
  std::int64_t lambda = 100;
  std::size_t negatives_per_positive = 4;
  Task task = Task::Binary;
  std::uint64_t seed = 0;

  // lambda = 100 for the binary task and 4 for the five-bucket task.
  static PairSamplerConfig for_task(Task task, std::uint64_t seed = 0) {
    return {task == Task::Binary ? 100 : 4, 4, task, seed};
  }
};

struct ReviewPair {
  std::string anchor_id;
  std::string other_id;
  int pair_label = 0;  // 1 positive, 0 negative

  bool operator==(const ReviewPair&) const = default;
};

struct SampledPairs {
  std::vector<ReviewPair> pairs;  // each positive is followed by its K negatives
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t discarded_positives = 0;
};

inline SampledPairs sample_pairs(const std::vector<Review>& corpus, const PairSamplerConfig& cfg) {
  if (cfg.lambda < 1) throw ArgumentError("lambda must be >= 1");
  if (cfg.negatives_per_positive < 1) throw ArgumentError("negatives_per_positive must be >= 1");
  if (corpus.size() < 2) throw ArgumentError("pair sampling needs at least two reviews");

  std::vector<int> labels(corpus.size());
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    labels[i] = label(corpus[i], cfg.task).index;
    by_class[labels[i]].push_back(i);
  }
  if (by_class.size() < 2) throw ArgumentError("pair sampling needs at least two distinct classes");

  Rng rng = Rng(cfg.seed).split("pairs");
  SampledPairs out;
  std::vector<std::size_t> eligible;
  for (auto& [cls, members] : by_class) {
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t m = 0; m + 1 < members.size(); m += 2) {
      const std::size_t a = members[m], b = members[m + 1];
      const std::int64_t ya = corpus[a].votes_30d;
      if (std::llabs(ya - corpus[b].votes_30d) >= cfg.lambda) continue;
      eligible.clear();
      for (std::size_t q = 0; q < corpus.size(); ++q)
        if (labels[q] != cls && std::llabs(ya - corpus[q].votes_30d) >= cfg.lambda) eligible.push_back(q);
      if (eligible.empty()) {
        ++out.discarded_positives;
        continue;
      }
      out.pairs.push_back({corpus[a].id, corpus[b].id, 1});
      ++out.positives;
      for (std::size_t k = 0; k < cfg.negatives_per_positive; ++k) {
        const std::size_t q = eligible[static_cast<std::size_t>(rng.below(eligible.size()))];
        out.pairs.push_back({corpus[a].id, corpus[q].id, 0});
        ++out.negatives;
      }
    }
  }
  if (out.positives == 0) throw ArgumentError("pair sampling produced no positive pairs");
  return out;
}

inline void write_pairs(std::ostream& out, const std::vector<ReviewPair>& pairs) {
  for (const auto& p : pairs)
    out << nlohmann::json{{"anchor_id", p.anchor_id}, {"other_id", p.other_id}, {"pair_label", p.pair_label}}.dump()
        << '\n';
}

inline std::vector<ReviewPair> read_pairs(std::istream& in) {
  std::vector<ReviewPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (!j.is_object() || !j.contains("anchor_id") || !j.contains("other_id") || !j.contains("pair_label") ||
        !j["anchor_id"].is_string() || !j["other_id"].is_string() || !j["pair_label"].is_number_integer())
      throw FormatError("malformed pair record on line " + std::to_string(lineno));
    pairs.push_back({j["anchor_id"], j["other_id"], j["pair_label"].get<int>()});
  }
  return pairs;
}

inline nlohmann::json summary_json(const SampledPairs& s) {
  return {{"positives", s.positives}, {"negatives", s.negatives}, {"discarded_positives", s.discarded_positives}};
}

// ---------------------------------------------------------------------------
// Loss.

struct ContrastiveConfig {
  double temperature = 0.1;
  std::size_t epochs = 10;
  std::size_t batch_pairs = 16;  // positive groups per step
  double lr = 0.05;
  std::uint64_t seed = 0;
  bool include_positive_in_denominator = true;
};

template <typename T>
struct ContrastiveGradient {
  std::vector<T> anchor;
  std::vector<T> positive;
  std::vector<std::vector<T>> negatives;
};

namespace detail {

template <typename T>
T dot(std::span<const T> a, std::span<const T> b) {
  T s = T{};
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

// L = -log( exp(a.p/tau) / D ), D = exp(a.p/tau) + sum_q exp(a.n_q/tau).
// With include_positive = false, D drops the positive term (literal negatives-
// only denominator; the loss can then go negative).
template <typename T>
T contrastive_loss(std::span<const T> anchor, std::span<const T> positive,
                   const std::vector<std::span<const T>>& negatives, T temperature, bool include_positive = true,
                   ContrastiveGradient<T>* grad = nullptr) {
  if (!(temperature > T{})) throw ArgumentError("temperature must be positive");
  if (negatives.empty()) throw ArgumentError("contrastive loss needs at least one negative");
  const std::size_t d = anchor.size();
  if (positive.size() != d) throw ArgumentError("positive embedding dimension mismatch");
  for (const auto& n : negatives)
    if (n.size() != d) throw ArgumentError("negative embedding dimension mismatch");

  const T sp = detail::dot(anchor, positive) / temperature;
  std::vector<T> sn(negatives.size());
  T mx = include_positive ? sp : -std::numeric_limits<T>::infinity();
  for (std::size_t q = 0; q < negatives.size(); ++q) {
    sn[q] = detail::dot(anchor, negatives[q]) / temperature;
    mx = std::max(mx, sn[q]);
  }
  T denom = include_positive ? std::exp(sp - mx) : T{};
  for (T s : sn) denom += std::exp(s - mx);
  T loss;
  if (include_positive && mx == sp) {
    // log1p keeps the loss positive when the positive term dominates.
    T rest = T{};
    for (T s : sn) rest += std::exp(s - sp);
    loss = std::log1p(rest);
  } else {
    loss = std::log(denom) + mx - sp;
  }
  if (!grad) return loss;

  // dL/dsp = w_p - 1 (w_p = 0 when excluded), dL/dsn_q = w_q.
  const T gsp = (include_positive ? std::exp(sp - mx) / denom : T{}) - T{1};
  grad->anchor.assign(d, T{});
  grad->positive.assign(d, T{});
  grad->negatives.assign(negatives.size(), std::vector<T>(d, T{}));
  for (std::size_t i = 0; i < d; ++i) {
    grad->anchor[i] += gsp * positive[i] / temperature;
    grad->positive[i] = gsp * anchor[i] / temperature;
  }
  for (std::size_t q = 0; q < negatives.size(); ++q) {
    const T w = std::exp(sn[q] - mx) / denom;
    for (std::size_t i = 0; i < d; ++i) {
      grad->anchor[i] += w * negatives[q][i] / temperature;
      grad->negatives[q][i] = w * anchor[i] / temperature;
    }
  }
  return loss;
}

inline double contrastive_loss(const EmbeddingVector& anchor, const EmbeddingVector& positive,
                               const std::vector<EmbeddingVector>& negatives, double temperature,
                               bool include_positive = true) {
  auto widen = [](const EmbeddingVector& v) { return std::vector<double>(v.values.begin(), v.values.end()); };
  const auto a = widen(anchor), p = widen(positive);
  std::vector<std::vector<double>> ns;
  for (const auto& n : negatives) ns.push_back(widen(n));
  std::vector<std::span<const double>> views(ns.begin(), ns.end());
  return contrastive_loss<double>(a, p, views, temperature, include_positive);
}

// One positive with its negatives, as indices into a review table.
struct PairGroup {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::vector<std::size_t> negatives;
};

// Regroups a sampled pair list (positive followed by its negatives, all sharing
// the anchor) against a review table.
inline std::vector<PairGroup> group_pairs(const std::vector<ReviewPair>& pairs, const std::vector<Review>& reviews) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < reviews.size(); ++i) index.emplace(reviews[i].id, i);
  auto find = [&](const std::string& id) {
    auto it = index.find(id);
    if (it == index.end()) throw ArgumentError("pair references unknown review id '" + id + "'");
    return it->second;
  };
  std::vector<PairGroup> groups;
  for (const auto& p : pairs) {
    if (p.pair_label == 1) {
      groups.push_back({find(p.anchor_id), find(p.other_id), {}});
    } else if (p.pair_label == 0) {
      if (groups.empty() || reviews[groups.back().anchor].id != p.anchor_id)
        throw ArgumentError("negative pair for anchor '" + p.anchor_id + "' does not follow its positive");
      groups.back().negatives.push_back(find(p.other_id));
    } else {
      throw ArgumentError("pair_label must be 0 or 1");
    }
  }
  for (const auto& g : groups)
    if (g.negatives.empty()) throw ArgumentError("positive pair without negatives");
  return groups;
}

// Siamese loss of one group: every member is encoded with the same params.
// Adds scale * dL/dtheta into grads when given.
template <typename T>
T contrastive_group_loss(const EncoderParams<T>& params, std::span<const TokenId> anchor,
                         std::span<const TokenId> positive, const std::vector<std::span<const TokenId>>& negatives,
                         T temperature, bool include_positive, EncoderParams<T>* grads = nullptr, T scale = T{1}) {
  const auto fa = sentence_forward(params, anchor);
  const auto fp = sentence_forward(params, positive);
  std::vector<SentenceForward<T>> fn;
  fn.reserve(negatives.size());
  for (const auto& n : negatives) fn.push_back(sentence_forward(params, n));
  std::vector<std::span<const T>> nviews;
  for (const auto& f : fn) nviews.emplace_back(f.output);
  ContrastiveGradient<T> g;
  const T loss =
      contrastive_loss<T>(fa.output, fp.output, nviews, temperature, include_positive, grads ? &g : nullptr);
  if (grads) {
    auto scaled = [&](std::vector<T>& v) {
      for (auto& x : v) x *= scale;
      return std::span<const T>(v);
    };
    sentence_backward(params, fa, scaled(g.anchor), *grads);
    sentence_backward(params, fp, scaled(g.positive), *grads);
    for (std::size_t q = 0; q < fn.size(); ++q) sentence_backward(params, fn[q], scaled(g.negatives[q]), *grads);
  }
  return loss;
}

inline GradientCheckResult gradient_check(const EncoderParams<double>& params, const std::vector<TokenId>& anchor,
                                          const std::vector<TokenId>& positive,
                                          const std::vector<std::vector<TokenId>>& negatives, double temperature,
                                          bool include_positive = true, double h = 1e-5,
                                          std::size_t coordinates = 256, std::uint64_t seed = 0) {
  std::vector<std::span<const TokenId>> nviews(negatives.begin(), negatives.end());
  Rng rng(seed);
  return gradient_check(
      params,
      [&](const EncoderParams<double>& p, EncoderParams<double>* g) {
        return contrastive_group_loss<double>(p, anchor, positive, nviews, temperature, include_positive, g);
      },
      h, coordinates, rng);
}

// Fine-tunes all encoder parameters except the pretext head (which receives
// no gradient). Groups are reshuffled every epoch; one step per batch of
// batch_pairs groups on the mean group loss.
inline TrainLog contrastive_train(EncoderParams<float>& params, const std::vector<PairGroup>& groups,
                                  const std::vector<std::vector<TokenId>>& tokens, const ContrastiveConfig& cfg) {
  if (!(cfg.temperature > 0)) throw ArgumentError("temperature must be positive");
  if (cfg.batch_pairs == 0) throw ArgumentError("batch_pairs must be positive");
  if (groups.empty()) throw ArgumentError("contrastive training needs at least one pair group");
  for (const auto& g : groups) {
    if (g.negatives.empty()) throw ArgumentError("pair group without negatives");
    for (std::size_t i : g.negatives)
      if (i >= tokens.size()) throw ArgumentError("pair group index out of range");
    if (g.anchor >= tokens.size() || g.positive >= tokens.size())
      throw ArgumentError("pair group index out of range");
  }
  Rng rng = Rng(cfg.seed).split("contrastive");
  MomentumSgd<float> opt(params.config, static_cast<float>(cfg.lr));
  auto grads = EncoderParams<float>::zeros(params.config);
  std::vector<std::size_t> order(groups.size());
  TrainLog log;
  std::size_t batch_id = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_pairs, ++batch_id) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_pairs);
      const float scale = 1.0f / static_cast<float>(end - start);
      grads.set_zero();
      double loss = 0.0;
      for (std::size_t b = start; b < end; ++b) {
        const auto& g = groups[order[b]];
        std::vector<std::span<const TokenId>> negs;
        for (std::size_t q : g.negatives) negs.emplace_back(tokens[q]);
        loss += contrastive_group_loss<float>(params, tokens[g.anchor], tokens[g.positive], negs,
                                              static_cast<float>(cfg.temperature),
                                              cfg.include_positive_in_denominator, &grads, scale);
      }
      loss /= static_cast<double>(end - start);
      if (!std::isfinite(loss))
        throw NumericError("contrastive loss became non-finite in batch " + std::to_string(batch_id));
      log.losses.push_back(loss);
      opt.step(params, grads);
    }
  }
  return log;
}

}  // namespace revprio
