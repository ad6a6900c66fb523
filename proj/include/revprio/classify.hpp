#pragma once

// Phase-three inference: radius-neighbor majority vote and inverse-distance
// weighted KNN over an index of labelled training embeddings.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "revprio/embedding.hpp"
#include "revprio/error.hpp"
#include "revprio/vecindex.hpp"

namespace revprio {

struct RNCConfig {
  double radius = 2.0;
  // Approximate mode: search only the nprobe nearest IVF lists. Ignored for a
  // plain flat index; 0 means exact.
  std::size_t nprobe = 0;
};

struct WKNNConfig {
  std::size_t k = 101;
  double epsilon = 1e-12;
};

struct Prediction {
  std::string review_id;
  int predicted_class = 0;
  std::vector<double> class_scores;
  std::size_t neighbor_count = 0;
  bool fallback_used = false;
  bool approximate = false;

  bool operator==(const Prediction&) const = default;
};

// Index of the largest score; ties go to the lowest class.
inline int argmax_lowest(std::span<const double> scores) {
  int best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c)
    if (scores[c] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  return best;
}

// Classes by descending score, ties by ascending class index.
inline std::vector<int> rank_classes(std::span<const double> scores) {
  std::vector<int> order(scores.size());
  for (std::size_t c = 0; c < order.size(); ++c) order[c] = static_cast<int>(c);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
  });
  return order;
}

inline int majority_class(const std::vector<int>& labels, std::size_t num_classes) {
  std::vector<double> counts(num_classes, 0.0);
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= num_classes) throw ArgumentError("label outside class range");
    counts[static_cast<std::size_t>(l)] += 1.0;
  }
  return argmax_lowest(counts);
}

// Labelled training store plus everything inference needs to be total.
class NeighborClassifier {
 public:
  NeighborClassifier(const FlatIndex& flat, std::size_t num_classes, const IvfIndex* ivf = nullptr)
      : flat_(&flat), ivf_(ivf), num_classes_(num_classes) {
    if (num_classes < 1) throw ArgumentError("num_classes must be >= 1");
    majority_ = flat.size() ? majority_class(flat.labels(), num_classes) : 0;
  }

  explicit NeighborClassifier(const IvfIndex& ivf, std::size_t num_classes)
      : NeighborClassifier(ivf.flat(), num_classes, &ivf) {}

  std::size_t num_classes() const noexcept { return num_classes_; }
  int train_majority() const noexcept { return majority_; }
  const FlatIndex& flat() const noexcept { return *flat_; }

  // Most common label within the radius; no neighbours falls back to the
  // training-set majority class.
  Prediction predict_rnc(std::span<const float> query, const RNCConfig& cfg, std::string review_id = {}) const {
    if (!(cfg.radius > 0.0)) throw ArgumentError("radius must be positive");
    Prediction p;
    p.review_id = std::move(review_id);
    p.class_scores.assign(num_classes_, 0.0);
    std::vector<Neighbor> hits;
    if (cfg.nprobe > 0 && ivf_ && cfg.nprobe < ivf_->nlist()) {
      hits = search_radius_ivf(*ivf_, query, cfg.radius, cfg.nprobe).neighbors;
      p.approximate = true;
    } else {
      hits = search_radius(*flat_, query, cfg.radius);
    }
    for (const auto& h : hits) p.class_scores[checked(h.label)] += 1.0;
    p.neighbor_count = hits.size();
    if (hits.empty()) {
      p.predicted_class = majority_;
      p.fallback_used = true;
    } else {
      p.predicted_class = argmax_lowest(p.class_scores);
    }
    return p;
  }

  // Top-k neighbours vote with weight 1 / max(distance, epsilon).
  Prediction predict_wknn(std::span<const float> query, const WKNNConfig& cfg, std::string review_id = {}) const {
    if (cfg.k < 1) throw ArgumentError("k must be >= 1");
    if (!is_distance(flat_->metric())) throw ArgumentError("weighted KNN requires the l2 metric");
    Prediction p;
    p.review_id = std::move(review_id);
    p.class_scores.assign(num_classes_, 0.0);
    const auto hits = search_knn(*flat_, query, cfg.k);
    for (const auto& h : hits) p.class_scores[checked(h.label)] += 1.0 / std::max(h.value, cfg.epsilon);
    p.neighbor_count = hits.size();
    if (hits.empty()) {
      p.predicted_class = majority_;
      p.fallback_used = true;
    } else {
      p.predicted_class = argmax_lowest(p.class_scores);
    }
    return p;
  }

 private:
  std::size_t checked(int label) const {
    if (label < 0 || static_cast<std::size_t>(label) >= num_classes_)
      throw ArgumentError("index label " + std::to_string(label) + " outside class range");
    return static_cast<std::size_t>(label);
  }

  const FlatIndex* flat_;
  const IvfIndex* ivf_;
  std::size_t num_classes_;
  int majority_ = 0;
};

enum class Method { RNC, WKNN };

inline Method parse_method(std::string_view s) {
  if (s == "rnc") return Method::RNC;
  if (s == "wknn") return Method::WKNN;
  throw ArgumentError("unknown classification method '" + std::string(s) + "' (rnc|wknn)");
}

inline std::string to_string(Method m) { return m == Method::RNC ? "rnc" : "wknn"; }

struct ClassifyConfig {
  Method method = Method::RNC;
  RNCConfig rnc;
  WKNNConfig wknn;
};

struct QueryError {
  std::size_t position = 0;
  std::string message;
};

struct BatchResult {
  std::vector<std::optional<Prediction>> predictions;  // aligned with the queries
  std::vector<QueryError> errors;
};

// Applies the single-query classifier to every query. Work is split into
// contiguous chunks across `threads` workers (0 = hardware concurrency); each
// result lands in its own slot, so output never depends on scheduling.
inline BatchResult predict_batch(const NeighborClassifier& clf, const std::vector<EmbeddingVector>& queries,
                                 const ClassifyConfig& cfg, unsigned threads = 1) {
  BatchResult out;
  out.predictions.resize(queries.size());
  std::vector<std::optional<std::string>> failures(queries.size());
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        const auto& q = queries[i];
        std::string id = q.review_id.value_or(std::string{});
        out.predictions[i] = cfg.method == Method::RNC ? clf.predict_rnc(q.values, cfg.rnc, std::move(id))
                                                       : clf.predict_wknn(q.values, cfg.wknn, std::move(id));
      } catch (const Error& e) {
        failures[i] = e.what();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, queries.size())));
  if (threads <= 1) {
    run(0, queries.size());
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (queries.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t begin = t * chunk, end = std::min(queries.size(), begin + chunk);
      if (begin < end) pool.emplace_back(run, begin, end);
    }
  }
  for (std::size_t i = 0; i < failures.size(); ++i)
    if (failures[i]) out.errors.push_back({i, *failures[i]});
  return out;
}

inline nlohmann::json to_json(const Prediction& p) {
  return {{"review_id", p.review_id},
          {"predicted_class", p.predicted_class},
          {"class_scores", p.class_scores},
          {"neighbor_count", p.neighbor_count},
          {"fallback_used", p.fallback_used}};
}

}  // namespace revprio
