#pragma once

// Accuracy, macro-F1, Matthews correlation and top-2 accuracy from integer
// confusion counts. Conventions: a zero MCC denominator gives 0, and a class
// with no true and no predicted examples contributes F1 = 0 to the macro mean.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "revprio/classify.hpp"
#include "revprio/error.hpp"

namespace revprio {

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = 2) : classes_(classes), counts_(classes * classes, 0) {}

  std::size_t classes() const noexcept { return classes_; }
  std::uint64_t& at(std::size_t truth, std::size_t predicted) { return counts_[truth * classes_ + predicted]; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * classes_ + predicted]; }

  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (auto c : counts_) s += c;
    return s;
  }

  std::uint64_t trace() const {
    std::uint64_t s = 0;
    for (std::size_t k = 0; k < classes_; ++k) s += at(k, k);
    return s;
  }

  std::uint64_t row_sum(std::size_t k) const {
    std::uint64_t s = 0;
    for (std::size_t j = 0; j < classes_; ++j) s += at(k, j);
    return s;
  }

  std::uint64_t col_sum(std::size_t k) const {
    std::uint64_t s = 0;
    for (std::size_t j = 0; j < classes_; ++j) s += at(j, k);
    return s;
  }

  // Shard merge.
  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    if (o.classes_ != classes_) throw ArgumentError("cannot merge confusion matrices of different sizes");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += o.counts_[i];
    return *this;
  }

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
};

inline ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted, std::size_t classes) {
  if (truth.size() != predicted.size()) throw ArgumentError("true and predicted label counts differ");
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= classes || static_cast<std::size_t>(p) >= classes)
      throw ArgumentError("label outside [0, " + std::to_string(classes) + ")");
    ++cm.at(static_cast<std::size_t>(t), static_cast<std::size_t>(p));
  }
  return cm;
}

inline double accuracy(const ConfusionMatrix& cm) {
  const auto n = cm.total();
  return n == 0 ? 0.0 : static_cast<double>(cm.trace()) / static_cast<double>(n);
}

inline double class_f1(const ConfusionMatrix& cm, std::size_t k) {
  const double tp = static_cast<double>(cm.at(k, k));
  const double denom = static_cast<double>(cm.row_sum(k) + cm.col_sum(k));
  return denom == 0.0 ? 0.0 : 2.0 * tp / denom;
}

inline double macro_f1(const ConfusionMatrix& cm) {
  if (cm.classes() == 0) return 0.0;
  double s = 0.0;
  for (std::size_t k = 0; k < cm.classes(); ++k) s += class_f1(cm, k);
  return s / static_cast<double>(cm.classes());
}

// (TP*TN - FP*FN) / sqrt((TP+FP)(TP+FN)(TN+FP)(TN+FN)), class 1 positive.
inline double mcc_binary(std::uint64_t tp, std::uint64_t tn, std::uint64_t fp, std::uint64_t fn) {
  const double num = static_cast<double>(tp) * static_cast<double>(tn) - static_cast<double>(fp) * static_cast<double>(fn);
  const double den = static_cast<double>(tp + fp) * static_cast<double>(tp + fn) * static_cast<double>(tn + fp) *
                     static_cast<double>(tn + fn);
  return den == 0.0 ? 0.0 : num / std::sqrt(den);
}

// Multiclass R_K: (c*s - sum p_k t_k) / sqrt((s^2 - sum p_k^2)(s^2 - sum t_k^2)).
inline double mcc(const ConfusionMatrix& cm) {
  const double s = static_cast<double>(cm.total());
  const double c = static_cast<double>(cm.trace());
  double pt = 0.0, pp = 0.0, tt = 0.0;
  for (std::size_t k = 0; k < cm.classes(); ++k) {
    const double p = static_cast<double>(cm.col_sum(k)), t = static_cast<double>(cm.row_sum(k));
    pt += p * t;
    pp += p * p;
    tt += t * t;
  }
  const double den = (s * s - pp) * (s * s - tt);
  return den == 0.0 ? 0.0 : (c * s - pt) / std::sqrt(den);
}

// Fraction of examples whose true class is among the two best-ranked classes.
inline double top2_accuracy(std::span<const int> truth, const std::vector<Prediction>& ranked) {
  if (truth.size() != ranked.size()) throw ArgumentError("true labels and predictions differ in length");
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto order = rank_classes(ranked[i].class_scores);
    for (std::size_t r = 0; r < std::min<std::size_t>(2, order.size()); ++r)
      if (order[r] == truth[i]) {
        ++hits;
        break;
      }
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

struct EvaluationReport {
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double mcc = 0.0;
  std::optional<double> top2_accuracy;
  std::vector<double> per_class_f1;
  std::uint64_t n = 0;
};

inline EvaluationReport evaluate(const ConfusionMatrix& cm) {
  EvaluationReport r;
  r.confusion = cm;
  r.accuracy = accuracy(cm);
  r.macro_f1 = macro_f1(cm);
  r.mcc = mcc(cm);
  for (std::size_t k = 0; k < cm.classes(); ++k) r.per_class_f1.push_back(class_f1(cm, k));
  r.n = cm.total();
  return r;
}

inline EvaluationReport evaluate(std::span<const int> truth, const std::vector<Prediction>& predictions,
                                 std::size_t classes) {
  std::vector<int> predicted;
  predicted.reserve(predictions.size());
  for (const auto& p : predictions) predicted.push_back(p.predicted_class);
  auto r = evaluate(confusion(truth, predicted, classes));
  r.top2_accuracy = top2_accuracy(truth, predictions);
  return r;
}

inline nlohmann::json to_json(const EvaluationReport& r) {
  nlohmann::json cm = nlohmann::json::array();
  for (std::size_t t = 0; t < r.confusion.classes(); ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t p = 0; p < r.confusion.classes(); ++p) row.push_back(r.confusion.at(t, p));
    cm.push_back(row);
  }
  nlohmann::json j = {{"n", r.n},
                      {"accuracy", r.accuracy},
                      {"macro_f1", r.macro_f1},
                      {"mcc", r.mcc},
                      {"per_class_f1", r.per_class_f1},
                      {"confusion", cm}};
  j["top2_accuracy"] = r.top2_accuracy ? nlohmann::json(*r.top2_accuracy) : nlohmann::json(nullptr);
  return j;
}

// Aligned text table: one row per evaluated model/approach.
inline std::string format_table(const std::vector<std::pair<std::string, EvaluationReport>>& rows,
                                const std::string& title) {
  std::ostringstream out;
  char buf[160];
  out << title << '\n';
  std::snprintf(buf, sizeof buf, "%-28s %9s %9s %9s %9s\n", "Approach", "Accuracy", "F1", "MCC", "Top-2");
  out << buf << std::string(68, '-') << '\n';
  for (const auto& [name, r] : rows) {
    char top2[16] = "-";
    if (r.top2_accuracy) std::snprintf(top2, sizeof top2, "%.4f", *r.top2_accuracy);
    std::snprintf(buf, sizeof buf, "%-28s %9.4f %9.4f %9.4f %9s\n", name.c_str(), r.accuracy, r.macro_f1, r.mcc, top2);
    out << buf;
  }
  return out.str();
}

}  // namespace revprio
