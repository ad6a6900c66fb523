#pragma once

// Seeded synthetic review corpus for desk-scale runs.
//
// Vote counts are heavy-tailed: a large share of reviews get no votes and the
// rest follow a discrete Pareto tail, so only a few percent pass 100 votes.
// Each review mixes filler complaint words with marker words tied to its vote
// bucket; with probability 1 - marker_fidelity a marker is taken from a
// different bucket instead. A small fraction of records are deliberately
// unusable (positive ratings, duplicate ids) so the filter has work to do.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "revprio/corpus.hpp"
#include "revprio/rng.hpp"

namespace revprio {

struct SynthConfig {
  std::size_t reviews = 2000;
  std::uint64_t seed = 0;
  double zero_vote_share = 0.45;
  double pareto_alpha = 0.45;
  std::int64_t max_votes = 20000;
  std::size_t markers_per_review = 3;
  double marker_fidelity = 0.85;
  std::size_t min_filler = 12;
  std::size_t max_filler = 24;
  double positive_rating_share = 0.04;
  double duplicate_share = 0.01;
};

namespace detail {

inline const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words = [] {
    std::vector<std::string> w = {
        "app",     "update",  "crash",    "crashes", "login",   "screen",   "slow",    "bug",     "error",
        "again",   "phone",   "account",  "fix",     "please",  "stopped",  "working", "since",   "version",
        "cannot",  "open",    "loading",  "freezes", "every",   "time",     "useless", "waste",   "money",
        "support", "never",   "worst",    "ads",     "annoying", "battery", "drains",  "sync",    "data",
        "lost",    "password", "reset",   "button",  "does",    "nothing",  "keeps",   "closing", "black",
        "white",   "notification", "spam", "refund", "subscription", "charged", "twice", "wifi", "offline",
        "terrible", "deleted", "works",   "broken",  "after",   "latest",   "install", "reinstall", "still"};
    // Pseudo-words pad the filler vocabulary to a realistic size.
    const std::array<const char*, 12> onset = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t"};
    const std::array<const char*, 5> nucleus = {"a", "e", "i", "o", "u"};
    const std::array<const char*, 4> coda = {"n", "r", "x", "m"};
    for (auto o : onset)
      for (auto v : nucleus)
        for (auto c : coda) {
          if (w.size() >= 240) return w;
          w.push_back(std::string(o) + v + c + "o");
        }
    return w;
  }();
  return words;
}

// Marker words per multiclass vote bucket.
inline const std::array<std::vector<std::string>, 5>& marker_words() {
  static const std::array<std::vector<std::string>, 5> words = {{
      {"meh", "minor", "typo", "cosmetic", "slightly", "font", "colour", "icon"},
      {"glitch", "lag", "stutter", "flicker", "delay", "hiccup", "jitter", "sluggish"},
      {"logout", "timeout", "rejected", "expired", "stuck", "spinner", "blank", "unresponsive"},
      {"overcharged", "locked", "wiped", "corrupted", "vanished", "hijacked", "leaked", "stolen"},
      {"outage", "breach", "scam", "fraud", "lawsuit", "ransom", "blackout", "meltdown"},
  }};
  return words;
}

}  // namespace detail

inline std::vector<Review> generate_corpus(const SynthConfig& cfg) {
  Rng rng = Rng(cfg.seed).split("synth");
  const auto& filler = detail::filler_words();
  const auto& markers = detail::marker_words();
  const Date first{std::chrono::year{2021}, std::chrono::October, std::chrono::day{1}};
  const Date last{std::chrono::year{2022}, std::chrono::March, std::chrono::day{31}};
  const auto first_day = std::chrono::sys_days(first);
  const auto span_days = static_cast<std::uint64_t>((std::chrono::sys_days(last) - first_day).count() + 1);
  static const std::array<const char*, 6> categories = {"Finance", "Social", "Games", "Tools", "Shopping", "Travel"};

  std::vector<Review> out;
  out.reserve(cfg.reviews);
  for (std::size_t i = 0; i < cfg.reviews; ++i) {
    Review r;
    char id[16];
    std::snprintf(id, sizeof id, "r%06zu", i);
    r.id = id;
    const auto app = rng.below(20);
    r.app_id = "app" + std::to_string(app);
    r.app_category = categories[app % categories.size()];
    r.rating = rng.uniform() < cfg.positive_rating_share ? 3 + static_cast<int>(rng.below(3)) : 1 + static_cast<int>(rng.below(2));
    r.posted_at = Date(first_day + std::chrono::days(static_cast<int>(rng.below(span_days))));

    if (rng.uniform() < cfg.zero_vote_share) {
      r.votes_30d = 0;
    } else {
      const double u = 1.0 - rng.uniform();  // (0, 1]
      const double x = std::pow(u, -1.0 / cfg.pareto_alpha);
      r.votes_30d = std::min<std::int64_t>(cfg.max_votes, static_cast<std::int64_t>(std::floor(x)));
    }
    const int bucket = label_votes(r.votes_30d, Task::MultiClass).index;

    const std::size_t n_filler = cfg.min_filler + static_cast<std::size_t>(rng.below(cfg.max_filler - cfg.min_filler + 1));
    std::vector<std::string> words;
    for (std::size_t w = 0; w < n_filler; ++w) words.push_back(filler[rng.below(filler.size())]);
    for (std::size_t m = 0; m < cfg.markers_per_review; ++m) {
      int b = bucket;
      if (rng.uniform() >= cfg.marker_fidelity) b = static_cast<int>((bucket + 1 + rng.below(4)) % 5);
      const auto& pool = markers[static_cast<std::size_t>(b)];
      const auto pos = rng.below(words.size() + 1);
      words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), pool[rng.below(pool.size())]);
    }
    for (std::size_t w = 0; w < words.size(); ++w) {
      if (w) r.text += ' ';
      r.text += words[w];
    }
    r.text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(r.text[0])));
    r.text += rng.uniform() < 0.5 ? "!" : ".";
    out.push_back(std::move(r));
  }
  const auto dups = static_cast<std::size_t>(cfg.duplicate_share * static_cast<double>(cfg.reviews));
  for (std::size_t k = 0; k < dups && !out.empty(); ++k) {
    Review copy = out[rng.below(out.size())];
    copy.text = "duplicate " + copy.text;
    out.push_back(std::move(copy));
  }
  return out;
}

}  // namespace revprio
