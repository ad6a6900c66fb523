#include <cmath>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "revprio/contrastive.hpp"
#include "revprio/synth.hpp"
#include "support.hpp"

using namespace revprio;
using revprio::testing::review;

namespace {

EmbeddingVector vec(std::vector<float> v) { return {std::move(v), std::nullopt}; }

Review voted(std::string id, std::int64_t votes) { return review(std::move(id), "text", 1, "2021-11-01", votes); }

// Full scan of the ReviewPair invariants and the positive-then-K-negatives layout.
void check_pairs(const std::vector<Review>& corpus, const SampledPairs& s, const PairSamplerConfig& cfg) {
  std::map<std::string, const Review*> by_id;
  for (const auto& r : corpus) by_id[r.id] = &r;
  ASSERT_EQ(s.pairs.size(), s.positives + s.negatives);
  ASSERT_EQ(s.negatives, s.positives * cfg.negatives_per_positive);
  std::size_t since_positive = cfg.negatives_per_positive;
  std::string anchor;
  for (const auto& p : s.pairs) {
    const Review& a = *by_id.at(p.anchor_id);
    const Review& o = *by_id.at(p.other_id);
    const auto delta = std::llabs(a.votes_30d - o.votes_30d);
    const bool same = label(a, cfg.task) == label(o, cfg.task);
    if (p.pair_label == 1) {
      ASSERT_EQ(since_positive, cfg.negatives_per_positive);
      EXPECT_LT(delta, cfg.lambda);
      EXPECT_TRUE(same);
      EXPECT_NE(p.anchor_id, p.other_id);
      since_positive = 0;
      anchor = p.anchor_id;
    } else {
      ASSERT_EQ(p.pair_label, 0);
      EXPECT_GE(delta, cfg.lambda);
      EXPECT_FALSE(same);
      EXPECT_EQ(p.anchor_id, anchor);
      ++since_positive;
    }
  }
  EXPECT_EQ(since_positive, cfg.negatives_per_positive);
}

}  // namespace

TEST(Loss, AllEqualSimilaritiesGiveLogKPlusOne) {
  const auto a = vec({0.6f, 0.8f});
  for (double tau : {0.05, 0.1, 1.0, 7.0}) {
    EXPECT_NEAR(contrastive_loss(a, a, {a, a, a, a}, tau), std::log(5.0), 1e-9);
    EXPECT_NEAR(contrastive_loss(a, a, {a, a}, tau), std::log(3.0), 1e-9);
  }
}

TEST(Loss, ScalarCase) {
  // a.p = 1, a.n = 0, tau = 1: ln(1 + e^-1)
  const double expected = 0.31326168751822286;
  EXPECT_NEAR(std::log1p(std::exp(-1.0)), expected, 1e-15);
  EXPECT_NEAR(contrastive_loss(vec({1, 0}), vec({1, 0}), {vec({0, 1})}, 1.0), expected, 1e-9);
}

TEST(Loss, LiteralNegativesOnlyDenominator) {
  // Without the positive term: -ln(e^1 / e^0) = -1.
  EXPECT_NEAR(contrastive_loss(vec({1, 0}), vec({1, 0}), {vec({0, 1})}, 1.0, false), -1.0, 1e-12);
}

TEST(Loss, LargePositiveSimilarityApproachesZero) {
  const double l = contrastive_loss(vec({1, 0}), vec({1, 0}), {vec({0, 1}), vec({-1, 0})}, 0.01);
  EXPECT_GT(l, 0.0);
  EXPECT_LT(l, 1e-30);
}

TEST(Loss, Monotonicity) {
  const std::vector<double> a{1, 0};
  const std::vector<double> n1{0.2, 0.5}, n2{-0.3, 0.1};
  std::vector<std::span<const double>> negs{n1, n2};
  double prev = INFINITY;
  for (double s = -1.0; s <= 1.0; s += 0.1) {
    const std::vector<double> p{s, 0.3};
    const double l = contrastive_loss<double>(a, p, negs, 0.2);
    EXPECT_LT(l, prev);
    prev = l;
  }
  prev = -INFINITY;
  const std::vector<double> p{0.5, 0.3};
  for (double s = -1.0; s <= 1.0; s += 0.1) {
    const std::vector<double> n{s, 0.0};
    const double l = contrastive_loss<double>(a, p, {n, n2}, 0.2);
    EXPECT_GT(l, prev);
    prev = l;
  }
}

TEST(Loss, PositiveAndTemperatureArgminInvariant) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<double>> v(5, std::vector<double>(4));
    for (auto& x : v)
      for (auto& c : x) c = rng.uniform(-1, 1);
    std::vector<std::span<const double>> negs{v[3], v[4]};
    bool first_better = false;
    for (double tau : {0.05, 0.1, 0.5, 2.0, 10.0}) {
      const double l1 = contrastive_loss<double>(v[0], v[1], negs, tau);
      const double l2 = contrastive_loss<double>(v[0], v[2], negs, tau);
      EXPECT_GT(l1, 0.0);
      EXPECT_GT(l2, 0.0);
      if (tau == 0.05) first_better = l1 < l2;
      EXPECT_EQ(l1 < l2, first_better);
    }
  }
}

TEST(Loss, ArgumentErrors) {
  EXPECT_THROW(contrastive_loss(vec({1, 0}), vec({1, 0}), {vec({0, 1})}, 0.0), ArgumentError);
  EXPECT_THROW(contrastive_loss(vec({1, 0}), vec({1, 0}), {vec({0, 1})}, -1.0), ArgumentError);
  EXPECT_THROW(contrastive_loss(vec({1, 0}), vec({1, 0, 0}), {vec({0, 1})}, 1.0), ArgumentError);
  EXPECT_THROW(contrastive_loss(vec({1, 0}), vec({1, 0}), {vec({0})}, 1.0), ArgumentError);
  EXPECT_THROW(contrastive_loss(vec({1, 0}), vec({1, 0}), {}, 1.0), ArgumentError);
}

TEST(Loss, GradientCheckSiamese) {
  EncoderConfig cfg{20, 8, 16, true};
  auto p = EncoderParams<double>::zeros(cfg);
  Rng rng(8);
  p.for_each_tensor([&](std::span<double> s) {
    for (auto& v : s) v = rng.uniform(-0.5, 0.5);
  });
  for (bool incl : {true, false}) {
    auto res = gradient_check(p, {3, 4, 5}, {4, 6, 7, 3}, {{8, 9}, {10, 3, 11}, {12}, {13, 14, 15, 16}}, 0.1, incl,
                              1e-5, 300, 2);
    EXPECT_GE(res.coordinates, 200u);
    EXPECT_LT(res.max_relative_error, 1e-4) << "worst coordinate " << res.worst_coordinate;
  }
}

TEST(Sampler, PositiveThenNegativeExample) {
  // 150 and 180 are both class 1 with delta 30; 50 is class 0 at delta >= 100.
  std::vector<Review> corpus{voted("a", 150), voted("b", 180), voted("c", 50)};
  auto cfg = PairSamplerConfig::for_task(Task::Binary, 1);
  auto s = sample_pairs(corpus, cfg);
  EXPECT_EQ(s.positives, 1u);
  EXPECT_EQ(s.negatives, 4u);
  check_pairs(corpus, s, cfg);
  for (std::size_t k = 1; k <= 4; ++k) EXPECT_EQ(s.pairs[k].other_id, "c");
}

TEST(Sampler, NegativeBoundaryIsInclusive) {
  // anchor 150 vs candidate 50: delta exactly 100 qualifies.
  std::vector<Review> corpus{voted("a", 150), voted("b", 150), voted("c", 50)};
  auto s = sample_pairs(corpus, PairSamplerConfig::for_task(Task::Binary, 3));
  EXPECT_EQ(s.positives, 1u);
  EXPECT_EQ(s.pairs[1].other_id, "c");
}

TEST(Sampler, CloseVotesAcrossClassesAreNeverPaired) {
  // 80 (class 0) and 150 (class 1): delta 70 < 100 but classes differ.
  std::vector<Review> corpus{voted("x", 80), voted("w", 0), voted("y", 150), voted("z", 160)};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto cfg = PairSamplerConfig::for_task(Task::Binary, seed);
    try {
      auto s = sample_pairs(corpus, cfg);
      check_pairs(corpus, s, cfg);
      for (const auto& p : s.pairs) EXPECT_FALSE(std::set<std::string>({p.anchor_id, p.other_id}) == std::set<std::string>({"x", "y"}));
    } catch (const ArgumentError&) {
      // every positive can end up discarded for some shuffles
    }
  }
}

TEST(Sampler, DiscardsPositivesWithoutEligibleNegatives) {
  // A class-0 anchor at 60 votes has no class-1 review 100 votes away.
  std::vector<Review> corpus{voted("a", 60), voted("b", 60), voted("c", 150), voted("d", 155), voted("e", 0),
                             voted("f", 0)};
  auto cfg = PairSamplerConfig::for_task(Task::Binary, 0);
  auto s = sample_pairs(corpus, cfg);
  check_pairs(corpus, s, cfg);
  EXPECT_EQ(s.positives + s.discarded_positives, 3u);
  EXPECT_GE(s.discarded_positives, 1u);
}

TEST(Sampler, Errors) {
  auto cfg = PairSamplerConfig::for_task(Task::Binary, 0);
  EXPECT_THROW(sample_pairs({voted("a", 1)}, cfg), ArgumentError);
  EXPECT_THROW(sample_pairs({voted("a", 1), voted("b", 2)}, cfg), ArgumentError);     // one class
  EXPECT_THROW(sample_pairs({voted("a", 1), voted("b", 200)}, cfg), ArgumentError);   // no positives
  cfg.lambda = 0;
  EXPECT_THROW(sample_pairs({voted("a", 1), voted("b", 200)}, cfg), ArgumentError);
}

TEST(Sampler, TaskDefaults) {
  EXPECT_EQ(PairSamplerConfig::for_task(Task::Binary).lambda, 100);
  EXPECT_EQ(PairSamplerConfig::for_task(Task::MultiClass).lambda, 4);
  EXPECT_EQ(PairSamplerConfig::for_task(Task::MultiClass).negatives_per_positive, 4u);
}

TEST(Sampler, InvariantsOnSyntheticCorpus) {
  auto corpus = filter(generate_corpus({.reviews = 3000, .seed = 6}));
  for (Task task : {Task::Binary, Task::MultiClass}) {
    auto cfg = PairSamplerConfig::for_task(task, 6);
    auto s = sample_pairs(corpus, cfg);
    check_pairs(corpus, s, cfg);
    EXPECT_GT(s.positives, 100u);
    auto again = sample_pairs(corpus, cfg);
    EXPECT_EQ(again.pairs.size(), s.pairs.size());
    EXPECT_TRUE(std::equal(s.pairs.begin(), s.pairs.end(), again.pairs.begin(), [](const auto& x, const auto& y) {
      return x.anchor_id == y.anchor_id && x.other_id == y.other_id && x.pair_label == y.pair_label;
    }));
  }
}

TEST(Pairs, JsonlRoundTripAndGrouping) {
  auto corpus = filter(generate_corpus({.reviews = 400, .seed = 2}));
  auto s = sample_pairs(corpus, PairSamplerConfig::for_task(Task::MultiClass, 2));
  std::stringstream buf;
  write_pairs(buf, s.pairs);
  auto back = read_pairs(buf);
  ASSERT_EQ(back.size(), s.pairs.size());
  auto groups = group_pairs(back, corpus);
  EXPECT_EQ(groups.size(), s.positives);
  for (const auto& g : groups) EXPECT_EQ(g.negatives.size(), 4u);
  EXPECT_EQ(summary_json(s)["positives"], s.positives);

  std::istringstream bad("{\"anchor_id\":\"a\"}\n");
  EXPECT_THROW(read_pairs(bad), FormatError);
  EXPECT_THROW(group_pairs({{"a", "b", 0}}, corpus), ArgumentError);
}

class ContrastiveTraining : public ::testing::Test {
 protected:
  // Class (binary) is decided by one marker token; everything else is noise.
  void SetUp() override {
    Rng rng(21);
    auto make = [&](std::size_t i, bool prominent) {
      std::string text = prominent ? "alpha" : "omega";
      for (int w = 0; w < 8; ++w) text += " w" + std::to_string(rng.below(60));
      return voted((prominent ? "p" : "q") + std::to_string(i), prominent ? 200 + std::int64_t(rng.below(50))
                                                                            : std::int64_t(rng.below(20)));
    };
    for (std::size_t i = 0; i < 160; ++i) {
      auto r = make(i, i % 2 == 0);
      r.text = (i % 2 == 0 ? "alpha" : "omega");
      for (int w = 0; w < 8; ++w) r.text += " w" + std::to_string(rng.below(60));
      (i < 120 ? train : held_out).push_back(r);
    }
    vocab = build_vocab(train, 1);
    for (const auto& r : train) tokens.push_back(tokenize(r.text, vocab, 64));
    cfg = {static_cast<std::size_t>(vocab.size()), 16, 32, true};
    groups = group_pairs(sample_pairs(train, PairSamplerConfig::for_task(Task::Binary, 1)).pairs, train);
  }

  // Mean within-class minus mean cross-class cosine on held-out reviews.
  double separation(const EncoderParams<float>& p) const {
    std::vector<std::vector<float>> e;
    for (const auto& r : held_out) e.push_back(encode_values(p, std::span<const TokenId>(tokenize(r.text, vocab, 64))));
    double within = 0, cross = 0;
    std::size_t nw = 0, nc = 0;
    for (std::size_t i = 0; i < e.size(); ++i)
      for (std::size_t j = i + 1; j < e.size(); ++j) {
        double d = 0;
        for (std::size_t k = 0; k < e[i].size(); ++k) d += double(e[i][k]) * e[j][k];
        if (label(held_out[i], Task::Binary) == label(held_out[j], Task::Binary)) {
          within += d;
          ++nw;
        } else {
          cross += d;
          ++nc;
        }
      }
    return within / double(nw) - cross / double(nc);
  }

  std::vector<Review> train, held_out;
  Vocabulary vocab;
  std::vector<std::vector<TokenId>> tokens;
  EncoderConfig cfg;
  std::vector<PairGroup> groups;
};

TEST_F(ContrastiveTraining, SeparatesClassesOnHeldOutReviews) {
  auto p = EncoderParams<float>::initialize(cfg, Rng(1));
  const double before = separation(p);
  auto log = contrastive_train(p, groups, tokens, {.epochs = 5, .seed = 1});
  const double after = separation(p);
  EXPECT_GT(after, 0.0);
  EXPECT_GT(after, before);
  EXPECT_LT(log.losses.back(), log.losses.front());
}

TEST_F(ContrastiveTraining, ZeroLearningRateLeavesParamsUnchanged) {
  auto p = EncoderParams<float>::initialize(cfg, Rng(1));
  const auto before = p;
  contrastive_train(p, groups, tokens, {.epochs = 2, .lr = 0.0, .seed = 1});
  EXPECT_TRUE(p == before);
}

TEST_F(ContrastiveTraining, SameSeedSameTrajectoryAndFrozenHead) {
  auto a = EncoderParams<float>::initialize(cfg, Rng(1));
  auto b = a;
  const auto head = a.pretext_out;
  auto la = contrastive_train(a, groups, tokens, {.epochs = 2, .seed = 9});
  auto lb = contrastive_train(b, groups, tokens, {.epochs = 2, .seed = 9});
  EXPECT_EQ(la.losses, lb.losses);
  EXPECT_TRUE(a == b);
  EXPECT_TRUE(a.pretext_out == head);
}

TEST_F(ContrastiveTraining, NonFiniteLossNamesBatch) {
  auto p = EncoderParams<float>::initialize(cfg, Rng(1));
  for (auto& v : p.b1) v = std::numeric_limits<float>::quiet_NaN();
  try {
    contrastive_train(p, groups, tokens, {.epochs = 1, .seed = 1});
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("batch 0"), std::string::npos);
  }
}
