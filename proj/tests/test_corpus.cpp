#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "revprio/corpus.hpp"
#include "revprio/rng.hpp"
#include "revprio/synth.hpp"
#include "support.hpp"

using namespace revprio;
using revprio::testing::review;

TEST(Ingest, JsonlFieldMapping) {
  std::istringstream in(
      R"({"id":"r1","app_id":"a","text":"crashes on login","rating":1,"posted_at":"2021-11-01","votes_30d":240})"
      "\n");
  auto res = ingest(in, RecordFormat::Jsonl);
  ASSERT_EQ(res.reviews.size(), 1u);
  EXPECT_EQ(res.skipped, 0u);
  const auto& r = res.reviews[0];
  EXPECT_EQ(r.id, "r1");
  EXPECT_EQ(r.app_id, "a");
  EXPECT_EQ(r.text, "crashes on login");
  EXPECT_EQ(r.rating, 1);
  EXPECT_EQ(format_date(r.posted_at), "2021-11-01");
  EXPECT_EQ(r.votes_30d, 240);
  EXPECT_FALSE(r.app_category);
}

TEST(Ingest, MissingTextIsSkipped) {
  std::istringstream in(
      R"({"id":"r1","app_id":"a","text":"ok","rating":1,"posted_at":"2021-11-01","votes_30d":0})"
      "\n"
      R"({"id":"r2","app_id":"a","rating":1,"posted_at":"2021-11-01","votes_30d":0})"
      "\n");
  std::ostringstream diag;
  auto res = ingest(in, RecordFormat::Jsonl, &diag);
  EXPECT_EQ(res.reviews.size(), 1u);
  EXPECT_EQ(res.skipped, 1u);
  EXPECT_NE(diag.str().find("1 skipped"), std::string::npos);
}

TEST(Ingest, MalformedJsonAndBadValuesAreSkipped) {
  std::istringstream in(
      "not json\n"
      R"({"id":"r1","app_id":"a","text":"x","rating":7,"posted_at":"2021-11-01","votes_30d":0})"
      "\n"
      R"({"id":"r2","app_id":"a","text":"x","rating":1,"posted_at":"2021-13-01","votes_30d":0})"
      "\n"
      R"({"id":"r3","app_id":"a","text":"x","rating":1,"posted_at":"2021-11-01","votes_30d":-1})"
      "\n"
      R"({"id":"r4","app_id":"a","text":"x","rating":2,"posted_at":"2021-11-01","votes_30d":3,"app_category":"Tools"})"
      "\n");
  auto res = ingest(in, RecordFormat::Jsonl);
  ASSERT_EQ(res.reviews.size(), 1u);
  EXPECT_EQ(res.skipped, 4u);
  EXPECT_EQ(res.reviews[0].app_category, "Tools");
}

TEST(Ingest, CsvThreeValidOneBadRating) {
  std::istringstream in(
      "id,app_id,text,rating,posted_at,votes_30d\n"
      "r1,a,\"crashes, every time\",1,2021-11-01,3\n"
      "r2,a,\"says \"\"error\"\"\nthen quits\",2,2021-11-02,0\n"
      "r3,b,slow,x,2021-11-03,1\n"
      "r4,b,ads,1,2021-11-04,101\n");
  auto res = ingest(in, RecordFormat::Csv);
  ASSERT_EQ(res.reviews.size(), 3u);
  EXPECT_EQ(res.skipped, 1u);
  EXPECT_EQ(res.reviews[0].text, "crashes, every time");
  EXPECT_EQ(res.reviews[1].text, "says \"error\"\nthen quits");
  EXPECT_EQ(res.reviews[2].id, "r4");
}

TEST(Ingest, CsvHeaderMissingColumnIsFormatError) {
  std::istringstream in("id,app_id,text,rating,posted_at\nr1,a,t,1,2021-11-01\n");
  EXPECT_THROW(ingest(in, RecordFormat::Csv), FormatError);
}

TEST(Ingest, NothingParseableIsEmptyCorpus) {
  std::istringstream in("garbage\n{}\n");
  EXPECT_THROW(ingest(in, RecordFormat::Jsonl), EmptyCorpusError);
}

TEST(Ingest, UnreadableSourceIsIoError) {
  EXPECT_THROW(ingest_file("/nonexistent/reviews.jsonl", RecordFormat::Jsonl), IoError);
}

TEST(Ingest, JsonlRoundTrip) {
  auto corpus = generate_corpus({.reviews = 50, .seed = 3});
  std::stringstream buf;
  write_jsonl(buf, corpus);
  auto back = ingest(buf, RecordFormat::Jsonl);
  EXPECT_EQ(back.skipped, 0u);
  EXPECT_EQ(back.reviews, corpus);
}

TEST(Filter, RatingRule) {
  std::vector<Review> in{review("a", "bad", 1), review("b", "fine", 5), review("c", "meh", 2)};
  auto out = filter(in);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].id, "a");
  EXPECT_EQ(out[1].id, "c");
}

TEST(Filter, DuplicateIdFirstWins) {
  auto out = filter({review("a", "first"), review("a", "second")});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].text, "first");
}

TEST(Filter, BlankTextDropped) { EXPECT_TRUE(filter({review("a", "   "), review("b", "\t\n")}).empty()); }

TEST(Filter, IdempotentOnSyntheticCorpus) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto once = filter(generate_corpus({.reviews = 300, .seed = seed}));
    EXPECT_EQ(filter(once), once);
    for (const auto& r : once) {
      EXPECT_TRUE(r.rating == 1 || r.rating == 2);
      EXPECT_FALSE(blank(r.text));
    }
  }
}

TEST(Label, BinaryBoundary) {
  EXPECT_EQ(label_votes(101, Task::Binary).index, 1);
  EXPECT_EQ(label_votes(100, Task::Binary).index, 0);
  EXPECT_EQ(label_votes(0, Task::Binary).index, 0);
}

TEST(Label, MultiClassBuckets) {
  const std::vector<std::int64_t> votes{0, 3, 25, 26, 100, 101};
  const std::vector<int> expected{0, 1, 2, 3, 3, 4};
  for (std::size_t i = 0; i < votes.size(); ++i)
    EXPECT_EQ(label_votes(votes[i], Task::MultiClass).index, expected[i]) << votes[i];
}

TEST(Label, BucketEdgesAreDistinct) {
  for (auto [lo, hi] : {std::pair{0, 1}, {5, 6}, {25, 26}, {100, 101}})
    EXPECT_NE(label_votes(lo, Task::MultiClass).index, label_votes(hi, Task::MultiClass).index);
  Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const auto v = static_cast<std::int64_t>(rng.below(5000));
    const int m = label_votes(v, Task::MultiClass).index;
    EXPECT_EQ(label_votes(v, Task::Binary).index, m == 4 ? 1 : 0);
    EXPECT_LE(m, label_votes(v + 1, Task::MultiClass).index);
  }
}

TEST(Split, OnePerSplit) {
  auto s = temporal_split({review("a", "x", 1, "2022-01-15"), review("b", "x", 1, "2022-02-10"),
                           review("c", "x", 1, "2022-03-05")},
                          *parse_date("2022-02-01"), *parse_date("2022-03-01"));
  ASSERT_EQ(s.train.size(), 1u);
  ASSERT_EQ(s.validation.size(), 1u);
  ASSERT_EQ(s.test.size(), 1u);
  EXPECT_EQ(s.train[0].id, "a");
  EXPECT_EQ(s.validation[0].id, "b");
  EXPECT_EQ(s.test[0].id, "c");
  EXPECT_TRUE(s.warnings.empty());
}

TEST(Split, AllBeforeBoundaryWarns) {
  auto s = temporal_split({review("a", "x", 1, "2021-12-01")}, *parse_date("2022-02-01"), *parse_date("2022-03-01"));
  EXPECT_EQ(s.train.size(), 1u);
  EXPECT_TRUE(s.validation.empty());
  EXPECT_TRUE(s.test.empty());
  EXPECT_EQ(s.warnings.size(), 2u);
}

TEST(Split, BoundaryOrderIsChecked) {
  EXPECT_THROW(temporal_split({}, *parse_date("2022-03-01"), *parse_date("2022-03-01")), ArgumentError);
  EXPECT_THROW(temporal_split({}, *parse_date("2022-03-02"), *parse_date("2022-03-01")), ArgumentError);
}

TEST(Split, MonthBoundaries) {
  auto corpus = filter(generate_corpus({.reviews = 1000, .seed = 9}));
  const auto b1 = *parse_date("2022-02-01"), b2 = *parse_date("2022-03-01");
  auto s = temporal_split(corpus, b1, b2);
  EXPECT_EQ(s.train.size() + s.validation.size() + s.test.size(), corpus.size());
  for (const auto& r : s.train) {
    EXPECT_LT(r.posted_at, b1);
    EXPECT_GE(r.posted_at, *parse_date("2021-10-01"));
  }
  for (const auto& r : s.validation) {
    EXPECT_GE(r.posted_at, b1);
    EXPECT_LT(r.posted_at, b2);
  }
  for (const auto& r : s.test) {
    EXPECT_GE(r.posted_at, b2);
    EXPECT_LE(r.posted_at, *parse_date("2022-03-31"));
  }
}

TEST(Split, PartitionProperty) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Review> rs;
    const auto n = rng.below(40);
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto day = std::chrono::sys_days(*parse_date("2021-10-01")) + std::chrono::days(rng.below(182));
      rs.push_back(review("r" + std::to_string(i), "x", 1, format_date(Date(day))));
    }
    const auto b1 = Date(std::chrono::sys_days(*parse_date("2021-10-01")) + std::chrono::days(rng.below(100)));
    const auto b2 = Date(std::chrono::sys_days(b1) + std::chrono::days(1 + rng.below(80)));
    auto s = temporal_split(rs, b1, b2);
    ASSERT_EQ(s.train.size() + s.validation.size() + s.test.size(), rs.size());
    std::set<std::string> ids;
    for (auto* part : {&s.train, &s.validation, &s.test})
      for (const auto& r : *part) EXPECT_TRUE(ids.insert(r.id).second);
    for (const auto& t : s.train)
      for (const auto& v : s.validation) EXPECT_LT(t.posted_at, v.posted_at);
  }
}

TEST(Dates, StrictParsing) {
  EXPECT_TRUE(parse_date("2024-02-29"));
  EXPECT_FALSE(parse_date("2023-02-29"));
  EXPECT_FALSE(parse_date("2023-2-01"));
  EXPECT_FALSE(parse_date("2023-02-01x"));
  EXPECT_EQ(format_date(*parse_date("2021-10-01")), "2021-10-01");
}

TEST(Synth, HeavyTailedVotes) {
  auto corpus = filter(generate_corpus({.reviews = 5000, .seed = 1}));
  std::size_t zero = 0, prominent = 0;
  for (const auto& r : corpus) {
    zero += r.votes_30d == 0;
    prominent += r.votes_30d > 100;
  }
  const double n = static_cast<double>(corpus.size());
  EXPECT_GT(zero / n, 0.3);
  EXPECT_GT(prominent / n, 0.01);
  EXPECT_LT(prominent / n, 0.15);
}

TEST(Synth, SeedDeterminism) {
  EXPECT_EQ(generate_corpus({.reviews = 200, .seed = 4}), generate_corpus({.reviews = 200, .seed = 4}));
  EXPECT_NE(generate_corpus({.reviews = 200, .seed = 4}), generate_corpus({.reviews = 200, .seed = 5}));
}
