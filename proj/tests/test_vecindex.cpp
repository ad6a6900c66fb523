#include <fstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "revprio/vecindex.hpp"
#include "support.hpp"

using namespace revprio;
using revprio::testing::TempDir;

namespace {

struct Data {
  std::vector<std::vector<float>> rows;
  std::vector<float> flat;
  std::vector<std::string> ids;
  std::vector<int> labels;
};

// Values on a coarse grid so exact distance ties actually occur.
Data make_data(std::size_t n, std::size_t d, Rng& rng, bool grid = false) {
  Data out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> v(d);
    for (auto& x : v) x = grid ? float(rng.below(3)) : float(rng.uniform(-1, 1));
    out.flat.insert(out.flat.end(), v.begin(), v.end());
    out.rows.push_back(std::move(v));
    out.ids.push_back("v" + std::to_string(i));
    out.labels.push_back(int(rng.below(5)));
  }
  return out;
}

std::vector<float> random_query(std::size_t d, Rng& rng, bool grid = false) {
  std::vector<float> q(d);
  for (auto& x : q) x = grid ? float(rng.below(3)) : float(rng.uniform(-1, 1));
  return q;
}

void expect_same(const std::vector<Neighbor>& got, const std::vector<oracle::Hit>& want, const Data& data) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_EQ(got[i].row, want[i].row) << "rank " << i;
    EXPECT_EQ(got[i].value, want[i].value);
    EXPECT_EQ(got[i].id, data.ids[want[i].row]);
    EXPECT_EQ(got[i].label, data.labels[want[i].row]);
  }
}

FlatIndex clusters(std::size_t per_cluster, std::size_t count, Rng& rng, std::vector<std::vector<float>>* centres) {
  std::vector<std::vector<float>> rows;
  std::vector<std::string> ids;
  std::vector<int> labels;
  for (std::size_t c = 0; c < count; ++c) {
    std::vector<float> centre(4, 0.0f);
    centre[c % 4] = 100.0f * float(1 + c / 4);
    if (centres) centres->push_back(centre);
    for (std::size_t i = 0; i < per_cluster; ++i) {
      auto v = centre;
      for (auto& x : v) x += float(rng.uniform(-1, 1));
      rows.push_back(v);
      ids.push_back("c" + std::to_string(c) + "_" + std::to_string(i));
      labels.push_back(int(c));
    }
  }
  return FlatIndex::build(rows, ids, labels, Metric::L2);
}

}  // namespace

TEST(Flat, SelfMatch) {
  auto idx = FlatIndex::build({{0, 0}, {1, 0}, {0, 1}}, {"a", "b", "c"}, {0, 1, 1}, Metric::L2);
  EXPECT_EQ(idx.size(), 3u);
  const std::vector<float> q{1, 0};
  auto hits = search_knn(idx, q, 1);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].id, "b");
  EXPECT_EQ(hits[0].value, 0.0);
}

TEST(Flat, EmptyIndex) {
  auto idx = FlatIndex::build({}, {}, {}, Metric::L2, 4);
  const std::vector<float> q{1, 0, 0, 0};
  EXPECT_TRUE(search_knn(idx, q, 3).empty());
  EXPECT_TRUE(search_radius(idx, q, 2.0).empty());
}

TEST(Flat, BuildErrors) {
  EXPECT_THROW(FlatIndex::build({{0, 0}, {1, 0}}, {"a", "a"}, {0, 0}, Metric::L2), ArgumentError);
  EXPECT_THROW(FlatIndex::build({{0, 0}, {1}}, {"a", "b"}, {0, 0}, Metric::L2), ArgumentError);
  EXPECT_THROW(FlatIndex::build({{0, 0}}, {"a", "b"}, {0, 0}, Metric::L2), ArgumentError);
  auto idx = FlatIndex::build({{0, 0}}, {"a"}, {0}, Metric::L2);
  EXPECT_THROW(search_knn(idx, std::vector<float>{1, 2, 3}, 1), ArgumentError);
  EXPECT_THROW(search_knn(idx, std::vector<float>{1, 2}, 0), ArgumentError);
}

TEST(Flat, NearestOfTwo) {
  auto idx = FlatIndex::build({{0}, {10}}, {"zero", "ten"}, {0, 1}, Metric::L2);
  EXPECT_EQ(search_knn(idx, std::vector<float>{1}, 1).at(0).id, "zero");
}

TEST(Flat, KLargerThanNReturnsAll) {
  auto idx = FlatIndex::build({{0}, {10}, {5}}, {"a", "b", "c"}, {0, 1, 0}, Metric::L2);
  auto hits = search_knn(idx, std::vector<float>{4}, 10);
  ASSERT_EQ(hits.size(), 3u);
  EXPECT_EQ(hits[0].id, "c");
  EXPECT_EQ(hits[1].id, "a");
  EXPECT_EQ(hits[2].id, "b");
}

TEST(Flat, TiesFollowInsertionOrder) {
  auto idx = FlatIndex::build({{1}, {-1}, {1}}, {"a", "b", "c"}, {0, 0, 0}, Metric::L2);
  auto hits = search_knn(idx, std::vector<float>{0}, 3);
  EXPECT_EQ(hits[0].id, "a");
  EXPECT_EQ(hits[1].id, "b");
  EXPECT_EQ(hits[2].id, "c");
}

TEST(Flat, CosineEqualsInnerProductOnUnitVectors) {
  Rng rng(4);
  auto data = make_data(200, 8, rng);
  for (auto& r : data.rows) {
    double n = 0;
    for (float x : r) n += double(x) * x;
    for (auto& x : r) x = float(x / std::sqrt(n));
  }
  auto cos = FlatIndex::build(data.rows, data.ids, data.labels, Metric::Cosine);
  auto ip = FlatIndex::build(data.rows, data.ids, data.labels, Metric::InnerProduct);
  for (int t = 0; t < 20; ++t) {
    auto q = random_query(8, rng);
    auto a = search_knn(cos, q, 10), b = search_knn(ip, q, 10);
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(a[i].row, b[i].row);
  }
}

TEST(Flat, MatchesBruteForceAllMetrics) {
  Rng rng(1);
  for (Metric m : {Metric::L2, Metric::InnerProduct, Metric::Cosine})
    for (bool grid : {false, true}) {
      auto data = make_data(300, 6, rng, grid);
      auto idx = FlatIndex::build(data.rows, data.ids, data.labels, m);
      for (int t = 0; t < 30; ++t) {
        auto q = random_query(6, rng, grid);
        const std::size_t k = 1 + rng.below(40);
        expect_same(search_knn(idx, q, k), oracle::knn(data.flat, 6, m, q, k), data);
      }
    }
}

TEST(Radius, Threshold) {
  auto idx = FlatIndex::build({{0.5f}, {1.9f}, {3.0f}}, {"a", "b", "c"}, {0, 1, 1}, Metric::L2);
  auto hits = search_radius(idx, std::vector<float>{0}, 2.0);
  ASSERT_EQ(hits.size(), 2u);
  EXPECT_EQ(hits[0].id, "a");
  EXPECT_EQ(hits[1].id, "b");
}

TEST(Radius, ZeroRadiusFindsExactMatch) {
  auto idx = FlatIndex::build({{0.5f, 1}, {1.9f, 2}}, {"a", "b"}, {0, 1}, Metric::L2);
  auto hits = search_radius(idx, std::vector<float>{1.9f, 2}, 0.0);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].id, "b");
}

TEST(Radius, SimilarityMetricRejected) {
  auto idx = FlatIndex::build({{1, 0}}, {"a"}, {0}, Metric::InnerProduct);
  EXPECT_THROW(search_radius(idx, std::vector<float>{1, 0}, 1.0), ArgumentError);
  auto l2 = FlatIndex::build({{1, 0}}, {"a"}, {0}, Metric::L2);
  EXPECT_THROW(search_radius(l2, std::vector<float>{1, 0}, -1.0), ArgumentError);
}

TEST(Radius, MatchesBruteForce) {
  Rng rng(2);
  auto data = make_data(400, 5, rng);
  auto idx = FlatIndex::build(data.rows, data.ids, data.labels, Metric::L2);
  for (int t = 0; t < 50; ++t) {
    auto q = random_query(5, rng);
    const double r = rng.uniform(0, 2);
    expect_same(search_radius(idx, q, r), oracle::radius(data.flat, 5, q, r), data);
  }
}

TEST(Ivf, SingleListEqualsFlat) {
  Rng rng(3);
  auto data = make_data(100, 4, rng);
  auto flat = FlatIndex::build(data.rows, data.ids, data.labels, Metric::L2);
  auto ivf = build_ivf(flat, 1, 5, 1);
  ASSERT_EQ(ivf.lists().size(), 1u);
  EXPECT_EQ(ivf.lists()[0].size(), 100u);
  for (int t = 0; t < 10; ++t) {
    auto q = random_query(4, rng);
    EXPECT_EQ(search_ivf(ivf, q, 7, 1).neighbors, search_knn(flat, q, 7));
  }
}

TEST(Ivf, SeparatedClustersGetOwnLists) {
  Rng rng(5);
  auto flat = clusters(30, 2, rng, nullptr);
  auto ivf = build_ivf(flat, 2, 10, 7);
  for (const auto& list : ivf.lists()) {
    ASSERT_EQ(list.size(), 30u);
    for (std::size_t r : list) EXPECT_EQ(flat.labels()[r], flat.labels()[list[0]]);
  }
}

TEST(Ivf, AssignmentInvariantAndDeterminism) {
  Rng rng(6);
  auto data = make_data(500, 8, rng);
  auto flat = FlatIndex::build(data.rows, data.ids, data.labels, Metric::L2);
  auto ivf = build_ivf(flat, 12, 15, 3);
  std::vector<int> seen(500, 0);
  for (std::size_t c = 0; c < ivf.nlist(); ++c)
    for (std::size_t r : ivf.lists()[c]) {
      ++seen[r];
      EXPECT_EQ(ivf.assign(flat.row(r)), c);
    }
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_TRUE(build_ivf(flat, 12, 15, 3) == ivf);
}

TEST(Ivf, FullProbeEqualsFlatIncludingTies) {
  Rng rng(7);
  auto data = make_data(300, 3, rng, true);
  auto flat = FlatIndex::build(data.rows, data.ids, data.labels, Metric::L2);
  auto ivf = build_ivf(flat, 9, 10, 2);
  for (int t = 0; t < 50; ++t) {
    auto q = random_query(3, rng, true);
    auto res = search_ivf(ivf, q, 10, ivf.nlist());
    EXPECT_EQ(res.neighbors, search_knn(flat, q, 10));
    EXPECT_EQ(res.lists_scanned_fraction, 1.0);
    EXPECT_EQ(search_radius_ivf(ivf, q, 1.5, ivf.nlist()).neighbors, search_radius(flat, q, 1.5));
  }
}

TEST(Ivf, OneProbeRecallOnSeparatedClusters) {
  Rng rng(8);
  std::vector<std::vector<float>> centres;
  auto flat = clusters(25, 4, rng, &centres);
  auto ivf = build_ivf(flat, 4, 10, 5);
  for (const auto& c : centres) {
    auto approx = search_ivf(ivf, c, 10, 1);
    EXPECT_EQ(approx.neighbors, search_knn(flat, c, 10));
    EXPECT_EQ(approx.lists_scanned_fraction, 0.25);
  }
}

TEST(Ivf, Errors) {
  Rng rng(9);
  auto data = make_data(5, 2, rng);
  auto flat = FlatIndex::build(data.rows, data.ids, data.labels, Metric::L2);
  EXPECT_THROW(build_ivf(flat, 6, 5, 1), ArgumentError);
  EXPECT_THROW(build_ivf(flat, 0, 5, 1), ArgumentError);
  EXPECT_THROW(build_ivf(FlatIndex::build({}, {}, {}, Metric::L2, 2), 1, 5, 1), ArgumentError);
  auto ivf = build_ivf(flat, 2, 5, 1);
  const std::vector<float> q{0, 0};
  EXPECT_THROW(search_ivf(ivf, q, 1, 0), ArgumentError);
  EXPECT_THROW(search_ivf(ivf, q, 1, 3), ArgumentError);
}

TEST(Persist, RoundTrips) {
  TempDir dir("idx");
  Rng rng(10);
  auto data = make_data(120, 7, rng);
  for (Metric m : {Metric::L2, Metric::InnerProduct, Metric::Cosine}) {
    auto flat = FlatIndex::build(data.rows, data.ids, data.labels, m);
    persist(flat, dir.file("f.rpix"));
    EXPECT_TRUE(load_flat(dir.file("f.rpix")) == flat);
  }
  auto ivf = build_ivf(FlatIndex::build(data.rows, data.ids, data.labels, Metric::L2), 6, 10, 1);
  persist(ivf, dir.file("i.rpix"));
  EXPECT_TRUE(load_ivf(dir.file("i.rpix")) == ivf);
  EXPECT_THROW(load_flat(dir.file("i.rpix")), FormatError);
  auto empty = FlatIndex::build({}, {}, {}, Metric::L2, 3);
  persist(empty, dir.file("e.rpix"));
  EXPECT_TRUE(load_flat(dir.file("e.rpix")) == empty);
  EXPECT_THROW(load_ivf(dir.file("e.rpix")), FormatError);
}

TEST(Persist, CorruptFilesFailClosed) {
  TempDir dir("idx");
  Rng rng(11);
  auto data = make_data(20, 3, rng);
  auto ivf = build_ivf(FlatIndex::build(data.rows, data.ids, data.labels, Metric::L2), 3, 5, 1);
  persist(ivf, dir.file("i.rpix"));
  std::ifstream in(dir.file("i.rpix"), std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), {});
  auto write = [&](const std::string& content) {
    std::ofstream(dir.file("bad.rpix"), std::ios::binary | std::ios::trunc) << content;
    return dir.file("bad.rpix");
  };
  for (std::size_t cut : {std::size_t(0), std::size_t(3), std::size_t(10), bytes.size() / 2, bytes.size() - 1})
    EXPECT_THROW(load_ivf(write(bytes.substr(0, cut))), FormatError) << cut;
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(load_ivf(write(bad_magic)), FormatError);
  std::string bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_THROW(load_ivf(write(bad_version)), FormatError);
}
