#pragma once

// Exact (flat) and coarse-quantized (IVF) vector search over review embeddings.
//
// Vectors are stored as contiguous row-major float32; distances accumulate in
// double. Results are ordered best-first with ties broken by insertion order,
// so an IVF search that probes every list reproduces the flat result exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "revprio/binio.hpp"
#include "revprio/error.hpp"
#include "revprio/rng.hpp"

namespace revprio {

enum class Metric : std::uint8_t { L2 = 0, InnerProduct = 1, Cosine = 2 };

inline std::string to_string(Metric m) {
  switch (m) {
    case Metric::L2: return "l2";
    case Metric::InnerProduct: return "ip";
    case Metric::Cosine: return "cosine";
  }
  return "?";
}

inline Metric parse_metric(std::string_view s) {
  if (s == "l2") return Metric::L2;
  if (s == "ip" || s == "inner_product") return Metric::InnerProduct;
  if (s == "cosine") return Metric::Cosine;
  throw ArgumentError("unknown metric '" + std::string(s) + "' (l2|ip|cosine)");
}

// Distance metrics rank ascending, similarity metrics descending.
inline bool is_distance(Metric m) { return m == Metric::L2; }

struct Neighbor {
  std::string id;
  double value = 0.0;  // L2 distance, or similarity score for ip/cosine
  int label = 0;
  std::size_t row = 0;

  bool operator==(const Neighbor&) const = default;
};

inline double l2_distance(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += diff * diff;
  }
  return std::sqrt(s);
}

inline double inner_product(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

inline double metric_value(Metric m, std::span<const float> q, std::span<const float> v) {
  switch (m) {
    case Metric::L2: return l2_distance(q, v);
    case Metric::InnerProduct: return inner_product(q, v);
    case Metric::Cosine: {
      const double nq = std::sqrt(inner_product(q, q)), nv = std::sqrt(inner_product(v, v));
      if (nq == 0.0 || nv == 0.0) return 0.0;
      return inner_product(q, v) / (nq * nv);
    }
  }
  return 0.0;
}

// True when (va, ra) ranks strictly before (vb, rb).
inline bool ranks_before(Metric m, double va, std::size_t ra, double vb, std::size_t rb) {
  if (va != vb) return is_distance(m) ? va < vb : va > vb;
  return ra < rb;
}

class FlatIndex {
 public:
  FlatIndex() = default;
  FlatIndex(std::size_t dim, Metric metric) : dim_(dim), metric_(metric) {}

  // Rows are taken from `embeddings`, one per id.
  static FlatIndex build(const std::vector<std::vector<float>>& embeddings, const std::vector<std::string>& ids,
                         const std::vector<int>& labels, Metric metric, std::size_t dim = 0) {
    if (embeddings.size() != ids.size() || ids.size() != labels.size())
      throw ArgumentError("embeddings, ids and labels must have equal lengths");
    if (!embeddings.empty()) dim = embeddings.front().size();
    FlatIndex idx(dim, metric);
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
      if (embeddings[i].size() != dim) throw ArgumentError("embedding dimension mismatch at row " + std::to_string(i));
      if (!seen.insert(ids[i]).second) throw ArgumentError("duplicate id '" + ids[i] + "'");
      idx.vectors_.insert(idx.vectors_.end(), embeddings[i].begin(), embeddings[i].end());
    }
    idx.ids_ = ids;
    idx.labels_ = labels;
    return idx;
  }

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  Metric metric() const noexcept { return metric_; }
  const std::vector<float>& vectors() const noexcept { return vectors_; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const std::vector<int>& labels() const noexcept { return labels_; }

  std::span<const float> row(std::size_t r) const noexcept { return {vectors_.data() + r * dim_, dim_}; }

  double value(std::span<const float> query, std::size_t r) const { return metric_value(metric_, query, row(r)); }

  Neighbor neighbor(std::size_t r, double v) const { return {ids_[r], v, labels_[r], r}; }

  void check_query(std::span<const float> query) const {
    if (query.size() != dim_)
      throw ArgumentError("query dimension " + std::to_string(query.size()) + " != index dimension " +
                          std::to_string(dim_));
  }

  bool operator==(const FlatIndex&) const = default;

 private:
  friend class IndexCodec;
  std::size_t dim_ = 0;
  Metric metric_ = Metric::L2;
  std::vector<float> vectors_;
  std::vector<std::string> ids_;
  std::vector<int> labels_;
};

namespace detail {

struct Candidate {
  double value;
  std::size_t row;
};

// Best k of the candidates in rank order.
inline std::vector<Neighbor> top_k(const FlatIndex& index, std::vector<Candidate> cands, std::size_t k) {
  const Metric m = index.metric();
  auto cmp = [m](const Candidate& a, const Candidate& b) { return ranks_before(m, a.value, a.row, b.value, b.row); };
  k = std::min(k, cands.size());
  std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(k), cands.end(), cmp);
  std::vector<Neighbor> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(index.neighbor(cands[i].row, cands[i].value));
  return out;
}

}  // namespace detail

inline std::vector<Neighbor> search_knn(const FlatIndex& index, std::span<const float> query, std::size_t k) {
  if (k < 1) throw ArgumentError("k must be >= 1");
  if (index.size() == 0) return {};
  index.check_query(query);
  std::vector<detail::Candidate> cands(index.size());
  for (std::size_t r = 0; r < index.size(); ++r) cands[r] = {index.value(query, r), r};
  return detail::top_k(index, std::move(cands), k);
}

// All stored vectors within L2 distance <= radius, in insertion order.
inline std::vector<Neighbor> search_radius(const FlatIndex& index, std::span<const float> query, double radius) {
  if (!is_distance(index.metric())) throw ArgumentError("radius search requires the l2 metric");
  if (!(radius >= 0.0)) throw ArgumentError("radius must be non-negative");
  if (index.size() == 0) return {};
  index.check_query(query);
  std::vector<Neighbor> out;
  for (std::size_t r = 0; r < index.size(); ++r) {
    const double v = index.value(query, r);
    if (v <= radius) out.push_back(index.neighbor(r, v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// IVF: k-means coarse quantizer over a flat store.

class IvfIndex {
 public:
  IvfIndex() = default;

  const FlatIndex& flat() const noexcept { return flat_; }
  std::size_t nlist() const noexcept { return lists_.size(); }
  const std::vector<float>& centroids() const noexcept { return centroids_; }
  const std::vector<std::vector<std::size_t>>& lists() const noexcept { return lists_; }

  std::span<const float> centroid(std::size_t c) const noexcept {
    return {centroids_.data() + c * flat_.dim(), flat_.dim()};
  }

  // Nearest centroid by L2; ties go to the lowest list number.
  std::size_t assign(std::span<const float> v) const {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < nlist(); ++c) {
      const double d = l2_distance(v, centroid(c));
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    return best;
  }

  // The nprobe lists whose centroids are closest to the query.
  std::vector<std::size_t> probe_order(std::span<const float> query, std::size_t nprobe) const {
    std::vector<detail::Candidate> cd(nlist());
    for (std::size_t c = 0; c < nlist(); ++c) cd[c] = {l2_distance(query, centroid(c)), c};
    std::partial_sort(cd.begin(), cd.begin() + static_cast<std::ptrdiff_t>(nprobe), cd.end(),
                      [](const auto& a, const auto& b) { return ranks_before(Metric::L2, a.value, a.row, b.value, b.row); });
    std::vector<std::size_t> out(nprobe);
    for (std::size_t i = 0; i < nprobe; ++i) out[i] = cd[i].row;
    return out;
  }

  void check_nprobe(std::size_t nprobe) const {
    if (nprobe < 1 || nprobe > nlist())
      throw ArgumentError("nprobe must lie in [1, " + std::to_string(nlist()) + "], got " + std::to_string(nprobe));
  }

  bool operator==(const IvfIndex&) const = default;

 private:
  friend class IndexCodec;
  friend IvfIndex build_ivf(FlatIndex, std::size_t, std::size_t, std::uint64_t);
  FlatIndex flat_;
  std::vector<float> centroids_;  // nlist x d
  std::vector<std::vector<std::size_t>> lists_;
};

// Lloyd's k-means with k-means++ seeding. Empty clusters keep their previous
// centroid. Lists are assigned against the final centroids, so every vector
// sits in the list of its nearest centroid.
inline IvfIndex build_ivf(FlatIndex flat, std::size_t nlist, std::size_t kmeans_iters, std::uint64_t seed) {
  const std::size_t n = flat.size(), d = flat.dim();
  if (n < 1) throw ArgumentError("cannot build an IVF index over an empty store");
  if (nlist < 1 || nlist > n)
    throw ArgumentError("nlist must lie in [1, n=" + std::to_string(n) + "], got " + std::to_string(nlist));
  Rng rng = Rng(seed).split("kmeans");
  IvfIndex ivf;
  ivf.flat_ = std::move(flat);
  const FlatIndex& f = ivf.flat_;
  ivf.centroids_.assign(nlist * d, 0.0f);
  ivf.lists_.assign(nlist, {});
  auto set_centroid = [&](std::size_t c, std::span<const float> v) {
    std::copy(v.begin(), v.end(), ivf.centroids_.begin() + static_cast<std::ptrdiff_t>(c * d));
  };

  // k-means++: first centre uniform, then proportional to squared distance.
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  set_centroid(0, f.row(static_cast<std::size_t>(rng.below(n))));
  for (std::size_t c = 1; c < nlist; ++c) {
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double dist = l2_distance(f.row(r), ivf.centroid(c - 1));
      d2[r] = std::min(d2[r], dist * dist);
      total += d2[r];
    }
    std::size_t pick = static_cast<std::size_t>(rng.below(n));
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (std::size_t r = 0; r < n; ++r) {
        target -= d2[r];
        if (target < 0.0 || r + 1 == n) {
          pick = r;
          break;
        }
      }
    }
    set_centroid(c, f.row(pick));
  }

  std::vector<std::size_t> assignment(n);
  std::vector<double> sums(nlist * d);
  std::vector<std::size_t> counts(nlist);
  for (std::size_t it = 0; it < kmeans_iters; ++it) {
    for (std::size_t r = 0; r < n; ++r) assignment[r] = ivf.assign(f.row(r));
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t c = assignment[r];
      ++counts[c];
      auto v = f.row(r);
      for (std::size_t i = 0; i < d; ++i) sums[c * d + i] += v[i];
    }
    for (std::size_t c = 0; c < nlist; ++c)
      if (counts[c] > 0)
        for (std::size_t i = 0; i < d; ++i)
          ivf.centroids_[c * d + i] = static_cast<float>(sums[c * d + i] / static_cast<double>(counts[c]));
  }
  for (std::size_t r = 0; r < n; ++r) ivf.lists_[ivf.assign(f.row(r))].push_back(r);
  return ivf;
}

struct IvfSearchResult {
  std::vector<Neighbor> neighbors;
  double lists_scanned_fraction = 0.0;
};

inline IvfSearchResult search_ivf(const IvfIndex& ivf, std::span<const float> query, std::size_t k,
                                  std::size_t nprobe) {
  if (k < 1) throw ArgumentError("k must be >= 1");
  ivf.check_nprobe(nprobe);
  const FlatIndex& f = ivf.flat();
  f.check_query(query);
  std::vector<detail::Candidate> cands;
  for (std::size_t c : ivf.probe_order(query, nprobe))
    for (std::size_t r : ivf.lists()[c]) cands.push_back({f.value(query, r), r});
  return {detail::top_k(f, std::move(cands), k),
          static_cast<double>(nprobe) / static_cast<double>(ivf.nlist())};
}

// Radius search restricted to the probed lists; insertion order like the flat variant.
inline IvfSearchResult search_radius_ivf(const IvfIndex& ivf, std::span<const float> query, double radius,
                                         std::size_t nprobe) {
  const FlatIndex& f = ivf.flat();
  if (!is_distance(f.metric())) throw ArgumentError("radius search requires the l2 metric");
  if (!(radius >= 0.0)) throw ArgumentError("radius must be non-negative");
  ivf.check_nprobe(nprobe);
  f.check_query(query);
  std::vector<std::size_t> rows;
  for (std::size_t c : ivf.probe_order(query, nprobe)) rows.insert(rows.end(), ivf.lists()[c].begin(), ivf.lists()[c].end());
  std::sort(rows.begin(), rows.end());
  IvfSearchResult res;
  res.lists_scanned_fraction = static_cast<double>(nprobe) / static_cast<double>(ivf.nlist());
  for (std::size_t r : rows) {
    const double v = f.value(query, r);
    if (v <= radius) res.neighbors.push_back(f.neighbor(r, v));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Binary format (little-endian):
//   "RPIX" | u16 version | u8 metric | u64 n | u32 d | n*d f32 vectors
//   | n ids (u32 length + UTF-8 bytes) | n i32 labels
// IVF files continue with
//   u32 nlist | nlist*d f32 centroids | (nlist+1) u64 list offsets | n u64 rows

inline constexpr std::uint16_t kIndexFormatVersion = 1;

class IndexCodec {
 public:
  static void write_flat(binio::Writer& w, const FlatIndex& f) {
    w.put_bytes("RPIX");
    w.put(kIndexFormatVersion);
    w.put(static_cast<std::uint8_t>(f.metric_));
    w.put(static_cast<std::uint64_t>(f.size()));
    w.put(static_cast<std::uint32_t>(f.dim_));
    for (float v : f.vectors_) w.put_f32(v);
    for (const auto& id : f.ids_) w.put_string(id);
    for (int l : f.labels_) w.put(static_cast<std::uint32_t>(l));
  }

  static void write_ivf(binio::Writer& w, const IvfIndex& ivf) {
    write_flat(w, ivf.flat_);
    w.put(static_cast<std::uint32_t>(ivf.nlist()));
    for (float v : ivf.centroids_) w.put_f32(v);
    std::uint64_t offset = 0;
    w.put(offset);
    for (const auto& l : ivf.lists_) w.put(offset += l.size());
    for (const auto& l : ivf.lists_)
      for (std::size_t r : l) w.put(static_cast<std::uint64_t>(r));
  }

  static FlatIndex read_flat(binio::Reader& r) {
    if (r.remaining() < 4 || r.get_bytes(4) != "RPIX") throw FormatError(r.origin() + ": bad magic, not an index file");
    if (r.get<std::uint16_t>() != kIndexFormatVersion) throw FormatError(r.origin() + ": unsupported index version");
    const auto metric = r.get<std::uint8_t>();
    if (metric > 2) throw FormatError(r.origin() + ": unknown metric code");
    const auto n = r.get<std::uint64_t>();
    const auto d = r.get<std::uint32_t>();
    r.need(n * d * 4);
    FlatIndex f(d, static_cast<Metric>(metric));
    f.vectors_.resize(n * d);
    for (auto& v : f.vectors_) v = r.get_f32();
    r.need(n * 4);
    f.ids_.resize(n);
    for (auto& id : f.ids_) id = r.get_string();
    r.need(n * 4);
    f.labels_.resize(n);
    for (auto& l : f.labels_) l = static_cast<int>(r.get<std::uint32_t>());
    return f;
  }

  static IvfIndex read_ivf(binio::Reader& r) {
    IvfIndex ivf;
    ivf.flat_ = read_flat(r);
    const std::size_t n = ivf.flat_.size(), d = ivf.flat_.dim();
    if (r.at_end()) throw FormatError(r.origin() + ": index file has no IVF section");
    const auto nlist = r.get<std::uint32_t>();
    if (nlist < 1 || nlist > n) throw FormatError(r.origin() + ": invalid nlist");
    r.need(std::size_t{nlist} * d * 4);
    ivf.centroids_.resize(std::size_t{nlist} * d);
    for (auto& v : ivf.centroids_) v = r.get_f32();
    std::vector<std::uint64_t> offsets(nlist + 1);
    for (auto& o : offsets) o = r.get<std::uint64_t>();
    if (offsets.front() != 0 || offsets.back() != n || !std::is_sorted(offsets.begin(), offsets.end()))
      throw FormatError(r.origin() + ": invalid IVF list offsets");
    ivf.lists_.assign(nlist, {});
    for (std::size_t c = 0; c < nlist; ++c)
      for (auto i = offsets[c]; i < offsets[c + 1]; ++i) {
        const auto row = r.get<std::uint64_t>();
        if (row >= n) throw FormatError(r.origin() + ": IVF row reference out of range");
        ivf.lists_[c].push_back(static_cast<std::size_t>(row));
      }
    return ivf;
  }
};

inline void persist(const FlatIndex& index, const std::string& path) {
  binio::Writer w;
  IndexCodec::write_flat(w, index);
  w.save(path);
}

inline void persist(const IvfIndex& index, const std::string& path) {
  binio::Writer w;
  IndexCodec::write_ivf(w, index);
  w.save(path);
}

inline FlatIndex load_flat(const std::string& path) {
  auto r = binio::Reader::from_file(path);
  auto f = IndexCodec::read_flat(r);
  if (!r.at_end()) throw FormatError(path + ": unexpected trailing data (IVF index? use load_ivf)");
  return f;
}

inline IvfIndex load_ivf(const std::string& path) {
  auto r = binio::Reader::from_file(path);
  auto ivf = IndexCodec::read_ivf(r);
  if (!r.at_end()) throw FormatError(path + ": unexpected trailing data");
  return ivf;
}

}  // namespace revprio
