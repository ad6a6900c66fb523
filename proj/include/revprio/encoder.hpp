#pragma once

// Small sentence encoder.
//
//   token vector   x_t = e_t + tanh(e_t W1 + b1) W2 + b2     (e_t = embedding row)
//   sentence       s   = mean_t x_t
//   output         u   = s / ||s||                            (when normalize is on)
//
// W2 and b2 start at zero, so a fresh encoder is mean pooling of embeddings.
// The phase-one denoising head predicts dropped tokens from the corrupted
// input through pretext_out (d x V) plus its own bias (V). Gradients are derived by hand; everything
// is templated on the scalar type so gradient checks can run in double.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "revprio/binio.hpp"
#include "revprio/embedding.hpp"
#include "revprio/error.hpp"
#include "revprio/rng.hpp"
#include "revprio/textprep.hpp"

namespace revprio {

template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{}) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  T operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

struct EncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t dim = 64;
  std::size_t hidden = 128;
  bool normalize = true;

  bool operator==(const EncoderConfig&) const = default;
};

// Pooled sentence vectors shrink roughly as scale / sqrt(tokens); much below
// this the shared output bias outgrows them during training and normalized
// embeddings collapse onto one direction.
inline constexpr double kDefaultEmbeddingScale = 0.5;

template <typename T>
struct EncoderParams {
  EncoderConfig config;
  Matrix<T> embedding;    // V x d
  Matrix<T> w1;           // d x h
  std::vector<T> b1;      // h
  Matrix<T> w2;           // h x d
  std::vector<T> b2;      // d
  Matrix<T> pretext_out;  // d x V
  std::vector<T> pretext_bias;  // V

  static EncoderParams zeros(const EncoderConfig& cfg) {
    if (cfg.vocab_size == 0 || cfg.dim == 0 || cfg.hidden == 0)
      throw ArgumentError("encoder dimensions must be positive");
    EncoderParams p;
    p.config = cfg;
    p.embedding = Matrix<T>(cfg.vocab_size, cfg.dim);
    p.w1 = Matrix<T>(cfg.dim, cfg.hidden);
    p.b1.assign(cfg.hidden, T{});
    p.w2 = Matrix<T>(cfg.hidden, cfg.dim);
    p.b2.assign(cfg.dim, T{});
    p.pretext_out = Matrix<T>(cfg.dim, cfg.vocab_size);
    p.pretext_bias.assign(cfg.vocab_size, T{});
    return p;
  }

  // Embeddings ~ U(-scale, scale); W1 and the pretext head Glorot-uniform;
  // W2, b1, b2 and the pretext bias zero.
  static EncoderParams initialize(const EncoderConfig& cfg, const Rng& seed_stream,
                                  double embedding_scale = kDefaultEmbeddingScale) {
    auto p = zeros(cfg);
    Rng rng = seed_stream.split("encoder-init");
    for (auto& v : p.embedding.data()) v = static_cast<T>(rng.uniform(-embedding_scale, embedding_scale));
    const double a1 = std::sqrt(6.0 / static_cast<double>(cfg.dim + cfg.hidden));
    for (auto& v : p.w1.data()) v = static_cast<T>(rng.uniform(-a1, a1));
    const double a2 = std::sqrt(6.0 / static_cast<double>(cfg.dim + cfg.vocab_size));
    for (auto& v : p.pretext_out.data()) v = static_cast<T>(rng.uniform(-a2, a2));
    return p;
  }

  // Visits every tensor in a fixed order as a flat span.
  template <typename F>
  void for_each_tensor(F&& f) {
    f(std::span<T>(embedding.data()));
    f(std::span<T>(w1.data()));
    f(std::span<T>(b1));
    f(std::span<T>(w2.data()));
    f(std::span<T>(b2));
    f(std::span<T>(pretext_out.data()));
    f(std::span<T>(pretext_bias));
  }

  template <typename F>
  void for_each_tensor(F&& f) const {
    const_cast<EncoderParams*>(this)->for_each_tensor(
        [&](std::span<T> s) { f(std::span<const T>(s.data(), s.size())); });
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_tensor([&](std::span<const T> s) { n += s.size(); });
    return n;
  }

  // Flat coordinate access across all tensors (same order as for_each_tensor).
  T& coordinate(std::size_t index) {
    T* found = nullptr;
    for_each_tensor([&](std::span<T> s) {
      if (!found && index < s.size()) found = &s[index];
      if (!found) index -= s.size();
    });
    if (!found) throw ArgumentError("parameter coordinate out of range");
    return *found;
  }

  void set_zero() {
    for_each_tensor([](std::span<T> s) { std::fill(s.begin(), s.end(), T{}); });
  }

  bool all_finite() const {
    bool ok = true;
    for_each_tensor([&](std::span<const T> s) {
      for (T v : s) ok = ok && std::isfinite(v);
    });
    return ok;
  }

  template <typename U>
  EncoderParams<U> cast() const {
    auto out = EncoderParams<U>::zeros(config);
    std::vector<std::span<const T>> src;
    for_each_tensor([&](std::span<const T> s) { src.push_back(s); });
    std::size_t k = 0;
    out.for_each_tensor([&](std::span<U> dst) {
      std::transform(src[k].begin(), src[k].end(), dst.begin(), [](T v) { return static_cast<U>(v); });
      ++k;
    });
    return out;
  }

  bool operator==(const EncoderParams&) const = default;
};

// Applies f(dst_span, src_span) over corresponding tensors of two parameter sets.
template <typename T, typename F>
void zip_tensors(EncoderParams<T>& dst, const EncoderParams<T>& src, F&& f) {
  std::vector<std::span<const T>> spans;
  src.for_each_tensor([&](std::span<const T> s) { spans.push_back(s); });
  std::size_t k = 0;
  dst.for_each_tensor([&](std::span<T> d) { f(d, spans[k++]); });
}

// Intermediate values of one sentence's forward pass, kept for backprop.
template <typename T>
struct SentenceForward {
  std::vector<TokenId> ids;
  Matrix<T> hidden;  // n x h, tanh activations
  Matrix<T> tokens;  // n x d, x_t
  std::vector<T> pooled;
  std::vector<T> output;
  T norm = T{1};
};

namespace detail {

template <typename T>
void check_ids(const EncoderParams<T>& p, std::span<const TokenId> ids) {
  if (ids.empty()) throw ArgumentError("cannot encode an empty token sequence");
  for (TokenId id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= p.config.vocab_size)
      throw ArgumentError("token id " + std::to_string(id) + " outside vocabulary of size " +
                          std::to_string(p.config.vocab_size));
}

}  // namespace detail

template <typename T>
void token_forward(const EncoderParams<T>& p, TokenId id, std::span<T> hidden, std::span<T> out) {
  const std::size_t d = p.config.dim, h = p.config.hidden;
  auto e = p.embedding.row(static_cast<std::size_t>(id));
  std::copy(p.b1.begin(), p.b1.end(), hidden.begin());
  for (std::size_t i = 0; i < d; ++i) {
    const T ei = e[i];
    auto w = p.w1.row(i);
    for (std::size_t k = 0; k < h; ++k) hidden[k] += ei * w[k];
  }
  for (std::size_t k = 0; k < h; ++k) hidden[k] = std::tanh(hidden[k]);
  for (std::size_t i = 0; i < d; ++i) out[i] = e[i] + p.b2[i];
  for (std::size_t k = 0; k < h; ++k) {
    const T zk = hidden[k];
    if (zk == T{}) continue;
    auto w = p.w2.row(k);
    for (std::size_t i = 0; i < d; ++i) out[i] += zk * w[i];
  }
}

// Backprop of one token: accumulates into grads given dL/dx_t.
template <typename T>
void token_backward(const EncoderParams<T>& p, TokenId id, std::span<const T> hidden, std::span<const T> d_out,
                    EncoderParams<T>& grads) {
  const std::size_t d = p.config.dim, h = p.config.hidden;
  std::vector<T> d_pre(h);
  for (std::size_t k = 0; k < h; ++k) {
    auto w = p.w2.row(k);
    auto gw = grads.w2.row(k);
    T dz = T{};
    for (std::size_t i = 0; i < d; ++i) {
      gw[i] += hidden[k] * d_out[i];
      dz += d_out[i] * w[i];
    }
    d_pre[k] = dz * (T{1} - hidden[k] * hidden[k]);
    grads.b1[k] += d_pre[k];
  }
  for (std::size_t i = 0; i < d; ++i) grads.b2[i] += d_out[i];
  auto e = p.embedding.row(static_cast<std::size_t>(id));
  auto ge = grads.embedding.row(static_cast<std::size_t>(id));
  for (std::size_t i = 0; i < d; ++i) {
    auto w = p.w1.row(i);
    auto gw = grads.w1.row(i);
    T de = d_out[i];
    for (std::size_t k = 0; k < h; ++k) {
      gw[k] += e[i] * d_pre[k];
      de += d_pre[k] * w[k];
    }
    ge[i] += de;
  }
}

template <typename T>
SentenceForward<T> sentence_forward(const EncoderParams<T>& p, std::span<const TokenId> ids) {
  detail::check_ids(p, ids);
  const std::size_t n = ids.size(), d = p.config.dim;
  SentenceForward<T> f;
  f.ids.assign(ids.begin(), ids.end());
  f.hidden = Matrix<T>(n, p.config.hidden);
  f.tokens = Matrix<T>(n, d);
  f.pooled.assign(d, T{});
  for (std::size_t t = 0; t < n; ++t) {
    token_forward(p, ids[t], f.hidden.row(t), f.tokens.row(t));
    auto x = f.tokens.row(t);
    for (std::size_t i = 0; i < d; ++i) f.pooled[i] += x[i];
  }
  const T inv_n = T{1} / static_cast<T>(n);
  for (auto& v : f.pooled) v *= inv_n;
  f.output = f.pooled;
  if (p.config.normalize) {
    T sq = T{};
    for (T v : f.pooled) sq += v * v;
    f.norm = std::sqrt(sq);
    if (f.norm > T{}) {
      for (auto& v : f.output) v /= f.norm;
    }
  }
  return f;
}

// Backprop from dL/du through normalization, pooling and the token MLP.
template <typename T>
void sentence_backward(const EncoderParams<T>& p, const SentenceForward<T>& f, std::span<const T> d_output,
                       EncoderParams<T>& grads) {
  const std::size_t n = f.ids.size(), d = p.config.dim;
  std::vector<T> d_pooled(d_output.begin(), d_output.end());
  if (p.config.normalize && f.norm > T{}) {
    T proj = T{};
    for (std::size_t i = 0; i < d; ++i) proj += f.output[i] * d_output[i];
    for (std::size_t i = 0; i < d; ++i) d_pooled[i] = (d_output[i] - f.output[i] * proj) / f.norm;
  }
  const T inv_n = T{1} / static_cast<T>(n);
  for (auto& v : d_pooled) v *= inv_n;
  for (std::size_t t = 0; t < n; ++t) token_backward<T>(p, f.ids[t], f.hidden.row(t), d_pooled, grads);
}

template <typename T>
std::vector<T> encode_values(const EncoderParams<T>& p, std::span<const TokenId> ids) {
  return sentence_forward(p, ids).output;
}

inline EmbeddingVector encode(const EncoderParams<float>& p, std::span<const TokenId> ids,
                              std::optional<std::string> review_id = std::nullopt) {
  return {encode_values(p, ids), std::move(review_id)};
}

// ---------------------------------------------------------------------------
// Denoising pretext head.
//
// For each dropped original position j the representation is
//   r_j = s + c_j
// where s is the mean token vector of the corrupted input and c_j is the mean
// of the sentinel vector standing for j's span and the surviving tokens within
// kContextWindow original positions of j. Logits are r_j * pretext_out +
// pretext_bias and the loss is the mean softmax cross-entropy against the
// dropped token id.

inline constexpr std::size_t kContextWindow = 2;

namespace detail {

// Input positions contributing to each dropped position's context, and the
// dropped token ids in ascending position order.
struct PretextLayout {
  std::vector<std::vector<std::size_t>> context;
  std::vector<TokenId> targets;
};

inline PretextLayout pretext_layout(const CorruptedExample& ex) {
  const std::size_t dropped = ex.dropped_positions.size();
  if (ex.target_ids.size() < dropped) throw ArgumentError("malformed corrupted example");
  const std::size_t spans = ex.target_ids.size() - dropped;
  if (ex.input_ids.size() < spans) throw ArgumentError("malformed corrupted example");
  const std::size_t length = ex.input_ids.size() - spans + dropped;

  std::vector<bool> is_dropped(length, false);
  for (std::size_t pos : ex.dropped_positions) {
    if (pos >= length) throw ArgumentError("malformed corrupted example");
    is_dropped[pos] = true;
  }
  // Original position -> input position; every position of a span maps to its sentinel.
  std::vector<std::size_t> input_pos(length);
  std::size_t in = 0;
  for (std::size_t pos = 0; pos < length; ++pos) {
    const bool continues_span = is_dropped[pos] && pos > 0 && is_dropped[pos - 1];
    input_pos[pos] = continues_span ? input_pos[pos - 1] : in++;
  }

  PretextLayout layout;
  layout.context.resize(dropped);
  std::size_t t = 0;
  for (std::size_t j = 0; j < dropped; ++j) {
    const std::size_t pos = ex.dropped_positions[j];
    if (pos == 0 || !is_dropped[pos - 1]) ++t;  // skip the span's sentinel
    if (t >= ex.target_ids.size()) throw ArgumentError("malformed corrupted example");
    layout.targets.push_back(ex.target_ids[t++]);

    auto& ctx = layout.context[j];
    ctx.push_back(input_pos[pos]);
    const std::size_t lo = pos >= kContextWindow ? pos - kContextWindow : 0;
    const std::size_t hi = std::min(length - 1, pos + kContextWindow);
    for (std::size_t q = lo; q <= hi; ++q)
      if (!is_dropped[q]) ctx.push_back(input_pos[q]);
  }
  return layout;
}

}  // namespace detail

// Loss of one corrupted example; accumulates scale * dL/dtheta into grads when
// given. Examples without dropped positions have loss 0.
template <typename T>
T pretext_loss(const EncoderParams<T>& p, const CorruptedExample& ex, EncoderParams<T>* grads = nullptr,
               T scale = T{1}) {
  if (ex.dropped_positions.empty()) return T{};
  const auto layout = detail::pretext_layout(ex);
  const auto f = sentence_forward(p, ex.input_ids);
  const std::size_t n = f.ids.size(), d = p.config.dim, V = p.config.vocab_size;
  const std::size_t m = layout.targets.size();
  Matrix<T> d_tokens(n, d);
  std::vector<T> r(d), logits(V), dr(d);
  T total = T{};
  const T inv_m = T{1} / static_cast<T>(m);
  for (std::size_t j = 0; j < m; ++j) {
    const auto& ctx = layout.context[j];
    const T inv_c = T{1} / static_cast<T>(ctx.size());
    std::copy(f.pooled.begin(), f.pooled.end(), r.begin());
    for (std::size_t q : ctx) {
      auto x = f.tokens.row(q);
      for (std::size_t i = 0; i < d; ++i) r[i] += x[i] * inv_c;
    }
    std::copy(p.pretext_bias.begin(), p.pretext_bias.end(), logits.begin());
    for (std::size_t i = 0; i < d; ++i) {
      const T ri = r[i];
      auto w = p.pretext_out.row(i);
      for (std::size_t v = 0; v < V; ++v) logits[v] += ri * w[v];
    }
    const T mx = *std::max_element(logits.begin(), logits.end());
    T z = T{};
    for (std::size_t v = 0; v < V; ++v) z += std::exp(logits[v] - mx);
    const auto target = static_cast<std::size_t>(layout.targets[j]);
    total += std::log(z) + mx - logits[target];
    if (!grads) continue;

    // dL/dlogits = (softmax - onehot) / m
    for (std::size_t v = 0; v < V; ++v) logits[v] = std::exp(logits[v] - mx) / z;
    logits[target] -= T{1};
    for (auto& g : logits) g *= inv_m * scale;
    for (std::size_t v = 0; v < V; ++v) grads->pretext_bias[v] += logits[v];
    for (std::size_t i = 0; i < d; ++i) {
      auto w = p.pretext_out.row(i);
      auto gw = grads->pretext_out.row(i);
      T acc = T{};
      for (std::size_t v = 0; v < V; ++v) {
        gw[v] += r[i] * logits[v];
        acc += w[v] * logits[v];
      }
      dr[i] = acc;
    }
    const T inv_n = T{1} / static_cast<T>(n);
    for (std::size_t t = 0; t < n; ++t) {
      auto dx = d_tokens.row(t);
      for (std::size_t i = 0; i < d; ++i) dx[i] += dr[i] * inv_n;
    }
    for (std::size_t q : ctx) {
      auto dx = d_tokens.row(q);
      for (std::size_t i = 0; i < d; ++i) dx[i] += dr[i] * inv_c;
    }
  }
  if (grads)
    for (std::size_t t = 0; t < n; ++t) token_backward<T>(p, f.ids[t], f.hidden.row(t), d_tokens.row(t), *grads);
  return total * inv_m;
}

template <typename T>
T pretext_forward(const EncoderParams<T>& p, const CorruptedExample& ex) {
  return pretext_loss(p, ex);
}

// ---------------------------------------------------------------------------
// Optimisation.

// SGD with classical momentum: v <- mu v + g; theta <- theta - lr v.
template <typename T>
class MomentumSgd {
 public:
  MomentumSgd(const EncoderConfig& cfg, T lr, T momentum = T(0.9))
      : lr_(lr), momentum_(momentum), velocity_(EncoderParams<T>::zeros(cfg)) {}

  void step(EncoderParams<T>& params, const EncoderParams<T>& grads) {
    zip_tensors(velocity_, grads, [&](std::span<T> v, std::span<const T> g) {
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = momentum_ * v[i] + g[i];
    });
    if (lr_ == T{}) return;
    zip_tensors(params, velocity_, [&](std::span<T> w, std::span<const T> v) {
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr_ * v[i];
    });
  }

 private:
  T lr_;
  T momentum_;
  EncoderParams<T> velocity_;
};

struct PretrainConfig {
  std::size_t steps = 200;
  double lr = 0.05;
  std::size_t batch = 16;
  double corruption_rate = 0.15;
  std::uint64_t seed = 0;
};

struct TrainLog {
  std::vector<double> losses;

  // Trailing mean over `window` entries ending at index `end` (exclusive).
  double moving_average(std::size_t end, std::size_t window) const {
    if (end == 0 || end > losses.size()) throw ArgumentError("moving_average range out of bounds");
    const std::size_t begin = end > window ? end - window : 0;
    return std::accumulate(losses.begin() + static_cast<std::ptrdiff_t>(begin),
                           losses.begin() + static_cast<std::ptrdiff_t>(end), 0.0) /
           static_cast<double>(end - begin);
  }
};

// Phase one: denoising adaptation on tokenized reviews. Each step samples a
// batch of reviews with replacement, corrupts them, and takes one momentum SGD
// step on the mean loss over examples with at least one dropped token.
inline TrainLog pretext_train(EncoderParams<float>& params, const std::vector<std::vector<TokenId>>& corpus,
                              SentinelRange sentinels, const PretrainConfig& cfg) {
  if (corpus.empty()) throw EmptyCorpusError("pretext training needs a non-empty corpus");
  if (cfg.batch == 0) throw ArgumentError("pretext batch size must be positive");
  Rng rng = Rng(cfg.seed).split("pretext");
  MomentumSgd<float> opt(params.config, static_cast<float>(cfg.lr));
  auto grads = EncoderParams<float>::zeros(params.config);
  TrainLog log;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    std::vector<CorruptedExample> batch;
    for (std::size_t b = 0; b < cfg.batch; ++b) {
      const auto& ids = corpus[static_cast<std::size_t>(rng.below(corpus.size()))];
      auto ex = corrupt_spans(ids, cfg.corruption_rate, rng, sentinels);
      if (!ex.dropped_positions.empty()) batch.push_back(std::move(ex));
    }
    grads.set_zero();
    double loss = 0.0;
    if (!batch.empty()) {
      const float scale = 1.0f / static_cast<float>(batch.size());
      for (const auto& ex : batch) loss += pretext_loss(params, ex, &grads, scale);
      loss /= static_cast<double>(batch.size());
    }
    if (!std::isfinite(loss))
      throw NumericError("pretext loss became non-finite at step " + std::to_string(step));
    log.losses.push_back(loss);
    opt.step(params, grads);
  }
  return log;
}

// ---------------------------------------------------------------------------
// Gradient checking (central finite differences).

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  std::size_t worst_coordinate = 0;
};

// Relative error |a - n| / max(|a|, |n|, floor). The floor keeps coordinates
// whose true gradient is zero from dividing roundoff by roundoff.
inline constexpr double kGradientCheckFloor = 1e-6;

// loss_and_grad(params, grads_or_null) -> loss, must add dL/dtheta into grads.
inline GradientCheckResult gradient_check(
    EncoderParams<double> params,
    const std::function<double(const EncoderParams<double>&, EncoderParams<double>*)>& loss_and_grad,
    double h, std::size_t coordinates, Rng& rng) {
  auto grads = EncoderParams<double>::zeros(params.config);
  loss_and_grad(params, &grads);
  const std::size_t total = params.parameter_count();
  coordinates = std::min(coordinates, total);
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < coordinates; ++i)
    std::swap(order[i], order[i + static_cast<std::size_t>(rng.below(total - i))]);
  GradientCheckResult res;
  res.coordinates = coordinates;
  for (std::size_t i = 0; i < coordinates; ++i) {
    const std::size_t c = order[i];
    double& w = params.coordinate(c);
    const double saved = w;
    w = saved + h;
    const double up = loss_and_grad(params, nullptr);
    w = saved - h;
    const double down = loss_and_grad(params, nullptr);
    w = saved;
    const double numeric = (up - down) / (2 * h);
    const double analytic = grads.coordinate(c);
    const double err =
        std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kGradientCheckFloor});
    if (err > res.max_relative_error) {
      res.max_relative_error = err;
      res.worst_coordinate = c;
    }
  }
  return res;
}

inline GradientCheckResult gradient_check(const EncoderParams<double>& params, const CorruptedExample& example,
                                          double h = 1e-5, std::size_t coordinates = 256, std::uint64_t seed = 0) {
  Rng rng(seed);
  return gradient_check(
      params, [&](const EncoderParams<double>& p, EncoderParams<double>* g) { return pretext_loss(p, example, g); },
      h, coordinates, rng);
}

// ---------------------------------------------------------------------------
// Persistence: "RPEN" magic, u16 version, u32 vocab/dim/hidden, u8 normalize,
// then float32 row-major embedding, w1, b1, w2, b2, pretext_out, pretext_bias.

inline constexpr std::uint16_t kEncoderFormatVersion = 1;

inline void save_params(const EncoderParams<float>& p, const std::string& path) {
  binio::Writer w;
  w.put_bytes("RPEN");
  w.put(kEncoderFormatVersion);
  w.put(static_cast<std::uint32_t>(p.config.vocab_size));
  w.put(static_cast<std::uint32_t>(p.config.dim));
  w.put(static_cast<std::uint32_t>(p.config.hidden));
  w.put(static_cast<std::uint8_t>(p.config.normalize ? 1 : 0));
  p.for_each_tensor([&](std::span<const float> s) {
    for (float v : s) w.put_f32(v);
  });
  w.save(path);
}

inline EncoderParams<float> load_params(const std::string& path) {
  auto r = binio::Reader::from_file(path);
  if (r.remaining() < 4 || r.get_bytes(4) != "RPEN") throw FormatError(path + ": not an encoder parameter file");
  if (r.get<std::uint16_t>() != kEncoderFormatVersion) throw FormatError(path + ": unsupported encoder version");
  EncoderConfig cfg;
  cfg.vocab_size = r.get<std::uint32_t>();
  cfg.dim = r.get<std::uint32_t>();
  cfg.hidden = r.get<std::uint32_t>();
  cfg.normalize = r.get<std::uint8_t>() != 0;
  const std::size_t expected =
      4 * (2 * cfg.vocab_size * cfg.dim + 2 * cfg.dim * cfg.hidden + cfg.hidden + cfg.dim + cfg.vocab_size);
  r.need(expected);
  auto p = EncoderParams<float>::zeros(cfg);
  p.for_each_tensor([&](std::span<float> s) {
    for (auto& v : s) v = r.get_f32();
  });
  if (!r.at_end()) throw FormatError(path + ": trailing bytes after encoder parameters");
  return p;
}

inline nlohmann::json sidecar_json(const EncoderParams<float>& p, const std::string& vocab_hash) {
  return {{"format", "RPEN"},
          {"version", kEncoderFormatVersion},
          {"vocab_size", p.config.vocab_size},
          {"dim", p.config.dim},
          {"hidden", p.config.hidden},
          {"normalize", p.config.normalize},
          {"vocab_hash", vocab_hash}};
}

}  // namespace revprio
