#pragma once

// Stage orchestration over a work directory. Every stage reads its inputs
// from the work dir, writes its outputs there and records input/output
// hashes in manifest.json. Artifacts are pure functions of inputs + config,
// so reruns are byte-identical.

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "revprio/classify.hpp"
#include "revprio/config.hpp"
#include "revprio/contrastive.hpp"
#include "revprio/corpus.hpp"
#include "revprio/encoder.hpp"
#include "revprio/error.hpp"
#include "revprio/hash.hpp"
#include "revprio/metrics.hpp"
#include "revprio/textprep.hpp"
#include "revprio/vecindex.hpp"

namespace revprio {

// ---------------------------------------------------------------------------
// In-memory building blocks, shared by the stages and the experiments.

inline std::vector<std::vector<TokenId>> tokenize_all(const std::vector<Review>& reviews, const Vocabulary& vocab,
                                                      std::size_t max_len) {
  std::vector<std::vector<TokenId>> out;
  out.reserve(reviews.size());
  for (const auto& r : reviews) out.push_back(tokenize(r.text, vocab, max_len));
  return out;
}

inline std::vector<std::vector<float>> embed_all(const EncoderParams<float>& params,
                                                 const std::vector<std::vector<TokenId>>& tokens) {
  std::vector<std::vector<float>> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(encode_values(params, std::span<const TokenId>(t)));
  return out;
}

inline std::vector<int> labels_of(const std::vector<Review>& reviews, Task task) {
  std::vector<int> out;
  out.reserve(reviews.size());
  for (const auto& r : reviews) out.push_back(label(r, task).index);
  return out;
}

inline FlatIndex index_reviews(const EncoderParams<float>& params, const std::vector<Review>& reviews,
                               const Vocabulary& vocab, std::size_t max_len, Task task) {
  std::vector<std::string> ids;
  for (const auto& r : reviews) ids.push_back(r.id);
  return FlatIndex::build(embed_all(params, tokenize_all(reviews, vocab, max_len)), ids, labels_of(reviews, task),
                          Metric::L2, params.config.dim);
}

inline std::vector<Prediction> classify_reviews(const NeighborClassifier& clf, const EncoderParams<float>& params,
                                                const std::vector<Review>& reviews, const Vocabulary& vocab,
                                                std::size_t max_len, const ClassifyConfig& cfg, unsigned threads) {
  std::vector<EmbeddingVector> queries;
  queries.reserve(reviews.size());
  for (const auto& r : reviews) {
    const auto ids = tokenize(r.text, vocab, max_len);
    queries.push_back(encode(params, ids, r.id));
  }
  auto batch = predict_batch(clf, queries, cfg, threads);
  if (!batch.errors.empty())
    throw ArgumentError("prediction failed for review '" + reviews[batch.errors.front().position].id +
                        "': " + batch.errors.front().message);
  std::vector<Prediction> out;
  out.reserve(reviews.size());
  for (auto& p : batch.predictions) out.push_back(std::move(*p));
  return out;
}

// Predicts every review with the training-set majority class.
inline std::vector<Prediction> majority_predictions(const std::vector<Review>& train, const std::vector<Review>& test,
                                                    Task task) {
  const std::size_t classes = class_count(task);
  std::vector<double> prior(classes, 0.0);
  for (int l : labels_of(train, task)) prior[static_cast<std::size_t>(l)] += 1.0;
  const int top = train.empty() ? 0 : argmax_lowest(prior);
  std::vector<Prediction> out;
  for (const auto& r : test) out.push_back({r.id, top, prior, 0, true, false});
  return out;
}

// ---------------------------------------------------------------------------
// Priority report.

struct PriorityEntry {
  std::string review_id;
  int predicted_class = 0;
  double score = 0.0;
  std::string excerpt;
};

struct PriorityReport {
  std::vector<PriorityEntry> entries;
  std::string generated_at;
  std::string config_hash;
};

inline constexpr std::size_t kExcerptChars = 120;

// First `max_chars` UTF-8 code points.
inline std::string excerpt(std::string_view text, std::size_t max_chars = kExcerptChars) {
  std::size_t chars = 0, i = 0;
  for (; i < text.size(); ++i) {
    if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) {
      if (chars == max_chars) break;
      ++chars;
    }
  }
  return std::string(text.substr(0, i));
}

// Descending by (predicted_class, score); review_id breaks the remaining ties.
inline bool priority_before(const PriorityEntry& a, const PriorityEntry& b) {
  if (a.predicted_class != b.predicted_class) return a.predicted_class > b.predicted_class;
  if (a.score != b.score) return a.score > b.score;
  return a.review_id < b.review_id;
}

inline PriorityReport build_priority_report(const std::vector<Review>& reviews,
                                            const std::vector<Prediction>& predictions,
                                            const std::vector<double>& scores, std::string config_hash) {
  if (reviews.size() != predictions.size() || reviews.size() != scores.size())
    throw ArgumentError("reviews, predictions and scores must align");
  PriorityReport rep;
  rep.config_hash = std::move(config_hash);
  Date latest{};
  for (std::size_t i = 0; i < reviews.size(); ++i) {
    rep.entries.push_back({reviews[i].id, predictions[i].predicted_class, scores[i], excerpt(reviews[i].text)});
    if (i == 0 || latest < reviews[i].posted_at) latest = reviews[i].posted_at;
  }
  std::sort(rep.entries.begin(), rep.entries.end(), priority_before);
  rep.generated_at = reviews.empty() ? "" : format_date(latest) + "T00:00:00Z";
  return rep;
}

inline nlohmann::json to_json(const PriorityReport& rep) {
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t i = 0; i < rep.entries.size(); ++i) {
    const auto& e = rep.entries[i];
    entries.push_back({{"rank", i + 1},
                       {"review_id", e.review_id},
                       {"predicted_class", e.predicted_class},
                       {"score", e.score},
                       {"excerpt", e.excerpt}});
  }
  return {{"generated_at", rep.generated_at}, {"config_hash", rep.config_hash}, {"entries", entries}};
}

inline std::string format_priority_table(const nlohmann::json& rep, std::size_t limit = 0) {
  std::ostringstream out;
  out << "Priority report (generated " << rep.at("generated_at").get<std::string>() << ", config "
      << rep.at("config_hash").get<std::string>() << ")\n";
  char buf[96];
  std::snprintf(buf, sizeof buf, "%5s  %-14s %5s %12s  ", "Rank", "Review", "Class", "Score");
  out << buf << "Excerpt\n" << std::string(100, '-') << '\n';
  std::size_t shown = 0;
  for (const auto& e : rep.at("entries")) {
    if (limit && shown++ == limit) break;
    std::snprintf(buf, sizeof buf, "%5zu  %-14s %5d %12.4f  ", e.at("rank").get<std::size_t>(),
                  e.at("review_id").get<std::string>().c_str(), e.at("predicted_class").get<int>(),
                  e.at("score").get<double>());
    out << buf << e.at("excerpt").get<std::string>() << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Work directory plumbing.

// Exclusive marker file; a second process on the same work dir fails fast.
class WorkDirLock {
 public:
  explicit WorkDirLock(const std::filesystem::path& dir) : path_((dir / ".revprio.lock").string()) {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0)
      throw IoError("work dir " + dir.string() + " is locked by another run (remove " + path_ + " if stale)");
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
  }
  WorkDirLock(const WorkDirLock&) = delete;
  WorkDirLock& operator=(const WorkDirLock&) = delete;
  ~WorkDirLock() { std::remove(path_.c_str()); }

 private:
  std::string path_;
};

inline void write_text(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out << text;
    if (!out) throw IoError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline void write_json(const std::string& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

// Review JSONL that may legitimately be empty (e.g. an empty split).
inline std::vector<Review> read_reviews(const std::string& path) {
  if (std::filesystem::file_size(path) == 0) return {};
  return ingest_file(path, RecordFormat::Jsonl).reviews;
}

class Pipeline {
 public:
  static constexpr const char* kStages[] = {"ingest", "pretrain", "pairs", "train",
                                            "index",  "predict",  "evaluate"};

  explicit Pipeline(RunConfig cfg, std::ostream* log = nullptr) : cfg_(std::move(cfg)), log_(log) {}

  const RunConfig& config() const noexcept { return cfg_; }
  std::string path(const std::string& artifact) const { return (std::filesystem::path(cfg_.work_dir) / artifact).string(); }

  // Parse + filter + temporal split + vocabulary.
  void ingest() {
    auto lock = begin();
    std::ostringstream diag;
    auto raw = ingest_file(cfg_.corpus_path, cfg_.corpus_format, &diag);
    note(diag.str());
    const auto kept = filter(raw.reviews);
    auto split = temporal_split(kept, cfg_.validation_start, cfg_.test_start);
    for (const auto& w : split.warnings) note("warning: " + w + "\n");
    if (split.train.empty()) throw EmptyCorpusError("no training reviews before " + format_date(cfg_.validation_start));
    const auto vocab = build_vocab(split.train, cfg_.textprep.min_count, cfg_.textprep.sentinels);
    write_jsonl_file(path("train.jsonl"), split.train);
    write_jsonl_file(path("validation.jsonl"), split.validation);
    write_jsonl_file(path("test.jsonl"), split.test);
    vocab.save(path("vocab.txt"));
    nlohmann::json summary = {{"records", raw.reviews.size() + raw.skipped},
                              {"skipped", raw.skipped},
                              {"kept_after_filter", kept.size()},
                              {"train", split.train.size()},
                              {"validation", split.validation.size()},
                              {"test", split.test.size()},
                              {"vocab_size", vocab.size()},
                              {"warnings", split.warnings}};
    for (Task t : {Task::Binary, Task::MultiClass}) {
      std::vector<std::size_t> hist(class_count(t), 0);
      for (const auto& r : kept) ++hist[static_cast<std::size_t>(label(r, t).index)];
      summary["class_counts"][to_string(t)] = hist;
    }
    write_json(path("ingest.json"), summary);
    note("ingest: " + std::to_string(split.train.size()) + " train, " + std::to_string(split.validation.size()) +
         " validation, " + std::to_string(split.test.size()) + " test, vocabulary " + std::to_string(vocab.size()) +
         "\n");
    record("ingest", sections_json(cfg_, {"corpus", "textprep"}), {{"corpus", cfg_.corpus_path}},
           {"train.jsonl", "validation.jsonl", "test.jsonl", "vocab.txt", "ingest.json"});
  }

  // Phase one: denoising adaptation of a freshly initialised encoder.
  void pretrain() {
    auto lock = begin();
    require({"train.jsonl", "vocab.txt"}, "ingest");
    const auto vocab = Vocabulary::load(path("vocab.txt"));
    const auto train = read_reviews(path("train.jsonl"));
    auto params = initial_params(vocab);
    const auto log = pretext_train(params, tokenize_all(train, vocab, cfg_.textprep.max_len), vocab.sentinels(),
                                   cfg_.pretrain);
    save_params(params, path("encoder_pretrained.rpen"));
    write_json(path("encoder_pretrained.json"), sidecar_json(params, vocab.fingerprint()));
    write_json(path("pretrain_log.json"), {{"losses", log.losses}});
    if (!log.losses.empty())
      note("pretrain: loss " + fmt(log.moving_average(std::min<std::size_t>(20, log.losses.size()), 20)) + " -> " +
           fmt(log.moving_average(log.losses.size(), 20)) + "\n");
    record("pretrain", sections_json(cfg_, {"textprep", "encoder", "seed"}), work_inputs({"train.jsonl", "vocab.txt"}),
           {"encoder_pretrained.rpen", "encoder_pretrained.json", "pretrain_log.json"});
  }

  void pairs() {
    auto lock = begin();
    require({"train.jsonl"}, "ingest");
    const auto train = read_reviews(path("train.jsonl"));
    const auto sampled = sample_pairs(train, cfg_.sampler);
    std::ostringstream out;
    write_pairs(out, sampled.pairs);
    write_text(path("pairs.jsonl"), out.str());
    write_json(path("pairs_summary.json"), summary_json(sampled));
    note("pairs: " + std::to_string(sampled.positives) + " positive, " + std::to_string(sampled.negatives) +
         " negative, " + std::to_string(sampled.discarded_positives) + " positives discarded\n");
    record("pairs", sections_json(cfg_, {"task", "contrastive", "seed"}), work_inputs({"train.jsonl"}),
           {"pairs.jsonl", "pairs_summary.json"});
  }

  // Phase two: contrastive fine-tuning of the phase-one encoder.
  void train() {
    auto lock = begin();
    require({"encoder_pretrained.rpen"}, "pretrain");
    require({"pairs.jsonl"}, "pairs");
    const auto vocab = Vocabulary::load(path("vocab.txt"));
    const auto train = read_reviews(path("train.jsonl"));
    auto params = load_checked(path("encoder_pretrained.rpen"), vocab);
    std::ifstream pin(path("pairs.jsonl"), std::ios::binary);
    const auto groups = group_pairs(read_pairs(pin), train);
    const auto log = contrastive_train(params, groups, tokenize_all(train, vocab, cfg_.textprep.max_len), cfg_.contrastive);
    save_params(params, path("encoder.rpen"));
    write_json(path("encoder.json"), sidecar_json(params, vocab.fingerprint()));
    write_json(path("train_log.json"), {{"losses", log.losses}});
    if (!log.losses.empty())
      note("train: loss " + fmt(log.moving_average(std::min<std::size_t>(10, log.losses.size()), 10)) + " -> " +
           fmt(log.moving_average(log.losses.size(), 10)) + "\n");
    record("train", sections_json(cfg_, {"textprep", "contrastive", "seed"}),
           work_inputs({"encoder_pretrained.rpen", "pairs.jsonl", "train.jsonl", "vocab.txt"}),
           {"encoder.rpen", "encoder.json", "train_log.json"});
  }

  // Phase three: index the labelled training embeddings.
  void index() {
    auto lock = begin();
    require({"encoder.rpen"}, "train");
    const auto vocab = Vocabulary::load(path("vocab.txt"));
    const auto train = read_reviews(path("train.jsonl"));
    const auto params = load_checked(path("encoder.rpen"), vocab);
    auto flat = index_reviews(params, train, vocab, cfg_.textprep.max_len, cfg_.task);
    if (cfg_.index.ivf) {
      const std::size_t nlist = std::min(cfg_.index.nlist, flat.size());
      persist(build_ivf(std::move(flat), nlist, cfg_.index.kmeans_iters, cfg_.seed), path("index.rpix"));
    } else {
      persist(flat, path("index.rpix"));
    }
    note("index: " + std::to_string(train.size()) + " vectors\n");
    record("index", sections_json(cfg_, {"task", "textprep", "index", "seed"}),
           work_inputs({"encoder.rpen", "train.jsonl", "vocab.txt"}), {"index.rpix"});
  }

  // Classifies `input` (default: the test split) and ranks it.
  void predict(std::optional<std::string> input = std::nullopt) {
    auto lock = begin();
    require({"index.rpix"}, "index");
    const std::string source = input ? *input : path("test.jsonl");
    if (!input) require({"test.jsonl"}, "ingest");
    const auto reviews = filter(read_reviews(source));
    if (reviews.empty()) throw EmptyCorpusError("no negative reviews to predict in " + source);
    Model m = load_model();
    const auto preds = classify_reviews(m.classifier(), m.params, reviews, m.vocab, cfg_.textprep.max_len,
                                        cfg_.classify, cfg_.threads);
    // Ranking score: weighted-KNN vote mass on the most prominent class.
    ClassifyConfig score_cfg{Method::WKNN, cfg_.classify.rnc, cfg_.classify.wknn};
    const auto wknn = cfg_.classify.method == Method::WKNN
                          ? preds
                          : classify_reviews(m.classifier(), m.params, reviews, m.vocab, cfg_.textprep.max_len,
                                             score_cfg, cfg_.threads);
    const std::size_t top = class_count(cfg_.task) - 1;
    std::vector<double> scores;
    for (const auto& p : wknn) scores.push_back(p.class_scores[top]);

    const auto conf = sections_json(cfg_, {"task", "textprep", "classify"});
    const auto report = build_priority_report(reviews, preds, scores, hash_hex(conf.dump()));
    std::string lines;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      auto j = to_json(preds[i]);
      j["score"] = scores[i];
      lines += j.dump() + "\n";
    }
    write_text(path("predictions.jsonl"), lines);
    const auto rj = to_json(report);
    write_json(path("priority_report.json"), rj);
    write_text(path("priority_report.txt"), format_priority_table(rj));
    note("predict: " + std::to_string(preds.size()) + " reviews ranked\n");
    auto inputs = work_inputs({"index.rpix", "encoder.rpen", "vocab.txt"});
    inputs.emplace_back(input ? "input" : "test.jsonl", source);
    record("predict", conf, inputs, {"predictions.jsonl", "priority_report.json", "priority_report.txt"});
  }

  // Test-split evaluation of the trained model against the majority-class
  // and untrained-encoder baselines, all under the same phase-three inference.
  nlohmann::json evaluate() {
    auto lock = begin();
    require({"index.rpix"}, "index");
    const auto test = read_reviews(path("test.jsonl"));
    if (test.empty()) throw EmptyCorpusError("test split is empty; nothing to evaluate");
    const auto train = read_reviews(path("train.jsonl"));
    Model m = load_model();
    const std::size_t classes = class_count(cfg_.task);
    const auto truth = labels_of(test, cfg_.task);
    const auto method = to_string(cfg_.classify.method);

    const auto trained = evaluate_preds(truth, classify_reviews(m.classifier(), m.params, test, m.vocab,
                                                                cfg_.textprep.max_len, cfg_.classify, cfg_.threads));
    const auto majority = evaluate_preds(truth, majority_predictions(train, test, cfg_.task));
    const auto random_params = initial_params(m.vocab);
    const auto random_index = index_reviews(random_params, train, m.vocab, cfg_.textprep.max_len, cfg_.task);
    const auto random = evaluate_preds(
        truth, classify_reviews(NeighborClassifier(random_index, classes), random_params, test, m.vocab,
                                cfg_.textprep.max_len, cfg_.classify, cfg_.threads));

    nlohmann::json j = {{"task", to_string(cfg_.task)},
                        {"method", method},
                        {"test_size", test.size()},
                        {"models",
                         {{"majority", to_json(majority)},
                          {"random_encoder", to_json(random)},
                          {"trained_encoder", to_json(trained)}}}};
    write_json(path("evaluation.json"), j);
    write_text(path("evaluation.txt"), evaluation_table(j));
    note("evaluate: mcc " + fmt(trained.mcc) + " (random encoder " + fmt(random.mcc) + ")\n");
    record("evaluate", sections_json(cfg_, {"task", "textprep", "encoder", "classify", "seed"}),
           work_inputs({"index.rpix", "encoder.rpen", "vocab.txt", "train.jsonl", "test.jsonl"}),
           {"evaluation.json", "evaluation.txt"});
    return j;
  }

  // Renders existing reports; writes nothing.
  void report(std::ostream& out, std::size_t limit = 20) const {
    const bool have_eval = std::filesystem::exists(path("evaluation.json"));
    const bool have_rank = std::filesystem::exists(path("priority_report.json"));
    if (!have_eval && !have_rank)
      throw PrerequisiteError("evaluate", "no reports in " + cfg_.work_dir + "; run `evaluate` or `predict` first");
    if (have_eval) out << evaluation_table(read_json(path("evaluation.json"))) << '\n';
    if (have_rank) out << format_priority_table(read_json(path("priority_report.json")), limit);
  }

  void run(const std::string& stage, std::optional<std::string> input = std::nullopt) {
    if (stage == "ingest") ingest();
    else if (stage == "pretrain") pretrain();
    else if (stage == "pairs") pairs();
    else if (stage == "train") train();
    else if (stage == "index") index();
    else if (stage == "predict") predict(std::move(input));
    else if (stage == "evaluate") evaluate();
    else throw ArgumentError("unknown stage '" + stage + "'");
  }

  void run_all() {
    for (const char* s : kStages) run(s);
  }

  static std::string evaluation_table(const nlohmann::json& j) {
    std::vector<std::pair<std::string, EvaluationReport>> rows;
    const std::string method = j.at("method").get<std::string>();
    for (auto [key, name] : {std::pair{"majority", std::string("majority class")},
                             {"random_encoder", "random encoder + " + method},
                             {"trained_encoder", "trained encoder + " + method}}) {
      const auto& m = j.at("models").at(key);
      EvaluationReport r;
      r.accuracy = m.at("accuracy").get<double>();
      r.macro_f1 = m.at("macro_f1").get<double>();
      r.mcc = m.at("mcc").get<double>();
      if (!m.at("top2_accuracy").is_null()) r.top2_accuracy = m.at("top2_accuracy").get<double>();
      rows.emplace_back(name, r);
    }
    return format_table(rows, "Evaluation (" + j.at("task").get<std::string>() + ", n=" +
                                  std::to_string(j.at("test_size").get<std::size_t>()) + ")");
  }

 private:
  struct Model {
    Vocabulary vocab;
    EncoderParams<float> params;
    std::optional<IvfIndex> ivf;
    FlatIndex flat;
    std::size_t classes = 0;

    NeighborClassifier classifier() const {
      return ivf ? NeighborClassifier(*ivf, classes) : NeighborClassifier(flat, classes);
    }
  };

  Model load_model() const {
    Model m;
    m.vocab = Vocabulary::load(path("vocab.txt"));
    m.params = load_checked(path("encoder.rpen"), m.vocab);
    if (cfg_.index.ivf)
      m.ivf = load_ivf(path("index.rpix"));
    else
      m.flat = load_flat(path("index.rpix"));
    m.classes = class_count(cfg_.task);
    return m;
  }

  EncoderParams<float> initial_params(const Vocabulary& vocab) const {
    EncoderConfig ec = cfg_.encoder;
    ec.vocab_size = static_cast<std::size_t>(vocab.size());
    return EncoderParams<float>::initialize(ec, Rng(cfg_.seed), cfg_.embedding_scale);
  }

  EncoderParams<float> load_checked(const std::string& file, const Vocabulary& vocab) const {
    auto p = load_params(file);
    if (p.config.vocab_size != static_cast<std::size_t>(vocab.size()))
      throw FormatError(file + ": vocabulary size " + std::to_string(p.config.vocab_size) + " does not match vocab.txt (" +
                        std::to_string(vocab.size()) + "); rerun the upstream stages");
    return p;
  }

  EvaluationReport evaluate_preds(const std::vector<int>& truth, const std::vector<Prediction>& preds) const {
    return revprio::evaluate(truth, preds, class_count(cfg_.task));
  }

  WorkDirLock begin() const {
    std::filesystem::create_directories(cfg_.work_dir);
    return WorkDirLock(cfg_.work_dir);
  }

  void require(std::initializer_list<const char*> files, const std::string& stage) const {
    for (const char* f : files)
      if (!std::filesystem::exists(path(f)))
        throw PrerequisiteError(stage, "missing " + path(f) + "; run the `" + stage + "` stage first");
  }

  std::vector<std::pair<std::string, std::string>> work_inputs(std::initializer_list<const char*> files) const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const char* f : files) out.emplace_back(f, path(f));
    return out;
  }

  // Stage hash covers the stage's config sections and the content of every
  // input; outputs are hashed alongside for verification.
  void record(const std::string& stage, const nlohmann::json& config,
              const std::vector<std::pair<std::string, std::string>>& inputs,
              std::initializer_list<const char*> outputs) const {
    nlohmann::json entry;
    entry["config"] = config;
    entry["config_hash"] = hash_hex(config.dump());
    Fnv1a64 h;
    h.update(config.dump());
    for (const auto& [name, file] : inputs) {
      const auto digest = hash_file(file);
      entry["inputs"][name] = digest;
      h.update(name);
      h.update(digest);
    }
    entry["stage_hash"] = h.hex();
    for (const char* o : outputs) entry["outputs"][o] = hash_file(path(o));
    const auto mpath = path("manifest.json");
    nlohmann::json manifest = std::filesystem::exists(mpath) ? read_json(mpath) : nlohmann::json::object();
    manifest["version"] = 1;
    manifest["stages"][stage] = entry;
    write_json(mpath, manifest);
  }

  void note(const std::string& s) const {
    if (log_) *log_ << s;
  }

  static std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", x);
    return buf;
  }

  RunConfig cfg_;
  std::ostream* log_;
};

}  // namespace revprio
