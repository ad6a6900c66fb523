#pragma once

// Run configuration: one JSON document, validated up front. Every violation is
// collected so a bad config is reported in one go.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "revprio/classify.hpp"
#include "revprio/contrastive.hpp"
#include "revprio/corpus.hpp"
#include "revprio/encoder.hpp"
#include "revprio/error.hpp"
#include "revprio/hash.hpp"
#include "revprio/textprep.hpp"

namespace revprio {

struct TextprepConfig {
  std::size_t min_count = 1;
  std::size_t max_len = 128;
  TokenId sentinels = Vocabulary::kDefaultSentinels;
  double corruption_rate = 0.15;
};

struct IndexConfig {
  bool ivf = false;
  std::size_t nlist = 16;
  std::size_t kmeans_iters = 20;
};

struct RunConfig {
  std::string corpus_path;
  std::string work_dir;
  RecordFormat corpus_format = RecordFormat::Jsonl;
  Date validation_start{};
  Date test_start{};
  Task task = Task::Binary;
  std::uint64_t seed = 0;
  TextprepConfig textprep;
  EncoderConfig encoder;  // vocab_size filled in from the vocabulary
  double embedding_scale = kDefaultEmbeddingScale;
  PretrainConfig pretrain;
  PairSamplerConfig sampler;
  ContrastiveConfig contrastive;
  IndexConfig index;
  ClassifyConfig classify{Method::WKNN, {}, {}};
  unsigned threads = 1;

  // Seeds live in one place; every stage derives its streams from it.
  void set_seed(std::uint64_t s) {
    seed = s;
    pretrain.seed = s;
    sampler.seed = s;
    contrastive.seed = s;
  }
};

namespace detail {

class ConfigReader {
 public:
  std::vector<std::string> violations;

  void fail(const std::string& path, const std::string& msg) { violations.push_back(path + ": " + msg); }

  // Absent sections read as empty; anything but an object is a violation.
  const nlohmann::json* section(const nlohmann::json& root, const std::string& key,
                                std::initializer_list<std::string_view> allowed) {
    if (!root.contains(key)) return nullptr;
    const auto& s = root[key];
    if (!s.is_object()) {
      fail(key, "must be an object");
      return nullptr;
    }
    check_keys(s, key, allowed);
    return &s;
  }

  void check_keys(const nlohmann::json& obj, const std::string& path,
                  std::initializer_list<std::string_view> allowed) {
    for (const auto& [k, v] : obj.items()) {
      bool known = false;
      for (auto a : allowed) known = known || a == k;
      if (!known) fail(path.empty() ? k : path + "." + k, "unknown key");
    }
  }

  std::optional<std::string> string(const nlohmann::json* obj, const std::string& path, const std::string& key) {
    if (!obj || !obj->contains(key)) return std::nullopt;
    const auto& v = (*obj)[key];
    if (!v.is_string()) {
      fail(join(path, key), "must be a string");
      return std::nullopt;
    }
    return v.get<std::string>();
  }

  bool boolean(const nlohmann::json* obj, const std::string& path, const std::string& key, bool fallback) {
    if (!obj || !obj->contains(key)) return fallback;
    const auto& v = (*obj)[key];
    if (!v.is_boolean()) {
      fail(join(path, key), "must be true or false");
      return fallback;
    }
    return v.get<bool>();
  }

  std::uint64_t count(const nlohmann::json* obj, const std::string& path, const std::string& key,
                      std::uint64_t fallback, std::uint64_t min = 0, std::uint64_t max = UINT64_MAX) {
    if (!obj || !obj->contains(key)) return fallback;
    const auto& v = (*obj)[key];
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      fail(join(path, key), "must be a non-negative integer");
      return fallback;
    }
    const auto n = v.get<std::uint64_t>();
    if (n < min || n > max) {
      fail(join(path, key), "must be in [" + std::to_string(min) + ", " + std::to_string(max) + "]");
      return fallback;
    }
    return n;
  }

  // lo_open / hi_open make the corresponding bound exclusive.
  double number(const nlohmann::json* obj, const std::string& path, const std::string& key, double fallback,
                double lo, double hi, bool lo_open = false, bool hi_open = false) {
    if (!obj || !obj->contains(key)) return fallback;
    const auto& v = (*obj)[key];
    if (!v.is_number()) {
      fail(join(path, key), "must be a number");
      return fallback;
    }
    const double x = v.get<double>();
    const bool ok = (lo_open ? x > lo : x >= lo) && (hi_open ? x < hi : x <= hi);
    if (!ok) {
      fail(join(path, key), "must be in " + std::string(lo_open ? "(" : "[") + fmt(lo) + ", " + fmt(hi) +
                                (hi_open ? ")" : "]"));
      return fallback;
    }
    return x;
  }

 private:
  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }
  static std::string fmt(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    nlohmann::json j = x;
    return j.dump();
  }
};

inline std::string resolve(const std::string& p, const std::filesystem::path& base) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal().string();
}

}  // namespace detail

// `base_dir` anchors relative paths (normally the config file's directory).
inline RunConfig parse_run_config(const nlohmann::json& root, const std::filesystem::path& base_dir = {},
                                  std::optional<std::uint64_t> seed_override = std::nullopt,
                                  std::optional<std::string> work_dir_override = std::nullopt) {
  detail::ConfigReader rd;
  RunConfig cfg;
  if (!root.is_object()) throw ValidationError("invalid config:\n  - config must be a JSON object");
  rd.check_keys(root, "",
                {"paths", "corpus", "task", "seed", "textprep", "encoder", "contrastive", "index", "classify"});

  const auto* paths = rd.section(root, "paths", {"corpus", "work_dir"});
  if (auto c = rd.string(paths, "paths", "corpus")) {
    cfg.corpus_path = detail::resolve(*c, base_dir);
    if (!std::filesystem::is_regular_file(cfg.corpus_path))
      rd.fail("paths.corpus", "file does not exist: " + cfg.corpus_path);
  } else if (!paths || !paths->contains("corpus")) {
    rd.fail("paths.corpus", "required");
  }
  if (work_dir_override) {
    cfg.work_dir = *work_dir_override;
  } else if (auto w = rd.string(paths, "paths", "work_dir")) {
    cfg.work_dir = detail::resolve(*w, base_dir);
  } else if (!paths || !paths->contains("work_dir")) {
    rd.fail("paths.work_dir", "required (or pass --stage-dir)");
  }

  const auto* corpus = rd.section(root, "corpus", {"format", "validation_start", "test_start"});
  if (auto f = rd.string(corpus, "corpus", "format")) {
    if (*f == "jsonl" || *f == "csv")
      cfg.corpus_format = parse_format(*f);
    else
      rd.fail("corpus.format", "must be \"jsonl\" or \"csv\"");
  }
  bool dates_ok = true;
  for (auto [key, slot] : {std::pair{"validation_start", &cfg.validation_start}, {"test_start", &cfg.test_start}}) {
    const std::string path = std::string("corpus.") + key;
    auto s = rd.string(corpus, "corpus", key);
    if (!s) {
      if (!corpus || !corpus->contains(key)) rd.fail(path, "required");
      dates_ok = false;
    } else if (auto d = parse_date(*s)) {
      *slot = *d;
    } else {
      rd.fail(path, "must be a YYYY-MM-DD date");
      dates_ok = false;
    }
  }
  if (dates_ok && !(cfg.validation_start < cfg.test_start))
    rd.fail("corpus", "validation_start must be before test_start");

  if (!root.contains("task")) {
    rd.fail("task", "required (\"binary\" or \"multiclass\")");
  } else if (!root["task"].is_string() || (root["task"] != "binary" && root["task"] != "multiclass")) {
    rd.fail("task", "must be \"binary\" or \"multiclass\"");
  } else {
    cfg.task = parse_task(root["task"].get<std::string>());
  }

  cfg.set_seed(seed_override ? *seed_override : rd.count(&root, "", "seed", 0));

  const auto* tp = rd.section(root, "textprep", {"min_count", "max_len", "sentinels", "corruption_rate"});
  cfg.textprep.min_count = rd.count(tp, "textprep", "min_count", 1, 1);
  cfg.textprep.max_len = rd.count(tp, "textprep", "max_len", 128, 1, 100000);
  cfg.textprep.sentinels = static_cast<TokenId>(rd.count(tp, "textprep", "sentinels", 64, 1, 4096));
  cfg.textprep.corruption_rate = rd.number(tp, "textprep", "corruption_rate", 0.15, 0.0, 1.0, false, true);

  const auto* enc = rd.section(root, "encoder", {"dim", "hidden", "normalize", "embedding_scale", "pretrain_steps",
                                                 "pretrain_lr", "pretrain_batch"});
  cfg.encoder.dim = rd.count(enc, "encoder", "dim", 64, 1, 4096);
  cfg.encoder.hidden = rd.count(enc, "encoder", "hidden", 128, 1, 16384);
  cfg.encoder.normalize = rd.boolean(enc, "encoder", "normalize", true);
  cfg.embedding_scale = rd.number(enc, "encoder", "embedding_scale", kDefaultEmbeddingScale, 0.0, 100.0, true);
  cfg.pretrain.steps = rd.count(enc, "encoder", "pretrain_steps", 200);
  cfg.pretrain.lr = rd.number(enc, "encoder", "pretrain_lr", 0.05, 0.0, 100.0);
  cfg.pretrain.batch = rd.count(enc, "encoder", "pretrain_batch", 16, 1);
  cfg.pretrain.corruption_rate = cfg.textprep.corruption_rate;

  const auto* con = rd.section(root, "contrastive", {"lambda", "negatives_per_positive", "temperature", "epochs",
                                                     "batch_pairs", "lr", "include_positive_in_denominator"});
  cfg.sampler.task = cfg.task;
  cfg.sampler.lambda = static_cast<std::int64_t>(
      rd.count(con, "contrastive", "lambda", PairSamplerConfig::for_task(cfg.task).lambda, 0, INT64_MAX));
  cfg.sampler.negatives_per_positive = rd.count(con, "contrastive", "negatives_per_positive", 4, 1, 1000);
  cfg.contrastive.temperature = rd.number(con, "contrastive", "temperature", 0.1, 0.0, 1e6, true);
  cfg.contrastive.epochs = rd.count(con, "contrastive", "epochs", 10);
  cfg.contrastive.batch_pairs = rd.count(con, "contrastive", "batch_pairs", 16, 1);
  cfg.contrastive.lr = rd.number(con, "contrastive", "lr", 0.05, 0.0, 100.0);
  cfg.contrastive.include_positive_in_denominator =
      rd.boolean(con, "contrastive", "include_positive_in_denominator", true);

  const auto* idx = rd.section(root, "index", {"type", "nlist", "kmeans_iters"});
  if (auto t = rd.string(idx, "index", "type")) {
    if (*t == "flat" || *t == "ivf")
      cfg.index.ivf = *t == "ivf";
    else
      rd.fail("index.type", "must be \"flat\" or \"ivf\"");
  }
  cfg.index.nlist = rd.count(idx, "index", "nlist", 16, 1);
  cfg.index.kmeans_iters = rd.count(idx, "index", "kmeans_iters", 20, 1);

  const auto* cls = rd.section(root, "classify", {"method", "radius", "k", "epsilon", "nprobe", "threads"});
  if (auto m = rd.string(cls, "classify", "method")) {
    if (*m == "rnc" || *m == "wknn")
      cfg.classify.method = parse_method(*m);
    else
      rd.fail("classify.method", "must be \"rnc\" or \"wknn\"");
  }
  cfg.classify.rnc.radius = rd.number(cls, "classify", "radius", 2.0, 0.0, 1e300, true);
  cfg.classify.wknn.k = rd.count(cls, "classify", "k", 101, 1);
  cfg.classify.wknn.epsilon = rd.number(cls, "classify", "epsilon", 1e-12, 0.0, 1.0, true);
  cfg.classify.rnc.nprobe = rd.count(cls, "classify", "nprobe", 0);
  if (cfg.classify.rnc.nprobe > 0 && !cfg.index.ivf) rd.fail("classify.nprobe", "requires index.type \"ivf\"");
  if (cfg.index.ivf && cfg.classify.rnc.nprobe > cfg.index.nlist) rd.fail("classify.nprobe", "exceeds index.nlist");
  cfg.threads = static_cast<unsigned>(rd.count(cls, "classify", "threads", 1, 0, 1024));

  if (!rd.violations.empty()) {
    std::string msg = "invalid config:";
    for (const auto& v : rd.violations) msg += "\n  - " + v;
    throw ValidationError(msg);
  }
  return cfg;
}

inline RunConfig load_run_config(const std::string& path, std::optional<std::uint64_t> seed_override = std::nullopt,
                                 std::optional<std::string> work_dir_override = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("invalid config:\n  - cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("invalid config:\n  - not valid JSON: ") + e.what());
  }
  return parse_run_config(j, std::filesystem::path(path).parent_path(), seed_override, work_dir_override);
}

// Effective values per section, defaults filled in. Stage hashes are taken
// over these, so they never depend on how the file was spelled.
inline nlohmann::json section_json(const RunConfig& c, std::string_view section) {
  using nlohmann::json;
  if (section == "corpus")
    return {{"format", c.corpus_format == RecordFormat::Csv ? "csv" : "jsonl"},
            {"validation_start", format_date(c.validation_start)},
            {"test_start", format_date(c.test_start)}};
  if (section == "task") return to_string(c.task);
  if (section == "seed") return c.seed;
  if (section == "textprep")
    return {{"min_count", c.textprep.min_count},
            {"max_len", c.textprep.max_len},
            {"sentinels", c.textprep.sentinels},
            {"corruption_rate", c.textprep.corruption_rate}};
  if (section == "encoder")
    return {{"dim", c.encoder.dim},
            {"hidden", c.encoder.hidden},
            {"normalize", c.encoder.normalize},
            {"embedding_scale", c.embedding_scale},
            {"pretrain_steps", c.pretrain.steps},
            {"pretrain_lr", c.pretrain.lr},
            {"pretrain_batch", c.pretrain.batch}};
  if (section == "contrastive")
    return {{"lambda", c.sampler.lambda},
            {"negatives_per_positive", c.sampler.negatives_per_positive},
            {"temperature", c.contrastive.temperature},
            {"epochs", c.contrastive.epochs},
            {"batch_pairs", c.contrastive.batch_pairs},
            {"lr", c.contrastive.lr},
            {"include_positive_in_denominator", c.contrastive.include_positive_in_denominator}};
  if (section == "index")
    return {{"type", c.index.ivf ? "ivf" : "flat"}, {"nlist", c.index.nlist}, {"kmeans_iters", c.index.kmeans_iters}};
  if (section == "classify")
    return {{"method", to_string(c.classify.method)},
            {"radius", c.classify.rnc.radius},
            {"k", c.classify.wknn.k},
            {"epsilon", c.classify.wknn.epsilon},
            {"nprobe", c.classify.rnc.nprobe}};
  throw ArgumentError("unknown config section '" + std::string(section) + "'");
}

inline nlohmann::json sections_json(const RunConfig& c, std::initializer_list<std::string_view> sections) {
  nlohmann::json j = nlohmann::json::object();
  for (auto s : sections) j[std::string(s)] = section_json(c, s);
  return j;
}

}  // namespace revprio
