#pragma once

// Review records: ingestion (JSONL / CSV), hygiene filtering, vote-bucket
// labelling and date-based train/validation/test splitting.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "revprio/error.hpp"

namespace revprio {

using Date = std::chrono::year_month_day;

// Strict YYYY-MM-DD. Returns nullopt for anything else, including invalid
// calendar dates such as 2022-02-30.
inline std::optional<Date> parse_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  auto num = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, v);
    if (ec != std::errc{} || ptr != s.data() + pos + len) return std::nullopt;
    return v;
  };
  const auto y = num(0, 4), m = num(5, 2), d = num(8, 2);
  if (!y || !m || !d) return std::nullopt;
  Date date{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
            std::chrono::day{static_cast<unsigned>(*d)}};
  if (!date.ok()) return std::nullopt;
  return date;
}

inline Date date_or_throw(std::string_view s) {
  auto d = parse_date(s);
  if (!d) throw ArgumentError("invalid date '" + std::string(s) + "', expected YYYY-MM-DD");
  return *d;
}

inline std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

struct Review {
  std::string id;
  std::string app_id;
  std::optional<std::string> app_category;
  std::string text;
  int rating = 0;
  Date posted_at{};
  std::int64_t votes_30d = 0;

  bool operator==(const Review&) const = default;
};

enum class Task { Binary, MultiClass };

inline std::size_t class_count(Task task) { return task == Task::Binary ? 2 : 5; }

inline std::string to_string(Task task) { return task == Task::Binary ? "binary" : "multiclass"; }

inline Task parse_task(std::string_view s) {
  if (s == "binary") return Task::Binary;
  if (s == "multiclass") return Task::MultiClass;
  throw ArgumentError("unknown task '" + std::string(s) + "' (binary|multiclass)");
}

struct ClassLabel {
  Task task = Task::Binary;
  int index = 0;

  bool operator==(const ClassLabel&) const = default;
};

// Prominence label from votes observed 30 days after posting.
// Binary: 1 iff more than 100 votes. MultiClass buckets: 0 | 1-5 | 6-25 | 26-100 | 100+.
inline ClassLabel label_votes(std::int64_t votes, Task task) {
  if (task == Task::Binary) return {task, votes > 100 ? 1 : 0};
  int bucket = 4;
  if (votes <= 0)
    bucket = 0;
  else if (votes <= 5)
    bucket = 1;
  else if (votes <= 25)
    bucket = 2;
  else if (votes <= 100)
    bucket = 3;
  return {task, bucket};
}

inline ClassLabel label(const Review& review, Task task) { return label_votes(review.votes_30d, task); }

enum class RecordFormat { Jsonl, Csv };

inline RecordFormat parse_format(std::string_view s) {
  if (s == "jsonl") return RecordFormat::Jsonl;
  if (s == "csv") return RecordFormat::Csv;
  throw ArgumentError("unknown record format '" + std::string(s) + "' (jsonl|csv)");
}

struct IngestResult {
  std::vector<Review> reviews;
  std::size_t skipped = 0;
};

namespace detail {

inline std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

// Shared field validation for both formats. Values arrive as strings from CSV
// and as typed JSON values from JSONL; both paths funnel through here.
inline std::optional<Review> make_review(std::string id, std::string app_id,
                                         std::optional<std::string> category, std::string text,
                                         std::optional<std::int64_t> rating,
                                         std::string_view posted_at,
                                         std::optional<std::int64_t> votes) {
  if (id.empty() || !rating || *rating < 1 || *rating > 5 || !votes || *votes < 0) return std::nullopt;
  auto date = parse_date(posted_at);
  if (!date) return std::nullopt;
  Review r;
  r.id = std::move(id);
  r.app_id = std::move(app_id);
  r.app_category = std::move(category);
  r.text = std::move(text);
  r.rating = static_cast<int>(*rating);
  r.posted_at = *date;
  r.votes_30d = *votes;
  return r;
}

inline std::optional<Review> review_from_json(const nlohmann::json& j) {
  if (!j.is_object()) return std::nullopt;
  auto str = [&](const char* key) -> std::optional<std::string> {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) return std::nullopt;
    return it->get<std::string>();
  };
  auto integer = [&](const char* key) -> std::optional<std::int64_t> {
    auto it = j.find(key);
    if (it == j.end() || !it->is_number_integer()) return std::nullopt;
    return it->get<std::int64_t>();
  };
  auto id = str("id"), app = str("app_id"), text = str("text"), date = str("posted_at");
  if (!id || !app || !text || !date) return std::nullopt;
  std::optional<std::string> category;
  if (auto it = j.find("app_category"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) return std::nullopt;
    category = it->get<std::string>();
  }
  return make_review(std::move(*id), std::move(*app), std::move(category), std::move(*text),
                     integer("rating"), *date, integer("votes_30d"));
}

// Reads one CSV record (comma separated, double-quote escaping, quoted fields
// may span lines). Returns false at end of input.
inline bool read_csv_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  std::string field;
  bool quoted = false;
  bool any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      break;
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

}  // namespace detail

// Parses a record stream. Malformed records are skipped and counted; the skip
// count is also written to `diag` when given.
inline IngestResult ingest(std::istream& in, RecordFormat format, std::ostream* diag = nullptr) {
  if (!in) throw IoError("unreadable review source");
  IngestResult out;
  if (format == RecordFormat::Jsonl) {
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      auto j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
      auto r = detail::review_from_json(j);
      if (r)
        out.reviews.push_back(std::move(*r));
      else
        ++out.skipped;
    }
  } else {
    std::vector<std::string> header;
    if (!detail::read_csv_record(in, header)) throw EmptyCorpusError("CSV source has no header row");
    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    for (const char* required : {"id", "app_id", "text", "rating", "posted_at", "votes_30d"})
      if (!col.count(required)) throw FormatError(std::string("CSV header lacks column '") + required + "'");
    std::vector<std::string> row;
    while (detail::read_csv_record(in, row)) {
      if (row.size() == 1 && row[0].empty()) continue;
      if (row.size() != header.size()) {
        ++out.skipped;
        continue;
      }
      std::optional<std::string> category;
      if (auto it = col.find("app_category"); it != col.end() && !row[it->second].empty())
        category = row[it->second];
      auto r = detail::make_review(row[col["id"]], row[col["app_id"]], std::move(category),
                                   row[col["text"]], detail::parse_int(row[col["rating"]]),
                                   row[col["posted_at"]], detail::parse_int(row[col["votes_30d"]]));
      if (r)
        out.reviews.push_back(std::move(*r));
      else
        ++out.skipped;
    }
  }
  if (in.bad()) throw IoError("read error on review source");
  if (diag) *diag << "ingest: " << out.reviews.size() << " records, " << out.skipped << " skipped\n";
  if (out.reviews.empty()) throw EmptyCorpusError("no parseable review records in source");
  return out;
}

inline IngestResult ingest_file(const std::string& path, RecordFormat format, std::ostream* diag = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open review source " + path);
  return ingest(in, format, diag);
}

inline bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

// Keeps negative reviews (rating 1 or 2) with non-blank text, first occurrence
// of each id. Order preserved.
inline std::vector<Review> filter(const std::vector<Review>& reviews) {
  std::vector<Review> out;
  std::unordered_set<std::string> seen;
  for (const auto& r : reviews) {
    if (r.rating != 1 && r.rating != 2) continue;
    if (blank(r.text)) continue;
    if (!seen.insert(r.id).second) continue;
    out.push_back(r);
  }
  return out;
}

struct SplitCorpus {
  std::vector<Review> train;
  std::vector<Review> validation;
  std::vector<Review> test;
  Date validation_start{};
  Date test_start{};
  std::vector<std::string> warnings;
};

// train: posted_at < boundary1; validation: boundary1 <= posted_at < boundary2;
// test: posted_at >= boundary2.
inline SplitCorpus temporal_split(const std::vector<Review>& reviews, Date boundary1, Date boundary2) {
  if (!(boundary1 < boundary2))
    throw ArgumentError("split boundaries must satisfy boundary1 < boundary2 (got " + format_date(boundary1) +
                        ", " + format_date(boundary2) + ")");
  SplitCorpus out;
  out.validation_start = boundary1;
  out.test_start = boundary2;
  for (const auto& r : reviews) {
    if (r.posted_at < boundary1)
      out.train.push_back(r);
    else if (r.posted_at < boundary2)
      out.validation.push_back(r);
    else
      out.test.push_back(r);
  }
  if (out.train.empty()) out.warnings.emplace_back("train split is empty");
  if (out.validation.empty()) out.warnings.emplace_back("validation split is empty");
  if (out.test.empty()) out.warnings.emplace_back("test split is empty");
  return out;
}

inline nlohmann::json to_json(const Review& r) {
  nlohmann::json j = {{"id", r.id},         {"app_id", r.app_id},
                      {"text", r.text},     {"rating", r.rating},
                      {"posted_at", format_date(r.posted_at)}, {"votes_30d", r.votes_30d}};
  if (r.app_category) j["app_category"] = *r.app_category;
  return j;
}

inline void write_jsonl(std::ostream& out, const std::vector<Review>& reviews) {
  for (const auto& r : reviews) out << to_json(r).dump() << '\n';
}

inline void write_jsonl_file(const std::string& path, const std::vector<Review>& reviews) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  write_jsonl(out, reviews);
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace revprio
