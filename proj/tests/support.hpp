#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>

#include "revprio/corpus.hpp"
#include "revprio/rng.hpp"

namespace revprio::testing {

inline Review review(std::string id, std::string text, int rating = 1, std::string date = "2021-11-01",
                     std::int64_t votes = 0, std::string app = "a") {
  return {std::move(id), std::move(app), std::nullopt, std::move(text), rating, *parse_date(date), votes};
}

// Fresh scratch directory per test, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("revprio-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace revprio::testing
