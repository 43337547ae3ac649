#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace testing_support {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("intentaug_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& child) const { return path_ / child; }

 private:
  std::filesystem::path path_;
};

// Random tag sequence over O and B-/I- of the given slot names, including
// stray I- tags.
template <typename Rng>
std::vector<std::string> random_tags(Rng& rng, int length, const std::vector<std::string>& names) {
  std::uniform_int_distribution<int> kind(0, 2);
  std::uniform_int_distribution<std::size_t> pick(0, names.size() - 1);
  std::vector<std::string> tags;
  for (int i = 0; i < length; ++i) {
    const int k = kind(rng);
    tags.push_back(k == 0 ? std::string("O") : (k == 1 ? "B-" : "I-") + names[pick(rng)]);
  }
  return tags;
}

}  // namespace testing_support
