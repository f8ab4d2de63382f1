#pragma once

// Shared helpers for the test binaries: unique temp directories, byte-level
// file comparison and random tensor builders.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <unistd.h>

#include "segfilter/rng.hpp"
#include "segfilter/types.hpp"

namespace testsupport {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const int id = counter.fetch_add(1);
    path_ = std::filesystem::temp_directory_path() /
            ("segfilter_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(id));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

inline void spit(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// Relative path -> file bytes for every regular file under root.
inline std::map<std::string, std::string> dir_contents(
    const std::filesystem::path& root) {
  std::map<std::string, std::string> contents;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    contents[std::filesystem::relative(entry.path(), root).string()] =
        slurp(entry.path());
  }
  return contents;
}

inline segfilter::LogitVolume random_volume(segfilter::Rng& rng, int k, int h,
                                            int w, double lo = -4.0,
                                            double hi = 4.0) {
  segfilter::LogitVolume volume;
  volume.num_classes = k;
  volume.height = h;
  volume.width = w;
  volume.values.resize(static_cast<std::size_t>(k) * h * w);
  for (float& value : volume.values) {
    value = static_cast<float>(rng.uniform(lo, hi));
  }
  return volume;
}

inline segfilter::LabelMap random_label_map(segfilter::Rng& rng, int h, int w,
                                            int k, double ignore_prob = 0.0) {
  segfilter::LabelMap map = segfilter::make_label_map(h, w);
  for (std::uint8_t& label : map.labels) {
    if (ignore_prob > 0.0 && rng.uniform01() < ignore_prob) {
      label = segfilter::kIgnoreLabel;
    } else {
      label = static_cast<std::uint8_t>(rng.below(k));
    }
  }
  return map;
}

}  // namespace testsupport
