#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dogiqa/core.hpp"

namespace dogiqa::fixtures {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

struct SyntheticImage {
  std::string id;  // relative path inside the corpus, as listed in the manifest
  int base_gray = 0;
  int n_rects = 0;
  double mos = 0.0;
};

struct Corpus {
  std::filesystem::path root;
  std::filesystem::path manifest;
  std::filesystem::path masks_dir;  // raw masks, one file per image
  std::vector<SyntheticImage> images;
};

inline constexpr int kCorpusHeight = 32;
inline constexpr int kCorpusWidth = 48;

// n images with a gray background and 1..5 lighter rectangles each, plus one
// single-pixel mask that the default threshold drops.
Corpus write_corpus(const std::filesystem::path& root, int n);

// n constant-gray images whose MOS is a strictly increasing function of the
// gray level's brightness-oracle score, for the whole-image consistency check.
Corpus write_level_corpus(const std::filesystem::path& root, int n, int k_levels);

Image constant_image(int h, int w, std::uint8_t value, int channels = 3);

}  // namespace dogiqa::fixtures
