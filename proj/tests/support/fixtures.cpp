#include "fixtures.hpp"

#include <atomic>
#include <cmath>
#include <fstream>

#include <unistd.h>

#include "dogiqa/imageio.hpp"
#include "dogiqa/maskproc.hpp"

namespace dogiqa::fixtures {

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("dogiqa_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

Image constant_image(int h, int w, std::uint8_t value, int channels) { return Image(h, w, channels, value); }

Corpus write_corpus(const std::filesystem::path& root, int n) {
  Corpus c;
  c.root = root;
  c.manifest = root / "manifest.csv";
  c.masks_dir = root / "raw_masks";
  std::filesystem::create_directories(root / "images");
  std::filesystem::create_directories(c.masks_dir);

  std::ofstream manifest(c.manifest);
  manifest << "image_path,mos\n";
  for (int i = 0; i < n; ++i) {
    SyntheticImage s;
    s.id = "images/img_" + std::to_string(i) + ".png";
    s.base_gray = 20 + (i * 37) % 160;
    s.n_rects = 1 + i % 5;
    s.mos = s.base_gray / 255.0 * 60.0 + s.n_rects * 5.0 + (i * 7) % 3;

    Image img(kCorpusHeight, kCorpusWidth, 3, static_cast<std::uint8_t>(s.base_gray));
    MaskSet raw;
    raw.image.id = s.id;
    raw.image.height = kCorpusHeight;
    raw.image.width = kCorpusWidth;
    for (int j = 0; j < s.n_rects; ++j) {
      const int r0 = 2 + (j * 6) % 24;
      const int c0 = 2 + j * 9;
      const auto gray = static_cast<std::uint8_t>(std::min(255, s.base_gray + 40 * (j + 1)));
      Bitmap bits(kCorpusHeight, kCorpusWidth);
      for (int r = r0; r < r0 + 6; ++r) {
        for (int col = c0; col < c0 + 8; ++col) {
          bits.set(r, col);
          for (int ch = 0; ch < 3; ++ch) img.at(r, col, ch) = static_cast<std::uint8_t>(gray - ch * 5);
        }
      }
      raw.masks.push_back(Mask::from_bitmap("rect" + std::to_string(j), bits));
    }
    Bitmap speck(kCorpusHeight, kCorpusWidth);
    speck.set(0, kCorpusWidth - 1);
    raw.masks.push_back(Mask::from_bitmap("speck", speck));

    write_png(root / s.id, img);
    write_mask_file(c.masks_dir / mask_file_name(s.id), raw);
    manifest << s.id << ',' << s.mos << '\n';
    c.images.push_back(s);
  }
  return c;
}

Corpus write_level_corpus(const std::filesystem::path& root, int n, int k_levels) {
  Corpus c;
  c.root = root;
  c.manifest = root / "manifest.csv";
  std::filesystem::create_directories(root / "images");
  std::ofstream manifest(c.manifest);
  manifest << "image_path,mos\n";
  for (int i = 0; i < n; ++i) {
    const int level = 1 + (i * 3) % k_levels;
    SyntheticImage s;
    s.id = "images/level_" + std::to_string(i) + ".png";
    s.base_gray = static_cast<int>(std::lround((level - 1) * 255.0 / (k_levels - 1)));
    s.mos = 10.0 * level;
    write_png(root / s.id, constant_image(16, 16, static_cast<std::uint8_t>(s.base_gray)));
    manifest << s.id << ',' << s.mos << '\n';
    c.images.push_back(s);
  }
  return c;
}

}  // namespace dogiqa::fixtures
