#include <random>

#include <gtest/gtest.h>

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"
#include "dogiqa/maskproc.hpp"

using namespace dogiqa;

namespace {

MaskSet empty_set(int h, int w) {
  MaskSet s;
  s.image.id = "img";
  s.image.height = h;
  s.image.width = w;
  return s;
}

Mask rect_mask(const std::string& id, int h, int w, int r0, int c0, int r1, int c1) {
  Bitmap b(h, w);
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) b.set(r, c);
  return Mask::from_bitmap(id, b);
}

AggregationConfig cfg_with(double frac) {
  auto cfg = default_config();
  cfg.area_threshold_frac = frac;
  return cfg;
}

Image gradient_image(int h, int w) {
  Image img(h, w, 3);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = static_cast<std::uint8_t>(r * 16 + c + ch);
  return img;
}

}  // namespace

TEST(ProcessMasks, DisjointFullCoverNeedsNoRemainder) {
  auto raw = empty_set(16, 16);
  raw.masks.push_back(rect_mask("left", 16, 16, 0, 0, 15, 7));
  raw.masks.push_back(rect_mask("right", 16, 16, 0, 8, 15, 15));
  const auto out = process_masks(raw, cfg_with(0.01));
  ASSERT_EQ(out.masks.size(), 2u);
  EXPECT_EQ(out.masks[0].id, "left");
  EXPECT_EQ(out.masks[1].id, "right");
  EXPECT_EQ(count_masks(out), 2);
}

TEST(ProcessMasks, TinyMasksDroppedRemainderCoversAll) {
  // Threshold 0.02 * 256 = 5.12 px; both single-pixel masks fall below it.
  auto raw = empty_set(16, 16);
  raw.masks.push_back(rect_mask("a", 16, 16, 3, 3, 3, 3));
  raw.masks.push_back(rect_mask("b", 16, 16, 9, 1, 9, 1));
  const auto out = process_masks(raw, cfg_with(0.02));
  ASSERT_EQ(out.masks.size(), 1u);
  EXPECT_EQ(out.masks[0].id, kRemainderId);
  EXPECT_EQ(out.masks[0].area, 256);
  EXPECT_EQ(out.masks[0].decode(), Bitmap(16, 16, true));
}

TEST(ProcessMasks, EmptyInputYieldsWholeImageRemainder) {
  const auto out = process_masks(empty_set(16, 16), cfg_with(0.02));
  ASSERT_EQ(out.masks.size(), 1u);
  EXPECT_EQ(out.masks[0].area, 256);
  EXPECT_EQ(out.masks[0].bbox, (BBox{0, 0, 15, 15}));
}

TEST(ProcessMasks, ThresholdIsInclusive) {
  // 0.25 * 16 = 4 px exactly.
  auto raw = empty_set(4, 4);
  raw.masks.push_back(rect_mask("row0", 4, 4, 0, 0, 0, 3));
  raw.masks.push_back(rect_mask("tiny", 4, 4, 1, 0, 1, 2));
  const auto out = process_masks(raw, cfg_with(0.25));
  ASSERT_EQ(out.masks.size(), 2u);
  EXPECT_EQ(out.masks[0].id, kRemainderId);  // 12 px
  EXPECT_EQ(out.masks[1].id, "row0");
}

TEST(ProcessMasks, OverlapIsPreservedAndRemainderDisjoint) {
  auto raw = empty_set(8, 8);
  raw.masks.push_back(rect_mask("a", 8, 8, 0, 0, 3, 3));
  raw.masks.push_back(rect_mask("b", 8, 8, 2, 2, 5, 5));
  const auto out = process_masks(raw, cfg_with(0.05));
  ASSERT_EQ(out.masks.size(), 3u);
  const auto rem = std::find_if(out.masks.begin(), out.masks.end(),
                                [](const Mask& m) { return m.id == kRemainderId; });
  ASSERT_NE(rem, out.masks.end());
  EXPECT_EQ(rem->area, 64 - (16 + 16 - 4));
}

TEST(ProcessMasks, MatchesBruteForceAndIsIdempotent) {
  std::mt19937 rng(99);
  std::uniform_int_distribution<int> nmasks(0, 6), coord(0, 15);
  std::uniform_real_distribution<double> frac(0.005, 0.3);
  for (int trial = 0; trial < 200; ++trial) {
    auto raw = empty_set(16, 16);
    std::vector<oracle::Grid> grids;
    const int n = nmasks(rng);
    for (int i = 0; i < n; ++i) {
      int r0 = coord(rng), r1 = coord(rng), c0 = coord(rng), c1 = coord(rng);
      if (r0 > r1) std::swap(r0, r1);
      if (c0 > c1) std::swap(c0, c1);
      const Mask m = rect_mask("m" + std::to_string(i), 16, 16, r0, c0, r1, c1);
      raw.masks.push_back(m);
      oracle::Grid g{16, 16, std::vector<bool>(256)};
      for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) g.px[r * 16 + c] = true;
      grids.push_back(g);
    }
    const auto cfg = cfg_with(frac(rng));
    const auto out = process_masks(raw, cfg);

    std::vector<oracle::Grid> got;
    for (const auto& m : out.masks) {
      const auto b = m.decode();
      oracle::Grid g{16, 16, std::vector<bool>(256)};
      for (int p = 0; p < 256; ++p) g.px[p] = b.bits[p] != 0;
      got.push_back(g);
    }
    std::sort(got.begin(), got.end());
    ASSERT_EQ(got, oracle::filter_and_complement(grids, 16, 16, cfg.area_threshold_frac));

    const auto twice = process_masks(out, cfg);
    ASSERT_EQ(twice.masks, out.masks);
  }
}

TEST(ExtractSubimage, FullMaskBBoxIsIdentity) {
  const auto img = gradient_image(6, 5);
  const auto sub = extract_subimage(img, rect_mask("all", 6, 5, 0, 0, 5, 4), CropMode::BBox);
  EXPECT_EQ(sub.pixels, img);
  EXPECT_EQ(sub.area_weight_raw, 30);
}

TEST(ExtractSubimage, SinglePixel) {
  const auto img = gradient_image(6, 5);
  const auto sub = extract_subimage(img, rect_mask("p", 6, 5, 2, 3, 2, 3), CropMode::BBox);
  ASSERT_EQ(sub.pixels.height, 1);
  ASSERT_EQ(sub.pixels.width, 1);
  for (int ch = 0; ch < 3; ++ch) EXPECT_EQ(sub.pixels.at(0, 0, ch), img.at(2, 3, ch));
}

TEST(ExtractSubimage, CheckerboardZeroPad) {
  const auto img = fixtures::constant_image(4, 4, 100);
  Bitmap b(4, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) b.set(r, c, (r + c) % 2 == 0);
  const auto sub = extract_subimage(img, Mask::from_bitmap("chk", b), CropMode::MaskZeroPad);
  ASSERT_EQ(sub.pixels.height, 4);
  ASSERT_EQ(sub.pixels.width, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) EXPECT_EQ(sub.pixels.at(r, c, 0), (r + c) % 2 == 0 ? 100 : 0);

  const auto bbox = extract_subimage(img, Mask::from_bitmap("chk", b), CropMode::BBox);
  EXPECT_EQ(bbox.pixels, img);
}

TEST(ExtractSubimage, WholeOnlyReturnsImage) {
  const auto img = gradient_image(6, 5);
  const auto sub = extract_subimage(img, rect_mask("p", 6, 5, 2, 3, 2, 3), CropMode::WholeOnly);
  EXPECT_EQ(sub.pixels, img);
}

TEST(ExtractSubimage, CropsPreserveOrOnlyZeroOutside) {
  std::mt19937 rng(5);
  std::bernoulli_distribution bit(0.4);
  const auto img = gradient_image(10, 12);
  for (int trial = 0; trial < 50; ++trial) {
    Bitmap b(10, 12);
    for (auto& v : b.bits) v = bit(rng);
    if (b.count() == 0) continue;
    const auto m = Mask::from_bitmap("r", b);
    const auto box = extract_subimage(img, m, CropMode::BBox);
    const auto pad = extract_subimage(img, m, CropMode::MaskZeroPad);
    for (int r = 0; r < box.pixels.height; ++r) {
      for (int c = 0; c < box.pixels.width; ++c) {
        const int sr = m.bbox.row_min + r, sc = m.bbox.col_min + c;
        for (int ch = 0; ch < 3; ++ch) {
          ASSERT_EQ(box.pixels.at(r, c, ch), img.at(sr, sc, ch));
          ASSERT_EQ(pad.pixels.at(r, c, ch), b.get(sr, sc) ? img.at(sr, sc, ch) : 0);
        }
      }
    }
  }
}

TEST(MaskFile, JsonRoundTripAndValidation) {
  auto set = empty_set(5, 7);
  set.masks.push_back(rect_mask("x", 5, 7, 1, 1, 3, 4));
  set.masks.push_back(rect_mask("y", 5, 7, 0, 6, 4, 6));
  const auto j = mask_set_to_json(set);
  EXPECT_EQ(j["size"], nlohmann::json::array({5, 7}));
  EXPECT_EQ(j["masks"][0]["rle"]["counts"].get<std::vector<int>>().front(), 6);
  const auto back = mask_set_from_json(j);
  EXPECT_EQ(back.masks, set.masks);
  EXPECT_EQ(back.image.id, "img");

  auto bad = j;
  bad["masks"][0]["area"] = 3;
  EXPECT_THROW(mask_set_from_json(bad), Error);

  ImageRef other;
  other.height = 8;
  other.width = 8;
  try {
    mask_set_from_json(j, other);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(MaskFile, FileNameSanitizesSeparators) {
  EXPECT_EQ(mask_file_name("images/a.png"), "images_a.png.json");
}
