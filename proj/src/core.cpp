#include "dogiqa/core.hpp"

#include <algorithm>
#include <numeric>

#include "dogiqa/prompting.hpp"

namespace dogiqa {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::MalformedRLE: return "MalformedRLE";
    case ErrorCode::DegenerateBBox: return "DegenerateBBox";
    case ErrorCode::EmptyMaskSet: return "EmptyMaskSet";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::CacheCorrupt: return "CacheCorrupt";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::UnparsableRow: return "UnparsableRow";
    case ErrorCode::EmptyManifest: return "EmptyManifest";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

std::string to_hex(const Digest& d) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(d.size() * 2);
  for (auto b : d) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xf]);
  }
  return out;
}

std::int64_t Bitmap::count() const {
  return std::count(bits.begin(), bits.end(), std::uint8_t{1});
}

std::vector<std::uint32_t> rle_encode(const Bitmap& bitmap) {
  std::vector<std::uint32_t> counts;
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (int col = 0; col < bitmap.width; ++col) {
    for (int row = 0; row < bitmap.height; ++row) {
      const std::uint8_t v = bitmap.get(row, col) ? 1 : 0;
      if (v != current) {
        counts.push_back(run);
        run = 0;
        current = v;
      }
      ++run;
    }
  }
  counts.push_back(run);
  return counts;
}

Bitmap rle_decode(int height, int width, const std::vector<std::uint32_t>& counts) {
  if (height < 1 || width < 1) {
    throw Error(ErrorCode::MalformedRLE, "non-positive mask size");
  }
  const std::uint64_t total = static_cast<std::uint64_t>(height) * width;
  const std::uint64_t sum = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  if (sum != total) {
    throw Error(ErrorCode::MalformedRLE,
                "run counts sum to " + std::to_string(sum) + ", expected " + std::to_string(total));
  }
  Bitmap out(height, width);
  std::uint64_t pos = 0;
  bool value = false;
  for (auto run : counts) {
    if (value) {
      for (std::uint64_t p = pos; p < pos + run; ++p) {
        out.set(static_cast<int>(p % height), static_cast<int>(p / height));
      }
    }
    pos += run;
    value = !value;
  }
  return out;
}

BBox tight_bbox(const Bitmap& bitmap) {
  BBox box{bitmap.height, bitmap.width, -1, -1};
  for (int r = 0; r < bitmap.height; ++r) {
    for (int c = 0; c < bitmap.width; ++c) {
      if (bitmap.get(r, c)) {
        box.row_min = std::min(box.row_min, r);
        box.col_min = std::min(box.col_min, c);
        box.row_max = std::max(box.row_max, r);
        box.col_max = std::max(box.col_max, c);
      }
    }
  }
  if (box.row_max < 0) return BBox{};
  return box;
}

Mask Mask::from_bitmap(std::string id, const Bitmap& bitmap) {
  Mask m;
  m.id = std::move(id);
  m.height = bitmap.height;
  m.width = bitmap.width;
  m.rle = rle_encode(bitmap);
  m.area = bitmap.count();
  m.bbox = tight_bbox(bitmap);
  return m;
}

Mask validate_mask(const Mask& mask, const ImageRef& image) {
  if (mask.height != image.height || mask.width != image.width) {
    throw Error(ErrorCode::DimensionMismatch,
                "mask '" + mask.id + "' is " + std::to_string(mask.height) + "x" +
                    std::to_string(mask.width) + ", image is " + std::to_string(image.height) + "x" +
                    std::to_string(image.width));
  }
  const Bitmap bits = mask.decode();
  const auto decoded_area = bits.count();
  if (decoded_area < 1) {
    throw Error(ErrorCode::EmptyMask, "mask '" + mask.id + "' has no set pixels");
  }
  if (decoded_area != mask.area) {
    throw Error(ErrorCode::EmptyMask, "mask '" + mask.id + "' declares area " +
                                          std::to_string(mask.area) + " but decodes to " +
                                          std::to_string(decoded_area));
  }
  if (tight_bbox(bits) != mask.bbox) {
    throw Error(ErrorCode::MalformedRLE, "mask '" + mask.id + "' bbox is not tight");
  }
  return mask;
}

bool mask_order(const Mask& a, const Mask& b) {
  if (a.area != b.area) return a.area > b.area;
  return a.id < b.id;
}

void sort_masks(MaskSet& set) { std::sort(set.masks.begin(), set.masks.end(), mask_order); }

const char* to_string(CropMode m) {
  switch (m) {
    case CropMode::BBox: return "bbox";
    case CropMode::MaskZeroPad: return "mask";
    case CropMode::WholeOnly: return "whole";
    case CropMode::BBoxPlusWhole: return "bbox+whole";
  }
  return "?";
}

const char* to_string(AggMode m) { return m == AggMode::AreaWeighted ? "area" : "mean"; }

const char* to_string(StandardForm f) {
  switch (f) {
    case StandardForm::Number: return "number";
    case StandardForm::Word: return "word";
    case StandardForm::Sentence: return "sentence";
  }
  return "?";
}

CropMode parse_crop_mode(const std::string& s) {
  if (s == "bbox") return CropMode::BBox;
  if (s == "mask") return CropMode::MaskZeroPad;
  if (s == "whole") return CropMode::WholeOnly;
  if (s == "bbox+whole") return CropMode::BBoxPlusWhole;
  throw Error(ErrorCode::InvalidConfig, "unknown crop mode '" + s + "'");
}

AggMode parse_agg_mode(const std::string& s) {
  if (s == "area") return AggMode::AreaWeighted;
  if (s == "mean") return AggMode::Mean;
  throw Error(ErrorCode::InvalidConfig, "unknown aggregation mode '" + s + "'");
}

StandardForm parse_standard_form(const std::string& s) {
  if (s == "number") return StandardForm::Number;
  if (s == "word") return StandardForm::Word;
  if (s == "sentence") return StandardForm::Sentence;
  throw Error(ErrorCode::InvalidConfig, "unknown standard form '" + s + "'");
}

void AggregationConfig::validate() const {
  if (k_levels < 2) {
    throw Error(ErrorCode::InvalidConfig, "k_levels must be >= 2");
  }
  if (!(area_threshold_frac > 0.0 && area_threshold_frac < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "area_threshold_frac must lie in (0, 1)");
  }
  if (c_max < 1) {
    throw Error(ErrorCode::InvalidConfig, "c_max must be >= 1");
  }
  if (standard_form != StandardForm::Number &&
      word_standard.size() != static_cast<std::size_t>(k_levels)) {
    throw Error(ErrorCode::InvalidConfig, "word_standard has " +
                                              std::to_string(word_standard.size()) +
                                              " labels, expected " + std::to_string(k_levels));
  }
}

AggregationConfig default_config(int k_levels) {
  AggregationConfig cfg;
  cfg.k_levels = k_levels;
  if (auto labels = preset_word_labels(k_levels)) cfg.word_standard = *labels;
  return cfg;
}

}  // namespace dogiqa
