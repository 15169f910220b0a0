#pragma once

// Domain types shared by every stage of the pipeline. Types are plain values,
// immutable once built, and validated at construction or via validate_*.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dogiqa {

enum class ErrorCode {
  DimensionMismatch,
  EmptyMask,
  MalformedRLE,
  DegenerateBBox,
  EmptyMaskSet,
  LengthMismatch,
  DegenerateInput,
  OutOfRange,
  BackendUnavailable,
  MalformedResponse,
  CacheCorrupt,
  MissingColumn,
  UnparsableRow,
  EmptyManifest,
  InvalidConfig,
  Io,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

using Digest = std::array<std::uint8_t, 32>;

std::string to_hex(const Digest& d);

// Interleaved 8-bit raster, row-major, channels in RGB order when 3.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(int h, int w, int c, std::uint8_t fill = 0)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, fill) {}

  bool empty() const noexcept { return data.empty(); }
  std::size_t index(int row, int col, int ch = 0) const noexcept {
    return (static_cast<std::size_t>(row) * width + col) * channels + ch;
  }
  std::uint8_t& at(int row, int col, int ch = 0) { return data[index(row, col, ch)]; }
  std::uint8_t at(int row, int col, int ch = 0) const { return data[index(row, col, ch)]; }

  friend bool operator==(const Image&, const Image&) = default;
};

struct ImageRef {
  std::string id;
  std::filesystem::path path;
  int width = 0;
  int height = 0;
  Digest content_hash{};
};

// Binary bitmap, row-major, one byte per pixel (0 or 1).
struct Bitmap {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;

  Bitmap() = default;
  Bitmap(int h, int w, bool fill = false)
      : height(h), width(w), bits(static_cast<std::size_t>(h) * w, fill ? 1 : 0) {}

  bool get(int row, int col) const { return bits[static_cast<std::size_t>(row) * width + col] != 0; }
  void set(int row, int col, bool v = true) {
    bits[static_cast<std::size_t>(row) * width + col] = v ? 1 : 0;
  }
  std::int64_t count() const;

  friend bool operator==(const Bitmap&, const Bitmap&) = default;
};

// Inclusive bounds.
struct BBox {
  int row_min = 0;
  int col_min = 0;
  int row_max = -1;
  int col_max = -1;

  int height() const noexcept { return row_max - row_min + 1; }
  int width() const noexcept { return col_max - col_min + 1; }
  bool empty() const noexcept { return row_max < row_min || col_max < col_min; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

// Uncompressed COCO-style RLE: column-major runs, starting with a (possibly
// empty) run of zeros.
std::vector<std::uint32_t> rle_encode(const Bitmap& bitmap);
Bitmap rle_decode(int height, int width, const std::vector<std::uint32_t>& counts);

struct Mask {
  std::string id;
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> rle;
  std::int64_t area = 0;
  BBox bbox;

  static Mask from_bitmap(std::string id, const Bitmap& bitmap);

  Bitmap decode() const { return rle_decode(height, width, rle); }

  friend bool operator==(const Mask&, const Mask&) = default;
};

// Tight box around set pixels; empty BBox if none.
BBox tight_bbox(const Bitmap& bitmap);

// Checks the stored area/bbox against the RLE payload and the image size.
Mask validate_mask(const Mask& mask, const ImageRef& image);

struct MaskSet {
  ImageRef image;
  std::vector<Mask> masks;
};

// Area descending, then id ascending.
bool mask_order(const Mask& a, const Mask& b);
void sort_masks(MaskSet& set);

enum class SubjectKind { WholeImage, Mask };

struct Subject {
  SubjectKind kind = SubjectKind::WholeImage;
  std::string mask_id;

  static Subject whole() { return {}; }
  static Subject mask(std::string id) { return {SubjectKind::Mask, std::move(id)}; }
  std::string label() const { return kind == SubjectKind::WholeImage ? "whole" : "mask:" + mask_id; }

  friend bool operator==(const Subject&, const Subject&) = default;
};

enum class ParseStatus { Parsed, Fallback };

struct ScoreRecord {
  Subject subject;
  int score = 1;
  std::string raw_response;
  ParseStatus parse_status = ParseStatus::Fallback;

  friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

enum class CropMode { BBox, MaskZeroPad, WholeOnly, BBoxPlusWhole };
enum class AggMode { AreaWeighted, Mean };
enum class StandardForm { Number, Word, Sentence };

const char* to_string(CropMode m);
const char* to_string(AggMode m);
const char* to_string(StandardForm f);
CropMode parse_crop_mode(const std::string& s);
AggMode parse_agg_mode(const std::string& s);
StandardForm parse_standard_form(const std::string& s);

inline constexpr int kDefaultLevels = 7;
inline constexpr int kDefaultCMax = 71;
inline constexpr double kDefaultAreaThresholdFrac = 0.02;

struct AggregationConfig {
  int k_levels = kDefaultLevels;
  double area_threshold_frac = kDefaultAreaThresholdFrac;
  int c_max = kDefaultCMax;
  CropMode crop_mode = CropMode::BBoxPlusWhole;
  AggMode agg_mode = AggMode::AreaWeighted;
  bool seg_score_enabled = true;
  StandardForm standard_form = StandardForm::Word;
  // Best level first: word_standard[0] labels score K.
  std::vector<std::string> word_standard;

  // Throws InvalidConfig.
  void validate() const;
};

// Config with word labels filled from the preset table for k_levels.
AggregationConfig default_config(int k_levels = kDefaultLevels);

struct ImageVerdict {
  std::string image_id;
  double s_global = 0.0;
  double s_local = 0.0;
  double s_seg = 0.0;
  double s_dog = 0.0;
  int mask_count = 0;
};

}  // namespace dogiqa
