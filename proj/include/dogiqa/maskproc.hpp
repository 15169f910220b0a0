#pragma once

// Mask post-processing: small-mask filtering, remainder synthesis, and
// sub-image extraction for the supported crop modes.

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "dogiqa/core.hpp"

namespace dogiqa {

inline constexpr const char* kRemainderId = "remainder";
inline constexpr const char* kWholeId = "whole";

struct SubImage {
  std::string source_id;
  Image pixels;
  std::int64_t area_weight_raw = 0;
};

// Minimum mask area in pixels for a threshold fraction; masks with
// area >= this value survive.
double area_threshold_pixels(double frac, int height, int width);

// Keeps masks with area >= t*H*W, then appends the complement of their union
// (id "remainder") when it also reaches the threshold. Output is sorted.
MaskSet process_masks(const MaskSet& raw, const AggregationConfig& cfg);

SubImage extract_subimage(const Image& image, const Mask& mask, CropMode mode);
SubImage whole_subimage(const Image& image);

inline int count_masks(const MaskSet& processed) { return static_cast<int>(processed.masks.size()); }

// Mask file format: {"image_id", "size": [H, W], "masks": [{"id", "area",
// "rle": {"size": [H, W], "counts": [...]}}]}.
nlohmann::json mask_set_to_json(const MaskSet& set);

// Validates each mask against the declared size. `image` supplies identity
// fields; its dimensions are taken from the document.
MaskSet mask_set_from_json(const nlohmann::json& doc, ImageRef image = {});

void write_mask_file(const std::filesystem::path& path, const MaskSet& set);
MaskSet read_mask_file(const std::filesystem::path& path, ImageRef image = {});

// File name used for an image's mask document inside a masks directory.
std::string mask_file_name(const std::string& image_id);

}  // namespace dogiqa
