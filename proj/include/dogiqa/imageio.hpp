#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dogiqa/core.hpp"

namespace dogiqa {

struct LoadedImage {
  ImageRef ref;
  Image pixels;
};

// Decodes any format OpenCV reads into 3-channel RGB. Throws Io.
LoadedImage load_image(const std::filesystem::path& path, std::string id);
Image decode_image(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_png(const Image& image);
void write_png(const std::filesystem::path& path, const Image& image);

}  // namespace dogiqa
