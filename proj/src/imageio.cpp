#include "dogiqa/imageio.hpp"

#include <fstream>
#include <iterator>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "dogiqa/digest.hpp"

namespace dogiqa {

namespace {

Image from_mat(const cv::Mat& bgr) {
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  Image img(rgb.rows, rgb.cols, 3);
  for (int r = 0; r < rgb.rows; ++r) {
    const auto* row = rgb.ptr<std::uint8_t>(r);
    std::copy(row, row + rgb.cols * 3, img.data.begin() + img.index(r, 0));
  }
  return img;
}

cv::Mat to_mat(const Image& image) {
  const int type = image.channels == 1 ? CV_8UC1 : image.channels == 4 ? CV_8UC4 : CV_8UC3;
  cv::Mat view(image.height, image.width, type, const_cast<std::uint8_t*>(image.data.data()));
  cv::Mat out;
  if (image.channels == 3) {
    cv::cvtColor(view, out, cv::COLOR_RGB2BGR);
  } else if (image.channels == 4) {
    cv::cvtColor(view, out, cv::COLOR_RGBA2BGRA);
  } else {
    out = view.clone();
  }
  return out;
}

}  // namespace

Image decode_image(std::span<const std::uint8_t> bytes) {
  cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat bgr;
  try {
    bgr = cv::imdecode(buf, cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    throw Error(ErrorCode::Io, std::string("image decode failed: ") + e.what());
  }
  if (bgr.empty()) throw Error(ErrorCode::Io, "image decode failed");
  return from_mat(bgr);
}

LoadedImage load_image(const std::filesystem::path& path, std::string id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read image " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  LoadedImage out;
  try {
    out.pixels = decode_image(bytes);
  } catch (const Error&) {
    throw Error(ErrorCode::Io, "cannot decode image " + path.string());
  }
  out.ref.id = std::move(id);
  out.ref.path = path;
  out.ref.height = out.pixels.height;
  out.ref.width = out.pixels.width;
  out.ref.content_hash = sha256(bytes);
  return out;
}

std::vector<std::uint8_t> encode_png(const Image& image) {
  if (image.empty()) throw Error(ErrorCode::Io, "cannot encode an empty raster");
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", to_mat(image), out)) throw Error(ErrorCode::Io, "PNG encode failed");
  return out;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  const auto bytes = encode_png(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace dogiqa
