#include "dogiqa/maskproc.hpp"

#include <fstream>

namespace dogiqa {

double area_threshold_pixels(double frac, int height, int width) {
  return frac * static_cast<double>(height) * static_cast<double>(width);
}

MaskSet process_masks(const MaskSet& raw, const AggregationConfig& cfg) {
  const int h = raw.image.height;
  const int w = raw.image.width;
  const double threshold = area_threshold_pixels(cfg.area_threshold_frac, h, w);

  MaskSet out;
  out.image = raw.image;
  Bitmap covered(h, w);
  for (const auto& m : raw.masks) {
    if (static_cast<double>(m.area) < threshold) continue;
    out.masks.push_back(m);
    const Bitmap bits = m.decode();
    for (std::size_t i = 0; i < bits.bits.size(); ++i) covered.bits[i] |= bits.bits[i];
  }

  Bitmap remainder(h, w);
  for (std::size_t i = 0; i < covered.bits.size(); ++i) remainder.bits[i] = covered.bits[i] ? 0 : 1;
  const auto remainder_area = remainder.count();
  if (remainder_area > 0 && static_cast<double>(remainder_area) >= threshold) {
    out.masks.push_back(Mask::from_bitmap(kRemainderId, remainder));
  }
  sort_masks(out);
  return out;
}

SubImage extract_subimage(const Image& image, const Mask& mask, CropMode mode) {
  if (mode == CropMode::WholeOnly) {
    SubImage whole = whole_subimage(image);
    whole.source_id = mask.id;
    whole.area_weight_raw = mask.area;
    return whole;
  }
  if (mask.bbox.empty()) {
    throw Error(ErrorCode::DegenerateBBox, "mask '" + mask.id + "' has an empty bounding box");
  }
  if (mask.height != image.height || mask.width != image.width) {
    throw Error(ErrorCode::DimensionMismatch, "mask '" + mask.id + "' does not match the raster");
  }

  const BBox& box = mask.bbox;
  SubImage sub;
  sub.source_id = mask.id;
  sub.area_weight_raw = mask.area;
  sub.pixels = Image(box.height(), box.width(), image.channels);

  Bitmap bits;
  if (mode == CropMode::MaskZeroPad) bits = mask.decode();

  for (int r = 0; r < box.height(); ++r) {
    for (int c = 0; c < box.width(); ++c) {
      const int sr = box.row_min + r;
      const int sc = box.col_min + c;
      const bool keep = mode != CropMode::MaskZeroPad || bits.get(sr, sc);
      for (int ch = 0; ch < image.channels; ++ch) {
        sub.pixels.at(r, c, ch) = keep ? image.at(sr, sc, ch) : 0;
      }
    }
  }
  return sub;
}

SubImage whole_subimage(const Image& image) {
  return {kWholeId, image, static_cast<std::int64_t>(image.height) * image.width};
}

nlohmann::json mask_set_to_json(const MaskSet& set) {
  nlohmann::json masks = nlohmann::json::array();
  for (const auto& m : set.masks) {
    masks.push_back({{"id", m.id},
                     {"area", m.area},
                     {"rle", {{"size", {m.height, m.width}}, {"counts", m.rle}}}});
  }
  return {{"image_id", set.image.id},
          {"size", {set.image.height, set.image.width}},
          {"masks", std::move(masks)}};
}

MaskSet mask_set_from_json(const nlohmann::json& doc, ImageRef image) {
  try {
    const auto size = doc.at("size");
    const int h = size.at(0).get<int>();
    const int w = size.at(1).get<int>();
    if (image.height != 0 && (image.height != h || image.width != w)) {
      throw Error(ErrorCode::DimensionMismatch,
                  "mask file size " + std::to_string(h) + "x" + std::to_string(w) + " vs image " +
                      std::to_string(image.height) + "x" + std::to_string(image.width));
    }
    image.height = h;
    image.width = w;
    if (image.id.empty()) image.id = doc.at("image_id").get<std::string>();

    MaskSet set;
    set.image = image;
    for (const auto& jm : doc.at("masks")) {
      Mask m;
      m.id = jm.at("id").get<std::string>();
      const auto& rle = jm.at("rle");
      m.height = rle.at("size").at(0).get<int>();
      m.width = rle.at("size").at(1).get<int>();
      m.rle = rle.at("counts").get<std::vector<std::uint32_t>>();
      m.area = jm.at("area").get<std::int64_t>();
      if (m.height != h || m.width != w) {
        throw Error(ErrorCode::DimensionMismatch, "mask '" + m.id + "' size differs from document size");
      }
      m.bbox = tight_bbox(m.decode());
      set.masks.push_back(validate_mask(m, image));
    }
    sort_masks(set);
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRLE, std::string("mask document: ") + e.what());
  }
}

void write_mask_file(const std::filesystem::path& path, const MaskSet& set) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp);
    out << mask_set_to_json(set).dump() << '\n';
  }
  std::filesystem::rename(tmp, path);
}

MaskSet read_mask_file(const std::filesystem::path& path, ImageRef image) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read mask file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRLE, path.string() + ": " + e.what());
  }
  return mask_set_from_json(doc, std::move(image));
}

std::string mask_file_name(const std::string& image_id) {
  std::string name;
  for (char ch : image_id) {
    name += (ch == '/' || ch == '\\' || ch == ':') ? '_' : ch;
  }
  return name + ".json";
}

}  // namespace dogiqa
