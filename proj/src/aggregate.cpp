#include "dogiqa/aggregate.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

namespace dogiqa {

WeightVector area_weights(std::span<const std::int64_t> areas) {
  if (areas.empty()) throw Error(ErrorCode::EmptyMaskSet, "cannot weight an empty mask set");
  double total = 0.0;
  for (auto a : areas) {
    if (a < 0) throw Error(ErrorCode::OutOfRange, "negative mask area");
    total += static_cast<double>(a);
  }
  if (total <= 0.0) throw Error(ErrorCode::EmptyMaskSet, "mask areas sum to zero");
  WeightVector w;
  w.reserve(areas.size());
  for (auto a : areas) w.push_back(static_cast<double>(a) / total);
  return w;
}

WeightVector area_weights(const MaskSet& masks) {
  std::vector<std::int64_t> areas;
  areas.reserve(masks.masks.size());
  for (const auto& m : masks.masks) areas.push_back(m.area);
  return area_weights(areas);
}

double local_score(std::span<const int> scores, std::span<const double> weights, AggMode mode) {
  if (scores.size() != weights.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(scores.size()) + " scores vs " +
                                               std::to_string(weights.size()) + " weights");
  }
  if (scores.empty()) throw Error(ErrorCode::EmptyMaskSet, "no scores to aggregate");
  double acc = 0.0;
  if (mode == AggMode::AreaWeighted) {
    for (std::size_t i = 0; i < scores.size(); ++i) acc += weights[i] * scores[i];
    return acc;
  }
  for (int s : scores) acc += s;
  return acc / static_cast<double>(scores.size());
}

double seg_score(int mask_count, const AggregationConfig& cfg) {
  if (mask_count < 0) throw Error(ErrorCode::OutOfRange, "negative mask count");
  if (cfg.c_max < 1) throw Error(ErrorCode::InvalidConfig, "c_max must be >= 1");
  const double k = cfg.k_levels;
  const double s = static_cast<double>(mask_count) * k / static_cast<double>(cfg.c_max);
  if (mask_count > cfg.c_max) {
    spdlog::warn("mask count {} exceeds c_max {}; segmentation score clamped to {}", mask_count,
                 cfg.c_max, cfg.k_levels);
    return k;
  }
  return std::clamp(s, 0.0, k);
}

ImageVerdict final_score(double s_global, double s_local, double s_seg, const AggregationConfig&) {
  ImageVerdict v;
  v.s_global = s_global;
  v.s_local = s_local;
  v.s_seg = s_seg;
  v.s_dog = (s_global + s_local) / 2.0 + s_seg;
  return v;
}

ImageVerdict compose_verdict(std::string image_id, std::optional<double> s_global,
                             std::optional<double> s_local, int mask_count,
                             const AggregationConfig& cfg) {
  if (!s_global && !s_local) {
    throw Error(ErrorCode::EmptyMaskSet, "image '" + image_id + "' has neither global nor local score");
  }
  const double g = s_global.value_or(*s_local);
  const double l = s_local.value_or(*s_global);
  const bool use_seg = cfg.seg_score_enabled && cfg.crop_mode != CropMode::WholeOnly;
  const double seg = use_seg ? seg_score(mask_count, cfg) : 0.0;
  ImageVerdict v = final_score(g, l, seg, cfg);
  v.image_id = std::move(image_id);
  v.mask_count = mask_count;
  return v;
}

}  // namespace dogiqa
