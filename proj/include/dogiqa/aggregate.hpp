#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dogiqa/core.hpp"

namespace dogiqa {

// Normalized mask areas, aligned with MaskSet ordering. Sums to 1.
using WeightVector = std::vector<double>;

WeightVector area_weights(const MaskSet& masks);
WeightVector area_weights(std::span<const std::int64_t> areas);

double local_score(std::span<const int> scores, std::span<const double> weights, AggMode mode);

// c*K/c_max, clamped to [0, K]; a clamp means c_max is stale and is logged.
double seg_score(int mask_count, const AggregationConfig& cfg);

// (s_global + s_local) / 2 + s_seg.
ImageVerdict final_score(double s_global, double s_local, double s_seg, const AggregationConfig& cfg);

// Resolves the ablation substitutions before calling final_score:
// a missing global score takes the local one and vice versa; WholeOnly runs
// and runs with the segmentation bonus disabled use s_seg = 0.
ImageVerdict compose_verdict(std::string image_id, std::optional<double> s_global,
                             std::optional<double> s_local, int mask_count,
                             const AggregationConfig& cfg);

}  // namespace dogiqa
