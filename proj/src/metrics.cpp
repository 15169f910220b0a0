#include "dogiqa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dogiqa {

namespace {

void check_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(x.size()) + " vs " + std::to_string(y.size()) + " samples");
  }
  if (x.size() < 2) throw Error(ErrorCode::DegenerateInput, "need at least 2 samples");
}

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

MosVector MosVector::from_values(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::DegenerateInput, "empty MOS vector");
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::DegenerateInput, "non-finite MOS value");
  }
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  MosVector m;
  m.min_gt = *lo;
  m.max_gt = *hi;
  m.values = std::move(values);
  if (!(m.max_gt > m.min_gt)) throw Error(ErrorCode::DegenerateInput, "MOS values are constant");
  return m;
}

int quantize_mos(double s_star, const MosVector& mos, int k_levels) {
  if (k_levels < 2) throw Error(ErrorCode::InvalidConfig, "K must be >= 2");
  if (!(mos.max_gt > mos.min_gt)) throw Error(ErrorCode::DegenerateInput, "MOS range is empty");
  if (!(s_star >= mos.min_gt && s_star <= mos.max_gt)) {
    throw Error(ErrorCode::OutOfRange, "MOS value outside [min_gt, max_gt]");
  }
  const double scaled = (s_star - mos.min_gt) / (mos.max_gt - mos.min_gt) * (k_levels - 1);
  // std::round rounds half away from zero.
  const int q = 1 + static_cast<int>(std::round(scaled));
  return std::clamp(q, 1, k_levels);
}

std::vector<double> fractional_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    // Positions i..j (0-based) share rank mean(i+1 .. j+1).
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t p = i; p <= j; ++p) ranks[order[p]] = r;
    i = j + 1;
  }
  return ranks;
}

double plcc(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) throw Error(ErrorCode::DegenerateInput, "constant input vector");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double srcc(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const auto rx = fractional_ranks(x);
  const auto ry = fractional_ranks(y);
  return plcc(rx, ry);
}

UpperBound quantization_upper_bound(const MosVector& mos, int k_levels) {
  std::vector<double> q;
  q.reserve(mos.values.size());
  for (double v : mos.values) q.push_back(quantize_mos(v, mos, k_levels));
  UpperBound ub;
  ub.k_levels = k_levels;
  ub.srcc = srcc(q, mos.values);
  ub.plcc = plcc(q, mos.values);
  ub.avg = 0.5 * (ub.srcc + ub.plcc);
  return ub;
}

bool near_degenerate(const MosVector& mos) {
  const double scale = std::max({1.0, std::abs(mos.min_gt), std::abs(mos.max_gt)});
  return (mos.max_gt - mos.min_gt) < 1e-6 * scale;
}

}  // namespace dogiqa
