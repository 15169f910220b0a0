#pragma once

#include <span>
#include <vector>

#include "dogiqa/core.hpp"

namespace dogiqa {

struct MosVector {
  std::vector<double> values;
  double min_gt = 0.0;
  double max_gt = 0.0;

  // Takes the extremes from the data. Throws DegenerateInput if constant.
  static MosVector from_values(std::vector<double> values);
};

// 1 + round_half_away((s* - min) / (max - min) * (K - 1)), in {1..K}.
int quantize_mos(double s_star, const MosVector& mos, int k_levels);

// Fractional ranks (1-based); ties share the mean of their positions.
std::vector<double> fractional_ranks(std::span<const double> x);

double plcc(std::span<const double> x, std::span<const double> y);
double srcc(std::span<const double> x, std::span<const double> y);

struct UpperBound {
  int k_levels = 0;
  double srcc = 0.0;
  double plcc = 0.0;
  double avg = 0.0;
};

UpperBound quantization_upper_bound(const MosVector& mos, int k_levels);

// True when the MOS spread is tiny relative to its magnitude.
bool near_degenerate(const MosVector& mos);

}  // namespace dogiqa
