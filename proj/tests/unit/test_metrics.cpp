#include <random>

#include <gtest/gtest.h>

#include "../support/oracles.hpp"
#include "dogiqa/metrics.hpp"

using namespace dogiqa;

namespace {
MosVector mos_0_100() { return MosVector::from_values({0.0, 25.0, 50.0, 100.0}); }
}  // namespace

TEST(QuantizeMos, Examples) {
  const auto mos = mos_0_100();
  EXPECT_EQ(quantize_mos(0.0, mos, 7), 1);
  EXPECT_EQ(quantize_mos(100.0, mos, 7), 7);
  EXPECT_EQ(quantize_mos(50.0, mos, 7), 4);
  // 25 -> 1.5 -> rounds away from zero.
  EXPECT_EQ(quantize_mos(25.0, mos, 7), 3);
  try {
    quantize_mos(101.0, mos, 7);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutOfRange);
  }
}

TEST(QuantizeMos, MonotoneForEveryK) {
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> u(-3.0, 17.0);
  std::vector<double> v(2000);
  for (auto& x : v) x = u(rng);
  std::sort(v.begin(), v.end());
  const auto mos = MosVector::from_values(v);
  for (int k : {2, 3, 5, 7, 9, 11}) {
    int prev = 1;
    for (double x : v) {
      const int q = quantize_mos(x, mos, k);
      ASSERT_GE(q, prev);
      ASSERT_LE(q, k);
      prev = q;
    }
  }
}

TEST(Srcc, Examples) {
  const std::vector<double> x{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(srcc(x, x), 1.0);
  const std::vector<double> rev{4, 3, 2, 1};
  EXPECT_DOUBLE_EQ(srcc(x, rev), -1.0);
  const std::vector<double> tied{1, 2, 2, 4};
  const std::vector<double> y{10, 20, 30, 40};
  EXPECT_NEAR(srcc(tied, y), 0.9486832980505139, 1e-12);

  const std::vector<double> v1{17, 86, 60, 77, 47, 3, 70, 47, 88, 92};
  const std::vector<double> v2{70, 29, 85, 61, 80, 34, 60, 31, 73, 66};
  EXPECT_NEAR(srcc(v1, v2), 0.024316221747202587, 1e-12);
}

TEST(Srcc, FractionalRanks) {
  const std::vector<double> x{3, 1, 3, 2, 3};
  EXPECT_EQ(fractional_ranks(x), (std::vector<double>{4, 1, 4, 2, 4}));
}

TEST(Plcc, Examples) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  std::vector<double> affine, neg;
  for (double v : x) {
    affine.push_back(2 * v + 3);
    neg.push_back(-v);
  }
  EXPECT_NEAR(plcc(x, affine), 1.0, 1e-12);
  EXPECT_NEAR(plcc(x, neg), -1.0, 1e-12);
  const std::vector<double> a{1, 2, 3}, b{1, 3, 2};
  EXPECT_NEAR(plcc(a, b), 0.5, 1e-12);
}

TEST(Correlation, DegenerateAndLengthErrors) {
  const std::vector<double> c{2, 2, 2}, x{1, 2, 3}, two{1, 2};
  try {
    plcc(c, x);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateInput);
  }
  EXPECT_THROW(srcc(x, c), Error);
  try {
    srcc(x, two);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
  }
  const std::vector<double> one{1};
  EXPECT_THROW(plcc(one, one), Error);
  EXPECT_THROW(MosVector::from_values({5, 5}), Error);
}

TEST(Correlation, MatchesBruteForceOracleOnTieHeavyData) {
  std::mt19937 rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 120)(rng);
    const int levels = std::uniform_int_distribution<int>(2, 8)(rng);
    std::uniform_int_distribution<int> val(0, levels);
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = val(rng);
      y[i] = val(rng) * 0.5 + x[i] * (trial % 3);
    }
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) continue;
    if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) continue;
    ASSERT_NEAR(srcc(x, y), oracle::spearman(x, y), 1e-9);
    ASSERT_NEAR(plcc(x, y), oracle::pearson(x, y), 1e-9);
  }
}

TEST(UpperBound, FrozenSmallVector) {
  const auto mos = MosVector::from_values({0, 12.5, 25, 37.5, 50, 62.5, 75, 87.5, 100, 33.3, 66.6, 99.0});
  const auto ub = quantization_upper_bound(mos, 7);
  EXPECT_NEAR(ub.srcc, 0.9876864257062945, 1e-12);
  EXPECT_NEAR(ub.plcc, 0.992435489353265, 1e-12);
  EXPECT_NEAR(ub.avg, 0.5 * (ub.srcc + ub.plcc), 1e-15);
}

TEST(UpperBound, LosslessAndTwoPoint) {
  const auto exact = MosVector::from_values({1, 2, 3, 4, 5, 3, 2});
  const auto ub = quantization_upper_bound(exact, 5);
  EXPECT_NEAR(ub.srcc, 1.0, 1e-12);
  EXPECT_NEAR(ub.plcc, 1.0, 1e-12);

  const auto two = MosVector::from_values({0, 100, 0, 100, 100});
  for (int k : {2, 3, 7, 9}) EXPECT_NEAR(quantization_upper_bound(two, k).avg, 1.0, 1e-12);
}

TEST(UpperBound, UniformSamplesMatchStraightLineOracle) {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::vector<double> v(10000);
  for (auto& x : v) x = u(rng);
  const auto mos = MosVector::from_values(v);
  const auto ub = quantization_upper_bound(mos, 7);

  std::vector<double> q;
  for (double x : v) q.push_back(oracle::quantize(x, mos.min_gt, mos.max_gt, 7));
  EXPECT_NEAR(ub.srcc, oracle::spearman(q, v), 1e-9);
  EXPECT_NEAR(ub.plcc, oracle::pearson(q, v), 1e-9);
  EXPECT_GT(ub.avg, 0.95);
}

TEST(UpperBound, NearDegenerateDetection) {
  EXPECT_TRUE(near_degenerate(MosVector::from_values({5, 5, 5, 5 + 1e-9})));
  EXPECT_FALSE(near_degenerate(mos_0_100()));
}
