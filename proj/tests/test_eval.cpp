#include <gtest/gtest.h>

#include <cmath>

#include "icl/eval.hpp"
#include "icl/oracle.hpp"

using namespace icl;

namespace {

ContextPredictor perfect() {
  return [](const Prompt& p, std::span<const double> queries) {
    std::vector<double> out;
    const auto d = static_cast<std::size_t>(p.d);
    for (std::size_t i = 0; i < queries.size() / d; ++i) out.push_back(eval_task(*p.task, queries.subspan(i * d, d)));
    return out;
  };
}

}  // namespace

TEST(McRisk, ZeroPredictorClosedForm) {
  TaskDistribution dist;
  dist.d = 2;
  dist.k_max = 0;
  const BasisLayout layout(2, 2, 0);
  const double closed = dist.variance(0) * gram_matrix(layout).values.trace();
  const auto rep = mc_risk(zero_predictor(), dist, 4, 2000, 10, 1);
  EXPECT_NEAR(rep.estimate, closed, 3.0 * rep.stderr_);
  EXPECT_EQ(rep.count(), 20000u);
}

TEST(McRisk, PerfectPredictorHasZeroRisk) {
  TaskDistribution dist;
  const auto rep = mc_risk(perfect(), dist, 8, 50, 5, 2);
  EXPECT_EQ(rep.estimate, 0.0);
  const auto noisy = mc_risk(perfect(), dist, 8, 400, 20, 2, RiskTarget::Noisy);
  EXPECT_NEAR(noisy.estimate, dist.sigma * dist.sigma / 3.0, 3.0 * noisy.stderr_);
}

TEST(McRisk, StandardErrorShrinksWithTasks) {
  TaskDistribution dist;
  const auto a = mc_risk(zero_predictor(), dist, 4, 1000, 4, 3);
  const auto b = mc_risk(zero_predictor(), dist, 4, 2000, 4, 3);
  EXPECT_NEAR(a.stderr_ / b.stderr_, std::sqrt(2.0), 0.15 * std::sqrt(2.0));
}

TEST(McRisk, DeterministicAndBoundedForClippedZero) {
  TaskDistribution dist;
  dist.d = 2;
  const auto a = mc_risk(zero_predictor(), dist, 4, 100, 5, 4);
  const auto b = mc_risk(zero_predictor(), dist, 4, 100, 5, 4);
  EXPECT_EQ(a.estimate, b.estimate);
  EXPECT_EQ(a.fingerprint, b.fingerprint);
  EXPECT_LE(a.estimate, dist.clip_level() * dist.clip_level());
}

TEST(RateResolution, RoundsLogScale) {
  EXPECT_EQ(rate_resolution(1024, 1.0, 1), 3);
  EXPECT_EQ(rate_resolution(16, 1.0, 1), 1);
  EXPECT_EQ(rate_resolution(1024, 2.0, 1), 2);
  EXPECT_EQ(rate_resolution(512, 1.0, 8), 1);
}

TEST(SlopeFit, ExactPowerAndConstant) {
  std::vector<std::pair<double, double>> pts, flat;
  for (double x : {16.0, 32.0, 64.0, 128.0, 256.0}) {
    pts.emplace_back(x, std::pow(x, -2.0 / 3.0));
    flat.emplace_back(x, 0.7);
  }
  EXPECT_NEAR(slope_fit(pts).slope, -2.0 / 3.0, 1e-12);
  EXPECT_NEAR(slope_fit(flat).slope, 0.0, 1e-12);
  const std::vector<std::pair<double, double>> two = {{1.0, 1.0}, {2.0, 0.5}};
  EXPECT_THROW(slope_fit(two), std::invalid_argument);
}

TEST(SlopeFit, NoisyPowerWithinThreeStderr) {
  Rng rng(12);
  int inside = 0;
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i < 8; ++i) {
      const double x = std::ldexp(1.0, 4 + i);
      pts.emplace_back(x, std::pow(x, -2.0 / 3.0) * (1.0 + rng.uniform(-0.05, 0.05)));
    }
    const auto fit = slope_fit(pts);
    inside += std::abs(fit.slope + 2.0 / 3.0) <= 3.0 * fit.stderr_;
  }
  EXPECT_GE(inside, 48);
}

TEST(SpectralNorm, MatchesEigenSolver) {
  Rng rng(13);
  for (int t = 0; t < 5; ++t) {
    Eigen::MatrixXd a(7, 7);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform(-1, 1);
    a = (a + a.transpose()).eval();
    const double want = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a).eigenvalues().cwiseAbs().maxCoeff();
    EXPECT_NEAR(spectral_norm_sym(a), want, 1e-8 * want);
  }
  EXPECT_EQ(spectral_norm_sym(Eigen::MatrixXd::Zero(3, 3)), 0.0);
}

TEST(Concentration, ConstantFeatureIsExact) {
  FeatureMap one{1, [](std::span<const double>, std::span<double> out) { out[0] = 1.0; }};
  const Eigen::MatrixXd gram = Eigen::MatrixXd::Identity(1, 1);
  for (std::size_t n : {1u, 16u, 256u}) EXPECT_EQ(concentration_stat(one, gram, 1, n, 10, 1), 0.0);
}

TEST(Concentration, DecreasesWithContextLength) {
  const BasisLayout layout(1, 2, 3);
  double prev = 1e300;
  for (std::size_t n : {64u, 256u, 1024u}) {
    const double s = concentration_stat(layout, n, 200, 7);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 0.6 * prev);
    prev = s;
  }
}

TEST(Truncation, ZeroPastSupportAndMonotone) {
  TaskDistribution dist;
  dist.k_max = 4;
  const std::vector<int> ks = {0, 1, 2, 3, 4, 6};
  const auto rows = truncation_error(dist, ks, 100, 100, 8);
  ASSERT_EQ(rows.size(), ks.size());
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LE(rows[i].error, rows[i - 1].error);
  EXPECT_EQ(rows[4].error, 0.0);
  EXPECT_EQ(rows[5].error, 0.0);
  EXPECT_EQ(rows[2].N, 6u);
}
