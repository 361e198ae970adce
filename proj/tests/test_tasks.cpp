#include <gtest/gtest.h>

#include <cmath>

#include "icl/tasks.hpp"
#include "icl/wavelet.hpp"

using namespace icl;

namespace {

TaskDistribution small_law(int d = 1) {
  TaskDistribution dist;
  dist.d = d;
  dist.k_max = 3;
  return dist;
}

}  // namespace

TEST(TaskLaw, VarianceFormula) {
  TaskDistribution dist;
  dist.d = 2;
  dist.alpha = 1.5;
  dist.c_beta = 3.0;
  EXPECT_NEAR(dist.variance(3), 3.0 * std::pow(2.0, -3 * 5.0) / 25.0, 1e-18);
  dist.log_power = 0.0;
  EXPECT_NEAR(dist.variance(3), 3.0 * std::pow(2.0, -15.0), 1e-18);
}

TEST(TaskLaw, SameSeedSameCoefficients) {
  const auto a = sample_task(small_law(2), 99);
  const auto b = sample_task(small_law(2), 99);
  EXPECT_EQ(a.layers, b.layers);
  EXPECT_NE(a.layers, sample_task(small_law(2), 100).layers);
}

TEST(TaskLaw, EmpiricalVarianceAtLayerThree) {
  TaskDistribution dist = small_law();
  const double v3 = dist.variance(3);
  const int draws = 100000;
  double s2 = 0.0;
  for (int t = 0; t < draws; ++t) {
    const double b = sample_task(dist, stream_seed(5, Stream::task, t)).layers[3][4];
    EXPECT_LE(std::abs(b), dist.amplitude(3));
    s2 += b * b;
  }
  EXPECT_NEAR(s2 / draws / v3, 1.0, 0.05);
}

TEST(TaskLaw, RejectsInvalidSettings) {
  TaskDistribution dist;
  dist.m = 3;
  EXPECT_THROW(dist.validate(), std::invalid_argument);
  dist = TaskDistribution{};
  dist.alpha = 0.0;
  EXPECT_THROW(dist.validate(), std::invalid_argument);
  dist = TaskDistribution{};
  dist.sigma = -1.0;
  EXPECT_THROW(dist.validate(), std::invalid_argument);
}

TEST(EvalTask, ZeroAndSingleCoefficient) {
  TaskDistribution dist = small_law();
  auto task = sample_task(dist, 1);
  for (auto& layer : task.layers) std::fill(layer.begin(), layer.end(), 0.0);
  const double x[] = {0.37};
  EXPECT_EQ(eval_task(task, x), 0.0);
  const std::vector<int> ell0{0};
  task.layers[0][BasisLayout(1, 2, 0).local_index(0, ell0)] = 1.0;
  const double half[] = {0.5};
  EXPECT_NEAR(eval_task(task, half), 0.125, 1e-15);
}

TEST(EvalTask, LinearInCoefficients) {
  const TaskDistribution dist = small_law(2);
  const auto a = sample_task(dist, 1);
  const auto b = sample_task(dist, 2);
  auto c = a;
  for (std::size_t k = 0; k < c.layers.size(); ++k) {
    for (std::size_t j = 0; j < c.layers[k].size(); ++j) c.layers[k][j] += b.layers[k][j];
  }
  Rng rng(7);
  for (int t = 0; t < 200; ++t) {
    const double x[] = {rng.uniform(), rng.uniform()};
    EXPECT_NEAR(eval_task(c, x), eval_task(a, x) + eval_task(b, x), 1e-12);
  }
}

TEST(EvalTask, LayersSumToValueAndTruncate) {
  const auto task = sample_task(small_law(2), 3);
  const double x[] = {0.2, 0.9};
  const auto layers = eval_layers(task, x);
  double s = 0.0;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    s += layers[k];
    EXPECT_NEAR(eval_task(task, x, static_cast<int>(k)), s, 1e-12);
  }
  EXPECT_NEAR(eval_task(task, x), s, 1e-12);
  EXPECT_NEAR(eval_task(task, x, 50), s, 1e-12);
}

TEST(EvalTask, SupBoundHolds) {
  TaskDistribution dist = small_law(1);
  dist.k_max = 6;
  Rng rng(8);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const auto task = sample_task(dist, stream_seed(9, Stream::task, t));
    for (int i = 0; i < 10; ++i) {
      const double x[] = {rng.uniform()};
      worst = std::max(worst, std::abs(eval_task(task, x)));
    }
  }
  EXPECT_LE(worst, dist.sup_bound());
}

TEST(Prompt, NoiselessLabelsExact) {
  TaskDistribution dist = small_law(2);
  dist.sigma = 0.0;
  const auto task = sample_task(dist, 4);
  const auto p = sample_prompt(task, 64, 5);
  for (std::size_t k = 0; k < p.size(); ++k) EXPECT_EQ(p.y[k], eval_task(task, p.point(k)));
  EXPECT_EQ(p.query_y, p.query_target);
}

TEST(Prompt, CovariatesInCubeAndNoiseMoments) {
  TaskDistribution dist = small_law(1);
  dist.sigma = 0.2;
  const std::size_t n = 256;
  double mean_abs_mean = 0.0;
  const int prompts = 200;
  for (int t = 0; t < prompts; ++t) {
    const auto task = sample_task(dist, stream_seed(2, Stream::task, t));
    const auto p = sample_prompt(task, n, stream_seed(2, Stream::prompt, t));
    double mean = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      ASSERT_GE(p.x[k], 0.0);
      ASSERT_LE(p.x[k], 1.0);
      const double r = p.y[k] - eval_task(task, p.point(k));
      ASSERT_LE(std::abs(r), dist.sigma);
      mean += r;
    }
    mean_abs_mean += std::abs(mean / n);
  }
  // E|mean| ~ sigma / sqrt(3n) * sqrt(2/pi) < 3 sigma / sqrt(12 n).
  EXPECT_LE(mean_abs_mean / prompts, 3.0 * dist.sigma / std::sqrt(12.0 * n));
}

TEST(Prompt, QuerySharedAcrossContextLengths) {
  const auto task = sample_task(small_law(1), 6);
  const auto a = sample_prompt(task, 8, 77);
  const auto b = sample_prompt(task, 512, 77);
  EXPECT_EQ(a.query_x, b.query_x);
  EXPECT_EQ(a.query_y, b.query_y);
  EXPECT_THROW(sample_prompt(task, 0, 1), std::invalid_argument);
}

TEST(Prompt, DrawIsScheduleIndependent) {
  const auto a = draw_prompts(small_law(2), 16, 20, 3, Stream::task, Stream::prompt);
  const auto b = draw_prompts(small_law(2), 16, 20, 3, Stream::task, Stream::prompt);
  for (std::size_t t = 0; t < a.size(); ++t) {
    EXPECT_EQ(a[t].x, b[t].x);
    EXPECT_EQ(a[t].y, b[t].y);
  }
}

TEST(Json, TaskAndPromptRoundTrip) {
  const auto task = sample_task(small_law(2), 11);
  const auto back = task_from_json(task_to_json(task));
  EXPECT_EQ(back.layers, task.layers);
  EXPECT_EQ(back.seed, task.seed);
  EXPECT_EQ(back.dist.alpha, task.dist.alpha);
  const auto p = sample_prompt(task, 9, 12);
  const auto q = prompt_from_json(prompt_to_json(p));
  EXPECT_EQ(q.x, p.x);
  EXPECT_EQ(q.y, p.y);
  EXPECT_EQ(q.query_x, p.query_x);
  EXPECT_EQ(q.query_y, p.query_y);
  EXPECT_THROW(task_from_json(R"({"schema":"other"})"), std::invalid_argument);
}
