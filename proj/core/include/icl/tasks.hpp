#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "icl/rng.hpp"

namespace icl {

// Law of the random regression function F_beta = sum_{k<=k_max} sum_l beta_{k,l} psi_{k,l}.
// Coefficients are independent, uniform on [-sqrt(3 v_k), sqrt(3 v_k)] with
//   v_k = c_beta * 2^{-k(2 alpha + d)} * (k + 2)^{-log_power}.
struct TaskDistribution {
  int d = 1;
  double alpha = 1.0;
  int m = 2;
  int k_max = 3;
  double c_beta = 1.0;
  // Noise half-width; xi ~ U[-sigma, sigma].
  double sigma = 0.1;
  // Output clip B-bar; zero selects sup_bound().
  double output_clip = 0.0;
  // Exponent of the summable log surrogate (k+2)^{-log_power}.
  double log_power = 2.0;
  // Besov indices; recorded for provenance, they do not enter the law.
  double besov_p = std::numeric_limits<double>::infinity();
  double besov_q = std::numeric_limits<double>::infinity();

  void validate() const;
  double variance(int k) const;
  double amplitude(int k) const;
  std::size_t side(int k) const;
  std::size_t layer_size(int k) const;
  // Deterministic bound on sup |F_beta| from the partition of unity.
  double sup_bound() const;
  double clip_level() const;
};

struct TaskInstance {
  TaskDistribution dist;
  std::uint64_t seed = 0;
  // layers[k][local] = beta_{k,l}, local index row-major over l + m.
  std::vector<std::vector<double>> layers;
};

TaskInstance sample_task(const TaskDistribution& dist, std::uint64_t seed);

double eval_task(const TaskInstance& task, std::span<const double> x);
// Truncation F_{beta, <= max_resolution}; resolutions above k_max contribute nothing.
double eval_task(const TaskInstance& task, std::span<const double> x, int max_resolution);
// Per-layer contributions sum_l beta_{k,l} psi_{k,l}(x), k = 0..k_max.
std::vector<double> eval_layers(const TaskInstance& task, std::span<const double> x);

// One in-context episode.
struct Prompt {
  int d = 1;
  std::vector<double> x;        // n x d, row-major
  std::vector<double> y;        // n noisy labels
  std::vector<double> query_x;  // d
  double query_y = 0.0;         // noisy query label
  double query_target = 0.0;    // F_beta(query_x), for risk evaluation
  std::uint64_t task_seed = 0;
  std::shared_ptr<const TaskInstance> task;  // optional, diagnostics only

  std::size_t size() const { return y.size(); }
  std::span<const double> point(std::size_t k) const {
    return {x.data() + k * static_cast<std::size_t>(d), static_cast<std::size_t>(d)};
  }
};

Prompt sample_prompt(const TaskInstance& task, std::size_t n, std::uint64_t seed);
Prompt sample_prompt(std::shared_ptr<const TaskInstance> task, std::size_t n, std::uint64_t seed);

// Draws `count` prompts, task t from stream (master, task_family, t) and its
// prompt from (master, prompt_family, t). Independent of thread scheduling.
std::vector<Prompt> draw_prompts(const TaskDistribution& dist, std::size_t n, std::size_t count,
                                 std::uint64_t master, Stream task_family, Stream prompt_family,
                                 bool keep_task = false);

// JSON round trip (schemas "icl-lab/task/v1" and "icl-lab/prompt/v1").
std::string task_to_json(const TaskInstance& task);
TaskInstance task_from_json(std::string_view text);
std::string prompt_to_json(const Prompt& prompt);
Prompt prompt_from_json(std::string_view text);

}  // namespace icl
