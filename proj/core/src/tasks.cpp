#include "icl/tasks.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "icl/parallel.hpp"
#include "icl/wavelet.hpp"

namespace icl {

using json = nlohmann::json;

void TaskDistribution::validate() const {
  if (d < 1 || d > 32) throw std::invalid_argument("TaskDistribution: d must be in [1, 32]");
  if (m < 2 || m % 2 != 0 || m > 14) {
    throw std::invalid_argument("TaskDistribution: m must be even and in [2, 14]");
  }
  if (!(alpha > 0.0)) throw std::invalid_argument("TaskDistribution: alpha must be positive");
  if (k_max < 0 || k_max > 24) throw std::invalid_argument("TaskDistribution: k_max must be in [0, 24]");
  if (!(c_beta >= 0.0)) throw std::invalid_argument("TaskDistribution: c_beta must be >= 0");
  if (!(sigma >= 0.0)) throw std::invalid_argument("TaskDistribution: sigma must be >= 0");
  if (!(output_clip >= 0.0)) throw std::invalid_argument("TaskDistribution: output_clip must be >= 0");
  if (!(log_power >= 0.0)) throw std::invalid_argument("TaskDistribution: log_power must be >= 0");
  double total = 0.0;
  for (int k = 0; k <= k_max; ++k) total += static_cast<double>(layer_size(k));
  if (total > 5e7) throw std::invalid_argument("TaskDistribution: too many coefficients per task");
}

double TaskDistribution::variance(int k) const {
  return c_beta * std::pow(2.0, -k * (2.0 * alpha + d)) * std::pow(k + 2.0, -log_power);
}

double TaskDistribution::amplitude(int k) const { return std::sqrt(3.0 * variance(k)); }

std::size_t TaskDistribution::side(int k) const {
  return (std::size_t{1} << k) + static_cast<std::size_t>(m);
}

std::size_t TaskDistribution::layer_size(int k) const {
  std::size_t size = 1;
  for (int i = 0; i < d; ++i) size *= side(k);
  return size;
}

double TaskDistribution::sup_bound() const {
  double bound = 0.0;
  for (int k = 0; k <= k_max; ++k) bound += amplitude(k) * std::pow(2.0, 0.5 * k * d);
  return bound;
}

double TaskDistribution::clip_level() const { return output_clip > 0.0 ? output_clip : sup_bound(); }

TaskInstance sample_task(const TaskDistribution& dist, std::uint64_t seed) {
  dist.validate();
  TaskInstance task;
  task.dist = dist;
  task.seed = seed;
  task.layers.resize(static_cast<std::size_t>(dist.k_max) + 1);
  Rng rng(seed);
  for (int k = 0; k <= dist.k_max; ++k) {
    const double a = dist.amplitude(k);
    auto& layer = task.layers[static_cast<std::size_t>(k)];
    layer.resize(dist.layer_size(k));
    for (double& beta : layer) beta = a * (2.0 * rng.uniform() - 1.0);
  }
  return task;
}

namespace {

double layer_value(const TaskInstance& task, int k, std::span<const double> x) {
  const TaskDistribution& dist = task.dist;
  const auto& beta = task.layers[static_cast<std::size_t>(k)];
  double layer_sum = 0.0;
  for_each_active(dist.d, dist.m, k, x,
                  [&](std::size_t local, double omega) { layer_sum += beta[local] * omega; });
  return std::pow(2.0, 0.5 * k * dist.d) * layer_sum;
}

void check_point(const TaskInstance& task, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(task.dist.d)) {
    throw std::invalid_argument("eval_task: point dimension mismatch");
  }
}

}  // namespace

double eval_task(const TaskInstance& task, std::span<const double> x, int max_resolution) {
  check_point(task, x);
  const int top = std::min(max_resolution, static_cast<int>(task.layers.size()) - 1);
  double total = 0.0;
  for (int k = 0; k <= top; ++k) total += layer_value(task, k, x);
  return total;
}

std::vector<double> eval_layers(const TaskInstance& task, std::span<const double> x) {
  check_point(task, x);
  std::vector<double> out(task.layers.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = layer_value(task, static_cast<int>(k), x);
  return out;
}

double eval_task(const TaskInstance& task, std::span<const double> x) {
  return eval_task(task, x, static_cast<int>(task.layers.size()) - 1);
}

Prompt sample_prompt(const TaskInstance& task, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample_prompt: n must be >= 1");
  const TaskDistribution& dist = task.dist;
  const auto d = static_cast<std::size_t>(dist.d);
  Prompt p;
  p.d = dist.d;
  p.task_seed = task.seed;
  p.x.resize(n * d);
  p.y.resize(n);
  p.query_x.resize(d);
  Rng rng(seed);
  // Query first, so prompts with the same seed and different n share it.
  for (std::size_t i = 0; i < d; ++i) p.query_x[i] = rng.uniform();
  p.query_target = eval_task(task, p.query_x);
  p.query_y = p.query_target + rng.uniform(-dist.sigma, dist.sigma);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < d; ++i) p.x[k * d + i] = rng.uniform();
    p.y[k] = eval_task(task, p.point(k)) + rng.uniform(-dist.sigma, dist.sigma);
  }
  return p;
}

Prompt sample_prompt(std::shared_ptr<const TaskInstance> task, std::size_t n, std::uint64_t seed) {
  if (!task) throw std::invalid_argument("sample_prompt: null task");
  Prompt p = sample_prompt(*task, n, seed);
  p.task = std::move(task);
  return p;
}

std::vector<Prompt> draw_prompts(const TaskDistribution& dist, std::size_t n, std::size_t count,
                                 std::uint64_t master, Stream task_family, Stream prompt_family,
                                 bool keep_task) {
  dist.validate();
  std::vector<Prompt> prompts(count);
  parallel_for(count, [&](std::size_t t) {
    auto task = std::make_shared<const TaskInstance>(
        sample_task(dist, stream_seed(master, task_family, t)));
    prompts[t] = sample_prompt(*task, n, stream_seed(master, prompt_family, t));
    if (keep_task) prompts[t].task = std::move(task);
  });
  return prompts;
}

namespace {

json dist_to_json(const TaskDistribution& d) {
  json j;
  j["d"] = d.d;
  j["alpha"] = d.alpha;
  j["m"] = d.m;
  j["k_max"] = d.k_max;
  j["c_beta"] = d.c_beta;
  j["sigma"] = d.sigma;
  j["output_clip"] = d.output_clip;
  j["log_power"] = d.log_power;
  // JSON has no infinity; null encodes p = q = infinity.
  j["besov_p"] = std::isinf(d.besov_p) ? json(nullptr) : json(d.besov_p);
  j["besov_q"] = std::isinf(d.besov_q) ? json(nullptr) : json(d.besov_q);
  return j;
}

TaskDistribution dist_from_json(const json& j) {
  TaskDistribution d;
  d.d = j.at("d").get<int>();
  d.alpha = j.at("alpha").get<double>();
  d.m = j.at("m").get<int>();
  d.k_max = j.at("k_max").get<int>();
  d.c_beta = j.at("c_beta").get<double>();
  d.sigma = j.at("sigma").get<double>();
  d.output_clip = j.value("output_clip", 0.0);
  d.log_power = j.value("log_power", 2.0);
  const auto index = [&](const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::numeric_limits<double>::infinity();
    return j.at(key).get<double>();
  };
  d.besov_p = index("besov_p");
  d.besov_q = index("besov_q");
  d.validate();
  return d;
}

}  // namespace

std::string task_to_json(const TaskInstance& task) {
  json j;
  j["schema"] = "icl-lab/task/v1";
  j["distribution"] = dist_to_json(task.dist);
  j["seed"] = task.seed;
  j["layers"] = task.layers;
  return j.dump();
}

TaskInstance task_from_json(std::string_view text) {
  const json j = json::parse(text);
  if (j.value("schema", "") != "icl-lab/task/v1") {
    throw std::invalid_argument("task_from_json: unsupported schema");
  }
  TaskInstance task;
  task.dist = dist_from_json(j.at("distribution"));
  task.seed = j.at("seed").get<std::uint64_t>();
  task.layers = j.at("layers").get<std::vector<std::vector<double>>>();
  if (task.layers.size() != static_cast<std::size_t>(task.dist.k_max) + 1) {
    throw std::invalid_argument("task_from_json: layer count does not match k_max");
  }
  for (int k = 0; k <= task.dist.k_max; ++k) {
    if (task.layers[static_cast<std::size_t>(k)].size() != task.dist.layer_size(k)) {
      throw std::invalid_argument("task_from_json: layer " + std::to_string(k) + " has wrong size");
    }
  }
  return task;
}

std::string prompt_to_json(const Prompt& p) {
  json j;
  j["schema"] = "icl-lab/prompt/v1";
  j["d"] = p.d;
  j["n"] = p.size();
  j["x"] = p.x;
  j["y"] = p.y;
  j["query_x"] = p.query_x;
  j["query_y"] = p.query_y;
  j["query_target"] = p.query_target;
  j["task_seed"] = p.task_seed;
  return j.dump();
}

Prompt prompt_from_json(std::string_view text) {
  const json j = json::parse(text);
  if (j.value("schema", "") != "icl-lab/prompt/v1") {
    throw std::invalid_argument("prompt_from_json: unsupported schema");
  }
  Prompt p;
  p.d = j.at("d").get<int>();
  const auto n = j.at("n").get<std::size_t>();
  p.x = j.at("x").get<std::vector<double>>();
  p.y = j.at("y").get<std::vector<double>>();
  p.query_x = j.at("query_x").get<std::vector<double>>();
  p.query_y = j.at("query_y").get<double>();
  p.query_target = j.value("query_target", 0.0);
  p.task_seed = j.value("task_seed", std::uint64_t{0});
  if (p.d < 1 || p.y.size() != n || p.x.size() != n * static_cast<std::size_t>(p.d) ||
      p.query_x.size() != static_cast<std::size_t>(p.d)) {
    throw std::invalid_argument("prompt_from_json: inconsistent array sizes");
  }
  return p;
}

}  // namespace icl
