#include "icl/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "icl/format.hpp"
#include "icl/oracle.hpp"
#include "icl/parallel.hpp"
#include "icl/params_io.hpp"
#include "icl/rng.hpp"
#include "icl/wavelet.hpp"

namespace icl {

using json = nlohmann::json;

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("train: lr must be positive");
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (tasks < 1) throw std::invalid_argument("train: tasks must be >= 1");
  if (context < 1) throw std::invalid_argument("train: context must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("train: Adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw std::invalid_argument("train: eps must be positive");
  if (c3 < 0.0) throw std::invalid_argument("train: c3 must be >= 0");
  if (checkpoint_every < 0) throw std::invalid_argument("train: checkpoint_every must be >= 0");
  if (checkpoint_every > 0 && checkpoint_dir.empty()) {
    throw std::invalid_argument("train: checkpoint_every needs checkpoint_dir");
  }
}

AdamState adam_init(const ModelParams& params) {
  AdamState s;
  for (const Tensor& t : params.tensors) {
    s.m.push_back(Tensor::zeros_like(t));
    s.v.push_back(Tensor::zeros_like(t));
  }
  return s;
}

void adam_step(ModelParams& params, AdamState& state, const std::vector<Tensor>& grads,
               const TrainConfig& config) {
  if (grads.size() != params.tensors.size() || state.m.size() != grads.size() ||
      state.v.size() != grads.size()) {
    throw std::invalid_argument("adam_step: moment buffers do not match parameters");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!grads[i].same_shape(params.tensors[i]) || !state.m[i].same_shape(params.tensors[i]) ||
        !state.v[i].same_shape(params.tensors[i])) {
      throw std::invalid_argument("adam_step: shape mismatch for '" + params.names[i] + "'");
    }
    if (!grads[i].all_finite()) throw NonFiniteError("adam_step: non-finite gradient for '" + params.names[i] + "'");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    double* p = params.tensors[i].data();
    double* m = state.m[i].data();
    double* v = state.v[i].data();
    const double* g = grads[i].data();
    for (std::size_t j = 0; j < grads[i].size(); ++j) {
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
      p[j] -= config.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + config.eps);
    }
  }
}

double empirical_risk(const PromptPredictor& predictor, std::span<const Prompt> prompts) {
  if (prompts.empty()) throw std::invalid_argument("empirical_risk: no prompts");
  std::vector<double> sq(prompts.size());
  parallel_for(prompts.size(), [&](std::size_t i) {
    const double e = predictor(prompts[i]) - prompts[i].query_y;
    sq[i] = e * e;
  });
  return std::accumulate(sq.begin(), sq.end(), 0.0) / static_cast<double>(sq.size());
}

double empirical_risk(const ModelParams& params, std::span<const Prompt> prompts) {
  return empirical_risk([&](const Prompt& p) { return forward(params, p); }, prompts);
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_params(c.params, dir, "params");
  std::vector<std::string> names;
  std::vector<Tensor> tensors;
  for (std::size_t i = 0; i < c.adam.m.size(); ++i) {
    names.push_back("m:" + c.params.names[i]);
    tensors.push_back(c.adam.m[i]);
  }
  for (std::size_t i = 0; i < c.adam.v.size(); ++i) {
    names.push_back("v:" + c.params.names[i]);
    tensors.push_back(c.adam.v[i]);
  }
  write_file(dir / "adam.bin", encode_tensors(names, tensors));
  json j;
  j["schema"] = "icl-lab/checkpoint/v1";
  j["epoch"] = c.epoch;
  j["adam_step"] = c.adam.step;
  // Exact bits survive the decimal round trip.
  j["train_loss"] = format_double(c.train_loss);
  write_file(dir / "checkpoint.json", j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const json j = json::parse(read_file(dir / "checkpoint.json"));
  if (j.value("schema", "") != "icl-lab/checkpoint/v1") {
    throw std::runtime_error("load_checkpoint: unsupported schema in " + dir.string());
  }
  Checkpoint c;
  c.params = load_params(dir / "params.json");
  c.epoch = j.at("epoch").get<int>();
  c.adam.step = j.at("adam_step").get<std::uint64_t>();
  c.train_loss = parse_double(j.at("train_loss").get<std::string>());
  std::vector<std::string> names;
  std::vector<Tensor> tensors;
  decode_tensors(read_file(dir / "adam.bin"), names, tensors);
  const std::size_t n = c.params.tensors.size();
  if (tensors.size() != 2 * n) throw std::runtime_error("load_checkpoint: Adam state does not match params");
  for (std::size_t i = 0; i < n; ++i) {
    if (!tensors[i].same_shape(c.params.tensors[i]) || !tensors[n + i].same_shape(c.params.tensors[i])) {
      throw std::runtime_error("load_checkpoint: Adam moment shape mismatch");
    }
    c.adam.m.push_back(std::move(tensors[i]));
    c.adam.v.push_back(std::move(tensors[n + i]));
  }
  return c;
}

ModelSpec resolve_spec(const TaskDistribution& dist, const ModelSpec& spec, const TrainConfig& config) {
  ModelSpec s = spec;
  s.d = dist.d;
  if (config.oracle_features) {
    if (s.variant == Variant::Encoder2) throw std::invalid_argument("train: oracle features need variant a or b");
    s.features = FeatureMode::ExactWavelet;
    s.wavelet_m = dist.m;
    s.wavelet_k = config.oracle_k;
  }
  if (s.output_clip == 0.0) s.output_clip = dist.clip_level();
  s.validate();
  return s;
}

TrainData draw_train_data(const TaskDistribution& dist, const TrainConfig& config) {
  TrainData data;
  data.train = draw_prompts(dist, config.context, config.tasks, config.seed, Stream::task, Stream::prompt);
  if (config.test_tasks > 0) {
    data.test = draw_prompts(dist, config.context, config.test_tasks, config.seed, Stream::test_task,
                             Stream::test_prompt);
  }
  return data;
}

namespace {

void append_loss_row(const std::filesystem::path& path, const EpochRecord& r) {
  if (path.empty()) return;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw std::runtime_error("cannot append to " + path.string());
  if (fresh) out << "epoch,train_loss,test_loss,wall_ms\n";
  out << r.epoch << ',' << format_double(r.train_loss) << ','
      << (std::isnan(r.test_loss) ? std::string() : format_double(r.test_loss)) << ','
      << format_double(std::round(r.wall_ms * 1000.0) / 1000.0) << '\n';
}

double c3_for(const ModelSpec& spec, const TrainConfig& config) {
  if (config.c3 > 0.0) return config.c3;
  if (spec.features != FeatureMode::ExactWavelet) {
    throw std::invalid_argument("train: projection with learned features needs an explicit c3");
  }
  return default_c3(gram_matrix(BasisLayout(spec.d, spec.wavelet_m, spec.wavelet_k)));
}

}  // namespace

TrainResult train(const TaskDistribution& dist, const ModelSpec& spec, const TrainConfig& config,
                  const std::optional<Checkpoint>& resume) {
  config.validate();
  return train(dist, spec, config, draw_train_data(dist, config), resume);
}

TrainResult train(const TaskDistribution& dist, const ModelSpec& spec, const TrainConfig& config,
                  const TrainData& data, const std::optional<Checkpoint>& resume) {
  config.validate();
  dist.validate();
  if (data.train.empty()) throw std::invalid_argument("train: no training prompts");
  const ModelSpec resolved = resolve_spec(dist, spec, config);
  const auto clock_start = std::chrono::steady_clock::now();
  const auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - clock_start).count();
  };
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double c3 = config.project ? c3_for(resolved, config) : 0.0;

  TrainResult result;
  AdamState adam;
  int first_epoch = 1;
  if (resume) {
    result.params = resume->params;
    if (spec_to_json(result.params.spec) != spec_to_json(resolved)) {
      throw std::invalid_argument("train: checkpoint architecture differs from the requested model");
    }
    adam = resume->adam;
    first_epoch = resume->epoch + 1;
  } else {
    result.params = init_params(resolved, config.seed);
    if (config.gamma_init == GammaInit::Oracle) {
      if (resolved.features != FeatureMode::ExactWavelet) {
        throw std::invalid_argument("train: oracle Gamma initialization needs oracle features");
      }
      const BasisLayout layout(resolved.d, resolved.wavelet_m, resolved.wavelet_k);
      const OracleAttention o =
          gamma_star(gram_matrix(layout), aggregated_cov(dist, layout), static_cast<double>(config.context));
      Tensor& g = result.params.get("gamma");
      g.mat() = o.gamma;
    }
    if (config.project) {
      Tensor& g = result.params.get("gamma");
      g.mat() = project_to_SN(g.mat(), c3);
    }
    adam = adam_init(result.params);
    EpochRecord r0;
    r0.train_loss = empirical_risk(result.params, data.train);
    r0.test_loss = data.test.empty() ? nan : empirical_risk(result.params, data.test);
    r0.wall_ms = elapsed_ms();
    result.history.push_back(r0);
    append_loss_row(config.loss_csv, r0);
  }

  const std::size_t T = data.train.size();
  const std::size_t batch = std::min(config.batch_size, T);
  std::vector<std::size_t> order(T);
  double last_loss = resume ? resume->train_loss : result.history.front().train_loss;
  for (int epoch = first_epoch; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(stream_seed(config.seed, Stream::shuffle, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = T; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < T; start += batch) {
      const std::size_t count = std::min(batch, T - start);
      const std::span<const std::size_t> idx(order.data() + start, count);
      const Gradient g = batch_gradient(result.params, data.train, idx);
      if (!std::isfinite(g.loss)) {
        throw std::runtime_error("train: loss became non-finite in epoch " + std::to_string(epoch));
      }
      loss_sum += g.loss * static_cast<double>(count);
      adam_step(result.params, adam, g.tensors, config);
      if (config.project) {
        Tensor& gamma = result.params.get("gamma");
        gamma.mat() = project_to_SN(gamma.mat(), c3);
      }
    }
    last_loss = loss_sum / static_cast<double>(T);
    if (!std::isfinite(last_loss)) {
      throw std::runtime_error("train: loss became non-finite in epoch " + std::to_string(epoch));
    }
    EpochRecord r;
    r.epoch = epoch;
    r.train_loss = last_loss;
    const bool eval_test = !data.test.empty() && (config.test_every_epoch || epoch == config.epochs);
    r.test_loss = eval_test ? empirical_risk(result.params, data.test) : nan;
    r.wall_ms = elapsed_ms();
    result.history.push_back(r);
    append_loss_row(config.loss_csv, r);
    if (config.checkpoint_every > 0 && (epoch % config.checkpoint_every == 0 || epoch == config.epochs)) {
      save_checkpoint(Checkpoint{result.params, adam, epoch, last_loss},
                      config.checkpoint_dir / ("epoch-" + std::to_string(epoch)));
    }
  }
  result.last = Checkpoint{result.params, adam, std::max(config.epochs, first_epoch - 1), last_loss};
  return result;
}

}  // namespace icl
