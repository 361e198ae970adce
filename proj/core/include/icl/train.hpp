#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "icl/model.hpp"
#include "icl/tasks.hpp"

namespace icl {

enum class GammaInit { Random, Oracle };

struct TrainConfig {
  double lr = 0.02;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int epochs = 50;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  // T and n.
  std::size_t tasks = 512;
  std::size_t context = 512;
  std::size_t test_tasks = 512;
  // Evaluate the held-out loss every epoch; otherwise only at epoch 0 and the last.
  bool test_every_epoch = true;
  // Project Gamma onto {0 <= Gamma <= c3 I} after every step.
  bool project = false;
  // Zero selects 2 / lambda_min(Sigma_Psi); needs wavelet features.
  double c3 = 0.0;
  // Exact wavelet features at resolution oracle_k; only Gamma trains.
  bool oracle_features = false;
  int oracle_k = 0;
  GammaInit gamma_init = GammaInit::Random;
  int checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;
  std::filesystem::path loss_csv;

  void validate() const;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;
};

AdamState adam_init(const ModelParams& params);
void adam_step(ModelParams& params, AdamState& state, const std::vector<Tensor>& grads, const TrainConfig& config);

using PromptPredictor = std::function<double(const Prompt&)>;

// Mean of (prediction - query_y)^2.
double empirical_risk(const ModelParams& params, std::span<const Prompt> prompts);
double empirical_risk(const PromptPredictor& predictor, std::span<const Prompt> prompts);

struct EpochRecord {
  int epoch = 0;
  // Epoch 0: loss of the initial parameters on the whole training set.
  // Later epochs: mean minibatch loss seen during the epoch.
  double train_loss = 0.0;
  // NaN when the held-out loss was not evaluated.
  double test_loss = 0.0;
  double wall_ms = 0.0;
};

// Training resumes after `epoch`; shuffles are keyed by epoch, so the epoch
// index is the whole RNG cursor.
struct Checkpoint {
  ModelParams params;
  AdamState adam;
  int epoch = 0;
  double train_loss = 0.0;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> history;
  Checkpoint last;
};

// Spec with the oracle-feature and clip settings implied by the config and task law.
ModelSpec resolve_spec(const TaskDistribution& dist, const ModelSpec& spec, const TrainConfig& config);

struct TrainData {
  std::vector<Prompt> train;
  std::vector<Prompt> test;
};
TrainData draw_train_data(const TaskDistribution& dist, const TrainConfig& config);

TrainResult train(const TaskDistribution& dist, const ModelSpec& spec, const TrainConfig& config,
                  const std::optional<Checkpoint>& resume = std::nullopt);
TrainResult train(const TaskDistribution& dist, const ModelSpec& spec, const TrainConfig& config,
                  const TrainData& data, const std::optional<Checkpoint>& resume = std::nullopt);

}  // namespace icl
