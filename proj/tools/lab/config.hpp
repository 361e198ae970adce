#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "icl/bounds.hpp"
#include "icl/eval.hpp"
#include "icl/model.hpp"
#include "icl/tasks.hpp"
#include "icl/train.hpp"

namespace lab {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EvalSettings {
  std::size_t tasks = 200;
  std::size_t queries = 20;
  // Context length; zero uses train.context.
  std::size_t n = 0;
  icl::RiskTarget target = icl::RiskTarget::Noiseless;
  // Params manifest to evaluate; empty evaluates Gamma* with exact features.
  std::filesystem::path params;
};

struct SweepSettings {
  std::vector<std::string> variants = {"a"};
  std::vector<int> N = {32};
  std::vector<std::size_t> n = {512};
  std::vector<std::size_t> T = {512};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  bool median = true;
  // Hidden widths follow N, as in the width sweep.
  bool scale_hidden = true;
  std::vector<std::string> metrics = {"test_loss"};
};

struct OracleRateSettings {
  std::vector<double> alphas = {1.0, 2.0};
  std::vector<std::size_t> n = {16, 32, 64, 128, 256, 512, 1024};
  std::size_t tasks = 400;
  std::size_t queries = 20;
  // Task law depth; zero uses max chosen K + 3.
  int k_max = 0;
  bool bounds = true;
};

struct PlotSettings {
  std::vector<std::filesystem::path> inputs;
  std::string x = "n";
  bool log_x = true;
  bool log_y = true;
  std::string title;
  std::filesystem::path output;
};

struct ExperimentConfig {
  icl::TaskDistribution task;
  icl::ModelSpec model;
  icl::TrainConfig train;
  EvalSettings eval;
  SweepSettings sweep;
  OracleRateSettings oracle_rate;
  PlotSettings plot;
  std::uint64_t seed = 0;
  std::filesystem::path out = "out";

  // Canonical JSON of every effective setting; the config hash covers it.
  std::string canonical() const;
  std::uint64_t hash() const;
  std::string hash_hex() const;
};

// Missing keys keep their defaults; unknown keys and wrong types are errors
// that name the offending key.
ExperimentConfig parse_config(std::string_view toml_text, const std::string& source = "<string>");
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace lab
