#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "config.hpp"
#include "icl/train.hpp"
#include "report.hpp"

namespace lab {

// Training run: loss.csv, final params under <out>/model, results for every epoch.
std::vector<ResultRow> run_train(const ExperimentConfig& config, std::ostream& log);

// Monte Carlo risk of a saved model (eval.params) or of Gamma* with exact features.
std::vector<ResultRow> run_eval(const ExperimentConfig& config, std::ostream& log);

// One sweep point: widths follow N when sweep.scale_hidden is set, and the
// master seed is derived from the seed entry alone.
icl::TrainResult train_point(const ExperimentConfig& config, icl::Variant variant, int N, std::size_t n,
                             std::size_t T, std::uint64_t seed);

// Trains every (variant, N, n, T, seed) point. The seed entry alone fixes the
// data and initialization, so points are independent of iteration order.
std::vector<ResultRow> run_sweep(const ExperimentConfig& config, std::ostream& log);

struct RateFit {
  double alpha = 0.0;
  double slope = 0.0;
  double stderr_ = 0.0;
  double expected = 0.0;
};

// Gamma* with exact features at K = round(log2 n / (2 alpha + d)) for every n.
std::vector<ResultRow> run_oracle_rate(const ExperimentConfig& config, std::ostream& log, std::vector<RateFit>* fits = nullptr);

// Renders result CSVs to an SVG; returns the number of series drawn.
std::size_t run_plot(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& output,
                     const PlotSettings& settings);

// Invariant suite; prints one line per check and returns true if all pass.
bool verify(std::ostream& out);

}  // namespace lab
