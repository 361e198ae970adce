#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "icl/model.hpp"
#include "icl/oracle.hpp"
#include "icl/tasks.hpp"
#include "icl/wavelet.hpp"

namespace icl {

struct RiskReport {
  double estimate = 0.0;
  double stderr_ = 0.0;  // over per-task mean errors
  std::size_t tasks = 0;
  std::size_t queries = 0;
  std::uint64_t fingerprint = 0;

  std::size_t count() const { return tasks * queries; }
};

// Predictions for q queries (q x d, row-major) against one shared context.
using ContextPredictor = std::function<std::vector<double>(const Prompt&, std::span<const double>)>;

// Substitutes each query into a copy of the prompt.
ContextPredictor pointwise(std::function<double(const Prompt&)> predictor);
ContextPredictor oracle_predictor(const FeatureMap& features, const Eigen::MatrixXd& gamma, double clip);
ContextPredictor model_predictor(const ModelParams& params);
ContextPredictor zero_predictor();

enum class RiskTarget { Noiseless, Noisy };

// Mean squared error against F_beta(query) (or the noisy label) over
// num_tasks fresh tasks with num_queries queries each. Task t and its context
// come from streams (seed, mc_task, t) and (seed, mc_prompt, t); contexts keep
// a handle on their task.
RiskReport mc_risk(const ContextPredictor& predictor, const TaskDistribution& dist, std::size_t n,
                   std::size_t num_tasks, std::size_t num_queries, std::uint64_t seed,
                   RiskTarget target = RiskTarget::Noiseless);

// Resolution K whose top layer has about n^{d/(2 alpha + d)} functions:
// K = round(log2(n) / (2 alpha + d)).
int rate_resolution(std::size_t n, double alpha, int d);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_ = 0.0;
};

// Least squares of log(value) on log(scale).
SlopeFit slope_fit(std::span<const std::pair<double, double>> points);

// Largest |eigenvalue| of a symmetric matrix by power iteration.
double spectral_norm_sym(const Eigen::MatrixXd& m, double rel_tol = 1e-10, int max_iter = 10000);

// Mean over reps of ||S^{-1/2} (Psi Psi^T / n) S^{-1/2} - I||_op^2, x ~ U[0,1]^d.
double concentration_stat(const FeatureMap& features, const Eigen::MatrixXd& gram, int d, std::size_t n,
                          std::size_t reps, std::uint64_t seed);
double concentration_stat(const BasisLayout& layout, std::size_t n, std::size_t reps, std::uint64_t seed);

struct TruncationRow {
  int k = 0;
  std::size_t N = 0;
  double error = 0.0;
  double stderr_ = 0.0;
};

// E_beta E_x (F_beta - F_{beta, <=k})^2 for every k in ks, on shared draws.
std::vector<TruncationRow> truncation_error(const TaskDistribution& dist, std::span<const int> ks,
                                            std::size_t num_tasks, std::size_t num_points, std::uint64_t seed);

}  // namespace icl
