#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "icl/tasks.hpp"
#include "icl/wavelet.hpp"

namespace icl {

// Feature map x -> R^dim; `eval` writes dim values into its output span.
struct FeatureMap {
  std::size_t dim = 0;
  std::function<void(std::span<const double>, std::span<double>)> eval;
};

// Exact top-layer scaled B-splines of a layout.
FeatureMap wavelet_features(const BasisLayout& layout);

// Population second moments E_x[psi_j psi_k] over the top layer, x ~ U[0,1]^d.
struct GramMatrix {
  Eigen::MatrixXd values;
  std::uint64_t layout_hash = 0;

  std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
};

// E[bar-beta_j bar-beta_k] of the coefficients aggregated onto the top layer.
struct AggregatedCovariance {
  Eigen::MatrixXd values;
};

struct OracleAttention {
  Eigen::MatrixXd gamma;
  double n = 0.0;
  // Ridge added to the coefficient covariance before inversion, zero if none.
  double ridge = 0.0;
};

// Gauss-Legendre rule on [-1, 1] (Golub-Welsch).
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
QuadratureRule gauss_legendre(int points);

// One-dimensional Gram matrix of the scaled splines at resolution k, by
// Gauss-Legendre quadrature on every knot interval.
Eigen::MatrixXd gram_1d(int m, int k);

GramMatrix gram_matrix(const BasisLayout& layout);

// Composed refinement R_{k->K} as a dense |I_K^d| x |I_k^d| matrix.
Eigen::MatrixXd refinement_to_top(const BasisLayout& layout, int k);

AggregatedCovariance aggregated_cov(const TaskDistribution& dist, const BasisLayout& layout);

// (Sigma_Psi + Sigma_beta^{-1} / n)^{-1}.
OracleAttention gamma_star(const GramMatrix& gram, const AggregatedCovariance& cov, double n);
OracleAttention gamma_star(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& cov, double n);

// Linear-attention readout with fixed features:
//   clip_B((1/n) sum_k y_k phi(x_k)^T Gamma^T phi(query)).
class OracleReadout {
 public:
  OracleReadout(FeatureMap features, Eigen::MatrixXd gamma, double clip);

  // Gamma^T (1/n) sum_k y_k phi(x_k).
  Eigen::VectorXd context_weights(const Prompt& prompt) const;
  double predict(const Eigen::VectorXd& weights, std::span<const double> query) const;
  double operator()(const Prompt& prompt) const;

 private:
  FeatureMap features_;
  Eigen::MatrixXd gamma_;
  double clip_;
};

double oracle_predict(const Prompt& prompt, const BasisLayout& layout, const Eigen::MatrixXd& gamma,
                      double clip);
double oracle_predict(const Prompt& prompt, const FeatureMap& features, const Eigen::MatrixXd& gamma,
                      double clip);

// Euclidean projection onto {0 <= Gamma <= c3 I}: symmetrize, clamp eigenvalues.
Eigen::MatrixXd project_to_SN(const Eigen::MatrixXd& gamma, double c3);

// 2 / lambda_min(Sigma_Psi).
double default_c3(const GramMatrix& gram);

// Row-major CSV with a "# N=<N> layout_hash=<hex>" header line.
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& matrix,
                      std::uint64_t layout_hash);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

}  // namespace icl
