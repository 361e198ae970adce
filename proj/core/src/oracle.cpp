#include "icl/oracle.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

#include "icl/format.hpp"

namespace icl {

FeatureMap wavelet_features(const BasisLayout& layout) {
  return FeatureMap{layout.top_size(), [layout](std::span<const double> x, std::span<double> out) {
                      top_layer_features(layout, x, out);
                    }};
}

QuadratureRule gauss_legendre(int points) {
  if (points < 1) throw std::invalid_argument("gauss_legendre: need at least one node");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(points, points);
  for (int i = 1; i < points; ++i) {
    const double b = i / std::sqrt(4.0 * i * i - 1.0);
    jacobi(i - 1, i) = b;
    jacobi(i, i - 1) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  QuadratureRule rule;
  for (int i = 0; i < points; ++i) {
    rule.nodes.push_back(eig.eigenvalues()(i));
    const double v0 = eig.eigenvectors()(0, i);
    rule.weights.push_back(2.0 * v0 * v0);
  }
  return rule;
}

Eigen::MatrixXd gram_1d(int m, int k) {
  const int side = (1 << k) + m;
  const int intervals = 1 << k;
  // m + 1 nodes integrate degree 2m + 1 exactly; the integrand has degree 2m.
  const QuadratureRule rule = gauss_legendre(m + 1);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(side, side);
  std::vector<double> values(static_cast<std::size_t>(side));
  // In u = 2^k x the scaled Gram entry is the plain integral over [0, 2^k].
  for (int cell = 0; cell < intervals; ++cell) {
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      const double u = cell + 0.5 * (rule.nodes[q] + 1.0);
      const double w = 0.5 * rule.weights[q];
      for (int a = 0; a < side; ++a) {
        values[static_cast<std::size_t>(a)] = cardinal_bspline(m, u - (a - m));
      }
      for (int a = 0; a < side; ++a) {
        const double va = values[static_cast<std::size_t>(a)];
        if (va == 0.0) continue;
        for (int b = a; b < side; ++b) g(a, b) += w * va * values[static_cast<std::size_t>(b)];
      }
    }
  }
  g.triangularView<Eigen::StrictlyLower>() = g.transpose().triangularView<Eigen::StrictlyLower>();
  return g;
}

GramMatrix gram_matrix(const BasisLayout& layout) {
  const Eigen::MatrixXd g1 = gram_1d(layout.order(), layout.top_resolution());
  // The uniform measure is a product measure, so the tensor-product Gram is a
  // Kronecker power of the 1-d Gram in the row-major location order.
  Eigen::MatrixXd g = g1;
  for (int i = 1; i < layout.dim(); ++i) {
    Eigen::MatrixXd next(g.rows() * g1.rows(), g.cols() * g1.cols());
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      for (Eigen::Index c = 0; c < g.cols(); ++c) {
        next.block(r * g1.rows(), c * g1.cols(), g1.rows(), g1.cols()) = g(r, c) * g1;
      }
    }
    g = std::move(next);
  }
  return GramMatrix{std::move(g), layout.hash()};
}

Eigen::MatrixXd refinement_to_top(const BasisLayout& layout, int k) {
  const int top = layout.top_resolution();
  if (k < 0 || k > top) throw std::out_of_range("refinement_to_top: resolution outside layout");
  Eigen::SparseMatrix<double> composed(static_cast<Eigen::Index>(layout.layer_size(k)),
                                       static_cast<Eigen::Index>(layout.layer_size(k)));
  composed.setIdentity();
  for (int step = k; step < top; ++step) {
    const RefinementMatrix refine(layout, step);
    Eigen::SparseMatrix<double> r = refine.matrix();
    composed = (r * composed).pruned();
  }
  return Eigen::MatrixXd(composed);
}

AggregatedCovariance aggregated_cov(const TaskDistribution& dist, const BasisLayout& layout) {
  if (dist.d != layout.dim() || dist.m != layout.order()) {
    throw std::invalid_argument("aggregated_cov: distribution and layout disagree on (d, m)");
  }
  const auto n = static_cast<Eigen::Index>(layout.top_size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
  const int top = std::min(layout.top_resolution(), dist.k_max);
  // Layers are independent, so only the per-layer diagonal blocks survive.
  for (int k = 0; k <= top; ++k) {
    const double v = dist.variance(k);
    if (v == 0.0) continue;
    if (k == layout.top_resolution()) {
      cov.diagonal().array() += v;
    } else {
      const Eigen::MatrixXd r = refinement_to_top(layout, k);
      cov.noalias() += v * r * r.transpose();
    }
  }
  return AggregatedCovariance{std::move(cov)};
}

namespace {

Eigen::MatrixXd symmetric_inverse(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (a + a.transpose()));
  if (eig.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  if (eig.eigenvalues().minCoeff() <= 0.0) throw std::runtime_error("matrix is not positive definite");
  const Eigen::VectorXd inv = eig.eigenvalues().cwiseInverse();
  Eigen::MatrixXd out = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace

OracleAttention gamma_star(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& cov, double n) {
  if (!(n > 0.0)) throw std::invalid_argument("gamma_star: n must be positive");
  if (gram.rows() != gram.cols() || cov.rows() != cov.cols() || gram.rows() != cov.rows()) {
    throw std::invalid_argument("gamma_star: dimension mismatch");
  }
  OracleAttention out;
  out.n = n;
  Eigen::MatrixXd c = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c, Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();
  if (!(lmin > 1e-13 * std::max(lmax, 0.0)) || !(lmin > 0.0)) {
    out.ridge = 1e-12 * c.trace() / static_cast<double>(c.rows());
    if (!(out.ridge > 0.0)) throw std::invalid_argument("gamma_star: coefficient covariance is zero");
    c.diagonal().array() += out.ridge;
  }
  const Eigen::MatrixXd a = gram + symmetric_inverse(c) / n;
  out.gamma = symmetric_inverse(a);
  return out;
}

OracleAttention gamma_star(const GramMatrix& gram, const AggregatedCovariance& cov, double n) {
  return gamma_star(gram.values, cov.values, n);
}

OracleReadout::OracleReadout(FeatureMap features, Eigen::MatrixXd gamma, double clip)
    : features_(std::move(features)), gamma_(std::move(gamma)), clip_(clip) {
  if (gamma_.rows() != gamma_.cols() ||
      static_cast<std::size_t>(gamma_.rows()) != features_.dim) {
    throw std::invalid_argument("OracleReadout: attention matrix does not match feature dimension");
  }
  if (!(clip_ > 0.0)) throw std::invalid_argument("OracleReadout: clip level must be positive");
}

Eigen::VectorXd OracleReadout::context_weights(const Prompt& prompt) const {
  const auto dim = static_cast<Eigen::Index>(features_.dim);
  if (prompt.size() == 0) throw std::invalid_argument("OracleReadout: empty context");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd phi(dim);
  for (std::size_t k = 0; k < prompt.size(); ++k) {
    features_.eval(prompt.point(k), {phi.data(), features_.dim});
    sum += prompt.y[k] * phi;
  }
  sum /= static_cast<double>(prompt.size());
  return gamma_.transpose() * sum;
}

double OracleReadout::predict(const Eigen::VectorXd& weights, std::span<const double> query) const {
  Eigen::VectorXd phi(static_cast<Eigen::Index>(features_.dim));
  features_.eval(query, {phi.data(), features_.dim});
  return std::clamp(weights.dot(phi), -clip_, clip_);
}

double OracleReadout::operator()(const Prompt& prompt) const {
  return predict(context_weights(prompt), prompt.query_x);
}

double oracle_predict(const Prompt& prompt, const FeatureMap& features, const Eigen::MatrixXd& gamma,
                      double clip) {
  return OracleReadout(features, gamma, clip)(prompt);
}

double oracle_predict(const Prompt& prompt, const BasisLayout& layout, const Eigen::MatrixXd& gamma,
                      double clip) {
  if (prompt.d != layout.dim()) throw std::invalid_argument("oracle_predict: prompt dimension mismatch");
  return oracle_predict(prompt, wavelet_features(layout), gamma, clip);
}

Eigen::MatrixXd project_to_SN(const Eigen::MatrixXd& gamma, double c3) {
  if (gamma.rows() != gamma.cols()) throw std::invalid_argument("project_to_SN: matrix must be square");
  if (!gamma.allFinite()) throw std::invalid_argument("project_to_SN: non-finite entries");
  if (!(c3 > 0.0)) throw std::invalid_argument("project_to_SN: C3 must be positive");
  const Eigen::MatrixXd sym = 0.5 * (gamma + gamma.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const Eigen::VectorXd clamped = eig.eigenvalues().cwiseMax(0.0).cwiseMin(c3);
  Eigen::MatrixXd out = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

double default_c3(const GramMatrix& gram) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram.values, Eigen::EigenvaluesOnly);
  return 2.0 / eig.eigenvalues().minCoeff();
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& matrix,
                      std::uint64_t layout_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_matrix_csv: cannot open " + path.string());
  out << "# N=" << matrix.rows() << " layout_hash=" << hex64(layout_hash) << '\n';
  for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
    for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
      if (c) out << ',';
      out << format_double(matrix(r, c));
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write_matrix_csv: write failed for " + path.string());
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_matrix_csv: cannot open " + path.string());
  std::string line;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(parse_double(cell));
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)].size()) != n) {
      throw std::runtime_error("read_matrix_csv: matrix is not square");
    }
    for (Eigen::Index c = 0; c < n; ++c) out(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  }
  return out;
}

}  // namespace icl
