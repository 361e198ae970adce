#include "icl/eval.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "icl/hash.hpp"
#include "icl/parallel.hpp"
#include "icl/rng.hpp"

namespace icl {

ContextPredictor pointwise(std::function<double(const Prompt&)> predictor) {
  return [predictor = std::move(predictor)](const Prompt& context, std::span<const double> queries) {
    const auto d = static_cast<std::size_t>(context.d);
    Prompt p = context;
    std::vector<double> out(queries.size() / d);
    for (std::size_t q = 0; q < out.size(); ++q) {
      p.query_x.assign(queries.begin() + static_cast<std::ptrdiff_t>(q * d),
                       queries.begin() + static_cast<std::ptrdiff_t>((q + 1) * d));
      out[q] = predictor(p);
    }
    return out;
  };
}

ContextPredictor oracle_predictor(const FeatureMap& features, const Eigen::MatrixXd& gamma, double clip) {
  auto readout = std::make_shared<const OracleReadout>(features, gamma, clip);
  return [readout](const Prompt& context, std::span<const double> queries) {
    const auto d = static_cast<std::size_t>(context.d);
    const Eigen::VectorXd w = readout->context_weights(context);
    std::vector<double> out(queries.size() / d);
    for (std::size_t q = 0; q < out.size(); ++q) out[q] = readout->predict(w, queries.subspan(q * d, d));
    return out;
  };
}

ContextPredictor model_predictor(const ModelParams& params) {
  return pointwise([params](const Prompt& p) { return forward(params, p); });
}

ContextPredictor zero_predictor() {
  return [](const Prompt& context, std::span<const double> queries) {
    return std::vector<double>(queries.size() / static_cast<std::size_t>(context.d), 0.0);
  };
}

RiskReport mc_risk(const ContextPredictor& predictor, const TaskDistribution& dist, std::size_t n,
                   std::size_t num_tasks, std::size_t num_queries, std::uint64_t seed, RiskTarget target) {
  dist.validate();
  if (n == 0 || num_tasks == 0 || num_queries == 0) {
    throw std::invalid_argument("mc_risk: n, num_tasks and num_queries must be >= 1");
  }
  const auto d = static_cast<std::size_t>(dist.d);
  std::vector<std::vector<double>> errors(num_tasks);
  parallel_for(num_tasks, [&](std::size_t t) {
    auto task = std::make_shared<const TaskInstance>(sample_task(dist, stream_seed(seed, Stream::mc_task, t)));
    const Prompt context = sample_prompt(task, n, stream_seed(seed, Stream::mc_prompt, t));
    Rng rng(stream_seed(seed, Stream::mc_prompt, t, 1));
    std::vector<double> queries(num_queries * d);
    for (double& v : queries) v = rng.uniform();
    const std::vector<double> pred = predictor(context, queries);
    if (pred.size() != num_queries) throw std::runtime_error("mc_risk: predictor returned wrong count");
    auto& e = errors[t];
    e.resize(num_queries);
    for (std::size_t q = 0; q < num_queries; ++q) {
      double y = eval_task(*task, std::span<const double>(queries).subspan(q * d, d));
      if (target == RiskTarget::Noisy) y += rng.uniform(-dist.sigma, dist.sigma);
      e[q] = (pred[q] - y) * (pred[q] - y);
    }
  });
  // Queries of one task share its context, so the task is the sampling unit.
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const auto& e : errors) {
    double task_mean = 0.0;
    for (double v : e) task_mean += v;
    task_mean /= static_cast<double>(e.size());
    sum += task_mean;
    sum_sq += task_mean * task_mean;
  }
  RiskReport r;
  r.tasks = num_tasks;
  r.queries = num_queries;
  const auto tasks = static_cast<double>(num_tasks);
  r.estimate = sum / tasks;
  if (num_tasks > 1) {
    const double var = std::max(0.0, (sum_sq - tasks * r.estimate * r.estimate) / (tasks - 1.0));
    r.stderr_ = std::sqrt(var / tasks);
  }
  Fnv1a h;
  h.add("mc_risk/v1");
  h.add(dist.d);
  h.add(dist.alpha);
  h.add(dist.m);
  h.add(dist.k_max);
  h.add(dist.c_beta);
  h.add(dist.sigma);
  h.add(dist.log_power);
  h.add(n);
  h.add(num_tasks);
  h.add(num_queries);
  h.add(seed);
  h.add(static_cast<int>(target));
  r.fingerprint = h.value();
  return r;
}

int rate_resolution(std::size_t n, double alpha, int d) {
  if (n == 0 || !(alpha > 0.0) || d < 1) throw std::invalid_argument("rate_resolution: need n >= 1, alpha > 0, d >= 1");
  return static_cast<int>(std::lround(std::log2(static_cast<double>(n)) / (2.0 * alpha + d)));
}

SlopeFit slope_fit(std::span<const std::pair<double, double>> points) {
  if (points.size() < 3) throw std::invalid_argument("slope_fit: need at least 3 points");
  std::vector<double> lx, ly;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0)) throw std::invalid_argument("slope_fit: scales and values must be positive");
    lx.push_back(std::log(x));
    ly.push_back(std::log(y));
  }
  const auto k = static_cast<double>(lx.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / k;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / k;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("slope_fit: all scales are equal");
  SlopeFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - f.intercept - f.slope * lx[i];
    ssr += r * r;
  }
  f.stderr_ = std::sqrt(ssr / (k - 2.0) / sxx);
  return f;
}

double spectral_norm_sym(const Eigen::MatrixXd& m, double rel_tol, int max_iter) {
  if (m.rows() != m.cols()) throw std::invalid_argument("spectral_norm_sym: matrix must be square");
  if (m.rows() == 0) return 0.0;
  // A fixed, non-symmetric start vector avoids orthogonality to the top eigenvector
  // for structured matrices.
  Eigen::VectorXd v(m.rows());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = 1.0 + 0.1 * std::sin(1.0 + static_cast<double>(i));
  v.normalize();
  double estimate = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd w = m * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    if (it > 0 && std::abs(norm - estimate) <= rel_tol * norm) return norm;
    estimate = norm;
  }
  return estimate;
}

double concentration_stat(const FeatureMap& features, const Eigen::MatrixXd& gram, int d, std::size_t n,
                          std::size_t reps, std::uint64_t seed) {
  const auto dim = static_cast<Eigen::Index>(features.dim);
  if (gram.rows() != dim || gram.cols() != dim) throw std::invalid_argument("concentration_stat: Gram size mismatch");
  if (n == 0 || reps == 0) throw std::invalid_argument("concentration_stat: n and reps must be >= 1");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.eigenvalues().minCoeff() <= 0.0) throw std::invalid_argument("concentration_stat: Gram not positive definite");
  const Eigen::MatrixXd whiten =
      eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  std::vector<double> dev(reps);
  parallel_for(reps, [&](std::size_t r) {
    Rng rng(stream_seed(seed, Stream::concentration, r));
    Eigen::MatrixXd psi(dim, static_cast<Eigen::Index>(n));
    std::vector<double> x(static_cast<std::size_t>(d));
    for (std::size_t k = 0; k < n; ++k) {
      for (double& v : x) v = rng.uniform();
      features.eval(x, {psi.col(static_cast<Eigen::Index>(k)).data(), features.dim});
    }
    const Eigen::MatrixXd w = whiten * psi;
    Eigen::MatrixXd m = (w * w.transpose()) / static_cast<double>(n);
    m.diagonal().array() -= 1.0;
    const double s = spectral_norm_sym(m);
    dev[r] = s * s;
  });
  return std::accumulate(dev.begin(), dev.end(), 0.0) / static_cast<double>(reps);
}

double concentration_stat(const BasisLayout& layout, std::size_t n, std::size_t reps, std::uint64_t seed) {
  return concentration_stat(wavelet_features(layout), gram_matrix(layout).values, layout.dim(), n, reps, seed);
}

std::vector<TruncationRow> truncation_error(const TaskDistribution& dist, std::span<const int> ks,
                                            std::size_t num_tasks, std::size_t num_points, std::uint64_t seed) {
  dist.validate();
  if (ks.empty() || num_tasks == 0 || num_points == 0) {
    throw std::invalid_argument("truncation_error: need cutoffs, tasks and points");
  }
  for (int k : ks) {
    if (k < 0) throw std::invalid_argument("truncation_error: cutoffs must be >= 0");
  }
  const auto d = static_cast<std::size_t>(dist.d);
  // per_task[t][i]: mean over points of the squared tail beyond ks[i].
  std::vector<std::vector<double>> per_task(num_tasks);
  parallel_for(num_tasks, [&](std::size_t t) {
    const TaskInstance task = sample_task(dist, stream_seed(seed, Stream::mc_task, t));
    Rng rng(stream_seed(seed, Stream::mc_prompt, t));
    std::vector<double> x(d);
    std::vector<double> acc(ks.size(), 0.0);
    for (std::size_t p = 0; p < num_points; ++p) {
      for (double& v : x) v = rng.uniform();
      const std::vector<double> layers = eval_layers(task, x);
      for (std::size_t i = 0; i < ks.size(); ++i) {
        double tail = 0.0;
        for (std::size_t k = static_cast<std::size_t>(ks[i]) + 1; k < layers.size(); ++k) tail += layers[k];
        acc[i] += tail * tail;
      }
    }
    for (double& a : acc) a /= static_cast<double>(num_points);
    per_task[t] = std::move(acc);
  });
  std::vector<TruncationRow> rows;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& v : per_task) {
      sum += v[i];
      sum_sq += v[i] * v[i];
    }
    const auto c = static_cast<double>(num_tasks);
    TruncationRow row;
    row.k = ks[i];
    row.N = dist.layer_size(ks[i]);
    row.error = sum / c;
    if (num_tasks > 1) row.stderr_ = std::sqrt(std::max(0.0, (sum_sq - c * row.error * row.error) / (c - 1.0)) / c);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace icl
