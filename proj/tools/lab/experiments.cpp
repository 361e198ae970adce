#include "experiments.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "icl/bounds.hpp"
#include "icl/eval.hpp"
#include "icl/format.hpp"
#include "icl/oracle.hpp"
#include "icl/params_io.hpp"
#include "icl/rng.hpp"
#include "icl/train.hpp"
#include "icl/wavelet.hpp"
#include "svg.hpp"

namespace lab {

namespace {

ResultRow base_row(const ExperimentConfig& c, const std::string& variant) {
  ResultRow r;
  r.config_hash = c.hash_hex();
  r.variant = variant;
  return r;
}

std::string variant_letter(icl::Variant v) {
  switch (v) {
    case icl::Variant::LinearAttn:
      return "a";
    case icl::Variant::SoftmaxAttn:
      return "b";
    case icl::Variant::Encoder2:
      return "c";
  }
  return "?";
}

}  // namespace

std::vector<ResultRow> run_train(const ExperimentConfig& c, std::ostream& log) {
  icl::TrainConfig tc = c.train;
  std::filesystem::create_directories(c.out);
  tc.loss_csv = c.out / "loss.csv";
  std::filesystem::remove(tc.loss_csv);
  if (tc.checkpoint_every > 0) tc.checkpoint_dir = c.out / "checkpoints";
  const icl::ModelSpec spec = icl::resolve_spec(c.task, c.model, tc);
  log << "training variant " << variant_letter(spec.variant) << " (N=" << spec.feature_dim() << ", n=" << tc.context
      << ", T=" << tc.tasks << ", epochs=" << tc.epochs << ")\n";
  const icl::TrainResult res = icl::train(c.task, spec, tc);
  icl::save_params(res.params, c.out / "model");
  std::vector<ResultRow> rows;
  for (const auto& h : res.history) {
    ResultRow r = base_row(c, variant_letter(spec.variant));
    r.N = static_cast<long long>(spec.feature_dim());
    r.n = static_cast<long long>(tc.context);
    r.T = static_cast<long long>(tc.tasks);
    r.seed = tc.seed;
    r.epoch = h.epoch;
    r.metric = "train_loss";
    r.value = h.train_loss;
    rows.push_back(r);
    if (!std::isnan(h.test_loss)) {
      r.metric = "test_loss";
      r.value = h.test_loss;
      rows.push_back(r);
    }
  }
  const auto& last = res.history.back();
  log << "epoch " << last.epoch << ": train_loss " << icl::format_double(last.train_loss) << ", test_loss "
      << icl::format_double(last.test_loss) << "\n";
  return rows;
}

// Dense Gram and Gamma* above this size take minutes and gigabytes.
constexpr std::size_t kMaxOracleFeatures = 4096;

std::vector<ResultRow> run_eval(const ExperimentConfig& c, std::ostream& log) {
  const std::size_t n = c.eval.n ? c.eval.n : c.train.context;
  ResultRow r;
  icl::RiskReport rep;
  if (!c.eval.params.empty()) {
    const icl::ModelParams params = icl::load_params(c.eval.params);
    if (params.spec.d != c.task.d) throw std::invalid_argument("eval: model dimension differs from task.d");
    rep = icl::mc_risk(icl::model_predictor(params), c.task, n, c.eval.tasks, c.eval.queries, c.seed, c.eval.target);
    r = base_row(c, variant_letter(params.spec.variant));
    r.N = static_cast<long long>(params.spec.feature_dim());
  } else {
    const icl::BasisLayout layout(c.task.d, c.task.m, c.train.oracle_k);
    if (layout.top_size() > kMaxOracleFeatures) {
      throw std::invalid_argument("eval: Gamma* needs " + std::to_string(layout.top_size()) +
                                  " exact features; lower train.oracle_k or pass a saved model");
    }
    const icl::OracleAttention o =
        icl::gamma_star(icl::gram_matrix(layout), icl::aggregated_cov(c.task, layout), static_cast<double>(n));
    rep = icl::mc_risk(icl::oracle_predictor(icl::wavelet_features(layout), o.gamma, c.task.clip_level()), c.task, n,
                       c.eval.tasks, c.eval.queries, c.seed, c.eval.target);
    r = base_row(c, "oracle");
    r.N = static_cast<long long>(layout.top_size());
  }
  r.n = static_cast<long long>(n);
  r.seed = c.seed;
  r.metric = "risk";
  r.value = rep.estimate;
  r.stderr_ = rep.stderr_;
  log << "risk " << icl::format_double(rep.estimate) << " +- " << icl::format_double(rep.stderr_) << " ("
      << rep.count() << " queries)\n";
  return {r};
}

icl::TrainResult train_point(const ExperimentConfig& c, icl::Variant variant, int N, std::size_t n, std::size_t T,
                             std::uint64_t seed) {
  icl::ModelSpec spec = c.model;
  spec.variant = variant;
  spec.width = N;
  if (c.sweep.scale_hidden) {
    std::fill(spec.hidden.begin(), spec.hidden.end(), N);
    spec.encoder_hidden = N;
  }
  icl::TrainConfig tc = c.train;
  tc.tasks = T;
  tc.context = n;
  tc.seed = icl::stream_seed(c.seed, icl::Stream::sweep, seed);
  tc.test_every_epoch = false;
  tc.checkpoint_every = 0;
  tc.loss_csv.clear();
  return icl::train(c.task, icl::resolve_spec(c.task, spec, tc), tc);
}

std::vector<ResultRow> run_sweep(const ExperimentConfig& c, std::ostream& log) {
  std::vector<ResultRow> rows;
  for (const std::string& v : c.sweep.variants) {
    const icl::Variant variant = icl::parse_variant(v);
    for (int N : c.sweep.N) {
      for (std::size_t n : c.sweep.n) {
        for (std::size_t T : c.sweep.T) {
          for (std::uint64_t s : c.sweep.seeds) {
            const icl::TrainResult res = train_point(c, variant, N, n, T, s);
            const icl::EpochRecord& last = res.history.back();
            ResultRow r = base_row(c, variant_letter(variant));
            r.N = static_cast<long long>(res.params.spec.feature_dim());
            r.n = static_cast<long long>(n);
            r.T = static_cast<long long>(T);
            r.seed = s;
            r.epoch = last.epoch;
            for (const std::string& metric : c.sweep.metrics) {
              r.metric = metric;
              r.stderr_.reset();
              if (metric == "train_loss") {
                r.value = last.train_loss;
              } else if (metric == "test_loss") {
                r.value = last.test_loss;
              } else {
                const icl::RiskReport rep =
                    icl::mc_risk(icl::model_predictor(res.params), c.task, n, c.eval.tasks, c.eval.queries,
                                 icl::stream_seed(c.seed, icl::Stream::sweep, s), c.eval.target);
                r.value = rep.estimate;
                r.stderr_ = rep.stderr_;
              }
              rows.push_back(r);
            }
            log << "variant " << v << " N=" << N << " n=" << n << " T=" << T << " seed=" << s << ": train "
                << icl::format_double(last.train_loss) << " test " << icl::format_double(last.test_loss) << "\n";
          }
        }
      }
    }
  }
  return rows;
}

std::vector<ResultRow> run_oracle_rate(const ExperimentConfig& c, std::ostream& log, std::vector<RateFit>* fits) {
  std::vector<ResultRow> rows;
  for (double alpha : c.oracle_rate.alphas) {
    icl::TaskDistribution dist = c.task;
    dist.alpha = alpha;
    int top = 0;
    for (std::size_t n : c.oracle_rate.n) top = std::max(top, icl::rate_resolution(n, alpha, dist.d));
    dist.k_max = c.oracle_rate.k_max > 0 ? c.oracle_rate.k_max : top + 3;
    dist.validate();
    std::vector<std::pair<double, double>> points;
    for (std::size_t n : c.oracle_rate.n) {
      const int k = icl::rate_resolution(n, alpha, dist.d);
      const icl::BasisLayout layout(dist.d, dist.m, k);
      const icl::OracleAttention o =
          icl::gamma_star(icl::gram_matrix(layout), icl::aggregated_cov(dist, layout), static_cast<double>(n));
      const std::uint64_t seed = icl::stream_seed(c.seed, icl::Stream::sweep, n);
      const icl::RiskReport rep =
          icl::mc_risk(icl::oracle_predictor(icl::wavelet_features(layout), o.gamma, dist.clip_level()), dist, n,
                       c.oracle_rate.tasks, c.oracle_rate.queries, seed);
      points.emplace_back(static_cast<double>(n), rep.estimate);
      ResultRow r = base_row(c, "oracle");
      r.N = static_cast<long long>(layout.top_size());
      r.n = static_cast<long long>(n);
      r.seed = c.seed;
      r.metric = "risk_alpha" + icl::format_double(alpha);
      r.value = rep.estimate;
      r.stderr_ = rep.stderr_;
      rows.push_back(r);
      if (c.oracle_rate.bounds) {
        icl::BoundInputs in;
        in.N = std::max(2.0, static_cast<double>(layout.top_size()));
        in.n = static_cast<double>(n);
        in.T = std::numeric_limits<double>::infinity();
        in.alpha = alpha;
        in.d = dist.d;
        ResultRow b = base_row(c, "oracle");
        b.N = r.N;
        b.n = r.n;
        b.seed = c.seed;
        b.metric = "bound_besov_alpha" + icl::format_double(alpha);
        b.value = icl::bound_terms(in, icl::BoundFamily::Besov).total;
        rows.push_back(b);
      }
      log << "alpha=" << alpha << " n=" << n << " K=" << k << " N=" << layout.top_size() << " risk "
          << icl::format_double(rep.estimate) << " +- " << icl::format_double(rep.stderr_) << "\n";
    }
    const icl::SlopeFit fit = icl::slope_fit(points);
    const double expected = -2.0 * alpha / (2.0 * alpha + dist.d);
    log << "alpha=" << alpha << " fitted slope " << icl::format_double(fit.slope) << " (stderr "
        << icl::format_double(fit.stderr_) << ", minimax exponent " << icl::format_double(expected) << ")\n";
    if (fits) fits->push_back({alpha, fit.slope, fit.stderr_, expected});
  }
  return rows;
}

std::size_t run_plot(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& output,
                     const PlotSettings& settings) {
  if (inputs.empty()) throw std::invalid_argument("plot: no input CSV given");
  std::vector<ResultRow> rows;
  for (const auto& p : inputs) {
    auto part = read_results_csv(p);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  const auto series = series_from_rows(rows, settings.x);
  if (series.empty()) throw std::runtime_error("plot: no rows have a value for x = " + settings.x);
  ChartOptions o;
  o.title = settings.title;
  o.x_label = settings.x;
  o.y_label = "value";
  o.log_x = settings.log_x;
  o.log_y = settings.log_y;
  if (output.has_parent_path()) std::filesystem::create_directories(output.parent_path());
  icl::write_file(output, render_svg(series, o));
  return series.size();
}

namespace {

struct Check {
  std::string name;
  std::function<std::string()> run;  // empty string on success, else a reason
};

std::string fmt(double v) { return icl::format_double(v); }

std::vector<Check> invariant_suite() {
  std::vector<Check> checks;
  checks.push_back({"partition of unity", [] {
                      for (int m : {2, 4}) {
                        for (int d : {1, 2}) {
                          for (int k = 0; k <= 4; ++k) {
                            icl::Rng rng(icl::stream_seed(11, icl::Stream::sweep, m, d * 16 + k));
                            std::vector<double> x(static_cast<std::size_t>(d));
                            for (int t = 0; t < 500; ++t) {
                              for (double& v : x) v = rng.uniform();
                              double s = 0.0;
                              icl::for_each_active(d, m, k, x, [&](std::size_t, double w) { s += w; });
                              if (std::abs(s - 1.0) > 1e-12) return "sum " + fmt(s) + " at m=" + std::to_string(m);
                            }
                          }
                        }
                      }
                      return std::string();
                    }});
  checks.push_back({"spline symmetry", [] {
                      for (int m : {2, 4, 6}) {
                        for (int i = 1; i < 100; ++i) {
                          const double x = (m + 1) * i / 100.0;
                          const double e = std::abs(icl::cardinal_bspline(m, x) - icl::cardinal_bspline(m, m + 1 - x));
                          if (e > 1e-12) return "asymmetry " + fmt(e);
                        }
                      }
                      return std::string();
                    }});
  checks.push_back({"refinement identity", [] {
                      for (int d : {1, 2}) {
                        const icl::BasisLayout layout(d, 2, 3);
                        for (int k = 0; k < 3; ++k) {
                          const icl::RefinementMatrix R(layout, k);
                          icl::Rng rng(icl::stream_seed(12, icl::Stream::sweep, d, k));
                          std::vector<double> coarse(layout.layer_size(k));
                          for (double& v : coarse) v = rng.uniform(-1, 1);
                          const auto fine = icl::refinement_apply(coarse, R);
                          std::vector<double> x(static_cast<std::size_t>(d));
                          for (int t = 0; t < 200; ++t) {
                            for (double& v : x) v = rng.uniform();
                            double lhs = 0.0, rhs = 0.0;
                            const double s0 = std::pow(2.0, 0.5 * k * d), s1 = std::pow(2.0, 0.5 * (k + 1) * d);
                            icl::for_each_active(d, 2, k, x, [&](std::size_t j, double w) { lhs += coarse[j] * s0 * w; });
                            icl::for_each_active(d, 2, k + 1, x, [&](std::size_t j, double w) { rhs += fine[j] * s1 * w; });
                            if (std::abs(lhs - rhs) > 1e-10) return "mismatch " + fmt(lhs - rhs);
                          }
                        }
                      }
                      return std::string();
                    }});
  checks.push_back({"Gram interior entries", [] {
                      const Eigen::MatrixXd g = icl::gram_1d(2, 4);
                      for (int t = 0; t <= 3; ++t) {
                        const double e = std::abs(g(8, 8 + t) - icl::cardinal_bspline(5, 3.0 + t));
                        if (e > 1e-10) return "offset " + std::to_string(t) + " error " + fmt(e);
                      }
                      return std::string();
                    }});
  checks.push_back({"gradient check", [] {
                      icl::TaskDistribution dist;
                      dist.d = 2;
                      dist.k_max = 2;
                      const auto prompts = icl::draw_prompts(dist, 6, 4, 5, icl::Stream::task, icl::Stream::prompt);
                      for (icl::Variant v : {icl::Variant::LinearAttn, icl::Variant::SoftmaxAttn, icl::Variant::Encoder2}) {
                        icl::ModelSpec spec;
                        spec.variant = v;
                        spec.d = 2;
                        spec.hidden = {8, 8};
                        spec.width = 6;
                        spec.encoder_hidden = 8;
                        spec.output_clip = 50.0;
                        const auto params = icl::init_params(spec, 21);
                        const auto rep = icl::check_gradients(params, prompts);
                        if (rep.max_rel_error > 1e-4) {
                          return std::string(icl::variant_name(v)) + " rel error " + fmt(rep.max_rel_error) + " at " + rep.worst;
                        }
                      }
                      return std::string();
                    }});
  checks.push_back({"Gamma* scalar identity", [] {
                      for (double n : {1.0, 10.0, 1000.0}) {
                        for (double sb : {0.1, 1.0, 3.0}) {
                          const auto o = icl::gamma_star(Eigen::MatrixXd::Identity(4, 4),
                                                         sb * sb * Eigen::MatrixXd::Identity(4, 4), n);
                          const double want = 1.0 / (1.0 + 1.0 / (n * sb * sb));
                          const double e = (o.gamma - want * Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff();
                          if (e > 1e-12) return "error " + fmt(e);
                        }
                      }
                      return std::string();
                    }});
  checks.push_back({"projection onto S_N", [] {
                      icl::Rng rng(13);
                      Eigen::MatrixXd a(6, 6);
                      for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform(-3, 3);
                      const Eigen::MatrixXd p = icl::project_to_SN(a, 1.5);
                      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(p);
                      if (eig.eigenvalues().minCoeff() < -1e-10 || eig.eigenvalues().maxCoeff() > 1.5 + 1e-10) {
                        return std::string("eigenvalues outside [0, C3]");
                      }
                      return std::string();
                    }});
  checks.push_back({"bound arithmetic", [] {
                      icl::BoundInputs in;
                      in.N = 10;
                      in.n = 100;
                      in.T = 1000;
                      const auto rep = icl::bound_terms(in, icl::BoundFamily::Besov);
                      const double want[] = {0.01, 0.230258509, 0.230258509};
                      for (int i = 0; i < 3; ++i) {
                        if (std::abs(rep.terms[static_cast<std::size_t>(i)].value - want[i]) > 1e-4) {
                          return "term " + rep.terms[static_cast<std::size_t>(i)].name;
                        }
                      }
                      return std::string();
                    }});
  checks.push_back({"clip containment and context symmetry", [] {
                      icl::TaskDistribution dist;
                      auto prompts = icl::draw_prompts(dist, 12, 3, 7, icl::Stream::task, icl::Stream::prompt);
                      for (icl::Variant v : {icl::Variant::LinearAttn, icl::Variant::SoftmaxAttn, icl::Variant::Encoder2}) {
                        icl::ModelSpec spec;
                        spec.variant = v;
                        spec.output_clip = 0.05;
                        const auto params = icl::init_params(spec, 3);
                        for (auto p : prompts) {
                          const double y = icl::forward(params, p);
                          if (std::abs(y) > 0.05) return std::string("prediction outside clip");
                          if (v == icl::Variant::Encoder2) continue;
                          std::reverse(p.y.begin(), p.y.end());
                          std::reverse(p.x.begin(), p.x.end());
                          if (std::abs(icl::forward(params, p) - y) > 1e-12) return std::string("order dependence");
                        }
                      }
                      return std::string();
                    }});
  checks.push_back({"serialization round trips", [] {
                      icl::TaskDistribution dist;
                      dist.d = 2;
                      const auto task = icl::sample_task(dist, 9);
                      const auto back = icl::task_from_json(icl::task_to_json(task));
                      if (back.layers != task.layers) return std::string("task JSON");
                      const auto p = icl::sample_prompt(task, 5, 10);
                      const auto q = icl::prompt_from_json(icl::prompt_to_json(p));
                      if (q.x != p.x || q.y != p.y || q.query_y != p.query_y) return std::string("prompt JSON");
                      icl::ModelSpec spec;
                      spec.d = 2;
                      spec.output_clip = 1.0;
                      const auto params = icl::init_params(spec, 4);
                      std::vector<std::string> names;
                      std::vector<icl::Tensor> tensors;
                      icl::decode_tensors(icl::encode_tensors(params.names, params.tensors), names, tensors);
                      for (std::size_t i = 0; i < tensors.size(); ++i) {
                        if (tensors[i].storage() != params.tensors[i].storage()) return std::string("params blob");
                      }
                      return std::string();
                    }});
  return checks;
}

}  // namespace

bool verify(std::ostream& out) {
  int failed = 0;
  for (const Check& c : invariant_suite()) {
    std::string reason;
    try {
      reason = c.run();
    } catch (const std::exception& e) {
      reason = std::string("exception: ") + e.what();
    }
    if (reason.empty()) {
      out << "[ok]   " << c.name << "\n";
    } else {
      out << "[FAIL] " << c.name << ": " << reason << "\n";
      ++failed;
    }
  }
  if (failed == 0) {
    out << "all invariants passed\n";
  } else {
    out << failed << " invariant(s) failed\n";
  }
  return failed == 0;
}

}  // namespace lab
