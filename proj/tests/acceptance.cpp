// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//   acceptance            criteria 1-10, criterion 9 at quarter scale (T = n = 128)
//   acceptance --full     criterion 9 at full scale with the median-of-5 sweeps
//   acceptance --only 6   a single criterion

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "icl/bounds.hpp"
#include "icl/eval.hpp"
#include "icl/format.hpp"
#include "icl/model.hpp"
#include "icl/oracle.hpp"
#include "icl/params_io.hpp"
#include "icl/rng.hpp"
#include "icl/train.hpp"
#include "icl/wavelet.hpp"
#include "lab/config.hpp"
#include "lab/experiments.hpp"
#include "lab/report.hpp"
#include "oracles.hpp"

namespace {

using Clock = std::chrono::steady_clock;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& why) {
    if (!ok) {
      pass = false;
      detail << " [" << why << "]";
    }
  }
};

std::string g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

fs::path config_dir() { return fs::path(ICL_CONFIG_DIR); }

// 1: partition of unity and symmetry.
void splines(Outcome& o) {
  icl::Rng rng(101);
  double pou = 0.0, sym = 0.0;
  for (int m : {2, 4}) {
    for (int d : {1, 2}) {
      std::vector<double> x(static_cast<std::size_t>(d));
      for (int k = 0; k <= 4; ++k) {
        for (int t = 0; t < 10000; ++t) {
          for (double& v : x) v = rng.uniform();
          double s = 0.0;
          icl::for_each_active(d, m, k, x, [&](std::size_t, double w) { s += w; });
          pou = std::max(pou, std::abs(s - 1.0));
        }
      }
    }
    for (int t = 0; t < 10000; ++t) {
      const double x = rng.uniform(0.0, m + 1.0);
      sym = std::max(sym, std::abs(icl::cardinal_bspline(m, x) - icl::cardinal_bspline(m, m + 1 - x)));
    }
  }
  o.detail << "max |sum omega - 1| = " << g(pou) << ", max asymmetry = " << g(sym);
  o.require(pou <= 1e-12, "partition of unity above 1e-12");
  o.require(sym <= 1e-12, "symmetry above 1e-12");
}

// 2: refinement identity at random points and interior row sums.
void refinement(Outcome& o) {
  icl::Rng rng(202);
  double worst = 0.0, rowsum = 0.0;
  for (int d : {1, 2}) {
    const icl::BasisLayout layout(d, 2, 4);
    std::vector<double> x(static_cast<std::size_t>(d));
    for (int k = 0; k < 4; ++k) {
      const icl::RefinementMatrix R(layout, k);
      std::vector<double> coarse(layout.layer_size(k));
      for (double& c : coarse) c = rng.uniform(-1.0, 1.0);
      const auto fine = icl::refinement_apply(coarse, R);
      const double s0 = std::pow(2.0, 0.5 * k * d), s1 = std::pow(2.0, 0.5 * (k + 1) * d);
      for (int t = 0; t < 1000; ++t) {
        for (double& v : x) v = rng.uniform();
        double lhs = 0.0, rhs = 0.0;
        icl::for_each_active(d, 2, k, x, [&](std::size_t j, double w) { lhs += coarse[j] * s0 * w; });
        icl::for_each_active(d, 2, k + 1, x, [&](std::size_t j, double w) { rhs += fine[j] * s1 * w; });
        worst = std::max(worst, std::abs(lhs - rhs));
      }
      const Eigen::MatrixXd dense = Eigen::MatrixXd(R.matrix());
      const int hi = (1 << (k + 1)) - 1;
      for (std::size_t s = 0; s < layout.layer_size(k); ++s) {
        bool interior = true;
        for (int l : layout.location(k, s)) interior = interior && 2 * l >= -2 && 2 * l + 3 <= hi;
        if (interior) {
          rowsum = std::max(rowsum, std::abs(dense.col(static_cast<Eigen::Index>(s)).sum() - std::pow(2.0, d / 2.0)));
        }
      }
    }
  }
  o.detail << "max pointwise gap = " << g(worst) << ", max row-sum error = " << g(rowsum);
  o.require(worst <= 1e-10, "identity gap above 1e-10");
  o.require(rowsum <= 1e-12, "row sums off 2^{d/2}");
}

// 3: quadrature Gram against iota_{2m+1}(m+1+|t|).
void gram(Outcome& o) {
  double worst = 0.0;
  for (int m : {2, 4}) {
    for (int k : {3, 4, 5}) {
      const Eigen::MatrixXd G = icl::gram_1d(m, k);
      for (int a = m; a + 1 <= (1 << k); ++a) {
        for (int b = m; b + 1 <= (1 << k); ++b) {
          worst = std::max(worst, std::abs(G(a, b) - oracle::bspline(2 * m + 1, m + 1 + std::abs(a - b))));
        }
      }
    }
  }
  const double diag = icl::gram_1d(2, 3)(4, 4);
  o.detail << "max interior error = " << g(worst) << ", m=2 diagonal = " << icl::format_double(diag);
  o.require(worst <= 1e-10, "interior entries off");
  o.require(std::abs(diag - 0.55) <= 1e-10, "diagonal is not 0.55");
}

// 4: reverse mode against central differences.
void gradients(Outcome& o) {
  icl::TaskDistribution dist;
  dist.d = 2;
  dist.k_max = 2;
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto prompts = icl::draw_prompts(dist, 6, 5, seed, icl::Stream::task, icl::Stream::prompt);
    for (icl::Variant v : {icl::Variant::LinearAttn, icl::Variant::SoftmaxAttn, icl::Variant::Encoder2}) {
      icl::ModelSpec spec;
      spec.variant = v;
      spec.d = 2;
      spec.hidden = {8, 8};
      spec.width = v == icl::Variant::Encoder2 ? 8 : 6;
      spec.encoder_hidden = 8;
      spec.output_clip = 50.0;
      const auto rep = icl::check_gradients(icl::init_params(spec, seed), prompts, 1e-5, 1e-8);
      worst = std::max(worst, rep.max_rel_error);
      checked += rep.checked;
    }
  }
  o.detail << "max relative error = " << g(worst) << " over " << checked << " coordinates";
  o.require(worst <= 1e-4, "relative error above 1e-4");
}

// 5: Gamma* with identity Gram and isotropic coefficients.
void gamma_identity(Outcome& o) {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(6, 6);
  double worst = 0.0;
  for (double n : {1.0, 10.0, 128.0, 1024.0, 1e6}) {
    for (double sb : {0.01, 0.3, 1.0, 10.0}) {
      const auto gs = icl::gamma_star(I, sb * sb * I, n);
      worst = std::max(worst, (gs.gamma - I / (1.0 + 1.0 / (n * sb * sb))).cwiseAbs().maxCoeff());
    }
  }
  o.detail << "max entry error = " << g(worst);
  o.require(worst <= 1e-12, "error above 1e-12");
}

std::vector<lab::ResultRow> g_rate_rows;

// 6: oracle rate slope.
void rate(Outcome& o) {
  const lab::ExperimentConfig c = lab::load_config(config_dir() / "oracle_rate.toml");
  std::ostringstream log;
  std::vector<lab::RateFit> fits;
  g_rate_rows = lab::run_oracle_rate(c, log, &fits);
  for (const auto& f : fits) {
    o.detail << "alpha=" << f.alpha << " slope " << g(f.slope) << " (+-" << g(f.stderr_) << ", target "
             << g(f.expected) << ")  ";
    o.require(std::abs(f.slope - f.expected) <= 0.15, "alpha=" + g(f.alpha) + " slope outside +-0.15");
  }
}

// 7: truncation error against N.
void truncation(Outcome& o) {
  icl::TaskDistribution dist;
  dist.d = 1;
  dist.alpha = 1.0;
  dist.log_power = 0.0;
  dist.k_max = 11;
  const std::vector<int> ks = {4, 5, 6, 7, 8};
  const auto rows = icl::truncation_error(dist, ks, 400, 400, 707);
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : rows) pts.emplace_back(static_cast<double>(r.N), r.error);
  const auto fit = icl::slope_fit(pts);
  o.detail << "slope " << g(fit.slope) << " (+-" << g(fit.stderr_) << ", target -2)";
  o.require(std::abs(fit.slope + 2.0) <= 0.2, "slope outside +-0.2");
}

// 8: concentration on the 3x3 grid.
void concentration(Outcome& o) {
  const int ks[] = {3, 4, 5};  // N = 10, 18, 34
  const std::size_t ns[] = {64, 256, 1024};
  double dev[3][3];
  for (int i = 0; i < 3; ++i) {
    const icl::BasisLayout layout(1, 2, ks[i]);
    for (int j = 0; j < 3; ++j) dev[i][j] = icl::concentration_stat(layout, ns[j], 200, 808);
  }
  for (int i = 0; i < 3; ++i) {
    o.detail << "N=" << icl::BasisLayout(1, 2, ks[i]).top_size() << ":";
    for (int j = 0; j < 3; ++j) o.detail << " " << g(dev[i][j]);
    o.detail << "  ";
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j + 1 < 3; ++j) o.require(dev[i][j + 1] <= 0.6 * dev[i][j], "n-decay fails at row " + std::to_string(i));
  }
  for (int j = 0; j < 3; ++j) {
    for (int i = 0; i + 1 < 3; ++i) o.require(dev[i + 1][j] > dev[i][j], "N-increase fails at column " + std::to_string(j));
  }
}

// Adjacent increases along a curve.
int inversions(const std::vector<double>& v) {
  int c = 0;
  for (std::size_t i = 1; i < v.size(); ++i) c += v[i] > v[i - 1];
  return c;
}

// 9: training curves and sweeps.
void training(Outcome& o, bool full) {
  lab::ExperimentConfig c = lab::load_config(config_dir() / (full ? "sweep_n.toml" : "smoke.toml"));
  c.sweep.scale_hidden = true;
  const std::size_t top = full ? 512 : 128;
  const std::vector<std::uint64_t> seeds = full ? std::vector<std::uint64_t>{1, 2, 3, 4, 5} : std::vector<std::uint64_t>{1};
  const int N = 32;
  std::map<std::tuple<icl::Variant, std::size_t, std::size_t, std::uint64_t>, icl::TrainResult> runs;
  const auto run = [&](icl::Variant v, std::size_t n, std::size_t T, std::uint64_t s) -> const icl::TrainResult& {
    const auto key = std::make_tuple(v, n, T, s);
    auto it = runs.find(key);
    if (it == runs.end()) {
      it = runs.emplace(key, lab::train_point(c, v, N, n, T, s)).first;
    }
    return it->second;
  };
  for (icl::Variant v : {icl::Variant::LinearAttn, icl::Variant::SoftmaxAttn, icl::Variant::Encoder2}) {
    std::vector<double> ratios;
    for (std::uint64_t s : seeds) {
      const auto& h = run(v, top, top, s).history;
      ratios.push_back(h.back().train_loss / h.at(1).train_loss);
    }
    const double r = lab::median(ratios);
    o.detail << (v == icl::Variant::LinearAttn ? "" : "; ") << icl::variant_name(v) << " final/epoch-1 " << g(r);
    o.require(r <= 0.05, std::string(icl::variant_name(v)) + " training loss ratio above 0.05");
  }
  if (!full) return;
  const std::vector<std::size_t> grid = {128, 256, 512};
  for (icl::Variant v : {icl::Variant::LinearAttn, icl::Variant::SoftmaxAttn, icl::Variant::Encoder2}) {
    for (const char* axis : {"n", "T"}) {
      std::vector<double> curve;
      for (std::size_t x : grid) {
        std::vector<double> losses;
        for (std::uint64_t s : seeds) {
          const std::size_t n = axis[0] == 'n' ? x : 512, T = axis[0] == 'n' ? 512 : x;
          losses.push_back(run(v, n, T, s).history.back().test_loss);
        }
        curve.push_back(lab::median(losses));
      }
      o.detail << icl::variant_name(v) << " test vs " << axis << " [" << g(curve[0]) << " " << g(curve[1]) << " "
               << g(curve[2]) << "]  ";
      o.require(inversions(curve) <= 1, std::string(icl::variant_name(v)) + " test loss vs " + axis + " has 2 inversions");
    }
  }
}

// 10: bound arithmetic and plot overlay.
void bounds(Outcome& o) {
  icl::BoundInputs in;
  in.N = 10;
  in.n = 100;
  in.T = 1000;
  in.alpha = 1;
  in.d = 1;
  const auto rep = icl::bound_terms(in, icl::BoundFamily::Besov);
  const double want[] = {0.01, 0.23026, 0.23026};
  o.detail << "besov bound terms";
  for (std::size_t i = 0; i < 3; ++i) {
    o.detail << " " << g(rep.terms[i].value);
    o.require(std::abs(rep.terms[i].value - want[i]) <= 1e-4, "term " + rep.terms[i].name);
  }
  if (g_rate_rows.empty()) {
    std::ostringstream log;
    g_rate_rows = lab::run_oracle_rate(lab::load_config(config_dir() / "oracle_rate.toml"), log);
  }
  const fs::path dir = fs::temp_directory_path() / "icl_acceptance_plot";
  fs::remove_all(dir);
  lab::write_results_csv(g_rate_rows, dir / "rate.csv");
  lab::PlotSettings ps;
  const std::size_t series = lab::run_plot({dir / "rate.csv"}, dir / "rate.svg", ps);
  const std::string svg = icl::read_file(dir / "rate.svg");
  std::size_t polylines = 0, bound_series = 0;
  for (auto p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++polylines;
  for (auto p = svg.find("data-series=\"oracle bound"); p != std::string::npos;
       p = svg.find("data-series=\"oracle bound", p + 1)) {
    ++bound_series;
  }
  o.detail << "; plot: " << series << " series, " << polylines << " polylines, " << bound_series << " bound curves";
  o.require(!svg.empty() && polylines == series, "polyline count differs from series count");
  o.require(bound_series >= 1, "no bound curve in the plot");
  fs::remove_all(dir);
}

}  // namespace

int main(int argc, char** argv) {
  bool full = false;
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--full") == 0) full = true;
    else if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
    else {
      std::cerr << "usage: acceptance [--full] [--only K]\n";
      return 2;
    }
  }
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<void(Outcome&)> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "spline correctness", 10, splines},
      {2, "refinement identity", 0, refinement},
      {3, "Gram cross-check", 0, gram},
      {4, "gradient fidelity", 30, gradients},
      {5, "Gamma* scalar identity", 0, gamma_identity},
      {6, "oracle rate recovery", 300, rate},
      {7, "truncation decay", 60, truncation},
      {8, "concentration", 120, concentration},
      {9, full ? "training reproduction (full scale)" : "training reproduction (T = n = 128 smoke)", full ? 1800.0 : 180.0,
       [full](Outcome& o) { training(o, full); }},
      {10, "bound calculator and plot overlay", 0, bounds},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " exception: " << e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (c.budget_s > 0 && secs > c.budget_s) o.require(false, "runtime " + g(secs) + " s over budget " + g(c.budget_s) + " s");
    std::cout << "criterion " << c.id << " " << (o.pass ? "PASS" : "FAIL") << ": " << c.name << ": "
              << o.detail.str() << " (" << g(secs) << " s)" << std::endl;
    failed += !o.pass;
  }
  std::cout << (failed == 0 ? "acceptance: all criteria passed" : "acceptance: " + std::to_string(failed) + " failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
