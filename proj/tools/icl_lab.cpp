#include <cstdlib>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "icl/format.hpp"
#include "icl/parallel.hpp"
#include "lab/config.hpp"
#include "lab/experiments.hpp"
#include "lab/report.hpp"

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string variant;
  std::string params;
};

int env_threads() {
  const char* env = std::getenv("ICL_LAB_THREADS");
  if (env == nullptr || *env == '\0') return 0;
  try {
    const int k = std::stoi(env);
    if (k < 1) throw std::invalid_argument("not positive");
    return k;
  } catch (const std::exception&) {
    throw lab::ConfigError(std::string("ICL_LAB_THREADS: expected a positive integer, got '") + env + "'");
  }
}

lab::ExperimentConfig load(const Flags& f) {
  lab::ExperimentConfig c = f.config.empty() ? lab::parse_config("") : lab::load_config(f.config);
  if (f.seed) {
    c.seed = *f.seed;
    c.train.seed = *f.seed;
  }
  if (!f.out.empty()) c.out = f.out;
  if (!f.params.empty()) c.eval.params = f.params;
  if (!f.variant.empty()) {
    c.model.variant = icl::parse_variant(f.variant);
    c.sweep.variants = {f.variant};
  }
  return c;
}

void emit(const std::vector<lab::ResultRow>& rows, const lab::ExperimentConfig& c) {
  lab::emit_report(rows, c.out, c.sweep.median);
  std::cout << "wrote " << (c.out / "results.csv").string() << " (" << rows.size() << " rows, config "
            << c.hash_hex() << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"icl-lab: in-context nonparametric regression experiments"};
  app.require_subcommand(1);
  Flags flags;
  std::vector<std::string> plot_inputs;
  std::string plot_output;
  std::string plot_x;

  const auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", flags.config, "TOML experiment config");
    if (needs_config) opt->check(CLI::ExistingFile);
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--seed", flags.seed, "master seed");
    sub->add_option("--threads", flags.threads, "worker threads (fallback: ICL_LAB_THREADS)")->check(CLI::PositiveNumber);
    sub->add_option("--variant", flags.variant, "architecture variant")->check(CLI::IsMember({"a", "b", "c"}));
  };

  auto* verify = app.add_subcommand("verify", "run the invariant suite");
  add_common(verify, false);
  auto* train = app.add_subcommand("train", "train one model");
  add_common(train, true);
  auto* eval = app.add_subcommand("eval", "Monte Carlo risk of a saved model or of Gamma*");
  add_common(eval, true);
  eval->add_option("--params", flags.params, "saved model (default: Gamma* with exact features)");
  auto* sweep = app.add_subcommand("sweep", "train over the (variant, N, n, T, seed) grid");
  add_common(sweep, true);
  auto* rate = app.add_subcommand("oracle-rate", "risk of Gamma* with exact features versus n");
  add_common(rate, true);
  auto* plot = app.add_subcommand("plot", "render result CSVs to an SVG line chart");
  add_common(plot, true);
  plot->add_option("inputs", plot_inputs, "result CSV files");
  plot->add_option("-o,--output", plot_output, "SVG path (default <out>/plot.svg)");
  plot->add_option("--x", plot_x, "x column: N, n, T or epoch");

  CLI11_PARSE(app, argc, argv);

  try {
    int threads = flags.threads > 0 ? flags.threads : env_threads();
    if (threads > 0) icl::set_thread_count(threads);

    if (verify->parsed()) return lab::verify(std::cout) ? 0 : 1;

    const lab::ExperimentConfig config = load(flags);
    if (train->parsed()) {
      emit(lab::run_train(config, std::cout), config);
    } else if (eval->parsed()) {
      emit(lab::run_eval(config, std::cout), config);
    } else if (sweep->parsed()) {
      emit(lab::run_sweep(config, std::cout), config);
    } else if (rate->parsed()) {
      emit(lab::run_oracle_rate(config, std::cout), config);
    } else if (plot->parsed()) {
      lab::PlotSettings settings = config.plot;
      std::vector<std::filesystem::path> inputs = settings.inputs;
      for (const auto& p : plot_inputs) inputs.emplace_back(p);
      if (!plot_x.empty()) settings.x = plot_x;
      std::filesystem::path output = plot_output.empty() ? settings.output : std::filesystem::path(plot_output);
      if (output.empty()) output = config.out / "plot.svg";
      const std::size_t series = lab::run_plot(inputs, output, settings);
      std::cout << "wrote " << output.string() << " (" << series << " series)\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "icl-lab: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
