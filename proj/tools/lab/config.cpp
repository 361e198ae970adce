#include "config.hpp"

#include <cmath>
#include <concepts>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>
#include <toml.hpp>

#include "icl/format.hpp"
#include "icl/hash.hpp"
#include "icl/params_io.hpp"

namespace lab {

using json = nlohmann::json;

namespace {

// Typed access to one TOML table; remembers which keys were read so that
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const toml::table* table, std::string prefix) : table_(table), prefix_(std::move(prefix)) {}

  bool present() const { return table_ != nullptr; }
  void allow(const char* key) { seen_.insert(key); }

  void read(const char* key, double& out) {
    if (const toml::node* n = find(key)) {
      if (auto v = n->value<double>(); v && (n->is_floating_point() || n->is_integer())) {
        out = *v;
      } else {
        fail(key, "a number");
      }
    }
  }
  void read(const char* key, int& out) {
    if (const toml::node* n = find(key)) {
      const auto v = n->value<std::int64_t>();
      if (!n->is_integer() || !v || *v < std::numeric_limits<int>::min() || *v > std::numeric_limits<int>::max()) {
        fail(key, "an integer");
      }
      out = static_cast<int>(*v);
    }
  }
  template <std::unsigned_integral U>
  void read(const char* key, U& out) {
    if (const toml::node* n = find(key)) {
      const auto v = n->value<std::int64_t>();
      if (!n->is_integer() || !v || *v < 0) fail(key, "a non-negative integer");
      out = static_cast<U>(*v);
    }
  }
  void read(const char* key, bool& out) {
    if (const toml::node* n = find(key)) {
      if (!n->is_boolean()) fail(key, "true or false");
      out = *n->value<bool>();
    }
  }
  void read(const char* key, std::string& out) {
    if (const toml::node* n = find(key)) {
      if (!n->is_string()) fail(key, "a string");
      out = *n->value<std::string>();
    }
  }
  void read(const char* key, std::filesystem::path& out) {
    std::string s;
    if (find(key)) {
      read(key, s);
      out = s;
    }
  }
  template <typename T>
  void read(const char* key, std::vector<T>& out) {
    const toml::node* n = find(key);
    if (!n) return;
    const toml::array* arr = n->as_array();
    if (!arr) fail(key, "an array");
    std::vector<T> values;
    for (const toml::node& item : *arr) {
      if constexpr (std::is_same_v<T, std::string>) {
        if (!item.is_string()) fail(key, "an array of strings");
        values.push_back(*item.value<std::string>());
      } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
        if (!item.is_string()) fail(key, "an array of strings");
        values.emplace_back(*item.value<std::string>());
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!item.is_number()) fail(key, "an array of numbers");
        values.push_back(*item.value<double>());
      } else {
        const auto v = item.value<std::int64_t>();
        if (!item.is_integer() || !v || (std::is_unsigned_v<T> && *v < 0)) fail(key, "an array of integers");
        values.push_back(static_cast<T>(*v));
      }
    }
    out = std::move(values);
  }

  // Keys this section did not consume.
  void reject_unknown() const {
    if (!table_) return;
    for (auto&& [k, v] : *table_) {
      (void)v;
      if (!seen_.count(std::string(k.str()))) {
        throw ConfigError("config: unknown key '" + qualified(std::string(k.str())) + "'");
      }
    }
  }

  [[noreturn]] void fail(const std::string& key, const char* expected) const {
    throw ConfigError("config: key '" + qualified(key) + "' must be " + expected);
  }

 private:
  const toml::node* find(const char* key) {
    if (!table_) return nullptr;
    seen_.insert(key);
    return table_->get(key);
  }
  std::string qualified(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  const toml::table* table_;
  std::string prefix_;
  std::set<std::string> seen_;
};

const toml::table* subtable(const toml::table& root, const char* name) {
  const toml::node* n = root.get(name);
  if (!n) return nullptr;
  if (!n->is_table()) throw ConfigError(std::string("config: '") + name + "' must be a table");
  return n->as_table();
}

template <typename F>
void checked(const std::string& key, F&& check) {
  try {
    check();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config: invalid value under '" + key + "': " + e.what());
  }
}

}  // namespace

ExperimentConfig parse_config(std::string_view text, const std::string& source) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config: " << source << ": " << e.description() << " at line " << e.source().begin.line;
    throw ConfigError(msg.str());
  }
  ExperimentConfig c;
  Section top(&root, "");
  top.read("seed", c.seed);
  top.read("out", c.out);

  Section task(subtable(root, "task"), "task");
  task.read("d", c.task.d);
  task.read("alpha", c.task.alpha);
  task.read("m", c.task.m);
  task.read("k_max", c.task.k_max);
  task.read("c_beta", c.task.c_beta);
  task.read("sigma", c.task.sigma);
  task.read("output_clip", c.task.output_clip);
  task.read("log_power", c.task.log_power);
  task.reject_unknown();
  checked("task", [&] { c.task.validate(); });

  Section model(subtable(root, "model"), "model");
  std::string variant = "a", features = "mlp";
  model.read("variant", variant);
  model.read("features", features);
  checked("model.variant", [&] { c.model.variant = icl::parse_variant(variant); });
  checked("model.features", [&] { c.model.features = icl::parse_feature_mode(features); });
  model.read("hidden", c.model.hidden);
  model.read("width", c.model.width);
  model.read("encoder_layers", c.model.encoder_layers);
  model.read("encoder_hidden", c.model.encoder_hidden);
  model.read("feature_radius", c.model.feature_radius);
  model.read("output_clip", c.model.output_clip);
  model.read("wavelet_k", c.model.wavelet_k);
  model.reject_unknown();
  c.model.d = c.task.d;
  c.model.wavelet_m = c.task.m;

  Section train(subtable(root, "train"), "train");
  train.read("lr", c.train.lr);
  train.read("beta1", c.train.beta1);
  train.read("beta2", c.train.beta2);
  train.read("eps", c.train.eps);
  train.read("epochs", c.train.epochs);
  train.read("batch_size", c.train.batch_size);
  train.read("tasks", c.train.tasks);
  train.read("context", c.train.context);
  train.read("test_tasks", c.train.test_tasks);
  train.read("test_every_epoch", c.train.test_every_epoch);
  train.read("project", c.train.project);
  train.read("c3", c.train.c3);
  train.read("oracle_features", c.train.oracle_features);
  train.read("oracle_k", c.train.oracle_k);
  std::string gamma_init = "random";
  train.read("gamma_init", gamma_init);
  if (gamma_init == "random") {
    c.train.gamma_init = icl::GammaInit::Random;
  } else if (gamma_init == "oracle") {
    c.train.gamma_init = icl::GammaInit::Oracle;
  } else {
    train.fail("gamma_init", "\"random\" or \"oracle\"");
  }
  train.read("checkpoint_every", c.train.checkpoint_every);
  train.reject_unknown();
  c.train.seed = c.seed;
  checked("train", [&] { c.train.validate(); });
  checked("model", [&] { icl::resolve_spec(c.task, c.model, c.train); });

  Section eval(subtable(root, "eval"), "eval");
  eval.read("tasks", c.eval.tasks);
  eval.read("queries", c.eval.queries);
  eval.read("n", c.eval.n);
  std::string target = "noiseless";
  eval.read("target", target);
  if (target == "noiseless") {
    c.eval.target = icl::RiskTarget::Noiseless;
  } else if (target == "noisy") {
    c.eval.target = icl::RiskTarget::Noisy;
  } else {
    eval.fail("target", "\"noiseless\" or \"noisy\"");
  }
  eval.read("params", c.eval.params);
  eval.reject_unknown();
  if (c.eval.tasks == 0 || c.eval.queries == 0) throw ConfigError("config: eval.tasks and eval.queries must be >= 1");

  Section sweep(subtable(root, "sweep"), "sweep");
  sweep.read("variants", c.sweep.variants);
  sweep.read("N", c.sweep.N);
  sweep.read("n", c.sweep.n);
  sweep.read("T", c.sweep.T);
  sweep.read("seeds", c.sweep.seeds);
  sweep.read("median", c.sweep.median);
  sweep.read("scale_hidden", c.sweep.scale_hidden);
  sweep.read("metrics", c.sweep.metrics);
  sweep.reject_unknown();
  for (const auto& v : c.sweep.variants) checked("sweep.variants", [&] { icl::parse_variant(v); });
  for (const auto& m : c.sweep.metrics) {
    if (m != "test_loss" && m != "train_loss" && m != "risk") {
      throw ConfigError("config: key 'sweep.metrics' has unknown metric '" + m + "'");
    }
  }
  if (c.sweep.variants.empty() || c.sweep.N.empty() || c.sweep.n.empty() || c.sweep.T.empty() ||
      c.sweep.seeds.empty() || c.sweep.metrics.empty()) {
    throw ConfigError("config: sweep lists must be nonempty");
  }
  for (int N : c.sweep.N) {
    if (N < 1) throw ConfigError("config: key 'sweep.N' must hold positive widths");
  }
  for (std::size_t v : c.sweep.n) {
    if (v < 1) throw ConfigError("config: key 'sweep.n' must hold positive sizes");
  }
  for (std::size_t v : c.sweep.T) {
    if (v < 1) throw ConfigError("config: key 'sweep.T' must hold positive sizes");
  }

  Section rate(subtable(root, "oracle_rate"), "oracle_rate");
  rate.read("alphas", c.oracle_rate.alphas);
  rate.read("n", c.oracle_rate.n);
  rate.read("tasks", c.oracle_rate.tasks);
  rate.read("queries", c.oracle_rate.queries);
  rate.read("k_max", c.oracle_rate.k_max);
  rate.read("bounds", c.oracle_rate.bounds);
  rate.reject_unknown();
  if (c.oracle_rate.alphas.empty() || c.oracle_rate.n.size() < 3) {
    throw ConfigError("config: oracle_rate needs alphas and at least 3 values of n");
  }

  Section plot(subtable(root, "plot"), "plot");
  plot.read("inputs", c.plot.inputs);
  plot.read("x", c.plot.x);
  plot.read("log_x", c.plot.log_x);
  plot.read("log_y", c.plot.log_y);
  plot.read("title", c.plot.title);
  plot.read("output", c.plot.output);
  plot.reject_unknown();

  for (const char* name : {"task", "model", "train", "eval", "sweep", "oracle_rate", "plot"}) top.allow(name);
  top.reject_unknown();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  ExperimentConfig c = parse_config(ss.str(), path.string());
  // Relative paths inside the file resolve against its directory.
  const auto base = path.parent_path();
  if (!c.eval.params.empty() && c.eval.params.is_relative()) c.eval.params = base / c.eval.params;
  for (auto& p : c.plot.inputs) {
    if (p.is_relative()) p = base / p;
  }
  return c;
}

std::string ExperimentConfig::canonical() const {
  json j;
  j["seed"] = seed;
  j["task"] = {{"d", task.d},           {"alpha", task.alpha},   {"m", task.m},
               {"k_max", task.k_max},   {"c_beta", task.c_beta}, {"sigma", task.sigma},
               {"output_clip", task.output_clip}, {"log_power", task.log_power}};
  j["model"] = json::parse(icl::spec_to_json(model));
  j["train"] = {{"lr", train.lr},
                {"beta1", train.beta1},
                {"beta2", train.beta2},
                {"eps", train.eps},
                {"epochs", train.epochs},
                {"batch_size", train.batch_size},
                {"tasks", train.tasks},
                {"context", train.context},
                {"test_tasks", train.test_tasks},
                {"test_every_epoch", train.test_every_epoch},
                {"project", train.project},
                {"c3", train.c3},
                {"oracle_features", train.oracle_features},
                {"oracle_k", train.oracle_k},
                {"gamma_init", train.gamma_init == icl::GammaInit::Oracle ? "oracle" : "random"}};
  j["eval"] = {{"tasks", eval.tasks},
               {"queries", eval.queries},
               {"n", eval.n},
               {"target", eval.target == icl::RiskTarget::Noisy ? "noisy" : "noiseless"},
               {"params", eval.params.generic_string()}};
  j["sweep"] = {{"variants", sweep.variants}, {"N", sweep.N},           {"n", sweep.n},
                {"T", sweep.T},               {"seeds", sweep.seeds},   {"median", sweep.median},
                {"scale_hidden", sweep.scale_hidden}, {"metrics", sweep.metrics}};
  j["oracle_rate"] = {{"alphas", oracle_rate.alphas}, {"n", oracle_rate.n},         {"tasks", oracle_rate.tasks},
                      {"queries", oracle_rate.queries}, {"k_max", oracle_rate.k_max}, {"bounds", oracle_rate.bounds}};
  return j.dump();
}

std::uint64_t ExperimentConfig::hash() const {
  icl::Fnv1a h;
  h.add(canonical());
  return h.value();
}

std::string ExperimentConfig::hash_hex() const { return icl::hex64(hash()); }

}  // namespace lab
