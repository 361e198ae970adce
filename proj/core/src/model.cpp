#include "icl/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "icl/parallel.hpp"
#include "icl/rng.hpp"
#include "icl/wavelet.hpp"

namespace icl {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::LinearAttn:
      return "linear";
    case Variant::SoftmaxAttn:
      return "softmax";
    case Variant::Encoder2:
      return "encoder";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  if (text == "a" || text == "linear") return Variant::LinearAttn;
  if (text == "b" || text == "softmax") return Variant::SoftmaxAttn;
  if (text == "c" || text == "encoder") return Variant::Encoder2;
  throw std::invalid_argument("unknown variant '" + std::string(text) + "' (expected a, b or c)");
}

std::string_view feature_mode_name(FeatureMode f) { return f == FeatureMode::Mlp ? "mlp" : "wavelet"; }

FeatureMode parse_feature_mode(std::string_view text) {
  if (text == "mlp") return FeatureMode::Mlp;
  if (text == "wavelet") return FeatureMode::ExactWavelet;
  throw std::invalid_argument("unknown feature mode '" + std::string(text) + "' (expected mlp or wavelet)");
}

void ModelSpec::validate() const {
  if (d < 1) throw std::invalid_argument("ModelSpec: d must be >= 1");
  if (!(output_clip >= 0.0)) throw std::invalid_argument("ModelSpec: output_clip must be >= 0");
  if (feature_radius < 0.0) throw std::invalid_argument("ModelSpec: feature_radius must be >= 0");
  for (int h : hidden) {
    if (h < 1) throw std::invalid_argument("ModelSpec: hidden widths must be >= 1");
  }
  if (variant == Variant::Encoder2) {
    if (features != FeatureMode::Mlp) {
      throw std::invalid_argument("ModelSpec: the encoder variant has no wavelet feature mode");
    }
    if (width < 1 || encoder_layers < 1 || encoder_hidden < 1) {
      throw std::invalid_argument("ModelSpec: encoder sizes must be >= 1");
    }
    return;
  }
  if (features == FeatureMode::ExactWavelet) {
    BasisLayout(d, wavelet_m, wavelet_k);  // throws on bad (d, m, K)
  } else if (width < 1) {
    throw std::invalid_argument("ModelSpec: width must be >= 1");
  }
}

std::size_t ModelSpec::feature_dim() const {
  if (variant != Variant::Encoder2 && features == FeatureMode::ExactWavelet) {
    return BasisLayout(d, wavelet_m, wavelet_k).top_size();
  }
  return static_cast<std::size_t>(width);
}

double ModelSpec::radius() const {
  return feature_radius > 0.0 ? feature_radius : 2.0 * std::sqrt(static_cast<double>(feature_dim()));
}

std::size_t ModelParams::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  throw std::out_of_range("ModelParams: no tensor named '" + std::string(name) + "'");
}

bool ModelParams::has(std::string_view name) const {
  for (const auto& n : names) {
    if (n == name) return true;
  }
  return false;
}

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

namespace {

struct Slot {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t fan_in;
};

std::vector<Slot> layout_of(const ModelSpec& spec) {
  std::vector<Slot> slots;
  const auto affine = [&](const std::string& prefix, std::size_t in, std::size_t out) {
    slots.push_back({prefix + ".weight", {in, out}, in});
    slots.push_back({prefix + ".bias", {out}, in});
  };
  const auto d = static_cast<std::size_t>(spec.d);
  if (spec.variant == Variant::Encoder2) {
    const auto w = static_cast<std::size_t>(spec.width);
    const auto h = static_cast<std::size_t>(spec.encoder_hidden);
    affine("embed", d + 1, w);
    for (int l = 0; l < spec.encoder_layers; ++l) {
      const std::string p = "enc." + std::to_string(l);
      slots.push_back({p + ".query", {w, w}, w});
      slots.push_back({p + ".key", {w, w}, w});
      slots.push_back({p + ".value", {w, w}, w});
      affine(p + ".mlp0", w, h);
      affine(p + ".mlp1", h, w);
    }
    return slots;
  }
  const std::size_t n = spec.feature_dim();
  if (spec.features == FeatureMode::Mlp) {
    std::size_t in = d;
    for (std::size_t l = 0; l < spec.hidden.size(); ++l) {
      const auto out = static_cast<std::size_t>(spec.hidden[l]);
      affine("feat." + std::to_string(l), in, out);
      in = out;
    }
    affine("feat." + std::to_string(spec.hidden.size()), in, n);
  }
  slots.push_back({"gamma", {n, n}, n});
  return slots;
}

}  // namespace

void ModelParams::validate() const {
  spec.validate();
  const auto slots = layout_of(spec);
  if (slots.size() != names.size() || names.size() != tensors.size()) {
    throw std::invalid_argument("ModelParams: tensor count does not match the architecture");
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (names[i] != slots[i].name || tensors[i].shape() != slots[i].shape) {
      throw std::invalid_argument("ModelParams: tensor '" + names[i] + "' has shape " +
                                  tensors[i].shape_string() + ", expected '" + slots[i].name + "'");
    }
  }
}

ModelParams init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  ModelParams p;
  p.spec = spec;
  std::size_t i = 0;
  for (const Slot& s : layout_of(spec)) {
    Rng rng(stream_seed(seed, Stream::init, i++));
    Tensor t(s.shape);
    const double a = 1.0 / std::sqrt(static_cast<double>(s.fan_in));
    for (double& v : t.values()) v = rng.uniform(-a, a);
    p.names.push_back(s.name);
    p.tensors.push_back(std::move(t));
  }
  return p;
}

namespace {

std::string affine_name(std::size_t layer, const char* part) {
  return "feat." + std::to_string(layer) + "." + part;
}

// Rows of x (count x d) through the feature net, radially projected.
ad::Var mlp_tape(const std::vector<ad::Var>& vars, const ModelParams& params, ad::Var x) {
  const std::size_t layers = params.spec.hidden.size() + 1;
  ad::Var h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    const ad::Var w = vars[params.index_of(affine_name(l, "weight"))];
    const ad::Var b = vars[params.index_of(affine_name(l, "bias"))];
    h = ad::add_row_bias(ad::matmul(h, w), b);
    if (l + 1 < layers) h = ad::relu(h);
  }
  return ad::radial_project_rows(h, params.spec.radius());
}

// Context points followed by the query, (n + 1) x d.
Tensor stacked_points(const Prompt& prompt) {
  const auto d = static_cast<std::size_t>(prompt.d);
  const std::size_t n = prompt.size();
  Tensor x({n + 1, d});
  std::copy(prompt.x.begin(), prompt.x.end(), x.data());
  std::copy(prompt.query_x.begin(), prompt.query_x.end(), x.data() + n * d);
  return x;
}

ad::Var feature_rows(ad::Tape& tape, const std::vector<ad::Var>& vars, const ModelParams& params,
                     const Prompt& prompt) {
  const ModelSpec& spec = params.spec;
  if (spec.features == FeatureMode::ExactWavelet) {
    const BasisLayout layout(spec.d, spec.wavelet_m, spec.wavelet_k);
    const std::size_t n = prompt.size();
    const std::size_t dim = layout.top_size();
    Tensor phi({n + 1, dim});
    for (std::size_t k = 0; k <= n; ++k) {
      const std::span<const double> pt = k < n ? prompt.point(k) : std::span<const double>(prompt.query_x);
      top_layer_features(layout, pt, {phi.data() + k * dim, dim});
    }
    return tape.constant(std::move(phi));
  }
  return mlp_tape(vars, params, tape.constant(stacked_points(prompt)));
}

ad::Var encoder_tape(ad::Tape& tape, const std::vector<ad::Var>& vars, const ModelParams& params,
                     const Prompt& prompt) {
  const ModelSpec& spec = params.spec;
  const auto d = static_cast<std::size_t>(spec.d);
  const std::size_t n = prompt.size();
  Tensor tokens({n + 1, d + 1});
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < d; ++i) tokens.at(k, i) = prompt.x[k * d + i];
    tokens.at(k, d) = prompt.y[k];
  }
  for (std::size_t i = 0; i < d; ++i) tokens.at(n, i) = prompt.query_x[i];
  const auto var = [&](const std::string& name) { return vars[params.index_of(name)]; };

  ad::Var h = ad::add_row_bias(ad::matmul(tape.constant(std::move(tokens)), var("embed.weight")),
                               var("embed.bias"));
  const double inv_sqrt_width = 1.0 / std::sqrt(static_cast<double>(spec.width));
  for (int l = 0; l < spec.encoder_layers; ++l) {
    const std::string p = "enc." + std::to_string(l);
    // Only the query row feeds the readout after the last layer.
    const bool last = l + 1 == spec.encoder_layers;
    const ad::Var hq = last ? ad::rows(h, n, 1) : h;
    const ad::Var q = ad::matmul(hq, var(p + ".query"));
    const ad::Var k = ad::matmul(h, var(p + ".key"));
    const ad::Var v = ad::matmul(h, var(p + ".value"));
    const ad::Var attn = ad::softmax_rows(ad::scale(ad::matmul(q, ad::transpose(k)), inv_sqrt_width));
    const ad::Var mixed = ad::add(hq, ad::matmul(attn, v));
    const ad::Var hidden = ad::relu(ad::add_row_bias(ad::matmul(mixed, var(p + ".mlp0.weight")),
                                                     var(p + ".mlp0.bias")));
    h = ad::add(mixed, ad::add_row_bias(ad::matmul(hidden, var(p + ".mlp1.weight")),
                                        var(p + ".mlp1.bias")));
  }
  const std::size_t row = h.value().rows() - 1;
  return ad::element(h, row, static_cast<std::size_t>(spec.width) - 1);
}

}  // namespace

Tensor mlp_features(const ModelParams& params, std::span<const double> x, std::size_t count) {
  if (params.spec.features != FeatureMode::Mlp || params.spec.variant == Variant::Encoder2) {
    throw std::invalid_argument("mlp_features: model has no trainable feature net");
  }
  const auto d = static_cast<std::size_t>(params.spec.d);
  if (x.size() != count * d) throw std::invalid_argument("mlp_features: input size mismatch");
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const Tensor& t : params.tensors) vars.push_back(tape.constant(t));
  const ad::Var out =
      mlp_tape(vars, params, tape.constant(Tensor({count, d}, std::vector<double>(x.begin(), x.end()))));
  return out.value();
}

ad::Var forward_tape(ad::Tape& tape, const std::vector<ad::Var>& vars, const ModelParams& params,
                     const Prompt& prompt) {
  const ModelSpec& spec = params.spec;
  const std::size_t n = prompt.size();
  if (n == 0) throw std::invalid_argument("forward: prompt has no context pairs");
  if (prompt.d != spec.d || prompt.query_x.size() != static_cast<std::size_t>(spec.d) ||
      prompt.x.size() != n * static_cast<std::size_t>(spec.d)) {
    throw std::invalid_argument("forward: prompt dimension does not match the model");
  }
  if (vars.size() != params.tensors.size()) throw std::invalid_argument("forward: parameter count mismatch");
  if (!(spec.output_clip > 0.0)) throw std::invalid_argument("forward: output clip level is not set");

  ad::Var pred;
  if (spec.variant == Variant::Encoder2) {
    pred = encoder_tape(tape, vars, params, prompt);
  } else {
    const ad::Var phi_all = feature_rows(tape, vars, params, prompt);
    const ad::Var phi = ad::rows(phi_all, 0, n);
    const ad::Var phi_q = ad::rows(phi_all, n, 1);
    const ad::Var gamma = vars[params.index_of("gamma")];
    if (spec.variant == Variant::LinearAttn) {
      Tensor weights({1, n});
      for (std::size_t k = 0; k < n; ++k) weights[k] = prompt.y[k] / static_cast<double>(n);
      const ad::Var context = ad::matmul(tape.constant(std::move(weights)), phi);
      pred = ad::element(ad::matmul(ad::matmul(context, ad::transpose(gamma)), ad::transpose(phi_q)), 0, 0);
    } else {
      // s_k = phi(x_k)^T Gamma^T phi(query) = phi(query)^T Gamma phi(x_k)
      const ad::Var scores = ad::matmul(ad::matmul(phi_q, gamma), ad::transpose(phi));
      const ad::Var y = tape.constant(Tensor({n, 1}, prompt.y));
      pred = ad::element(ad::matmul(ad::softmax_rows(scores), y), 0, 0);
    }
  }
  return ad::clip(pred, spec.output_clip);
}

double forward(const ModelParams& params, const Prompt& prompt) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const Tensor& t : params.tensors) vars.push_back(tape.constant(t));
  return forward_tape(tape, vars, params, prompt).value().item();
}

Gradient prompt_gradient(const ModelParams& params, const Prompt& prompt) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const Tensor& t : params.tensors) vars.push_back(tape.variable(t));
  const ad::Var pred = forward_tape(tape, vars, params, prompt);
  const ad::Var err = ad::sub(pred, tape.constant(Tensor::scalar(prompt.query_y)));
  const ad::Var loss = ad::square(err);
  tape.backward(loss);
  Gradient g;
  g.loss = loss.value().item();
  for (const ad::Var& v : vars) g.tensors.push_back(tape.grad(v));
  return g;
}

Gradient batch_gradient(const ModelParams& params, std::span<const Prompt> prompts,
                        std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("batch_gradient: empty batch");
  std::vector<Gradient> parts(indices.size());
  parallel_for(indices.size(), [&](std::size_t i) {
    if (indices[i] >= prompts.size()) throw std::out_of_range("batch_gradient: prompt index out of range");
    parts[i] = prompt_gradient(params, prompts[indices[i]]);
  });
  Gradient total;
  total.tensors.reserve(params.tensors.size());
  for (const Tensor& t : params.tensors) total.tensors.push_back(Tensor::zeros_like(t));
  for (const Gradient& part : parts) {
    total.loss += part.loss;
    for (std::size_t j = 0; j < total.tensors.size(); ++j) total.tensors[j].mat() += part.tensors[j].mat();
  }
  const double inv = 1.0 / static_cast<double>(indices.size());
  total.loss *= inv;
  for (Tensor& t : total.tensors) {
    t.mat() *= inv;
    if (!t.all_finite()) throw NonFiniteError("batch_gradient: non-finite gradient");
  }
  return total;
}

Gradient batch_gradient(const ModelParams& params, std::span<const Prompt> prompts) {
  std::vector<std::size_t> all(prompts.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return batch_gradient(params, prompts, all);
}

GradientCheck check_gradients(const ModelParams& params, std::span<const Prompt> prompts, double h, double floor) {
  const Gradient analytic = batch_gradient(params, prompts);
  const auto loss = [&](const ModelParams& p) {
    double total = 0.0;
    for (const Prompt& pr : prompts) {
      const double e = forward(p, pr) - pr.query_y;
      total += e * e;
    }
    return total / static_cast<double>(prompts.size());
  };
  GradientCheck report;
  ModelParams probe = params;
  for (std::size_t t = 0; t < probe.tensors.size(); ++t) {
    for (std::size_t i = 0; i < probe.tensors[t].size(); ++i) {
      const double g = analytic.tensors[t][i];
      if (std::abs(g) <= floor) continue;
      const double saved = probe.tensors[t][i];
      probe.tensors[t][i] = saved + h;
      const double up = loss(probe);
      probe.tensors[t][i] = saved - h;
      const double down = loss(probe);
      probe.tensors[t][i] = saved;
      const double rel = std::abs((up - down) / (2.0 * h) - g) / std::abs(g);
      ++report.checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst = probe.names[t] + "[" + std::to_string(i) + "]";
      }
    }
  }
  return report;
}

}  // namespace icl
