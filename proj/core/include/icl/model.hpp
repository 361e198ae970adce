#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "icl/autodiff.hpp"
#include "icl/tasks.hpp"
#include "icl/tensor.hpp"

namespace icl {

// (a) features + linear attention, (b) softmax over the same scores,
// (c) two stacked encoder layers on raw (x, y) tokens.
enum class Variant { LinearAttn, SoftmaxAttn, Encoder2 };

// Mlp: trainable ReLU network phi. ExactWavelet: phi = top-layer psi of the
// layout (d, wavelet_m, wavelet_k), fixed; only Gamma trains.
enum class FeatureMode { Mlp, ExactWavelet };

std::string_view variant_name(Variant v);
// Accepts "a"/"b"/"c" and the names from variant_name().
Variant parse_variant(std::string_view text);
std::string_view feature_mode_name(FeatureMode f);
FeatureMode parse_feature_mode(std::string_view text);

struct ModelSpec {
  Variant variant = Variant::LinearAttn;
  FeatureMode features = FeatureMode::Mlp;
  int d = 1;
  // Hidden widths of the feature net; may be empty (one affine layer).
  std::vector<int> hidden = {32, 32};
  // Feature width N (variants a, b) or token width (variant c).
  int width = 32;
  int encoder_layers = 2;
  int encoder_hidden = 32;
  // B'_N; zero selects 2 sqrt(N).
  double feature_radius = 0.0;
  // B-bar; zero means unset (resolve_spec fills it from the task law).
  double output_clip = 0.0;
  int wavelet_m = 2;
  int wavelet_k = 0;

  void validate() const;
  // N: feature dimension for a, b; token width for c.
  std::size_t feature_dim() const;
  double radius() const;
};

struct ModelParams {
  ModelSpec spec;
  std::vector<std::string> names;
  std::vector<Tensor> tensors;

  std::size_t index_of(std::string_view name) const;
  bool has(std::string_view name) const;
  Tensor& get(std::string_view name) { return tensors[index_of(name)]; }
  const Tensor& get(std::string_view name) const { return tensors[index_of(name)]; }
  std::size_t scalar_count() const;
  // Checks every tensor shape against `spec`.
  void validate() const;
};

// Weights and biases uniform on +-1/sqrt(fan_in); Gamma uniform on +-1/sqrt(N).
ModelParams init_params(const ModelSpec& spec, std::uint64_t seed);

// Feature rows for `count` points stored row-major in x (count x d).
Tensor mlp_features(const ModelParams& params, std::span<const double> x, std::size_t count);

// Builds the prediction on a tape; `vars` are the tape leaves for params.tensors.
ad::Var forward_tape(ad::Tape& tape, const std::vector<ad::Var>& vars, const ModelParams& params,
                     const Prompt& prompt);

double forward(const ModelParams& params, const Prompt& prompt);

struct Gradient {
  double loss = 0.0;
  std::vector<Tensor> tensors;
};

// Squared query error (prediction - query_y)^2 and its gradient for one prompt.
Gradient prompt_gradient(const ModelParams& params, const Prompt& prompt);

// Mean squared query error over prompts[indices] and its gradient; per-prompt
// tapes may run in parallel, contributions are summed in index order.
Gradient batch_gradient(const ModelParams& params, std::span<const Prompt> prompts,
                        std::span<const std::size_t> indices);
Gradient batch_gradient(const ModelParams& params, std::span<const Prompt> prompts);

struct GradientCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;
};

// Reverse-mode gradient of the batch loss against central differences with
// step h, over coordinates whose analytic |grad| exceeds floor.
GradientCheck check_gradients(const ModelParams& params, std::span<const Prompt> prompts, double h = 1e-5,
                              double floor = 1e-8);

}  // namespace icl
