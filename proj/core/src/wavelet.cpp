#include "icl/wavelet.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "icl/hash.hpp"

namespace icl {

double cardinal_bspline(int m, double x) {
  if (m < 0) throw std::invalid_argument("cardinal_bspline: order must be >= 0");
  if (!(x > 0.0 && x < static_cast<double>(m + 1))) {
    // iota_0 is the indicator of [0, 1); higher orders vanish at the knots 0, m+1.
    return (m == 0 && x == 0.0) ? 1.0 : 0.0;
  }
  if (m > 15) throw std::invalid_argument("cardinal_bspline: order too large");
  // b[i] holds iota_r(x - i); raise r from 0 to m in place.
  std::array<double, 17> b{};
  for (int i = 0; i <= m; ++i) {
    const double t = x - i;
    b[static_cast<std::size_t>(i)] = (t >= 0.0 && t < 1.0) ? 1.0 : 0.0;
  }
  for (int r = 1; r <= m; ++r) {
    for (int i = 0; i <= m - r; ++i) {
      const double t = x - i;
      const auto u = static_cast<std::size_t>(i);
      b[u] = (t * b[u] + (r + 1 - t) * b[u + 1]) / r;
    }
  }
  return b[0];
}

namespace detail {

AxisWindow axis_window(int m, int k, double x) {
  AxisWindow w;
  const double scale = std::ldexp(1.0, k);
  const double t = scale * x;
  const int top = (1 << k) - 1;
  int lo = static_cast<int>(std::floor(t)) - m;
  int hi = static_cast<int>(std::ceil(t)) - 1;
  if (lo < -m) lo = -m;
  if (hi > top) hi = top;
  for (int l = lo; l <= hi; ++l) {
    const double v = cardinal_bspline(m, t - l);
    if (v == 0.0) {
      if (w.count == 0) continue;
      break;
    }
    if (w.count == 0) w.first = l;
    w.values[w.count++] = v;
  }
  return w;
}

}  // namespace detail

BasisLayout::BasisLayout(int d, int m, int top_resolution) : d_(d), m_(m), top_(top_resolution) {
  if (d < 1 || d > 32) throw std::invalid_argument("BasisLayout: dimension must be in [1, 32]");
  if (m < 2 || m % 2 != 0 || m > 14) {
    throw std::invalid_argument("BasisLayout: spline order m must be even and in [2, 14], got " +
                                std::to_string(m));
  }
  if (top_resolution < 0 || top_resolution > 30) {
    throw std::invalid_argument("BasisLayout: top resolution must be in [0, 30]");
  }
  offsets_.resize(static_cast<std::size_t>(top_) + 2);
  offsets_[0] = 0;
  for (int k = 0; k <= top_; ++k) {
    const double size = std::pow(static_cast<double>(side(k)), d_);
    if (size > 1e9) throw std::invalid_argument("BasisLayout: layer too large");
    offsets_[static_cast<std::size_t>(k) + 1] = offsets_[static_cast<std::size_t>(k)] + layer_size(k);
  }
}

void BasisLayout::check_resolution(int k) const {
  if (k < 0 || k > top_) {
    throw std::out_of_range("BasisLayout: resolution " + std::to_string(k) + " outside [0, " +
                            std::to_string(top_) + "]");
  }
}

std::size_t BasisLayout::side(int k) const {
  return (std::size_t{1} << k) + static_cast<std::size_t>(m_);
}

std::size_t BasisLayout::layer_size(int k) const {
  std::size_t size = 1;
  for (int i = 0; i < d_; ++i) size *= side(k);
  return size;
}

std::size_t BasisLayout::layer_offset(int k) const {
  check_resolution(k);
  return offsets_[static_cast<std::size_t>(k)];
}

bool BasisLayout::contains(int k, std::span<const int> ell) const {
  if (k < 0 || k > top_ || ell.size() != static_cast<std::size_t>(d_)) return false;
  const int hi = (1 << k) - 1;
  for (int l : ell) {
    if (l < -m_ || l > hi) return false;
  }
  return true;
}

std::size_t BasisLayout::local_index(int k, std::span<const int> ell) const {
  if (!contains(k, ell)) throw std::out_of_range("BasisLayout: location outside I_k^d");
  std::size_t idx = 0;
  for (int l : ell) idx = idx * side(k) + static_cast<std::size_t>(l + m_);
  return idx;
}

std::vector<int> BasisLayout::location(int k, std::size_t local) const {
  check_resolution(k);
  if (local >= layer_size(k)) throw std::out_of_range("BasisLayout: local index out of range");
  std::vector<int> ell(static_cast<std::size_t>(d_));
  const std::size_t s = side(k);
  for (int i = d_ - 1; i >= 0; --i) {
    ell[static_cast<std::size_t>(i)] = static_cast<int>(local % s) - m_;
    local /= s;
  }
  return ell;
}

WaveletIndex BasisLayout::index(std::size_t j) const {
  if (j < 1 || j > upper_index()) {
    throw std::out_of_range("BasisLayout: global index " + std::to_string(j) + " outside [1, " +
                            std::to_string(upper_index()) + "]");
  }
  const std::size_t pos = j - 1;
  int k = 0;
  while (pos >= offsets_[static_cast<std::size_t>(k) + 1]) ++k;
  return WaveletIndex{k, location(k, pos - offsets_[static_cast<std::size_t>(k)])};
}

std::size_t BasisLayout::global_index(const WaveletIndex& w) const {
  return layer_offset(w.k) + local_index(w.k, w.ell) + 1;
}

std::uint64_t BasisLayout::hash() const {
  Fnv1a h;
  h.add("BasisLayout/v1");
  h.add(d_);
  h.add(m_);
  h.add(top_);
  return h.value();
}

BasisLayout build_layout(int d, int m, int top_resolution) { return BasisLayout(d, m, top_resolution); }

double scaled_basis_eval(const BasisLayout& layout, std::size_t j, std::span<const double> x) {
  const WaveletIndex w = layout.index(j);
  if (x.size() != static_cast<std::size_t>(layout.dim())) {
    throw std::invalid_argument("scaled_basis_eval: point dimension mismatch");
  }
  const double scale = std::ldexp(1.0, w.k);
  double value = std::pow(2.0, 0.5 * w.k * layout.dim());
  for (int i = 0; i < layout.dim(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    value *= cardinal_bspline(layout.order(), scale * x[u] - w.ell[u]);
    if (value == 0.0) return 0.0;
  }
  return value;
}

std::vector<std::vector<int>> active_support(const BasisLayout& layout, int k,
                                             std::span<const double> x) {
  if (k < 0 || k > layout.top_resolution()) {
    throw std::out_of_range("active_support: resolution outside layout");
  }
  if (x.size() != static_cast<std::size_t>(layout.dim())) {
    throw std::invalid_argument("active_support: point dimension mismatch");
  }
  std::vector<std::vector<int>> result;
  for_each_active(layout.dim(), layout.order(), k, x, [&](std::size_t local, double) {
    result.push_back(layout.location(k, local));
  });
  return result;
}

void top_layer_features(const BasisLayout& layout, std::span<const double> x, std::span<double> out) {
  if (out.size() != layout.top_size()) {
    throw std::invalid_argument("top_layer_features: output size mismatch");
  }
  std::fill(out.begin(), out.end(), 0.0);
  const int k = layout.top_resolution();
  const double scale = std::pow(2.0, 0.5 * k * layout.dim());
  for_each_active(layout.dim(), layout.order(), k, x,
                  [&](std::size_t local, double omega) { out[local] = scale * omega; });
}

std::vector<double> top_layer_features(const BasisLayout& layout, std::span<const double> x) {
  std::vector<double> out(layout.top_size());
  top_layer_features(layout, x, out);
  return out;
}

namespace {

double binomial(int n, int r) {
  double c = 1.0;
  for (int i = 1; i <= r; ++i) c = c * (n - r + i) / i;
  return c;
}

}  // namespace

RefinementMatrix::RefinementMatrix(const BasisLayout& layout, int k) : k_(k) {
  if (k < 0 || k >= layout.top_resolution()) {
    throw std::out_of_range("RefinementMatrix: resolution " + std::to_string(k) +
                            " has no finer layer in the layout");
  }
  const int d = layout.dim();
  const int m = layout.order();
  std::vector<double> mask(static_cast<std::size_t>(m) + 2);
  for (int r = 0; r <= m + 1; ++r) {
    mask[static_cast<std::size_t>(r)] = binomial(m + 1, r) * std::ldexp(1.0, -m);
  }
  const double scaling = std::pow(2.0, -0.5 * d);
  const std::size_t sources = layout.layer_size(k);
  const std::size_t targets = layout.layer_size(k + 1);
  const int target_hi = (1 << (k + 1)) - 1;

  std::vector<Eigen::Triplet<double>> entries;
  std::vector<int> r(static_cast<std::size_t>(d));
  std::vector<int> target(static_cast<std::size_t>(d));
  for (std::size_t s = 0; s < sources; ++s) {
    const std::vector<int> ell = layout.location(k, s);
    std::fill(r.begin(), r.end(), 0);
    while (true) {
      bool inside = true;
      double weight = scaling;
      for (std::size_t i = 0; i < r.size(); ++i) {
        target[i] = 2 * ell[i] + r[i];
        if (target[i] < -m || target[i] > target_hi) {
          inside = false;
          break;
        }
        weight *= mask[static_cast<std::size_t>(r[i])];
      }
      if (inside) {
        entries.emplace_back(static_cast<int>(layout.local_index(k + 1, target)),
                             static_cast<int>(s), weight);
      }
      int axis = d - 1;
      while (axis >= 0 && ++r[static_cast<std::size_t>(axis)] > m + 1) {
        r[static_cast<std::size_t>(axis)] = 0;
        --axis;
      }
      if (axis < 0) break;
    }
  }
  matrix_.resize(static_cast<Eigen::Index>(targets), static_cast<Eigen::Index>(sources));
  matrix_.setFromTriplets(entries.begin(), entries.end());
  matrix_.makeCompressed();
}

std::vector<double> refinement_apply(std::span<const double> coeffs, const RefinementMatrix& refine) {
  const auto& R = refine.matrix();
  if (coeffs.size() != static_cast<std::size_t>(R.cols())) {
    throw std::invalid_argument("refinement_apply: coefficient vector does not match layer size");
  }
  Eigen::Map<const Eigen::VectorXd> source(coeffs.data(), R.cols());
  Eigen::VectorXd target = R * source;
  return {target.data(), target.data() + target.size()};
}

}  // namespace icl
