#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/SparseCore>

namespace icl {

// Cardinal B-spline of order m: the (m+1)-fold convolution of the indicator
// of [0,1]. Supported on (0, m+1), piecewise polynomial of degree m.
double cardinal_bspline(int m, double x);

// Resolution / location pair of one tensor-product B-spline. The defaulted
// ordering compares k first, then ell lexicographically.
struct WaveletIndex {
  int k = 0;
  std::vector<int> ell;

  friend auto operator<=>(const WaveletIndex&, const WaveletIndex&) = default;
  friend bool operator==(const WaveletIndex&, const WaveletIndex&) = default;
};

// Dyadic index bookkeeping for the scaled system
//   psi_{k,l}(x) = 2^{kd/2} prod_i iota_m(2^k x_i - l_i),  l_i in [-m, 2^k - 1].
// Locations l_i = 2^k would be supported outside the unit cube and are not
// part of the system. Global indices j are 1-based and ordered by k, then
// lexicographically by l; the top layer K occupies [lower_index, upper_index].
class BasisLayout {
 public:
  BasisLayout(int d, int m, int top_resolution);

  int dim() const { return d_; }
  int order() const { return m_; }
  int top_resolution() const { return top_; }

  // Locations per axis at resolution k: 2^k + m.
  std::size_t side(int k) const;
  // |I_k^d| = (2^k + m)^d.
  std::size_t layer_size(int k) const;
  // 0-based position of the first index of layer k among all indices.
  std::size_t layer_offset(int k) const;

  std::size_t lower_index() const { return layer_offset(top_) + 1; }
  std::size_t upper_index() const { return layer_offset(top_) + layer_size(top_); }
  std::size_t top_size() const { return layer_size(top_); }

  WaveletIndex index(std::size_t j) const;
  std::size_t global_index(const WaveletIndex& w) const;

  // Row-major position of ell inside layer k.
  std::size_t local_index(int k, std::span<const int> ell) const;
  std::vector<int> location(int k, std::size_t local) const;

  bool contains(int k, std::span<const int> ell) const;

  // Stable fingerprint of (d, m, K).
  std::uint64_t hash() const;

 private:
  void check_resolution(int k) const;

  int d_;
  int m_;
  int top_;
  std::vector<std::size_t> offsets_;
};

BasisLayout build_layout(int d, int m, int top_resolution);

// psi_j(x) for the 1-based global index j.
double scaled_basis_eval(const BasisLayout& layout, std::size_t j, std::span<const double> x);

// All l in I_k^d with omega_{k,l}(x) != 0, in lexicographic order.
std::vector<std::vector<int>> active_support(const BasisLayout& layout, int k,
                                             std::span<const double> x);

// Calls fn(local_index, omega_{k,l}(x)) for each nonzero tensor-product spline
// of resolution k at x. The unscaled value omega is passed; multiply by
// 2^{kd/2} for psi.
template <class Fn>
void for_each_active(int d, int m, int k, std::span<const double> x, Fn&& fn);

// Dense top-layer feature vector (psi_{lower}(x), ..., psi_{upper}(x)).
void top_layer_features(const BasisLayout& layout, std::span<const double> x,
                        std::span<double> out);
std::vector<double> top_layer_features(const BasisLayout& layout, std::span<const double> x);

// One-step refinement from resolution k to k+1 in the scaled basis:
//   sum_l c_l psi_{k,l} = sum_{l'} (R c)_{l'} psi_{k+1,l'}  on [0,1]^d.
// Rows are targets in I_{k+1}^d, columns sources in I_k^d. Entries are
// 2^{-d/2} prod_i 2^{-m} C(m+1, r_i) at l' = 2l + r, r_i in [0, m+1].
class RefinementMatrix {
 public:
  RefinementMatrix(const BasisLayout& layout, int k);

  int source_resolution() const { return k_; }
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& matrix() const { return matrix_; }

 private:
  int k_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> matrix_;
};

std::vector<double> refinement_apply(std::span<const double> coeffs, const RefinementMatrix& refine);

// ---------------------------------------------------------------------------

namespace detail {

struct AxisWindow {
  int first = 0;           // smallest active location on this axis
  int count = 0;           // number of active locations
  double values[16] = {};  // iota_m(2^k x - l) for l = first .. first+count-1
};

// Active locations of one axis; m + 1 <= 16 is enforced by BasisLayout.
AxisWindow axis_window(int m, int k, double x);

}  // namespace detail

template <class Fn>
void for_each_active(int d, int m, int k, std::span<const double> x, Fn&& fn) {
  constexpr int max_dim = 32;
  detail::AxisWindow windows[max_dim];
  const std::size_t side = (std::size_t{1} << k) + static_cast<std::size_t>(m);
  for (int i = 0; i < d; ++i) {
    windows[i] = detail::axis_window(m, k, x[static_cast<std::size_t>(i)]);
    if (windows[i].count == 0) return;
  }
  // Odometer over the tensor product; partial products are cached per axis.
  int digit[max_dim] = {};
  double partial[max_dim + 1];
  std::size_t base[max_dim + 1];
  partial[0] = 1.0;
  base[0] = 0;
  for (int i = 0; i < d; ++i) {
    partial[i + 1] = partial[i] * windows[i].values[0];
    base[i + 1] = base[i] * side + static_cast<std::size_t>(windows[i].first + m);
  }
  while (true) {
    fn(base[d], partial[d]);
    int axis = d - 1;
    while (axis >= 0 && ++digit[axis] == windows[axis].count) {
      digit[axis] = 0;
      --axis;
    }
    if (axis < 0) return;
    for (int i = axis; i < d; ++i) {
      partial[i + 1] = partial[i] * windows[i].values[digit[i]];
      base[i + 1] =
          base[i] * side + static_cast<std::size_t>(windows[i].first + digit[i] + m);
    }
  }
}

}  // namespace icl
