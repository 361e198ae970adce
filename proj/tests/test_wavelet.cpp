#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "icl/rng.hpp"
#include "icl/wavelet.hpp"
#include "oracles.hpp"

using namespace icl;

TEST(Bspline, MatchesReferenceValues) {
  EXPECT_DOUBLE_EQ(cardinal_bspline(1, 1.0), 1.0);
  EXPECT_EQ(cardinal_bspline(2, -0.5), 0.0);
  EXPECT_NEAR(cardinal_bspline(2, 1.5), 0.75, 1e-15);
  EXPECT_NEAR(cardinal_bspline(2, 0.5), 0.125, 1e-15);
  EXPECT_NEAR(cardinal_bspline(5, 3.0), 0.55, 1e-14);
}

TEST(Bspline, ConvolutionOracleAgrees) {
  // The frozen constants above come from this numerical convolution.
  EXPECT_NEAR(oracle::bspline_convolved(2, 1.5), 0.75, 1e-12);
  EXPECT_NEAR(oracle::bspline_convolved(2, 0.5), 0.125, 1e-12);
  EXPECT_NEAR(oracle::bspline_convolved(5, 3.0), 0.55, 1e-12);
}

TEST(Bspline, TruncatedPowerOracleOnGrid) {
  for (int m = 0; m <= 8; ++m) {
    for (int i = 1; i < 400; ++i) {
      const double x = (m + 1) * i / 400.0;
      EXPECT_NEAR(cardinal_bspline(m, x), oracle::bspline(m, x), 1e-12) << "m=" << m << " x=" << x;
    }
  }
}

TEST(Bspline, SymmetricAndBounded) {
  Rng rng(1);
  for (int m : {2, 4, 6, 8}) {
    for (int t = 0; t < 2000; ++t) {
      const double x = rng.uniform(-1.0, m + 2.0);
      const double v = cardinal_bspline(m, x);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      EXPECT_NEAR(v, cardinal_bspline(m, m + 1 - x), 1e-12);
    }
  }
}

TEST(Bspline, RejectsNegativeOrder) { EXPECT_THROW(cardinal_bspline(-1, 0.5), std::invalid_argument); }

TEST(ScaledBasis, ExampleValues) {
  const BasisLayout l0(1, 2, 0);
  const std::vector<int> ell0{0};
  const double x0[] = {0.5};
  EXPECT_NEAR(scaled_basis_eval(l0, l0.global_index({0, ell0}), x0), 0.125, 1e-15);
  const BasisLayout l1(1, 2, 1);
  const double x1[] = {0.75};
  EXPECT_NEAR(scaled_basis_eval(l1, l1.global_index({1, ell0}), x1), 0.75 * std::sqrt(2.0), 1e-14);
}

TEST(ScaledBasis, ZeroOutsideSupport) {
  const BasisLayout layout(2, 2, 2);
  Rng rng(2);
  for (std::size_t j = 1; j <= layout.upper_index(); ++j) {
    const WaveletIndex w = layout.index(j);
    for (int t = 0; t < 20; ++t) {
      const double x[] = {rng.uniform(), rng.uniform()};
      bool inside = true;
      for (int i = 0; i < 2; ++i) {
        const double u = std::ldexp(x[i], w.k) - w.ell[static_cast<std::size_t>(i)];
        inside = inside && u > 0.0 && u < 3.0;
      }
      if (!inside) EXPECT_EQ(scaled_basis_eval(layout, j, x), 0.0);
    }
  }
}

TEST(Layout, SizesAndRanges) {
  // Live index set l in [-m, 2^k - 1]: |I_k| = 2^k + m per axis.
  EXPECT_EQ(BasisLayout(1, 2, 0).layer_size(0), 3u);
  EXPECT_EQ(BasisLayout(2, 2, 1).layer_size(1), 16u);
  const BasisLayout l(1, 2, 1);
  EXPECT_EQ(l.lower_index(), 4u);
  EXPECT_EQ(l.upper_index(), 7u);
  EXPECT_EQ(l.top_size(), 4u);
  for (int d : {1, 2, 3}) {
    for (int m : {2, 4}) {
      for (int k = 0; k <= 3; ++k) {
        EXPECT_EQ(BasisLayout(d, m, k).layer_size(k),
                  static_cast<std::size_t>(std::pow((1 << k) + m, d)));
      }
    }
  }
}

TEST(Layout, IndexRoundTripInOrder) {
  const BasisLayout layout(2, 2, 2);
  WaveletIndex prev = layout.index(1);
  for (std::size_t j = 1; j <= layout.upper_index(); ++j) {
    const WaveletIndex w = layout.index(j);
    EXPECT_EQ(layout.global_index(w), j);
    if (j > 1) EXPECT_LT(prev, w);
    prev = w;
  }
  EXPECT_THROW(layout.index(0), std::out_of_range);
  EXPECT_THROW(layout.index(layout.upper_index() + 1), std::out_of_range);
}

TEST(Layout, RejectsBadOrders) {
  EXPECT_THROW(BasisLayout(1, 3, 1), std::invalid_argument);
  EXPECT_THROW(BasisLayout(0, 2, 1), std::invalid_argument);
  EXPECT_THROW(BasisLayout(1, 2, -1), std::invalid_argument);
}

TEST(ActiveSupport, IntervalExamples) {
  const BasisLayout layout(1, 2, 2);
  const double x[] = {0.3};
  std::set<int> got;
  for (const auto& ell : active_support(layout, 2, x)) got.insert(ell[0]);
  EXPECT_EQ(got, (std::set<int>{-1, 0, 1}));
  const double z[] = {0.0};
  got.clear();
  for (const auto& ell : active_support(layout, 0, z)) got.insert(ell[0]);
  EXPECT_EQ(got, (std::set<int>{-2, -1}));
}

TEST(ActiveSupport, WindowBoundAndBruteForce) {
  Rng rng(3);
  for (int d : {1, 2}) {
    const BasisLayout layout(d, 2, 3);
    std::vector<double> x(static_cast<std::size_t>(d));
    for (int t = 0; t < 10000; ++t) {
      for (double& v : x) v = rng.uniform();
      const int k = static_cast<int>(t % 4);
      const auto act = active_support(layout, k, x);
      EXPECT_LE(act.size(), static_cast<std::size_t>(std::pow(3, d)));
      if (t % 50 == 0) {
        std::size_t nonzero = 0;
        for (std::size_t local = 0; local < layout.layer_size(k); ++local) {
          const auto ell = layout.location(k, local);
          double v = 1.0;
          for (int i = 0; i < d; ++i) v *= oracle::bspline(2, std::ldexp(x[i], k) - ell[i]);
          nonzero += v > 0.0;
        }
        EXPECT_EQ(act.size(), nonzero);
      }
    }
  }
}

TEST(PartitionOfUnity, HoldsAtAllResolutions) {
  Rng rng(4);
  for (int m : {2, 4, 6}) {
    for (int d : {1, 2}) {
      std::vector<double> x(static_cast<std::size_t>(d));
      for (int k = 0; k <= 5; ++k) {
        for (int t = 0; t < 500; ++t) {
          for (double& v : x) v = rng.uniform();
          double s = 0.0;
          for_each_active(d, m, k, x, [&](std::size_t, double w) { s += w; });
          EXPECT_NEAR(s, 1.0, 1e-12);
        }
      }
    }
  }
}

TEST(TopLayerFeatures, MatchesPointwiseEvaluation) {
  const BasisLayout layout(2, 2, 2);
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    const double x[] = {rng.uniform(), rng.uniform()};
    const auto f = top_layer_features(layout, x);
    for (std::size_t i = 0; i < f.size(); ++i) {
      EXPECT_NEAR(f[i], scaled_basis_eval(layout, layout.lower_index() + i, x), 1e-13);
    }
  }
}

TEST(Refinement, MaskForOrderTwo) {
  const BasisLayout layout(1, 2, 3);
  const RefinementMatrix R(layout, 2);
  const Eigen::MatrixXd dense = Eigen::MatrixXd(R.matrix());
  // Source l = 1 at k = 2 maps to targets 2l + {0,1,2,3} with 2^{-1/2}{1/4,3/4,3/4,1/4}.
  const std::vector<int> src{1};
  const auto s = static_cast<Eigen::Index>(layout.local_index(2, src));
  const double w[] = {0.25, 0.75, 0.75, 0.25};
  for (int r = 0; r < 4; ++r) {
    const std::vector<int> tgt{2 + r};
    EXPECT_NEAR(dense(static_cast<Eigen::Index>(layout.local_index(3, tgt)), s), w[r] / std::sqrt(2.0), 1e-15);
  }
  EXPECT_NEAR(dense.col(s).sum(), std::sqrt(2.0), 1e-12);
}

TEST(Refinement, InteriorRowSums) {
  for (int d : {1, 2}) {
    const BasisLayout layout(d, 2, 3);
    const RefinementMatrix R(layout, 2);
    const Eigen::MatrixXd dense = Eigen::MatrixXd(R.matrix());
    for (std::size_t s = 0; s < layout.layer_size(2); ++s) {
      const auto ell = layout.location(2, s);
      bool interior = true;
      for (int l : ell) interior = interior && 2 * l >= -2 && 2 * l + 3 <= 7;
      if (interior) EXPECT_NEAR(dense.col(static_cast<Eigen::Index>(s)).sum(), std::pow(2.0, d / 2.0), 1e-12);
    }
  }
}

TEST(Refinement, ExactIdentityAtRandomPoints) {
  Rng rng(6);
  for (int d : {1, 2}) {
    for (int m : {2, 4}) {
      const BasisLayout layout(d, m, 4);
      std::vector<double> x(static_cast<std::size_t>(d));
      for (int k = 0; k < 4; ++k) {
        std::vector<double> coarse(layout.layer_size(k));
        for (double& c : coarse) c = rng.uniform(-1.0, 1.0);
        const auto fine = refinement_apply(coarse, RefinementMatrix(layout, k));
        for (int t = 0; t < 200; ++t) {
          for (double& v : x) v = rng.uniform();
          double lhs = 0.0, rhs = 0.0;
          for (std::size_t j = 0; j < coarse.size(); ++j) {
            lhs += coarse[j] * scaled_basis_eval(layout, layout.layer_offset(k) + j + 1, x);
          }
          for (std::size_t j = 0; j < fine.size(); ++j) {
            rhs += fine[j] * scaled_basis_eval(layout, layout.layer_offset(k + 1) + j + 1, x);
          }
          EXPECT_NEAR(lhs, rhs, 1e-10);
        }
      }
    }
  }
}

TEST(Refinement, OnesReproduceOnesInInterior) {
  // Unscaled all-ones coefficients are the partition of unity; so are the refined ones.
  const BasisLayout layout(1, 2, 3);
  const RefinementMatrix R(layout, 2);
  std::vector<double> ones(layout.layer_size(2), std::pow(2.0, -1.0));
  const auto fine = refinement_apply(ones, R);
  for (std::size_t j = 2; j + 2 < fine.size(); ++j) EXPECT_NEAR(fine[j] * std::pow(2.0, 1.5), 1.0, 1e-12);
}

TEST(Refinement, RejectsTopLayerAndSizeMismatch) {
  const BasisLayout layout(1, 2, 2);
  EXPECT_THROW(RefinementMatrix(layout, 2), std::out_of_range);
  const std::vector<double> wrong(2, 1.0);
  EXPECT_THROW(refinement_apply(wrong, RefinementMatrix(layout, 0)), std::invalid_argument);
}
