#include <gtest/gtest.h>

#include <cmath>

#include "model_fixtures.hpp"
#include "olinear/error.hpp"
#include "olinear/eval.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace olinear;

TEST(Metrics, PerfectPrediction) {
  const Tensor3 y = olinear::testing::random_tensor(4, 3, 6, 1);
  const auto m = metrics(y, y);
  EXPECT_EQ(m.mse, 0.0);
  EXPECT_EQ(m.mae, 0.0);
  EXPECT_EQ(m.r2, 1.0);
  EXPECT_NEAR(m.pearson_r, 1.0, 1e-12);
  EXPECT_EQ(m.mase, 0.0);
  EXPECT_EQ(m.n_windows, 4u);
}

TEST(Metrics, PredictingTheMeanGivesZeroR2) {
  const Tensor3 y = olinear::testing::random_tensor(5, 2, 4, 2);
  Tensor3 p(5, 2, 4);
  for (std::size_t n = 0; n < 2; ++n) {
    double mu = 0.0;
    for (std::size_t b = 0; b < 5; ++b)
      for (std::size_t t = 0; t < 4; ++t) mu += y(b, n, t);
    mu /= 20.0;
    for (std::size_t b = 0; b < 5; ++b)
      for (std::size_t t = 0; t < 4; ++t) p(b, n, t) = mu;
  }
  const auto m = metrics(p, y);
  EXPECT_NEAR(m.r2, 0.0, 1e-12);
  // Constant predictions make every r undefined.
  EXPECT_EQ(m.r_excluded_pairs, 10u);
  EXPECT_TRUE(std::isnan(m.pearson_r));
}

TEST(Metrics, MatchesReferenceEvaluator) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Tensor3 p = olinear::testing::random_tensor(7, 3, 5, seed);
    const Tensor3 y = olinear::testing::random_tensor(7, 3, 5, seed + 40);
    const auto m = metrics(p, y);
    const auto r = olinear::testing::reference_metrics(p, y);
    EXPECT_NEAR(m.mse, r.mse, 1e-12);
    EXPECT_NEAR(m.mae, r.mae, 1e-12);
    EXPECT_NEAR(m.r2, r.r2, 1e-12);
    EXPECT_NEAR(m.pearson_r, r.r, 1e-12);
    EXPECT_NEAR(m.mase, r.mase, 1e-12);
  }
}

TEST(Metrics, PermutingVariatesLeavesScalarsUnchanged) {
  const Tensor3 p = olinear::testing::random_tensor(6, 4, 5, 8);
  const Tensor3 y = olinear::testing::random_tensor(6, 4, 5, 9);
  const std::size_t perm[4] = {2, 0, 3, 1};
  Tensor3 pp(6, 4, 5), yp(6, 4, 5);
  for (std::size_t b = 0; b < 6; ++b)
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t t = 0; t < 5; ++t) {
        pp(b, n, t) = p(b, perm[n], t);
        yp(b, n, t) = y(b, perm[n], t);
      }
  const auto a = metrics(p, y), b = metrics(pp, yp);
  EXPECT_NEAR(a.mse, b.mse, 1e-14);
  EXPECT_NEAR(a.r2, b.r2, 1e-14);
  EXPECT_NEAR(a.pearson_r, b.pearson_r, 1e-14);
  EXPECT_NEAR(a.mase, b.mase, 1e-14);
}

TEST(Metrics, ConstantTargetWindowIsExcludedAndCounted) {
  Tensor3 y = olinear::testing::random_tensor(3, 2, 4, 3);
  for (std::size_t t = 0; t < 4; ++t) y(1, 0, t) = 2.0;
  const Tensor3 p = olinear::testing::random_tensor(3, 2, 4, 4);
  const auto m = metrics(p, y);
  EXPECT_EQ(m.r_excluded_pairs, 1u);
  EXPECT_EQ(m.mase_excluded_pairs, 1u);
  EXPECT_TRUE(std::isfinite(m.pearson_r));
  EXPECT_TRUE(std::isfinite(m.mase));
}

TEST(Metrics, Preconditions) {
  EXPECT_THROW(metrics(Tensor3(1, 1, 1), Tensor3(1, 1, 1)), InputError);
  EXPECT_THROW(metrics(Tensor3(1, 1, 3), Tensor3(1, 2, 3)), ShapeError);
}

TEST(ConditionalMean, IndependenceAndOneDimensionalCase) {
  const std::vector<double> mu{1.0, 2.0}, zero{0.0, 0.0}, x{5.0, -3.0};
  const Matrix s{{2.0, 0.3}, {0.3, 1.0}};
  EXPECT_DOUBLE_EQ(conditional_gaussian_mean(mu, 4.0, s, zero, x), 4.0);
  const std::vector<double> m1{0.0}, c1{0.8}, x1{1.0};
  EXPECT_NEAR(conditional_gaussian_mean(m1, 0.0, Matrix{{1.0}}, c1, x1), 0.8, 1e-15);
}

TEST(ConditionalMean, AffineInX) {
  const std::vector<double> mu{0.5, -1.0, 2.0}, sxy{0.4, -0.2, 0.1};
  const Matrix s{{2.0, 0.5, 0.1}, {0.5, 1.5, -0.3}, {0.1, -0.3, 1.0}};
  const std::vector<double> x1{1.0, 2.0, 3.0}, x2{-2.0, 0.5, 4.0};
  for (double a : {0.0, 0.3, 1.7}) {
    std::vector<double> mix(3);
    for (std::size_t i = 0; i < 3; ++i) mix[i] = a * x1[i] + (1 - a) * x2[i];
    const double lhs = conditional_gaussian_mean(mu, 1.0, s, sxy, mix);
    const double rhs = a * conditional_gaussian_mean(mu, 1.0, s, sxy, x1) +
                       (1 - a) * conditional_gaussian_mean(mu, 1.0, s, sxy, x2);
    EXPECT_NEAR(lhs, rhs, 1e-10);
  }
}

TEST(ConditionalMean, MatchesCholeskySolve) {
  const Matrix s{{2.0, 0.5, 0.1}, {0.5, 1.5, -0.3}, {0.1, -0.3, 1.0}};
  const std::vector<double> mu{0.5, -1.0, 2.0}, sxy{0.4, -0.2, 0.1}, x{1.0, 0.0, -1.0};
  std::vector<double> d(3);
  for (std::size_t i = 0; i < 3; ++i) d[i] = x[i] - mu[i];
  const auto sol = olinear::testing::cholesky_solve(olinear::testing::cholesky(s), d);
  double expect = 3.0;
  for (std::size_t i = 0; i < 3; ++i) expect += sxy[i] * sol[i];
  EXPECT_NEAR(conditional_gaussian_mean(mu, 3.0, s, sxy, x), expect, 1e-13);
}

TEST(ConditionalMean, SingularCovarianceRejected) {
  const std::vector<double> mu{0.0, 0.0}, sxy{1.0, 1.0}, x{1.0, 1.0};
  EXPECT_THROW(conditional_gaussian_mean(mu, 0.0, Matrix{{1.0, 1.0}, {1.0, 1.0}}, sxy, x), InputError);
}

TEST(GradCheck, QuadraticAndZeroFunctions) {
  std::vector<double> w{0.3, -1.2, 2.5};
  std::vector<double> g{0.6, -2.4, 5.0};
  const GradCheckTensor t{"w", w, g};
  const auto quad = finite_difference_check(
      [&] {
        double s = 0.0;
        for (double v : w) s += v * v;
        return s;
      },
      std::span<const GradCheckTensor>(&t, 1));
  EXPECT_LE(quad.max_abs_error, 1e-8);
  EXPECT_EQ(quad.tensors[0].coords_checked, 3u);
  EXPECT_EQ(w[1], -1.2);

  std::vector<double> zero(3, 0.0);
  const GradCheckTensor z{"w", w, zero};
  const auto flat = finite_difference_check([] { return 7.0; }, std::span<const GradCheckTensor>(&z, 1));
  EXPECT_EQ(flat.max_abs_error, 0.0);
}

TEST(GradCheck, LargeTensorsAreSubsampledButNotBelow64) {
  std::vector<double> w(1000, 1.0), g(1000, 0.0);
  const GradCheckTensor t{"w", w, g};
  GradCheckOptions o;
  o.max_coords = 10;
  const auto r = finite_difference_check([] { return 0.0; }, std::span<const GradCheckTensor>(&t, 1), o);
  EXPECT_EQ(r.tensors[0].coords_checked, 64u);
}

TEST(GradCheck, DetectsWrongGradient) {
  std::vector<double> w{1.0, 2.0};
  std::vector<double> g{2.0, 0.0};  // true gradient of w.w is (2, 4)
  const GradCheckTensor t{"w", w, g};
  const auto r = finite_difference_check([&] { return w[0] * w[0] + w[1] * w[1]; },
                                         std::span<const GradCheckTensor>(&t, 1));
  EXPECT_GT(r.max_rel_error, 0.5);
}

TEST(Flops, ClosedForms) {
  const auto a = flops_estimate(1, 1, 1);
  EXPECT_EQ(a.normlin_module, 3u);
  EXPECT_EQ(a.mhsa, 6u);
  const auto b = flops_estimate(321, 512, 8);
  EXPECT_EQ(b.normlin_module, 321ull * 321 * 512 + 2ull * 321 * 512 * 512);
  EXPECT_EQ(b.mhsa, 2ull * 321 * 321 * 512 + 4ull * 321 * 512 * 512);
  EXPECT_EQ(b.mhsa - b.normlin_module, 321ull * 321 * 512 + 2ull * 321 * 512 * 512);
  const auto c = flops_estimate(256, 128, 4);
  const double ratio = static_cast<double>(c.mhsa) / static_cast<double>(c.normlin_module);
  EXPECT_GT(ratio, 1.9);
  EXPECT_LT(ratio, 2.1);
  EXPECT_THROW(flops_estimate(1ull << 40, 1ull << 40, 1), InputError);
}

TEST(RankDiagnostic, ZeroInitIsRankOne) {
  auto cfg = olinear::testing::small_config(Variant::olinear);
  cfg.n_variates = 5;
  cfg.basis_method = BasisMethod::identity;
  const auto p = init_params(cfg, build_basis(nullptr, BasisMethod::identity, cfg.lookback),
                             build_basis(nullptr, BasisMethod::identity, cfg.horizon), nullptr, 1);
  const auto r = weight_rank_diagnostic(p, cfg);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].numerical_rank, 1u);
  EXPECT_NEAR(r[0].effective_rank, 1.0, 1e-9);
}

TEST(RankDiagnostic, IdentityDominantIsFullRank) {
  auto cfg = olinear::testing::small_config(Variant::olinear);
  cfg.n_variates = 5;
  cfg.basis_method = BasisMethod::identity;
  auto p = init_params(cfg, build_basis(nullptr, BasisMethod::identity, cfg.lookback),
                       build_basis(nullptr, BasisMethod::identity, cfg.horizon), nullptr, 1);
  for (std::size_t i = 0; i < 5; ++i) p.weights.blocks[0].normlin_w(i, i) = 8.0;
  EXPECT_EQ(weight_rank_diagnostic(p, cfg)[0].numerical_rank, 5u);
}
