#include "mfga/feature_maps.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace mfga;

namespace {

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// Direct evaluation with pow and factorials, no log-space tricks.
double taylor_reference(const Eigen::VectorXd& x, double sigma, const MultiIndex& alpha) {
  double mono = 1.0, fact = 1.0;
  for (int i = 0; i < alpha.dim(); ++i) {
    mono *= std::pow(x(i), alpha.exponents[static_cast<std::size_t>(i)]);
    fact *= factorial(alpha.exponents[static_cast<std::size_t>(i)]);
  }
  return std::exp(-x.squaredNorm() / (2.0 * sigma * sigma)) * mono /
         (std::pow(sigma, alpha.order()) * std::sqrt(fact));
}

Eigen::VectorXd random_vector(std::mt19937& rng, int d, double radius) {
  std::uniform_real_distribution<double> u(-radius, radius);
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i) x(i) = u(rng);
  return x;
}

}  // namespace

TEST(TaylorFeature, MatchesDirectFormula) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + static_cast<int>(rng() % 4);
    const double sigma = 0.5 + (rng() % 100) / 50.0;
    const Eigen::VectorXd x = random_vector(rng, d, 2.0);
    for (const auto& alpha : enumerate_multi_indices(d, 3)) {
      const double got = taylor_feature(x, sigma, alpha);
      const double want = taylor_reference(x, sigma, alpha);
      EXPECT_NEAR(got, want, 1e-12 * std::max(1.0, std::abs(want)))
          << "d=" << d << " sigma=" << sigma;
    }
  }
}

TEST(TaylorFeature, ConstantTermAtOrigin) {
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
  EXPECT_DOUBLE_EQ(taylor_feature(zero, 2.0, MultiIndex{{0, 0, 0}}), 1.0);
  EXPECT_DOUBLE_EQ(taylor_feature(zero, 2.0, MultiIndex{{1, 0, 0}}), 0.0);
}

TEST(TaylorFeature, RejectsBadInput) {
  Eigen::VectorXd x(2);
  x << 1.0, 2.0;
  EXPECT_THROW(taylor_feature(x, 0.0, MultiIndex{{1, 0}}), Error);
  EXPECT_THROW(taylor_feature(x, 1.0, MultiIndex{{1, 0, 0}}), DimensionMismatch);
}

TEST(TaylorFeature, PartialSumsReproduceGaussianKernel) {
  std::mt19937 rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + static_cast<int>(rng() % 3);
    const double sigma = 0.8 + (rng() % 100) / 80.0;
    const Eigen::VectorXd x = random_vector(rng, d, 1.2);
    const Eigen::VectorXd xp = random_vector(rng, d, 1.2);
    const double kernel = std::exp(-(x - xp).squaredNorm() / (2.0 * sigma * sigma));
    for (int r : {4, 8, 12}) {
      double sum = 0.0;
      for (const auto& alpha : enumerate_multi_indices(d, r))
        sum += taylor_feature(x, sigma, alpha) * taylor_feature(xp, sigma, alpha);
      const double bound = truncation_bound(x.norm(), xp.norm(), sigma, r);
      EXPECT_LE(std::abs(sum - kernel), bound + 1e-13)
          << "d=" << d << " r=" << r << " sigma=" << sigma;
    }
  }
}

TEST(TruncationBound, ClosedFormAndMonotonicity) {
  // exp(-(1+1)/2) * rho^(r+1) e^rho / (r+1)! at rho = 1, r = 3
  const double want = std::exp(-1.0) * std::exp(1.0) / 24.0;
  EXPECT_NEAR(truncation_bound(1.0, 1.0, 1.0, 3), want, 1e-12);
  EXPECT_DOUBLE_EQ(truncation_bound(0.0, 1.0, 1.0, 5), 0.0);
  // the majorant rho^(r+1) e^rho / (r+1)! shrinks once r exceeds rho = 3
  for (int r = 3; r < 25; ++r)
    EXPECT_LT(truncation_bound(1.5, 2.0, 1.0, r + 1), truncation_bound(1.5, 2.0, 1.0, r));
  EXPECT_LT(truncation_bound(1.5, 2.0, 1.0, 40), 1e-25);
  EXPECT_THROW(truncation_bound(1.0, 1.0, -1.0, 2), Error);
  EXPECT_THROW(truncation_bound(1.0, 1.0, 1.0, -1), Error);
}

TEST(LinearFeature, PicksCoordinate) {
  Eigen::VectorXd x(2);
  x << 3.0, -1.0;
  EXPECT_DOUBLE_EQ(linear_feature(x, 0), 3.0);
  EXPECT_DOUBLE_EQ(linear_feature(x, 1), -1.0);
  EXPECT_THROW(linear_feature(x, 2), IndexOutOfRange);
  EXPECT_THROW(linear_feature(x, -1), IndexOutOfRange);
}

TEST(CandidateSet, ClassificationMixesTaylorAndLinear) {
  const int d = 3;
  const CandidateSet cs = build_candidate_set(d, Task::kClassification, {1.5});
  // order-1 expansion has d + 1 features, the linear kernel adds d more
  EXPECT_EQ(cs.size(), 2 * d + 1);
  EXPECT_EQ(cs.dim, d);
  ASSERT_EQ(cs.nu.size(), 2u);
  EXPECT_DOUBLE_EQ(cs.nu[0], 0.5);
  EXPECT_DOUBLE_EQ(cs.nu[1], 0.5);
  int taylor = 0, linear = 0;
  for (const auto& desc : cs.descriptors) {
    EXPECT_DOUBLE_EQ(desc.weight, std::sqrt(0.5));
    if (std::holds_alternative<TaylorGaussianFeature>(desc.kind)) {
      EXPECT_EQ(desc.kernel_id, 0);
      ++taylor;
    } else {
      EXPECT_EQ(desc.kernel_id, 1);
      ++linear;
    }
  }
  EXPECT_EQ(taylor, d + 1);
  EXPECT_EQ(linear, d);
}

TEST(CandidateSet, RegressionUsesSecondOrderExpansion) {
  for (int d : {2, 5, 9}) {
    const CandidateSet cs = build_candidate_set(d, Task::kRegression, {1.0});
    EXPECT_EQ(static_cast<std::uint64_t>(cs.size()), multi_index_count(d, 2));
    ASSERT_EQ(cs.nu.size(), 1u);
    EXPECT_DOUBLE_EQ(cs.nu[0], 1.0);
    for (const auto& desc : cs.descriptors) EXPECT_DOUBLE_EQ(desc.weight, 1.0);
  }
}

TEST(CandidateSet, PoolSizesAtBenchmarkDimensions) {
  EXPECT_EQ(build_candidate_set(90, Task::kRegression, {1.0}).size(), 4186);
  EXPECT_EQ(build_candidate_set(58, Task::kRegression, {1.0}).size(), 1770);
  EXPECT_EQ(build_candidate_set(122, Task::kClassification, {1.0}).size(), 245);
  EXPECT_EQ(build_candidate_set(178, Task::kClassification, {1.0}).size(), 357);
}

TEST(CandidateSet, OrderOverrideAndValidation) {
  const CandidateSet cs = build_candidate_set(4, Task::kRegression, {1.0}, {}, 3);
  EXPECT_EQ(static_cast<std::uint64_t>(cs.size()), multi_index_count(4, 3));
  EXPECT_THROW(build_candidate_set(4, Task::kRegression, {}), Error);
  EXPECT_THROW(build_candidate_set(4, Task::kRegression, {-1.0}), Error);
  EXPECT_THROW(build_candidate_set(4, Task::kRegression, {1.0}, {0.4, 0.6}), InvalidSimplex);
  EXPECT_THROW(build_candidate_set(4, Task::kClassification, {1.0}, {0.9, 0.3}), InvalidSimplex);
  EXPECT_THROW(build_candidate_set(4, Task::kClassification, {1.0}, {-0.2, 1.2}), InvalidSimplex);
  const CandidateSet tilted = build_candidate_set(4, Task::kClassification, {1.0}, {0.25, 0.75});
  EXPECT_DOUBLE_EQ(tilted.descriptors.front().weight, 0.5);
  EXPECT_DOUBLE_EQ(tilted.descriptors.back().weight, std::sqrt(0.75));
}

TEST(RandomFourier, DeterministicAndScaled) {
  const auto a = sample_rff(3, 8, 1.7, 42);
  const auto b = sample_rff(3, 8, 1.7, 42);
  const auto c = sample_rff(3, 8, 1.7, 43);
  ASSERT_EQ(a.size(), 8u);
  bool any_differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& fa = std::get<RandomFourierFeature>(a[i].kind);
    const auto& fb = std::get<RandomFourierFeature>(b[i].kind);
    const auto& fc = std::get<RandomFourierFeature>(c[i].kind);
    EXPECT_EQ(fa.omega, fb.omega);
    EXPECT_EQ(fa.offset, fb.offset);
    EXPECT_DOUBLE_EQ(fa.scale, std::sqrt(2.0 / 8.0));
    EXPECT_GE(fa.offset, 0.0);
    EXPECT_LT(fa.offset, 2.0 * std::numbers::pi);
    if (fa.omega != fc.omega) any_differs = true;
  }
  EXPECT_TRUE(any_differs) << "different seeds should give different draws";
}

TEST(RandomFourier, FrequencyMomentsMatchBandwidth) {
  const double sigma = 2.0;
  const int d = 4, M = 4000;
  const auto feats = sample_rff(d, M, sigma, 7);
  double sum = 0.0, sumsq = 0.0;
  for (const auto& f : feats) {
    const auto& r = std::get<RandomFourierFeature>(f.kind);
    for (int i = 0; i < d; ++i) {
      sum += r.omega(i);
      sumsq += r.omega(i) * r.omega(i);
    }
  }
  const double n = static_cast<double>(M * d);
  EXPECT_NEAR(sum / n, 0.0, 4.0 / (sigma * std::sqrt(n)));
  EXPECT_NEAR(sumsq / n, 1.0 / (sigma * sigma), 0.05 / (sigma * sigma));
}

TEST(RandomFourier, KernelEstimateIsClose) {
  std::mt19937 rng(5);
  const double sigma = 1.3;
  const int d = 3, M = 20000;
  const CandidateSet cs = rff_candidate_set(d, M, sigma, 99);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd x = random_vector(rng, d, 1.0);
    const Eigen::VectorXd xp = random_vector(rng, d, 1.0);
    double est = 0.0;
    for (const auto& desc : cs.descriptors) est += desc.evaluate(x) * desc.evaluate(xp);
    const double kernel = std::exp(-(x - xp).squaredNorm() / (2.0 * sigma * sigma));
    EXPECT_NEAR(est, kernel, 5.0 * std::sqrt(2.0 / M));
  }
}

TEST(EvaluateDesign, MatchesPerDescriptorEvaluation) {
  std::mt19937 rng(31);
  const CandidateSet cs = build_candidate_set(3, Task::kClassification, {1.1});
  Eigen::MatrixXd X(6, 3);
  for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = (rng() % 1000) / 250.0 - 2.0;
  const Eigen::MatrixXd Z = evaluate_design(cs, X);
  ASSERT_EQ(Z.rows(), 6);
  ASSERT_EQ(Z.cols(), cs.size());
  for (Eigen::Index n = 0; n < X.rows(); ++n)
    for (int m = 0; m < cs.size(); ++m)
      EXPECT_DOUBLE_EQ(Z(n, m),
                       cs.descriptors[static_cast<std::size_t>(m)].weighted(X.row(n).transpose()));
}

TEST(EvaluateDesign, EmptyAndMismatched) {
  const CandidateSet cs = build_candidate_set(3, Task::kRegression, {1.0});
  const Eigen::MatrixXd none(0, 3);
  EXPECT_EQ(evaluate_design(cs, none).rows(), 0);
  EXPECT_EQ(evaluate_design(cs, none).cols(), cs.size());
  EXPECT_THROW(evaluate_design(cs, Eigen::MatrixXd::Zero(2, 4)), DimensionMismatch);
}

TEST(EvaluateDesign, TaylorRowEnergyApproachesKernelDiagonal) {
  // sum_alpha phi_alpha(x)^2 = K(x, x) = 1 up to the truncation tail
  std::mt19937 rng(17);
  const int d = 3;
  const double sigma = 1.4;
  const CandidateSet cs = build_candidate_set(d, Task::kRegression, {sigma}, {}, 10);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd x = random_vector(rng, d, 1.0);
    double energy = 0.0;
    for (const auto& desc : cs.descriptors) {
      const double v = desc.evaluate(x);
      energy += v * v;
    }
    EXPECT_LE(energy, 1.0 + 1e-12);
    EXPECT_GE(energy, 1.0 - truncation_bound(x.norm(), x.norm(), sigma, 10) - 1e-12);
  }
}
