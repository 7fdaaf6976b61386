#include "mfga/greedy.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <set>

using namespace mfga;

namespace {

// Any candidate set of the right size; tests that never call predict only
// need the bookkeeping, the design matrix itself is handed in directly.
std::shared_ptr<CandidateSet> dummy_candidates(int m) {
  return std::make_shared<CandidateSet>(rff_candidate_set(1, m, 1.0, 1234));
}

Eigen::MatrixXd random_matrix(std::mt19937& rng, int n, int m) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd X(n, m);
  for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = g(rng);
  return X;
}

// Orthogonal matching pursuit written without the library's loop: correlate
// the residual with every unused column, take the best, least-squares refit.
std::vector<std::vector<int>> omp_reference(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                            int steps) {
  std::vector<std::vector<int>> picks;
  std::vector<int> support;
  Eigen::VectorXd fitted = Eigen::VectorXd::Zero(X.rows());
  for (int t = 0; t < steps; ++t) {
    const Eigen::VectorXd corr = X.transpose() * (y - fitted);
    int best = -1;
    double best_val = -1.0;
    for (int j = 0; j < X.cols(); ++j) {
      if (std::find(support.begin(), support.end(), j) != support.end()) continue;
      if (std::abs(corr(j)) > best_val) {
        best_val = std::abs(corr(j));
        best = j;
      }
    }
    support.push_back(best);
    picks.push_back({best});
    Eigen::MatrixXd Xs(X.rows(), support.size());
    for (std::size_t i = 0; i < support.size(); ++i) Xs.col(static_cast<Eigen::Index>(i)) = X.col(support[i]);
    fitted = Xs * Xs.colPivHouseholderQr().solve(y);
  }
  return picks;
}

}  // namespace

TEST(SelectIndices, OrdersByMagnitudeWithLowIndexTies) {
  Eigen::VectorXd g(6);
  g << 0.5, -2.0, 2.0, 0.1, -0.5, 2.0;
  EXPECT_EQ(select_indices(g, {}, 1), (std::vector<int>{1}));
  EXPECT_EQ(select_indices(g, {}, 3), (std::vector<int>{1, 2, 5}));
  EXPECT_EQ(select_indices(g, {1, 2}, 2), (std::vector<int>{5, 0}));
  EXPECT_EQ(select_indices(g, {}, 6), (std::vector<int>{1, 2, 5, 0, 4, 3}));

  EXPECT_THROW(select_indices(g, {0, 1, 2, 3, 4}, 2), Exhausted);
  EXPECT_THROW(select_indices(g, {9}, 1), IndexOutOfRange);
  EXPECT_THROW(select_indices(g, {}, 0), Error);
}

TEST(Refit, LeastSquaresMatchesQrOracle) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd X = random_matrix(rng, 30, 10);
    const Eigen::VectorXd y = random_matrix(rng, 30, 1);
    const Objective obj{X, y, LossKind::kQuadratic, 0.0};
    const std::vector<int> support{7, 2, 9};

    Eigen::MatrixXd Xs(30, 3);
    for (int i = 0; i < 3; ++i) Xs.col(i) = X.col(support[static_cast<std::size_t>(i)]);
    const Eigen::VectorXd want = Xs.colPivHouseholderQr().solve(y);

    const RefitResult got = refit(obj, support, Eigen::VectorXd::Zero(3));
    EXPECT_LT((got.theta - want).lpNorm<Eigen::Infinity>(), 1e-10);
  }
}

TEST(Refit, RidgeMatchesNormalEquations) {
  std::mt19937 rng(5);
  const double lambda = 0.3;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd X = random_matrix(rng, 25, 8);
    const Eigen::VectorXd y = random_matrix(rng, 25, 1);
    const Objective obj{X, y, LossKind::kQuadratic, lambda};
    const std::vector<int> support{0, 4, 6, 7};

    Eigen::MatrixXd Xs(25, 4);
    for (int i = 0; i < 4; ++i) Xs.col(i) = X.col(support[static_cast<std::size_t>(i)]);
    const Eigen::MatrixXd A =
        Xs.transpose() * Xs / 25.0 + lambda * Eigen::MatrixXd::Identity(4, 4);
    const Eigen::VectorXd want = A.fullPivLu().solve(Xs.transpose() * y / 25.0);

    const RefitResult got = refit(obj, support, Eigen::VectorXd::Zero(4));
    EXPECT_LT((got.theta - want).lpNorm<Eigen::Infinity>(), 1e-10);

    // the solution must beat small perturbations on the restricted objective
    Eigen::VectorXd full = Eigen::VectorXd::Zero(8);
    for (int i = 0; i < 4; ++i) full(support[static_cast<std::size_t>(i)]) = got.theta(i);
    const double at_min = risk(obj, full);
    for (int i = 0; i < 4; ++i) {
      Eigen::VectorXd bumped = full;
      bumped(support[static_cast<std::size_t>(i)]) += 1e-4;
      EXPECT_GT(risk(obj, bumped), at_min);
    }
  }
}

TEST(Refit, FlagsRankDeficiency) {
  std::mt19937 rng(7);
  Eigen::MatrixXd X = random_matrix(rng, 20, 4);
  X.col(3) = 2.0 * X.col(1);  // exact collinearity inside the support
  const Eigen::VectorXd y = random_matrix(rng, 20, 1);
  const Objective obj{X, y, LossKind::kQuadratic, 0.0};
  EXPECT_THROW(refit(obj, {1, 3}, Eigen::VectorXd::Zero(2)), SingularSystem);

  // ridge shrugs it off
  const Objective ridge{X, y, LossKind::kQuadratic, 0.1};
  EXPECT_NO_THROW(refit(ridge, {1, 3}, Eigen::VectorXd::Zero(2)));
}

TEST(Refit, LogisticReachesStationaryPoint) {
  std::mt19937 rng(11);
  const double lambda = 0.05, tol = 1e-10;
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd X = random_matrix(rng, 40, 6);
    Eigen::VectorXd y(40);
    for (int i = 0; i < 40; ++i) y(i) = rng() % 2 ? 1.0 : -1.0;
    const Objective obj{X, y, LossKind::kLogistic, lambda};
    const std::vector<int> support{0, 2, 5};

    const RefitResult got = refit(obj, support, Eigen::VectorXd::Zero(3), tol);
    Eigen::VectorXd full = Eigen::VectorXd::Zero(6);
    for (int i = 0; i < 3; ++i) full(support[static_cast<std::size_t>(i)]) = got.theta(i);
    const Eigen::VectorXd g = gradient(obj, full);
    for (int j : support) EXPECT_LE(std::abs(g(j)), tol * 10);
    EXPECT_GT(got.iterations, 0);
  }
}

TEST(Refit, InputValidation) {
  std::mt19937 rng(13);
  const Eigen::MatrixXd X = random_matrix(rng, 10, 4);
  Eigen::VectorXd y(10);
  for (int i = 0; i < 10; ++i) y(i) = rng() % 2 ? 1.0 : -1.0;
  const Objective logi{X, y, LossKind::kLogistic, 0.0};
  EXPECT_THROW(refit(logi, {0}, Eigen::VectorXd::Zero(1)), Error);

  const Objective quad{X, y, LossKind::kQuadratic, 0.0};
  EXPECT_THROW(refit(quad, {0, 1}, Eigen::VectorXd::Zero(3)), DimensionMismatch);
  EXPECT_THROW(refit(quad, {0, 7}, Eigen::VectorXd::Zero(2)), IndexOutOfRange);

  const Objective tight{X, y, LossKind::kLogistic, 1e-9};
  EXPECT_THROW(refit(tight, {0, 1, 2, 3}, Eigen::VectorXd::Zero(4), 1e-15, 1), NoConvergence);
}

TEST(MfgaTrain, MatchesOrthogonalMatchingPursuit) {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 40, m = 20, steps = 8;
    const Eigen::MatrixXd X = random_matrix(rng, n, m);
    const Eigen::VectorXd y = random_matrix(rng, n, 1);
    const Objective obj{X, y, LossKind::kQuadratic, 0.0};

    MfgaOptions opt;
    opt.target_features = steps;
    auto [model, trace] = mfga_train(obj, dummy_candidates(m), opt);

    const auto want = omp_reference(X, y, steps);
    ASSERT_EQ(trace.iterations.size(), want.size());
    for (int t = 0; t < steps; ++t)
      EXPECT_EQ(trace.iterations[static_cast<std::size_t>(t)].selected, want[static_cast<std::size_t>(t)])
          << "iteration " << t << " of trial " << trial;
  }
}

TEST(MfgaTrain, RecoversSparseSignalOnOrthonormalDesign) {
  std::mt19937 rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 50, m = 30, s = 4;
    const Eigen::MatrixXd Q =
        Eigen::HouseholderQR<Eigen::MatrixXd>(random_matrix(rng, n, m)).householderQ() *
        Eigen::MatrixXd::Identity(n, m);

    std::set<int> chosen;
    while (static_cast<int>(chosen.size()) < s) chosen.insert(static_cast<int>(rng() % m));
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(m);
    for (int j : chosen) truth(j) = 1.0 + (rng() % 100) / 50.0;
    const Eigen::VectorXd y = Q * truth;
    const Objective obj{Q, y, LossKind::kQuadratic, 0.0};

    MfgaOptions opt;
    opt.target_features = s;
    auto [model, trace] = mfga_train(obj, dummy_candidates(m), opt);

    std::set<int> got(model.support.begin(), model.support.end());
    EXPECT_EQ(got, chosen);
    EXPECT_LE(trace.iterations.back().risk, 1e-10);
  }
}

TEST(MfgaTrain, RiskDecreasesMonotonically) {
  std::mt19937 rng(23);
  for (int trial = 0; trial < 12; ++trial) {
    const bool logistic = trial % 2 == 0;
    const int n = 35, m = 18;
    const Eigen::MatrixXd X = random_matrix(rng, n, m);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i)
      y(i) = logistic ? (rng() % 2 ? 1.0 : -1.0) : 0.1 * static_cast<double>(rng() % 40) - 2.0;
    const Objective obj{X, y, logistic ? LossKind::kLogistic : LossKind::kQuadratic,
                        logistic ? 0.02 : 0.0};

    MfgaOptions opt;
    opt.target_features = 12;
    opt.picks_per_iteration = trial % 3 == 0 ? 3 : 1;
    auto [model, trace] = mfga_train(obj, dummy_candidates(m), opt);

    for (std::size_t i = 1; i < trace.iterations.size(); ++i)
      EXPECT_LE(trace.iterations[i].risk, trace.iterations[i - 1].risk + 1e-12)
          << "risk rose at iteration " << i;
  }
}

TEST(MfgaTrain, MultiPickGrowsSupportInChunks) {
  std::mt19937 rng(29);
  const int n = 30, m = 17;
  const Eigen::MatrixXd X = random_matrix(rng, n, m);
  const Eigen::VectorXd y = random_matrix(rng, n, 1);
  const Objective obj{X, y, LossKind::kQuadratic, 0.0};

  MfgaOptions opt;
  opt.target_features = 11;
  opt.picks_per_iteration = 4;
  auto [model, trace] = mfga_train(obj, dummy_candidates(m), opt);

  ASSERT_EQ(trace.iterations.size(), 3u);  // 4 + 4 + 3
  EXPECT_EQ(trace.iterations[0].selected.size(), 4u);
  EXPECT_EQ(trace.iterations[1].selected.size(), 4u);
  EXPECT_EQ(trace.iterations[2].selected.size(), 3u);
  EXPECT_EQ(model.support.size(), 11u);

  std::set<int> unique(model.support.begin(), model.support.end());
  EXPECT_EQ(unique.size(), model.support.size()) << "support must not repeat indices";

  // one iteration picking everything = top-M of the first gradient
  MfgaOptions all;
  all.target_features = m;
  all.picks_per_iteration = m;
  auto [model_all, trace_all] = mfga_train(obj, dummy_candidates(m), all);
  const Eigen::VectorXd g0 = gradient(obj, Eigen::VectorXd::Zero(m));
  EXPECT_EQ(trace_all.iterations.front().selected, select_indices(g0, {}, m));
}

TEST(MfgaTrain, SnapshotsArePrefixesAtCheckpoints) {
  std::mt19937 rng(31);
  const int n = 45, m = 25;
  const Eigen::MatrixXd X = random_matrix(rng, n, m);
  const Eigen::VectorXd y = random_matrix(rng, n, 1);
  const Objective obj{X, y, LossKind::kQuadratic, 0.01};

  MfgaOptions opt;
  opt.target_features = 15;
  opt.checkpoints = {5, 10, 15};
  auto [model, trace] = mfga_train(obj, dummy_candidates(m), opt);

  ASSERT_EQ(trace.snapshots.size(), 3u);
  for (const auto& snap : trace.snapshots) {
    EXPECT_EQ(static_cast<int>(snap.support.size()), snap.checkpoint);
    ASSERT_LE(snap.support.size(), model.support.size());
    for (std::size_t i = 0; i < snap.support.size(); ++i)
      EXPECT_EQ(snap.support[i], model.support[i]) << "snapshots must be prefixes of the run";
    EXPECT_EQ(snap.theta.size(), static_cast<Eigen::Index>(snap.support.size()));
  }
}

TEST(MfgaTrain, StopsEarlyOnRiskTarget) {
  std::mt19937 rng(37);
  const int n = 40, m = 20;
  const Eigen::MatrixXd Q =
      Eigen::HouseholderQR<Eigen::MatrixXd>(random_matrix(rng, n, m)).householderQ() *
      Eigen::MatrixXd::Identity(n, m);
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(m);
  truth(3) = 2.0;
  truth(11) = -1.0;
  const Eigen::VectorXd y = Q * truth;
  const Objective obj{Q, y, LossKind::kQuadratic, 0.0};

  MfgaOptions opt;
  opt.target_features = 15;
  opt.stop_risk = 1e-9;
  auto [model, trace] = mfga_train(obj, dummy_candidates(m), opt);
  EXPECT_EQ(model.support.size(), 2u) << "two picks already explain the signal exactly";
}

TEST(MfgaTrain, ValidatesOptions) {
  std::mt19937 rng(41);
  const Eigen::MatrixXd X = random_matrix(rng, 10, 5);
  const Eigen::VectorXd y = random_matrix(rng, 10, 1);
  const Objective obj{X, y, LossKind::kQuadratic, 0.0};

  MfgaOptions opt;
  opt.target_features = 6;
  EXPECT_THROW(mfga_train(obj, dummy_candidates(5), opt), Error);
  opt.target_features = 3;
  opt.picks_per_iteration = 0;
  EXPECT_THROW(mfga_train(obj, dummy_candidates(5), opt), Error);
  opt.picks_per_iteration = 1;
  EXPECT_THROW(mfga_train(obj, nullptr, opt), Error);
  EXPECT_THROW(mfga_train(obj, dummy_candidates(4), opt), DimensionMismatch);

  opt.target_features = 0;
  auto [model, trace] = mfga_train(obj, dummy_candidates(5), opt);
  EXPECT_TRUE(model.support.empty());
  EXPECT_TRUE(trace.iterations.empty());
}

TEST(Predict, SumsWeightedFeaturesOverSupport) {
  std::mt19937 rng(43);
  const auto cs = std::make_shared<CandidateSet>(
      build_candidate_set(3, Task::kClassification, {1.2}));
  Eigen::MatrixXd X = random_matrix(rng, 12, 3);
  const Eigen::MatrixXd Z = evaluate_design(*cs, X);
  Eigen::VectorXd y(12);
  for (int i = 0; i < 12; ++i) y(i) = rng() % 2 ? 1.0 : -1.0;
  const Objective obj{Z, y, LossKind::kLogistic, 0.1};

  MfgaOptions opt;
  opt.target_features = 4;
  auto [model, trace] = mfga_train(obj, cs, opt);

  for (int i = 0; i < 5; ++i) {
    const Eigen::VectorXd x = X.row(i).transpose();
    double want = 0.0;
    for (std::size_t j = 0; j < model.support.size(); ++j)
      want += model.theta(static_cast<Eigen::Index>(j)) *
              cs->descriptors[static_cast<std::size_t>(model.support[j])].weighted(x);
    EXPECT_DOUBLE_EQ(model.predict(x), want);
    EXPECT_EQ(model.classify(x), want >= 0.0 ? 1 : -1);
  }
  const Eigen::VectorXd batch = predict_batch(model, X);
  EXPECT_DOUBLE_EQ(batch(2), model.predict(X.row(2).transpose()));

  EXPECT_THROW(model.predict(Eigen::VectorXd::Zero(5)), DimensionMismatch);
}
