#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <utility>
#include <vector>

#include "mfga/dataset.hpp"
#include "mfga/feature_maps.hpp"
#include "mfga/greedy.hpp"
#include "mfga/objective.hpp"

namespace mfga {

// Plain random features: sample M of them, fit once on the full design.
inline std::pair<SparseModel, TrainTrace> rks_train(const Dataset& ds, int M, double sigma,
                                                    std::uint64_t seed, LossKind loss,
                                                    double lambda, double tol = 1e-8,
                                                    int max_iters = 100) {
  const auto t0 = std::chrono::steady_clock::now();
  auto cs = std::make_shared<CandidateSet>(rff_candidate_set(static_cast<int>(ds.dim()), M, sigma, seed));
  const Eigen::MatrixXd Z = evaluate_design(*cs, ds.X);
  const Objective obj{Z, ds.y, loss, lambda};

  SparseModel model;
  model.candidates = cs;
  model.support.resize(static_cast<std::size_t>(M));
  std::iota(model.support.begin(), model.support.end(), 0);
  const RefitResult fit =
      refit(obj, model.support, Eigen::VectorXd::Zero(M), tol, max_iters);
  model.theta = fit.theta;

  TrainTrace trace;
  trace.t_train = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  IterationRecord rec;
  rec.iteration = 1;
  rec.risk = risk(obj, model.theta);  // support is 0..M-1, theta is already full length
  rec.refit_iterations = fit.iterations;
  rec.seconds = trace.t_train;
  trace.iterations.push_back(std::move(rec));
  return {model, trace};
}

// A feature pool plus data-driven scores and the M indices that survive.
struct ReweightedFeatureSet {
  std::shared_ptr<const CandidateSet> pool;
  Eigen::VectorXd scores;   // one per pool feature
  Eigen::VectorXd weights;  // simplex weights (empty when the method has none)
  std::vector<int> selected;
};

namespace detail {

// Indices ordered by descending value; equal values keep the lower index first.
inline std::vector<int> top_indices(const Eigen::VectorXd& values, int M) {
  std::vector<int> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return values(a) > values(b); });
  order.resize(static_cast<std::size_t>(M));
  return order;
}

// Euclidean projection onto the probability simplex (sort-based).
inline Eigen::VectorXd project_simplex(const Eigen::VectorXd& v) {
  const Eigen::Index m = v.size();
  std::vector<double> u(v.data(), v.data() + m);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, tau = 0.0;
  int rho = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    cum += u[static_cast<std::size_t>(i)];
    const double t = (cum - 1.0) / static_cast<double>(i + 1);
    if (u[static_cast<std::size_t>(i)] - t > 0.0) {
      rho = static_cast<int>(i + 1);
      tau = t;
    }
  }
  (void)rho;
  return (v.array() - tau).max(0.0);
}

}  // namespace detail

// Kernel alignment score of each pool feature:
//   a_m = ((sum_n y_n z_m(x_n))^2 - sum_n (y_n z_m(x_n))^2) / (N (N - 1)),
// the mean of y_i y_j z_m(x_i) z_m(x_j) over distinct pairs.
inline Eigen::VectorXd alignment_scores(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y) {
  const double n = static_cast<double>(Z.rows());
  if (Z.rows() < 2) throw TooFewRows("alignment_scores: need at least 2 rows");
  Eigen::VectorXd out(Z.cols());
  for (Eigen::Index m = 0; m < Z.cols(); ++m) {
    const Eigen::ArrayXd yz = Z.col(m).array() * y.array();
    const double s = yz.sum();
    out(m) = (s * s - yz.square().sum()) / (n * (n - 1.0));
  }
  return out;
}

// Reweights the pool toward aligned features by maximizing q . a over the
// simplex within a chi-square ball of the given radius around uniform
// (chi2(q) = M0 |q - u|^2). Radius 0 keeps uniform weights; radius >= M0 - 1
// admits the vertex at the best-aligned feature. Keeps the M features with
// the largest weights.
inline ReweightedFeatureSet lkrf_reweight(std::shared_ptr<const CandidateSet> pool,
                                          const Dataset& ds, double radius, int M) {
  if (!pool) throw Error("lkrf_reweight: null pool");
  if (M < 1 || M > pool->size())
    throw Error("lkrf_reweight: need 1 <= M <= pool size");
  if (radius < 0.0) throw Error("lkrf_reweight: radius must be >= 0");

  ReweightedFeatureSet out;
  out.pool = pool;
  const Eigen::MatrixXd Z = evaluate_design(*pool, ds.X);
  out.scores = alignment_scores(Z, ds.y);

  const Eigen::Index m0 = out.scores.size();
  const double u = 1.0 / static_cast<double>(m0);
  const double spread = out.scores.maxCoeff() - out.scores.minCoeff();
  const double scale = std::max(out.scores.cwiseAbs().maxCoeff(), 1.0);

  if (spread <= 1e-14 * scale) {
    // every feature looks the same; fall back to uniform weights
    out.weights = Eigen::VectorXd::Constant(m0, u);
  } else if (radius == 0.0) {
    out.weights = Eigen::VectorXd::Constant(m0, u);
  } else if (radius >= static_cast<double>(m0) - 1.0) {
    // the constraint no longer binds anywhere on the simplex; the linear
    // objective peaks at a vertex (chi2 of a vertex is exactly M0 - 1)
    Eigen::Index best = 0;
    out.scores.maxCoeff(&best);
    out.weights = Eigen::VectorXd::Zero(m0);
    out.weights(best) = 1.0;
  } else {
    // q(eta) = proj_simplex(u + a / (2 eta)) solves the penalized problem;
    // chi2(q(eta)) decreases in eta, so bisect until it meets the radius
    const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(m0, u);
    auto chi2_at = [&](double eta) {
      const Eigen::VectorXd q = detail::project_simplex(uniform + out.scores / (2.0 * eta));
      return std::make_pair(static_cast<double>(m0) * (q - uniform).squaredNorm(), q);
    };
    double hi = 1.0;
    for (int it = 0; it < 2000 && chi2_at(hi).first > radius; ++it) hi *= 2.0;
    double lo = hi;
    for (int it = 0; it < 2000 && chi2_at(lo).first < radius; ++it) lo *= 0.5;
    if (chi2_at(lo).first < radius) {
      // tied top scores cap the reachable chi2 below the radius; the small-eta
      // limit already maximizes the linear objective, so take it as is
      out.weights = chi2_at(lo).second;
    } else {
      Eigen::VectorXd q = uniform;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const auto [c2, qm] = chi2_at(mid);
        q = qm;
        if (c2 > radius)
          lo = mid;
        else
          hi = mid;
        if (hi - lo <= 1e-14 * hi) break;
      }
      out.weights = q;
    }
  }
  out.selected = detail::top_indices(out.weights, M);
  return out;
}

// Scores each pool feature by the absolute mean response-weighted activation
//   s_m = |(1/N) sum_n y_n z_m(x_n)|
// and keeps the top M.
inline ReweightedFeatureSet eerf_score(std::shared_ptr<const CandidateSet> pool,
                                       const Dataset& ds, int M) {
  if (!pool) throw Error("eerf_score: null pool");
  if (M < 1 || M > pool->size()) throw Error("eerf_score: need 1 <= M <= pool size");
  ReweightedFeatureSet out;
  out.pool = pool;
  const Eigen::MatrixXd Z = evaluate_design(*pool, ds.X);
  out.scores = (Z.transpose() * ds.y / static_cast<double>(ds.rows())).cwiseAbs();
  out.selected = detail::top_indices(out.scores, M);
  return out;
}

enum class KernelKind { kGaussian, kGaussianLinear };

inline Eigen::MatrixXd gram_matrix(KernelKind kind, double sigma, const Eigen::MatrixXd& A,
                                   const Eigen::MatrixXd& B) {
  if (A.cols() != B.cols())
    throw DimensionMismatch("gram_matrix: row dimensions differ");
  if (sigma <= 0.0) throw Error("gram_matrix: sigma must be positive");
  const Eigen::VectorXd a2 = A.rowwise().squaredNorm();
  const Eigen::VectorXd b2 = B.rowwise().squaredNorm();
  const Eigen::MatrixXd cross = A * B.transpose();
  Eigen::MatrixXd K(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < B.rows(); ++j) {
      const double d2 = std::max(0.0, a2(i) + b2(j) - 2.0 * cross(i, j));
      K(i, j) = std::exp(-d2 / (2.0 * sigma * sigma));
    }
  if (kind == KernelKind::kGaussianLinear) K = 0.5 * (K + cross);
  return K;
}

struct KernelModel {
  KernelKind kind = KernelKind::kGaussian;
  double sigma = 1.0;
  double lambda = 0.0;
  Task task = Task::kRegression;
  Eigen::MatrixXd points;  // rows the model was fitted on
  Eigen::VectorXd alpha;   // dual coefficients

  double predict(const Eigen::VectorXd& x) const {
    if (x.size() != points.cols())
      throw DimensionMismatch("kernel predict: input has " + std::to_string(x.size()) +
                              " entries, model expects " + std::to_string(points.cols()));
    const Eigen::MatrixXd k = gram_matrix(kind, sigma, points, x.transpose());
    return alpha.dot(k.col(0));
  }
};

inline Eigen::VectorXd kernel_predict_batch(const KernelModel& model, const Eigen::MatrixXd& X) {
  return gram_matrix(model.kind, model.sigma, X, model.points) * model.alpha;
}

// Fits the kernel machine on a subsample of fraction n0 of the rows.
// Regression solves (K + lambda N0 I) alpha = y; classification minimizes the
// regularized logistic risk over alpha by damped Newton.
inline KernelModel kernel_train_exact(const Dataset& ds, KernelKind kind, double sigma,
                                      double lambda, double n0_fraction = 1.0,
                                      std::uint64_t seed = 0, double tol = 1e-8,
                                      int max_iters = 100) {
  const Dataset sub = subsample(ds, n0_fraction, seed);
  const Eigen::Index n = sub.rows();
  const double nd = static_cast<double>(n);
  KernelModel model;
  model.kind = kind;
  model.sigma = sigma;
  model.lambda = lambda;
  model.task = ds.task;
  model.points = sub.X;

  const Eigen::MatrixXd K = gram_matrix(kind, sigma, sub.X, sub.X);
  if (ds.task == Task::kRegression) {
    if (lambda == 0.0) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(K);
      if (qr.rank() < n) throw SingularSystem("kernel_train_exact: singular Gram matrix");
      model.alpha = qr.solve(sub.y);
    } else {
      Eigen::MatrixXd A = K;
      A.diagonal().array() += lambda * nd;
      model.alpha = A.llt().solve(sub.y);
    }
    return model;
  }

  if (lambda <= 0.0) throw Error("kernel_train_exact: classification requires lambda > 0");
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  auto value = [&](const Eigen::VectorXd& a) {
    const Eigen::VectorXd f = K * a;
    double v = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) v += logistic_loss(sub.y(i) * f(i));
    return v / nd + lambda * a.dot(f);
  };
  for (int it = 1; it <= max_iters; ++it) {
    const Eigen::VectorXd f = K * alpha;
    Eigen::VectorXd w(n), h(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = sigmoid(-sub.y(i) * f(i));
      w(i) = -sub.y(i) * p / nd;
      h(i) = p * (1.0 - p) / nd;
    }
    const Eigen::VectorXd g = K * (w + 2.0 * lambda * alpha);
    if (g.lpNorm<Eigen::Infinity>() <= tol) {
      model.alpha = alpha;
      return model;
    }
    Eigen::MatrixXd H = K * h.asDiagonal() * K + 2.0 * lambda * K;
    H.diagonal().array() += 1e-12 * std::max(1.0, H.diagonal().maxCoeff());
    const Eigen::VectorXd step = H.ldlt().solve(-g);
    const double before = value(alpha);
    double scale = 1.0;
    Eigen::VectorXd next = alpha + step;
    for (int half = 0; half < 60 && value(next) > before; ++half) {
      scale *= 0.5;
      next = alpha + scale * step;
    }
    alpha = next;
  }
  throw NoConvergence("kernel_train_exact: Newton did not reach tolerance in " +
                      std::to_string(max_iters) + " iterations");
}

}  // namespace mfga
