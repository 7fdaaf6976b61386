#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "mfga/errors.hpp"
#include "mfga/feature_maps.hpp"
#include "mfga/objective.hpp"

namespace mfga {

struct IterationRecord {
  int iteration = 0;          // 1-based
  std::vector<int> selected;  // indices added this iteration
  double risk = 0.0;          // regularized risk after the refit
  int refit_iterations = 0;
  double seconds = 0.0;
};

// Captured whenever the support size crosses a requested checkpoint, so one
// training run can stand in for a whole sweep over feature budgets.
struct ModelSnapshot {
  int checkpoint = 0;  // requested support size
  std::vector<int> support;
  Eigen::VectorXd theta;
};

struct TrainTrace {
  std::vector<IterationRecord> iterations;
  std::vector<ModelSnapshot> snapshots;
  double t_pp = 0.0;     // seconds building the candidate pool and design
  double t_train = 0.0;  // seconds selecting and refitting
};

struct SparseModel {
  std::shared_ptr<const CandidateSet> candidates;
  std::vector<int> support;
  Eigen::VectorXd theta;  // aligned with support

  double predict(const Eigen::VectorXd& x) const {
    if (!candidates) throw Error("predict: model has no candidate set");
    if (x.size() != candidates->dim)
      throw DimensionMismatch("predict: input has " + std::to_string(x.size()) +
                              " entries, model expects " + std::to_string(candidates->dim));
    double f = 0.0;
    for (std::size_t i = 0; i < support.size(); ++i)
      f += theta(static_cast<Eigen::Index>(i)) *
           candidates->descriptors[static_cast<std::size_t>(support[i])].weighted(x);
    return f;
  }

  // Sign of the margin; zero counts as +1.
  int classify(const Eigen::VectorXd& x) const { return predict(x) >= 0.0 ? 1 : -1; }
};

inline Eigen::VectorXd predict_batch(const SparseModel& model, const Eigen::MatrixXd& X) {
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index n = 0; n < X.rows(); ++n) out(n) = model.predict(X.row(n).transpose());
  return out;
}

namespace detail {

// Top-k entries of |grad| over the non-excluded indices; ties break toward
// the lower index. Throws when fewer than k indices remain.
inline std::vector<int> select_core(const Eigen::VectorXd& grad, const std::vector<bool>& excluded,
                                    int k) {
  std::vector<std::pair<double, int>> pool;
  pool.reserve(static_cast<std::size_t>(grad.size()));
  for (Eigen::Index j = 0; j < grad.size(); ++j)
    if (!excluded[static_cast<std::size_t>(j)])
      pool.emplace_back(std::abs(grad(j)), static_cast<int>(j));
  if (static_cast<int>(pool.size()) < k)
    throw Exhausted("select_indices: requested " + std::to_string(k) + " indices, only " +
                    std::to_string(pool.size()) + " remain");
  auto better = [](const std::pair<double, int>& a, const std::pair<double, int>& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  };
  std::partial_sort(pool.begin(), pool.begin() + k, pool.end(), better);
  std::vector<int> out(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) out[static_cast<std::size_t>(i)] = pool[static_cast<std::size_t>(i)].second;
  return out;
}

}  // namespace detail

inline std::vector<int> select_indices(const Eigen::VectorXd& grad,
                                       const std::vector<int>& excluded, int k) {
  if (k < 1) throw Error("select_indices: k must be >= 1");
  std::vector<bool> mask(static_cast<std::size_t>(grad.size()), false);
  for (int j : excluded) {
    if (j < 0 || j >= grad.size())
      throw IndexOutOfRange("select_indices: excluded index " + std::to_string(j));
    mask[static_cast<std::size_t>(j)] = true;
  }
  return detail::select_core(grad, mask, k);
}

struct RefitResult {
  Eigen::VectorXd theta;  // aligned with the support
  int iterations = 0;
};

// Minimizes the objective over the given support only. Quadratic loss solves
// the normal equations directly (plain least squares when lambda = 0);
// logistic loss runs damped Newton from the warm start.
inline RefitResult refit(const Objective& obj, const std::vector<int>& support,
                         const Eigen::VectorXd& warm_start, double tol = 1e-8,
                         int max_iters = 100) {
  const Eigen::Index s = static_cast<Eigen::Index>(support.size());
  if (warm_start.size() != s)
    throw DimensionMismatch("refit: warm start has " + std::to_string(warm_start.size()) +
                            " entries, support has " + std::to_string(s));
  if (s == 0) return {Eigen::VectorXd(0), 0};
  for (int j : support)
    if (j < 0 || j >= obj.candidates())
      throw IndexOutOfRange("refit: support index " + std::to_string(j));

  const Eigen::Index n = obj.samples();
  Eigen::MatrixXd Xs(n, s);
  for (Eigen::Index i = 0; i < s; ++i) Xs.col(i) = obj.design.col(support[static_cast<std::size_t>(i)]);

  if (obj.loss == LossKind::kQuadratic) {
    if (obj.lambda == 0.0) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xs);
      if (qr.rank() < s)
        throw SingularSystem("refit: design columns on the support are rank deficient");
      return {qr.solve(obj.y), 1};
    }
    const double nd = static_cast<double>(n);
    Eigen::MatrixXd A = Xs.transpose() * Xs / nd;
    A.diagonal().array() += obj.lambda;
    return {A.llt().solve(Xs.transpose() * obj.y / nd), 1};
  }

  // logistic: lambda > 0 keeps the Hessian positive definite
  if (obj.lambda <= 0.0) throw Error("refit: logistic refit requires lambda > 0");
  const double nd = static_cast<double>(n);
  Eigen::VectorXd theta = warm_start;
  auto value = [&](const Eigen::VectorXd& t) {
    const Eigen::VectorXd f = Xs * t;
    double v = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) v += logistic_loss(obj.y(i) * f(i));
    return v / nd + obj.lambda * t.squaredNorm();
  };
  for (int it = 1; it <= max_iters; ++it) {
    const Eigen::VectorXd f = Xs * theta;
    Eigen::VectorXd g = 2.0 * obj.lambda * theta;
    Eigen::VectorXd h(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = sigmoid(-obj.y(i) * f(i));
      g += (-obj.y(i) * p / nd) * Xs.row(i).transpose();
      h(i) = p * (1.0 - p) / nd;
    }
    if (g.lpNorm<Eigen::Infinity>() <= tol) return {theta, it - 1};

    Eigen::MatrixXd H = Xs.transpose() * h.asDiagonal() * Xs;
    H.diagonal().array() += 2.0 * obj.lambda;
    const Eigen::VectorXd step = H.llt().solve(-g);

    const double before = value(theta);
    double scale = 1.0;
    Eigen::VectorXd next = theta + step;
    for (int half = 0; half < 60 && value(next) > before; ++half) {
      scale *= 0.5;
      next = theta + scale * step;
    }
    theta = next;
  }
  const Eigen::VectorXd f = Xs * theta;
  Eigen::VectorXd g = 2.0 * obj.lambda * theta;
  for (Eigen::Index i = 0; i < n; ++i)
    g += (-obj.y(i) * sigmoid(-obj.y(i) * f(i)) / nd) * Xs.row(i).transpose();
  if (g.lpNorm<Eigen::Infinity>() > tol)
    throw NoConvergence("refit: Newton did not reach tolerance in " +
                        std::to_string(max_iters) + " iterations");
  return {theta, max_iters};
}

struct MfgaOptions {
  int target_features = 0;      // M, final support size
  int picks_per_iteration = 1;  // k, indices added per iteration
  double refit_tol = 1e-8;
  int refit_max_iters = 100;
  std::optional<double> stop_risk;  // stop early once risk falls this low
  std::vector<int> checkpoints;     // support sizes to snapshot
};

// Greedy feature selection: repeatedly take the k largest entries of the risk
// gradient (in absolute value) among unselected candidates, then refit on the
// enlarged support, warm starting from the previous coefficients padded with
// zeros. Refitting never raises the risk, so the recorded risks decrease.
inline std::pair<SparseModel, TrainTrace> mfga_train(const Objective& obj,
                                                     std::shared_ptr<const CandidateSet> candidates,
                                                     const MfgaOptions& opt) {
  if (!candidates) throw Error("mfga_train: null candidate set");
  if (obj.candidates() != candidates->size())
    throw DimensionMismatch("mfga_train: design has " + std::to_string(obj.candidates()) +
                            " columns, candidate set has " + std::to_string(candidates->size()));
  if (opt.target_features < 0 || opt.target_features > candidates->size())
    throw Error("mfga_train: target features must be in [0, M0]");
  if (opt.picks_per_iteration < 1) throw Error("mfga_train: picks per iteration must be >= 1");

  SparseModel model;
  model.candidates = candidates;
  TrainTrace trace;
  if (opt.target_features == 0) return {model, trace};

  std::vector<int> pending = opt.checkpoints;
  std::sort(pending.begin(), pending.end());
  pending.erase(std::unique(pending.begin(), pending.end()), pending.end());
  std::size_t next_checkpoint = 0;

  const Eigen::Index m0 = obj.candidates();
  std::vector<bool> excluded(static_cast<std::size_t>(m0), false);
  Eigen::VectorXd theta_full = Eigen::VectorXd::Zero(m0);
  Eigen::VectorXd theta_s(0);

  const auto t0 = std::chrono::steady_clock::now();
  int iteration = 0;
  while (static_cast<int>(model.support.size()) < opt.target_features) {
    const auto it_start = std::chrono::steady_clock::now();
    ++iteration;
    const int k = std::min(opt.picks_per_iteration,
                           opt.target_features - static_cast<int>(model.support.size()));
    const Eigen::VectorXd g = gradient(obj, theta_full);
    const std::vector<int> picked = detail::select_core(g, excluded, k);
    for (int j : picked) {
      excluded[static_cast<std::size_t>(j)] = true;
      model.support.push_back(j);
    }

    Eigen::VectorXd warm = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.support.size()));
    warm.head(theta_s.size()) = theta_s;
    const RefitResult fit = refit(obj, model.support, warm, opt.refit_tol, opt.refit_max_iters);
    theta_s = fit.theta;
    theta_full.setZero();
    for (std::size_t i = 0; i < model.support.size(); ++i)
      theta_full(model.support[i]) = theta_s(static_cast<Eigen::Index>(i));

    IterationRecord rec;
    rec.iteration = iteration;
    rec.selected = picked;
    rec.risk = risk(obj, theta_full);
    rec.refit_iterations = fit.iterations;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - it_start).count();
    trace.iterations.push_back(std::move(rec));

    while (next_checkpoint < pending.size() &&
           static_cast<int>(model.support.size()) >= pending[next_checkpoint]) {
      trace.snapshots.push_back(ModelSnapshot{pending[next_checkpoint], model.support, theta_s});
      ++next_checkpoint;
    }
    if (opt.stop_risk && trace.iterations.back().risk <= *opt.stop_risk) break;
  }
  trace.t_train = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  model.theta = theta_s;
  return {model, trace};
}

}  // namespace mfga
