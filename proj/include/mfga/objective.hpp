#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "mfga/errors.hpp"

namespace mfga {

enum class LossKind { kQuadratic, kLogistic };

// log(1 + exp(-u)) without overflow for large |u|.
inline double logistic_loss(double u) {
  return std::max(-u, 0.0) + std::log1p(std::exp(-std::abs(u)));
}

// 1 / (1 + exp(-u)), evaluated through the branch that keeps exp small.
inline double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

// Regularized empirical risk over a fixed design matrix. Holds references:
// the design and responses must outlive the objective.
struct Objective {
  const Eigen::MatrixXd& design;
  const Eigen::VectorXd& y;
  LossKind loss = LossKind::kQuadratic;
  double lambda = 0.0;

  Eigen::Index samples() const { return design.rows(); }
  Eigen::Index candidates() const { return design.cols(); }
};

namespace detail {

inline void check_objective(const Objective& obj, const Eigen::VectorXd& theta) {
  if (obj.design.rows() != obj.y.size())
    throw DimensionMismatch("objective: design has " + std::to_string(obj.design.rows()) +
                            " rows, responses have " + std::to_string(obj.y.size()));
  if (theta.size() != obj.design.cols())
    throw DimensionMismatch("objective: theta has " + std::to_string(theta.size()) +
                            " entries, design has " + std::to_string(obj.design.cols()) +
                            " columns");
  if (obj.design.rows() == 0) throw Error("objective: empty design");
  if (obj.lambda < 0.0) throw Error("objective: lambda must be >= 0");
}

}  // namespace detail

// (1/N) sum_n loss(row_n, theta) + lambda |theta|^2. Quadratic loss is
// (f - y)^2; logistic loss is log(1 + exp(-y f)).
inline double risk(const Objective& obj, const Eigen::VectorXd& theta) {
  detail::check_objective(obj, theta);
  const double n = static_cast<double>(obj.samples());
  const Eigen::VectorXd f = obj.design * theta;
  double empirical = 0.0;
  if (obj.loss == LossKind::kQuadratic) {
    empirical = (f - obj.y).squaredNorm() / n;
  } else {
    for (Eigen::Index i = 0; i < f.size(); ++i) empirical += logistic_loss(obj.y(i) * f(i));
    empirical /= n;
  }
  return empirical + obj.lambda * theta.squaredNorm();
}

inline Eigen::VectorXd gradient(const Objective& obj, const Eigen::VectorXd& theta) {
  detail::check_objective(obj, theta);
  const double n = static_cast<double>(obj.samples());
  const Eigen::VectorXd f = obj.design * theta;
  Eigen::VectorXd g;
  if (obj.loss == LossKind::kQuadratic) {
    g = (2.0 / n) * (obj.design.transpose() * (f - obj.y));
  } else {
    Eigen::VectorXd w(f.size());
    for (Eigen::Index i = 0; i < f.size(); ++i)
      w(i) = -obj.y(i) * sigmoid(-obj.y(i) * f(i)) / n;
    g = obj.design.transpose() * w;
  }
  g += 2.0 * obj.lambda * theta;
  return g;
}

struct Curvature {
  double mu = 0.0;    // strong convexity: 2 lambda
  double beta = 0.0;  // smoothness: c_loss |X|_op^2 / N + 2 lambda
};

// Largest singular value squared of the design via power iteration on X^T X,
// then the standard loss-specific constants (c = 2 quadratic, 1/4 logistic).
inline Curvature smoothness_estimate(const Objective& obj, int max_iters = 1000,
                                     double tol = 1e-12) {
  if (obj.design.rows() == 0 || obj.design.cols() == 0)
    throw Error("smoothness_estimate: empty design");
  std::mt19937_64 rng(0x5eed1234abcdULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(obj.design.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = gauss(rng);
  v.normalize();

  double value = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXd w = obj.design.transpose() * (obj.design * v);
    const double next = w.norm();
    if (next == 0.0) {
      value = 0.0;
      break;
    }
    v = w / next;
    if (std::abs(next - value) <= tol * std::max(next, 1.0)) {
      value = next;
      break;
    }
    value = next;
  }

  const double c = obj.loss == LossKind::kQuadratic ? 2.0 : 0.25;
  Curvature out;
  out.mu = 2.0 * obj.lambda;
  out.beta = c * value / static_cast<double>(obj.samples()) + 2.0 * obj.lambda;
  return out;
}

}  // namespace mfga
