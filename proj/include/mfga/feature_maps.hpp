#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <variant>
#include <vector>

#include "mfga/errors.hpp"
#include "mfga/multi_index.hpp"
#include "mfga/task.hpp"

namespace mfga {

// log of the Taylor feature normalization 1 / (sigma^|alpha| * sqrt(alpha!)).
inline double taylor_log_norm(double sigma, const MultiIndex& alpha) {
  double log_fact = 0.0;
  for (int e : alpha.exponents) log_fact += std::lgamma(static_cast<double>(e) + 1.0);
  return -(alpha.order() * std::log(sigma) + 0.5 * log_fact);
}

namespace detail {

// Shared evaluation core so the design matrix and single-point prediction
// produce bit-identical values.
inline double taylor_eval(const Eigen::VectorXd& x, double sigma, const MultiIndex& alpha,
                          double log_norm) {
  double log_mag = -0.5 * x.squaredNorm() / (sigma * sigma) + log_norm;
  double sign = 1.0;
  for (int i = 0; i < alpha.dim(); ++i) {
    const int e = alpha.exponents[static_cast<std::size_t>(i)];
    if (e == 0) continue;
    const double xi = x(i);
    if (xi == 0.0) return 0.0;
    if (xi < 0.0 && (e & 1)) sign = -sign;
    log_mag += e * std::log(std::abs(xi));
  }
  return sign * std::exp(log_mag);
}

}  // namespace detail

// phi_alpha(x) = exp(-|x|^2 / (2 sigma^2)) * x^alpha / (sigma^|alpha| sqrt(alpha!)).
// Summed over all alpha these reproduce the Gaussian kernel:
//   sum_alpha phi_alpha(x) phi_alpha(x') = exp(-|x - x'|^2 / (2 sigma^2)).
inline double taylor_feature(const Eigen::VectorXd& x, double sigma, const MultiIndex& alpha) {
  if (sigma <= 0.0) throw Error("taylor_feature: sigma must be positive");
  if (x.size() != alpha.dim())
    throw DimensionMismatch("taylor_feature: x has " + std::to_string(x.size()) +
                            " entries, alpha has " + std::to_string(alpha.dim()));
  return detail::taylor_eval(x, sigma, alpha, taylor_log_norm(sigma, alpha));
}

// Tail of the truncated kernel sum: with rho = |x||x'| / sigma^2,
//   |K(x,x') - K_r(x,x')| <= exp(-(|x|^2+|x'|^2)/(2 sigma^2)) rho^{r+1} e^rho / (r+1)!.
inline double truncation_bound(double norm_x, double norm_xp, double sigma, int r) {
  if (sigma <= 0.0) throw Error("truncation_bound: sigma must be positive");
  if (r < 0) throw Error("truncation_bound: order must be >= 0");
  const double rho = norm_x * norm_xp / (sigma * sigma);
  if (rho == 0.0) return 0.0;
  const double log_b = -(norm_x * norm_x + norm_xp * norm_xp) / (2.0 * sigma * sigma) +
                       (r + 1) * std::log(rho) + rho - std::lgamma(static_cast<double>(r) + 2.0);
  return std::exp(log_b);
}

inline double linear_feature(const Eigen::VectorXd& x, int coord) {
  if (coord < 0 || coord >= x.size())
    throw IndexOutOfRange("linear_feature: coordinate " + std::to_string(coord) +
                          " out of range for dimension " + std::to_string(x.size()));
  return x(coord);
}

struct TaylorGaussianFeature {
  double sigma = 1.0;
  MultiIndex alpha;
  double log_norm = 0.0;
};

struct LinearCoordinateFeature {
  int coord = 0;
};

// z(x) = scale * cos(omega . x + offset); with scale = sqrt(2 / M) the sum of
// M squared features averages to 1 and their products estimate the kernel.
struct RandomFourierFeature {
  Eigen::VectorXd omega;
  double offset = 0.0;
  double scale = 1.0;
};

// One candidate feature: which base kernel it came from (for the sqrt(nu_p)
// mixture weight) and how to evaluate it.
struct FeatureDescriptor {
  int kernel_id = 0;
  double weight = 1.0;
  std::variant<TaylorGaussianFeature, LinearCoordinateFeature, RandomFourierFeature> kind;

  double evaluate(const Eigen::VectorXd& x) const {
    return std::visit(
        [&](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, TaylorGaussianFeature>)
            return detail::taylor_eval(x, f.sigma, f.alpha, f.log_norm);
          else if constexpr (std::is_same_v<T, LinearCoordinateFeature>)
            return x(f.coord);
          else
            return f.scale * std::cos(f.omega.dot(x) + f.offset);
        },
        kind);
  }

  double weighted(const Eigen::VectorXd& x) const { return weight * evaluate(x); }
};

struct CandidateSet {
  int dim = 0;
  std::vector<double> nu;      // simplex weights over base kernels
  std::vector<double> sigmas;  // one per Gaussian-type kernel in the mixture
  std::vector<FeatureDescriptor> descriptors;
  std::optional<std::uint64_t> rff_seed;

  int size() const { return static_cast<int>(descriptors.size()); }
};

namespace detail {

inline void check_simplex(const std::vector<double>& nu) {
  double sum = 0.0;
  for (double v : nu) {
    if (v < 0.0) throw InvalidSimplex("kernel weights must be nonnegative");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw InvalidSimplex("kernel weights must sum to 1, got " + std::to_string(sum));
}

}  // namespace detail

// Deterministic candidate pool. Classification mixes a Taylor expansion of the
// Gaussian kernel (default order 1) with the linear kernel's d coordinate
// features, so M0 = C(d + r, r) + d. Regression uses the Gaussian expansion
// alone at default order 2, so M0 = C(d + r, r); at r = 2 that is
// C(d, 2) + 2d + 1.
inline CandidateSet build_candidate_set(int d, Task task, const std::vector<double>& sigmas,
                                        std::vector<double> nu = {},
                                        std::optional<int> taylor_order = std::nullopt) {
  if (d < 1) throw Error("build_candidate_set: need d >= 1");
  if (sigmas.size() != 1) throw Error("build_candidate_set: expected exactly one bandwidth");
  if (sigmas[0] <= 0.0) throw Error("build_candidate_set: sigma must be positive");
  const int order = taylor_order.value_or(task == Task::kClassification ? 1 : 2);
  if (order < 0) throw Error("build_candidate_set: taylor order must be >= 0");

  const std::size_t kernels = task == Task::kClassification ? 2 : 1;
  if (nu.empty()) nu.assign(kernels, 1.0 / static_cast<double>(kernels));
  if (nu.size() != kernels)
    throw InvalidSimplex("expected " + std::to_string(kernels) + " kernel weights, got " +
                         std::to_string(nu.size()));
  detail::check_simplex(nu);

  CandidateSet cs;
  cs.dim = d;
  cs.nu = nu;
  cs.sigmas = sigmas;
  const double sigma = sigmas[0];
  for (const MultiIndex& alpha : enumerate_multi_indices(d, order))
    cs.descriptors.push_back(FeatureDescriptor{
        0, std::sqrt(nu[0]),
        TaylorGaussianFeature{sigma, alpha, taylor_log_norm(sigma, alpha)}});
  if (task == Task::kClassification)
    for (int j = 0; j < d; ++j)
      cs.descriptors.push_back(FeatureDescriptor{1, std::sqrt(nu[1]), LinearCoordinateFeature{j}});
  return cs;
}

// M random Fourier features of the Gaussian kernel with bandwidth sigma:
// omega ~ N(0, I / sigma^2), offset ~ U[0, 2 pi), scale = sqrt(2 / M).
inline std::vector<FeatureDescriptor> sample_rff(int d, int M, double sigma,
                                                 std::uint64_t seed) {
  if (d < 1 || M < 1) throw Error("sample_rff: need d >= 1 and M >= 1");
  if (sigma <= 0.0) throw Error("sample_rff: sigma must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0 / sigma);
  std::uniform_real_distribution<double> unif(0.0, 2.0 * std::numbers::pi);
  const double scale = std::sqrt(2.0 / static_cast<double>(M));
  std::vector<FeatureDescriptor> out;
  out.reserve(static_cast<std::size_t>(M));
  for (int m = 0; m < M; ++m) {
    Eigen::VectorXd omega(d);
    for (int i = 0; i < d; ++i) omega(i) = gauss(rng);
    const double offset = unif(rng);
    out.push_back(FeatureDescriptor{0, 1.0, RandomFourierFeature{omega, offset, scale}});
  }
  return out;
}

inline CandidateSet rff_candidate_set(int d, int M, double sigma, std::uint64_t seed) {
  CandidateSet cs;
  cs.dim = d;
  cs.nu = {1.0};
  cs.sigmas = {sigma};
  cs.rff_seed = seed;
  cs.descriptors = sample_rff(d, M, sigma, seed);
  return cs;
}

// N x M0 design matrix; row n holds the weighted features of X.row(n).
inline Eigen::MatrixXd evaluate_design(const CandidateSet& cs, const Eigen::MatrixXd& X) {
  if (X.cols() != cs.dim && X.rows() > 0)
    throw DimensionMismatch("evaluate_design: data has " + std::to_string(X.cols()) +
                            " columns, candidate set expects " + std::to_string(cs.dim));
  Eigen::MatrixXd Z(X.rows(), cs.size());
  for (Eigen::Index n = 0; n < X.rows(); ++n) {
    const Eigen::VectorXd x = X.row(n).transpose();
    for (int m = 0; m < cs.size(); ++m) Z(n, m) = cs.descriptors[static_cast<std::size_t>(m)].weighted(x);
  }
  return Z;
}

}  // namespace mfga
