#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mfga/baselines.hpp"
#include "mfga/dataset.hpp"
#include "mfga/greedy.hpp"
#include "mfga/model_io.hpp"
#include "mfga/objective.hpp"

namespace mfga {

inline std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int e = -5; e <= 5; ++e) grid.push_back(std::pow(10.0, e));
  return grid;
}

struct ExperimentConfig {
  std::string dataset;                       // training CSV (split if no test file)
  std::optional<std::string> test_dataset;   // held-out CSV
  CsvSchema schema;
  std::string name;                          // label in reports; defaults to file stem
  std::string method = "mfga";               // mfga | rks | lkrf | eerf | gk | glk
  int M = 0;                                 // feature budget
  int M0 = 0;                                // pool size for lkrf/eerf; 0 = 10 * M
  std::optional<int> taylor_order;           // mfga expansion order override
  std::vector<double> lambda_grid = default_lambda_grid();
  std::optional<double> sigma;               // bandwidth override
  double n0_fraction = 1.0;                  // gk/glk training subsample
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  int k = 1;                                 // greedy picks per iteration
  double test_fraction = 0.2;
  std::uint64_t split_seed = 0;
  double lkrf_radius = 10.0;
  int bandwidth_k = 50;
  int bandwidth_probes = 0;                  // 0 = min(N, 1000)
  std::string output;                        // result JSON path ("" = stdout only)
};

struct BenchmarkResult {
  std::string dataset;
  std::string method;
  int M = 0;                       // 0 = not applicable
  int M0 = 0;                      // 0 = not applicable
  std::optional<double> n0_over_n;
  std::optional<double> t_pp;      // seconds of feature preprocessing
  double t_train = 0.0;            // seconds of fitting
  double test_error = 0.0;         // percent: misclassification or 100 * MSE
  std::optional<double> error_stderr;
  double coeff_norm = 0.0;
  double lambda = 0.0;             // grid value behind the reported error
};

inline bool method_is_randomized(const std::string& m) {
  return m == "rks" || m == "lkrf" || m == "eerf";
}

inline int method_order(const std::string& m) {
  static const std::map<std::string, int> order{{"rks", 0},  {"lkrf", 1}, {"eerf", 2},
                                                {"mfga", 3}, {"gk", 4},   {"glk", 5}};
  auto it = order.find(m);
  return it == order.end() ? 99 : it->second;
}

inline std::string method_display(const std::string& m) {
  std::string s = m;
  std::transform(s.begin(), s.end(), s.begin(), ::toupper);
  return s;
}

inline std::string file_stem(const std::string& path) {
  const auto slash = path.find_last_of("/\\");
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  const auto dot = base.find_last_of('.');
  return dot == std::string::npos ? base : base.substr(0, dot);
}

inline void validate(const ExperimentConfig& cfg) {
  if (cfg.dataset.empty()) throw ConfigError("config needs a 'dataset' path");
  if (method_order(cfg.method) > 5) throw ConfigError("unknown method '" + cfg.method + "'");
  const bool kernel = cfg.method == "gk" || cfg.method == "glk";
  if (!kernel && cfg.M < 1) throw ConfigError("method '" + cfg.method + "' needs M >= 1");
  if ((cfg.method == "lkrf" || cfg.method == "eerf") && cfg.M0 != 0 && cfg.M0 < cfg.M)
    throw ConfigError("pool size M0 must be >= M");
  if (cfg.lambda_grid.empty()) throw ConfigError("lambda grid is empty");
  for (double l : cfg.lambda_grid)
    if (l < 0.0) throw ConfigError("lambda grid values must be >= 0");
  if (cfg.sigma && *cfg.sigma <= 0.0) throw ConfigError("sigma must be positive");
  if (!(cfg.n0_fraction > 0.0 && cfg.n0_fraction <= 1.0))
    throw ConfigError("n0_fraction must be in (0, 1]");
  if (method_is_randomized(cfg.method) && cfg.seeds.empty())
    throw ConfigError("randomized methods need at least one seed");
  if (cfg.k < 1) throw ConfigError("k must be >= 1");
  if (!cfg.test_dataset && !(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0))
    throw ConfigError("test_fraction must be in (0, 1)");
  if (cfg.lkrf_radius < 0.0) throw ConfigError("lkrf_radius must be >= 0");
  if (cfg.bandwidth_k < 1) throw ConfigError("bandwidth_k must be >= 1");
}

inline ExperimentConfig parse_config(const json& j) {
  ExperimentConfig cfg;
  if (!j.contains("dataset")) throw ConfigError("config needs 'dataset'");
  cfg.dataset = j.at("dataset").get<std::string>();
  if (j.contains("test_dataset")) cfg.test_dataset = j.at("test_dataset").get<std::string>();
  if (!j.contains("schema")) throw ConfigError("config needs 'schema'");
  cfg.schema = schema_from_json(j.at("schema"));
  cfg.name = j.value("name", file_stem(cfg.dataset));
  cfg.method = j.value("method", std::string("mfga"));
  cfg.M = j.value("M", 0);
  cfg.M0 = j.value("M0", 0);
  if (j.contains("taylor_order")) cfg.taylor_order = j.at("taylor_order").get<int>();
  if (j.contains("lambda_grid")) cfg.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
  if (j.contains("sigma")) cfg.sigma = j.at("sigma").get<double>();
  cfg.n0_fraction = j.value("n0_fraction", 1.0);
  if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  cfg.k = j.value("k", 1);
  cfg.test_fraction = j.value("test_fraction", 0.2);
  cfg.split_seed = j.value("split_seed", std::uint64_t{0});
  cfg.lkrf_radius = j.value("lkrf_radius", 10.0);
  cfg.bandwidth_k = j.value("bandwidth_k", 50);
  cfg.bandwidth_probes = j.value("bandwidth_probes", 0);
  cfg.output = j.value("output", std::string());
  validate(cfg);
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  try {
    return parse_config(load_json(path));
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline json to_json(const BenchmarkResult& r) {
  json j{{"dataset", r.dataset},
         {"method", r.method},
         {"M", r.M > 0 ? json(r.M) : json()},
         {"M0", r.M0 > 0 ? json(r.M0) : json()},
         {"n0_over_n", r.n0_over_n ? json(*r.n0_over_n) : json()},
         {"t_pp", r.t_pp ? json(*r.t_pp) : json()},
         {"t_train", r.t_train},
         {"test_error", r.test_error},
         {"stderr", r.error_stderr ? json(*r.error_stderr) : json()},
         {"coeff_norm", r.coeff_norm},
         {"lambda", r.lambda}};
  return j;
}

inline BenchmarkResult result_from_json(const json& j) {
  BenchmarkResult r;
  r.dataset = j.at("dataset").get<std::string>();
  r.method = j.at("method").get<std::string>();
  r.M = j.at("M").is_null() ? 0 : j.at("M").get<int>();
  r.M0 = j.at("M0").is_null() ? 0 : j.at("M0").get<int>();
  if (!j.at("n0_over_n").is_null()) r.n0_over_n = j.at("n0_over_n").get<double>();
  if (!j.at("t_pp").is_null()) r.t_pp = j.at("t_pp").get<double>();
  r.t_train = j.at("t_train").get<double>();
  r.test_error = j.at("test_error").get<double>();
  if (!j.at("stderr").is_null()) r.error_stderr = j.at("stderr").get<double>();
  r.coeff_norm = j.at("coeff_norm").get<double>();
  r.lambda = j.at("lambda").get<double>();
  return r;
}

struct PreparedData {
  Dataset train;
  Dataset test;
  double sigma = 1.0;
};

// Load, split, standardize on training rows only, pick the bandwidth.
inline PreparedData prepare(const ExperimentConfig& cfg) {
  RawDataset train_raw, test_raw;
  if (cfg.test_dataset) {
    train_raw = load_csv(cfg.dataset, cfg.schema);
    test_raw = load_csv(*cfg.test_dataset, cfg.schema);
  } else {
    const RawDataset all = load_csv(cfg.dataset, cfg.schema);
    std::tie(train_raw, test_raw) = split(all, cfg.test_fraction, cfg.split_seed);
  }
  PreparedData out;
  const Standardizer st = fit_standardizer(train_raw);
  out.train = apply_standardizer(st, train_raw);
  out.test = apply_standardizer(st, test_raw);
  out.sigma = cfg.sigma ? *cfg.sigma
                        : bandwidth_heuristic(out.train, cfg.bandwidth_k, cfg.bandwidth_probes,
                                              cfg.split_seed);
  return out;
}

// Percent misclassified (zero margin counts as +1) or 100 * MSE on the
// [-1, 1] response scale.
inline double test_error_percent(Task task, const Eigen::VectorXd& pred,
                                 const Eigen::VectorXd& y) {
  if (pred.size() != y.size()) throw DimensionMismatch("test_error_percent: size mismatch");
  if (pred.size() == 0) throw Error("test_error_percent: no rows");
  const double n = static_cast<double>(pred.size());
  if (task == Task::kClassification) {
    double wrong = 0.0;
    for (Eigen::Index i = 0; i < pred.size(); ++i)
      if ((pred(i) >= 0.0 ? 1.0 : -1.0) != y(i)) wrong += 1.0;
    return 100.0 * wrong / n;
  }
  return 100.0 * (pred - y).squaredNorm() / n;
}

namespace detail {

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline std::optional<double> stderr_of(const std::vector<double>& v) {
  if (v.size() < 2) return std::nullopt;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1)) /
         std::sqrt(static_cast<double>(v.size()));
}

// Touch the BLAS paths once so the first timed section does not pay the
// warm-up cost.
inline void warm_up() {
  Eigen::MatrixXd a = Eigen::MatrixXd::Constant(128, 128, 0.5);
  volatile double sink = (a * a).array().exp().sum();
  (void)sink;
}

inline double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Pool features selected by lkrf/eerf, rescaled from the pool budget M0 to
// the model budget M so the fitted machine matches a fresh M-feature map.
inline std::shared_ptr<CandidateSet> reselected_candidate_set(const ReweightedFeatureSet& rw,
                                                              int M) {
  auto cs = std::make_shared<CandidateSet>();
  cs->dim = rw.pool->dim;
  cs->nu = {1.0};
  cs->sigmas = rw.pool->sigmas;
  cs->rff_seed = rw.pool->rff_seed;
  const double scale = std::sqrt(2.0 / static_cast<double>(M));
  for (int j : rw.selected) {
    FeatureDescriptor d = rw.pool->descriptors[static_cast<std::size_t>(j)];
    std::get<RandomFourierFeature>(d.kind).scale = scale;
    cs->descriptors.push_back(std::move(d));
  }
  return cs;
}

}  // namespace detail

struct MethodRun {
  BenchmarkResult result;
  std::optional<ModelDocument> model;  // best-lambda fit (first seed for randomized)
};

// One method at one feature budget, swept over the lambda grid; the reported
// row is the grid point with the lowest mean test error (ties keep the
// smaller lambda).
inline MethodRun run_method(const ExperimentConfig& cfg, const PreparedData& data) {
  validate(cfg);
  const LossKind loss =
      cfg.schema.task == Task::kClassification ? LossKind::kLogistic : LossKind::kQuadratic;
  const Task task = cfg.schema.task;
  const int d = static_cast<int>(data.train.dim());
  detail::warm_up();

  MethodRun out;
  BenchmarkResult& res = out.result;
  res.dataset = cfg.name.empty() ? file_stem(cfg.dataset) : cfg.name;
  res.method = cfg.method;

  auto finish_model = [&](std::variant<SparseModel, KernelModel> m) {
    out.model = ModelDocument{std::move(m), data.train.standardizer, cfg.schema};
  };

  if (cfg.method == "mfga") {
    const auto t0 = std::chrono::steady_clock::now();
    auto cs = std::make_shared<CandidateSet>(
        build_candidate_set(d, task, {data.sigma}, {}, cfg.taylor_order));
    const Eigen::MatrixXd Z = evaluate_design(*cs, data.train.X);
    res.t_pp = detail::seconds_since(t0);
    if (cfg.M > cs->size())
      throw ConfigError("M = " + std::to_string(cfg.M) + " exceeds pool size M0 = " +
                        std::to_string(cs->size()));

    res.M = cfg.M;
    res.M0 = cs->size();
    double best_error = std::numeric_limits<double>::infinity();
    for (double lambda : cfg.lambda_grid) {
      if (loss == LossKind::kLogistic && lambda == 0.0) continue;
      const Objective obj{Z, data.train.y, loss, lambda};
      MfgaOptions opt;
      opt.target_features = cfg.M;
      opt.picks_per_iteration = cfg.k;
      auto [model, trace] = mfga_train(obj, cs, opt);
      const double err =
          test_error_percent(task, predict_batch(model, data.test.X), data.test.y);
      if (err < best_error) {
        best_error = err;
        res.test_error = err;
        res.t_train = trace.t_train;
        res.coeff_norm = model.theta.norm();
        res.lambda = lambda;
        finish_model(std::move(model));
      }
    }
    return out;
  }

  if (cfg.method == "rks") {
    res.M = cfg.M;
    std::vector<std::vector<double>> errors(cfg.lambda_grid.size());
    std::vector<std::vector<double>> times(cfg.lambda_grid.size());
    std::vector<std::vector<double>> norms(cfg.lambda_grid.size());
    std::vector<std::optional<SparseModel>> first_seed_model(cfg.lambda_grid.size());
    for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
      for (std::size_t li = 0; li < cfg.lambda_grid.size(); ++li) {
        const double lambda = cfg.lambda_grid[li];
        if (loss == LossKind::kLogistic && lambda == 0.0) continue;
        auto [model, trace] =
            rks_train(data.train, cfg.M, data.sigma, cfg.seeds[si], loss, lambda);
        errors[li].push_back(
            test_error_percent(task, predict_batch(model, data.test.X), data.test.y));
        times[li].push_back(trace.t_train);
        norms[li].push_back(model.theta.norm());
        if (si == 0) first_seed_model[li] = std::move(model);
      }
    }
    std::size_t best = cfg.lambda_grid.size();
    double best_error = std::numeric_limits<double>::infinity();
    for (std::size_t li = 0; li < cfg.lambda_grid.size(); ++li) {
      if (errors[li].empty()) continue;
      const double m = detail::mean_of(errors[li]);
      if (m < best_error) {
        best_error = m;
        best = li;
      }
    }
    if (best == cfg.lambda_grid.size()) throw ConfigError("no usable lambda in the grid");
    res.test_error = best_error;
    res.error_stderr = detail::stderr_of(errors[best]);
    res.t_train = detail::mean_of(times[best]);
    res.coeff_norm = detail::mean_of(norms[best]);
    res.lambda = cfg.lambda_grid[best];
    finish_model(std::move(*first_seed_model[best]));
    return out;
  }

  if (cfg.method == "lkrf" || cfg.method == "eerf") {
    const int m0 = cfg.M0 > 0 ? cfg.M0 : 10 * cfg.M;
    res.M = cfg.M;
    res.M0 = m0;
    std::vector<double> t_pps;
    std::vector<std::vector<double>> errors(cfg.lambda_grid.size());
    std::vector<std::vector<double>> times(cfg.lambda_grid.size());
    std::vector<std::vector<double>> norms(cfg.lambda_grid.size());
    std::vector<std::optional<SparseModel>> first_seed_model(cfg.lambda_grid.size());
    for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
      const auto t0 = std::chrono::steady_clock::now();
      auto pool =
          std::make_shared<CandidateSet>(rff_candidate_set(d, m0, data.sigma, cfg.seeds[si]));
      const Eigen::MatrixXd Zpool = evaluate_design(*pool, data.train.X);
      const ReweightedFeatureSet rw = cfg.method == "lkrf"
                                          ? lkrf_reweight(pool, data.train, cfg.lkrf_radius, cfg.M)
                                          : eerf_score(pool, data.train, cfg.M);
      auto cs = detail::reselected_candidate_set(rw, cfg.M);
      t_pps.push_back(detail::seconds_since(t0));

      // the selected columns just change their scale factor with the budget
      const double rescale = std::sqrt(static_cast<double>(m0) / static_cast<double>(cfg.M));
      Eigen::MatrixXd Zsel(data.train.rows(), cfg.M);
      for (int i = 0; i < cfg.M; ++i)
        Zsel.col(i) = Zpool.col(rw.selected[static_cast<std::size_t>(i)]) * rescale;

      std::vector<int> support(static_cast<std::size_t>(cfg.M));
      std::iota(support.begin(), support.end(), 0);
      for (std::size_t li = 0; li < cfg.lambda_grid.size(); ++li) {
        const double lambda = cfg.lambda_grid[li];
        if (loss == LossKind::kLogistic && lambda == 0.0) continue;
        const auto t1 = std::chrono::steady_clock::now();
        const Objective obj{Zsel, data.train.y, loss, lambda};
        const RefitResult fit = refit(obj, support, Eigen::VectorXd::Zero(cfg.M));
        times[li].push_back(detail::seconds_since(t1));
        SparseModel model;
        model.candidates = cs;
        model.support = support;
        model.theta = fit.theta;
        errors[li].push_back(
            test_error_percent(task, predict_batch(model, data.test.X), data.test.y));
        norms[li].push_back(model.theta.norm());
        if (si == 0) first_seed_model[li] = std::move(model);
      }
    }
    std::size_t best = cfg.lambda_grid.size();
    double best_error = std::numeric_limits<double>::infinity();
    for (std::size_t li = 0; li < cfg.lambda_grid.size(); ++li) {
      if (errors[li].empty()) continue;
      const double m = detail::mean_of(errors[li]);
      if (m < best_error) {
        best_error = m;
        best = li;
      }
    }
    if (best == cfg.lambda_grid.size()) throw ConfigError("no usable lambda in the grid");
    res.test_error = best_error;
    res.error_stderr = detail::stderr_of(errors[best]);
    res.t_pp = detail::mean_of(t_pps);
    res.t_train = detail::mean_of(times[best]);
    res.coeff_norm = detail::mean_of(norms[best]);
    res.lambda = cfg.lambda_grid[best];
    finish_model(std::move(*first_seed_model[best]));
    return out;
  }

  // gk / glk
  const KernelKind kind = cfg.method == "gk" ? KernelKind::kGaussian : KernelKind::kGaussianLinear;
  res.n0_over_n = cfg.n0_fraction;
  double best_error = std::numeric_limits<double>::infinity();
  bool found = false;
  for (double lambda : cfg.lambda_grid) {
    if (task == Task::kClassification && lambda == 0.0) continue;
    const auto t0 = std::chrono::steady_clock::now();
    const KernelModel model = kernel_train_exact(data.train, kind, data.sigma, lambda,
                                                 cfg.n0_fraction, cfg.split_seed);
    const double t = detail::seconds_since(t0);
    const double err =
        test_error_percent(task, kernel_predict_batch(model, data.test.X), data.test.y);
    if (err < best_error) {
      found = true;
      best_error = err;
      res.test_error = err;
      res.t_train = t;
      res.coeff_norm = model.alpha.norm();
      res.lambda = lambda;
      finish_model(model);
    }
  }
  if (!found) throw ConfigError("no usable lambda in the grid");
  return out;
}

inline BenchmarkResult run_experiment(const ExperimentConfig& cfg) {
  const PreparedData data = prepare(cfg);
  return run_method(cfg, data).result;
}

// Error as a function of the feature budget, one row per (M, best lambda).
// The greedy path trains once per lambda at the largest budget and reads the
// smaller budgets off its snapshots, so rows for smaller M are prefixes of
// the same selection run. Randomized pools are sampled once per seed.
inline std::vector<BenchmarkResult> sweep(const ExperimentConfig& cfg, std::vector<int> Ms) {
  if (Ms.empty()) throw ConfigError("sweep needs at least one M");
  std::sort(Ms.begin(), Ms.end());
  Ms.erase(std::unique(Ms.begin(), Ms.end()), Ms.end());
  if (Ms.front() < 1) throw ConfigError("sweep budgets must be >= 1");
  const int m_max = Ms.back();

  ExperimentConfig base = cfg;
  base.M = m_max;
  validate(base);
  const PreparedData data = prepare(base);
  const LossKind loss =
      cfg.schema.task == Task::kClassification ? LossKind::kLogistic : LossKind::kQuadratic;
  const Task task = cfg.schema.task;
  const int d = static_cast<int>(data.train.dim());
  const std::string label = cfg.name.empty() ? file_stem(cfg.dataset) : cfg.name;
  detail::warm_up();

  std::vector<BenchmarkResult> rows;
  auto blank_row = [&](int M) {
    BenchmarkResult r;
    r.dataset = label;
    r.method = cfg.method;
    r.M = M;
    return r;
  };

  if (cfg.method == "gk" || cfg.method == "glk") {
    ExperimentConfig one = base;
    const BenchmarkResult single = run_method(one, data).result;
    for (int M : Ms) {
      BenchmarkResult r = single;
      r.M = M;  // kernel error does not depend on the budget; rows repeat
      rows.push_back(r);
    }
    return rows;
  }

  if (cfg.method == "mfga") {
    const auto t0 = std::chrono::steady_clock::now();
    auto cs = std::make_shared<CandidateSet>(
        build_candidate_set(d, task, {data.sigma}, {}, cfg.taylor_order));
    const Eigen::MatrixXd Z = evaluate_design(*cs, data.train.X);
    const double t_pp = detail::seconds_since(t0);
    if (m_max > cs->size())
      throw ConfigError("M = " + std::to_string(m_max) + " exceeds pool size M0 = " +
                        std::to_string(cs->size()));

    for (int M : Ms) rows.push_back(blank_row(M));
    for (auto& r : rows) {
      r.M0 = cs->size();
      r.t_pp = t_pp;
      r.test_error = std::numeric_limits<double>::infinity();
    }
    for (double lambda : cfg.lambda_grid) {
      if (loss == LossKind::kLogistic && lambda == 0.0) continue;
      const Objective obj{Z, data.train.y, loss, lambda};
      MfgaOptions opt;
      opt.target_features = m_max;
      opt.picks_per_iteration = cfg.k;
      opt.checkpoints = Ms;
      auto [model, trace] = mfga_train(obj, cs, opt);
      for (std::size_t mi = 0; mi < Ms.size(); ++mi) {
        const ModelSnapshot& snap = trace.snapshots[mi];
        SparseModel at;
        at.candidates = cs;
        at.support = snap.support;
        at.theta = snap.theta;
        const double err = test_error_percent(task, predict_batch(at, data.test.X), data.test.y);
        if (err < rows[mi].test_error) {
          rows[mi].test_error = err;
          rows[mi].lambda = lambda;
          rows[mi].coeff_norm = at.theta.norm();
          double t_cum = 0.0;  // time to reach this budget inside the full run
          int picked = 0;
          for (const auto& rec : trace.iterations) {
            t_cum += rec.seconds;
            picked += static_cast<int>(rec.selected.size());
            if (picked >= snap.checkpoint) break;
          }
          rows[mi].t_train = t_cum;
        }
      }
    }
    return rows;
  }

  // randomized feature methods
  const int m0 = cfg.method == "rks" ? m_max : (cfg.M0 > 0 ? cfg.M0 : 10 * m_max);
  std::vector<std::vector<std::vector<double>>> errors(
      Ms.size(), std::vector<std::vector<double>>(cfg.lambda_grid.size()));
  std::vector<std::vector<std::vector<double>>> times = errors;
  std::vector<std::vector<std::vector<double>>> norms = errors;
  std::vector<double> t_pps;

  for (std::uint64_t seed : cfg.seeds) {
    const auto t0 = std::chrono::steady_clock::now();
    auto pool = std::make_shared<CandidateSet>(rff_candidate_set(d, m0, data.sigma, seed));
    const Eigen::MatrixXd Zpool = evaluate_design(*pool, data.train.X);
    std::vector<int> ranking;
    if (cfg.method == "rks") {
      ranking.resize(static_cast<std::size_t>(m0));
      std::iota(ranking.begin(), ranking.end(), 0);
    } else {
      const ReweightedFeatureSet rw =
          cfg.method == "lkrf" ? lkrf_reweight(pool, data.train, cfg.lkrf_radius, m0)
                               : eerf_score(pool, data.train, m0);
      ranking = rw.selected;
    }
    t_pps.push_back(detail::seconds_since(t0));

    for (std::size_t mi = 0; mi < Ms.size(); ++mi) {
      const int M = Ms[static_cast<std::size_t>(mi)];
      const double rescale = std::sqrt(static_cast<double>(m0) / static_cast<double>(M));
      Eigen::MatrixXd Zsel(data.train.rows(), M);
      Eigen::MatrixXd Ztest(data.test.rows(), M);
      auto test_pool = std::make_shared<CandidateSet>();
      test_pool->dim = d;
      test_pool->nu = {1.0};
      test_pool->sigmas = {data.sigma};
      const double scale = std::sqrt(2.0 / static_cast<double>(M));
      for (int i = 0; i < M; ++i) {
        const int j = ranking[static_cast<std::size_t>(i)];
        Zsel.col(i) = Zpool.col(j) * rescale;
        FeatureDescriptor fd = pool->descriptors[static_cast<std::size_t>(j)];
        std::get<RandomFourierFeature>(fd.kind).scale = scale;
        test_pool->descriptors.push_back(std::move(fd));
      }
      std::vector<int> support(static_cast<std::size_t>(M));
      std::iota(support.begin(), support.end(), 0);
      for (std::size_t li = 0; li < cfg.lambda_grid.size(); ++li) {
        const double lambda = cfg.lambda_grid[li];
        if (loss == LossKind::kLogistic && lambda == 0.0) continue;
        const auto t1 = std::chrono::steady_clock::now();
        const Objective obj{Zsel, data.train.y, loss, lambda};
        const RefitResult fit = refit(obj, support, Eigen::VectorXd::Zero(M));
        times[mi][li].push_back(detail::seconds_since(t1));
        SparseModel model;
        model.candidates = test_pool;
        model.support = support;
        model.theta = fit.theta;
        errors[mi][li].push_back(
            test_error_percent(task, predict_batch(model, data.test.X), data.test.y));
        norms[mi][li].push_back(model.theta.norm());
      }
    }
  }

  for (std::size_t mi = 0; mi < Ms.size(); ++mi) {
    BenchmarkResult r = blank_row(Ms[mi]);
    if (cfg.method != "rks") {
      r.M0 = m0;
      r.t_pp = detail::mean_of(t_pps);
    }
    std::size_t best = cfg.lambda_grid.size();
    double best_error = std::numeric_limits<double>::infinity();
    for (std::size_t li = 0; li < cfg.lambda_grid.size(); ++li) {
      if (errors[mi][li].empty()) continue;
      const double m = detail::mean_of(errors[mi][li]);
      if (m < best_error) {
        best_error = m;
        best = li;
      }
    }
    if (best == cfg.lambda_grid.size()) throw ConfigError("no usable lambda in the grid");
    r.test_error = best_error;
    r.error_stderr = detail::stderr_of(errors[mi][best]);
    r.t_train = detail::mean_of(times[mi][best]);
    r.coeff_norm = detail::mean_of(norms[mi][best]);
    r.lambda = cfg.lambda_grid[best];
    rows.push_back(std::move(r));
  }
  return rows;
}

inline void write_sweep_csv(const std::string& path, const std::vector<BenchmarkResult>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path);
  out << "method,M,error,stderr\n";
  out << std::setprecision(12);
  for (const auto& r : rows) {
    out << r.method << "," << r.M << "," << r.test_error << ",";
    if (r.error_stderr) out << *r.error_stderr;
    out << "\n";
  }
}

inline std::vector<BenchmarkResult> read_sweep_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw EmptyFile(path);
  if (detail::trim(line) != "method,M,error,stderr")
    throw ParseError(path + ": unexpected header '" + line + "'");
  std::vector<BenchmarkResult> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_line(line);
    if (cells.size() != 4)
      throw ParseError(path + ": row " + std::to_string(line_no) + " has " +
                       std::to_string(cells.size()) + " cells, expected 4");
    BenchmarkResult r;
    r.method = cells[0];
    try {
      r.M = std::stoi(cells[1]);
      r.test_error = std::stod(cells[2]);
      if (!cells[3].empty()) r.error_stderr = std::stod(cells[3]);
    } catch (const std::exception&) {
      throw ParseError(path + ": bad number on row " + std::to_string(line_no));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace detail {

inline std::string fmt_double(double v, int precision = 3) {
  std::ostringstream ss;
  ss << std::setprecision(precision) << v;
  return ss.str();
}

}  // namespace detail

// Plain-text comparison across result files: one row per (dataset, method),
// methods in the fixed order RKS, LKRF, EERF, MFGA, GK, GLK. Missing fields
// render as "--".
inline std::string compare_table(std::vector<BenchmarkResult> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const BenchmarkResult& a, const BenchmarkResult& b) {
    if (a.dataset != b.dataset) return a.dataset < b.dataset;
    return method_order(a.method) < method_order(b.method);
  });

  const std::vector<std::string> headers{"dataset", "method", "M",       "M0",
                                         "N0/N",    "t_pp",   "t_train", "error(%)"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) {
    std::string err = detail::fmt_double(r.test_error, 4);
    if (r.error_stderr) err += " (" + detail::fmt_double(*r.error_stderr, 2) + ")";
    cells.push_back({r.dataset, method_display(r.method),
                     r.M > 0 ? std::to_string(r.M) : "--",
                     r.M0 > 0 ? std::to_string(r.M0) : "--",
                     r.n0_over_n ? detail::fmt_double(*r.n0_over_n) : "--",
                     r.t_pp ? detail::fmt_double(*r.t_pp) : "--",
                     detail::fmt_double(r.t_train), err});
  }

  std::vector<std::size_t> width(headers.size());
  for (std::size_t c = 0; c < headers.size(); ++c) {
    width[c] = headers[c].size();
    for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out << std::left << std::setw(static_cast<int>(width[c])) << row[c];
      out << (c + 1 == row.size() ? "\n" : "  ");
    }
  };
  emit(headers);
  std::vector<std::string> rule;
  for (std::size_t w : width) rule.push_back(std::string(w, '-'));
  emit(rule);
  for (const auto& row : cells) emit(row);
  return out.str();
}

inline std::string compare_files(const std::vector<std::string>& paths) {
  std::vector<BenchmarkResult> rows;
  for (const auto& p : paths) {
    try {
      rows.push_back(result_from_json(load_json(p)));
    } catch (const json::exception& e) {
      throw ParseError(p + ": " + e.what());
    }
  }
  return compare_table(std::move(rows));
}

// Summary of the deterministic feature pipeline for one config: pool size,
// bandwidth, design statistics. Used by the featurize subcommand.
struct FeaturizeSummary {
  int rows = 0;
  int dim = 0;
  int M0 = 0;
  double sigma = 0.0;
  double t_pp = 0.0;
  double col_norm_min = 0.0;
  double col_norm_mean = 0.0;
  double col_norm_max = 0.0;
};

inline FeaturizeSummary featurize(const ExperimentConfig& cfg) {
  const PreparedData data = prepare(cfg);
  FeaturizeSummary s;
  s.rows = static_cast<int>(data.train.rows());
  s.dim = static_cast<int>(data.train.dim());
  s.sigma = data.sigma;
  detail::warm_up();
  const auto t0 = std::chrono::steady_clock::now();
  Eigen::MatrixXd Z;
  if (cfg.method == "mfga") {
    const CandidateSet cs = build_candidate_set(s.dim, cfg.schema.task, {data.sigma}, {},
                                                cfg.taylor_order);
    Z = evaluate_design(cs, data.train.X);
  } else {
    const int m = cfg.M > 0 ? cfg.M : 100;
    Z = evaluate_design(rff_candidate_set(s.dim, m, data.sigma, cfg.seeds.empty() ? 1 : cfg.seeds[0]),
                        data.train.X);
  }
  s.t_pp = detail::seconds_since(t0);
  s.M0 = static_cast<int>(Z.cols());
  const Eigen::VectorXd nrm = Z.colwise().norm();
  s.col_norm_min = nrm.minCoeff();
  s.col_norm_max = nrm.maxCoeff();
  s.col_norm_mean = nrm.mean();
  return s;
}

inline json to_json(const FeaturizeSummary& s) {
  return json{{"rows", s.rows},
              {"dim", s.dim},
              {"M0", s.M0},
              {"sigma", s.sigma},
              {"t_pp", s.t_pp},
              {"column_norm_min", s.col_norm_min},
              {"column_norm_mean", s.col_norm_mean},
              {"column_norm_max", s.col_norm_max}};
}

}  // namespace mfga
