#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "mfga/mfga.hpp"

namespace {

// MFGA_OUTDIR redirects relative output paths without touching the configs.
std::string resolve_out(const std::string& path) {
  if (path.empty()) return path;
  const char* outdir = std::getenv("MFGA_OUTDIR");
  if (!outdir || *outdir == '\0' || path.front() == '/') return path;
  std::string dir(outdir);
  if (dir.back() != '/') dir += '/';
  return dir + path;
}

void apply_thread_env() {
  if (const char* env = std::getenv("MFGA_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) Eigen::setNbThreads(n);
  }
}

int cmd_featurize(const std::string& config_path, const std::string& output) {
  const mfga::ExperimentConfig cfg = mfga::load_config(config_path);
  const mfga::FeaturizeSummary s = mfga::featurize(cfg);
  const mfga::json j = mfga::to_json(s);
  std::cout << j.dump(2) << "\n";
  if (!output.empty()) mfga::save_json(resolve_out(output), j);
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& model_path,
              const std::string& output) {
  const mfga::ExperimentConfig cfg = mfga::load_config(config_path);
  const mfga::PreparedData data = mfga::prepare(cfg);
  const mfga::MethodRun run = mfga::run_method(cfg, data);
  const mfga::json j = mfga::to_json(run.result);
  std::cout << j.dump(2) << "\n";
  const std::string result_path = !output.empty() ? output : cfg.output;
  if (!result_path.empty()) mfga::save_json(resolve_out(result_path), j);
  if (!model_path.empty()) {
    if (!run.model) throw mfga::Error("train: no model produced");
    mfga::save_model(resolve_out(model_path), *run.model);
  }
  return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& data_path) {
  const mfga::ModelDocument doc = mfga::load_model(model_path);
  const mfga::RawDataset raw = mfga::load_csv(data_path, doc.schema);
  const mfga::Dataset ds = mfga::apply_standardizer(doc.standardizer, raw);

  Eigen::VectorXd pred(ds.rows());
  for (Eigen::Index i = 0; i < ds.rows(); ++i) {
    const Eigen::VectorXd x = ds.X.row(i).transpose();
    pred(i) = std::holds_alternative<mfga::SparseModel>(doc.model)
                  ? std::get<mfga::SparseModel>(doc.model).predict(x)
                  : std::get<mfga::KernelModel>(doc.model).predict(x);
  }
  mfga::json j{{"rows", ds.rows()},
               {"test_error", mfga::test_error_percent(doc.task(), pred, ds.y)}};
  if (doc.task() == mfga::Task::kRegression) {
    // also report the fit on the original response scale
    double ss = 0.0;
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
      const double diff = doc.standardizer.unscale_response(pred(i)) - raw.responses(i);
      ss += diff * diff;
    }
    j["rmse_raw"] = std::sqrt(ss / static_cast<double>(ds.rows()));
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<int>& Ms,
              const std::string& output) {
  const mfga::ExperimentConfig cfg = mfga::load_config(config_path);
  const std::vector<mfga::BenchmarkResult> rows = mfga::sweep(cfg, Ms);
  const std::string path =
      resolve_out(!output.empty() ? output : (cfg.output.empty() ? "sweep.csv" : cfg.output));
  mfga::write_sweep_csv(path, rows);
  std::cout << mfga::compare_table(rows);
  std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_compare(const std::vector<std::string>& paths) {
  std::cout << mfga::compare_files(paths);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  apply_thread_env();

  CLI::App app{"greedy kernel feature selection with randomized and exact baselines"};
  app.require_subcommand(1);

  std::string config_path, model_path, data_path, output;
  std::vector<int> Ms;
  std::vector<std::string> result_paths;

  auto* featurize = app.add_subcommand("featurize", "build the feature pool and report design statistics");
  featurize->add_option("--config", config_path, "experiment config JSON")->required();
  featurize->add_option("--output", output, "write the summary JSON here");

  auto* train = app.add_subcommand("train", "fit one method at one budget over the lambda grid");
  train->add_option("--config", config_path, "experiment config JSON")->required();
  train->add_option("--model", model_path, "write the fitted model JSON here");
  train->add_option("--output", output, "write the result JSON here (overrides config)");

  auto* evaluate = app.add_subcommand("evaluate", "score a saved model on a CSV");
  evaluate->add_option("--model", model_path, "model JSON from train")->required();
  evaluate->add_option("--data", data_path, "CSV to score")->required();

  auto* sweep = app.add_subcommand("sweep", "error versus feature budget, written as CSV");
  sweep->add_option("--config", config_path, "experiment config JSON")->required();
  sweep->add_option("--m", Ms, "feature budgets")->required()->delimiter(',');
  sweep->add_option("--output", output, "CSV path (overrides config)");

  auto* compare = app.add_subcommand("compare", "tabulate result JSONs side by side");
  compare->add_option("results", result_paths, "result files from train")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;  // help and version exit clean, bad usage is 1
  }

  try {
    if (app.got_subcommand(featurize)) return cmd_featurize(config_path, output);
    if (app.got_subcommand(train)) return cmd_train(config_path, model_path, output);
    if (app.got_subcommand(evaluate)) return cmd_evaluate(model_path, data_path);
    if (app.got_subcommand(sweep)) return cmd_sweep(config_path, Ms, output);
    if (app.got_subcommand(compare)) return cmd_compare(result_paths);
  } catch (const mfga::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const mfga::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
