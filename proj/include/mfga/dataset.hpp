#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mfga/errors.hpp"
#include "mfga/task.hpp"

namespace mfga {

// How to read one CSV: which column is the response, what kind of problem it
// is, and (for classification) which raw label maps to +1.
struct CsvSchema {
  std::string response;
  Task task = Task::kRegression;
  std::string positive_label;
};

// Rows straight off disk: features untouched, responses numeric for regression
// or already mapped to {-1, +1} for classification.
struct RawDataset {
  Eigen::MatrixXd features;
  Eigen::VectorXd responses;
  Task task = Task::kRegression;
  std::vector<std::string> feature_names;

  Eigen::Index rows() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
};

// Per-column affine maps fitted on training rows only.
struct Standardizer {
  Eigen::VectorXd means;
  Eigen::VectorXd stds;
  bool scales_response = false;  // regression squeezes responses into [-1, 1]
  double response_lo = -1.0;
  double response_hi = 1.0;

  double scale_response(double y) const {
    if (!scales_response) return y;
    return 2.0 * (y - response_lo) / (response_hi - response_lo) - 1.0;
  }
  double unscale_response(double s) const {
    if (!scales_response) return s;
    return response_lo + (s + 1.0) * (response_hi - response_lo) / 2.0;
  }
};

// Standardized rows ready for training, carrying the maps that produced them.
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Task task = Task::kRegression;
  Standardizer standardizer;

  Eigen::Index rows() const { return X.rows(); }
  Eigen::Index dim() const { return X.cols(); }
};

namespace detail {

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return v;
}

}  // namespace detail

// Reads a comma-separated file with a header row. Every column except the
// response must be numeric. Classification responses are matched against
// schema.positive_label as strings; anything else maps to -1, and more than
// two distinct labels is an error.
inline RawDataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw EmptyFile(path);
  const std::vector<std::string> header = detail::split_line(line);

  std::ptrdiff_t response_col = -1;
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == schema.response) response_col = static_cast<std::ptrdiff_t>(j);
  if (response_col < 0) throw MissingColumn(schema.response);

  std::vector<std::string> feature_names;
  for (std::size_t j = 0; j < header.size(); ++j)
    if (static_cast<std::ptrdiff_t>(j) != response_col) feature_names.push_back(header[j]);

  std::vector<std::vector<double>> rows;
  std::vector<double> responses;
  std::set<std::string> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const std::vector<std::string> cells = detail::split_line(line);
    if (cells.size() != header.size())
      throw Error(path + ": row " + std::to_string(line_no) + " has " +
                  std::to_string(cells.size()) + " cells, expected " +
                  std::to_string(header.size()));

    std::vector<double> row;
    row.reserve(header.size() - 1);
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (static_cast<std::ptrdiff_t>(j) == response_col) {
        if (schema.task == Task::kClassification) {
          labels.insert(cells[j]);
          responses.push_back(cells[j] == schema.positive_label ? 1.0 : -1.0);
        } else {
          auto v = detail::parse_double(cells[j]);
          if (!v) throw NonNumericCell(line_no, header[j], cells[j]);
          responses.push_back(*v);
        }
      } else {
        auto v = detail::parse_double(cells[j]);
        if (!v) throw NonNumericCell(line_no, header[j], cells[j]);
        row.push_back(*v);
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw EmptyFile(path);
  if (schema.task == Task::kClassification && labels.size() > 2)
    throw Error(path + ": response '" + schema.response + "' has " +
                std::to_string(labels.size()) + " distinct labels, expected two");

  RawDataset out;
  out.task = schema.task;
  out.feature_names = std::move(feature_names);
  out.features.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
  out.responses.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      out.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    out.responses(static_cast<Eigen::Index>(i)) = responses[i];
  }
  return out;
}

// Column means and sample standard deviations from training rows; constant
// columns get std 1 so they pass through centered instead of dividing by zero.
inline Standardizer fit_standardizer(const RawDataset& raw) {
  const Eigen::Index n = raw.rows();
  if (n < 2) throw TooFewRows("fit_standardizer: need at least 2 rows");
  Standardizer s;
  s.means = raw.features.colwise().mean();
  Eigen::MatrixXd centered = raw.features.rowwise() - s.means.transpose();
  s.stds = (centered.array().square().colwise().sum() / static_cast<double>(n - 1))
               .sqrt()
               .matrix();
  for (Eigen::Index j = 0; j < s.stds.size(); ++j)
    if (s.stds(j) == 0.0) s.stds(j) = 1.0;
  if (raw.task == Task::kRegression) {
    s.scales_response = true;
    s.response_lo = raw.responses.minCoeff();
    s.response_hi = raw.responses.maxCoeff();
    if (s.response_lo == s.response_hi)
      throw DegenerateResponse("fit_standardizer: all responses equal");
  }
  return s;
}

inline Dataset apply_standardizer(const Standardizer& s, const RawDataset& raw) {
  if (raw.dim() != s.means.size())
    throw DimensionMismatch("apply_standardizer: got " + std::to_string(raw.dim()) +
                            " columns, standardizer has " + std::to_string(s.means.size()));
  Dataset ds;
  ds.task = raw.task;
  ds.standardizer = s;
  ds.X = (raw.features.rowwise() - s.means.transpose()).array().rowwise() /
         s.stds.transpose().array();
  ds.y.resize(raw.rows());
  for (Eigen::Index i = 0; i < raw.rows(); ++i)
    ds.y(i) = s.scale_response(raw.responses(i));
  return ds;
}

// Random train/test split. The train side keeps N - floor(N * test_fraction)
// rows, i.e. ceil(N * (1 - test_fraction)).
inline std::pair<RawDataset, RawDataset> split(const RawDataset& raw, double test_fraction,
                                               std::uint64_t seed) {
  const Eigen::Index n = raw.rows();
  if (n < 2) throw TooFewRows("split: need at least 2 rows");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw Error("split: test_fraction must be in (0, 1)");
  const Eigen::Index test_n =
      static_cast<Eigen::Index>(std::floor(static_cast<double>(n) * test_fraction));
  const Eigen::Index train_n = n - test_n;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  auto take = [&](Eigen::Index begin, Eigen::Index count) {
    RawDataset part;
    part.task = raw.task;
    part.feature_names = raw.feature_names;
    part.features.resize(count, raw.dim());
    part.responses.resize(count);
    for (Eigen::Index i = 0; i < count; ++i) {
      part.features.row(i) = raw.features.row(order[static_cast<std::size_t>(begin + i)]);
      part.responses(i) = raw.responses(order[static_cast<std::size_t>(begin + i)]);
    }
    return part;
  };
  return {take(0, train_n), take(train_n, test_n)};
}

// Uniform subsample without replacement; rows keep their original order.
inline Dataset subsample(const Dataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw Error("subsample: fraction must be in (0, 1]");
  const Eigen::Index n = ds.rows();
  const Eigen::Index count =
      std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::floor(fraction * n)));
  if (count == n) return ds;

  std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  std::vector<Eigen::Index> picked;
  picked.reserve(static_cast<std::size_t>(count));
  std::mt19937_64 rng(seed);
  std::sample(all.begin(), all.end(), std::back_inserter(picked), count, rng);

  Dataset out;
  out.task = ds.task;
  out.standardizer = ds.standardizer;
  out.X.resize(count, ds.dim());
  out.y.resize(count);
  for (Eigen::Index i = 0; i < count; ++i) {
    out.X.row(i) = ds.X.row(picked[static_cast<std::size_t>(i)]);
    out.y(i) = ds.y(picked[static_cast<std::size_t>(i)]);
  }
  return out;
}

// Kernel bandwidth: mean euclidean distance from a probe row to its k-th
// nearest other row. probe_count = 0 means min(N, 1000) probes; probe_count
// >= N sweeps every row and the estimate is exact.
inline double bandwidth_heuristic(const Dataset& ds, int k = 50, int probe_count = 0,
                                  std::uint64_t seed = 0) {
  const Eigen::Index n = ds.rows();
  if (k < 1) throw Error("bandwidth_heuristic: k must be >= 1");
  if (n <= k) throw TooFewRows("bandwidth_heuristic: need more than k rows");

  Eigen::Index probes = probe_count > 0 ? std::min<Eigen::Index>(probe_count, n)
                                        : std::min<Eigen::Index>(n, 1000);
  std::vector<Eigen::Index> anchors;
  if (probes >= n) {
    anchors.resize(static_cast<std::size_t>(n));
    std::iota(anchors.begin(), anchors.end(), Eigen::Index{0});
  } else {
    std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    std::mt19937_64 rng(seed);
    std::sample(all.begin(), all.end(), std::back_inserter(anchors), probes, rng);
  }

  const Eigen::VectorXd sq_norms = ds.X.rowwise().squaredNorm();
  double total = 0.0;
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index a : anchors) {
    Eigen::VectorXd cross = ds.X * ds.X.row(a).transpose();
    for (Eigen::Index j = 0; j < n; ++j)
      d2[static_cast<std::size_t>(j)] = std::max(0.0, sq_norms(j) + sq_norms(a) - 2.0 * cross(j));
    d2[static_cast<std::size_t>(a)] = std::numeric_limits<double>::infinity();
    std::nth_element(d2.begin(), d2.begin() + (k - 1), d2.end());
    total += std::sqrt(d2[static_cast<std::size_t>(k - 1)]);
  }
  return total / static_cast<double>(anchors.size());
}

}  // namespace mfga
