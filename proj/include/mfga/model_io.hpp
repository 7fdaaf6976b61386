#pragma once

#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include <json.hpp>

#include "mfga/baselines.hpp"
#include "mfga/dataset.hpp"
#include "mfga/feature_maps.hpp"
#include "mfga/greedy.hpp"

namespace mfga {

using json = nlohmann::json;

namespace io {

inline json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Eigen::VectorXd vec_from_json(const json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  return v;
}

inline json mat_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd mat_from_json(const json& rows) {
  const Eigen::Index r = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index c = r > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j)
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].get<double>();
  return m;
}

}  // namespace io

inline json to_json(const CsvSchema& s) {
  json j{{"response", s.response},
         {"task", s.task == Task::kClassification ? "classification" : "regression"}};
  if (s.task == Task::kClassification) j["positive_label"] = s.positive_label;
  return j;
}

inline CsvSchema schema_from_json(const json& j) {
  CsvSchema s;
  if (!j.contains("response") || !j.contains("task"))
    throw ConfigError("schema needs 'response' and 'task'");
  s.response = j.at("response").get<std::string>();
  const std::string task = j.at("task").get<std::string>();
  if (task == "classification")
    s.task = Task::kClassification;
  else if (task == "regression")
    s.task = Task::kRegression;
  else
    throw ConfigError("unknown task '" + task + "'");
  if (s.task == Task::kClassification) {
    if (!j.contains("positive_label"))
      throw ConfigError("classification schema needs 'positive_label'");
    s.positive_label = j.at("positive_label").get<std::string>();
  }
  return s;
}

inline json to_json(const Standardizer& s) {
  return json{{"means", io::vec_to_json(s.means)},
              {"stds", io::vec_to_json(s.stds)},
              {"scales_response", s.scales_response},
              {"response_lo", s.response_lo},
              {"response_hi", s.response_hi}};
}

inline Standardizer standardizer_from_json(const json& j) {
  Standardizer s;
  s.means = io::vec_from_json(j.at("means"));
  s.stds = io::vec_from_json(j.at("stds"));
  s.scales_response = j.at("scales_response").get<bool>();
  s.response_lo = j.at("response_lo").get<double>();
  s.response_hi = j.at("response_hi").get<double>();
  return s;
}

inline json to_json(const FeatureDescriptor& d) {
  json j{{"kernel", d.kernel_id}, {"weight", d.weight}};
  if (const auto* t = std::get_if<TaylorGaussianFeature>(&d.kind)) {
    j["type"] = "taylor";
    j["sigma"] = t->sigma;
    j["alpha"] = t->alpha.exponents;
  } else if (const auto* l = std::get_if<LinearCoordinateFeature>(&d.kind)) {
    j["type"] = "linear";
    j["coord"] = l->coord;
  } else {
    const auto& r = std::get<RandomFourierFeature>(d.kind);
    j["type"] = "fourier";
    j["omega"] = io::vec_to_json(r.omega);
    j["offset"] = r.offset;
    j["scale"] = r.scale;
  }
  return j;
}

inline FeatureDescriptor descriptor_from_json(const json& j) {
  FeatureDescriptor d;
  d.kernel_id = j.at("kernel").get<int>();
  d.weight = j.at("weight").get<double>();
  const std::string type = j.at("type").get<std::string>();
  if (type == "taylor") {
    TaylorGaussianFeature t;
    t.sigma = j.at("sigma").get<double>();
    t.alpha.exponents = j.at("alpha").get<std::vector<int>>();
    t.log_norm = taylor_log_norm(t.sigma, t.alpha);
    d.kind = std::move(t);
  } else if (type == "linear") {
    d.kind = LinearCoordinateFeature{j.at("coord").get<int>()};
  } else if (type == "fourier") {
    RandomFourierFeature r;
    r.omega = io::vec_from_json(j.at("omega"));
    r.offset = j.at("offset").get<double>();
    r.scale = j.at("scale").get<double>();
    d.kind = std::move(r);
  } else {
    throw ParseError("unknown feature type '" + type + "'");
  }
  return d;
}

inline json to_json(const CandidateSet& cs) {
  json j{{"dim", cs.dim}, {"nu", cs.nu}, {"sigmas", cs.sigmas}};
  if (cs.rff_seed) j["rff_seed"] = *cs.rff_seed;
  json ds = json::array();
  for (const auto& d : cs.descriptors) ds.push_back(to_json(d));
  j["descriptors"] = std::move(ds);
  return j;
}

inline CandidateSet candidate_set_from_json(const json& j) {
  CandidateSet cs;
  cs.dim = j.at("dim").get<int>();
  cs.nu = j.at("nu").get<std::vector<double>>();
  cs.sigmas = j.at("sigmas").get<std::vector<double>>();
  if (j.contains("rff_seed")) cs.rff_seed = j.at("rff_seed").get<std::uint64_t>();
  for (const auto& dj : j.at("descriptors")) cs.descriptors.push_back(descriptor_from_json(dj));
  return cs;
}

// Everything needed to score new rows from disk: the fitted model plus the
// standardizer and schema that prepared its training data.
struct ModelDocument {
  std::variant<SparseModel, KernelModel> model;
  Standardizer standardizer;
  CsvSchema schema;

  Task task() const { return schema.task; }

  // x is a raw (unstandardized) feature row; regression outputs are mapped
  // back to the original response range.
  double predict_raw(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd z =
        ((x - standardizer.means).array() / standardizer.stds.array()).matrix();
    const double f = std::holds_alternative<SparseModel>(model)
                         ? std::get<SparseModel>(model).predict(z)
                         : std::get<KernelModel>(model).predict(z);
    if (schema.task == Task::kClassification) return f >= 0.0 ? 1.0 : -1.0;
    return standardizer.unscale_response(f);
  }
};

inline json to_json(const ModelDocument& doc) {
  json j{{"schema", to_json(doc.schema)}, {"standardizer", to_json(doc.standardizer)}};
  if (const auto* sparse = std::get_if<SparseModel>(&doc.model)) {
    j["type"] = "sparse";
    j["candidate_set"] = to_json(*sparse->candidates);
    j["support"] = sparse->support;
    j["theta"] = io::vec_to_json(sparse->theta);
  } else {
    const auto& k = std::get<KernelModel>(doc.model);
    j["type"] = "kernel";
    j["kind"] = k.kind == KernelKind::kGaussian ? "gaussian" : "gaussian_linear";
    j["sigma"] = k.sigma;
    j["lambda"] = k.lambda;
    j["points"] = io::mat_to_json(k.points);
    j["alpha"] = io::vec_to_json(k.alpha);
  }
  return j;
}

inline ModelDocument model_from_json(const json& j) {
  ModelDocument doc;
  doc.schema = schema_from_json(j.at("schema"));
  doc.standardizer = standardizer_from_json(j.at("standardizer"));
  const std::string type = j.at("type").get<std::string>();
  if (type == "sparse") {
    SparseModel m;
    m.candidates = std::make_shared<CandidateSet>(candidate_set_from_json(j.at("candidate_set")));
    m.support = j.at("support").get<std::vector<int>>();
    m.theta = io::vec_from_json(j.at("theta"));
    doc.model = std::move(m);
  } else if (type == "kernel") {
    KernelModel m;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "gaussian")
      m.kind = KernelKind::kGaussian;
    else if (kind == "gaussian_linear")
      m.kind = KernelKind::kGaussianLinear;
    else
      throw ParseError("unknown kernel kind '" + kind + "'");
    m.sigma = j.at("sigma").get<double>();
    m.lambda = j.at("lambda").get<double>();
    m.points = io::mat_from_json(j.at("points"));
    m.alpha = io::vec_from_json(j.at("alpha"));
    m.task = doc.schema.task;
    doc.model = std::move(m);
  } else {
    throw ParseError("unknown model type '" + type + "'");
  }
  return doc;
}

inline void save_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path);
  out << j.dump(2) << "\n";
}

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline void save_model(const std::string& path, const ModelDocument& doc) {
  save_json(path, to_json(doc));
}

inline ModelDocument load_model(const std::string& path) {
  try {
    return model_from_json(load_json(path));
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace mfga
