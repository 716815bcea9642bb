#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "sufflab/discrete.hpp"
#include "sufflab/downstream.hpp"
#include "sufflab/encoders.hpp"

namespace sufflab {

using json = nlohmann::json;

namespace detail {

inline json matrix_to_flat(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) a.push_back(m(i, j));
  return a;
}

inline Eigen::MatrixXd matrix_from_flat(const json& a, Eigen::Index rows,
                                        Eigen::Index cols) {
  if (static_cast<Eigen::Index>(a.size()) != rows * cols)
    throw std::invalid_argument("checkpoint: data length mismatch");
  Eigen::MatrixXd m(rows, cols);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = a[k++].get<double>();
  return m;
}

}  // namespace detail

// Checkpoint schema: {"type": ..., "shapes": ..., "data": flat row-major}

inline json encoder_to_json(const MLPEncoder& e) {
  json j;
  j["type"] = "mlp";
  j["shapes"] = {{"hidden", e.W1.rows()}, {"d", e.W1.cols()}, {"p", e.W2.rows()}};
  json data = detail::matrix_to_flat(e.W1);
  for (Eigen::Index i = 0; i < e.b1.size(); ++i) data.push_back(e.b1(i));
  json w2 = detail::matrix_to_flat(e.W2);
  data.insert(data.end(), w2.begin(), w2.end());
  j["data"] = std::move(data);
  return j;
}

inline json encoder_to_json(const LinearEncoder& e) {
  json j;
  j["type"] = "linear";
  j["shapes"] = {{"p", e.W.rows()}, {"d", e.W.cols()}};
  if (e.op_norm_bound) j["shapes"]["op_norm_bound"] = *e.op_norm_bound;
  j["data"] = detail::matrix_to_flat(e.W);
  return j;
}

inline json encoder_to_json(const AugLinearEncoder& e) {
  json j;
  j["type"] = "aug_linear";
  j["shapes"] = {{"M", e.W.rows()}, {"S", e.W.cols()}, {"bound", e.bound}};
  json data = detail::matrix_to_flat(e.W);
  data.push_back(e.w);
  j["data"] = std::move(data);
  return j;
}

inline MLPEncoder mlp_from_json(const json& j) {
  if (j.at("type") != "mlp") throw std::invalid_argument("checkpoint: not an mlp");
  Eigen::Index hidden = j.at("shapes").at("hidden");
  Eigen::Index d = j.at("shapes").at("d");
  Eigen::Index p = j.at("shapes").at("p");
  const json& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != hidden * d + hidden + p * hidden)
    throw std::invalid_argument("checkpoint: data length mismatch");
  MLPEncoder e;
  json head(data.begin(), data.begin() + hidden * d);
  e.W1 = detail::matrix_from_flat(head, hidden, d);
  e.b1.resize(hidden);
  for (Eigen::Index i = 0; i < hidden; ++i)
    e.b1(i) = data[hidden * d + i].get<double>();
  json tail(data.begin() + hidden * d + hidden, data.end());
  e.W2 = detail::matrix_from_flat(tail, p, hidden);
  return e;
}

inline LinearEncoder linear_from_json(const json& j) {
  if (j.at("type") != "linear") throw std::invalid_argument("checkpoint: not linear");
  Eigen::Index p = j.at("shapes").at("p");
  Eigen::Index d = j.at("shapes").at("d");
  LinearEncoder e(detail::matrix_from_flat(j.at("data"), p, d));
  if (j.at("shapes").contains("op_norm_bound"))
    e.op_norm_bound = j.at("shapes").at("op_norm_bound").get<double>();
  return e;
}

inline AugLinearEncoder aug_linear_from_json(const json& j) {
  if (j.at("type") != "aug_linear")
    throw std::invalid_argument("checkpoint: not aug_linear");
  Eigen::Index M = j.at("shapes").at("M");
  Eigen::Index S = j.at("shapes").at("S");
  const json& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != M * S + 1)
    throw std::invalid_argument("checkpoint: data length mismatch");
  json head(data.begin(), data.begin() + M * S);
  return AugLinearEncoder(detail::matrix_from_flat(head, M, S),
                          data.back().get<double>(),
                          j.at("shapes").at("bound").get<double>());
}

inline json head_to_json(const LinearHead& h) {
  json j;
  j["type"] = "linear_head";
  j["shapes"] = {{"p", h.eta.size()}, {"trunc_B", h.trunc_B}};
  json data = json::array();
  for (Eigen::Index i = 0; i < h.eta.size(); ++i) data.push_back(h.eta(i));
  j["data"] = std::move(data);
  return j;
}

inline LinearHead linear_head_from_json(const json& j) {
  if (j.at("type") != "linear_head")
    throw std::invalid_argument("checkpoint: not a linear head");
  Eigen::Index p = j.at("shapes").at("p");
  LinearHead h;
  h.trunc_B = j.at("shapes").at("trunc_B");
  h.eta.resize(p);
  for (Eigen::Index i = 0; i < p; ++i) h.eta(i) = j.at("data")[i].get<double>();
  return h;
}

inline json head_to_json(const ClassifierHead& h) {
  json j;
  j["type"] = "classifier_head";
  j["shapes"] = {{"M", h.Gw.rows()},
                 {"floor_B", h.floor_B},
                 {"bound", h.bound}};
  json data = detail::matrix_to_flat(h.Gw);
  for (Eigen::Index i = 0; i < h.Gb.size(); ++i) data.push_back(h.Gb(i));
  j["data"] = std::move(data);
  return j;
}

inline ClassifierHead classifier_head_from_json(const json& j) {
  if (j.at("type") != "classifier_head")
    throw std::invalid_argument("checkpoint: not a classifier head");
  Eigen::Index M = j.at("shapes").at("M");
  const json& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != M * M + M)
    throw std::invalid_argument("checkpoint: data length mismatch");
  ClassifierHead h;
  json head(data.begin(), data.begin() + M * M);
  h.Gw = detail::matrix_from_flat(head, M, M);
  h.Gb.resize(M);
  for (Eigen::Index i = 0; i < M; ++i) h.Gb(i) = data[M * M + i].get<double>();
  h.floor_B = j.at("shapes").at("floor_B");
  h.bound = j.at("shapes").at("bound");
  return h;
}

// Joint files: {"p": [[row-major probabilities]], "statistic": [t per x]}

struct JointFile {
  DiscreteJoint joint;
  Statistic statistic;
  bool has_statistic = false;
};

inline JointFile load_joint_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open joint file: " + path);
  json j = json::parse(in);
  const json& rows = j.at("p");
  if (rows.empty()) throw std::invalid_argument("joint file: empty table");
  Eigen::Index nx = rows.size(), ny = rows[0].size();
  Eigen::MatrixXd p(nx, ny);
  for (Eigen::Index i = 0; i < nx; ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != ny)
      throw std::invalid_argument("joint file: ragged rows");
    for (Eigen::Index k = 0; k < ny; ++k) p(i, k) = rows[i][k].get<double>();
  }
  JointFile out;
  out.joint = DiscreteJoint(p);
  if (j.contains("statistic")) {
    out.has_statistic = true;
    out.statistic.map = j.at("statistic").get<std::vector<int>>();
    int cod = 0;
    for (int v : out.statistic.map) cod = std::max(cod, v + 1);
    out.statistic.codomain = cod;
    out.statistic.validate(nx);
  } else {
    out.statistic = Statistic::identity(static_cast<int>(nx));
    out.has_statistic = false;
  }
  return out;
}

inline void save_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace sufflab
