#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/QR>

#include "sufflab/discrete.hpp"
#include "sufflab/scenarios.hpp"

namespace sufflab {

/// Truncated linear regression head: clamp(<feature, eta>, -B, B).
struct LinearHead {
  Eigen::VectorXd eta;
  double trunc_B = 1e12;

  double predict(const Eigen::VectorXd& feature) const {
    return std::clamp(feature.dot(eta), -trunc_B, trunc_B);
  }
};

/// Minimum-norm least squares via a rank-revealing orthogonal decomposition.
/// X is m x p (rows are samples).
inline Eigen::VectorXd fit_ols(const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& y) {
  if (X.rows() != y.size() || X.rows() < 1)
    throw std::invalid_argument("fit_ols: shape mismatch");
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(X);
  return cod.solve(y);
}

struct McEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

/// Monte-Carlo excess regression risk E[(y - head(f(.)))^2] - sigma^2, with
/// the encoder applied to g(x) (augmented = true) or to x directly.
template <class Encoder>
McEstimate regression_excess_risk(const Scenario& sc, const Encoder& enc,
                                  const LinearHead& head, int eval_size,
                                  Rng& rng, bool augmented = false) {
  RegressionSet eval = sample_downstream_regression(sc, eval_size, rng);
  Eigen::MatrixXd inputs;
  if (augmented) {
    inputs.resize(view_dim(sc), eval_size);
    if (auto* ns = std::get_if<NoisySubspace>(&sc)) {
      for (int i = 0; i < eval_size; ++i)
        detail::noisy_subspace_view(*ns, eval.x.col(i), rng, inputs.col(i));
    } else if (auto* vm = std::get_if<VmfHalves>(&sc)) {
      for (int i = 0; i < eval_size; ++i) {
        Eigen::VectorXd u1x = vm->U.leftCols(vm->p).transpose() * eval.x.col(i);
        detail::vmf_view(*vm, u1x, rng, inputs.col(i));
      }
    } else {
      throw std::invalid_argument("regression_excess_risk: not a regression scenario");
    }
  } else {
    inputs = eval.x;
  }
  Eigen::MatrixXd feats = enc.forward_batch(inputs);
  double mean = 0.0, m2 = 0.0;
  for (int i = 0; i < eval_size; ++i) {
    double pred = std::clamp(feats.col(i).dot(head.eta), -head.trunc_B, head.trunc_B);
    double se = (eval.y(i) - pred) * (eval.y(i) - pred);
    double delta = se - mean;
    mean += delta / (i + 1);
    m2 += delta * (se - mean);
  }
  double noise = 0.0;
  if (auto* ns = std::get_if<NoisySubspace>(&sc)) noise = ns->sigma;
  else if (auto* vm = std::get_if<VmfHalves>(&sc)) noise = vm->sigma;
  McEstimate out;
  out.value = mean - noise * noise;
  out.stderr_ = eval_size > 1 ? std::sqrt(m2 / (eval_size - 1) / eval_size) : 0.0;
  return out;
}

/// Monte-Carlo estimate of the regression augmentation error
///   eps_G = E[ <g(x) - x, theta*>^2 ].
inline McEstimate augmentation_error_regression(const Scenario& sc, int mc_size,
                                                Rng& rng) {
  auto* ns = std::get_if<NoisySubspace>(&sc);
  if (!ns)
    throw std::invalid_argument("augmentation_error_regression: needs NoisySubspace");
  double mean = 0.0, m2 = 0.0;
  Eigen::VectorXd z(ns->d);
  for (int i = 0; i < mc_size; ++i) {
    Eigen::VectorXd x = rng.normal_vector(ns->d);
    detail::noisy_subspace_view(*ns, x, rng, z);
    double v = (z - x).dot(ns->theta_star);
    double sq = v * v;
    double delta = sq - mean;
    mean += delta / (i + 1);
    m2 += delta * (sq - mean);
  }
  McEstimate out;
  out.value = mean;
  out.stderr_ = mc_size > 1 ? std::sqrt(m2 / (mc_size - 1) / mc_size) : 0.0;
  return out;
}

/// Closed form of eps_G for NoisySubspace:
/// sigma1^2 ||theta_head||^2 + 2 ||theta_tail||^2.
inline double augmentation_error_regression_closed_form(const NoisySubspace& ns) {
  double head = ns.theta_star.head(ns.s).squaredNorm();
  double tail = ns.theta_star.tail(ns.d - ns.s).squaredNorm();
  return ns.sigma1 * ns.sigma1 * head + 2.0 * tail;
}

// ---------------------------------------------------------------------------
// Classification heads
// ---------------------------------------------------------------------------

/// Constrained softmax classifier: softmax(log trun(Gw u + Gb)) with
/// trun(x) = clamp(x, exp(-floor_B), 1).
struct ClassifierHead {
  Eigen::MatrixXd Gw;  // M x M
  Eigen::VectorXd Gb;  // M
  double floor_B = 3.0;
  double bound = 10.0;  // B_Gamma

  Eigen::VectorXd predict(const Eigen::VectorXd& feature) const {
    Eigen::VectorXd v = Gw * feature + Gb;
    double lo = std::exp(-floor_B);
    Eigen::VectorXd logits =
        v.unaryExpr([&](double x) { return std::log(std::clamp(x, lo, 1.0)); });
    Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
    return e / e.sum();
  }
};

namespace detail {

inline void project_classifier(ClassifierHead& head) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      head.Gw, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::VectorXd sv = svd.singularValues();
  if (sv.size() > 0 && sv(0) > head.bound) {
    for (Eigen::Index i = 0; i < sv.size(); ++i) sv(i) = std::min(sv(i), head.bound);
    head.Gw = svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose();
  }
  double n = head.Gb.norm();
  if (n > head.bound) head.Gb *= head.bound / n;
}

}  // namespace detail

/// Projected full-batch gradient descent on the empirical cross entropy
/// -(1/m) sum log softmax(log trun(Gw u_i + Gb))_{y_i}. The clamp passes no
/// gradient outside [exp(-B), 1]; Gw is singular-value clipped and Gb norm
/// clipped after every step.
inline ClassifierHead fit_classifier(const Eigen::MatrixXd& feats /* m x M */,
                                     const std::vector<int>& labels,
                                     int n_classes, double B_Gamma, double B,
                                     int steps = 2000, double lr = 0.05) {
  const Eigen::Index m = feats.rows();
  if (m < 1 || static_cast<Eigen::Index>(labels.size()) != m)
    throw std::invalid_argument("fit_classifier: shape mismatch");
  for (int y : labels)
    if (y < 0 || y >= n_classes)
      throw std::invalid_argument("fit_classifier: label out of range");
  ClassifierHead head;
  head.Gw = Eigen::MatrixXd::Zero(n_classes, feats.cols());
  head.Gb = Eigen::VectorXd::Constant(n_classes, 0.5);  // inside trun's window
  head.floor_B = B;
  head.bound = B_Gamma;
  const double lo = std::exp(-B);
  for (int step = 0; step < steps; ++step) {
    Eigen::MatrixXd gW = Eigen::MatrixXd::Zero(n_classes, feats.cols());
    Eigen::VectorXd gB = Eigen::VectorXd::Zero(n_classes);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      Eigen::VectorXd u = feats.row(i).transpose();
      Eigen::VectorXd v = head.Gw * u + head.Gb;
      Eigen::VectorXd t = v.unaryExpr([&](double x) { return std::clamp(x, lo, 1.0); });
      Eigen::VectorXd logits = t.array().log();
      double mx = logits.maxCoeff();
      Eigen::VectorXd e = (logits.array() - mx).exp();
      Eigen::VectorXd prob = e / e.sum();
      loss -= logits(labels[i]) - (mx + std::log(e.sum()));
      Eigen::VectorXd dlogits = prob;
      dlogits(labels[i]) -= 1.0;
      // d logits / d v = 1/t inside the window, 0 at the clamps
      Eigen::VectorXd dv(n_classes);
      for (int k = 0; k < n_classes; ++k)
        dv(k) = (v(k) >= lo && v(k) <= 1.0) ? dlogits(k) / t(k) : 0.0;
      gW += dv * u.transpose();
      gB += dv;
    }
    loss /= m;
    if (!std::isfinite(loss))
      throw std::runtime_error("fit_classifier: non-finite loss");
    head.Gw -= (lr / m) * gW;
    head.Gb -= (lr / m) * gB;
    detail::project_classifier(head);
  }
  return head;
}

// ---------------------------------------------------------------------------
// Exact topic-model risk functionals
// ---------------------------------------------------------------------------

namespace detail {

/// Posterior P(y | x) over topics for a word pair x = (a, b).
inline Eigen::VectorXd topic_pair_posterior(const TopicModel& tm, int a, int b) {
  Eigen::VectorXd w(tm.M);
  for (int y = 0; y < tm.M; ++y) w(y) = tm.cond(y, a) * tm.cond(y, b);
  return w / w.sum();
}

}  // namespace detail

/// Exact E over (x, y, dropout) of KL(P(y|x) || head_column(z)) where
/// head_table column z is the predicted class distribution for view z.
inline double classification_risk_kl_table(const TopicModel& tm,
                                           const Eigen::MatrixXd& head_table) {
  if (head_table.rows() != tm.M || head_table.cols() != tm.S)
    throw std::invalid_argument("classification_risk_kl_table: shape mismatch");
  double acc = 0.0;
  for (int y = 0; y < tm.M; ++y)
    for (int a = 0; a < tm.S; ++a)
      for (int b = 0; b < tm.S; ++b) {
        double w = (1.0 / tm.M) * tm.cond(y, a) * tm.cond(y, b);
        if (w <= 0.0) continue;
        Eigen::VectorXd post = detail::topic_pair_posterior(tm, a, b);
        acc += 0.5 * w * (divergence(post, head_table.col(a), DivKind::KL) +
                          divergence(post, head_table.col(b), DivKind::KL));
      }
  return acc;
}

/// Per-view prediction table of a head over encoder features (feature_table
/// column z = f(one_hot(z))).
inline Eigen::MatrixXd head_table(const TopicModel& tm,
                                  const Eigen::MatrixXd& feature_table,
                                  const ClassifierHead& head) {
  Eigen::MatrixXd q(tm.M, tm.S);
  for (int z = 0; z < tm.S; ++z) q.col(z) = head.predict(feature_table.col(z));
  return q;
}

template <class Encoder>
double classification_risk_kl(const TopicModel& tm, const Encoder& enc,
                              const ClassifierHead& head, int feature_dim) {
  Eigen::MatrixXd feats(feature_dim, tm.S);
  for (int z = 0; z < tm.S; ++z)
    feats.col(z) = enc.forward(one_hot(z, tm.S)).head(feature_dim);
  return classification_risk_kl_table(tm, head_table(tm, feats, head));
}

/// Group views by their (quantized) feature vectors; used by the Bayes head
/// and for the statistic induced by an encoder on the view space.
inline Statistic feature_statistic(const Eigen::MatrixXd& feature_table,
                                   double quantum = 1e-9) {
  Statistic t;
  t.map.resize(feature_table.cols());
  std::map<std::vector<long long>, int> groups;
  for (Eigen::Index z = 0; z < feature_table.cols(); ++z) {
    std::vector<long long> key(feature_table.rows());
    for (Eigen::Index i = 0; i < feature_table.rows(); ++i)
      key[i] = llround(feature_table(i, z) / quantum);
    auto [it, inserted] = groups.emplace(std::move(key), static_cast<int>(groups.size()));
    t.map[z] = it->second;
  }
  t.codomain = static_cast<int>(groups.size());
  return t;
}

/// The measurable head P(y | f(z)): group views by feature and return the
/// conditional class distribution of each group, as an M x S table.
inline Eigen::MatrixXd bayes_head_table(const TopicModel& tm,
                                        const Eigen::MatrixXd& feature_table) {
  Statistic t = feature_statistic(feature_table);
  // P(y, z) = (1/M) P_c(z | y): a single dropout view is P_c-distributed
  Eigen::MatrixXd joint_yz = tm.cond / tm.M;  // M x S
  Eigen::MatrixXd group_mass = Eigen::MatrixXd::Zero(tm.M, t.codomain);
  for (int z = 0; z < tm.S; ++z) group_mass.col(t.map[z]) += joint_yz.col(z);
  Eigen::MatrixXd out(tm.M, tm.S);
  for (int z = 0; z < tm.S; ++z) {
    Eigen::VectorXd g = group_mass.col(t.map[z]);
    out.col(z) = g / g.sum();
  }
  return out;
}

template <class Encoder>
Eigen::MatrixXd encoder_feature_table(const TopicModel& tm, const Encoder& enc,
                                      int feature_dim) {
  Eigen::MatrixXd feats(feature_dim, tm.S);
  for (int z = 0; z < tm.S; ++z)
    feats.col(z) = enc.forward(one_hot(z, tm.S)).head(feature_dim);
  return feats;
}

/// Exact symmetric 2-Renyi augmentation error
///   eps_G_cls = E[ D2(P(y|x) || P(y|z)) + D2(P(y|z) || P(y|x)) ].
inline double augmentation_error_classification(const TopicModel& tm) {
  Eigen::MatrixXd post_word = tm.posterior();  // M x S: P(y | z)
  double acc = 0.0;
  for (int y = 0; y < tm.M; ++y)
    for (int a = 0; a < tm.S; ++a)
      for (int b = 0; b < tm.S; ++b) {
        double w = (1.0 / tm.M) * tm.cond(y, a) * tm.cond(y, b);
        if (w <= 0.0) continue;
        Eigen::VectorXd px = detail::topic_pair_posterior(tm, a, b);
        for (int word : {a, b}) {
          Eigen::VectorXd pz = post_word.col(word);
          acc += 0.5 * w * (divergence(px, pz, DivKind::Renyi, 2.0) +
                            divergence(pz, px, DivKind::Renyi, 2.0));
        }
      }
  return acc;
}

}  // namespace sufflab
