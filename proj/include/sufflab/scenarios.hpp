#pragma once

#include <cmath>
#include <stdexcept>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/QR>

#include "sufflab/discrete.hpp"
#include "sufflab/encoders.hpp"
#include "sufflab/losses.hpp"
#include "sufflab/rng.hpp"

namespace sufflab {

/// Gaussian sample with a noisy shared signal block: views keep the first s
/// coordinates up to N(0, sigma1^2) noise and replace the tail with fresh
/// standard normal noise. Downstream labels are y = <x, theta*> + N(0, sigma^2).
struct NoisySubspace {
  int d = 100;
  int s = 10;
  double sigma1 = 1.0;  // augmentation noise on the signal block
  double sigma = 1.0;   // label noise
  Eigen::VectorXd theta_star;

  static NoisySubspace make(int d, int s, double sigma1, double sigma) {
    if (s < 1 || s >= d) throw std::invalid_argument("NoisySubspace: need 1 <= s < d");
    NoisySubspace sc{d, s, sigma1, sigma, Eigen::VectorXd::Zero(d)};
    sc.theta_star.head(s).setConstant(1.0 / std::sqrt(static_cast<double>(s)));
    return sc;
  }
};

/// Projected-and-renormalized Gaussian views on the product of unit spheres
/// spanned by the two halves of an orthogonal U. The density ratio of a view
/// pair is proportional to exp(kappa <z1, U1 U1^T z2>).
struct VmfHalves {
  int d = 20;
  int p = 10;
  double sigma = 2.0;
  Eigen::MatrixXd U;  // d x d orthogonal, first p columns span the kept half
  Eigen::VectorXd theta_star;

  double kappa() const { return p / (sigma * sigma * (sigma * sigma + 2.0)); }

  Eigen::MatrixXd U1() const { return U.leftCols(p); }
  Eigen::MatrixXd U2() const { return U.rightCols(d - p); }

  static VmfHalves make(int d, double sigma, bool coordinate_split, Rng& rng) {
    if (d < 2 || d % 2 != 0) throw std::invalid_argument("VmfHalves: d must be even");
    VmfHalves sc;
    sc.d = d;
    sc.p = d / 2;
    sc.sigma = sigma;
    if (coordinate_split) {
      sc.U = Eigen::MatrixXd::Identity(d, d);
    } else {
      Eigen::MatrixXd g = rng.normal_matrix(d, d);
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
      sc.U = qr.householderQ();
    }
    sc.theta_star = sc.U.col(0);
    return sc;
  }
};

/// M topics over an S-word vocabulary with uniform topic and word marginals;
/// a sample is a conditionally independent word pair and the augmentation
/// drops one word at random. floor_B records -log min P_c(y|s).
struct TopicModel {
  int M = 3;
  int S = 12;
  Eigen::MatrixXd cond;  // M x S rows P_c(s | y), each row sums to 1
  double floor_B = 0.0;

  Eigen::VectorXd prior() const {
    return Eigen::VectorXd::Constant(M, 1.0 / M);
  }

  /// P_c(y | s) = P_c(s | y) (1/M) / (1/S).
  Eigen::MatrixXd posterior() const {
    return cond * (static_cast<double>(S) / M);
  }
};

using Scenario = std::variant<NoisySubspace, VmfHalves, TopicModel>;

inline int view_dim(const Scenario& sc) {
  if (auto* ns = std::get_if<NoisySubspace>(&sc)) return ns->d;
  if (auto* vm = std::get_if<VmfHalves>(&sc)) return vm->d;
  return std::get<TopicModel>(sc).S;
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

/// Draw a positive conditional table, Sinkhorn-normalize the joint P(y, s) to
/// uniform marginals, then mix toward the uniform joint just enough to lift
/// min P_c(y|s) to exp(-B). Mixing keeps both marginals exactly uniform.
inline TopicModel build_topic_model(int M, int S, double B, Rng& rng) {
  if (S < 4 * M) throw std::invalid_argument("build_topic_model: need S >= 4M");
  if (B <= std::log(static_cast<double>(M)))
    throw std::invalid_argument("build_topic_model: need B > log M");
  Eigen::MatrixXd joint(M, S);
  for (Eigen::Index i = 0; i < joint.size(); ++i)
    joint.data()[i] = rng.uniform(0.2, 1.8);
  joint /= joint.sum();
  const double row_target = 1.0 / M, col_target = 1.0 / S;
  bool converged = false;
  for (int sweep = 0; sweep < 10000; ++sweep) {
    for (int y = 0; y < M; ++y) joint.row(y) *= row_target / joint.row(y).sum();
    for (int s = 0; s < S; ++s) joint.col(s) *= col_target / joint.col(s).sum();
    double dev = 0.0;
    for (int y = 0; y < M; ++y)
      dev = std::max(dev, std::abs(joint.row(y).sum() - row_target));
    for (int s = 0; s < S; ++s)
      dev = std::max(dev, std::abs(joint.col(s).sum() - col_target));
    if (dev <= 1e-14) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw std::runtime_error("build_topic_model: sinkhorn did not converge");

  // P_c(y|s) = joint * S given uniform word marginal
  double floor = std::exp(-B);
  double pmin = (joint * S).minCoeff();
  if (pmin < floor) {
    double lam = (floor - pmin) / (1.0 / M - pmin);
    joint = (1.0 - lam) * joint +
            lam * Eigen::MatrixXd::Constant(M, S, 1.0 / (M * S));
  }
  for (int y = 0; y < M; ++y)
    if (std::abs(joint.row(y).sum() - row_target) > 1e-12)
      throw std::runtime_error("build_topic_model: row marginal drifted");
  for (int s = 0; s < S; ++s)
    if (std::abs(joint.col(s).sum() - col_target) > 1e-12)
      throw std::runtime_error("build_topic_model: column marginal drifted");

  TopicModel tm;
  tm.M = M;
  tm.S = S;
  tm.cond = joint * M;  // P_c(s|y)
  tm.floor_B = -std::log((joint * S).minCoeff());
  return tm;
}

// ---------------------------------------------------------------------------
// Exact topic-model quantities
// ---------------------------------------------------------------------------

/// Density ratio P(z1, z2) / (P(z1) P(z2)) of augmented topic views:
///   (1/2) sum_y P_c(y|z1) P_c(y|z2) / P(y) + (S/2) 1{z1 = z2}.
inline double topic_density_ratio(const TopicModel& tm, int a, int b) {
  Eigen::MatrixXd post = tm.posterior();
  double acc = 0.0;
  for (int y = 0; y < tm.M; ++y) acc += post(y, a) * post(y, b) * tm.M;
  return 0.5 * acc + (a == b ? 0.5 * tm.S : 0.0);
}

/// Exact S x S joint of a view pair, computed by direct enumeration over
/// (topic, word pair, dropout choices) and cross-checked against the closed
/// ratio formula times the uniform product marginals (must agree to 1e-12).
inline DiscreteJoint topic_joint_exact(const TopicModel& tm) {
  const int S = tm.S;
  Eigen::MatrixXd p1 = Eigen::MatrixXd::Zero(S, S);
  for (int y = 0; y < tm.M; ++y)
    for (int x1 = 0; x1 < S; ++x1)
      for (int x2 = 0; x2 < S; ++x2) {
        double w = (1.0 / tm.M) * tm.cond(y, x1) * tm.cond(y, x2) * 0.25;
        int words[2] = {x1, x2};
        for (int c1 = 0; c1 < 2; ++c1)
          for (int c2 = 0; c2 < 2; ++c2) p1(words[c1], words[c2]) += w;
      }
  Eigen::MatrixXd post = tm.posterior();
  for (int a = 0; a < S; ++a)
    for (int b = 0; b < S; ++b) {
      double ratio = topic_density_ratio(tm, a, b);
      double p2 = ratio / (static_cast<double>(S) * S);
      if (std::abs(p1(a, b) - p2) > 1e-12)
        throw std::runtime_error("topic_joint_exact: enumeration and ratio formula disagree");
    }
  return DiscreteJoint(p1);
}

/// The M x S gold representation: column j is P_c(.|word j) / sqrt(prior).
inline Eigen::MatrixXd gold_representation(const TopicModel& tm) {
  return tm.posterior() * std::sqrt(static_cast<double>(tm.M));
}

/// The augmented-linear encoder realizing the optimal topic score: with
/// W = E*/sqrt(2) and w = sqrt(S/2), <f(z1), f(z2)> equals the density ratio.
inline AugLinearEncoder gold_encoder(const TopicModel& tm) {
  Eigen::MatrixXd W = gold_representation(tm) / std::sqrt(2.0);
  double w = std::sqrt(tm.S / 2.0);
  double need = std::max(W.rowwise().norm().maxCoeff(),
                         std::abs(w) / std::sqrt(static_cast<double>(tm.S)));
  return AugLinearEncoder(std::move(W), w, std::max(need, static_cast<double>(tm.M)));
}

// ---------------------------------------------------------------------------
// Samplers
// ---------------------------------------------------------------------------

namespace detail {

inline void noisy_subspace_view(const NoisySubspace& sc, const Eigen::VectorXd& x,
                                Rng& rng, Eigen::Ref<Eigen::VectorXd> out) {
  for (int i = 0; i < sc.s; ++i) out(i) = x(i) + sc.sigma1 * rng.normal();
  for (int i = sc.s; i < sc.d; ++i) out(i) = rng.normal();
}

inline void vmf_view(const VmfHalves& sc, const Eigen::VectorXd& u1x, Rng& rng,
                     Eigen::Ref<Eigen::VectorXd> out) {
  double root_p = std::sqrt(static_cast<double>(sc.p));
  Eigen::VectorXd v1 = u1x + (sc.sigma / root_p) * rng.normal_vector(sc.p);
  Eigen::VectorXd v2 = (sc.sigma / root_p) * rng.normal_vector(sc.d - sc.p);
  v1.normalize();
  v2.normalize();
  out = sc.U.leftCols(sc.p) * v1 + sc.U.rightCols(sc.d - sc.p) * v2;
}

}  // namespace detail

/// n1 batches of K augmented-view pairs from a scenario.
inline PairBatchSet sample_pairs(const Scenario& sc, int n1, int K, Rng& rng) {
  if (n1 < 1 || K < 1) throw std::invalid_argument("sample_pairs: n1*K must be >= 1");
  PairBatchSet out;
  out.n1 = n1;
  out.K = K;
  const Eigen::Index n = static_cast<Eigen::Index>(n1) * K;
  const int dim = view_dim(sc);
  out.z1.setZero(dim, n);
  out.z2.setZero(dim, n);
  if (auto* ns = std::get_if<NoisySubspace>(&sc)) {
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd x = rng.normal_vector(ns->d);
      detail::noisy_subspace_view(*ns, x, rng, out.z1.col(i));
      detail::noisy_subspace_view(*ns, x, rng, out.z2.col(i));
    }
  } else if (auto* vm = std::get_if<VmfHalves>(&sc)) {
    double root_p = std::sqrt(static_cast<double>(vm->p));
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd x = rng.normal_vector(vm->d) / root_p;
      Eigen::VectorXd u1x = vm->U.leftCols(vm->p).transpose() * x;
      detail::vmf_view(*vm, u1x, rng, out.z1.col(i));
      detail::vmf_view(*vm, u1x, rng, out.z2.col(i));
    }
  } else {
    const TopicModel& tm = std::get<TopicModel>(sc);
    for (Eigen::Index i = 0; i < n; ++i) {
      int y = rng.uniform_int(tm.M);
      int words[2] = {rng.categorical(tm.cond.row(y).transpose()),
                      rng.categorical(tm.cond.row(y).transpose())};
      out.z1(words[rng.uniform_int(2)], i) = 1.0;
      out.z2(words[rng.uniform_int(2)], i) = 1.0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Closed-form log density ratios
// ---------------------------------------------------------------------------

/// log P(z1, z2) / (P(z1) P(z2)).
/// NoisySubspace: exact Gaussian log ratio over the shared block, normalizer
/// included. VmfHalves: kappa <z1, U1 U1^T z2> with the additive normalizer
/// deliberately omitted (consumers are invariant to constants).
/// TopicModel: exact, from the closed ratio formula.
inline double oracle_log_density_ratio(const Scenario& sc,
                                       const Eigen::VectorXd& z1,
                                       const Eigen::VectorXd& z2) {
  const int dim = view_dim(sc);
  if (z1.size() != dim || z2.size() != dim)
    throw std::invalid_argument("oracle_log_density_ratio: view dimension mismatch");
  if (auto* ns = std::get_if<NoisySubspace>(&sc)) {
    double a = 1.0 + ns->sigma1 * ns->sigma1;
    double det = a * a - 1.0;
    double acc = 0.0;
    for (int i = 0; i < ns->s; ++i) {
      double u = z1(i), v = z2(i);
      double quad = (a * (u * u + v * v) - 2.0 * u * v) / det;
      acc += -0.5 * quad + (u * u + v * v) / (2.0 * a) - 0.5 * std::log(det / (a * a));
    }
    return acc;
  }
  if (auto* vm = std::get_if<VmfHalves>(&sc)) {
    Eigen::MatrixXd u1 = vm->U1();
    return vm->kappa() * (u1.transpose() * z1).dot(u1.transpose() * z2);
  }
  const TopicModel& tm = std::get<TopicModel>(sc);
  int a = -1, b = -1;
  z1.maxCoeff(&a);
  z2.maxCoeff(&b);
  return std::log(topic_density_ratio(tm, a, b));
}

// ---------------------------------------------------------------------------
// Downstream samples
// ---------------------------------------------------------------------------

struct RegressionSet {
  Eigen::MatrixXd x;  // d x m raw samples
  Eigen::VectorXd y;
};

struct TopicSet {
  std::vector<std::array<int, 2>> x;  // word pairs
  std::vector<int> z;                 // dropout view of each pair
  std::vector<int> y;                 // class labels
};

inline RegressionSet sample_downstream_regression(const Scenario& sc, int m,
                                                  Rng& rng) {
  if (m < 1) throw std::invalid_argument("sample_downstream_regression: m >= 1");
  RegressionSet out;
  if (auto* ns = std::get_if<NoisySubspace>(&sc)) {
    out.x = rng.normal_matrix(ns->d, m);
    out.y.resize(m);
    for (int i = 0; i < m; ++i)
      out.y(i) = out.x.col(i).dot(ns->theta_star) + ns->sigma * rng.normal();
    return out;
  }
  if (auto* vm = std::get_if<VmfHalves>(&sc)) {
    out.x = rng.normal_matrix(vm->d, m) / std::sqrt(static_cast<double>(vm->p));
    out.y.resize(m);
    for (int i = 0; i < m; ++i)
      out.y(i) = out.x.col(i).dot(vm->theta_star) + vm->sigma * rng.normal();
    return out;
  }
  throw std::invalid_argument("sample_downstream_regression: not a regression scenario");
}

inline TopicSet sample_downstream_topic(const TopicModel& tm, int m, Rng& rng) {
  if (m < 1) throw std::invalid_argument("sample_downstream_topic: m >= 1");
  TopicSet out;
  out.x.reserve(m);
  out.z.reserve(m);
  out.y.reserve(m);
  for (int i = 0; i < m; ++i) {
    int y = rng.uniform_int(tm.M);
    std::array<int, 2> words = {rng.categorical(tm.cond.row(y).transpose()),
                                rng.categorical(tm.cond.row(y).transpose())};
    out.x.push_back(words);
    out.z.push_back(words[rng.uniform_int(2)]);
    out.y.push_back(y);
  }
  return out;
}

inline Eigen::VectorXd one_hot(int index, int dim) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
  v(index) = 1.0;
  return v;
}

}  // namespace sufflab
