#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sufflab/discrete.hpp"

namespace sufflab {

/// n1 batches of K augmented-view pairs, stored column-per-view. Batch i pair
/// j lives in column i*K + j.
struct PairBatchSet {
  Eigen::MatrixXd z1, z2;
  int n1 = 0;
  int K = 0;

  Eigen::Index total() const { return static_cast<Eigen::Index>(n1) * K; }

  void validate() const {
    if (n1 < 1 || K < 1) throw std::invalid_argument("PairBatchSet: empty");
    if (z1.cols() != total() || z2.cols() != total() || z1.rows() != z2.rows())
      throw std::invalid_argument("PairBatchSet: shape mismatch");
  }
};

/// Link function tau applied to inner products of features.
struct LinkFunction {
  enum class Kind { Identity, Scale, ExpTemperature };
  Kind kind = Kind::Identity;
  double param = 1.0;

  static LinkFunction identity() { return {Kind::Identity, 1.0}; }
  static LinkFunction scale(double kappa) {
    if (kappa <= 0.0) throw std::invalid_argument("LinkFunction: kappa <= 0");
    return {Kind::Scale, kappa};
  }
  static LinkFunction exp_temperature(double t) {
    if (t <= 0.0) throw std::invalid_argument("LinkFunction: temperature <= 0");
    return {Kind::ExpTemperature, t};
  }

  double value(double x) const {
    switch (kind) {
      case Kind::Identity: return x;
      case Kind::Scale: return param * x;
      case Kind::ExpTemperature: return std::exp(x / param);
    }
    return x;
  }

  double deriv(double x) const {
    switch (kind) {
      case Kind::Identity: return 1.0;
      case Kind::Scale: return param;
      case Kind::ExpTemperature: return std::exp(x / param) / param;
    }
    return 1.0;
  }
};

enum class LossKind { InfoNce, ChiSq };

enum class ChiSqForm { Auto, Naive, Reduced };

// ---------------------------------------------------------------------------
// Score-level losses on one K x K batch score matrix s(j, l) = S(z1_j, z2_l)
// ---------------------------------------------------------------------------

namespace detail {

inline double logsumexp(const Eigen::VectorXd& v) {
  double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace detail

/// Sum over anchors of the symmetrized InfoNCE terms of one batch
/// (row and column softmax directions); divide by 2 n for the empirical risk.
inline double infonce_batch_sum(const Eigen::MatrixXd& s) {
  const Eigen::Index K = s.rows();
  if (s.cols() != K) throw std::invalid_argument("infonce_batch_sum: not square");
  double acc = 0.0;
  for (Eigen::Index j = 0; j < K; ++j) {
    acc += -s(j, j) + detail::logsumexp(s.row(j).transpose());
    acc += -s(j, j) + detail::logsumexp(s.col(j));
  }
  return acc;
}

/// d(infonce_batch_sum)/ds.
inline Eigen::MatrixXd infonce_batch_grad(const Eigen::MatrixXd& s) {
  const Eigen::Index K = s.rows();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(K, K);
  for (Eigen::Index j = 0; j < K; ++j) {
    g(j, j) -= 2.0;
    {
      Eigen::VectorXd r = s.row(j).transpose();
      double m = r.maxCoeff();
      Eigen::VectorXd e = (r.array() - m).exp();
      g.row(j) += (e / e.sum()).transpose();
    }
    {
      Eigen::VectorXd c = s.col(j);
      double m = c.maxCoeff();
      Eigen::VectorXd e = (c.array() - m).exp();
      g.col(j) += e / e.sum();
    }
  }
  return g;
}

/// Sum over anchors of the chi-squared estimator terms of one batch:
/// the triple-indexed squared differences, the mean over non-paired scores,
/// minus the paired score; divide by n for the empirical risk.
///
/// The naive triple sum is the correctness oracle; the algebraic O(K)
/// reduction via row sums is the default for K > 16 and must agree to 1e-12.
inline double chisq_batch_sum(const Eigen::MatrixXd& s,
                              ChiSqForm form = ChiSqForm::Auto) {
  const Eigen::Index K = s.rows();
  if (s.cols() != K) throw std::invalid_argument("chisq_batch_sum: not square");
  if (K < 3) throw std::invalid_argument("chisq_batch_sum: needs K >= 3");
  bool naive = form == ChiSqForm::Naive || (form == ChiSqForm::Auto && K <= 16);
  const double quad_coef = 1.0 / (4.0 * (K - 1) * (K - 2));
  double acc = 0.0;
  for (Eigen::Index j = 0; j < K; ++j) {
    double quad = 0.0;
    if (naive) {
      for (Eigen::Index k = 0; k < K; ++k) {
        if (k == j) continue;
        for (Eigen::Index l = 0; l < K; ++l) {
          if (l == j || l == k) continue;
          double d = s(j, k) - s(j, l);
          quad += d * d;
        }
      }
      quad *= quad_coef;
    } else {
      double sum = s.row(j).sum() - s(j, j);
      double sumsq = s.row(j).squaredNorm() - s(j, j) * s(j, j);
      quad = 2.0 * ((K - 1) * sumsq - sum * sum) * quad_coef;
    }
    double lin = (s.row(j).sum() - s(j, j)) / (K - 1);
    acc += quad + lin - s(j, j);
  }
  return acc;
}

/// d(chisq_batch_sum)/ds (same value for either form).
inline Eigen::MatrixXd chisq_batch_grad(const Eigen::MatrixXd& s) {
  const Eigen::Index K = s.rows();
  if (K < 3) throw std::invalid_argument("chisq_batch_grad: needs K >= 3");
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(K, K);
  for (Eigen::Index j = 0; j < K; ++j) {
    double offsum = s.row(j).sum() - s(j, j);
    for (Eigen::Index k = 0; k < K; ++k) {
      if (k == j) continue;
      // quad: ((K-1) s_jk - offsum) / ((K-1)(K-2)), plus the 1/(K-1) mean term
      g(j, k) += ((K - 1) * s(j, k) - offsum) / ((K - 1.0) * (K - 2.0));
      g(j, k) += 1.0 / (K - 1.0);
    }
    g(j, j) -= 1.0;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Encoder-level empirical losses
// ---------------------------------------------------------------------------

namespace detail {

template <class Encoder>
Eigen::MatrixXd batch_scores(const Eigen::MatrixXd& f1, const Eigen::MatrixXd& f2,
                             const LinkFunction& link) {
  Eigen::MatrixXd raw = f1.transpose() * f2;
  return raw.unaryExpr([&](double x) { return link.value(x); });
}

}  // namespace detail

/// Empirical symmetrized InfoNCE risk over all batches (Eq.-(3)-style average
/// with weight 1/(2n)). Requires K >= 2.
template <class Encoder>
double infonce_empirical(const PairBatchSet& batches, const Encoder& enc,
                         const LinkFunction& link) {
  batches.validate();
  if (batches.K < 2) throw std::invalid_argument("infonce_empirical: K must be >= 2");
  Eigen::MatrixXd F1 = enc.forward_batch(batches.z1);
  Eigen::MatrixXd F2 = enc.forward_batch(batches.z2);
  double acc = 0.0;
  for (int i = 0; i < batches.n1; ++i) {
    Eigen::MatrixXd s = detail::batch_scores<Encoder>(
        F1.middleCols(i * batches.K, batches.K),
        F2.middleCols(i * batches.K, batches.K), link);
    acc += infonce_batch_sum(s);
  }
  return acc / (2.0 * batches.total());
}

/// Empirical unbiased chi-squared contrastive risk (average with weight 1/n).
/// Requires K >= 3.
template <class Encoder>
double chisq_empirical(const PairBatchSet& batches, const Encoder& enc,
                       const LinkFunction& link,
                       ChiSqForm form = ChiSqForm::Auto) {
  batches.validate();
  if (batches.K < 3) throw std::invalid_argument("chisq_empirical: K must be >= 3");
  Eigen::MatrixXd F1 = enc.forward_batch(batches.z1);
  Eigen::MatrixXd F2 = enc.forward_batch(batches.z2);
  double acc = 0.0;
  for (int i = 0; i < batches.n1; ++i) {
    Eigen::MatrixXd s = detail::batch_scores<Encoder>(
        F1.middleCols(i * batches.K, batches.K),
        F2.middleCols(i * batches.K, batches.K), link);
    acc += chisq_batch_sum(s, form);
  }
  return acc / static_cast<double>(batches.total());
}

/// Loss value and exact reverse-mode gradient with respect to all encoder
/// parameters. Batches are reduced in fixed index order, so results are
/// bit-identical run to run.
template <class Encoder>
std::pair<double, Eigen::VectorXd> loss_and_grad(const PairBatchSet& batches,
                                                 const Encoder& enc,
                                                 const LinkFunction& link,
                                                 LossKind kind) {
  batches.validate();
  if (kind == LossKind::InfoNce && batches.K < 2)
    throw std::invalid_argument("loss_and_grad: infonce needs K >= 2");
  if (kind == LossKind::ChiSq && batches.K < 3)
    throw std::invalid_argument("loss_and_grad: chisq needs K >= 3");
  const int K = batches.K;
  const double scale = kind == LossKind::InfoNce
                           ? 1.0 / (2.0 * batches.total())
                           : 1.0 / static_cast<double>(batches.total());
  Eigen::MatrixXd F1 = enc.forward_batch(batches.z1);
  Eigen::MatrixXd F2 = enc.forward_batch(batches.z2);
  Eigen::MatrixXd U1 = Eigen::MatrixXd::Zero(F1.rows(), F1.cols());
  Eigen::MatrixXd U2 = Eigen::MatrixXd::Zero(F2.rows(), F2.cols());
  double acc = 0.0;
  for (int i = 0; i < batches.n1; ++i) {
    auto f1 = F1.middleCols(i * K, K);
    auto f2 = F2.middleCols(i * K, K);
    Eigen::MatrixXd raw = f1.transpose() * f2;
    Eigen::MatrixXd s = raw.unaryExpr([&](double x) { return link.value(x); });
    Eigen::MatrixXd gs;
    if (kind == LossKind::InfoNce) {
      acc += infonce_batch_sum(s);
      gs = infonce_batch_grad(s);
    } else {
      acc += chisq_batch_sum(s);
      gs = chisq_batch_grad(s);
    }
    Eigen::MatrixXd graw =
        gs.array() * raw.unaryExpr([&](double x) { return link.deriv(x); }).array();
    U1.middleCols(i * K, K) += f2 * graw.transpose();
    U2.middleCols(i * K, K) += f1 * graw;
  }
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(enc.param_count());
  enc.accumulate_grad(batches.z1, U1 * scale, grad);
  enc.accumulate_grad(batches.z2, U2 * scale, grad);
  return {acc * scale, std::move(grad)};
}

// ---------------------------------------------------------------------------
// Exact evaluators on finite joints
// ---------------------------------------------------------------------------

namespace detail {

// Recursive enumeration of E over y_2..y_K ~ py of
//   log( exp(s_anchor) + sum_j exp(s(x, y_j)) ) shifted by smax.
inline double infonce_negatives_expectation(const Eigen::VectorXd& row_exp,
                                            const Eigen::VectorXd& py,
                                            double anchor_exp, int remaining,
                                            double partial) {
  if (remaining == 0) return std::log(anchor_exp + partial);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < py.size(); ++j) {
    if (py(j) <= 0.0) continue;
    acc += py(j) * infonce_negatives_expectation(row_exp, py, anchor_exp,
                                                 remaining - 1,
                                                 partial + row_exp(j));
  }
  return acc;
}

inline double infonce_population_one_direction(const DiscreteJoint& joint,
                                               const Eigen::MatrixXd& s,
                                               int K) {
  Eigen::VectorXd py = joint.py();
  double smax = s.maxCoeff();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < joint.nx(); ++i) {
    Eigen::VectorXd row_exp =
        (s.row(i).transpose().array() - smax).exp().matrix();
    for (Eigen::Index j = 0; j < joint.ny(); ++j) {
      double w = joint.p()(i, j);
      if (w <= 0.0) continue;
      double inner = infonce_negatives_expectation(row_exp, py, row_exp(j),
                                                   K - 1, 0.0);
      acc += w * (-s(i, j) + smax + inner);
    }
  }
  return acc;
}

}  // namespace detail

/// Exact expected InfoNCE risk at batch size K on a finite joint, by nested
/// enumeration over the K - 1 independent negatives (both softmax
/// directions averaged). Cost is |X||Y| * |Y|^(K-1) per direction.
inline double infonce_population_exact(const DiscreteJoint& joint,
                                       const ScoreTable& score, int K,
                                       long long budget = 50'000'000) {
  if (K < 2) throw std::invalid_argument("infonce_population_exact: K >= 2");
  score.validate(joint.nx(), joint.ny());
  double cost = static_cast<double>(joint.nx()) * joint.ny() *
                (std::pow(static_cast<double>(joint.ny()), K - 1) +
                 std::pow(static_cast<double>(joint.nx()), K - 1));
  if (cost > static_cast<double>(budget))
    throw std::runtime_error("infonce_population_exact: enumeration budget exceeded");
  double row = detail::infonce_population_one_direction(joint, score.s, K);
  DiscreteJoint flipped(joint.p().transpose());
  double col = detail::infonce_population_one_direction(
      flipped, Eigen::MatrixXd(score.s.transpose()), K);
  return 0.5 * (row + col);
}

/// Exact expectation of the chi-squared batch estimator over all tuples of K
/// i.i.d. pairs from the joint, using the naive triple-sum form as the
/// oracle. Cost is (|X||Y|)^K.
inline double chisq_empirical_expectation_exact(const DiscreteJoint& joint,
                                                const ScoreTable& score, int K,
                                                long long budget = 50'000'000) {
  if (K < 3) throw std::invalid_argument("chisq_empirical_expectation_exact: K >= 3");
  score.validate(joint.nx(), joint.ny());
  const Eigen::Index cells = joint.nx() * joint.ny();
  if (std::pow(static_cast<double>(cells), K) > static_cast<double>(budget))
    throw std::runtime_error(
        "chisq_empirical_expectation_exact: enumeration budget exceeded");
  std::vector<Eigen::Index> pick(K, 0);
  Eigen::MatrixXd s(K, K);
  double acc = 0.0;
  while (true) {
    double w = 1.0;
    for (int a = 0; a < K; ++a) w *= joint.p()(pick[a] / joint.ny(), pick[a] % joint.ny());
    if (w > 0.0) {
      for (int a = 0; a < K; ++a)
        for (int b = 0; b < K; ++b)
          s(a, b) = score.s(pick[a] / joint.ny(), pick[b] % joint.ny());
      acc += w * chisq_batch_sum(s, ChiSqForm::Naive) / K;
    }
    int pos = K - 1;
    while (pos >= 0 && ++pick[pos] == cells) pick[pos--] = 0;
    if (pos < 0) break;
  }
  return acc;
}

}  // namespace sufflab
