#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "sufflab/rng.hpp"

namespace sufflab {

/// Two-layer ReLU network z -> W2 relu(W1 z + b1).
class MLPEncoder {
 public:
  Eigen::MatrixXd W1;  // hidden x d
  Eigen::VectorXd b1;  // hidden
  Eigen::MatrixXd W2;  // p x hidden

  MLPEncoder() = default;
  MLPEncoder(Eigen::MatrixXd w1, Eigen::VectorXd b, Eigen::MatrixXd w2)
      : W1(std::move(w1)), b1(std::move(b)), W2(std::move(w2)) {
    if (W1.rows() != b1.size() || W2.cols() != W1.rows())
      throw std::invalid_argument("MLPEncoder: inconsistent shapes");
  }

  /// W entries uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
  static MLPEncoder init(int d, int hidden, int p, Rng& rng) {
    MLPEncoder e;
    e.W1.resize(hidden, d);
    e.b1 = Eigen::VectorXd::Zero(hidden);
    e.W2.resize(p, hidden);
    double a1 = 1.0 / std::sqrt(static_cast<double>(d));
    for (Eigen::Index i = 0; i < e.W1.size(); ++i)
      e.W1.data()[i] = rng.uniform(-a1, a1);
    double a2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (Eigen::Index i = 0; i < e.W2.size(); ++i)
      e.W2.data()[i] = rng.uniform(-a2, a2);
    return e;
  }

  Eigen::Index input_dim() const { return W1.cols(); }
  Eigen::Index output_dim() const { return W2.rows(); }

  Eigen::VectorXd forward(const Eigen::VectorXd& z) const {
    if (z.size() != input_dim())
      throw std::invalid_argument("MLPEncoder::forward: dimension mismatch");
    return W2 * (W1 * z + b1).cwiseMax(0.0);
  }

  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& Z) const {
    if (Z.rows() != input_dim())
      throw std::invalid_argument("MLPEncoder::forward_batch: dimension mismatch");
    Eigen::MatrixXd h = (W1 * Z).colwise() + b1;
    return W2 * h.cwiseMax(0.0);
  }

  Eigen::Index param_count() const { return W1.size() + b1.size() + W2.size(); }

  Eigen::VectorXd params() const {
    Eigen::VectorXd p(param_count());
    Eigen::Index o = 0;
    p.segment(o, W1.size()) = Eigen::Map<const Eigen::VectorXd>(W1.data(), W1.size());
    o += W1.size();
    p.segment(o, b1.size()) = b1;
    o += b1.size();
    p.segment(o, W2.size()) = Eigen::Map<const Eigen::VectorXd>(W2.data(), W2.size());
    return p;
  }

  void set_params(const Eigen::VectorXd& p) {
    if (p.size() != param_count())
      throw std::invalid_argument("MLPEncoder::set_params: size mismatch");
    Eigen::Index o = 0;
    Eigen::Map<Eigen::VectorXd>(W1.data(), W1.size()) = p.segment(o, W1.size());
    o += W1.size();
    b1 = p.segment(o, b1.size());
    o += b1.size();
    Eigen::Map<Eigen::VectorXd>(W2.data(), W2.size()) = p.segment(o, W2.size());
  }

  /// Add the vector-Jacobian product for a batch of inputs Z (d x N) with
  /// upstream cotangents U (p x N) into grad (flat layout of params()).
  /// ReLU subgradient at 0 is 0.
  void accumulate_grad(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& U,
                       Eigen::VectorXd& grad) const {
    if (U.rows() != output_dim() || U.cols() != Z.cols())
      throw std::invalid_argument("MLPEncoder::accumulate_grad: shape mismatch");
    Eigen::MatrixXd pre = (W1 * Z).colwise() + b1;
    Eigen::MatrixXd act = pre.cwiseMax(0.0);
    Eigen::MatrixXd dW2 = U * act.transpose();
    Eigen::MatrixXd dact = W2.transpose() * U;
    Eigen::MatrixXd dpre =
        (pre.array() > 0.0).select(dact, Eigen::MatrixXd::Zero(dact.rows(), dact.cols()));
    Eigen::MatrixXd dW1 = dpre * Z.transpose();
    Eigen::VectorXd db1 = dpre.rowwise().sum();
    Eigen::Index o = 0;
    Eigen::Map<Eigen::VectorXd>(grad.data() + o, dW1.size()) +=
        Eigen::Map<const Eigen::VectorXd>(dW1.data(), dW1.size());
    o += dW1.size();
    grad.segment(o, db1.size()) += db1;
    o += db1.size();
    Eigen::Map<Eigen::VectorXd>(grad.data() + o, dW2.size()) +=
        Eigen::Map<const Eigen::VectorXd>(dW2.data(), dW2.size());
  }
};

/// Linear encoder z -> W z, optionally constrained to ||W||_op <= bound.
class LinearEncoder {
 public:
  Eigen::MatrixXd W;  // p x d
  std::optional<double> op_norm_bound;

  LinearEncoder() = default;
  explicit LinearEncoder(Eigen::MatrixXd w, std::optional<double> bound = {})
      : W(std::move(w)), op_norm_bound(bound) {}

  static LinearEncoder init(int d, int p, Rng& rng,
                            std::optional<double> bound = {}) {
    Eigen::MatrixXd w(p, d);
    double a = 1.0 / std::sqrt(static_cast<double>(d));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-a, a);
    return LinearEncoder(std::move(w), bound);
  }

  Eigen::Index input_dim() const { return W.cols(); }
  Eigen::Index output_dim() const { return W.rows(); }

  Eigen::VectorXd forward(const Eigen::VectorXd& z) const {
    if (z.size() != input_dim())
      throw std::invalid_argument("LinearEncoder::forward: dimension mismatch");
    return W * z;
  }

  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& Z) const {
    if (Z.rows() != input_dim())
      throw std::invalid_argument("LinearEncoder::forward_batch: dimension mismatch");
    return W * Z;
  }

  Eigen::Index param_count() const { return W.size(); }

  Eigen::VectorXd params() const {
    return Eigen::Map<const Eigen::VectorXd>(W.data(), W.size());
  }

  void set_params(const Eigen::VectorXd& p) {
    if (p.size() != W.size())
      throw std::invalid_argument("LinearEncoder::set_params: size mismatch");
    Eigen::Map<Eigen::VectorXd>(W.data(), W.size()) = p;
  }

  void accumulate_grad(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& U,
                       Eigen::VectorXd& grad) const {
    if (U.rows() != output_dim() || U.cols() != Z.cols())
      throw std::invalid_argument("LinearEncoder::accumulate_grad: shape mismatch");
    Eigen::MatrixXd dW = U * Z.transpose();
    Eigen::Map<Eigen::VectorXd>(grad.data(), dW.size()) +=
        Eigen::Map<const Eigen::VectorXd>(dW.data(), dW.size());
  }
};

/// One-hot token encoder z -> ((W z)^T, w z^T)^T of dimension M + S,
/// constrained to max row norm of W and |w / sqrt(S)| at most the bound.
class AugLinearEncoder {
 public:
  Eigen::MatrixXd W;  // M x S
  double w = 0.0;
  double bound = 1.0;  // B_W

  AugLinearEncoder() = default;
  AugLinearEncoder(Eigen::MatrixXd w_mat, double w_scalar, double b)
      : W(std::move(w_mat)), w(w_scalar), bound(b) {}

  static AugLinearEncoder init(int M, int S, double b, Rng& rng) {
    Eigen::MatrixXd w_mat(M, S);
    double a = 1.0 / std::sqrt(static_cast<double>(S));
    for (Eigen::Index i = 0; i < w_mat.size(); ++i)
      w_mat.data()[i] = rng.uniform(-a, a);
    return AugLinearEncoder(std::move(w_mat), rng.uniform(-a, a), b);
  }

  Eigen::Index input_dim() const { return W.cols(); }
  Eigen::Index output_dim() const { return W.rows() + W.cols(); }

  Eigen::VectorXd forward(const Eigen::VectorXd& z) const {
    if (z.size() != input_dim())
      throw std::invalid_argument("AugLinearEncoder::forward: dimension mismatch");
    Eigen::VectorXd out(output_dim());
    out.head(W.rows()) = W * z;
    out.tail(W.cols()) = w * z;
    return out;
  }

  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& Z) const {
    if (Z.rows() != input_dim())
      throw std::invalid_argument("AugLinearEncoder::forward_batch: dimension mismatch");
    Eigen::MatrixXd out(output_dim(), Z.cols());
    out.topRows(W.rows()) = W * Z;
    out.bottomRows(W.cols()) = w * Z;
    return out;
  }

  Eigen::Index param_count() const { return W.size() + 1; }

  Eigen::VectorXd params() const {
    Eigen::VectorXd p(param_count());
    p.head(W.size()) = Eigen::Map<const Eigen::VectorXd>(W.data(), W.size());
    p(W.size()) = w;
    return p;
  }

  void set_params(const Eigen::VectorXd& p) {
    if (p.size() != param_count())
      throw std::invalid_argument("AugLinearEncoder::set_params: size mismatch");
    Eigen::Map<Eigen::VectorXd>(W.data(), W.size()) = p.head(W.size());
    w = p(W.size());
  }

  void accumulate_grad(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& U,
                       Eigen::VectorXd& grad) const {
    if (U.rows() != output_dim() || U.cols() != Z.cols())
      throw std::invalid_argument("AugLinearEncoder::accumulate_grad: shape mismatch");
    Eigen::MatrixXd dW = U.topRows(W.rows()) * Z.transpose();
    Eigen::Map<Eigen::VectorXd>(grad.data(), dW.size()) +=
        Eigen::Map<const Eigen::VectorXd>(dW.data(), dW.size());
    grad(W.size()) += (U.bottomRows(W.cols()).array() * Z.array()).sum();
  }
};

// ---------------------------------------------------------------------------
// Norm-constraint projections
// ---------------------------------------------------------------------------

/// Clip singular values of W to the operator-norm bound (no-op if unbounded).
inline void project_constraints(LinearEncoder& enc) {
  if (!enc.op_norm_bound) return;
  double b = *enc.op_norm_bound;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      enc.W, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::VectorXd sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= b) return;
  for (Eigen::Index i = 0; i < sv.size(); ++i) sv(i) = std::min(sv(i), b);
  enc.W = svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose();
}

/// Rescale rows of W to 2-norm <= bound and clip |w| <= sqrt(S) * bound.
inline void project_constraints(AugLinearEncoder& enc) {
  double b = enc.bound;
  for (Eigen::Index i = 0; i < enc.W.rows(); ++i) {
    double n = enc.W.row(i).norm();
    if (n > b) enc.W.row(i) *= b / n;
  }
  double wmax = std::sqrt(static_cast<double>(enc.W.cols())) * b;
  enc.w = std::clamp(enc.w, -wmax, wmax);
}

inline void project_constraints(MLPEncoder&) {}  // unconstrained

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
  Eigen::VectorXd m, v;
  long step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState init(Eigen::Index n, double lr = 1e-3) {
    AdamState s;
    s.m = Eigen::VectorXd::Zero(n);
    s.v = Eigen::VectorXd::Zero(n);
    s.lr = lr;
    return s;
  }
};

/// Standard Adam update with bias correction, in place on a flat parameter
/// vector.
inline void adam_step(AdamState& st, Eigen::VectorXd& params,
                      const Eigen::VectorXd& grad) {
  if (params.size() != st.m.size() || grad.size() != st.m.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  st.step += 1;
  st.m = st.beta1 * st.m + (1.0 - st.beta1) * grad;
  st.v = st.beta2 * st.v + (1.0 - st.beta2) * grad.cwiseProduct(grad);
  double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  Eigen::ArrayXd mhat = st.m.array() / bc1;
  Eigen::ArrayXd vhat = st.v.array() / bc2;
  params.array() -= st.lr * mhat / (vhat.sqrt() + st.eps);
}

}  // namespace sufflab
