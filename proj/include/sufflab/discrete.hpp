#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "sufflab/fdivergence.hpp"

namespace sufflab {

/// Finite joint distribution P(x, y) as an |X| x |Y| probability table.
class DiscreteJoint {
 public:
  DiscreteJoint() = default;

  explicit DiscreteJoint(Eigen::MatrixXd p) : p_(std::move(p)) {
    if (p_.size() == 0) throw std::invalid_argument("DiscreteJoint: empty table");
    if ((p_.array() < 0.0).any())
      throw std::invalid_argument("DiscreteJoint: negative entry");
    double total = p_.sum();
    if (std::abs(total - 1.0) > 1e-12)
      throw std::invalid_argument("DiscreteJoint: probabilities sum to " +
                                  std::to_string(total));
  }

  const Eigen::MatrixXd& p() const { return p_; }
  Eigen::Index nx() const { return p_.rows(); }
  Eigen::Index ny() const { return p_.cols(); }

  Eigen::VectorXd px() const { return p_.rowwise().sum(); }
  Eigen::VectorXd py() const { return p_.colwise().sum().transpose(); }

  /// Conditional rows P(y | x); rows with zero marginal are left as zeros.
  Eigen::MatrixXd conditional_y_given_x() const {
    Eigen::MatrixXd c = p_;
    Eigen::VectorXd mx = px();
    for (Eigen::Index i = 0; i < c.rows(); ++i)
      if (mx(i) > 0.0) c.row(i) /= mx(i);
    return c;
  }

 private:
  Eigen::MatrixXd p_;
};

/// A statistic T: X -> {0, ..., codomain-1} given as an explicit index map.
struct Statistic {
  std::vector<int> map;
  int codomain = 0;

  static Statistic identity(int nx) {
    Statistic t;
    t.map.resize(nx);
    for (int i = 0; i < nx; ++i) t.map[i] = i;
    t.codomain = nx;
    return t;
  }

  static Statistic constant(int nx) {
    Statistic t;
    t.map.assign(nx, 0);
    t.codomain = 1;
    return t;
  }

  void validate(Eigen::Index nx) const {
    if (static_cast<Eigen::Index>(map.size()) != nx)
      throw std::invalid_argument("Statistic: map size mismatch");
    for (int v : map)
      if (v < 0 || v >= codomain)
        throw std::invalid_argument("Statistic: index out of range");
  }
};

/// Similarity scores S(x, y) on the same grid as a joint.
struct ScoreTable {
  Eigen::MatrixXd s;

  void validate(Eigen::Index nx, Eigen::Index ny) const {
    if (s.rows() != nx || s.cols() != ny)
      throw std::invalid_argument("ScoreTable: shape mismatch");
    if (!s.allFinite()) throw std::invalid_argument("ScoreTable: non-finite entry");
  }
};

/// f-mutual information I_f(X, Y) = sum f(p/(px py)) px py over support cells.
inline double mutual_information_f(const DiscreteJoint& joint,
                                   const FGenerator& gen) {
  const Eigen::MatrixXd& p = joint.p();
  Eigen::VectorXd px = joint.px(), py = joint.py();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if (px(i) <= 0.0) continue;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      if (py(j) <= 0.0) continue;
      double w = px(i) * py(j);
      acc += gen.eval(p(i, j) / w) * w;
    }
  }
  return acc;
}

/// Joint of (T(X), Y): cell (t, y) accumulates all x with T(x) = t.
inline DiscreteJoint pushforward(const DiscreteJoint& joint,
                                 const Statistic& stat) {
  stat.validate(joint.nx());
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(stat.codomain, joint.ny());
  for (Eigen::Index i = 0; i < joint.nx(); ++i)
    q.row(stat.map[i]) += joint.p().row(i);
  return DiscreteJoint(q);
}

/// Information loss sufficiency: I_f(X,Y) - I_f(T(X),Y).
inline double suff_ils(const DiscreteJoint& joint, const Statistic& stat,
                       const FGenerator& gen) {
  return mutual_information_f(joint, gen) -
         mutual_information_f(pushforward(joint, stat), gen);
}

/// Conditional Bregman sufficiency:
///   E_{px x py}[ B_f( p(y|x)/py , p(y|T(x))/py ) ].
inline double suff_cbs(const DiscreteJoint& joint, const Statistic& stat,
                       const FGenerator& gen) {
  stat.validate(joint.nx());
  DiscreteJoint pushed = pushforward(joint, stat);
  Eigen::MatrixXd cond_x = joint.conditional_y_given_x();
  Eigen::MatrixXd cond_t = pushed.conditional_y_given_x();
  Eigen::VectorXd px = joint.px(), py = joint.py();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < joint.nx(); ++i) {
    if (px(i) <= 0.0) continue;
    for (Eigen::Index j = 0; j < joint.ny(); ++j) {
      if (py(j) <= 0.0) continue;
      double a = cond_x(i, j) / py(j);
      double b = cond_t(stat.map[i], j) / py(j);
      if (a == 0.0 && b == 0.0) continue;
      acc += px(i) * py(j) * bregman(gen, a, b);
    }
  }
  return acc;
}

// ---------------------------------------------------------------------------
// The f-contrastive population risk and its inner infimum
// ---------------------------------------------------------------------------

struct InnerSolution {
  Eigen::VectorXd sx;         // per-row offset attaining the inner infimum
  Eigen::VectorXd row_value;  // min_c E_py[ f*(S(x,.) - c) + c ] per row
};

namespace detail {

// Hellinger rows: solve E_py[ (f')^{-1}(S - c) ] = 1 for c > max_y S by
// bisection. The constraint function decreases from +inf to 0 in c.
inline double hellinger_row_offset(const Eigen::VectorXd& row,
                                   const Eigen::VectorXd& py) {
  double smax = -std::numeric_limits<double>::infinity();
  double smin = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    if (py(j) <= 0.0) continue;
    smax = std::max(smax, row(j));
    smin = std::min(smin, row(j));
  }
  if (!std::isfinite(smax))
    throw std::runtime_error("hellinger inner solver: empty support row");
  auto constraint = [&](double c) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < row.size(); ++j) {
      if (py(j) <= 0.0) continue;
      double d = row(j) - c;
      acc += py(j) * 0.25 / (d * d);
    }
    return acc;
  };
  double lo = smax + 1e-12;
  double hi = smax + 10.0 * (1.0 + (smax - smin));
  int doublings = 0;
  while (constraint(hi) > 1.0) {
    hi = smax + 2.0 * (hi - smax);
    if (++doublings > 200)
      throw std::runtime_error("hellinger inner solver: bracket failure");
  }
  if (constraint(lo) < 1.0) {
    // extremely flat row; root sits between smax and lo
    return lo;
  }
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double g = constraint(mid);
    if (std::abs(g - 1.0) <= 1e-12) return mid;
    if (g > 1.0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-15 * (1.0 + std::abs(hi))) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Exact per-row solution of inf_c E_py[ f*(S(x,.) - c) + c ].
/// KL and ChiSquared use closed forms; SquaredHellinger bisects the
/// stationarity condition E_py[(f')^{-1}(S - c)] = 1.
inline InnerSolution solve_inner(const Eigen::MatrixXd& s,
                                 const Eigen::VectorXd& py,
                                 const FGenerator& gen) {
  InnerSolution out;
  out.sx.resize(s.rows());
  out.row_value.resize(s.rows());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    switch (gen.kind()) {
      case FKind::KL: {
        // c = log E_py[e^S] - 1; value = log E_py[e^S]; max-shifted
        double m = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < s.cols(); ++j)
          if (py(j) > 0.0) m = std::max(m, s(i, j));
        double z = 0.0;
        for (Eigen::Index j = 0; j < s.cols(); ++j)
          if (py(j) > 0.0) z += py(j) * std::exp(s(i, j) - m);
        double lse = m + std::log(z);
        out.sx(i) = lse - 1.0;
        out.row_value(i) = lse;
        break;
      }
      case FKind::ChiSquared: {
        // c = E_py[S]; value = E_py[(S - c)^2]/2 + E_py[S]
        double mean = 0.0;
        for (Eigen::Index j = 0; j < s.cols(); ++j)
          if (py(j) > 0.0) mean += py(j) * s(i, j);
        double var = 0.0;
        for (Eigen::Index j = 0; j < s.cols(); ++j)
          if (py(j) > 0.0) {
            double d = s(i, j) - mean;
            var += py(j) * d * d;
          }
        out.sx(i) = mean;
        out.row_value(i) = 0.5 * var + mean;
        break;
      }
      case FKind::SquaredHellinger: {
        double c = detail::hellinger_row_offset(s.row(i), py);
        double v = 0.0;
        for (Eigen::Index j = 0; j < s.cols(); ++j)
          if (py(j) > 0.0) v += py(j) * gen.conjugate(s(i, j) - c);
        out.sx(i) = c;
        out.row_value(i) = v + c;
        break;
      }
    }
  }
  return out;
}

/// f-contrastive population risk
///   R_f(S) = E_{p(x,y)}[-S] + E_px[ min_c E_py[ f*(S - c) + c ] ].
inline double population_risk_f(const DiscreteJoint& joint,
                                const ScoreTable& score,
                                const FGenerator& gen) {
  score.validate(joint.nx(), joint.ny());
  Eigen::VectorXd px = joint.px(), py = joint.py();
  InnerSolution inner = solve_inner(score.s, py, gen);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < joint.nx(); ++i) {
    if (px(i) <= 0.0) continue;
    for (Eigen::Index j = 0; j < joint.ny(); ++j)
      if (joint.p()(i, j) > 0.0) acc -= joint.p()(i, j) * score.s(i, j);
    acc += px(i) * inner.row_value(i);
  }
  return acc;
}

/// Conditional law induced by a score: P_S(y|x) = py(y) (f')^{-1}(S - S_x).
/// Rows with zero x-marginal fall back to the y-marginal.
inline Eigen::MatrixXd induced_conditional(const DiscreteJoint& joint,
                                           const ScoreTable& score,
                                           const FGenerator& gen) {
  score.validate(joint.nx(), joint.ny());
  Eigen::VectorXd px = joint.px(), py = joint.py();
  InnerSolution inner = solve_inner(score.s, py, gen);
  Eigen::MatrixXd cond(joint.nx(), joint.ny());
  for (Eigen::Index i = 0; i < joint.nx(); ++i)
    for (Eigen::Index j = 0; j < joint.ny(); ++j) {
      if (py(j) <= 0.0) {
        cond(i, j) = 0.0;
        continue;
      }
      cond(i, j) = px(i) > 0.0
                       ? py(j) * gen.inv_deriv(score.s(i, j) - inner.sx(i))
                       : py(j);
    }
  return cond;
}

/// Optimal score S*(x,y) = f'( p(x,y) / (px py) ). Zero-probability cells get
/// the f' of a tiny floor, which acts as -infinity for KL/Hellinger and is
/// harmless because those cells carry no mass in the risk.
inline ScoreTable optimal_score(const DiscreteJoint& joint,
                                const FGenerator& gen) {
  Eigen::VectorXd px = joint.px(), py = joint.py();
  Eigen::MatrixXd s(joint.nx(), joint.ny());
  for (Eigen::Index i = 0; i < joint.nx(); ++i)
    for (Eigen::Index j = 0; j < joint.ny(); ++j) {
      double w = px(i) * py(j);
      double ratio = w > 0.0 ? joint.p()(i, j) / w : 1.0;
      s(i, j) = gen.deriv(std::max(ratio, 1e-300));
    }
  return ScoreTable{std::move(s)};
}

/// Sufficiency of a similarity score (variational form):
///   Suff_f(S) = R_f(S) - R_f(S*) = R_f(S) + I_f(X, Y).
inline double score_sufficiency(const DiscreteJoint& joint,
                                const ScoreTable& score,
                                const FGenerator& gen) {
  return population_risk_f(joint, score, gen) +
         mutual_information_f(joint, gen);
}

/// The same quantity in conditional-Bregman form via the induced law
///   E_{px x py}[ B_f( p(y|x)/py , P_S(y|x)/py ) ].
inline double score_sufficiency_cbs(const DiscreteJoint& joint,
                                    const ScoreTable& score,
                                    const FGenerator& gen) {
  Eigen::MatrixXd cond_s = induced_conditional(joint, score, gen);
  Eigen::MatrixXd cond_x = joint.conditional_y_given_x();
  Eigen::VectorXd px = joint.px(), py = joint.py();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < joint.nx(); ++i) {
    if (px(i) <= 0.0) continue;
    for (Eigen::Index j = 0; j < joint.ny(); ++j) {
      if (py(j) <= 0.0) continue;
      double a = cond_x(i, j) / py(j);
      double b = cond_s(i, j) / py(j);
      if (a == 0.0 && b == 0.0) continue;
      acc += px(i) * py(j) * bregman(gen, a, b);
    }
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Variational form sufficiency
// ---------------------------------------------------------------------------

enum class VfsMode { ClosedForm, Numeric };

struct NumericVfsOptions {
  int max_iters = 200000;
  double grad_tol = 1e-9;
};

/// Minimize R_f(joint, sigma) over full score tables by gradient descent with
/// Barzilai-Borwein steps and Armijo backtracking. The per-row inner infimum
/// is solved exactly inside every objective/gradient evaluation, and by the
/// envelope theorem the gradient is -p(x,y) + px(x) P_sigma(y|x).
inline Eigen::MatrixXd minimize_population_risk(const DiscreteJoint& joint,
                                                const FGenerator& gen,
                                                const NumericVfsOptions& opts = {}) {
  if (gen.kind() == FKind::SquaredHellinger)
    throw std::invalid_argument("numeric risk minimization supports kl/chisq only");
  const Eigen::MatrixXd& p = joint.p();
  Eigen::VectorXd px = joint.px();
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(joint.nx(), joint.ny());

  auto objective = [&](const Eigen::MatrixXd& s) {
    return population_risk_f(joint, ScoreTable{s}, gen);
  };
  auto gradient = [&](const Eigen::MatrixXd& s) {
    Eigen::MatrixXd cond = induced_conditional(joint, ScoreTable{s}, gen);
    Eigen::MatrixXd g = -p;
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      if (px(i) > 0.0)
        g.row(i) += px(i) * cond.row(i);
      else
        g.row(i).setZero();
    return g;
  };

  double fval = objective(sigma);
  Eigen::MatrixXd grad = gradient(sigma);
  double step = 1.0;
  Eigen::MatrixXd prev_sigma, prev_grad;
  for (int it = 0; it < opts.max_iters; ++it) {
    double gnorm = grad.norm();
    if (gnorm <= opts.grad_tol) return sigma;
    if (it > 0) {
      Eigen::MatrixXd dx = sigma - prev_sigma;
      Eigen::MatrixXd dg = grad - prev_grad;
      double num = (dx.array() * dg.array()).sum();
      double den = dg.squaredNorm();
      if (num > 0.0 && den > 0.0) step = num / den;
      step = std::clamp(step, 1e-12, 1e12);
    }
    prev_sigma = sigma;
    prev_grad = grad;
    double alpha = step;
    for (int bt = 0; bt < 80; ++bt) {
      Eigen::MatrixXd trial = sigma - alpha * grad;
      double ftrial = objective(trial);
      if (ftrial <= fval - 1e-4 * alpha * gnorm * gnorm) {
        sigma = std::move(trial);
        fval = ftrial;
        break;
      }
      alpha *= 0.5;
      if (bt == 79)
        throw std::runtime_error("numeric vfs: line search failed");
    }
    grad = gradient(sigma);
  }
  throw std::runtime_error("numeric vfs: gradient tolerance not reached");
}

/// Variational form sufficiency.
///
/// ClosedForm evaluates inf_{S o T} R_f - inf_S R_f at the analytic optimal
/// scores f'(density ratio) of the pushforward and original joints.
/// Numeric minimizes R_f over scores factoring through T (parameterized on
/// the quotient grid, which realizes the projection exactly) and subtracts
/// the unrestricted minimum -I_f(X, Y).
inline double suff_vfs(const DiscreteJoint& joint, const Statistic& stat,
                       const FGenerator& gen, VfsMode mode = VfsMode::ClosedForm,
                       const NumericVfsOptions& opts = {}) {
  stat.validate(joint.nx());
  DiscreteJoint pushed = pushforward(joint, stat);
  if (mode == VfsMode::ClosedForm) {
    ScoreTable st = optimal_score(pushed, gen);
    Eigen::MatrixXd lifted(joint.nx(), joint.ny());
    for (Eigen::Index i = 0; i < joint.nx(); ++i)
      lifted.row(i) = st.s.row(stat.map[i]);
    double restricted = population_risk_f(joint, ScoreTable{lifted}, gen);
    double unrestricted =
        population_risk_f(joint, optimal_score(joint, gen), gen);
    return restricted - unrestricted;
  }
  Eigen::MatrixXd sigma = minimize_population_risk(pushed, gen, opts);
  double restricted = population_risk_f(pushed, ScoreTable{sigma}, gen);
  return restricted + mutual_information_f(joint, gen);
}

// ---------------------------------------------------------------------------
// Plain divergences between finite distributions
// ---------------------------------------------------------------------------

enum class DivKind { TV, KL, ChiSq, Hellinger2, Renyi };

namespace detail {

inline void check_distribution(const Eigen::VectorXd& p, const char* name) {
  if ((p.array() < -1e-15).any())
    throw std::domain_error(std::string("divergence: ") + name +
                            " has negative entries");
  if (std::abs(p.sum() - 1.0) > 1e-9)
    throw std::domain_error(std::string("divergence: ") + name +
                            " does not sum to 1");
}

}  // namespace detail

/// Standard divergences; renyi(alpha) = log(sum p^a q^(1-a)) / (a - 1).
/// KL and Renyi require q > 0 wherever p > 0.
inline double divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                         DivKind kind, double alpha = 2.0) {
  if (p.size() != q.size())
    throw std::invalid_argument("divergence: size mismatch");
  detail::check_distribution(p, "p");
  detail::check_distribution(q, "q");
  switch (kind) {
    case DivKind::TV:
      return 0.5 * (p - q).array().abs().sum();
    case DivKind::KL: {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p(i) <= 0.0) continue;
        if (q(i) <= 0.0)
          throw std::domain_error("divergence: kl needs q > 0 on supp(p)");
        acc += p(i) * std::log(p(i) / q(i));
      }
      return acc;
    }
    case DivKind::ChiSq: {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p(i) <= 0.0 && q(i) <= 0.0) continue;
        if (q(i) <= 0.0)
          throw std::domain_error("divergence: chisq needs q > 0 on supp(p)");
        double d = p(i) - q(i);
        acc += d * d / q(i);
      }
      return acc;
    }
    case DivKind::Hellinger2: {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        double d = std::sqrt(std::max(p(i), 0.0)) - std::sqrt(std::max(q(i), 0.0));
        acc += d * d;
      }
      return 0.5 * acc;
    }
    case DivKind::Renyi: {
      if (alpha <= 0.0 || alpha == 1.0)
        throw std::domain_error("divergence: renyi needs alpha > 0, alpha != 1");
      double acc = 0.0;
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p(i) <= 0.0) continue;
        if (q(i) <= 0.0)
          throw std::domain_error("divergence: renyi needs q > 0 on supp(p)");
        acc += std::pow(p(i), alpha) * std::pow(q(i), 1.0 - alpha);
      }
      return std::log(acc) / (alpha - 1.0);
    }
  }
  return 0.0;
}

/// c2 = ( 2 min_{supp} f''( p(x,y)/(px py) ) )^{-1/2}; the constant in the
/// TV-vs-sufficiency bound. Always 1/sqrt(2) for ChiSquared.
inline double c2_constant(const DiscreteJoint& joint, const FGenerator& gen) {
  Eigen::VectorXd px = joint.px(), py = joint.py();
  double fppmin = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < joint.nx(); ++i)
    for (Eigen::Index j = 0; j < joint.ny(); ++j) {
      double w = px(i) * py(j);
      if (w <= 0.0 || joint.p()(i, j) <= 0.0) continue;
      fppmin = std::min(fppmin, gen.second_deriv(joint.p()(i, j) / w));
    }
  if (!std::isfinite(fppmin) || fppmin <= 0.0)
    throw std::domain_error("c2_constant: empty support");
  return 1.0 / std::sqrt(2.0 * fppmin);
}

}  // namespace sufflab
