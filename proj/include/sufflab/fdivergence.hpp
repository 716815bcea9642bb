#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sufflab {

enum class FKind { KL, ChiSquared, SquaredHellinger };

inline FKind parse_fkind(std::string_view token) {
  if (token == "kl") return FKind::KL;
  if (token == "chisq") return FKind::ChiSquared;
  if (token == "hellinger") return FKind::SquaredHellinger;
  throw std::invalid_argument("unknown f kind: " + std::string(token));
}

inline const char* fkind_token(FKind k) {
  switch (k) {
    case FKind::KL: return "kl";
    case FKind::ChiSquared: return "chisq";
    case FKind::SquaredHellinger: return "hellinger";
  }
  return "?";
}

/// Convex generator with f(1) = 0 and its calculus: f, f', f'', (f')^{-1},
/// and the Fenchel conjugate f*. Three kinds:
///   KL:               f(t) = t log t           (0 log 0 = 0)
///   ChiSquared:       f(t) = (t - 1)^2 / 2
///   SquaredHellinger: f(t) = 1 - sqrt(t)
class FGenerator {
 public:
  explicit FGenerator(FKind kind) : kind_(kind) {}

  static FGenerator kl() { return FGenerator(FKind::KL); }
  static FGenerator chi_squared() { return FGenerator(FKind::ChiSquared); }
  static FGenerator squared_hellinger() {
    return FGenerator(FKind::SquaredHellinger);
  }

  FKind kind() const { return kind_; }

  double eval(double t) const {
    if (t < 0.0) throw std::domain_error("FGenerator::eval: t < 0");
    switch (kind_) {
      case FKind::KL:
        return t == 0.0 ? 0.0 : t * std::log(t);
      case FKind::ChiSquared:
        return 0.5 * (t - 1.0) * (t - 1.0);
      case FKind::SquaredHellinger:
        return 1.0 - std::sqrt(t);
    }
    return 0.0;
  }

  double deriv(double t) const {
    if (t <= 0.0) throw std::domain_error("FGenerator::deriv: t <= 0");
    switch (kind_) {
      case FKind::KL:
        return std::log(t) + 1.0;
      case FKind::ChiSquared:
        return t - 1.0;
      case FKind::SquaredHellinger:
        return -0.5 / std::sqrt(t);
    }
    return 0.0;
  }

  double second_deriv(double t) const {
    if (t <= 0.0) throw std::domain_error("FGenerator::second_deriv: t <= 0");
    switch (kind_) {
      case FKind::KL:
        return 1.0 / t;
      case FKind::ChiSquared:
        return 1.0;
      case FKind::SquaredHellinger:
        return 0.25 / (t * std::sqrt(t));
    }
    return 0.0;
  }

  /// Inverse of f' on the generator's derivative range.
  /// Hellinger: f' maps (0, inf) onto (-inf, 0), so s must be negative.
  double inv_deriv(double s) const {
    switch (kind_) {
      case FKind::KL:
        return std::exp(s - 1.0);
      case FKind::ChiSquared:
        return s + 1.0;
      case FKind::SquaredHellinger:
        if (s >= 0.0)
          throw std::domain_error("FGenerator::inv_deriv: hellinger needs s < 0");
        return 0.25 / (s * s);
    }
    return 0.0;
  }

  /// Fenchel conjugate f*(s) = sup_{t >= 0} { s t - f(t) }.
  /// ChiSquared extends below s = -1 with the constant -1/2 (supremum at t = 0).
  /// Hellinger is finite only for s < 0.
  double conjugate(double s) const {
    switch (kind_) {
      case FKind::KL:
        return std::exp(s - 1.0);
      case FKind::ChiSquared:
        return s < -1.0 ? -0.5 : 0.5 * s * s + s;
      case FKind::SquaredHellinger:
        if (s >= 0.0)
          throw std::domain_error(
              "FGenerator::conjugate: hellinger conjugate infinite for s >= 0");
        return -1.0 - 0.25 / s;
    }
    return 0.0;
  }

 private:
  FKind kind_;
};

/// Bregman divergence B_f(a, b) = f(a) - f(b) - (a - b) f'(b).
inline double bregman(const FGenerator& gen, double a, double b) {
  if (b <= 0.0) throw std::domain_error("bregman: b must be positive");
  if (a < 0.0) throw std::domain_error("bregman: a must be nonnegative");
  return gen.eval(a) - gen.eval(b) - (a - b) * gen.deriv(b);
}

}  // namespace sufflab
