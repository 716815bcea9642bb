#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>

#include <Eigen/Dense>

namespace sufflab {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Deterministic random stream. Streams for parallel work are derived from a
/// master seed by mixing in a tag and up to two indices, so independent cells
/// never share state regardless of scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  static Rng stream(std::uint64_t master, std::string_view tag,
                    std::uint64_t a = 0, std::uint64_t b = 0) {
    // stated mix: splitmix64 chained over (master, fnv1a(tag), a, b)
    std::uint64_t s = master;
    std::uint64_t h = detail::splitmix64(s);
    s = h ^ detail::fnv1a(tag);
    h = detail::splitmix64(s);
    s = h ^ a;
    h = detail::splitmix64(s);
    s = h ^ b;
    return Rng(detail::splitmix64(s));
  }

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (deterministic, caches the spare).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    // avoid log(0)
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  Eigen::VectorXd normal_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal();
    return m;
  }

  /// Index sample from a probability vector (CDF inversion).
  int categorical(const Eigen::VectorXd& pmf) {
    double u = uniform();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < pmf.size(); ++i) {
      acc += pmf(i);
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(pmf.size() - 1);
  }

  int uniform_int(int n) {  // 0..n-1
    if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
    return static_cast<int>(eng_() % static_cast<std::uint64_t>(n));
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sufflab
