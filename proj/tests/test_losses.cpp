#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sufflab/encoders.hpp"
#include "sufflab/experiments.hpp"
#include "sufflab/losses.hpp"
#include "sufflab/scenarios.hpp"

using namespace sufflab;

namespace {

PairBatchSet standard_basis_pairs(int K) {
  PairBatchSet b;
  b.n1 = 1;
  b.K = K;
  b.z1 = Eigen::MatrixXd::Identity(K, K);
  b.z2 = Eigen::MatrixXd::Identity(K, K);
  return b;
}

PairBatchSet swap_views(const PairBatchSet& b) {
  PairBatchSet out = b;
  std::swap(out.z1, out.z2);
  return out;
}

PairBatchSet shuffle_within_batches(const PairBatchSet& b, Rng& rng) {
  PairBatchSet out = b;
  for (int i = 0; i < b.n1; ++i)
    for (int j = b.K - 1; j > 0; --j) {
      int k = rng.uniform_int(j + 1);
      out.z1.col(i * b.K + j).swap(out.z1.col(i * b.K + k));
      out.z2.col(i * b.K + j).swap(out.z2.col(i * b.K + k));
    }
  return out;
}

// numeric gradient of a scalar function of a parameter vector
template <class F>
Eigen::VectorXd numeric_grad(F&& f, Eigen::VectorXd params, double h = 1e-5) {
  Eigen::VectorXd g(params.size());
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    double keep = params(i);
    params(i) = keep + h;
    double up = f(params);
    params(i) = keep - h;
    double down = f(params);
    params(i) = keep;
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("infonce constant score gives log K") {
  Rng rng(21);
  for (int K : {2, 3, 8}) {
    Scenario sc = NoisySubspace::make(6, 2, 0.5, 1.0);
    PairBatchSet b = sample_pairs(sc, 2, K, rng);
    // zero encoder makes every score zero
    LinearEncoder zero(Eigen::MatrixXd::Zero(3, 6));
    REQUIRE(std::abs(infonce_empirical(b, zero, LinkFunction::identity()) -
                     std::log(static_cast<double>(K))) < 1e-12);
  }
}

TEST_CASE("infonce hand-computed 2x2 example") {
  // identity features on the standard basis give scores [[1,0],[0,1]]
  PairBatchSet b = standard_basis_pairs(2);
  LinearEncoder id(Eigen::MatrixXd::Identity(2, 2));
  double expect = std::log(1.0 + std::exp(-1.0));
  REQUIRE(std::abs(infonce_empirical(b, id, LinkFunction::identity()) - expect) < 1e-14);
}

TEST_CASE("batch size contracts") {
  PairBatchSet b1 = standard_basis_pairs(1);
  PairBatchSet b2 = standard_basis_pairs(2);
  LinearEncoder id1(Eigen::MatrixXd::Identity(1, 1));
  LinearEncoder id2(Eigen::MatrixXd::Identity(2, 2));
  REQUIRE_THROWS_AS(infonce_empirical(b1, id1, LinkFunction::identity()),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(chisq_empirical(b2, id2, LinkFunction::identity()),
                    std::invalid_argument);
}

TEST_CASE("chisq constant score gives zero") {
  Rng rng(22);
  Scenario sc = NoisySubspace::make(5, 2, 0.5, 1.0);
  PairBatchSet b = sample_pairs(sc, 3, 4, rng);
  LinearEncoder zero(Eigen::MatrixXd::Zero(2, 5));
  REQUIRE(std::abs(chisq_empirical(b, zero, LinkFunction::identity())) < 1e-14);
}

TEST_CASE("chisq naive and reduced forms agree") {
  Rng rng(23);
  for (int K : {3, 5, 17, 24}) {
    Eigen::MatrixXd s(K, K);
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = rng.uniform(-2.0, 2.0);
    double naive = chisq_batch_sum(s, ChiSqForm::Naive);
    double reduced = chisq_batch_sum(s, ChiSqForm::Reduced);
    REQUIRE(std::abs(naive - reduced) < 1e-12 * std::max(1.0, std::abs(naive)));
  }
}

TEST_CASE("loss invariances") {
  Rng rng(24);
  Scenario sc = NoisySubspace::make(6, 2, 0.7, 1.0);
  PairBatchSet b = sample_pairs(sc, 2, 5, rng);
  MLPEncoder enc = MLPEncoder::init(6, 4, 3, rng);
  LinkFunction link = LinkFunction::identity();

  double nce = infonce_empirical(b, enc, link);
  double chi = chisq_empirical(b, enc, link);

  // swapping the two views leaves the symmetrized InfoNCE unchanged
  REQUIRE(std::abs(infonce_empirical(swap_views(b), enc, link) - nce) < 1e-12);

  // shuffling pairs within a batch changes nothing for either loss
  PairBatchSet shuffled = shuffle_within_batches(b, rng);
  REQUIRE(std::abs(infonce_empirical(shuffled, enc, link) - nce) < 1e-12);
  REQUIRE(std::abs(chisq_empirical(shuffled, enc, link) - chi) < 1e-12);
}

TEST_CASE("chisq estimator is unbiased: exhaustive enumeration") {
  TopicModel tm = tiny_topic_model();
  DiscreteJoint joint = topic_joint_exact(tm);
  Rng rng(25);
  Eigen::MatrixXd s(3, 3);
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = rng.uniform(-1.0, 1.0);
  ScoreTable score{s};
  double enumerated = chisq_empirical_expectation_exact(joint, score, 3);
  double population = population_risk_f(joint, score, FGenerator::chi_squared());
  REQUIRE(std::abs(enumerated - population) < 1e-12);

  // the expectation is symmetric in the two views (exchangeable joint)
  DiscreteJoint flipped(joint.p().transpose());
  ScoreTable score_t{Eigen::MatrixXd(s.transpose())};
  double swapped = chisq_empirical_expectation_exact(flipped, score_t, 3);
  REQUIRE(std::abs(swapped - enumerated) < 1e-12);
}

TEST_CASE("exact population infonce") {
  TopicModel tm = tiny_topic_model();
  DiscreteJoint joint = topic_joint_exact(tm);

  ScoreTable constant{Eigen::MatrixXd::Constant(3, 3, 1.3)};
  for (int K : {2, 3, 4})
    REQUIRE(std::abs(infonce_population_exact(joint, constant, K) -
                     std::log(static_cast<double>(K))) < 1e-12);

  Rng rng(26);
  Eigen::MatrixXd s(3, 3);
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = rng.uniform(-1.0, 1.0);
  ScoreTable score{s};
  double rkl = population_risk_f(joint, score, FGenerator::kl());
  double ikl = mutual_information_f(joint, FGenerator::kl());
  double prev = 1e300;
  for (int K : {2, 3, 4, 5}) {
    double gap = infonce_population_exact(joint, score, K) - std::log(K);
    REQUIRE(gap <= prev + 1e-12);       // nonincreasing toward R_kl
    REQUIRE(gap >= rkl - 1e-12);        // never beats the population loss
    REQUIRE(gap >= -ikl - 1e-12);       // and never beats the optimum
    prev = gap;
  }
  REQUIRE_THROWS_AS(infonce_population_exact(joint, score, 40), std::runtime_error);
}

TEST_CASE("gradients match finite differences") {
  Rng rng(27);
  Scenario sc = NoisySubspace::make(5, 2, 0.6, 1.0);
  LinkFunction links[] = {LinkFunction::identity(), LinkFunction::scale(0.7),
                          LinkFunction::exp_temperature(2.0)};
  for (int rep = 0; rep < 6; ++rep) {
    PairBatchSet b = sample_pairs(sc, 1 + rep % 2, 3 + rep % 3, rng);
    const LinkFunction& link = links[rep % 3];
    for (LossKind kind : {LossKind::InfoNce, LossKind::ChiSq}) {
      MLPEncoder mlp = MLPEncoder::init(5, 4, 2, rng);
      auto loss_of = [&](const Eigen::VectorXd& p) {
        MLPEncoder e = mlp;
        e.set_params(p);
        return kind == LossKind::InfoNce ? infonce_empirical(b, e, link)
                                         : chisq_empirical(b, e, link);
      };
      auto [loss, grad] = loss_and_grad(b, mlp, link, kind);
      REQUIRE(std::abs(loss - loss_of(mlp.params())) < 1e-12);
      Eigen::VectorXd fd = numeric_grad(loss_of, mlp.params());
      double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
      REQUIRE((grad - fd).cwiseAbs().maxCoeff() / scale < 1e-5);
    }
  }
}

TEST_CASE("zero linear encoder: loss log K, finite gradient") {
  Rng rng(28);
  Scenario sc = NoisySubspace::make(5, 2, 0.6, 1.0);
  PairBatchSet b = sample_pairs(sc, 2, 4, rng);
  LinearEncoder zero(Eigen::MatrixXd::Zero(2, 5));
  auto [loss, grad] = loss_and_grad(b, zero, LinkFunction::identity(), LossKind::InfoNce);
  REQUIRE(std::abs(loss - std::log(4.0)) < 1e-12);
  REQUIRE(grad.allFinite());
}

TEST_CASE("deterministic batch reduction") {
  Rng rng(29);
  Scenario sc = NoisySubspace::make(6, 2, 0.5, 1.0);
  PairBatchSet b = sample_pairs(sc, 4, 4, rng);
  MLPEncoder enc = MLPEncoder::init(6, 5, 3, rng);
  auto [l1, g1] = loss_and_grad(b, enc, LinkFunction::identity(), LossKind::ChiSq);
  auto [l2, g2] = loss_and_grad(b, enc, LinkFunction::identity(), LossKind::ChiSq);
  REQUIRE(l1 == l2);
  REQUIRE(g1 == g2);  // bit identical
}

namespace {

// Minimize the exact expected InfoNCE over 3x3 score tables (finite-difference
// gradient; the objective is smooth and convex).
Eigen::MatrixXd minimize_infonce_population(const DiscreteJoint& joint, int K) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(3, 3);
  auto value = [&](const Eigen::MatrixXd& m) {
    return infonce_population_exact(joint, ScoreTable{m}, K);
  };
  auto grad = [&](Eigen::MatrixXd m) {
    Eigen::MatrixXd g(3, 3);
    const double h = 1e-6;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double keep = m(i, j);
        m(i, j) = keep + h;
        double up = value(m);
        m(i, j) = keep - h;
        double down = value(m);
        m(i, j) = keep;
        g(i, j) = (up - down) / (2.0 * h);
      }
    return g;
  };
  double f = value(s);
  Eigen::MatrixXd g = grad(s), prev_s, prev_g;
  double step = 1.0;
  for (int it = 0; it < 3000; ++it) {
    if (g.norm() < 1e-8) break;
    if (it > 0) {
      Eigen::MatrixXd dx = s - prev_s, dg = g - prev_g;
      double num = (dx.array() * dg.array()).sum();
      if (num > 0) step = std::clamp(num / dg.squaredNorm(), 1e-8, 1e4);
    }
    prev_s = s;
    prev_g = g;
    double alpha = step;
    for (int bt = 0; bt < 50; ++bt) {
      Eigen::MatrixXd trial = s - alpha * g;
      double ft = value(trial);
      if (ft <= f - 1e-4 * alpha * g.squaredNorm()) {
        s = trial;
        f = ft;
        break;
      }
      alpha *= 0.5;
    }
    g = grad(s);
  }
  return s;
}

}  // namespace

TEST_CASE("finite-K infonce minimizer induces the true conditional") {
  TopicModel tm = tiny_topic_model();
  DiscreteJoint joint = topic_joint_exact(tm);
  Eigen::MatrixXd truth = joint.conditional_y_given_x();
  for (int K : {2, 4}) {
    Eigen::MatrixXd s = minimize_infonce_population(joint, K);
    Eigen::MatrixXd cond = induced_conditional(joint, ScoreTable{s}, FGenerator::kl());
    REQUIRE((cond - truth).cwiseAbs().maxCoeff() < 1e-4);
  }
}
