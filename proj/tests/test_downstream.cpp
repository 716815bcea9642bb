#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sufflab/discrete.hpp"
#include "sufflab/downstream.hpp"
#include "sufflab/experiments.hpp"
#include "sufflab/scenarios.hpp"

using namespace sufflab;

TEST_CASE("ols fitting") {
  Rng rng(51);
  // exact linear targets are recovered with zero residual
  Eigen::MatrixXd X = rng.normal_matrix(40, 4);
  Eigen::VectorXd truth(4);
  truth << 1.0, -2.0, 0.5, 3.0;
  Eigen::VectorXd eta = fit_ols(X, X * truth);
  REQUIRE((eta - truth).norm() < 1e-10);

  // a single all-ones column fits the mean
  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(30, 1);
  Eigen::VectorXd y = rng.normal_vector(30);
  REQUIRE(std::abs(fit_ols(ones, y)(0) - y.mean()) < 1e-12);

  // matches the normal equations on a well-conditioned system
  Eigen::MatrixXd A = rng.normal_matrix(100, 5);
  Eigen::VectorXd b = rng.normal_vector(100);
  Eigen::VectorXd viacod = fit_ols(A, b);
  Eigen::VectorXd normal_eq = (A.transpose() * A).ldlt().solve(A.transpose() * b);
  REQUIRE((viacod - normal_eq).norm() < 1e-8);

  // optimality: gradient of the squared loss vanishes at the solution
  Eigen::VectorXd grad = A.transpose() * (A * viacod - b);
  REQUIRE(grad.norm() <= 1e-8 * A.norm() * b.norm());

  // rank-deficient designs get the minimum-norm solution
  Eigen::MatrixXd R(10, 4);
  R.col(0) = rng.normal_vector(10);
  R.col(1) = R.col(0);
  R.col(2) = rng.normal_vector(10);
  R.col(3) = R.col(2);
  Eigen::VectorXd yr = rng.normal_vector(10);
  Eigen::VectorXd sol = fit_ols(R, yr);
  REQUIRE(std::abs(sol(0) - sol(1)) < 1e-10);  // symmetry of the min-norm solution
}

TEST_CASE("regression excess risk") {
  Rng rng(52);
  NoisySubspace noiseless = NoisySubspace::make(6, 2, 0.5, 0.0);
  LinearEncoder id(Eigen::MatrixXd::Identity(6, 6));
  // the true coefficient vector has zero excess risk
  LinearHead perfect{noiseless.theta_star, 50.0};
  McEstimate e = regression_excess_risk(noiseless, id, perfect, 20000, rng);
  REQUIRE(std::abs(e.value) < 1e-12);

  // the zero head pays |theta|^2 = 1
  NoisySubspace ns = NoisySubspace::make(6, 2, 0.5, 1.0);
  LinearHead zero{Eigen::VectorXd::Zero(6), 50.0};
  McEstimate z = regression_excess_risk(ns, id, zero, 100000, rng);
  REQUIRE(std::abs(z.value - 1.0) <= 3.0 * z.stderr_);
  REQUIRE(z.stderr_ > 0.0);
}

TEST_CASE("truncation never hurts when labels are bounded") {
  Rng rng(53);
  const double B = 2.0;
  Eigen::MatrixXd feats = rng.normal_matrix(6, 500);
  Eigen::VectorXd eta = rng.normal_vector(6);
  Eigen::VectorXd y(500);
  for (int i = 0; i < 500; ++i)
    y(i) = std::clamp(rng.normal() * 2.0, -B, B);  // |y| <= B almost surely
  double risk_trunc = 0.0, risk_raw = 0.0;
  for (int i = 0; i < 500; ++i) {
    double raw = feats.col(i).dot(eta);
    double trunc = std::clamp(raw, -B, B);
    risk_raw += (y(i) - raw) * (y(i) - raw);
    risk_trunc += (y(i) - trunc) * (y(i) - trunc);
  }
  REQUIRE(risk_trunc <= risk_raw + 1e-12);
}

TEST_CASE("regression augmentation error") {
  Rng rng(54);
  // noiseless augmentation with signal-supported theta
  NoisySubspace clean = NoisySubspace::make(6, 2, 0.0, 1.0);
  REQUIRE(augmentation_error_regression(clean, 5000, rng).value == 0.0);
  REQUIRE(augmentation_error_regression_closed_form(clean) == 0.0);

  // zero target function
  NoisySubspace zero_theta = NoisySubspace::make(6, 2, 1.0, 1.0);
  zero_theta.theta_star.setZero();
  REQUIRE(augmentation_error_regression(zero_theta, 5000, rng).value == 0.0);

  // sigma1 = 1, unit theta on the signal block: closed form 1
  NoisySubspace unit = NoisySubspace::make(6, 2, 1.0, 1.0);
  REQUIRE(augmentation_error_regression_closed_form(unit) == 1.0);
  McEstimate est = augmentation_error_regression(unit, 100000, rng);
  REQUIRE(std::abs(est.value - 1.0) <= 3.0 * est.stderr_);

  // tail-supported theta pays the replacement variance twice
  NoisySubspace tail = NoisySubspace::make(6, 2, 0.0, 1.0);
  tail.theta_star.setZero();
  tail.theta_star(5) = 1.0;
  REQUIRE(augmentation_error_regression_closed_form(tail) == 2.0);
  McEstimate est2 = augmentation_error_regression(tail, 100000, rng);
  REQUIRE(std::abs(est2.value - 2.0) <= 3.0 * est2.stderr_);
}

TEST_CASE("classifier fitting") {
  // M = 1 is the point mass with zero loss
  Eigen::MatrixXd feats = Eigen::MatrixXd::Ones(5, 1);
  ClassifierHead head = fit_classifier(feats, {0, 0, 0, 0, 0}, 1, 5.0, 3.0, 50, 0.1);
  REQUIRE(head.predict(Eigen::VectorXd::Ones(1))(0) == 1.0);

  // separable one-hot features: loss decreases monotonically under small lr
  Rng rng(55);
  const int m = 60, M = 3;
  Eigen::MatrixXd onehots = Eigen::MatrixXd::Zero(m, M);
  std::vector<int> labels(m);
  for (int i = 0; i < m; ++i) {
    labels[i] = rng.uniform_int(M);
    onehots(i, labels[i]) = 1.0;
  }
  auto loss_of = [&](const ClassifierHead& h) {
    double acc = 0.0;
    for (int i = 0; i < m; ++i)
      acc -= std::log(h.predict(onehots.row(i).transpose())(labels[i]));
    return acc / m;
  };
  double prev = 1e300;
  for (int steps : {1, 5, 20, 80, 300}) {
    ClassifierHead h = fit_classifier(onehots, labels, M, 10.0, 4.0, steps, 0.02);
    double loss = loss_of(h);
    REQUIRE(loss <= prev + 1e-12);
    prev = loss;
  }

  // projection feasibility after fitting
  ClassifierHead h = fit_classifier(onehots, labels, M, 0.7, 4.0, 200, 0.5);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(h.Gw);
  REQUIRE(svd.singularValues()(0) <= 0.7 + 1e-9);
  REQUIRE(h.Gb.norm() <= 0.7 + 1e-9);

  REQUIRE_THROWS_AS(fit_classifier(onehots, {0}, M, 1.0, 1.0, 1, 0.1),
                    std::invalid_argument);
}

TEST_CASE("exact classification risk") {
  Rng rng(56);
  TopicModel tm = build_topic_model(2, 8, 3.0, rng);

  // uniform head: direct two-loop oracle
  Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(tm.M, tm.S, 0.5);
  double risk_uniform = classification_risk_kl_table(tm, uniform);
  double oracle = 0.0;
  Eigen::VectorXd u = Eigen::VectorXd::Constant(2, 0.5);
  for (int y = 0; y < tm.M; ++y)
    for (int a = 0; a < tm.S; ++a)
      for (int b = 0; b < tm.S; ++b) {
        double w = 0.5 * tm.cond(y, a) * tm.cond(y, b);
        oracle += w * divergence(detail::topic_pair_posterior(tm, a, b), u, DivKind::KL);
      }
  REQUIRE(std::abs(risk_uniform - oracle) < 1e-12);

  // the bayes head of an injective encoder is P(y|z) per view
  Eigen::MatrixXd injective = Eigen::MatrixXd::Identity(tm.S, tm.S);
  Eigen::MatrixXd bayes = bayes_head_table(tm, injective);
  REQUIRE((bayes - tm.posterior()).cwiseAbs().maxCoeff() < 1e-12);

  // a constant encoder collapses to the class prior
  Eigen::MatrixXd constant = Eigen::MatrixXd::Ones(2, tm.S);
  Eigen::MatrixXd prior_head = bayes_head_table(tm, constant);
  REQUIRE((prior_head.array() - 0.5).abs().maxCoeff() < 1e-12);

  // merging two views averages their conditionals with view weights
  Eigen::MatrixXd merge = Eigen::MatrixXd::Identity(tm.S, tm.S);
  merge.col(1) = merge.col(0);  // views 0 and 1 share a feature
  Eigen::MatrixXd merged = bayes_head_table(tm, merge.topRows(tm.S - 1));
  Eigen::VectorXd w0 = tm.cond.col(0) / tm.M, w1 = tm.cond.col(1) / tm.M;
  Eigen::VectorXd expect = (w0 + w1) / (w0.sum() + w1.sum());
  REQUIRE((merged.col(0) - expect).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE((merged.col(1) - expect).cwiseAbs().maxCoeff() < 1e-12);

  // the bayes head minimizes the exact risk among per-group heads
  double best = classification_risk_kl_table(tm, bayes);
  Rng prng(57);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd perturbed = bayes;
    for (int z = 0; z < tm.S; ++z) {
      for (int y = 0; y < tm.M; ++y)
        perturbed(y, z) = std::max(perturbed(y, z) + 0.05 * prng.normal(), 1e-6);
      perturbed.col(z) /= perturbed.col(z).sum();
    }
    REQUIRE(classification_risk_kl_table(tm, perturbed) >= best - 1e-10);
  }
}

TEST_CASE("classification augmentation error") {
  // single topic: both conditionals coincide
  TopicModel tiny;
  tiny.M = 1;
  tiny.S = 4;
  tiny.cond = Eigen::MatrixXd::Constant(1, 4, 0.25);
  REQUIRE(augmentation_error_classification(tiny) == 0.0);

  // deterministic word per topic: the view determines the pair's posterior
  TopicModel det;
  det.M = 2;
  det.S = 8;
  det.cond = Eigen::MatrixXd::Zero(2, 8);
  det.cond(0, 0) = 1.0;
  det.cond(1, 5) = 1.0;
  REQUIRE(augmentation_error_classification(det) == 0.0);

  // nonnegative and matching a direct double-sum oracle on a random model
  Rng rng(58);
  TopicModel tm = build_topic_model(2, 8, 3.0, rng);
  double eps = augmentation_error_classification(tm);
  REQUIRE(eps >= 0.0);
  double oracle = 0.0;
  for (int y = 0; y < 2; ++y)
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 8; ++b) {
        double w = 0.5 * tm.cond(y, a) * tm.cond(y, b);
        Eigen::VectorXd px = detail::topic_pair_posterior(tm, a, b);
        for (int word : {a, b}) {
          Eigen::VectorXd pz = tm.posterior().col(word);
          oracle += 0.5 * w * (divergence(px, pz, DivKind::Renyi, 2.0) +
                               divergence(pz, px, DivKind::Renyi, 2.0));
        }
      }
  REQUIRE(std::abs(eps - oracle) < 1e-12);

  // support mismatch between P(y|z) and P(y|x) is a domain error
  TopicModel bad;
  bad.M = 2;
  bad.S = 3;
  bad.cond.resize(2, 3);
  bad.cond << 0.5, 0.5, 0.0, 0.0, 0.5, 0.5;
  REQUIRE_THROWS_AS(augmentation_error_classification(bad), std::domain_error);
}

TEST_CASE("bound instance: risk of the bayes head vs sufficiency") {
  Rng rng(59);
  for (int trial = 0; trial < 5; ++trial) {
    TopicModel tm = build_topic_model(2 + trial % 2, 8 + 4 * (trial % 2), 3.0, rng);
    DiscreteJoint joint = topic_joint_exact(tm);
    double eps = augmentation_error_classification(tm);
    // a few encoders: injective, constant, random coarse merges
    std::vector<Eigen::MatrixXd> encoders;
    encoders.push_back(Eigen::MatrixXd::Identity(tm.S, tm.S));
    encoders.push_back(Eigen::MatrixXd::Ones(1, tm.S));
    for (int r = 0; r < 3; ++r) {
      Statistic t = random_statistic(rng, tm.S);
      Eigen::MatrixXd merge = Eigen::MatrixXd::Zero(t.codomain, tm.S);
      for (int z = 0; z < tm.S; ++z) merge(t.map[z], z) = 1.0;
      encoders.push_back(merge);
    }
    for (const auto& feats : encoders) {
      double risk = classification_risk_kl_table(tm, bayes_head_table(tm, feats));
      Statistic stat = feature_statistic(feats);
      double suff = suff_ils(joint, stat, FGenerator::kl());
      REQUIRE(risk <= 8.0 * (tm.floor_B * std::sqrt(std::max(suff, 0.0)) + eps) + 1e-12);
    }
  }
}
