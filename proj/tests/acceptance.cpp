// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion. Exit code is the number of
// failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "sufflab/discrete.hpp"
#include "sufflab/downstream.hpp"
#include "sufflab/encoders.hpp"
#include "sufflab/experiments.hpp"
#include "sufflab/losses.hpp"
#include "sufflab/scenarios.hpp"

using namespace sufflab;

namespace {

int failures = 0;

void criterion(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("criterion %2d %s %s (%s)\n", id, pass ? "PASS" : "FAIL", name,
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// mean and standard deviation of the matching rows
struct Stats {
  double mean = 0.0, sd = 0.0;
  int n = 0;
};

Stats collect(const std::vector<ResultRow>& rows, const std::string& method,
              double param, const std::string& metric) {
  double sum = 0.0, sumsq = 0.0;
  int n = 0;
  for (const auto& r : rows)
    if (r.method == method && r.param == param && r.metric == metric) {
      sum += r.value;
      sumsq += r.value * r.value;
      ++n;
    }
  Stats s;
  s.n = n;
  if (n > 0) s.mean = sum / n;
  if (n > 1) s.sd = std::sqrt(std::max((sumsq - sum * s.mean) / (n - 1), 0.0));
  return s;
}

void criterion1_equivalence() {
  auto t0 = std::chrono::steady_clock::now();
  Rng rng = Rng::stream(20250810, "acceptance-equivalence");
  const FGenerator gens[3] = {FGenerator::kl(), FGenerator::chi_squared(),
                              FGenerator::squared_hellinger()};
  double dev_cbs = 0.0, dev_vfs = 0.0, dev_num = 0.0;
  for (int i = 0; i < 100; ++i) {
    DiscreteJoint joint = random_joint(rng);
    Statistic stat = random_statistic(rng, static_cast<int>(joint.nx()));
    for (const auto& gen : gens) {
      double ils = suff_ils(joint, stat, gen);
      dev_cbs = std::max(dev_cbs, std::abs(ils - suff_cbs(joint, stat, gen)));
      dev_vfs = std::max(dev_vfs,
                         std::abs(ils - suff_vfs(joint, stat, gen, VfsMode::ClosedForm)));
      if (gen.kind() != FKind::SquaredHellinger)
        dev_num = std::max(dev_num,
                           std::abs(ils - suff_vfs(joint, stat, gen, VfsMode::Numeric)));
    }
  }
  double secs = seconds_since(t0);
  bool pass = dev_cbs <= 1e-10 && dev_vfs <= 1e-10 && dev_num <= 1e-6 && secs < 10.0;
  criterion(1, "sufficiency-form equivalence", pass,
            fmt("max |ILS-CBS| %.2e, |ILS-VFS| %.2e, |ILS-numeric| %.2e, %.1fs",
                dev_cbs, dev_vfs, dev_num, secs));
}

void criterion2_unbiasedness() {
  TopicModel tm = tiny_topic_model();
  DiscreteJoint joint = topic_joint_exact(tm);
  Rng rng = Rng::stream(20250810, "acceptance-unbiased");
  Eigen::MatrixXd s(3, 3);
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = rng.uniform(-1.0, 1.0);
  ScoreTable score{s};
  double enumerated = chisq_empirical_expectation_exact(joint, score, 3);
  double population = population_risk_f(joint, score, FGenerator::chi_squared());
  double dev = std::abs(enumerated - population);
  criterion(2, "chi-squared estimator unbiasedness", dev <= 1e-12,
            fmt("3^6 enumeration vs population risk: |diff| %.2e", dev));
}

void criterion3_infonce_limit() {
  TopicModel tm = tiny_topic_model();
  DiscreteJoint joint = topic_joint_exact(tm);
  Rng rng = Rng::stream(20250810, "acceptance-limit");
  Eigen::MatrixXd s(3, 3);
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = rng.uniform(-1.0, 1.0);
  ScoreTable score{s};
  double rkl = population_risk_f(joint, score, FGenerator::kl());
  std::vector<double> gaps;
  for (int K = 2; K <= 5; ++K)
    gaps.push_back(infonce_population_exact(joint, score, K) - std::log(K) - rkl);
  bool monotone = true, ratio_ok = true;
  double worst_ratio_dev = 0.0;
  for (size_t i = 0; i + 1 < gaps.size(); ++i) {
    monotone = monotone && gaps[i + 1] <= gaps[i] + 1e-12;
    double K = static_cast<double>(i + 2);
    double dev = std::abs(gaps[i + 1] / gaps[i] - K / (K + 1.0));
    worst_ratio_dev = std::max(worst_ratio_dev, dev);
    ratio_ok = ratio_ok && dev <= 0.1;
  }
  criterion(3, "infonce limit identity", monotone && ratio_ok,
            fmt("gaps %.3e/%.3e/%.3e/%.3e, max ratio dev %.3f", gaps[0], gaps[1],
                gaps[2], gaps[3], worst_ratio_dev));
}

void criterion4_minimizer_structure() {
  Rng rng = Rng::stream(20250810, "acceptance-minimizer");
  double dev_cond = 0.0, dev_offset = 0.0;
  for (int i = 0; i < 20; ++i) {
    DiscreteJoint joint = random_joint(rng);
    for (const auto& gen : {FGenerator::kl(), FGenerator::chi_squared()}) {
      Eigen::MatrixXd sigma = minimize_population_risk(joint, gen);
      Eigen::MatrixXd cond = induced_conditional(joint, ScoreTable{sigma}, gen);
      dev_cond = std::max(dev_cond,
                          (cond - joint.conditional_y_given_x()).cwiseAbs().maxCoeff());
      ScoreTable star = optimal_score(joint, gen);
      double base = population_risk_f(joint, star, gen);
      ScoreTable shifted = star;
      for (Eigen::Index x = 0; x < joint.nx(); ++x)
        shifted.s.row(x).array() += rng.uniform(-2.0, 2.0);
      dev_offset = std::max(dev_offset,
                            std::abs(population_risk_f(joint, shifted, gen) - base));
    }
  }
  criterion(4, "global minimizer structure", dev_cond <= 1e-6 && dev_offset <= 1e-10,
            fmt("conditional dev %.2e, offset invariance dev %.2e", dev_cond,
                dev_offset));
}

void criterion5_pinsker_renyi() {
  Rng rng = Rng::stream(20250810, "acceptance-pinsker");
  const FGenerator gens[3] = {FGenerator::kl(), FGenerator::chi_squared(),
                              FGenerator::squared_hellinger()};
  int violations = 0;
  double worst = -1e300;
  for (int i = 0; i < 200; ++i) {
    DiscreteJoint joint = random_joint(rng);
    Statistic stat = random_statistic(rng, static_cast<int>(joint.nx()));
    const FGenerator& gen = gens[i % 3];
    DiscreteJoint pushed = pushforward(joint, stat);
    Eigen::MatrixXd cx = joint.conditional_y_given_x();
    Eigen::MatrixXd ct = pushed.conditional_y_given_x();
    Eigen::VectorXd px = joint.px();
    double etv = 0.0;
    for (Eigen::Index x = 0; x < joint.nx(); ++x)
      etv += px(x) * divergence(cx.row(x).transpose(), ct.row(stat.map[x]).transpose(),
                                DivKind::TV);
    double slack = etv - c2_constant(joint, gen) * std::sqrt(suff_cbs(joint, stat, gen));
    worst = std::max(worst, slack);
    if (slack > 1e-10) ++violations;
  }
  Rng rrng = Rng::stream(20250810, "acceptance-renyi");
  auto random_dist = [&](int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = rrng.uniform(0.05, 1.0);
    return Eigen::VectorXd(v / v.sum());
  };
  double worst_renyi = -1e300;
  int renyi_violations = 0;
  for (int i = 0; i < 200; ++i) {
    int n = 2 + rrng.uniform_int(6);
    Eigen::VectorXd P = random_dist(n), Q = random_dist(n), T = random_dist(n);
    double s1 = divergence(P, Q, DivKind::Renyi, 4.0 / 3.0) -
                (2.0 * divergence(P, T, DivKind::Renyi, 2.0) +
                 divergence(T, Q, DivKind::Renyi, 2.0));
    double s2 = divergence(P, Q, DivKind::KL) -
                (4.0 * divergence(P, T, DivKind::KL) +
                 divergence(T, Q, DivKind::Renyi, 4.0 / 3.0));
    worst_renyi = std::max({worst_renyi, s1, s2});
    if (s1 > 1e-10 || s2 > 1e-10) ++renyi_violations;
  }
  criterion(5, "pinsker-type and renyi triangle bounds",
            violations == 0 && renyi_violations == 0,
            fmt("violations %d/%d, worst slack %.2e / %.2e", violations,
                renyi_violations, worst, worst_renyi));
}

void criterion6_gradient_checks() {
  Rng rng = Rng::stream(20250810, "acceptance-grad");
  Scenario gauss = NoisySubspace::make(6, 2, 0.8, 1.0);
  double worst = 0.0;
  int checked = 0;
  auto check = [&](auto& enc, const PairBatchSet& b, const LinkFunction& link,
                   LossKind kind) {
    auto loss_of = [&](const Eigen::VectorXd& p) {
      auto e = enc;
      e.set_params(p);
      return kind == LossKind::InfoNce ? infonce_empirical(b, e, link)
                                       : chisq_empirical(b, e, link);
    };
    auto [loss, grad] = loss_and_grad(b, enc, link, kind);
    (void)loss;
    Eigen::VectorXd params = enc.params();
    Eigen::VectorXd fd(params.size());
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < params.size(); ++i) {
      Eigen::VectorXd pp = params, pm = params;
      pp(i) += h;
      pm(i) -= h;
      fd(i) = (loss_of(pp) - loss_of(pm)) / (2.0 * h);
    }
    double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
    worst = std::max(worst, (grad - fd).cwiseAbs().maxCoeff() / scale);
    ++checked;
  };
  const LinkFunction links[3] = {LinkFunction::identity(), LinkFunction::scale(0.6),
                                 LinkFunction::exp_temperature(2.5)};
  for (int i = 0; i < 9; ++i) {
    PairBatchSet b = sample_pairs(gauss, 1 + i % 2, 3 + i % 3, rng);
    MLPEncoder mlp = MLPEncoder::init(6, 4, 3, rng);
    check(mlp, b, links[i % 3], i % 2 ? LossKind::InfoNce : LossKind::ChiSq);
    LinearEncoder lin = LinearEncoder::init(6, 3, rng);
    check(lin, b, links[(i + 1) % 3], i % 2 ? LossKind::ChiSq : LossKind::InfoNce);
  }
  Rng trng = Rng::stream(20250810, "acceptance-grad-topic");
  TopicModel tm = build_topic_model(2, 8, 3.0, trng);
  for (int i = 0; i < 16; ++i) {
    PairBatchSet b = sample_pairs(tm, 1 + i % 2, 3 + i % 4, trng);
    AugLinearEncoder aug = AugLinearEncoder::init(2, 8, 2.0, trng);
    check(aug, b, links[i % 3], i % 2 ? LossKind::InfoNce : LossKind::ChiSq);
    MLPEncoder mlp = MLPEncoder::init(8, 5, 2, trng);
    check(mlp, b, links[(i + 2) % 3], i % 2 ? LossKind::ChiSq : LossKind::InfoNce);
  }
  criterion(6, "gradient checks vs finite differences", worst <= 1e-5 && checked >= 50,
            fmt("%d configurations, worst relative error %.2e", checked, worst));
}

void criterion7_figure1() {
  auto t0 = std::chrono::steady_clock::now();
  Figure1Config cfg;  // paper parameters are the defaults
  cfg.seed = 20250810;
  cfg.out_dir = std::filesystem::temp_directory_path().string();
  std::vector<ResultRow> rows = run_figure1(cfg, /*emit_svg=*/false);
  bool pass = true;
  std::string detail;
  for (long m : {150L, 500L}) {
    Stats direct = collect(rows, "direct_lr", m, "excess_risk");
    for (const char* method : {"kl_pretrained", "chisq_pretrained"}) {
      Stats pre = collect(rows, method, m, "excess_risk");
      double pooled = std::sqrt(0.5 * (pre.sd * pre.sd + direct.sd * direct.sd));
      pass = pass && (pre.mean < direct.mean - 2.0 * pooled);
    }
    detail += fmt("m=%ld direct %.3f; ", m, direct.mean);
  }
  Stats direct5k = collect(rows, "direct_lr", 5000, "excess_risk");
  Stats kl5k = collect(rows, "kl_pretrained", 5000, "excess_risk");
  Stats chi5k = collect(rows, "chisq_pretrained", 5000, "excess_risk");
  pass = pass && direct5k.mean < 0.05 && kl5k.mean > direct5k.mean &&
         chi5k.mean > direct5k.mean;
  detail += fmt("m=5000 direct %.4f kl %.4f chisq %.4f; %.0fs", direct5k.mean,
                kl5k.mean, chi5k.mean, seconds_since(t0));
  criterion(7, "figure-1 qualitative reproduction", pass, detail);
}

void criterion8_topic_trend() {
  TopicConfig cfg;  // spec defaults M=3 S=12 K=8, n in {500..4000}, 3 seeds
  cfg.seed = 20250810;
  cfg.m_grid = {};  // the trend criterion does not need downstream fits
  std::vector<ResultRow> rows = run_topic(cfg);
  double gold_proxy = 1e300;
  for (const auto& r : rows)
    if (r.method == "gold" && r.metric == "score_suff_proxy") gold_proxy = r.value;
  std::vector<double> means;
  std::string detail = "proxy means:";
  for (long n : cfg.n_grid) {
    Stats s = collect(rows, "chisq_trained", static_cast<double>(n), "score_suff_proxy");
    means.push_back(s.mean);
    detail += fmt(" %.4f", s.mean);
  }
  bool monotone = true;
  for (size_t i = 0; i + 1 < means.size(); ++i)
    monotone = monotone && means[i + 1] <= means[i] + 1e-12;
  detail += fmt("; gold %.1e", gold_proxy);
  criterion(8, "topic pipeline 1/sqrt(n) trend", monotone && gold_proxy <= 1e-10,
            detail);
}

void criterion9_bound_instances() {
  Rng rng = Rng::stream(20250810, "acceptance-bound");
  int violations = 0;
  double worst_margin = 1e300;
  for (int t = 0; t < 20; ++t) {
    TopicModel tm = build_topic_model(2 + t % 3, 4 * (2 + t % 3) + 2 * (t % 2), 3.0, rng);
    DiscreteJoint joint = topic_joint_exact(tm);
    double eps = augmentation_error_classification(tm);
    std::vector<Eigen::MatrixXd> encoders;
    encoders.push_back(Eigen::MatrixXd::Identity(tm.S, tm.S));
    encoders.push_back(Eigen::MatrixXd::Ones(1, tm.S));
    for (int r = 0; r < 3; ++r) {
      Statistic stat = random_statistic(rng, tm.S);
      Eigen::MatrixXd merge = Eigen::MatrixXd::Zero(stat.codomain, tm.S);
      for (int z = 0; z < tm.S; ++z) merge(stat.map[z], z) = 1.0;
      encoders.push_back(merge);
    }
    for (const auto& feats : encoders) {
      double risk = classification_risk_kl_table(tm, bayes_head_table(tm, feats));
      double suff = suff_ils(joint, feature_statistic(feats), FGenerator::kl());
      double rhs = 8.0 * (tm.floor_B * std::sqrt(std::max(suff, 0.0)) + eps);
      worst_margin = std::min(worst_margin, rhs - risk);
      if (risk > rhs) ++violations;
    }
  }
  criterion(9, "downstream classification bound instances", violations == 0,
            fmt("20 models x 5 encoders, violations %d, smallest margin %.3f",
                violations, worst_margin));
}

void criterion10_vmf_trend() {
  VmfConfig cfg;  // spec defaults d=20 p=10 sigma=2
  cfg.seed = 20250810;
  std::vector<ResultRow> rows = run_vmf(cfg);
  std::vector<double> means;
  std::string detail = "proxy means:";
  for (long n : cfg.n_grid) {
    Stats s = collect(rows, "infonce_trained", static_cast<double>(n), "excess_proxy");
    means.push_back(s.mean);
    detail += fmt(" %.5f", s.mean);
  }
  bool monotone = true;
  for (size_t i = 0; i + 1 < means.size(); ++i)
    monotone = monotone && means[i + 1] <= means[i] + 1e-12;
  // W = U1^T realizes the oracle score: its proxy is identically zero
  bool oracle_ok = true;
  for (const auto& r : rows)
    if (r.method == "oracle")
      oracle_ok = oracle_ok && r.value <= 0.0 + 3.0 * r.stderr_;
  criterion(10, "vmf excess-proxy trend", monotone && oracle_ok, detail);
}

}  // namespace

int main() {
  criterion1_equivalence();
  criterion2_unbiasedness();
  criterion3_infonce_limit();
  criterion4_minimizer_structure();
  criterion5_pinsker_renyi();
  criterion6_gradient_checks();
  criterion7_figure1();
  criterion8_topic_trend();
  criterion9_bound_instances();
  criterion10_vmf_trend();
  std::printf("%s: %d/10 criteria passed\n", failures == 0 ? "OK" : "FAILED",
              10 - failures);
  return failures;
}
