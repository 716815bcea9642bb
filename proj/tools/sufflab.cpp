// sufflab: approximate-sufficiency functionals and contrastive-learning
// experiment runners. See README.md for config formats.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <CLI11.hpp>

#include "sufflab/experiments.hpp"
#include "sufflab/serialize.hpp"

namespace {

using sufflab::json;

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sufflab::ConfigError("cannot open config: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw sufflab::ConfigError(std::string("config parse error: ") + e.what());
  }
}

std::uint64_t require_seed(const json& j) {
  if (!j.contains("seed") || !j["seed"].is_number_integer())
    throw sufflab::ConfigError("config requires an integer \"seed\"");
  return j["seed"].get<std::uint64_t>();
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw sufflab::ConfigError(std::string("bad config field \"") + key +
                               "\": " + e.what());
  }
}

sufflab::Figure1Config parse_figure1(const json& j, const std::string& out_dir) {
  sufflab::Figure1Config c;
  c.seed = require_seed(j);
  c.out_dir = out_dir;
  json sc = j.value("scenario", json::object());
  c.d = get_or(sc, "d", c.d);
  c.s = get_or(sc, "s", c.s);
  c.sigma1 = get_or(sc, "sigma1", c.sigma1);
  c.sigma = get_or(sc, "sigma", c.sigma);
  json tr = j.value("training", json::object());
  c.n1 = get_or(tr, "n1", c.n1);
  c.K = get_or(tr, "K", c.K);
  c.hidden = get_or(tr, "hidden", c.hidden);
  c.epochs = get_or(tr, "epochs", c.epochs);
  c.lr = get_or(tr, "lr", c.lr);
  c.m_grid = get_or(j, "downstream_m", c.m_grid);
  c.repetitions = get_or(j, "repetitions", c.repetitions);
  c.eval_size = get_or(j, "eval_size", c.eval_size);
  c.trunc_B = get_or(j, "trunc_B", c.trunc_B);
  if (c.n1 < 1 || c.K < 2 || c.repetitions < 1 || c.m_grid.empty())
    throw sufflab::ConfigError("figure1: sizes must be positive (K >= 2)");
  return c;
}

sufflab::TopicConfig parse_topic(const json& j, const std::string& out_dir) {
  sufflab::TopicConfig c;
  c.seed = require_seed(j);
  c.out_dir = out_dir;
  json sc = j.value("scenario", json::object());
  c.M = get_or(sc, "M", c.M);
  c.S = get_or(sc, "S", c.S);
  c.floor_B = get_or(sc, "B", c.floor_B);
  c.bound_W = get_or(sc, "bound_W", static_cast<double>(c.M));
  json tr = j.value("training", json::object());
  c.K = get_or(tr, "K", c.K);
  c.epochs = get_or(tr, "epochs", c.epochs);
  c.lr = get_or(tr, "lr", c.lr);
  c.n_grid = get_or(j, "pretrain_n", c.n_grid);
  c.m_grid = get_or(j, "downstream_m", c.m_grid);
  c.seeds = get_or(j, "seeds", c.seeds);
  c.cls_steps = get_or(j, "classifier_steps", c.cls_steps);
  c.cls_lr = get_or(j, "classifier_lr", c.cls_lr);
  if (c.M < 1 || c.S < 4 * c.M || c.K < 3 || c.seeds < 1)
    throw sufflab::ConfigError("topic: need M >= 1, S >= 4M, K >= 3");
  return c;
}

sufflab::VmfConfig parse_vmf(const json& j, const std::string& out_dir) {
  sufflab::VmfConfig c;
  c.seed = require_seed(j);
  c.out_dir = out_dir;
  json sc = j.value("scenario", json::object());
  c.d = get_or(sc, "d", c.d);
  c.sigma = get_or(sc, "sigma", c.sigma);
  c.coordinate_split = get_or(sc, "coordinate_split", c.coordinate_split);
  c.bound_W = get_or(sc, "bound_W", c.bound_W);
  json tr = j.value("training", json::object());
  c.K = get_or(tr, "K", c.K);
  c.epochs = get_or(tr, "epochs", c.epochs);
  c.lr = get_or(tr, "lr", c.lr);
  c.n_grid = get_or(j, "pretrain_n", c.n_grid);
  c.seeds = get_or(j, "seeds", c.seeds);
  c.heldout_n1 = get_or(j, "heldout_batches", c.heldout_n1);
  if (c.d < 2 || c.d % 2 != 0 || c.K < 2 || c.seeds < 1)
    throw sufflab::ConfigError("vmf: need even d >= 2 and K >= 2");
  return c;
}

int run_suff(const std::string& joint_path, const std::string& fkind,
             const std::string& form) {
  sufflab::JointFile jf = sufflab::load_joint_file(joint_path);
  sufflab::FGenerator gen(sufflab::parse_fkind(fkind));
  auto print = [](const char* name, double v) { std::printf("%s %.12g\n", name, v); };
  if (form == "ils" || form == "all")
    print("ils", sufflab::suff_ils(jf.joint, jf.statistic, gen));
  if (form == "vfs" || form == "all")
    print("vfs", sufflab::suff_vfs(jf.joint, jf.statistic, gen));
  if (form == "cbs" || form == "all")
    print("cbs", sufflab::suff_cbs(jf.joint, jf.statistic, gen));
  return 0;
}

void emit_rows(const std::vector<sufflab::ResultRow>& rows,
               const std::string& out_dir, const std::string& name) {
  std::filesystem::create_directories(out_dir);
  std::string path = (std::filesystem::path(out_dir) / name).string();
  sufflab::write_csv(path, rows);
  std::printf("wrote %s (%zu rows)\n", path.c_str(), rows.size());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"approximate sufficiency functionals for contrastive learning"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".", joint_path, fkind = "kl", form = "all";
  bool svg = false;

  auto* suff = app.add_subcommand("suff", "sufficiency forms of a joint file");
  suff->add_option("--joint", joint_path, "joint JSON file")->required();
  suff->add_option("--f", fkind, "generator: kl|chisq|hellinger")
      ->check(CLI::IsMember({"kl", "chisq", "hellinger"}));
  suff->add_option("--form", form, "ils|vfs|cbs|all")
      ->check(CLI::IsMember({"ils", "vfs", "cbs", "all"}));

  auto add_experiment = [&](const char* name, const char* desc) {
    auto* cmd = app.add_subcommand(name, desc);
    cmd->add_option("--config", config_path, "config JSON")->required();
    cmd->add_option("--out", out_dir, "output directory");
    return cmd;
  };
  auto* fig1 = add_experiment("figure1", "pretraining vs direct regression");
  fig1->add_flag("--svg", svg, "emit the figure SVG");
  auto* topic = add_experiment("topic", "topic-model chi-squared pipeline");
  auto* vmf = add_experiment("vmf", "vMF linear-encoder scenario");
  auto* equiv = app.add_subcommand("equivalence", "discrete property suite");
  equiv->add_option("--config", config_path, "config JSON");
  equiv->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad flags are config errors
  }

  try {
    if (suff->parsed()) return run_suff(joint_path, fkind, form);
    if (fig1->parsed()) {
      json j = load_config(config_path);
      if (j.contains("out") && out_dir == ".") out_dir = j["out"].get<std::string>();
      auto rows = sufflab::run_figure1(parse_figure1(j, out_dir), svg);
      emit_rows(rows, out_dir, "figure1.csv");
      return 0;
    }
    if (topic->parsed()) {
      json j = load_config(config_path);
      if (j.contains("out") && out_dir == ".") out_dir = j["out"].get<std::string>();
      auto rows = sufflab::run_topic(parse_topic(j, out_dir));
      emit_rows(rows, out_dir, "topic.csv");
      return 0;
    }
    if (vmf->parsed()) {
      json j = load_config(config_path);
      if (j.contains("out") && out_dir == ".") out_dir = j["out"].get<std::string>();
      auto rows = sufflab::run_vmf(parse_vmf(j, out_dir));
      emit_rows(rows, out_dir, "vmf.csv");
      return 0;
    }
    if (equiv->parsed()) {
      sufflab::EquivalenceConfig c;
      if (!config_path.empty()) {
        json j = load_config(config_path);
        c.seed = require_seed(j);
        c.joints = get_or(j, "joints", c.joints);
        c.pinsker_instances = get_or(j, "pinsker_instances", c.pinsker_instances);
        c.renyi_instances = get_or(j, "renyi_instances", c.renyi_instances);
        c.minimizer_joints = get_or(j, "minimizer_joints", c.minimizer_joints);
        c.inject_bregman_sign_bug = get_or(j, "inject_bregman_sign_bug", false);
      }
      auto report = sufflab::run_equivalence(c);
      bool ok = sufflab::print_equivalence_report(report);
      return ok ? 0 : 1;
    }
  } catch (const sufflab::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
