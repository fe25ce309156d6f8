// ardo: train, verify and evaluate derivative-free weak adversarial solvers.
//
// Exit codes: 0 success, 1 usage or configuration error (also a failed
// verify suite), 2 numerical divergence during training.

#include "ardo/config.hpp"
#include "ardo/neural.hpp"
#include "ardo/trainer.hpp"
#include "ardo/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitDiverged = 2;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "flat key = value config file");
  cmd->add_option("--set", o.overrides, "override one setting, key=value (repeatable)");
  cmd->add_option("--out", o.out_dir, "output directory");
  cmd->add_option("--seed", o.seed, "training seed (same as --set train.seed=N)");
}

ardo::RunConfig resolve(const CommonOptions& o) {
  ardo::RunConfig config = o.config_path.empty() ? ardo::RunConfig{} : ardo::load_config_file(o.config_path);
  for (const std::string& s : o.overrides) ardo::apply_override(config, s);
  if (o.seed) config.train.seed = *o.seed;
  ardo::validate_config(config);
  return config;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string sampling_warning(const ardo::SamplingCheck& s) {
  if (s.ok) return "";
  char buf[160];
  std::snprintf(buf, sizeof buf, "sampling condition M_I*tau >> 1 not met: r = %g < %g", s.ratio,
                ardo::kSamplingRatioThreshold);
  return buf;
}

int cmd_train(const CommonOptions& o) {
  const ardo::RunConfig config = resolve(o);
  const ardo::PdeProblem problem = config.make_problem();
  const fs::path out(o.out_dir);
  fs::create_directories(out);

  const ardo::SamplingCheck sampling = ardo::check_sampling_condition(config.train.step(), config.train.m_interior);
  if (!sampling.ok) std::cerr << "warning: " << sampling_warning(sampling) << "\n";

  ardo::TrainHooks hooks;
  hooks.on_record = [](const ardo::EpochRecord& r) {
    std::printf("epoch %ld  loss %.4e  l2_rel %.4e\n", r.epoch, r.loss, r.l2_rel);
    std::fflush(stdout);
  };
  hooks.on_checkpoint = [&out](long, const ardo::MlpNetwork<double>& f, const ardo::MlpNetwork<double>& rho) {
    ardo::save_checkpoint(out / "f_net.ckpt", f);
    ardo::save_checkpoint(out / "rho_net.ckpt", rho);
  };

  const ardo::TrainResult result = ardo::train(problem, config.train, hooks);
  const bool diverged = result.status == ardo::TrainStatus::diverged;

  ardo::write_file_atomic(out / "metrics.csv", result.metrics.to_csv());
  if (!diverged) {
    ardo::save_checkpoint(out / "f_net.ckpt", result.solution);
    ardo::save_checkpoint(out / "rho_net.ckpt", result.test);
  }

  json summary;
  summary["status"] = diverged ? "diverged" : "completed";
  if (diverged) {
    summary["message"] = result.message;
    summary["diverged_epoch"] = result.diverged_epoch;
  }
  json cfg;
  for (const auto& [k, v] : ardo::resolved_settings(config)) cfg[k] = v;
  summary["config"] = cfg;
  summary["sampling"] = {{"ratio", sampling.ratio},
                         {"threshold", ardo::kSamplingRatioThreshold},
                         {"ok", sampling.ok},
                         {"warning", sampling.ok ? json(nullptr) : json(sampling_warning(sampling))}};
  summary["final_l2_rel"] = number_or_null(result.final_l2_rel);
  summary["wall_clock_ms"] = result.wall_ms;
  summary["records"] = result.metrics.records.size();
  ardo::write_file_atomic(out / "summary.json", summary.dump(2) + "\n");

  if (diverged) {
    std::cerr << "error: " << result.message << "\n";
    return kExitDiverged;
  }
  std::printf("final l2_rel %.6g\n", result.final_l2_rel);
  return kExitOk;
}

int cmd_verify(const std::string& suite) {
  const ardo::verify::SuiteReport report = ardo::verify::run_suite(suite);
  std::cout << report.table();
  std::cout << (report.passed() ? "suite " + suite + ": PASS\n" : "suite " + suite + ": FAIL\n");
  return report.passed() ? kExitOk : kExitConfig;
}

std::string widths_text(const std::vector<int>& w) {
  std::string s = "[";
  for (std::size_t k = 0; k < w.size(); ++k) s += (k ? "," : "") + std::to_string(w[k]);
  return s + "]";
}

int cmd_eval(const CommonOptions& o, const std::string& checkpoint_path) {
  const ardo::RunConfig config = resolve(o);
  const ardo::PdeProblem problem = config.make_problem();
  const ardo::MlpNetwork<double> net = ardo::load_checkpoint(checkpoint_path);
  const std::vector<int> expected = config.train.network.widths(problem.input_dim());
  if (net.widths() != expected || net.activation() != config.train.network.activation) {
    throw ardo::ConfigError("architecture mismatch: expected widths " + widths_text(expected) + " " +
                            ardo::to_string(config.train.network.activation) + ", found " + widths_text(net.widths()) +
                            " " + ardo::to_string(net.activation()));
  }
  const ardo::EvaluationGrid grid = ardo::make_evaluation_grid(problem);
  const ardo::Vec values = net.forward_batch(grid.points);
  const double err = ardo::relative_l2_error(values, grid.exact);

  std::string csv;
  const int rows = problem.input_dim();
  for (int r = 0; r < problem.dim(); ++r) csv += "x" + std::to_string(r) + ",";
  if (problem.parabolic()) csv += "t,";
  csv += "f,exact\n";
  char cell[64];
  for (Eigen::Index c = 0; c < grid.points.cols(); ++c) {
    for (int r = 0; r < rows; ++r) {
      std::snprintf(cell, sizeof cell, "%.17g,", grid.points(r, c));
      csv += cell;
    }
    std::snprintf(cell, sizeof cell, "%.17g,%.17g\n", values[c], grid.exact[c]);
    csv += cell;
  }
  fs::create_directories(o.out_dir);
  ardo::write_file_atomic(fs::path(o.out_dir) / "eval.csv", csv);
  std::printf("l2_rel %.17g\n", err);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Derivative-free weak adversarial solver for Fokker-Planck equations"};
  app.require_subcommand(1);

  CommonOptions train_opts, eval_opts;
  auto* train = app.add_subcommand("train", "train solution and test networks");
  add_common(train, train_opts);

  std::string suite;
  auto* verify = app.add_subcommand("verify", "run an oracle suite (identities, scaling, gradients)");
  verify->add_option("suite", suite, "suite name")->required();

  std::string checkpoint_path;
  auto* eval = app.add_subcommand("eval", "evaluate a solution checkpoint against the exact solution");
  add_common(eval, eval_opts);
  eval->add_option("--checkpoint", checkpoint_path, "solution network checkpoint")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*train) return cmd_train(train_opts);
    if (*verify) return cmd_verify(suite);
    if (*eval) return cmd_eval(eval_opts, checkpoint_path);
  } catch (const ardo::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
