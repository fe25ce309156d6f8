#pragma once

#include "ardo/error.hpp"
#include "ardo/estimator.hpp"
#include "ardo/neural.hpp"
#include "ardo/parallel.hpp"
#include "ardo/problem.hpp"
#include "ardo/random.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ardo {

enum class Precision { f64, f32 };

inline std::string to_string(Precision p) { return p == Precision::f64 ? "f64" : "f32"; }

inline Precision parse_precision(const std::string& name) {
  if (name == "f64" || name == "64") return Precision::f64;
  if (name == "f32" || name == "32") return Precision::f32;
  throw Error("unknown precision '" + name + "' (expected f64 or f32)");
}

/// Hidden layout shared by the solution and test networks.
struct NetworkConfig {
  std::vector<int> hidden{32, 32, 32};
  Activation activation = Activation::tanh;
  std::uint64_t seed = 17;

  /// Full widths for a network reading `input_width` coordinates.
  std::vector<int> widths(int input_width) const {
    std::vector<int> w{input_width};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(1);
    return w;
  }
};

struct TrainConfig {
  long epochs = 5000;
  std::size_t m_interior = 4096;
  std::size_t m_dirichlet = 256;
  std::size_t m_neumann = 256;
  double tau = 1e-3;
  double tau_tilde = 1e-4;
  int replicates = 1;
  double lr_solution = 1e-3;
  /// Zero freezes the test function.
  double lr_test = 1e-3;
  int test_steps_per_epoch = 1;
  LossMode loss_mode = LossMode::normalized;
  GradientEstimator gradient = GradientEstimator::split;
  std::uint64_t seed = 20240601;
  long eval_every = 100;
  /// Zero disables periodic checkpoints.
  long checkpoint_every = 0;
  Precision precision = Precision::f64;
  /// When false the `ms` metric is written as 0 so traces are byte-comparable.
  bool record_wall_clock = true;
  NetworkConfig network;

  StepParams step() const { return {tau, tau_tilde, replicates}; }

  void validate() const {
    if (epochs < 1) throw Error("train.epochs must be at least 1");
    if (m_interior < 1) throw Error("train.m_interior must be at least 1");
    if (!(lr_solution > 0.0)) throw Error("train.lr_solution must be positive");
    if (!(lr_test >= 0.0)) throw Error("train.lr_test must be non-negative");
    if (test_steps_per_epoch < 1) throw Error("train.test_steps_per_epoch must be at least 1");
    if (eval_every < 1) throw Error("train.eval_every must be at least 1");
    if (checkpoint_every < 0) throw Error("train.checkpoint_every must be non-negative");
    if (network.hidden.empty()) throw Error("net.hidden must list at least one layer");
    step().validate();
  }
};

struct EpochRecord {
  long epoch = 0;
  double loss = 0.0;
  double s_i = 0.0, s_d = 0.0, s_n = 0.0;
  double se_i = 0.0, se_d = 0.0, se_n = 0.0;
  double l2_rel = std::numeric_limits<double>::quiet_NaN();
  double gnorm_f = 0.0;
  double gnorm_rho = 0.0;
  double ms = 0.0;
};

struct RunMetrics {
  std::vector<EpochRecord> records;

  static constexpr const char* kCsvHeader = "epoch,loss,s_i,s_d,s_n,se_i,se_d,se_n,l2_rel,gnorm_f,gnorm_rho,ms";

  std::string to_csv() const {
    std::string out = std::string(kCsvHeader) + "\n";
    char line[512];
    for (const EpochRecord& r : records) {
      std::snprintf(line, sizeof(line), "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.3f\n", r.epoch,
                    r.loss, r.s_i, r.s_d, r.s_n, r.se_i, r.se_d, r.se_n, r.l2_rel, r.gnorm_f, r.gnorm_rho, r.ms);
      out += line;
    }
    return out;
  }
};

enum class TrainStatus { completed, diverged };

struct TrainResult {
  MlpNetwork<double> solution;
  MlpNetwork<double> test;
  RunMetrics metrics;
  TrainStatus status = TrainStatus::completed;
  std::string message;
  long diverged_epoch = 0;
  SamplingCheck sampling;
  double wall_ms = 0.0;
  double final_l2_rel = std::numeric_limits<double>::quiet_NaN();
};

struct TrainHooks {
  std::function<void(long epoch, const MlpNetwork<double>& solution, const MlpNetwork<double>& test)> on_checkpoint;
  std::function<void(const EpochRecord&)> on_record;
};

/// Fixed evaluation points for relative L² errors: a 256-per-axis midpoint
/// tensor grid when the (space-time) dimension is at most 2, otherwise 10⁵
/// uniform points from a fixed seed.
struct EvaluationGrid {
  PointSet points;
  Vec exact;
};

inline EvaluationGrid make_evaluation_grid(const PdeProblem& problem) {
  if (!problem.has_exact_solution()) throw Error("problem '" + problem.name() + "' has no exact solution");
  const Domain& domain = problem.domain();
  const int n = problem.dim();
  const int rows = problem.input_dim();
  std::vector<Vec> columns;
  if (rows <= 2) {
    constexpr int per_axis = 256;
    Vec lo(rows), hi(rows);
    if (domain.is_box()) {
      lo.head(n) = domain.lower();
      hi.head(n) = domain.upper();
    } else {
      lo.head(n) = domain.center().array() - domain.radius();
      hi.head(n) = domain.center().array() + domain.radius();
    }
    if (problem.parabolic()) {
      lo[n] = 0.0;
      hi[n] = problem.horizon();
    }
    std::vector<int> idx(static_cast<std::size_t>(rows), 0);
    while (true) {
      Vec p(rows);
      for (int k = 0; k < rows; ++k) p[k] = lo[k] + (idx[static_cast<std::size_t>(k)] + 0.5) * (hi[k] - lo[k]) / per_axis;
      if (domain.is_box() || domain.contains(p.head(n))) columns.push_back(p);
      int k = 0;
      while (k < rows && ++idx[static_cast<std::size_t>(k)] == per_axis) idx[static_cast<std::size_t>(k++)] = 0;
      if (k == rows) break;
    }
  } else {
    RandomStream rng(0xe7a1u);
    const PointSet spatial = domain.sample_interior(100000, rng);
    for (Eigen::Index c = 0; c < spatial.cols(); ++c) {
      Vec p(rows);
      p.head(n) = spatial.col(c);
      if (problem.parabolic()) p[n] = problem.horizon() * rng.open_uniform();
      columns.push_back(p);
    }
  }
  EvaluationGrid grid;
  grid.points.resize(rows, static_cast<Eigen::Index>(columns.size()));
  grid.exact.resize(grid.points.cols());
  for (Eigen::Index c = 0; c < grid.points.cols(); ++c) {
    grid.points.col(c) = columns[static_cast<std::size_t>(c)];
    grid.exact[c] = problem.exact(grid.points.col(c).head(n), problem.parabolic() ? grid.points(n, c) : 0.0);
  }
  return grid;
}

/// √(Σ(f − f*)² / Σ f*²) over the evaluation grid.
inline double relative_l2_error(const Vec& values, const Vec& exact) {
  std::vector<double> diff(static_cast<std::size_t>(values.size())), ref(static_cast<std::size_t>(values.size()));
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    diff[static_cast<std::size_t>(i)] = (values[i] - exact[i]) * (values[i] - exact[i]);
    ref[static_cast<std::size_t>(i)] = exact[i] * exact[i];
  }
  return std::sqrt(pairwise_sum(diff) / pairwise_sum(ref));
}

inline double evaluate_l2_error(const FieldView& f, const PdeProblem& problem) {
  const EvaluationGrid grid = make_evaluation_grid(problem);
  return relative_l2_error(f(grid.points), grid.exact);
}

template <class T>
double evaluate_l2_error(const MlpNetwork<T>& f, const PdeProblem& problem) {
  if (f.input_width() != problem.input_dim()) throw Error("network input width does not match the problem");
  const EvaluationGrid grid = make_evaluation_grid(problem);
  return relative_l2_error(f.forward_batch(grid.points), grid.exact);
}

/// Adversarial training: each epoch takes one Adam descent step on the
/// solution network, then `test_steps_per_epoch` Adam ascent steps on the
/// test network, every half-step on a fresh batch.
template <class T>
TrainResult train_with(const PdeProblem& problem, const TrainConfig& config, const TrainHooks& hooks = {}) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  const DomainMeasures meas = measures(problem.domain());
  const BatchSizes sizes{config.m_interior, meas.dirichlet > 0.0 ? config.m_dirichlet : 0,
                         meas.neumann > 0.0 ? config.m_neumann : 0};
  const StepParams step = config.step();

  MlpNetwork<T> solution = MlpNetwork<T>::xavier(config.network.widths(problem.input_dim()), config.network.activation,
                                                 config.network.seed);
  MaskedTestFunction<T> test(
      DirichletMask(problem.domain(), problem.parabolic() ? std::optional<double>(problem.horizon()) : std::nullopt),
      MlpNetwork<T>::xavier(config.network.widths(problem.input_dim()), config.network.activation, config.network.seed + 1));
  AdamState<T> solution_state(solution.parameter_count());
  AdamState<T> test_state(test.network().parameter_count());

  std::optional<EvaluationGrid> grid;
  if (problem.has_exact_solution()) grid = make_evaluation_grid(problem);

  const FieldView solution_view([&solution](const PointSet& p) { return solution.forward_batch(p); });
  const FieldView test_view([&test](const PointSet& p) { return test.values(p); });

  TrainResult result{solution.template cast<double>(), test.network().template cast<double>(), {}, TrainStatus::completed,
                     "", 0, check_sampling_condition(step, config.m_interior), 0.0,
                     std::numeric_limits<double>::quiet_NaN()};
  const RandomStream master(config.seed);
  auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  };

  for (long epoch = 1; epoch <= config.epochs; ++epoch) {
    try {
      const RandomStream epoch_rng = master.split(static_cast<std::uint64_t>(epoch));

      RandomStream descent_rng = epoch_rng.split(0);
      const Batch descent_batch = sample_batch(problem, sizes, descent_rng);
      const LossAssembly descent =
          assemble_loss(problem, solution_view, test_view, descent_batch, step, config.loss_mode, descent_rng, config.gradient);
      const auto solution_grad = solution.param_gradient_batch(descent.solution_points, descent.solution_weights);
      adam_step(solution.parameters(), solution_grad, solution_state, config.lr_solution, Direction::descent, epoch);

      double test_grad_norm = 0.0;
      if (config.lr_test > 0.0) {
        for (int k = 0; k < config.test_steps_per_epoch; ++k) {
          RandomStream ascent_rng = epoch_rng.split(1 + static_cast<std::uint64_t>(k));
          const Batch ascent_batch = sample_batch(problem, sizes, ascent_rng);
          const LossAssembly ascent =
              assemble_loss(problem, solution_view, test_view, ascent_batch, step, config.loss_mode, ascent_rng, config.gradient);
          const auto test_grad = test.param_gradient_batch(ascent.test_points, ascent.test_weights);
          adam_step(test.network().parameters(), test_grad, test_state, config.lr_test, Direction::ascent, epoch);
          test_grad_norm = static_cast<double>(test_grad.norm());
        }
      }
      if (!solution.parameters().allFinite() || !test.network().parameters().allFinite())
        throw DivergedError("non-finite parameters", epoch);

      if (epoch % config.eval_every == 0 || epoch == config.epochs) {
        EpochRecord r;
        r.epoch = epoch;
        const LossEstimate& e = descent.estimate;
        r.loss = e.total;
        r.s_i = e.s_interior;
        r.s_d = e.s_dirichlet;
        r.s_n = e.s_neumann;
        r.se_i = e.std_errors[0];
        r.se_d = e.std_errors[1];
        r.se_n = e.std_errors[2];
        if (grid) r.l2_rel = relative_l2_error(solution.forward_batch(grid->points), grid->exact);
        r.gnorm_f = static_cast<double>(solution_grad.norm());
        r.gnorm_rho = test_grad_norm;
        r.ms = config.record_wall_clock ? elapsed_ms() : 0.0;
        result.metrics.records.push_back(r);
        if (hooks.on_record) hooks.on_record(r);
      }
      if (config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 && hooks.on_checkpoint) {
        hooks.on_checkpoint(epoch, solution.template cast<double>(), test.network().template cast<double>());
      }
    } catch (const NumericalError& err) {
      const auto* diverged = dynamic_cast<const DivergedError*>(&err);
      result.status = TrainStatus::diverged;
      result.diverged_epoch = diverged && diverged->epoch() > 0 ? diverged->epoch() : epoch;
      std::string what = err.what();
      const std::string prefix = "diverged at epoch ";
      result.message = what.rfind(prefix, 0) == 0 ? what : prefix + std::to_string(result.diverged_epoch) + ": " + what;
      break;
    }
  }

  result.solution = solution.template cast<double>();
  result.test = test.network().template cast<double>();
  if (grid && result.status == TrainStatus::completed)
    result.final_l2_rel = relative_l2_error(result.solution.forward_batch(grid->points), grid->exact);
  result.wall_ms = elapsed_ms();
  return result;
}

inline TrainResult train(const PdeProblem& problem, const TrainConfig& config, const TrainHooks& hooks = {}) {
  return config.precision == Precision::f64 ? train_with<double>(problem, config, hooks)
                                            : train_with<float>(problem, config, hooks);
}

}  // namespace ardo
