#pragma once

// Oracle suites shared by `ardo verify` and the acceptance binary. Each check
// builds its own fixtures from fixed seeds, so results are reproducible.

#include "ardo/error.hpp"
#include "ardo/estimator.hpp"
#include "ardo/neural.hpp"
#include "ardo/oracle.hpp"
#include "ardo/problem.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

namespace ardo::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct SuiteReport {
  std::string suite;
  std::vector<CheckResult> checks;

  bool passed() const {
    for (const auto& c : checks) {
      if (!c.passed) return false;
    }
    return !checks.empty();
  }

  std::string table() const {
    std::string out;
    char line[512];
    for (const auto& c : checks) {
      std::snprintf(line, sizeof line, "%-4s %-34s %8.2fs  %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.seconds,
                    c.detail.c_str());
      out += line;
    }
    return out;
  }
};

inline std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

/// Runs `body`, timing it; exceptions become failures carrying the message.
template <class Fn>
CheckResult timed(const std::string& name, Fn body) {
  const auto start = std::chrono::steady_clock::now();
  CheckResult r;
  try {
    r = body();
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("error: ") + e.what();
  }
  r.name = name;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

/// Xavier network with every parameter shifted by U(−spread, spread). The
/// shift makes the biases nonzero, so the network has no parity symmetry.
inline MlpNetwork<double> randomized_network(std::vector<int> widths, std::uint64_t seed, double spread = 0.3) {
  auto net = MlpNetwork<double>::xavier(std::move(widths), Activation::tanh, seed);
  RandomStream rng(RandomStream(seed).split(0xb1a5));
  for (Eigen::Index k = 0; k < net.parameters().size(); ++k) net.parameters()[k] += rng.uniform(-spread, spread);
  return net;
}

inline Vec augment(const PdeProblem& problem, const Vec& x, double t) {
  Vec z(problem.input_dim());
  z.head(problem.dim()) = x;
  if (problem.parabolic()) z[problem.dim()] = t;
  return z;
}

/// Pointwise view of an MLP on the problem's (x, t) inputs.
inline ScalarField network_field(const PdeProblem& problem, std::shared_ptr<const MlpNetwork<double>> net) {
  return [&problem, net](const Vec& x, double t) { return net->forward(augment(problem, x, t)); };
}

/// Smooth test function: Dirichlet mask times a randomized network.
inline MaskedTestFunction<double> masked_network(const PdeProblem& problem, std::uint64_t seed) {
  return MaskedTestFunction<double>(
      DirichletMask(problem.domain(), problem.parabolic() ? std::optional<double>(problem.horizon()) : std::nullopt),
      randomized_network({problem.input_dim(), 16, 16, 1}, seed));
}

inline ScalarField masked_field(const PdeProblem& problem, std::uint64_t seed) {
  auto rho = std::make_shared<const MaskedTestFunction<double>>(masked_network(problem, seed));
  return [rho](const Vec& x, double t) { return (*rho)(x, t); };
}

inline ScalarField exact_field(const PdeProblem& problem) {
  return [&problem](const Vec& x, double t) { return problem.exact(x, t); };
}

/// Weak-form identity by quadrature: the exact solution of ou_stationary in
/// 1D makes S_I + S_D + S_N vanish for a smooth masked ρ.
inline CheckResult weakform_identity_quadrature() {
  return timed("weak-form identity (quadrature)", [] {
    const PdeProblem problem = builtin_problem("ou_stationary", 1);
    const QuadratureGrid grid = make_quadrature_grid(problem, 32);
    const WeakFormTerms w = weakform_quadrature(problem, exact_field(problem), masked_field(problem, 101), grid);
    const double total = std::abs(w.sum());
    return CheckResult{"", total < 1e-6,
                       format("|S_I+S_D+S_N| = %.3e (S_I = %.6f, tol 1e-6)", total, w.s_interior)};
  });
}

/// The Monte Carlo estimator on the same fixture: |Ŝ| within five combined
/// standard errors at τ = 1e-4.
inline CheckResult weakform_identity_monte_carlo(std::size_t m_interior = 1000000) {
  return timed("weak-form identity (Monte Carlo)", [m_interior] {
    const PdeProblem problem = builtin_problem("ou_stationary", 1);
    const FieldView f = pointwise(problem, exact_field(problem));
    const MaskedTestFunction<double> test = masked_network(problem, 101);
    const FieldView rho([&test](const PointSet& p) { return test.values(p); });
    RandomStream rng(0x1de7);
    const Batch batch = sample_batch(problem, {m_interior, 1000, 0}, rng);
    const LossEstimate e = estimate_loss(problem, f, rho, batch, StepParams{1e-4, 1e-4, 1}, LossMode::raw, rng);
    const double band = 5.0 * e.combined_std_error();
    return CheckResult{"", std::abs(e.total) < band,
                       format("|S| = %.3e, 5 std errors = %.3e (M_I = %zu)", std::abs(e.total), band, m_interior)};
  });
}

/// Integration by parts: for smooth non-solutions f, the weak form with f's
/// own traces equals ∫ρ · (strong residual of f).
inline CheckResult integration_by_parts(int count = 20) {
  return timed("integration by parts", [count] {
    struct Case {
      PdeProblem problem;
      int panels;
    };
    std::vector<Case> cases;
    cases.push_back({builtin_problem("ou_stationary", 1, {{0, Side::upper}}), 32});
    cases.push_back({builtin_problem("manufactured_semilinear", 1), 32});
    cases.push_back({builtin_problem("heat_parabolic", 1), 8});
    cases.push_back({builtin_problem("manufactured_elliptic", 2, {{1, Side::lower}}), 8});
    double worst = 0.0;
    for (int k = 0; k < count; ++k) {
      const Case& c = cases[static_cast<std::size_t>(k) % cases.size()];
      const PdeProblem& problem = c.problem;
      const QuadratureGrid grid = make_quadrature_grid(problem, c.panels);
      auto net = std::make_shared<const MlpNetwork<double>>(
          randomized_network({problem.input_dim(), 8, 8, 1}, 500 + static_cast<std::uint64_t>(k), 0.5));
      const ScalarField f = network_field(problem, net);
      const ScalarField rho = masked_field(problem, 900 + static_cast<std::uint64_t>(k));
      const double weak = weakform_quadrature_of_traces(problem, f, rho, grid).sum();
      const double strong = strong_residual_quadrature(problem, f, rho, grid);
      worst = std::max(worst, std::abs(weak - strong) / std::max(std::abs(strong), 1e-300));
    }
    return CheckResult{"", worst < 1e-5, format("worst relative gap %.3e over %d functions (tol 1e-5)", worst, count)};
  });
}

inline const std::vector<double>& tau_ladder() {
  static const std::vector<double> taus{1e-1, 1e-2, 1e-3, 1e-4};
  return taus;
}

/// Constant-coefficient fixture with zero source and data, for generator and
/// noise experiments.
inline PdeProblem constant_coefficient_problem(Mat sigma, Vec drift, double half_width = 1.0) {
  ProblemDefinition def;
  def.name = "constant_coefficients";
  const int n = static_cast<int>(drift.size());
  def.domain = Domain::cube(n, -half_width, half_width);
  def.n_w = static_cast<int>(sigma.cols());
  def.sigma = [sigma](const Vec&, double) { return sigma; };
  def.drift = [drift](const Vec&, double) { return drift; };
  def.source = [](double, const Vec&, double) { return 0.0; };
  def.dirichlet_data = [](const Vec&, double) { return 0.0; };
  return PdeProblem(std::move(def));
}

/// Quadratic ρ, constant σ, zero drift: the one-step quotient is unbiased at
/// every τ.
inline CheckResult generator_quadratic(std::size_t samples = 100000) {
  return timed("generator, quadratic test function", [samples] {
    Mat sigma(2, 2);
    sigma << 1.0, 0.3, 0.0, 0.8;
    const PdeProblem problem = constant_coefficient_problem(sigma, Vec::Zero(2));
    Mat q(2, 2);
    q << 1.5, -0.4, -0.4, 0.7;
    Vec c(2);
    c << 0.2, -1.1;
    const ScalarField rho = [q, c](const Vec& x, double) { return x.dot(q * x) + c.dot(x); };
    Vec x(2);
    x << 0.3, -0.2;
    const auto rows = generator_consistency_experiment(problem, rho, x, 0.0, tau_ladder(), samples, 7);
    bool ok = true;
    double worst = 0.0;
    for (const auto& r : rows) {
      const double z = r.bias / r.std_error;
      worst = std::max(worst, z);
      ok = ok && z <= 4.0;
    }
    return CheckResult{"", ok, format("max |bias|/std error = %.2f over 4 steps (tol 4)", worst)};
  });
}

/// ρ = x³ with a = 1, b = 1 at x = 0: the bias 3τ + τ² must shrink with τ.
inline CheckResult generator_cubic(std::size_t samples = 100000) {
  return timed("generator, cubic test function", [samples] {
    const PdeProblem problem = constant_coefficient_problem(Mat::Identity(1, 1), Vec::Ones(1));
    const ScalarField rho = [](const Vec& x, double) { return x[0] * x[0] * x[0]; };
    const auto rows = generator_consistency_experiment(problem, rho, Vec::Zero(1), 0.0, tau_ladder(), samples, 7);
    bool ok = true;
    std::string biases;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (k > 0) ok = ok && rows[k].bias < rows[k - 1].bias;
      biases += format("%s%.2e", k ? " > " : "", rows[k].bias);
    }
    return CheckResult{"", ok, "bias " + biases};
  });
}

/// Slope of log Var(Ŝ_I) against log τ on ou_stationary in 1D with fixed
/// networks; `noiseless` replaces σ by zero.
inline CheckResult variance_scaling(bool noiseless, std::size_t m_interior = 10000, std::size_t trials = 200) {
  return timed(noiseless ? "variance scaling, sigma = 0" : "variance scaling, sigma = I", [=] {
    ProblemDefinition def = builtin_problem("ou_stationary", 1).definition();
    if (noiseless) def.sigma = [](const Vec&, double) -> Mat { return Mat::Zero(1, 1); };
    const PdeProblem problem(std::move(def));
    const auto f = randomized_network({1, 16, 16, 1}, 31);
    const MaskedTestFunction<double> rho = masked_network(problem, 32);
    const VarianceScaling v = variance_scaling_experiment(
        problem, FieldView([&f](const PointSet& p) { return f.forward_batch(p); }),
        FieldView([&rho](const PointSet& p) { return rho.values(p); }), tau_ladder(), m_interior, trials, 11);
    const double lo = noiseless ? -0.25 : -1.25;
    const double hi = noiseless ? 0.25 : -0.75;
    return CheckResult{"", v.slope >= lo && v.slope <= hi, format("slope %.3f (band [%.2f, %.2f])", v.slope, lo, hi)};
  });
}

namespace detail {

/// Σ_k u_k · g(x_k) in long double for a network given in long double.
inline long double weighted_output(const MlpNetwork<long double>& net, const PointSet& points, const Vec& upstream,
                                   const Vec& mask) {
  const auto out = net.forward_batch_native(points);
  long double acc = 0.0L;
  for (Eigen::Index k = 0; k < points.cols(); ++k)
    acc += static_cast<long double>(upstream[k]) * static_cast<long double>(mask[k]) * out[k];
  return acc;
}

/// Largest relative gap between the 64-bit backward pass and a central
/// difference (step h) evaluated in extended precision, over `coords` random
/// parameter coordinates.
inline double gradient_gap(const MlpNetwork<double>& net, const PointSet& points, const Vec& upstream, const Vec& mask,
                           int coords, double h, RandomStream& rng) {
  const Vec weights = upstream.cwiseProduct(mask);
  const auto grad = net.param_gradient_batch(points, weights);
  MlpNetwork<long double> wide = net.cast<long double>();
  double worst = 0.0;
  for (int k = 0; k < coords; ++k) {
    const auto i = static_cast<Eigen::Index>(rng.next_u64() % static_cast<std::uint64_t>(net.parameter_count()));
    const long double saved = wide.parameters()[i];
    wide.parameters()[i] = saved + h;
    const long double up = weighted_output(wide, points, upstream, mask);
    wide.parameters()[i] = saved - h;
    const long double down = weighted_output(wide, points, upstream, mask);
    wide.parameters()[i] = saved;
    const double fd = static_cast<double>((up - down) / (2.0L * h));
    worst = std::max(worst, std::abs(grad[i] - fd) / std::max(std::abs(fd), 1e-300));
  }
  return worst;
}

}  // namespace detail

/// Backpropagated parameter gradients of the solution network and of the
/// masked test function against central differences.
inline CheckResult parameter_gradients(int coords = 20) {
  return timed("parameter gradients", [coords] {
    const PdeProblem problem = builtin_problem("heat_parabolic", 1);
    RandomStream rng(0x9a7d);
    const Batch batch = sample_batch(problem, {64, 0, 0}, rng);
    Vec upstream(batch.interior.cols());
    for (Eigen::Index k = 0; k < upstream.size(); ++k) upstream[k] = rng.uniform(-1.0, 1.0);
    const auto f = randomized_network({2, 32, 32, 32, 1}, 41);
    const auto rho_net = randomized_network({2, 32, 32, 32, 1}, 42);
    const DirichletMask mask(problem.domain(), problem.horizon());
    const double gap_f = detail::gradient_gap(f, batch.interior, upstream, Vec::Ones(upstream.size()), coords, 1e-6, rng);
    const double gap_rho = detail::gradient_gap(rho_net, batch.interior, upstream, mask.values(batch.interior), coords, 1e-6, rng);
    const double worst = std::max(gap_f, gap_rho);
    return CheckResult{"", worst < 1e-6,
                       format("max relative error: solution %.2e, test %.2e (tol 1e-6)", gap_f, gap_rho)};
  });
}

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"identities", "scaling", "gradients"};
  return names;
}

inline SuiteReport run_suite(const std::string& name) {
  SuiteReport r{name, {}};
  if (name == "identities") {
    r.checks = {weakform_identity_quadrature(), weakform_identity_monte_carlo(), integration_by_parts(),
                generator_quadratic(), generator_cubic()};
  } else if (name == "scaling") {
    r.checks = {variance_scaling(false), variance_scaling(true)};
  } else if (name == "gradients") {
    r.checks = {parameter_gradients()};
  } else {
    throw Error("unknown verify suite '" + name + "' (expected identities, scaling or gradients)");
  }
  return r;
}

}  // namespace ardo::verify
