#pragma once

#include "ardo/error.hpp"
#include "ardo/geometry.hpp"
#include "ardo/types.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ardo {

/// Time horizon and initial datum of a parabolic problem.
struct TimeHorizon {
  double horizon = 0.0;
  std::function<double(const Vec& x)> initial;
};

/// Raw ingredients of a Fokker-Planck problem
///
///   [∂f/∂t] − ½ Σ ∂²(a_ij f)/∂x_i∂x_j + Σ ∂(b_j f)/∂x_j + R(f, x, t) = 0
///
/// with a = σσᵀ, f = g on the Dirichlet part and
/// Σ_j ν_j [½ Σ_i ∂(a_ij f)/∂x_i − b_j f] = φ on the Neumann part.
/// Only σ is supplied; a is always derived from it.
struct ProblemDefinition {
  std::string name = "custom";
  Domain domain = Domain::cube(1, 0.0, 1.0);
  int n_w = 1;
  std::function<Mat(const Vec& x, double t)> sigma;
  std::function<Vec(const Vec& x, double t)> drift;
  std::function<double(double f, const Vec& x, double t)> source;
  /// ∂R/∂f. Optional; a central difference in the f value is used otherwise.
  std::function<double(double f, const Vec& x, double t)> source_df;
  ScalarField dirichlet_data;
  ScalarField neumann_data;
  std::optional<TimeHorizon> time;
  ScalarField exact_solution;
  /// Spatial gradient of the exact solution, when known (used to derive φ).
  std::function<Vec(const Vec& x, double t)> exact_gradient;
};

/// Immutable, validated PDE instance.
class PdeProblem {
 public:
  explicit PdeProblem(ProblemDefinition def) : def_(std::move(def)) { validate(); }

  const ProblemDefinition& definition() const noexcept { return def_; }
  const std::string& name() const noexcept { return def_.name; }
  const Domain& domain() const noexcept { return def_.domain; }
  int dim() const noexcept { return def_.domain.dim(); }
  int n_w() const noexcept { return def_.n_w; }
  bool parabolic() const noexcept { return def_.time.has_value(); }
  /// Width of network inputs: n, plus one time coordinate when parabolic.
  int input_dim() const noexcept { return dim() + (parabolic() ? 1 : 0); }
  double horizon() const { return parabolic() ? def_.time->horizon : 0.0; }
  bool has_exact_solution() const noexcept { return static_cast<bool>(def_.exact_solution); }

  Mat sigma(const Vec& x, double t = 0.0) const { return def_.sigma(x, t); }

  /// a = σσᵀ, symmetric by construction.
  Mat diffusion(const Vec& x, double t = 0.0) const {
    const Mat s = def_.sigma(x, t);
    return s * s.transpose();
  }

  Vec drift(const Vec& x, double t = 0.0) const { return def_.drift(x, t); }
  double source(double f, const Vec& x, double t = 0.0) const { return def_.source(f, x, t); }

  double source_derivative(double f, const Vec& x, double t = 0.0) const {
    if (def_.source_df) return def_.source_df(f, x, t);
    const double h = 1e-6 * std::max(1.0, std::abs(f));
    return (def_.source(f + h, x, t) - def_.source(f - h, x, t)) / (2.0 * h);
  }

  double dirichlet(const Vec& x, double t = 0.0) const { return def_.dirichlet_data(x, t); }
  double neumann(const Vec& x, double t = 0.0) const { return def_.neumann_data ? def_.neumann_data(x, t) : 0.0; }
  double initial(const Vec& x) const { return def_.time->initial(x); }
  double exact(const Vec& x, double t = 0.0) const {
    if (!def_.exact_solution) throw Error("problem '" + def_.name + "' has no exact solution");
    return def_.exact_solution(x, t);
  }

 private:
  void validate() const {
    if (!def_.sigma || !def_.drift || !def_.source || !def_.dirichlet_data)
      throw Error("problem '" + def_.name + "' is missing sigma, drift, source or Dirichlet data");
    if (def_.n_w < 1) throw Error("Brownian dimension must be positive");
    if (!def_.domain.has_dirichlet()) throw Error("problem requires a nonempty Dirichlet boundary");
    if (def_.domain.boundary_measure(FaceKind::neumann) > 0.0 && !def_.neumann_data)
      throw Error("problem '" + def_.name + "' has a Neumann boundary but no Neumann data");
    const Vec probe = def_.domain.is_box() ? Vec(0.5 * (def_.domain.lower() + def_.domain.upper())) : def_.domain.center();
    const Mat s = def_.sigma(probe, 0.0);
    if (s.rows() != dim() || s.cols() != def_.n_w) throw Error("sigma must be an n x n_W matrix");
    if (def_.drift(probe, 0.0).size() != dim()) throw Error("drift must have length n");
    if (def_.time) {
      if (!(def_.time->horizon > 0.0) || !std::isfinite(def_.time->horizon)) throw Error("time horizon must be positive");
      if (!def_.time->initial) throw Error("parabolic problem requires an initial datum");
      if (!std::isfinite(def_.time->initial(probe))) throw Error("initial datum is not finite");
    }
    if (def_.exact_solution) {
      RandomStream rng(0x0ddba11);
      for (const BoundaryPoint& p : def_.domain.sample_boundary(FaceKind::dirichlet, 100, rng)) {
        const double t = parabolic() ? rng.uniform(0.0, horizon()) : 0.0;
        const double gap = std::abs(def_.exact_solution(p.position, t) - def_.dirichlet_data(p.position, t));
        if (!(gap <= 1e-8)) throw Error("exact solution of '" + def_.name + "' violates its Dirichlet data");
      }
    }
  }

  ProblemDefinition def_;
};

namespace detail {

inline ProblemDefinition unit_noise_box(int dim, double half_width, const std::vector<Face>& neumann_faces) {
  ProblemDefinition def;
  def.domain = Domain::cube(dim, -half_width, half_width, neumann_faces);
  def.n_w = dim;
  def.sigma = [dim](const Vec&, double) -> Mat { return Mat::Identity(dim, dim); };
  def.drift = [](const Vec& x, double) -> Vec { return -x; };
  def.source = [](double, const Vec&, double) { return 0.0; };
  def.source_df = [](double, const Vec&, double) { return 0.0; };
  return def;
}

/// Sets g from the exact solution and φ = ν·(½ a ∇f − b f) for a = I.
inline void attach_boundary_data(ProblemDefinition& def) {
  const ScalarField exact = def.exact_solution;
  const auto grad = def.exact_gradient;
  const auto drift = def.drift;
  const Domain domain = def.domain;
  def.dirichlet_data = exact;
  def.neumann_data = [exact, grad, drift, domain](const Vec& x, double t) {
    // The outward normal of the face containing x.
    Vec normal = Vec::Zero(x.size());
    if (domain.is_box()) {
      int best = 0;
      double best_gap = 1e300;
      for (int k = 0; k < x.size(); ++k) {
        for (Side side : {Side::lower, Side::upper}) {
          const double gap = std::abs(x[k] - (side == Side::lower ? domain.lower()[k] : domain.upper()[k]));
          if (gap < best_gap && domain.kind_of({k, side}) == FaceKind::neumann) {
            best_gap = gap;
            best = 2 * k + (side == Side::upper ? 1 : 0);
          }
        }
      }
      normal[best / 2] = best % 2 == 1 ? 1.0 : -1.0;
    } else {
      normal = (x - domain.center()).normalized();
    }
    return normal.dot(0.5 * grad(x, t) - drift(x, t) * exact(x, t));
  };
}

}  // namespace detail

inline const std::vector<std::string>& builtin_problem_names() {
  static const std::vector<std::string> names{"ou_stationary", "manufactured_elliptic", "manufactured_semilinear",
                                              "heat_parabolic", "ou_parabolic"};
  return names;
}

/// Benchmark problems with known solutions. All live on [−2.5, 2.5]ⁿ with
/// σ = I; faces in `neumann_faces` receive the exact conormal flux as φ.
inline PdeProblem builtin_problem(const std::string& name, int dim, const std::vector<Face>& neumann_faces = {}) {
  if (dim < 1) throw Error("problem dimension must be positive");
  constexpr double half_width = 2.5;
  constexpr double t0 = 0.25;
  constexpr double horizon = 0.5;
  const double n = dim;

  ProblemDefinition def = detail::unit_noise_box(dim, half_width, neumann_faces);
  def.name = name;

  if (name == "ou_stationary") {
    def.exact_solution = [](const Vec& x, double) { return std::exp(-x.squaredNorm()); };
    def.exact_gradient = [](const Vec& x, double) -> Vec { return -2.0 * std::exp(-x.squaredNorm()) * x; };
  } else if (name == "manufactured_elliptic" || name == "manufactured_semilinear") {
    // f* = exp(−|x|²/2)(1 + ½cos x₁); with b = −x, a = I the linear source is
    // R_lin = ½Δf* + ∇·(x f*) = e^{−|x|²/2} [(1 + ½cos x₁)(n − |x|²)/2 − ¼cos x₁].
    auto exact = [](const Vec& x, double) { return std::exp(-0.5 * x.squaredNorm()) * (1.0 + 0.5 * std::cos(x[0])); };
    auto linear_source = [n](const Vec& x, double) {
      const double r2 = x.squaredNorm();
      return std::exp(-0.5 * r2) * ((1.0 + 0.5 * std::cos(x[0])) * 0.5 * (n - r2) - 0.25 * std::cos(x[0]));
    };
    def.exact_solution = exact;
    def.exact_gradient = [](const Vec& x, double) -> Vec {
      const double g = std::exp(-0.5 * x.squaredNorm());
      Vec grad = -g * (1.0 + 0.5 * std::cos(x[0])) * x;
      grad[0] -= 0.5 * g * std::sin(x[0]);
      return grad;
    };
    if (name == "manufactured_elliptic") {
      def.source = [linear_source](double, const Vec& x, double t) { return linear_source(x, t); };
    } else {
      def.source = [linear_source, exact](double f, const Vec& x, double t) {
        const double fs = exact(x, t);
        return f * f * f - fs * fs * fs + linear_source(x, t);
      };
      def.source_df = [](double f, const Vec&, double) { return 3.0 * f * f; };
    }
  } else if (name == "heat_parabolic") {
    // Heat kernel started at time −t0: f* = (2π(t+t0))^{−n/2} exp(−|x|²/(2(t+t0))).
    def.drift = [dim](const Vec&, double) -> Vec { return Vec::Zero(dim); };
    def.exact_solution = [n](const Vec& x, double t) {
      const double s = t + t0;
      return std::pow(2.0 * std::numbers::pi * s, -0.5 * n) * std::exp(-x.squaredNorm() / (2.0 * s));
    };
    def.exact_gradient = [n](const Vec& x, double t) -> Vec {
      const double s = t + t0;
      return -std::pow(2.0 * std::numbers::pi * s, -0.5 * n) * std::exp(-x.squaredNorm() / (2.0 * s)) / s * x;
    };
  } else if (name == "ou_parabolic") {
    // Centered Gaussian whose variance obeys v' = 1 − 2v, v(0) = 1/4.
    auto variance = [](double t) { return 0.5 - 0.25 * std::exp(-2.0 * t); };
    def.exact_solution = [n, variance](const Vec& x, double t) {
      const double v = variance(t);
      return std::pow(2.0 * std::numbers::pi * v, -0.5 * n) * std::exp(-x.squaredNorm() / (2.0 * v));
    };
    def.exact_gradient = [n, variance](const Vec& x, double t) -> Vec {
      const double v = variance(t);
      return -std::pow(2.0 * std::numbers::pi * v, -0.5 * n) * std::exp(-x.squaredNorm() / (2.0 * v)) / v * x;
    };
  } else {
    std::string list;
    for (const auto& known : builtin_problem_names()) list += (list.empty() ? "" : ", ") + known;
    throw Error("unknown problem '" + name + "'; available: " + list);
  }

  if (name == "heat_parabolic" || name == "ou_parabolic") {
    const ScalarField exact = def.exact_solution;
    def.time = TimeHorizon{horizon, [exact](const Vec& x) { return exact(x, 0.0); }};
  }
  detail::attach_boundary_data(def);
  return PdeProblem(std::move(def));
}

namespace detail {

/// Strong-form residual by second-order central differences with step h,
/// applied to the products a_ij·f and b_j·f. No domain checks.
inline double strong_residual(const PdeProblem& problem, const ScalarField& candidate, const Vec& x, double t,
                              double h, double h_time) {
  const int n = problem.dim();
  auto a_times_f = [&](const Vec& y, int i, int j) { return problem.diffusion(y, t)(i, j) * candidate(y, t); };
  auto b_times_f = [&](const Vec& y, int j) { return problem.drift(y, t)[j] * candidate(y, t); };

  double second = 0.0;
  Vec y = x;
  for (int i = 0; i < n; ++i) {
    y[i] = x[i] + h;
    const double up = a_times_f(y, i, i);
    y[i] = x[i] - h;
    const double down = a_times_f(y, i, i);
    y[i] = x[i];
    second += (up - 2.0 * a_times_f(y, i, i) + down) / (h * h);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      double mixed = 0.0;
      for (int si : {1, -1}) {
        for (int sj : {1, -1}) {
          y = x;
          y[i] += si * h;
          y[j] += sj * h;
          mixed += si * sj * a_times_f(y, i, j);
        }
      }
      y = x;
      second += mixed / (4.0 * h * h);
    }
  }

  double first = 0.0;
  for (int j = 0; j < n; ++j) {
    y = x;
    y[j] = x[j] + h;
    const double up = b_times_f(y, j);
    y[j] = x[j] - h;
    first += (up - b_times_f(y, j)) / (2.0 * h);
  }

  double residual = -0.5 * second + first + problem.source(candidate(x, t), x, t);
  if (problem.parabolic()) residual += (candidate(x, t + h_time) - candidate(x, t - h_time)) / (2.0 * h_time);
  return residual;
}

}  // namespace detail

/// Strong-form residual of `candidate` at an interior point (x, t), using
/// second-order central differences with step h = 1e-4 · diameter. Test
/// oracle only; training never calls this.
inline double pde_residual(const PdeProblem& problem, const ScalarField& candidate, const Vec& x, double t = 0.0) {
  const double h = 1e-4 * problem.domain().diameter();
  if (problem.domain().distance_to_boundary(x) < 2.0 * h) throw Error("stencil exits domain");
  const double h_time = 1e-4 * problem.horizon();
  if (problem.parabolic() && (t < 2.0 * h_time || t > problem.horizon() - 2.0 * h_time))
    throw Error("stencil exits domain");
  return detail::strong_residual(problem, candidate, x, t, h, h_time);
}

}  // namespace ardo
