#pragma once

#include "ardo/error.hpp"
#include "ardo/geometry.hpp"
#include "ardo/parallel.hpp"
#include "ardo/problem.hpp"
#include "ardo/random.hpp"
#include "ardo/types.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace ardo {

/// Interior step τ, boundary difference step τ̃ and SDE replicates per point.
struct StepParams {
  double tau = 1e-3;
  double tau_tilde = 1e-4;
  int replicates = 1;

  void validate() const {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw Error("tau must be finite and positive");
    if (!(tau_tilde > 0.0) || !std::isfinite(tau_tilde)) throw Error("tau_tilde must be finite and positive");
    if (replicates < 1) throw Error("replicates must be at least 1");
  }
};

enum class LossMode { raw, normalized };

inline std::string to_string(LossMode mode) { return mode == LossMode::raw ? "raw" : "normalized"; }

inline LossMode parse_loss_mode(const std::string& name) {
  if (name == "raw") return LossMode::raw;
  if (name == "normalized") return LossMode::normalized;
  throw Error("unknown loss mode '" + name + "' (expected raw or normalized)");
}

/// Guard for the normalized loss denominator.
inline constexpr double kNormEpsilon = 1e-10;

struct LossEstimate {
  double s_interior = 0.0;
  double s_dirichlet = 0.0;
  double s_neumann = 0.0;
  double total = 0.0;
  /// Monte Carlo standard errors of (Ŝ_I, Ŝ_D, Ŝ_N).
  std::array<double, 3> std_errors{};
  /// Monte Carlo estimate of ∫ρ² over the interior (space-time when parabolic).
  double test_norm = 0.0;

  double sum() const noexcept { return s_interior + s_dirichlet + s_neumann; }
  double combined_std_error() const noexcept {
    return std::sqrt(std_errors[0] * std_errors[0] + std_errors[1] * std_errors[1] + std_errors[2] * std_errors[2]);
  }
};

/// Evaluation-only handle on a scalar field: values at a batch of points and
/// nothing else. The solution network reaches the estimator only through this.
class FieldView {
 public:
  template <class Fn>
    requires std::is_invocable_r_v<Vec, const Fn&, const PointSet&>
  explicit FieldView(Fn fn) : eval_(std::move(fn)) {}

  Vec operator()(const PointSet& points) const { return eval_(points); }

 private:
  std::function<Vec(const PointSet&)> eval_;
};

/// Wraps a pointwise field f(x, t) for augmented point batches.
inline FieldView pointwise(const PdeProblem& problem, ScalarField field) {
  const int n = problem.dim();
  const bool parabolic = problem.parabolic();
  return FieldView([n, parabolic, field = std::move(field)](const PointSet& pts) {
    Vec out(pts.cols());
    for (Eigen::Index c = 0; c < pts.cols(); ++c) {
      out[c] = field(pts.col(c).head(n), parabolic ? pts(n, c) : 0.0);
    }
    return out;
  });
}

/// Boundary samples as matrices: positions (augmented with time when
/// parabolic) and outward unit normals.
struct BoundarySamples {
  PointSet points;
  PointSet normals;

  Eigen::Index size() const noexcept { return points.cols(); }
};

struct Batch {
  PointSet interior;
  BoundarySamples dirichlet;
  BoundarySamples neumann;
  /// Parabolic only: fresh interior points at t = 0 for the initial-datum term.
  PointSet initial;
};

struct BatchSizes {
  std::size_t interior = 0;
  std::size_t dirichlet = 0;
  std::size_t neumann = 0;
};

namespace detail {

inline PointSet with_time_row(const PointSet& spatial, RandomStream& rng, double horizon, bool uniform_time) {
  PointSet out(spatial.rows() + 1, spatial.cols());
  out.topRows(spatial.rows()) = spatial;
  for (Eigen::Index c = 0; c < spatial.cols(); ++c) out(spatial.rows(), c) = uniform_time ? horizon * rng.open_uniform() : 0.0;
  return out;
}

inline BoundarySamples boundary_samples(const PdeProblem& problem, FaceKind kind, std::size_t count, RandomStream& rng) {
  const int n = problem.dim();
  BoundarySamples out;
  out.points.resize(problem.input_dim(), static_cast<Eigen::Index>(count));
  out.normals.resize(n, static_cast<Eigen::Index>(count));
  if (count == 0) return out;
  const auto pts = problem.domain().sample_boundary(kind, count, rng);
  for (std::size_t i = 0; i < count; ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    out.points.col(c).head(n) = pts[i].position;
    out.normals.col(c) = pts[i].normal;
    if (problem.parabolic()) out.points(n, c) = problem.horizon() * rng.open_uniform();
  }
  return out;
}

inline double mean_of(const std::vector<double>& v) { return v.empty() ? 0.0 : pairwise_sum(v) / static_cast<double>(v.size()); }

/// Standard error of the sample mean.
inline double std_error_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - mean) * (v[i] - mean);
  const double var = pairwise_sum(sq) / static_cast<double>(v.size() - 1);
  return std::sqrt(var / static_cast<double>(v.size()));
}

inline void require_finite(double value, const char* term) {
  if (!std::isfinite(value)) throw NumericalError(std::string("diverged: non-finite ") + term + " term");
}

constexpr Eigen::Index kStepChunk = 256;

}  // namespace detail

/// Draws a training batch: uniform interior points, uniform points on each
/// boundary part, and (parabolic) uniform times plus fresh initial points.
inline Batch sample_batch(const PdeProblem& problem, const BatchSizes& sizes, RandomStream& rng) {
  Batch batch;
  const Domain& domain = problem.domain();
  PointSet interior = domain.sample_interior(sizes.interior, rng);
  batch.interior = problem.parabolic() ? detail::with_time_row(interior, rng, problem.horizon(), true) : interior;
  batch.dirichlet = detail::boundary_samples(problem, FaceKind::dirichlet, sizes.dirichlet, rng);
  batch.neumann = detail::boundary_samples(problem, FaceKind::neumann, sizes.neumann, rng);
  if (problem.parabolic()) {
    batch.initial = detail::with_time_row(domain.sample_interior(sizes.interior, rng), rng, problem.horizon(), false);
  } else {
    batch.initial.resize(problem.input_dim(), 0);
  }
  return batch;
}

struct SdeState {
  Vec position;
  double time = 0.0;
};

/// One Euler–Maruyama step x + τ b(x, t) + √τ σ(x, t) ξ with ξ ~ N(0, I_{n_W});
/// the time advances to t + τ. The result may leave the domain.
inline SdeState euler_step(const PdeProblem& problem, const Vec& x, double tau, RandomStream& rng, double t = 0.0) {
  Vec xi(problem.n_w());
  for (Eigen::Index k = 0; k < xi.size(); ++k) xi[k] = rng.normal();
  return {x + tau * problem.drift(x, t) + std::sqrt(tau) * (problem.sigma(x, t) * xi), t + tau};
}

/// K Euler–Maruyama replicates from every column of `base` (augmented
/// points). Column i·K + k of the result is replicate k of point i. Noise for
/// each chunk of 256 base points comes from its own sub-stream of `rng`.
inline PointSet step_points(const PdeProblem& problem, const PointSet& base, double tau, int replicates, RandomStream& rng) {
  const int n = problem.dim();
  const bool parabolic = problem.parabolic();
  const Eigen::Index m = base.cols();
  PointSet out(base.rows(), m * replicates);
  const auto chunks = static_cast<std::size_t>((m + detail::kStepChunk - 1) / detail::kStepChunk);
  const RandomStream root = rng.split(0x57e9);
  parallel_for(chunks, [&](std::size_t c) {
    RandomStream lane = root.split(c);
    const Eigen::Index start = static_cast<Eigen::Index>(c) * detail::kStepChunk;
    const Eigen::Index stop = std::min(m, start + detail::kStepChunk);
    for (Eigen::Index i = start; i < stop; ++i) {
      const Vec x = base.col(i).head(n);
      const double t = parabolic ? base(n, i) : 0.0;
      for (int k = 0; k < replicates; ++k) {
        const SdeState next = euler_step(problem, x, tau, lane, t);
        const Eigen::Index col = i * replicates + k;
        out.col(col).head(n) = next.position;
        if (parabolic) out(n, col) = next.time;
      }
    }
  });
  return out;
}

/// Boundary points shifted along the conormal: p + τ̃ a(p) ν, with
/// (aν)_i = Σ_j a_ij ν_j.
inline PointSet shift_points(const PdeProblem& problem, const BoundarySamples& samples, double tau_tilde) {
  const int n = problem.dim();
  PointSet out = samples.points;
  for (Eigen::Index c = 0; c < samples.size(); ++c) {
    const Vec x = samples.points.col(c).head(n);
    const double t = problem.parabolic() ? samples.points(n, c) : 0.0;
    out.col(c).head(n) = x + tau_tilde * (problem.diffusion(x, t) * samples.normals.col(c));
  }
  return out;
}

/// Average over the replicates of (ρ(X_τ[, t+τ]) − ρ(x[, t]))/τ.
inline double generator_difference(const PdeProblem& problem, const FieldView& rho, const Vec& x, double t,
                                   const StepParams& step, RandomStream& rng) {
  step.validate();
  const int n = problem.dim();
  PointSet pts(problem.input_dim(), 1 + step.replicates);
  pts.col(0).head(n) = x;
  for (int k = 0; k < step.replicates; ++k) {
    const SdeState next = euler_step(problem, x, step.tau, rng, t);
    pts.col(1 + k).head(n) = next.position;
    if (problem.parabolic()) pts(n, 1 + k) = next.time;
  }
  if (problem.parabolic()) pts(n, 0) = t;
  const Vec values = rho(pts);
  if (!values.allFinite()) throw NumericalError("test function overflow");
  double acc = 0.0;
  for (int k = 0; k < step.replicates; ++k) acc += values[1 + k] - values[0];
  return acc / (step.replicates * step.tau);
}

/// 𝒟_ν^τ̃[ρ](p) = (ρ(p + τ̃ a(p) ν) − ρ(p))/τ̃, approximating Σ_ij ν_j a_ij ∂ρ/∂x_i.
inline double boundary_directional_difference(const PdeProblem& problem, const FieldView& rho, const BoundaryPoint& p,
                                              double t, double tau_tilde) {
  const int n = problem.dim();
  PointSet pts(problem.input_dim(), 2);
  pts.col(0).head(n) = p.position;
  pts.col(1).head(n) = p.position + tau_tilde * (problem.diffusion(p.position, t) * p.normal);
  if (problem.parabolic()) pts.row(n).setConstant(t);
  const Vec values = rho(pts);
  return (values[1] - values[0]) / tau_tilde;
}

/// How the trainer differentiates the normalized loss.
///
/// `plain` differentiates sum²/ν on the whole batch. Its expectation carries
/// Var(sum)/ν, which grows like 1/(M_I τ) and rewards the players for moving
/// noise instead of the residual. `split` differentiates s_A·s_B/ν, where
/// s_A and s_B are the estimators restricted to the even- and odd-indexed
/// samples of each group; the halves are independent, so the product is an
/// unbiased estimate of (E sum)². Raw mode is linear and ignores this choice.
enum class GradientEstimator { plain, split };

inline std::string to_string(GradientEstimator g) { return g == GradientEstimator::plain ? "plain" : "split"; }

inline GradientEstimator parse_gradient_estimator(const std::string& name) {
  if (name == "plain") return GradientEstimator::plain;
  if (name == "split") return GradientEstimator::split;
  throw Error("unknown gradient estimator '" + name + "' (expected plain or split)");
}

/// The loss estimate together with its sensitivities: ∂loss/∂f at every
/// point where the solution was evaluated, and ∂loss/∂ρ at every point where
/// the test function was evaluated. The trainer turns these into parameter
/// gradients; the solution only ever appears through pointwise values.
struct LossAssembly {
  LossEstimate estimate;
  PointSet solution_points;
  Vec solution_weights;
  PointSet test_points;
  Vec test_weights;
};

namespace detail {

enum Group : int { kInterior = 0, kInitial = 1, kDirichlet = 2, kNeumann = 3, kGroups = 4 };

/// Per-value sensitivity of one Monte Carlo summand, before averaging.
struct SummandSlot {
  int group = kInterior;
  int half = 0;
  double d_summand = 0.0;
  double d_norm = 0.0;  // sensitivity of the ∫ρ² summand
};

}  // namespace detail

/// Monte Carlo estimators Ŝ_I, Ŝ_D, Ŝ_N of the weak form and the combined
/// loss, plus first-order sensitivities.
///
/// Ŝ_I = |Ω|/M_I Σ [−(ρ(X_τ) − ρ(x))/τ · f(x) + ρ(x) R(f(x), x)]
/// Ŝ_D = |∂Ω_D|/M_D Σ ½ 𝒟ρ(x) g(x)
/// Ŝ_N = |∂Ω_N|/M_N Σ [−ρ(x) φ(x) + ½ 𝒟ρ(x) f(x)]
///
/// Parabolic problems integrate over Ω × (0, T) (prefactors gain a factor T,
/// the SDE step advances time) and Ŝ_I gains −|Ω|/M₀ Σ f₀(x) ρ(x, 0).
/// Raw mode returns the sum; normalized mode returns sum² / max(∫ρ², ε).
inline LossAssembly assemble_loss(const PdeProblem& problem, const FieldView& solution, const FieldView& test,
                                  const Batch& batch, const StepParams& step, LossMode mode, RandomStream& rng,
                                  GradientEstimator gradient = GradientEstimator::plain) {
  using detail::SummandSlot;
  step.validate();
  const Eigen::Index m = batch.interior.cols();
  if (m == 0) throw Error("loss estimate needs at least one interior point");
  const int n = problem.dim();
  const int rows = problem.input_dim();
  const bool parabolic = problem.parabolic();
  if (batch.interior.rows() != rows) throw Error("batch points do not match the problem's input dimension");
  const int reps = step.replicates;
  const double horizon = parabolic ? problem.horizon() : 1.0;
  const DomainMeasures meas = measures(problem.domain());
  const double w_int = meas.interior * horizon;
  const double w_dir = meas.dirichlet * horizon;
  const double w_neu = meas.neumann * horizon;

  const Eigen::Index md = batch.dirichlet.size();
  const Eigen::Index mn = batch.neumann.size();
  const Eigen::Index m0 = parabolic ? batch.initial.cols() : 0;
  if (md > 0 && !(meas.dirichlet > 0.0)) throw Error("Dirichlet samples given for an empty Dirichlet boundary");
  if (mn > 0 && !(meas.neumann > 0.0)) throw Error("Neumann samples given for an empty Neumann boundary");
  const bool split = mode == LossMode::normalized && gradient == GradientEstimator::split;
  if (split && (m < 2 || (md > 0 && md < 2) || (mn > 0 && mn < 2) || (m0 > 0 && m0 < 2)))
    throw Error("split gradient estimator needs at least two samples in every nonempty group");

  // Layout of all test-function evaluations.
  const Eigen::Index o_base = 0;
  const Eigen::Index o_step = o_base + m;
  const Eigen::Index o_dir = o_step + m * reps;
  const Eigen::Index o_dir_shift = o_dir + md;
  const Eigen::Index o_neu = o_dir_shift + md;
  const Eigen::Index o_neu_shift = o_neu + mn;
  const Eigen::Index o_init = o_neu_shift + mn;
  const Eigen::Index n_test = o_init + m0;

  LossAssembly out;
  out.test_points.resize(rows, n_test);
  out.test_points.middleCols(o_base, m) = batch.interior;
  out.test_points.middleCols(o_step, m * reps) = step_points(problem, batch.interior, step.tau, reps, rng);
  out.test_points.middleCols(o_dir, md) = batch.dirichlet.points;
  out.test_points.middleCols(o_dir_shift, md) = shift_points(problem, batch.dirichlet, step.tau_tilde);
  out.test_points.middleCols(o_neu, mn) = batch.neumann.points;
  out.test_points.middleCols(o_neu_shift, mn) = shift_points(problem, batch.neumann, step.tau_tilde);
  if (m0 > 0) out.test_points.middleCols(o_init, m0) = batch.initial;

  out.solution_points.resize(rows, m + mn);
  out.solution_points.leftCols(m) = batch.interior;
  out.solution_points.rightCols(mn) = batch.neumann.points;

  const Vec rho = test(out.test_points);
  const Vec f = solution(out.solution_points);
  if (rho.size() != n_test || f.size() != m + mn) throw Error("field view returned the wrong number of values");

  std::vector<SummandSlot> test_slots(static_cast<std::size_t>(n_test));
  std::vector<SummandSlot> solution_slots(static_cast<std::size_t>(m + mn));
  std::array<std::vector<double>, detail::kGroups> terms;
  std::vector<double> norm_terms(static_cast<std::size_t>(m));
  auto slot = [](std::vector<SummandSlot>& v, Eigen::Index k) -> SummandSlot& { return v[static_cast<std::size_t>(k)]; };

  for (Eigen::Index i = 0; i < m; ++i) {
    const Vec x = batch.interior.col(i).head(n);
    const double t = parabolic ? batch.interior(n, i) : 0.0;
    const int half = static_cast<int>(i % 2);
    double stepped = 0.0;
    for (int k = 0; k < reps; ++k) stepped += rho[o_step + i * reps + k];
    stepped /= reps;
    const double rho_x = rho[o_base + i];
    const double generator = (stepped - rho_x) / step.tau;
    const double fx = f[i];
    const double r = problem.source(fx, x, t);
    const double term = w_int * (-generator * fx + rho_x * r);
    detail::require_finite(term, "interior");
    terms[detail::kInterior].push_back(term);
    norm_terms[static_cast<std::size_t>(i)] = w_int * rho_x * rho_x;

    slot(solution_slots, i) = {detail::kInterior, half, w_int * (-generator + rho_x * problem.source_derivative(fx, x, t)), 0.0};
    slot(test_slots, o_base + i) = {detail::kInterior, half, w_int * (fx / step.tau + r), 2.0 * w_int * rho_x};
    for (int k = 0; k < reps; ++k)
      slot(test_slots, o_step + i * reps + k) = {detail::kInterior, half, -w_int * fx / (reps * step.tau), 0.0};
  }

  for (Eigen::Index j = 0; j < m0; ++j) {
    const double f0 = problem.initial(batch.initial.col(j).head(n));
    const double term = -meas.interior * f0 * rho[o_init + j];
    detail::require_finite(term, "initial");
    terms[detail::kInitial].push_back(term);
    slot(test_slots, o_init + j) = {detail::kInitial, static_cast<int>(j % 2), -meas.interior * f0, 0.0};
  }

  for (Eigen::Index j = 0; j < md; ++j) {
    const Vec x = batch.dirichlet.points.col(j).head(n);
    const double t = parabolic ? batch.dirichlet.points(n, j) : 0.0;
    const double g = problem.dirichlet(x, t);
    const double diff = (rho[o_dir_shift + j] - rho[o_dir + j]) / step.tau_tilde;
    const double term = w_dir * 0.5 * diff * g;
    detail::require_finite(term, "Dirichlet");
    terms[detail::kDirichlet].push_back(term);
    const int half = static_cast<int>(j % 2);
    const double c = w_dir * 0.5 * g / step.tau_tilde;
    slot(test_slots, o_dir_shift + j) = {detail::kDirichlet, half, c, 0.0};
    slot(test_slots, o_dir + j) = {detail::kDirichlet, half, -c, 0.0};
  }

  for (Eigen::Index j = 0; j < mn; ++j) {
    const Vec x = batch.neumann.points.col(j).head(n);
    const double t = parabolic ? batch.neumann.points(n, j) : 0.0;
    const double phi = problem.neumann(x, t);
    const double diff = (rho[o_neu_shift + j] - rho[o_neu + j]) / step.tau_tilde;
    const double fx = f[m + j];
    const double term = w_neu * (-rho[o_neu + j] * phi + 0.5 * diff * fx);
    detail::require_finite(term, "Neumann");
    terms[detail::kNeumann].push_back(term);
    const int half = static_cast<int>(j % 2);
    slot(solution_slots, m + j) = {detail::kNeumann, half, w_neu * 0.5 * diff, 0.0};
    slot(test_slots, o_neu_shift + j) = {detail::kNeumann, half, w_neu * 0.5 * fx / step.tau_tilde, 0.0};
    slot(test_slots, o_neu + j) = {detail::kNeumann, half, w_neu * (-phi - 0.5 * fx / step.tau_tilde), 0.0};
  }

  LossEstimate& e = out.estimate;
  std::array<double, detail::kGroups> means{};
  std::array<double, detail::kGroups> errors{};
  for (int g = 0; g < detail::kGroups; ++g) {
    means[g] = detail::mean_of(terms[g]);
    errors[g] = detail::std_error_of(terms[g], means[g]);
  }
  e.s_interior = means[detail::kInterior] + means[detail::kInitial];
  e.s_dirichlet = means[detail::kDirichlet];
  e.s_neumann = means[detail::kNeumann];
  e.std_errors = {std::hypot(errors[detail::kInterior], errors[detail::kInitial]), errors[detail::kDirichlet],
                  errors[detail::kNeumann]};
  e.test_norm = detail::mean_of(norm_terms);
  const double s = e.sum();
  const double denom = std::max(e.test_norm, kNormEpsilon);
  e.total = mode == LossMode::raw ? s : s * s / denom;
  detail::require_finite(e.total, "total");

  // Half-sample statistics for the split estimator.
  std::array<std::array<double, 2>, detail::kGroups> half_sum{};
  std::array<std::array<double, 2>, detail::kGroups> half_count{};
  for (int g = 0; g < detail::kGroups; ++g) {
    for (std::size_t k = 0; k < terms[g].size(); ++k) {
      half_sum[g][k % 2] += terms[g][k];
      half_count[g][k % 2] += 1.0;
    }
  }
  std::array<double, 2> s_half{};
  for (int h = 0; h < 2; ++h) {
    for (int g = 0; g < detail::kGroups; ++g) {
      if (half_count[g][h] > 0.0) s_half[h] += half_sum[g][h] / half_count[g][h];
    }
  }

  const double inv_m = 1.0 / static_cast<double>(m);
  const bool norm_active = mode == LossMode::normalized && e.test_norm > kNormEpsilon;
  auto weight = [&](const SummandSlot& sl) {
    double w = 0.0;
    if (mode == LossMode::raw) {
      w = sl.d_summand / static_cast<double>(terms[sl.group].size());
    } else if (split) {
      w = s_half[1 - sl.half] * sl.d_summand / (half_count[sl.group][sl.half] * denom);
      if (norm_active) w -= s_half[0] * s_half[1] / (denom * denom) * sl.d_norm * inv_m;
    } else {
      w = 2.0 * s / denom * sl.d_summand / static_cast<double>(terms[sl.group].size());
      if (norm_active) w -= s * s / (denom * denom) * sl.d_norm * inv_m;
    }
    return w;
  };
  out.test_weights.resize(n_test);
  for (Eigen::Index k = 0; k < n_test; ++k) out.test_weights[k] = weight(slot(test_slots, k));
  out.solution_weights.resize(m + mn);
  for (Eigen::Index k = 0; k < m + mn; ++k) out.solution_weights[k] = weight(slot(solution_slots, k));
  return out;
}

inline LossEstimate estimate_loss(const PdeProblem& problem, const FieldView& solution, const FieldView& test,
                                  const Batch& batch, const StepParams& step, LossMode mode, RandomStream& rng) {
  return assemble_loss(problem, solution, test, batch, step, mode, rng).estimate;
}

/// Threshold on r = M_I·τ below which the τ^{-1/2} noise is not averaged out.
inline constexpr double kSamplingRatioThreshold = 10.0;

struct SamplingCheck {
  bool ok = true;
  double ratio = 0.0;
};

inline SamplingCheck check_sampling_condition(const StepParams& step, std::size_t m_interior) {
  const double ratio = static_cast<double>(m_interior) * step.tau;
  return {ratio >= kSamplingRatioThreshold, ratio};
}

}  // namespace ardo
