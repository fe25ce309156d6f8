#pragma once

// Verification scaffolding. Everything in this header may differentiate the
// solution and the test function freely, by finite differences. None of it is
// reachable from the training path; the derivative-free property concerns
// the trainer and the estimator only.

#include "ardo/error.hpp"
#include "ardo/estimator.hpp"
#include "ardo/geometry.hpp"
#include "ardo/parallel.hpp"
#include "ardo/problem.hpp"
#include "ardo/random.hpp"
#include "ardo/types.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

namespace ardo {

enum class QuadratureKind { midpoint, gauss_legendre };

/// Nodes and weights of one integration domain. Nodes are augmented with a
/// time row for parabolic problems; `normals` is filled for boundary rules.
struct QuadratureRule {
  PointSet nodes;
  Vec weights;
  PointSet normals;

  Eigen::Index size() const noexcept { return nodes.cols(); }
  double measure() const { return weights.sum(); }
};

struct QuadratureGrid {
  QuadratureKind kind = QuadratureKind::gauss_legendre;
  int order = 8;
  int per_axis = 0;
  QuadratureRule interior;
  QuadratureRule dirichlet;
  QuadratureRule neumann;
  /// Parabolic only: spatial interior rule at t = 0.
  QuadratureRule initial;
};

namespace detail {

constexpr int kGaussOrder = 8;

/// Composite rule on [lo, hi] with `panels` panels.
inline void composite_rule(double lo, double hi, int panels, QuadratureKind kind, std::vector<double>& nodes,
                           std::vector<double>& weights) {
  nodes.clear();
  weights.clear();
  const double width = (hi - lo) / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = lo + (p + 0.5) * width;
    if (kind == QuadratureKind::midpoint) {
      nodes.push_back(mid);
      weights.push_back(width);
      continue;
    }
    using rule = boost::math::quadrature::gauss<double, kGaussOrder>;
    const auto& abscissa = rule::abscissa();
    const auto& w = rule::weights();
    for (std::size_t k = 0; k < abscissa.size(); ++k) {
      for (int sign : {-1, 1}) {
        if (abscissa[k] == 0.0 && sign == 1) continue;
        nodes.push_back(mid + sign * 0.5 * width * abscissa[k]);
        weights.push_back(0.5 * width * w[k]);
      }
    }
  }
}

struct Axis {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline Axis make_axis(double lo, double hi, int panels, QuadratureKind kind) {
  Axis a;
  composite_rule(lo, hi, panels, kind, a.nodes, a.weights);
  return a;
}

/// Tensor product of one-dimensional rules; column k of the result is the
/// k-th multi-index in row-major order.
inline QuadratureRule tensor(const std::vector<Axis>& axes) {
  Eigen::Index count = 1;
  for (const Axis& a : axes) count *= static_cast<Eigen::Index>(a.nodes.size());
  QuadratureRule r;
  r.nodes.resize(static_cast<Eigen::Index>(axes.size()), count);
  r.weights.resize(count);
  for (Eigen::Index c = 0; c < count; ++c) {
    Eigen::Index rest = c;
    double w = 1.0;
    for (std::size_t d = axes.size(); d-- > 0;) {
      const auto len = static_cast<Eigen::Index>(axes[d].nodes.size());
      const auto k = static_cast<std::size_t>(rest % len);
      rest /= len;
      r.nodes(static_cast<Eigen::Index>(d), c) = axes[d].nodes[k];
      w *= axes[d].weights[k];
    }
    r.weights[c] = w;
  }
  return r;
}

/// Appends a time row from `time` to a spatial rule (tensor product).
inline QuadratureRule with_time(const QuadratureRule& spatial, const Axis& time) {
  const Eigen::Index n = spatial.nodes.rows();
  const Eigen::Index s = spatial.size();
  const auto nt = static_cast<Eigen::Index>(time.nodes.size());
  QuadratureRule r;
  r.nodes.resize(n + 1, s * nt);
  r.weights.resize(s * nt);
  if (spatial.normals.size() > 0) r.normals.resize(n, s * nt);
  for (Eigen::Index i = 0; i < s; ++i) {
    for (Eigen::Index k = 0; k < nt; ++k) {
      const Eigen::Index c = i * nt + k;
      r.nodes.col(c).head(n) = spatial.nodes.col(i);
      r.nodes(n, c) = time.nodes[static_cast<std::size_t>(k)];
      r.weights[c] = spatial.weights[i] * time.weights[static_cast<std::size_t>(k)];
      if (spatial.normals.size() > 0) r.normals.col(c) = spatial.normals.col(i);
    }
  }
  return r;
}

inline QuadratureRule concatenate(const std::vector<QuadratureRule>& parts, int dim) {
  Eigen::Index total = 0;
  for (const auto& p : parts) total += p.size();
  QuadratureRule r;
  r.nodes.resize(dim, total);
  r.weights.resize(total);
  r.normals.resize(dim, total);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    r.nodes.middleCols(at, p.size()) = p.nodes;
    r.weights.segment(at, p.size()) = p.weights;
    r.normals.middleCols(at, p.size()) = p.normals;
    at += p.size();
  }
  return r;
}

inline QuadratureRule box_faces(const Domain& d, FaceKind kind, int panels, QuadratureKind qk) {
  const int n = d.dim();
  std::vector<QuadratureRule> parts;
  for (const Face& f : d.faces(kind)) {
    QuadratureRule face;
    if (n == 1) {
      face.nodes = PointSet::Zero(1, 1);
      face.weights = Vec::Ones(1);
    } else {
      std::vector<Axis> axes;
      for (int k = 0; k < n; ++k) {
        if (k == f.axis) continue;
        axes.push_back(make_axis(d.lower()[k], d.upper()[k], panels, qk));
      }
      const QuadratureRule sub = tensor(axes);
      face.nodes.resize(n, sub.size());
      face.weights = sub.weights;
      for (int k = 0, j = 0; k < n; ++k) {
        if (k == f.axis) continue;
        face.nodes.row(k) = sub.nodes.row(j++);
      }
    }
    face.nodes.row(f.axis).setConstant(f.side == Side::lower ? d.lower()[f.axis] : d.upper()[f.axis]);
    face.normals = d.face_normal(f).replicate(1, face.size());
    parts.push_back(std::move(face));
  }
  return concatenate(parts, n);
}

/// Unit directions and surface weights on the unit sphere S^{n-1}, n ∈ {2, 3}.
inline QuadratureRule unit_sphere(int n, int panels, QuadratureKind qk) {
  QuadratureRule r;
  const int n_phi = 2 * panels * (qk == QuadratureKind::midpoint ? 1 : kGaussOrder);
  // The periodic trapezoidal rule in the azimuth is spectrally accurate.
  std::vector<double> phi(static_cast<std::size_t>(n_phi));
  for (int k = 0; k < n_phi; ++k) phi[static_cast<std::size_t>(k)] = 2.0 * std::numbers::pi * (k + 0.5) / n_phi;
  const double w_phi = 2.0 * std::numbers::pi / n_phi;
  if (n == 2) {
    r.nodes.resize(2, n_phi);
    r.weights = Vec::Constant(n_phi, w_phi);
    for (int k = 0; k < n_phi; ++k) {
      r.nodes(0, k) = std::cos(phi[static_cast<std::size_t>(k)]);
      r.nodes(1, k) = std::sin(phi[static_cast<std::size_t>(k)]);
    }
  } else {
    const Axis z = make_axis(-1.0, 1.0, panels, qk);
    const auto nz = static_cast<Eigen::Index>(z.nodes.size());
    r.nodes.resize(3, nz * n_phi);
    r.weights.resize(nz * n_phi);
    for (Eigen::Index i = 0; i < nz; ++i) {
      const double zi = z.nodes[static_cast<std::size_t>(i)];
      const double s = std::sqrt(std::max(0.0, 1.0 - zi * zi));
      for (int k = 0; k < n_phi; ++k) {
        const Eigen::Index c = i * n_phi + k;
        r.nodes(0, c) = s * std::cos(phi[static_cast<std::size_t>(k)]);
        r.nodes(1, c) = s * std::sin(phi[static_cast<std::size_t>(k)]);
        r.nodes(2, c) = zi;
        r.weights[c] = z.weights[static_cast<std::size_t>(i)] * w_phi;
      }
    }
  }
  r.normals = r.nodes;
  return r;
}

inline QuadratureRule ball_interior(const Domain& d, int panels, QuadratureKind qk) {
  const int n = d.dim();
  if (n == 1) {
    QuadratureRule r = tensor({make_axis(d.center()[0] - d.radius(), d.center()[0] + d.radius(), panels, qk)});
    return r;
  }
  const Axis radial = make_axis(0.0, d.radius(), panels, qk);
  const QuadratureRule dirs = unit_sphere(n, panels, qk);
  const auto nr = static_cast<Eigen::Index>(radial.nodes.size());
  QuadratureRule r;
  r.nodes.resize(n, nr * dirs.size());
  r.weights.resize(nr * dirs.size());
  for (Eigen::Index i = 0; i < nr; ++i) {
    const double rad = radial.nodes[static_cast<std::size_t>(i)];
    const double jac = std::pow(rad, n - 1) * radial.weights[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < dirs.size(); ++k) {
      const Eigen::Index c = i * dirs.size() + k;
      r.nodes.col(c) = d.center() + rad * dirs.nodes.col(k);
      r.weights[c] = jac * dirs.weights[k];
    }
  }
  return r;
}

inline QuadratureRule ball_boundary(const Domain& d, FaceKind kind, int panels, QuadratureKind qk) {
  const int n = d.dim();
  QuadratureRule r;
  if (d.sphere_kind() != kind) {
    r.nodes.resize(n, 0);
    r.weights.resize(0);
    r.normals.resize(n, 0);
    return r;
  }
  if (n == 1) {
    r.nodes.resize(1, 2);
    r.nodes << d.center()[0] - d.radius(), d.center()[0] + d.radius();
    r.weights = Vec::Ones(2);
    r.normals.resize(1, 2);
    r.normals << -1.0, 1.0;
    return r;
  }
  r = unit_sphere(n, panels, qk);
  r.weights *= std::pow(d.radius(), n - 1);
  for (Eigen::Index c = 0; c < r.size(); ++c) r.nodes.col(c) = d.center() + d.radius() * r.normals.col(c);
  return r;
}

}  // namespace detail

/// Composite quadrature for the problem's interior, boundary parts and, for
/// parabolic problems, the time axis and the initial slice. Each axis carries
/// `panels` panels; the node count per axis is panels × order.
inline QuadratureGrid make_quadrature_grid(const PdeProblem& problem, int panels,
                                           QuadratureKind kind = QuadratureKind::gauss_legendre) {
  const Domain& d = problem.domain();
  const int n = d.dim();
  if (n > 3) throw Error("oracle restricted to low dimension");
  QuadratureGrid g;
  g.kind = kind;
  g.order = kind == QuadratureKind::midpoint ? 1 : detail::kGaussOrder;
  g.per_axis = panels * g.order;
  if (g.per_axis < 16) throw Error("quadrature grid needs at least 16 nodes per axis");

  QuadratureRule interior;
  if (d.is_box()) {
    std::vector<detail::Axis> axes;
    for (int k = 0; k < n; ++k) axes.push_back(detail::make_axis(d.lower()[k], d.upper()[k], panels, kind));
    interior = detail::tensor(axes);
  } else {
    interior = detail::ball_interior(d, panels, kind);
  }
  QuadratureRule dir = d.is_box() ? detail::box_faces(d, FaceKind::dirichlet, panels, kind)
                                  : detail::ball_boundary(d, FaceKind::dirichlet, panels, kind);
  QuadratureRule neu = d.is_box() ? detail::box_faces(d, FaceKind::neumann, panels, kind)
                                  : detail::ball_boundary(d, FaceKind::neumann, panels, kind);
  if (!problem.parabolic()) {
    g.interior = std::move(interior);
    g.dirichlet = std::move(dir);
    g.neumann = std::move(neu);
    g.initial.nodes.resize(n, 0);
    return g;
  }
  const detail::Axis time = detail::make_axis(0.0, problem.horizon(), panels, kind);
  g.initial.nodes.resize(n + 1, interior.size());
  g.initial.nodes.topRows(n) = interior.nodes;
  g.initial.nodes.row(n).setZero();
  g.initial.weights = interior.weights;
  g.interior = detail::with_time(interior, time);
  g.dirichlet = detail::with_time(dir, time);
  g.neumann = detail::with_time(neu, time);
  return g;
}

/// Deterministic values of the three weak-form integrals.
struct WeakFormTerms {
  double s_interior = 0.0;
  double s_dirichlet = 0.0;
  double s_neumann = 0.0;

  double sum() const noexcept { return s_interior + s_dirichlet + s_neumann; }
};

namespace detail {

/// Central-difference steps: first derivatives at 1e-5 · diameter, second
/// derivatives at 1e-3 · diameter, both with fourth-order stencils.
struct FdSteps {
  double first = 0.0;
  double second = 0.0;
  double time = 0.0;
};

inline FdSteps fd_steps(const PdeProblem& problem) {
  const double diam = problem.domain().diameter();
  return {1e-5 * diam, 1e-3 * diam, problem.parabolic() ? 1e-5 * problem.horizon() : 0.0};
}

inline double d1(const std::function<double(double)>& g, double h) {
  return (-g(2 * h) + 8 * g(h) - 8 * g(-h) + g(-2 * h)) / (12 * h);
}

inline double d2(const std::function<double(double)>& g, double h) {
  return (-g(2 * h) + 16 * g(h) - 30 * g(0) + 16 * g(-h) - g(-2 * h)) / (12 * h * h);
}

inline Vec fd_gradient(const ScalarField& fn, const Vec& x, double t, double h) {
  Vec grad(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    grad[i] = d1(
        [&](double s) {
          Vec y = x;
          y[i] += s;
          return fn(y, t);
        },
        h);
  }
  return grad;
}

inline Mat fd_hessian(const ScalarField& fn, const Vec& x, double t, double h) {
  const Eigen::Index n = x.size();
  Mat hess(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    hess(i, i) = d2(
        [&](double s) {
          Vec y = x;
          y[i] += s;
          return fn(y, t);
        },
        h);
    for (Eigen::Index j = 0; j < i; ++j) {
      hess(i, j) = hess(j, i) = d1(
          [&](double si) {
            return d1(
                [&](double sj) {
                  Vec y = x;
                  y[i] += si;
                  y[j] += sj;
                  return fn(y, t);
                },
                h);
          },
          h);
    }
  }
  return hess;
}

inline double fd_time(const ScalarField& fn, const Vec& x, double t, double h) {
  return d1([&](double s) { return fn(x, t + s); }, h);
}

/// ½ a:∇²ρ + b·∇ρ (+ ∂_t ρ when parabolic) at (x, t).
inline double generator_fd(const PdeProblem& problem, const ScalarField& rho, const Vec& x, double t, const FdSteps& h) {
  const Mat a = problem.diffusion(x, t);
  double value = 0.5 * (a.array() * fd_hessian(rho, x, t, h.second).array()).sum() +
                 problem.drift(x, t).dot(fd_gradient(rho, x, t, h.first));
  if (problem.parabolic()) value += fd_time(rho, x, t, h.time);
  return value;
}

/// (aν)·∇ρ at (x, t).
inline double conormal_fd(const PdeProblem& problem, const ScalarField& rho, const Vec& x, double t, const Vec& normal,
                          const FdSteps& h) {
  return (problem.diffusion(x, t) * normal).dot(fd_gradient(rho, x, t, h.first));
}

struct BoundaryData {
  ScalarField dirichlet;
  std::function<double(const Vec& x, double t, const Vec& normal)> neumann;
  std::function<double(const Vec&)> initial;
};

inline double time_of(const PdeProblem& problem, const PointSet& nodes, Eigen::Index c) {
  return problem.parabolic() ? nodes(problem.dim(), c) : 0.0;
}

template <class Fn>
double weighted_sum(const QuadratureRule& rule, Fn integrand) {
  const auto count = static_cast<std::size_t>(rule.size());
  std::vector<double> terms(count);
  constexpr std::size_t chunk = 256;
  parallel_for((count + chunk - 1) / chunk, [&](std::size_t c) {
    const std::size_t stop = std::min(count, (c + 1) * chunk);
    for (std::size_t k = c * chunk; k < stop; ++k) {
      const auto col = static_cast<Eigen::Index>(k);
      terms[k] = rule.weights[col] * integrand(col);
    }
  });
  return pairwise_sum(terms);
}

inline WeakFormTerms weakform_terms(const PdeProblem& problem, const ScalarField& f, const ScalarField& rho,
                                    const QuadratureGrid& grid, const BoundaryData& data) {
  if (problem.dim() > 3) throw Error("oracle restricted to low dimension");
  const int n = problem.dim();
  const FdSteps h = fd_steps(problem);
  WeakFormTerms out;
  out.s_interior = weighted_sum(grid.interior, [&](Eigen::Index c) {
    const Vec x = grid.interior.nodes.col(c).head(n);
    const double t = time_of(problem, grid.interior.nodes, c);
    const double fx = f(x, t);
    return -generator_fd(problem, rho, x, t, h) * fx + rho(x, t) * problem.source(fx, x, t);
  });
  if (problem.parabolic()) {
    out.s_interior -= weighted_sum(grid.initial, [&](Eigen::Index c) {
      const Vec x = grid.initial.nodes.col(c).head(n);
      return data.initial(x) * rho(x, 0.0);
    });
  }
  out.s_dirichlet = weighted_sum(grid.dirichlet, [&](Eigen::Index c) {
    const Vec x = grid.dirichlet.nodes.col(c).head(n);
    const double t = time_of(problem, grid.dirichlet.nodes, c);
    return 0.5 * conormal_fd(problem, rho, x, t, grid.dirichlet.normals.col(c), h) * data.dirichlet(x, t);
  });
  out.s_neumann = weighted_sum(grid.neumann, [&](Eigen::Index c) {
    const Vec x = grid.neumann.nodes.col(c).head(n);
    const double t = time_of(problem, grid.neumann.nodes, c);
    const Vec normal = grid.neumann.normals.col(c);
    return -rho(x, t) * data.neumann(x, t, normal) + 0.5 * conormal_fd(problem, rho, x, t, normal, h) * f(x, t);
  });
  return out;
}

}  // namespace detail

/// Quadrature of S_I, S_D and S_N with the problem's own boundary and
/// initial data.
inline WeakFormTerms weakform_quadrature(const PdeProblem& problem, const ScalarField& f, const ScalarField& rho,
                                         const QuadratureGrid& grid) {
  detail::BoundaryData data{[&](const Vec& x, double t) { return problem.dirichlet(x, t); },
                            [&](const Vec& x, double t, const Vec&) { return problem.neumann(x, t); }, nullptr};
  if (problem.parabolic()) data.initial = [&](const Vec& x) { return problem.initial(x); };
  return detail::weakform_terms(problem, f, rho, grid, data);
}

/// Outward flux ν·(½∇·(a f) − b f) of `f` at a boundary point, by central
/// differences.
inline double boundary_flux(const PdeProblem& problem, const ScalarField& f, const Vec& x, double t, const Vec& normal) {
  const double h = detail::fd_steps(problem).first;
  const int n = problem.dim();
  double flux = 0.0;
  for (int j = 0; j < n; ++j) {
    double div = 0.0;
    for (int i = 0; i < n; ++i) {
      div += detail::d1(
          [&](double s) {
            Vec y = x;
            y[i] += s;
            return problem.diffusion(y, t)(i, j) * f(y, t);
          },
          h);
    }
    flux += normal[j] * (0.5 * div - problem.drift(x, t)[j] * f(x, t));
  }
  return flux;
}

/// The weak form with the data replaced by the traces of `f` itself:
/// g = f on the Dirichlet part, φ = flux of f on the Neumann part and
/// f₀ = f(·, 0). Integrating by parts twice, the sum of these terms equals
/// ∫ ρ · (strong residual of f) for any smooth f.
inline WeakFormTerms weakform_quadrature_of_traces(const PdeProblem& problem, const ScalarField& f,
                                                   const ScalarField& rho, const QuadratureGrid& grid) {
  detail::BoundaryData data{
      f, [&](const Vec& x, double t, const Vec& normal) { return boundary_flux(problem, f, x, t, normal); },
      [&](const Vec& x) { return f(x, 0.0); }};
  return detail::weakform_terms(problem, f, rho, grid, data);
}

/// ∫ ρ · (strong residual of f) by quadrature, with the residual from
/// second-order central differences at step 1e-4 · diameter.
inline double strong_residual_quadrature(const PdeProblem& problem, const ScalarField& f, const ScalarField& rho,
                                         const QuadratureGrid& grid) {
  if (problem.dim() > 3) throw Error("oracle restricted to low dimension");
  const int n = problem.dim();
  const double h = 1e-4 * problem.domain().diameter();
  const double h_time = problem.parabolic() ? 1e-5 * problem.horizon() : 0.0;
  return detail::weighted_sum(grid.interior, [&](Eigen::Index c) {
    const Vec x = grid.interior.nodes.col(c).head(n);
    const double t = detail::time_of(problem, grid.interior.nodes, c);
    return rho(x, t) * detail::strong_residual(problem, f, x, t, h, h_time);
  });
}

struct GeneratorRow {
  double tau = 0.0;
  double mean = 0.0;
  double std_error = 0.0;
  double analytic = 0.0;
  double bias = 0.0;
};

inline constexpr std::size_t kMinGeneratorSamples = 10000;

/// Monte Carlo mean of (ρ(X_τ) − ρ(x))/τ against the finite-difference value
/// of the generator at (x, t). Every τ reuses the same Gaussian draws, so
/// differences between rows are free of sampling noise in the draws.
inline std::vector<GeneratorRow> generator_consistency_experiment(const PdeProblem& problem, const ScalarField& rho,
                                                                  const Vec& x, double t,
                                                                  const std::vector<double>& taus,
                                                                  std::size_t m_samples, std::uint64_t seed = 1) {
  if (m_samples < kMinGeneratorSamples) throw Error("generator experiment needs at least 10000 samples");
  const double analytic = detail::generator_fd(problem, rho, x, t, detail::fd_steps(problem));
  const double rho_x = rho(x, t);
  const RandomStream root(seed);
  std::vector<GeneratorRow> rows;
  for (double tau : taus) {
    if (!(tau > 0.0)) throw Error("tau must be positive");
    std::vector<double> q(m_samples);
    constexpr std::size_t chunk = 1024;
    parallel_for((m_samples + chunk - 1) / chunk, [&](std::size_t c) {
      RandomStream lane = root.split(c);
      const std::size_t stop = std::min(m_samples, (c + 1) * chunk);
      for (std::size_t k = c * chunk; k < stop; ++k) {
        const SdeState s = euler_step(problem, x, tau, lane, t);
        q[k] = (rho(s.position, s.time) - rho_x) / tau;
      }
    });
    const double mean = detail::mean_of(q);
    rows.push_back({tau, mean, detail::std_error_of(q, mean), analytic, std::abs(mean - analytic)});
  }
  return rows;
}

struct VarianceRow {
  double tau = 0.0;
  double variance = 0.0;
};

struct VarianceScaling {
  std::vector<VarianceRow> rows;
  double slope = 0.0;
};

inline constexpr std::size_t kMinVarianceTrials = 50;

/// Least-squares slope of log y against log x.
inline double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double lx = std::log(x[k]);
    const double ly = std::log(y[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Empirical variance of Ŝ_I across independent batches for each τ, and the
/// fitted slope of log Var against log τ.
inline VarianceScaling variance_scaling_experiment(const PdeProblem& problem, const FieldView& f_view,
                                                   const FieldView& rho_view, const std::vector<double>& taus,
                                                   std::size_t m_interior, std::size_t trials,
                                                   std::uint64_t seed = 1) {
  if (trials < kMinVarianceTrials) throw Error("insufficient trials: need at least 50");
  if (taus.size() < 2) throw Error("variance scaling needs at least two values of tau");
  const RandomStream root(seed);
  VarianceScaling out;
  std::vector<double> tau_values, variances;
  for (std::size_t which = 0; which < taus.size(); ++which) {
    const StepParams step{taus[which], 1e-4, 1};
    std::vector<double> estimates(trials);
    parallel_for(trials, [&](std::size_t trial) {
      RandomStream rng = root.split(which).split(trial);
      const Batch batch = sample_batch(problem, {m_interior, 0, 0}, rng);
      estimates[trial] = estimate_loss(problem, f_view, rho_view, batch, step, LossMode::raw, rng).s_interior;
    });
    const double mean = detail::mean_of(estimates);
    std::vector<double> sq(trials);
    for (std::size_t k = 0; k < trials; ++k) sq[k] = (estimates[k] - mean) * (estimates[k] - mean);
    const double variance = pairwise_sum(sq) / static_cast<double>(trials - 1);
    out.rows.push_back({taus[which], variance});
    tau_values.push_back(taus[which]);
    variances.push_back(variance);
  }
  out.slope = log_log_slope(tau_values, variances);
  return out;
}

inline VarianceScaling variance_scaling_experiment(const PdeProblem& problem, const ScalarField& f,
                                                   const ScalarField& rho, const std::vector<double>& taus,
                                                   std::size_t m_interior, std::size_t trials,
                                                   std::uint64_t seed = 1) {
  return variance_scaling_experiment(problem, pointwise(problem, f), pointwise(problem, rho), taus, m_interior, trials,
                                     seed);
}

inline std::string generator_table_csv(const std::vector<GeneratorRow>& rows) {
  std::string out = "tau,mean,std_error,analytic,bias\n";
  char line[160];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g\n", r.tau, r.mean, r.std_error, r.analytic, r.bias);
    out += line;
  }
  return out;
}

inline std::string variance_table_csv(const VarianceScaling& v) {
  std::string out = "tau,variance\n";
  char line[80];
  for (const auto& r : v.rows) {
    std::snprintf(line, sizeof line, "%.17g,%.17g\n", r.tau, r.variance);
    out += line;
  }
  return out;
}

}  // namespace ardo
