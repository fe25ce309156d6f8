#include "ardo/oracle.hpp"
#include "ardo/verify.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace {

using ardo::PdeProblem;
using ardo::QuadratureKind;
using ardo::ScalarField;
using ardo::Vec;

double relative_gap(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

TEST(QuadratureGrid, WeightsSumToMeasures) {
  struct Case {
    PdeProblem problem;
    int panels;
  };
  std::vector<Case> cases{{ardo::builtin_problem("ou_stationary", 1), 4},
                          {ardo::builtin_problem("ou_stationary", 2, {{0, ardo::Side::upper}}), 4},
                          {ardo::builtin_problem("manufactured_elliptic", 3, {{2, ardo::Side::lower}}), 2},
                          {ardo::builtin_problem("heat_parabolic", 2), 2}};
  for (int dim : {2, 3}) {
    ardo::ProblemDefinition def =
        ardo::verify::constant_coefficient_problem(ardo::Mat::Identity(dim, dim), Vec::Zero(dim)).definition();
    def.domain = ardo::Domain::ball(Vec::Constant(dim, 0.5), 1.3);
    cases.push_back({PdeProblem(def), 4});
  }
  for (QuadratureKind kind : {QuadratureKind::gauss_legendre, QuadratureKind::midpoint}) {
    for (const Case& c : cases) {
      const int panels = kind == QuadratureKind::midpoint ? 16 * c.panels : c.panels;
      const auto g = ardo::make_quadrature_grid(c.problem, panels, kind);
      const auto m = ardo::measures(c.problem.domain());
      const double horizon = c.problem.parabolic() ? c.problem.horizon() : 1.0;
      // Midpoint in the radius integrates r² with relative error 1/(4N²).
      const bool second_order = kind == QuadratureKind::midpoint && !c.problem.domain().is_box();
      const double interior_tol = second_order ? 1.0 / (g.per_axis * g.per_axis) : 1e-10;
      EXPECT_LT(relative_gap(g.interior.weights.sum(), m.interior * horizon), interior_tol) << c.problem.name();
      EXPECT_LT(relative_gap(g.dirichlet.weights.sum(), m.dirichlet * horizon), 1e-10) << c.problem.name();
      if (m.neumann > 0.0) {
        EXPECT_LT(relative_gap(g.neumann.weights.sum(), m.neumann * horizon), 1e-10);
      } else {
        EXPECT_EQ(g.neumann.size(), 0);
      }
      if (c.problem.parabolic()) {
        EXPECT_LT(relative_gap(g.initial.weights.sum(), m.interior), 1e-10);
      }
      EXPECT_GE(g.per_axis, 16);
    }
  }
}

// Gauss–Legendre of order 8 integrates degree-15 polynomials exactly per panel.
TEST(QuadratureGrid, IntegratesPolynomialsExactly) {
  const PdeProblem p = ardo::builtin_problem("ou_stationary", 2);
  const auto g = ardo::make_quadrature_grid(p, 2);
  double acc = 0.0;
  for (Eigen::Index c = 0; c < g.interior.size(); ++c) {
    const double x = g.interior.nodes(0, c), y = g.interior.nodes(1, c);
    acc += g.interior.weights[c] * std::pow(x, 6) * std::pow(y, 4);
  }
  const double one_axis = [](double e) { return 2.0 * std::pow(2.5, e + 1) / (e + 1); }(6.0);
  const double other = 2.0 * std::pow(2.5, 5) / 5.0;
  EXPECT_LT(relative_gap(acc, one_axis * other), 1e-13);
}

TEST(QuadratureGrid, Preconditions) {
  EXPECT_THROW(ardo::make_quadrature_grid(ardo::builtin_problem("ou_stationary", 4), 4), ardo::Error);
  EXPECT_THROW(ardo::make_quadrature_grid(ardo::builtin_problem("ou_stationary", 1), 8, QuadratureKind::midpoint),
               ardo::Error);
  try {
    ardo::make_quadrature_grid(ardo::builtin_problem("ou_stationary", 5), 4);
  } catch (const ardo::Error& e) {
    EXPECT_STREQ(e.what(), "oracle restricted to low dimension");
  }
}

TEST(WeakFormQuadrature, ZeroDataGivesZero) {
  ardo::ProblemDefinition def = ardo::builtin_problem("ou_stationary", 2, {{1, ardo::Side::lower}}).definition();
  def.dirichlet_data = [](const Vec&, double) { return 0.0; };
  def.neumann_data = [](const Vec&, double) { return 0.0; };
  def.exact_solution = nullptr;
  const PdeProblem p(def);
  const ScalarField zero = [](const Vec&, double) { return 0.0; };
  const auto s = ardo::weakform_quadrature(p, zero, ardo::verify::masked_field(p, 3), ardo::make_quadrature_grid(p, 4));
  EXPECT_EQ(s.s_interior, 0.0);
  EXPECT_EQ(s.s_dirichlet, 0.0);
  EXPECT_EQ(s.s_neumann, 0.0);
}

TEST(WeakFormQuadrature, ResolutionDoublingIsStable) {
  for (const char* name : {"manufactured_elliptic", "heat_parabolic"}) {
    const PdeProblem p = ardo::builtin_problem(name, 1, {{0, ardo::Side::upper}});
    const auto f = std::make_shared<const ardo::MlpNetwork<double>>(
        ardo::verify::randomized_network({p.input_dim(), 8, 8, 1}, 21));
    const ScalarField fs = ardo::verify::network_field(p, f);
    const ScalarField rho = ardo::verify::masked_field(p, 22);
    const auto coarse = ardo::weakform_quadrature(p, fs, rho, ardo::make_quadrature_grid(p, 8));
    const auto fine = ardo::weakform_quadrature(p, fs, rho, ardo::make_quadrature_grid(p, 16));
    EXPECT_LT(relative_gap(coarse.s_interior, fine.s_interior), 1e-6) << name;
    EXPECT_LT(relative_gap(coarse.s_dirichlet, fine.s_dirichlet), 1e-6) << name;
    EXPECT_LT(relative_gap(coarse.s_neumann, fine.s_neumann), 1e-6) << name;
  }
}

TEST(WeakFormQuadrature, ExactSolutionSatisfiesIdentity) {
  const PdeProblem p = ardo::builtin_problem("manufactured_semilinear", 2, {{0, ardo::Side::lower}});
  const auto s = ardo::weakform_quadrature(p, ardo::verify::exact_field(p), ardo::verify::masked_field(p, 5),
                                           ardo::make_quadrature_grid(p, 6));
  EXPECT_LT(std::abs(s.sum()), 1e-6);
  EXPECT_GT(std::abs(s.s_interior), 1e-3);
}

// Monte Carlo Ŝ_I against the deterministic S_I for fixed f and ρ.
TEST(WeakFormQuadrature, AgreesWithMonteCarloInterior) {
  const PdeProblem p = ardo::builtin_problem("manufactured_elliptic", 1);
  const auto f = ardo::verify::randomized_network({1, 8, 8, 1}, 23);
  const auto rho = ardo::verify::masked_network(p, 24);
  const auto quad = ardo::weakform_quadrature(p, ardo::verify::network_field(p, std::make_shared<const ardo::MlpNetwork<double>>(f)),
                                              ardo::verify::masked_field(p, 24), ardo::make_quadrature_grid(p, 16));
  ardo::RandomStream rng(25);
  const auto batch = ardo::sample_batch(p, {1000000, 0, 0}, rng);
  const auto mc = ardo::estimate_loss(p, ardo::FieldView([&f](const ardo::PointSet& x) { return f.forward_batch(x); }),
                                      ardo::FieldView([&rho](const ardo::PointSet& x) { return rho.values(x); }), batch,
                                      {1e-4, 1e-4, 1}, ardo::LossMode::raw, rng);
  EXPECT_LT(std::abs(mc.s_interior - quad.s_interior), 4.0 * mc.std_errors[0]);
}

TEST(GeneratorExperiment, NoiselessDriftlessQuotientIsZero) {
  const PdeProblem p = ardo::verify::constant_coefficient_problem(ardo::Mat::Zero(1, 1), Vec::Zero(1));
  const ScalarField rho = [](const Vec& x, double) { return std::sin(3.0 * x[0]) + x[0] * x[0]; };
  for (const auto& r : ardo::generator_consistency_experiment(p, rho, Vec::Constant(1, 0.3), 0.0, {1e-1, 1e-3}, 10000)) {
    EXPECT_EQ(r.mean, 0.0);
    EXPECT_EQ(r.std_error, 0.0);
    EXPECT_NEAR(r.analytic, 0.0, 1e-8);
  }
}

// ρ = x³, a = 1, b = 0 at x = 0: odd moments cancel, so the mean is 0 ± noise.
TEST(GeneratorExperiment, CubicWithoutDriftIsCentered) {
  const PdeProblem p = ardo::verify::constant_coefficient_problem(ardo::Mat::Identity(1, 1), Vec::Zero(1));
  const ScalarField rho = [](const Vec& x, double) { return x[0] * x[0] * x[0]; };
  const auto rows = ardo::generator_consistency_experiment(p, rho, Vec::Zero(1), 0.0, ardo::verify::tau_ladder(), 100000, 3);
  for (const auto& r : rows) {
    EXPECT_NEAR(r.analytic, 0.0, 1e-9);
    EXPECT_LT(r.bias, 4.0 * r.std_error) << "tau " << r.tau;
  }
  EXPECT_EQ(ardo::generator_table_csv(rows).substr(0, 31), "tau,mean,std_error,analytic,bia");
}

TEST(GeneratorExperiment, TooFewSamples) {
  const PdeProblem p = ardo::verify::constant_coefficient_problem(ardo::Mat::Identity(1, 1), Vec::Zero(1));
  const ScalarField rho = [](const Vec& x, double) { return x[0]; };
  EXPECT_THROW(ardo::generator_consistency_experiment(p, rho, Vec::Zero(1), 0.0, {0.1}, 9999), ardo::Error);
}

TEST(VarianceExperiment, InsufficientTrials) {
  const PdeProblem p = ardo::builtin_problem("ou_stationary", 1);
  const ScalarField one = [](const Vec&, double) { return 1.0; };
  try {
    ardo::variance_scaling_experiment(p, one, one, {1e-1, 1e-2}, 100, 1);
    FAIL() << "expected an error";
  } catch (const ardo::Error& e) {
    EXPECT_NE(std::string(e.what()).find("insufficient trials"), std::string::npos);
  }
}

TEST(VarianceExperiment, SlopeOfExactPowerLaw) {
  EXPECT_NEAR(ardo::log_log_slope({1e-1, 1e-2, 1e-3}, {2e1, 2e2, 2e3}), -1.0, 1e-12);
  ardo::VarianceScaling v;
  v.rows = {{0.1, 2.0}};
  EXPECT_EQ(ardo::variance_table_csv(v), "tau,variance\n0.10000000000000001,2\n");
}

TEST(Traces, FluxOfExactSolutionMatchesNeumannData) {
  const PdeProblem p = ardo::builtin_problem("manufactured_elliptic", 2, {{1, ardo::Side::upper}});
  const Vec x = (Vec(2) << 0.7, 2.5).finished();
  const Vec normal = (Vec(2) << 0.0, 1.0).finished();
  EXPECT_NEAR(ardo::boundary_flux(p, ardo::verify::exact_field(p), x, 0.0, normal), p.neumann(x), 1e-8);
}

}  // namespace
