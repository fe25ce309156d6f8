#include "ardo/problem.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace {

using ardo::builtin_problem;
using ardo::PdeProblem;
using ardo::Vec;

Vec v1(double x) { return Vec::Constant(1, x); }

// ½Δf − ∇·(b f) by central differences with step h; independent of the library.
double fokker_planck_source(const PdeProblem& p, const Vec& x, double h) {
  auto f = [&](const Vec& y) { return p.exact(y); };
  double lap = 0.0, div = 0.0;
  for (int k = 0; k < x.size(); ++k) {
    Vec up = x, down = x;
    up[k] += h;
    down[k] -= h;
    lap += (f(up) - 2.0 * f(x) + f(down)) / (h * h);
    div += (p.drift(up)[k] * f(up) - p.drift(down)[k] * f(down)) / (2.0 * h);
  }
  return 0.5 * lap - div;
}

TEST(Builtin, OuStationaryExactValues) {
  const PdeProblem p = builtin_problem("ou_stationary", 1);
  EXPECT_DOUBLE_EQ(p.exact(v1(0.0)), 1.0);
  EXPECT_NEAR(p.exact(v1(1.0)), std::exp(-1.0), 1e-15);
  EXPECT_FALSE(p.parabolic());
  EXPECT_EQ(p.input_dim(), 1);
}

TEST(Builtin, HeatExactAtOrigin) {
  const PdeProblem p = builtin_problem("heat_parabolic", 1);
  EXPECT_NEAR(p.exact(v1(0.0), 0.0), 1.0 / std::sqrt(2.0 * std::numbers::pi * 0.25), 1e-14);
  EXPECT_NEAR(p.exact(v1(0.0), 0.0), 0.7979, 1e-4);
  EXPECT_TRUE(p.parabolic());
  EXPECT_DOUBLE_EQ(p.horizon(), 0.5);
  EXPECT_EQ(p.input_dim(), 2);
  EXPECT_DOUBLE_EQ(p.initial(v1(0.3)), p.exact(v1(0.3), 0.0));
}

TEST(Builtin, ManufacturedSourceMatchesFiniteDifferences) {
  const PdeProblem p = builtin_problem("manufactured_elliptic", 2);
  for (const Vec& x : {Vec(Vec::Zero(2)), Vec((Vec(2) << 0.7, -1.1).finished())}) {
    EXPECT_NEAR(p.source(p.exact(x), x), fokker_planck_source(p, x, 1e-4), 1e-6);
  }
}

TEST(Builtin, SemilinearSourceIsCubicInF) {
  const PdeProblem p = builtin_problem("manufactured_semilinear", 1);
  const Vec x = v1(0.4);
  const double fs = p.exact(x);
  EXPECT_NEAR(p.source(fs, x), fokker_planck_source(p, x, 1e-4), 1e-6);
  EXPECT_NEAR(p.source(fs + 0.5, x) - p.source(fs, x), std::pow(fs + 0.5, 3) - std::pow(fs, 3), 1e-12);
  EXPECT_NEAR(p.source_derivative(2.0, x), 12.0, 1e-12);
}

TEST(Builtin, ExactSolutionsHaveSmallResidual) {
  ardo::RandomStream rng(2024);
  for (const auto& name : ardo::builtin_problem_names()) {
    for (int dim : {1, 2}) {
      const PdeProblem p = builtin_problem(name, dim);
      const ardo::ScalarField exact = [&p](const Vec& x, double t) { return p.exact(x, t); };
      double worst = 0.0;
      for (int k = 0; k < 200; ++k) {
        Vec x(dim);
        for (int i = 0; i < dim; ++i) x[i] = rng.uniform(-2.4, 2.4);
        const double t = p.parabolic() ? rng.uniform(0.01, 0.49) : 0.0;
        worst = std::max(worst, std::abs(ardo::pde_residual(p, exact, x, t)));
      }
      EXPECT_LT(worst, 1e-4) << name << " dim " << dim;
    }
  }
}

TEST(PdeResidual, SpecExamples) {
  const PdeProblem ou = builtin_problem("ou_stationary", 1);
  const ardo::ScalarField exact = [&ou](const Vec& x, double t) { return ou.exact(x, t); };
  EXPECT_NEAR(ardo::pde_residual(ou, exact, v1(0.3)), 0.0, 1e-5);
  const ardo::ScalarField one = [](const Vec&, double) { return 1.0; };
  EXPECT_NEAR(ardo::pde_residual(ou, one, v1(0.0)), -1.0, 1e-5);
  EXPECT_NEAR(ardo::pde_residual(ou, one, v1(1.7)), -1.0, 1e-5);

  const PdeProblem heat = builtin_problem("heat_parabolic", 1);
  const ardo::ScalarField heat_exact = [&heat](const Vec& x, double t) { return heat.exact(x, t); };
  EXPECT_NEAR(ardo::pde_residual(heat, heat_exact, v1(0.1), 0.2), 0.0, 1e-4);
}

TEST(PdeResidual, StencilNearBoundaryRejected) {
  const PdeProblem ou = builtin_problem("ou_stationary", 1);
  const ardo::ScalarField one = [](const Vec&, double) { return 1.0; };
  EXPECT_THROW(ardo::pde_residual(ou, one, v1(2.5 - 1e-4)), ardo::Error);
}

TEST(PdeProblem, DiffusionIsExactlySymmetric) {
  ardo::ProblemDefinition def;
  def.domain = ardo::Domain::cube(3, 0.0, 1.0);
  def.n_w = 2;
  def.sigma = [](const Vec& x, double) -> ardo::Mat {
    ardo::Mat s(3, 2);
    s << 1.0, x[0], 0.3, 2.0, -x[1], 0.7;
    return s;
  };
  def.drift = [](const Vec& x, double) -> Vec { return x; };
  def.source = [](double, const Vec&, double) { return 0.0; };
  def.dirichlet_data = [](const Vec&, double) { return 0.0; };
  const PdeProblem p(def);
  const ardo::Mat a = p.diffusion((Vec(3) << 0.2, 0.9, 0.4).finished());
  EXPECT_EQ((a - a.transpose()).norm(), 0.0);
}

TEST(PdeProblem, ExactSolutionMustMatchDirichletData) {
  ardo::ProblemDefinition def;
  def.domain = ardo::Domain::cube(1, 0.0, 1.0);
  def.sigma = [](const Vec&, double) -> ardo::Mat { return ardo::Mat::Identity(1, 1); };
  def.drift = [](const Vec&, double) -> Vec { return Vec::Zero(1); };
  def.source = [](double, const Vec&, double) { return 0.0; };
  def.dirichlet_data = [](const Vec&, double) { return 0.0; };
  def.exact_solution = [](const Vec&, double) { return 1.0; };
  EXPECT_THROW(PdeProblem{def}, ardo::Error);
}

TEST(Builtin, UnknownNameListsAvailable) {
  try {
    builtin_problem("nope", 1);
    FAIL() << "expected an error";
  } catch (const ardo::Error& e) {
    EXPECT_NE(std::string(e.what()).find("ou_stationary"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("heat_parabolic"), std::string::npos);
  }
}

// φ = ν·(½∇f* − b f*) on a Neumann face; checked against a one-sided oracle.
TEST(Builtin, NeumannDataIsExactConormalFlux) {
  const PdeProblem p = builtin_problem("ou_stationary", 1, {{0, ardo::Side::upper}});
  const double x = 2.5, h = 1e-5;
  const double grad = (p.exact(v1(x + h)) - p.exact(v1(x - h))) / (2.0 * h);
  EXPECT_NEAR(p.neumann(v1(x)), 0.5 * grad + x * p.exact(v1(x)), 1e-9);
}

}  // namespace
