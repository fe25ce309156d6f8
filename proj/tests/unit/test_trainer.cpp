#include "ardo/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace {

using ardo::PdeProblem;
using ardo::TrainConfig;
using ardo::Vec;

TrainConfig small_config() {
  TrainConfig c;
  c.epochs = 20;
  c.m_interior = 256;
  c.m_dirichlet = 32;
  c.m_neumann = 32;
  c.tau = 1e-2;
  c.eval_every = 5;
  c.network.hidden = {8, 8};
  c.record_wall_clock = false;
  return c;
}

TEST(TrainConfig, Validation) {
  TrainConfig c = small_config();
  c.epochs = 0;
  EXPECT_THROW(c.validate(), ardo::Error);
  c = small_config();
  c.m_interior = 0;
  EXPECT_THROW(c.validate(), ardo::Error);
  c = small_config();
  c.lr_solution = 0.0;
  EXPECT_THROW(c.validate(), ardo::Error);
  c = small_config();
  c.tau = -1.0;
  EXPECT_THROW(c.validate(), ardo::Error);
  EXPECT_NO_THROW(small_config().validate());
}

TEST(Train, OneEpochMovesBothNetworks) {
  const PdeProblem p = ardo::builtin_problem("manufactured_elliptic", 1);
  TrainConfig c = small_config();
  c.epochs = 1;
  const auto r = ardo::train(p, c);
  ASSERT_EQ(r.status, ardo::TrainStatus::completed);
  const auto f0 = ardo::MlpNetwork<double>::xavier(c.network.widths(1), c.network.activation, c.network.seed);
  const auto rho0 = ardo::MlpNetwork<double>::xavier(c.network.widths(1), c.network.activation, c.network.seed + 1);
  EXPECT_NE(r.solution.parameters(), f0.parameters());
  EXPECT_NE(r.test.parameters(), rho0.parameters());
  ASSERT_EQ(r.metrics.records.size(), 1u);
  EXPECT_EQ(r.metrics.records[0].epoch, 1);
}

TEST(Train, MetricTraceIsIndependentOfLaneCount) {
  const PdeProblem p = ardo::builtin_problem("heat_parabolic", 1);
  TrainConfig c = small_config();
  c.m_interior = 700;
  ardo::set_lane_count(1);
  const std::string one = ardo::train(p, c).metrics.to_csv();
  ardo::set_lane_count(4);
  const std::string four = ardo::train(p, c).metrics.to_csv();
  ardo::set_lane_count(0);
  EXPECT_EQ(one, four);
  EXPECT_EQ(one.substr(0, one.find('\n')), "epoch,loss,s_i,s_d,s_n,se_i,se_d,se_n,l2_rel,gnorm_f,gnorm_rho,ms");
}

TEST(Train, SeedChangesTrace) {
  const PdeProblem p = ardo::builtin_problem("ou_stationary", 1);
  TrainConfig a = small_config(), b = small_config();
  b.seed = a.seed + 1;
  EXPECT_NE(ardo::train(p, a).metrics.to_csv(), ardo::train(p, b).metrics.to_csv());
}

// lr_test = 0 in raw mode: ρ stays at its initialization and only f moves.
TEST(Train, FrozenTestFunction) {
  const PdeProblem p = ardo::builtin_problem("ou_stationary", 1);
  TrainConfig c = small_config();
  c.lr_test = 0.0;
  c.loss_mode = ardo::LossMode::raw;
  const auto r = ardo::train(p, c);
  const auto rho0 = ardo::MlpNetwork<double>::xavier(c.network.widths(1), c.network.activation, c.network.seed + 1);
  EXPECT_EQ(r.test.parameters(), rho0.parameters());
  for (const auto& rec : r.metrics.records) EXPECT_EQ(rec.gnorm_rho, 0.0);
}

TEST(Train, MonotoneRecordsAndFinalError) {
  const PdeProblem p = ardo::builtin_problem("manufactured_semilinear", 1);
  TrainConfig c = small_config();
  c.epochs = 23;
  const auto r = ardo::train(p, c);
  std::vector<long> epochs;
  for (const auto& rec : r.metrics.records) epochs.push_back(rec.epoch);
  EXPECT_EQ(epochs, (std::vector<long>{5, 10, 15, 20, 23}));
  EXPECT_DOUBLE_EQ(r.final_l2_rel, r.metrics.records.back().l2_rel);
  EXPECT_DOUBLE_EQ(r.final_l2_rel, ardo::evaluate_l2_error(r.solution, p));
}

TEST(Train, SinglePrecisionRuns) {
  const PdeProblem p = ardo::builtin_problem("ou_stationary", 2);
  TrainConfig c = small_config();
  c.precision = ardo::Precision::f32;
  const auto r = ardo::train(p, c);
  EXPECT_EQ(r.status, ardo::TrainStatus::completed);
  EXPECT_TRUE(std::isfinite(r.final_l2_rel));
}

// A source that overflows once |f| grows: the run stops with the records so far.
TEST(Train, DivergenceKeepsPartialMetrics) {
  ardo::ProblemDefinition def = ardo::builtin_problem("manufactured_elliptic", 1).definition();
  def.source = [](double f, const Vec&, double) { return std::abs(f) > 3.0 ? std::nan("") : 1.0; };
  def.source_df = [](double, const Vec&, double) { return 0.0; };
  const PdeProblem p(def);
  TrainConfig c = small_config();
  c.epochs = 500;
  c.eval_every = 1;
  c.loss_mode = ardo::LossMode::raw;
  c.lr_solution = 0.05;
  const auto r = ardo::train(p, c);
  ASSERT_EQ(r.status, ardo::TrainStatus::diverged);
  EXPECT_GT(r.diverged_epoch, 1);
  EXPECT_EQ(r.message.rfind("diverged at epoch " + std::to_string(r.diverged_epoch), 0), 0u) << r.message;
  EXPECT_EQ(static_cast<long>(r.metrics.records.size()), r.diverged_epoch - 1);
  EXPECT_TRUE(std::isnan(r.final_l2_rel));
}

TEST(L2Error, RatioDefinition) {
  const PdeProblem p = ardo::builtin_problem("ou_stationary", 1);
  const auto exact = ardo::FieldView([&p](const ardo::PointSet& pts) {
    Vec out(pts.cols());
    for (Eigen::Index c = 0; c < pts.cols(); ++c) out[c] = p.exact(pts.col(c));
    return out;
  });
  const auto scaled = ardo::FieldView([exact](const ardo::PointSet& pts) { return Vec(1.1 * exact(pts)); });
  const auto zero = ardo::FieldView([](const ardo::PointSet& pts) { return Vec(Vec::Zero(pts.cols())); });
  EXPECT_EQ(ardo::evaluate_l2_error(exact, p), 0.0);
  EXPECT_EQ(ardo::evaluate_l2_error(zero, p), 1.0);
  EXPECT_NEAR(ardo::evaluate_l2_error(scaled, p), 0.1, 1e-12);
}

TEST(L2Error, MissingExactSolution) {
  ardo::ProblemDefinition def = ardo::builtin_problem("ou_stationary", 1).definition();
  def.exact_solution = nullptr;
  EXPECT_THROW(ardo::make_evaluation_grid(PdeProblem(def)), ardo::Error);
}

TEST(EvaluationGrid, SizesAndDeterminism) {
  EXPECT_EQ(ardo::make_evaluation_grid(ardo::builtin_problem("ou_stationary", 1)).points.cols(), 256);
  EXPECT_EQ(ardo::make_evaluation_grid(ardo::builtin_problem("ou_stationary", 2)).points.cols(), 256 * 256);
  EXPECT_EQ(ardo::make_evaluation_grid(ardo::builtin_problem("heat_parabolic", 1)).points.cols(), 256 * 256);
  const auto a = ardo::make_evaluation_grid(ardo::builtin_problem("ou_stationary", 3));
  const auto b = ardo::make_evaluation_grid(ardo::builtin_problem("ou_stationary", 3));
  EXPECT_EQ(a.points.cols(), 100000);
  EXPECT_EQ(a.points, b.points);
}

}  // namespace
