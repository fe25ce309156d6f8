#include "ardo/config.hpp"

#include <gtest/gtest.h>

namespace {

TEST(Config, DefaultsResolveToBuiltin) {
  const ardo::RunConfig c;
  const ardo::PdeProblem p = c.make_problem();
  EXPECT_EQ(p.name(), "ou_stationary");
  EXPECT_EQ(p.dim(), 1);
  EXPECT_NO_THROW(ardo::validate_config(c));
}

TEST(Config, TextParsesCommentsAndDottedKeys) {
  ardo::RunConfig c;
  ardo::apply_config_text(c,
                          "# heat run\n"
                          "problem.name = heat_parabolic\n"
                          "\n"
                          "train.tau = 1e-2   # coarser step\n"
                          "net.hidden = 16,16\n"
                          "train.loss_mode = raw\n");
  EXPECT_EQ(c.problem, "heat_parabolic");
  EXPECT_DOUBLE_EQ(c.train.tau, 1e-2);
  EXPECT_EQ(c.train.network.hidden, (std::vector<int>{16, 16}));
  EXPECT_EQ(c.train.loss_mode, ardo::LossMode::raw);
}

TEST(Config, UnknownKeyIsNamed) {
  ardo::RunConfig c;
  try {
    ardo::apply_config_text(c, "train.tua = 0.1\n");
    FAIL() << "expected an error";
  } catch (const ardo::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("train.tua"), std::string::npos);
  }
}

TEST(Config, MalformedInputRejected) {
  ardo::RunConfig c;
  EXPECT_THROW(ardo::apply_config_text(c, "train.tau 0.1\n"), ardo::ConfigError);
  EXPECT_THROW(ardo::apply_config_text(c, "train.tau = 0.1\ntrain.tau = 0.2\n"), ardo::ConfigError);
  EXPECT_THROW(ardo::apply_override(c, "train.epochs=ten"), ardo::ConfigError);
  EXPECT_THROW(ardo::apply_override(c, "train.loss_mode=log"), ardo::ConfigError);
  EXPECT_THROW(ardo::load_config_file("/nonexistent/ardo.cfg"), ardo::ConfigError);
}

TEST(Config, OverridesWinAndRoundTrip) {
  ardo::RunConfig c;
  ardo::apply_config_text(c, "train.m_interior = 512\n");
  ardo::apply_override(c, "train.m_interior=1000");
  ardo::apply_override(c, "train.tau=1e-4");
  ardo::apply_override(c, "problem.neumann=0+,1-");
  ardo::apply_override(c, "problem.dim=2");
  EXPECT_EQ(c.train.m_interior, 1000u);
  ASSERT_EQ(c.neumann_faces.size(), 2u);
  EXPECT_EQ(c.neumann_faces[1].axis, 1);
  EXPECT_EQ(c.neumann_faces[1].side, ardo::Side::lower);

  ardo::RunConfig back;
  ardo::apply_config_text(back, ardo::to_config_text(c));
  EXPECT_EQ(ardo::resolved_settings(back), ardo::resolved_settings(c));
  EXPECT_EQ(ardo::resolved_settings(c).size(), ardo::config_keys().size());
}

TEST(Config, ValidationReportsConfigErrors) {
  ardo::RunConfig c;
  ardo::apply_override(c, "problem.name=nope");
  EXPECT_THROW(ardo::validate_config(c), ardo::ConfigError);
  ardo::RunConfig d;
  ardo::apply_override(d, "train.epochs=0");
  EXPECT_THROW(ardo::validate_config(d), ardo::ConfigError);
  ardo::RunConfig e;
  ardo::apply_override(e, "problem.neumann=3+");
  EXPECT_THROW(ardo::validate_config(e), ardo::ConfigError);
}

}  // namespace
