// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

#include "transfr/config.hpp"

#include <gtest/gtest.h>

#include <sstream>

#include "transfr/errors.hpp"

namespace transfr {
namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(ParseConfigTest, EmptyGivesDefaults) {
  EXPECT_EQ(parse(""), ExperimentConfig{});
  EXPECT_EQ(parse("# comment only\n\n   \n"), ExperimentConfig{});
}

TEST(ParseConfigTest, SetsFields) {
  const ExperimentConfig c = parse(
      "pap_epochs = 6\n"
      "eta_s=0.2  # trailing comment\n"
      "pap = false\n"
      "dp_sigmas = 0, 0.5\n"
      "source = data/books.tsv\n");
  EXPECT_EQ(c.pap_epochs, 6);
  EXPECT_EQ(c.eta_s, 0.2);
  EXPECT_FALSE(c.pap);
  EXPECT_EQ(c.dp_sigmas, (std::vector<double>{0.0, 0.5}));
  EXPECT_EQ(c.source, "data/books.tsv");
}

TEST(ParseConfigTest, RejectsBadInput) {
  EXPECT_NE(error_of("eta_s = -1\n").find("eta_s"), std::string::npos);
  EXPECT_NE(error_of("rounds = 3\nbogus = 1\n").find("line 2"), std::string::npos);
  EXPECT_NE(error_of("rounds = 3\nrounds = 4\n"), "");
  EXPECT_NE(error_of("rounds = many\n"), "");
  EXPECT_NE(error_of("rounds 3\n"), "");
  EXPECT_NE(error_of("fraction = 0\n"), "");
  EXPECT_NE(error_of("fraction = 1.5\n"), "");
  EXPECT_NE(error_of("d = 64\n"), "");
  EXPECT_NE(error_of("dp_clip = 0\n"), "");
  EXPECT_NE(error_of("pap = maybe\n"), "");
}

TEST(SerializeConfigTest, RoundTrip) {
  EXPECT_EQ(parse(serialize_config(ExperimentConfig{})), ExperimentConfig{});
  ExperimentConfig c;
  c.seed = 99;
  c.eta_c = 0.1 + 0.2;
  c.dp_sigmas = {0.0, 1.0 / 3.0};
  c.theory_taus = {0.25};
  c.texts = "texts.tsv";
  c.fat = false;
  c.distill_student_dim = 8;
  EXPECT_EQ(parse(serialize_config(c)), c);
}

TEST(ValidateTest, DefaultsAreValid) {
  EXPECT_NO_THROW(validate(ExperimentConfig{}));
  ExperimentConfig c;
  c.distill_heads = 3;
  EXPECT_THROW(validate(c), ConfigError);
  c = ExperimentConfig{};
  c.rounds = 0;
  EXPECT_THROW(validate(c), ConfigError);
}

}  // namespace
}  // namespace transfr
