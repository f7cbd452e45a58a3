// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

// Flat `key = value` experiment configuration.

#ifndef TRANSFR_CONFIG_HPP_
#define TRANSFR_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace transfr {

struct ExperimentConfig {
  std::uint64_t seed = 7;
  int threads = 1;

  // Model shape.
  std::size_t e = 8;
  std::size_t f_enc = 32;  // toy encoder width; must match a loaded table
  std::size_t d = 8;
  std::size_t adapter_layers = 2;
  std::size_t encoder_heads = 2;
  std::size_t encoder_layers = 2;

  // Federated training.
  double eta_c = 0.05;
  double eta_s = 0.05;
  double baseline_eta_s = 5.0;
  std::size_t n_negatives = 4;
  int rounds = 100;
  double fraction = 0.5;
  int pap_epochs = 6;
  int target_epochs = 6;

  // Evaluation.
  std::size_t candidate_size = 100;
  std::size_t k = 10;

  // Gaussian mechanism. dp_sigma applies to train/transfer when dp is on;
  // dp_sigmas is the dp-sweep grid.
  bool dp = false;
  double dp_clip = 5.0;
  double dp_sigma = 0.0;
  std::vector<double> dp_sigmas{0.0, 0.1, 0.2, 0.3};

  // Component toggles.
  bool pretrain = true;
  bool fat = true;
  bool pap = true;

  // Data. Empty source/target paths select the built-in synthetic corpus.
  std::string source;
  std::string target;
  std::string cold;
  std::string texts;
  std::string embeddings;  // TFRE table; empty selects the toy encoder
  std::string student;     // distilled encoder used as the toy encoder
  std::size_t min_user = 20;
  std::size_t min_item = 30;
  std::size_t synthetic_users = 300;
  std::size_t synthetic_items = 150;
  std::size_t synthetic_cold_items = 40;
  std::size_t synthetic_topics = 10;
  std::size_t synthetic_styles = 2;

  // Distillation.
  std::size_t distill_teacher_layers = 6;
  std::size_t distill_student_layers = 2;
  std::size_t distill_teacher_dim = 32;
  std::size_t distill_student_dim = 16;
  std::size_t distill_heads = 2;
  std::size_t distill_sequences = 50;
  std::size_t distill_vocab = 12;
  int distill_epochs = 200;
  double distill_lr = 0.01;

  // Linear heterogeneity sweep.
  std::vector<double> theory_taus{0.0, 0.5, 1.0, 2.0};
  std::size_t theory_l = 8;
  std::size_t theory_f = 4;
  std::size_t theory_d = 2;
  std::size_t theory_n = 6;
  int theory_iters = 20000;
  double theory_lr = 0.05;

  bool operator==(const ExperimentConfig&) const = default;
};

// Blank lines and `#` comments are ignored. Unknown keys, malformed values and
// violated invariants throw ConfigError naming the key and line.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig read_config(const std::filesystem::path& path);

// Every key in a fixed order; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);

// Throws ConfigError for violated invariants.
void validate(const ExperimentConfig& cfg);

}  // namespace transfr

#endif  // TRANSFR_CONFIG_HPP_
