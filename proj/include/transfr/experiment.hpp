// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end experiment drivers built from an ExperimentConfig. Each driver
// returns line records; the command-line tool writes them to disk.

#ifndef TRANSFR_EXPERIMENT_HPP_
#define TRANSFR_EXPERIMENT_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "transfr/config.hpp"
#include "transfr/distill.hpp"
#include "transfr/encoder.hpp"
#include "transfr/eval.hpp"
#include "transfr/synth.hpp"
#include "transfr/theory.hpp"

namespace transfr {

PipelineConfig pipeline_config(const ExperimentConfig& cfg);
SyntheticConfig synthetic_config(const ExperimentConfig& cfg);

// Source and target domains, the cold items when available, and the titles
// of every item.
struct World {
  DomainSetup source;
  DomainSetup target;
  std::optional<ColdSet> cold;
  std::map<std::string, std::string> titles;
};

// Text encoder for `titles`: the loaded table when cfg.embeddings is set,
// otherwise a seeded toy transformer (or the distilled student from
// cfg.student) mean-pooled over title tokens. With cfg.pretrain off every item
// instead gets a seeded random vector of the same width.
// `ids` lists every item that needs a vector.
FrozenEncoder make_encoder(const ExperimentConfig& cfg,
                           const std::map<std::string, std::string>& titles,
                           const std::vector<std::string>& ids);

// Synthetic corpus when cfg.source is empty, otherwise the interaction and
// title files named by the config (k-core filtered).
World build_world(const ExperimentConfig& cfg);

// Teacher, student and corpus of the toy distillation task. The student is a
// seeded random network of distill_student_dim; the projection starts as the
// identity on the leading coordinates.
struct DistillTask {
  ToyTransformer teacher;
  ToyTransformer student;
  Matrix projection;
  std::vector<TokenSequence> corpus;
};

DistillTask make_distill_task(const ExperimentConfig& cfg);
DistillResult run_distill(const DistillTask& task, const ExperimentConfig& cfg);

struct Records {
  std::vector<std::string> lines;
  std::string table;
};

struct TrainOutput {
  Records records;
  AdapterParams adapter;
  std::vector<RoundReport> rounds;
};

// TransFR and the ID baseline ranked over the cold items after transfer.
struct ColdStartComparison {
  MetricReport transfr;
  MetricReport id;
};

ColdStartComparison compare_coldstart(const World& world, const ExperimentConfig& cfg);

TrainOutput run_train_experiment(const World& world, const ExperimentConfig& cfg);
Records run_transfer_experiment(const World& world, const ExperimentConfig& cfg);
Records run_coldstart_experiment(const World& world, const ExperimentConfig& cfg);
Records run_dp_sweep(const World& world, const ExperimentConfig& cfg);
// Full model and the w/o PT, w/o FAT and w/o PAP variants, each evaluated on
// both domains.
Records run_ablation(const ExperimentConfig& cfg);
Records run_theory(const ExperimentConfig& cfg);

// Parses `kind key=value ...` records and renders one aligned table per kind.
std::string render_records(const std::vector<std::string>& lines);

}  // namespace transfr

#endif  // TRANSFR_EXPERIMENT_HPP_
