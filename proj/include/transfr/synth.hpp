// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

// Seeded generators for the small workloads used by tests and experiments.

#ifndef TRANSFR_SYNTH_HPP_
#define TRANSFR_SYNTH_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "transfr/data.hpp"
#include "transfr/numerics.hpp"

namespace transfr {

// Two domains over one user population. Items are disjoint between domains
// but their titles draw from a shared topic vocabulary, and each user's topic
// affinities carry over from the source domain to the target domain.
struct SyntheticConfig {
  std::size_t users = 60;
  std::size_t topics = 6;
  std::size_t words_per_topic = 6;
  std::size_t filler_words = 4;
  std::size_t title_length = 6;
  double topic_word_rate = 0.7;  // chance a title token comes from its topic
  std::size_t items_per_domain = 120;
  std::size_t cold_items = 40;  // extra target items never trained on
  std::size_t positives_min = 12;
  std::size_t positives_max = 18;
  std::size_t cold_positives = 2;
  double affinity_scale = 2.5;
  // Stddev of the per-user perturbation added to target affinities.
  double target_shift = 0.5;
  // Optional style facet. Every title then carries style_tokens words of its
  // item's style, and a user's affinity for a topic is scaled by
  // style_contrast when the item is not in the user's preferred style, so
  // preference depends on the (topic, style) pair rather than on each alone.
  std::size_t styles = 0;
  std::size_t words_per_style = 3;
  std::size_t style_tokens = 2;
  double style_contrast = -1.0;
  std::uint64_t seed = 0;
};

struct SyntheticCorpus {
  std::vector<Interaction> source;
  std::vector<Interaction> target;       // warm target items only
  std::vector<Interaction> target_cold;  // interactions with cold items
  std::vector<std::string> source_items;
  std::vector<std::string> target_items;
  std::vector<std::string> cold_items;
  std::map<std::string, std::string> titles;  // every item of both domains
};

SyntheticCorpus make_synthetic_corpus(const SyntheticConfig& cfg);

// Single-domain workload with directly planted item features: each item is a
// noisy copy of one of `clusters` centroids and each user prefers items of
// one cluster. Used where no text pipeline is needed.
struct PlantedWorkload {
  std::vector<Interaction> interactions;
  EmbeddingTable features;
};

struct PlantedConfig {
  std::size_t users = 20;
  std::size_t items = 50;
  std::size_t clusters = 5;
  std::size_t dim = 8;
  std::size_t positives = 8;
  double noise = 0.3;
  std::uint64_t seed = 0;
};

PlantedWorkload make_planted_workload(const PlantedConfig& cfg);

// Seeded random vectors of `dim` for every id; the pre-training ablation.
EmbeddingTable random_table(const std::vector<std::string>& ids,
                            std::size_t dim, std::uint64_t seed);

}  // namespace transfr

#endif  // TRANSFR_SYNTH_HPP_
