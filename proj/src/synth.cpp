// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

#include "transfr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "transfr/errors.hpp"
#include "transfr/rng.hpp"

namespace transfr {
namespace {

std::string make_id(char prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%c%04zu", prefix, n);
  return buf;
}

std::string topic_word(std::size_t topic, std::size_t j) {
  return "k" + std::to_string(topic) + "w" + std::to_string(j);
}

struct Item {
  std::string id;
  std::size_t topic = 0;
  std::size_t style = 0;
};

struct Taste {
  Vector affinity;
  std::size_t style = 0;
  double contrast = 1.0;

  double operator()(const Item& it) const {
    const double a = affinity[it.topic];
    return it.style == style ? a : contrast * a;
  }
};

std::vector<Item> make_items(char prefix, std::size_t offset, std::size_t n,
                             const SyntheticConfig& cfg, Rng& rng,
                             std::map<std::string, std::string>& titles) {
  std::vector<Item> items;
  for (std::size_t i = 0; i < n; ++i) {
    Item it{make_id(prefix, offset + i), rng.index(cfg.topics), 0};
    if (cfg.styles > 0) it.style = rng.index(cfg.styles);
    std::string title;
    for (std::size_t t = 0; t < cfg.title_length; ++t) {
      std::string w;
      const double r = rng.uniform();
      if (r < cfg.topic_word_rate) {
        w = topic_word(it.topic, rng.index(cfg.words_per_topic));
      } else if (cfg.filler_words > 0 && r < (1 + cfg.topic_word_rate) / 2) {
        w = "f" + std::to_string(rng.index(cfg.filler_words));
      } else {
        w = topic_word(rng.index(cfg.topics), rng.index(cfg.words_per_topic));
      }
      if (!title.empty()) title += ' ';
      title += w;
    }
    for (std::size_t t = 0; cfg.styles > 0 && t < cfg.style_tokens; ++t) {
      title += " y" + std::to_string(it.style) + "w" +
               std::to_string(rng.index(cfg.words_per_style));
    }
    titles[it.id] = title;
    items.push_back(std::move(it));
  }
  return items;
}

// Gumbel top-k: k draws without replacement with probability proportional to
// exp(taste(item)).
std::vector<std::size_t> choose(const std::vector<Item>& items,
                                const Taste& taste, std::size_t k, Rng& rng) {
  std::vector<std::pair<double, std::size_t>> keyed;
  keyed.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const double u = std::max(rng.uniform(), 1e-300);
    keyed.emplace_back(taste(items[i]) - std::log(-std::log(u)), i);
  }
  k = std::min(k, items.size());
  std::partial_sort(keyed.begin(), keyed.begin() + static_cast<long>(k),
                    keyed.end(), [](const auto& a, const auto& b) {
                      return a.first > b.first ||
                             (a.first == b.first && a.second < b.second);
                    });
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < k; ++j) out.push_back(keyed[j].second);
  return out;
}

void emit(const std::string& user, const std::vector<Item>& items,
          const std::vector<std::size_t>& picks, Rng& rng,
          std::vector<Interaction>& out) {
  for (std::size_t i : picks) {
    out.push_back({user, items[i].id,
                   static_cast<std::int64_t>(rng.index(1000000))});
  }
}

}  // namespace

SyntheticCorpus make_synthetic_corpus(const SyntheticConfig& cfg) {
  if (cfg.users == 0 || cfg.topics == 0 || cfg.words_per_topic == 0 ||
      cfg.items_per_domain == 0 || cfg.title_length == 0) {
    throw ConfigError("synthetic corpus: sizes must be positive");
  }
  if (cfg.positives_min < 2 || cfg.positives_max < cfg.positives_min) {
    throw ConfigError("synthetic corpus: need 2 <= positives_min <= positives_max");
  }
  SyntheticCorpus c;
  Rng item_rng(cfg.seed, "synth-items");
  const auto src = make_items('s', 0, cfg.items_per_domain, cfg, item_rng,
                              c.titles);
  const auto tgt = make_items('t', 0, cfg.items_per_domain, cfg, item_rng,
                              c.titles);
  const auto cold = make_items('t', cfg.items_per_domain, cfg.cold_items, cfg,
                               item_rng, c.titles);
  for (const auto& it : src) c.source_items.push_back(it.id);
  for (const auto& it : tgt) c.target_items.push_back(it.id);
  for (const auto& it : cold) c.cold_items.push_back(it.id);

  for (std::size_t u = 0; u < cfg.users; ++u) {
    const std::string user = make_id('u', u);
    Rng rng(cfg.seed, "synth-user", {u});
    Taste a{Vector(cfg.topics), 0, 1.0};
    for (double& v : a.affinity) v = rng.normal(0.0, cfg.affinity_scale);
    if (cfg.styles > 0) {
      a.style = rng.index(cfg.styles);
      a.contrast = cfg.style_contrast;
    }
    Taste b = a;
    for (double& v : b.affinity) v += rng.normal(0.0, cfg.target_shift);
    const std::size_t span = cfg.positives_max - cfg.positives_min + 1;
    emit(user, src, choose(src, a, cfg.positives_min + rng.index(span), rng),
         rng, c.source);
    emit(user, tgt, choose(tgt, b, cfg.positives_min + rng.index(span), rng),
         rng, c.target);
    if (!cold.empty() && cfg.cold_positives > 0) {
      emit(user, cold, choose(cold, b, cfg.cold_positives, rng), rng,
           c.target_cold);
    }
  }
  return c;
}

PlantedWorkload make_planted_workload(const PlantedConfig& cfg) {
  if (cfg.clusters == 0 || cfg.items < cfg.clusters || cfg.dim == 0) {
    throw ConfigError("planted workload: need items >= clusters >= 1, dim >= 1");
  }
  Rng rng(cfg.seed, "planted");
  std::vector<Vector> centroids(cfg.clusters, Vector(cfg.dim));
  for (auto& c : centroids)
    for (double& v : c) v = rng.normal();
  PlantedWorkload w;
  w.features = EmbeddingTable(cfg.dim);
  std::vector<std::vector<std::string>> members(cfg.clusters);
  for (std::size_t i = 0; i < cfg.items; ++i) {
    const std::size_t k = i % cfg.clusters;
    Vector v = centroids[k];
    for (double& x : v) x += rng.normal(0.0, cfg.noise);
    const std::string id = make_id('i', i);
    w.features.add(id, std::move(v));
    members[k].push_back(id);
  }
  for (std::size_t u = 0; u < cfg.users; ++u) {
    const std::string user = make_id('u', u);
    const auto& pool = members[u % cfg.clusters];
    const auto picks =
        rng.sample_without_replacement(pool.size(), std::min(cfg.positives, pool.size()));
    for (std::size_t p : picks) {
      w.interactions.push_back(
          {user, pool[p], static_cast<std::int64_t>(rng.index(1000000))});
    }
  }
  return w;
}

EmbeddingTable random_table(const std::vector<std::string>& ids,
                            std::size_t dim, std::uint64_t seed) {
  EmbeddingTable t(dim);
  for (const auto& id : ids) {
    Rng rng(seed, "random-table", {hash_string(id)});
    Vector v(dim);
    for (double& x : v) x = rng.normal(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
    t.add(id, std::move(v));
  }
  return t;
}

}  // namespace transfr
