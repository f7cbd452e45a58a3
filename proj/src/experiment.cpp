// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

#include "transfr/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "transfr/errors.hpp"
#include "transfr/rng.hpp"

namespace transfr {
namespace {

constexpr std::size_t kDistillSequenceLength = 8;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// format_record minus its leading kind token.
std::string metric_fields(const MetricReport& r) {
  const std::string rec = format_record(r);
  return rec.substr(rec.find(' ') + 1);
}

std::string metric_line(const std::string& kind, const std::string& tag,
                        const MetricReport& r) {
  return kind + " " + tag + " " + metric_fields(r);
}

std::vector<Interaction> filtered(const std::string& path,
                                  const ExperimentConfig& cfg,
                                  const std::string& tag) {
  return filter_kcore(read_interactions(path), cfg.min_user, cfg.min_item, tag)
      .to_records();
}

std::vector<std::string> unique_items(const std::vector<Interaction>& records) {
  std::set<std::string> ids;
  for (const auto& r : records) ids.insert(r.item_id);
  return {ids.begin(), ids.end()};
}

}  // namespace

PipelineConfig pipeline_config(const ExperimentConfig& cfg) {
  PipelineConfig p;
  p.e = cfg.e;
  p.d = cfg.d;
  p.adapter_layers = cfg.adapter_layers;
  p.eta_c = cfg.eta_c;
  p.eta_s = cfg.eta_s;
  p.baseline_eta_s = cfg.baseline_eta_s;
  p.n_negatives = cfg.n_negatives;
  p.rounds = cfg.rounds;
  p.fraction = cfg.fraction;
  p.fat = cfg.fat;
  p.pap = cfg.pap;
  p.pap_epochs = cfg.pap_epochs;
  p.target_epochs = cfg.target_epochs;
  p.dp = DpConfig{cfg.dp, cfg.dp_clip, cfg.dp_sigma};
  p.eval = EvalConfig{cfg.k, cfg.candidate_size, cfg.seed, cfg.threads};
  p.seed = cfg.seed;
  p.threads = cfg.threads;
  return p;
}

SyntheticConfig synthetic_config(const ExperimentConfig& cfg) {
  SyntheticConfig s;
  s.users = cfg.synthetic_users;
  s.items_per_domain = cfg.synthetic_items;
  s.cold_items = cfg.synthetic_cold_items;
  s.topics = cfg.synthetic_topics;
  s.styles = cfg.synthetic_styles;
  s.seed = cfg.seed;
  return s;
}

FrozenEncoder make_encoder(const ExperimentConfig& cfg,
                           const std::map<std::string, std::string>& titles,
                           const std::vector<std::string>& ids) {
  if (!cfg.pretrain) {
    return FrozenEncoder::from_table(
        random_table(ids, cfg.f_enc, derive_seed(cfg.seed, "no-pretrain")));
  }
  if (!cfg.embeddings.empty()) {
    EmbeddingTable table = load_embedding_table(cfg.embeddings);
    if (table.dim() != cfg.f_enc) {
      throw ConfigError("key 'f_enc': table has dim " + std::to_string(table.dim()) +
                        ", config says " + std::to_string(cfg.f_enc));
    }
    return FrozenEncoder::from_table(std::move(table));
  }
  std::vector<std::string> lines;
  for (const auto& [id, title] : titles) lines.push_back(title);
  Vocabulary vocab = Vocabulary::build(lines);
  ToyTransformer model;
  if (!cfg.student.empty()) {
    model = load_transformer(cfg.student);
    if (model.shape().dim != cfg.f_enc || model.shape().vocab != vocab.size()) {
      throw ConfigError("key 'student': encoder shape does not match f_enc and "
                        "the title vocabulary");
    }
  } else {
    const TransformerShape shape{vocab.size(), cfg.f_enc, cfg.encoder_heads,
                                 cfg.encoder_layers, 2 * cfg.f_enc};
    model = ToyTransformer::random(shape, derive_seed(cfg.seed, "encoder"),
                                   TransformerInit{});
  }
  return FrozenEncoder::from_transformer(std::move(model), std::move(vocab), titles);
}

World build_world(const ExperimentConfig& cfg) {
  World w;
  if (cfg.source.empty()) {
    const SyntheticCorpus c = make_synthetic_corpus(synthetic_config(cfg));
    w.titles = c.titles;
    std::vector<std::string> ids;
    for (const auto& [id, t] : c.titles) ids.push_back(id);
    const FrozenEncoder enc = make_encoder(cfg, w.titles, ids);
    w.source = make_domain(c.source, "source", enc, cfg.seed);
    w.target = make_domain(c.target, "target", enc, cfg.seed);
    if (!c.cold_items.empty()) {
      w.cold = make_cold_set(c.target_cold, c.cold_items, enc);
    }
    return w;
  }
  if (cfg.target.empty()) throw ConfigError("key 'target': required with 'source'");
  if (!cfg.texts.empty()) w.titles = read_item_texts(cfg.texts);
  const auto src = filtered(cfg.source, cfg, "source");
  const auto tgt = filtered(cfg.target, cfg, "target");
  const std::vector<Interaction> cold =
      cfg.cold.empty() ? std::vector<Interaction>{} : read_interactions(cfg.cold);
  std::set<std::string> all;
  for (const std::vector<Interaction>* rs : {&src, &tgt, &cold})
    for (const auto& r : *rs) all.insert(r.item_id);
  const FrozenEncoder enc =
      make_encoder(cfg, w.titles, std::vector<std::string>(all.begin(), all.end()));
  w.source = make_domain(src, "source", enc, cfg.seed);
  w.target = make_domain(tgt, "target", enc, cfg.seed);
  if (!cold.empty()) w.cold = make_cold_set(cold, unique_items(cold), enc);
  return w;
}

DistillTask make_distill_task(const ExperimentConfig& cfg) {
  DistillTask t;
  std::size_t vocab = cfg.distill_vocab;
  if (!cfg.texts.empty()) {
    const auto titles = read_item_texts(cfg.texts);
    std::vector<std::string> lines;
    for (const auto& [id, title] : titles) lines.push_back(title);
    const Vocabulary v = Vocabulary::build(lines);
    vocab = v.size();
    for (const auto& line : lines) {
      if (t.corpus.size() == cfg.distill_sequences) break;
      t.corpus.push_back(v.encode(line));
    }
  } else {
    Rng rng(cfg.seed, "distill-corpus");
    for (std::size_t s = 0; s < cfg.distill_sequences; ++s) {
      TokenSequence seq(kDistillSequenceLength);
      for (auto& tok : seq) tok = rng.index(vocab);
      t.corpus.push_back(std::move(seq));
    }
  }
  const std::size_t tdim = cfg.distill_teacher_dim, sdim = cfg.distill_student_dim;
  TransformerInit teacher_init;
  teacher_init.query_key = 2.0;
  t.teacher = ToyTransformer::random(
      {vocab, tdim, cfg.distill_heads, cfg.distill_teacher_layers, 2 * tdim},
      derive_seed(cfg.seed, "teacher"), teacher_init);
  t.student = ToyTransformer::random(
      {vocab, sdim, cfg.distill_heads, cfg.distill_student_layers, 2 * sdim},
      derive_seed(cfg.seed, "student"), TransformerInit{});
  // Identity on the shared leading coordinates.
  t.projection = Matrix(sdim, tdim);
  for (std::size_t i = 0; i < std::min(sdim, tdim); ++i) t.projection(i, i) = 1.0;
  return t;
}

DistillResult run_distill(const DistillTask& task, const ExperimentConfig& cfg) {
  HkdConfig h;
  h.epochs = cfg.distill_epochs;
  h.learning_rate = cfg.distill_lr;
  h.threads = cfg.threads;
  return distill_train(task.teacher, task.student, task.projection, task.corpus, h);
}

TrainOutput run_train_experiment(const World& world, const ExperimentConfig& cfg) {
  const PipelineConfig p = pipeline_config(cfg);
  TrainedModel m = train_transfr(world.source, p);
  const MetricReport r = evaluate_model(m.clients, m.adapter,
                                        world.source.features, world.source.split,
                                        p.eval);
  TrainOutput out;
  out.records.lines.push_back(metric_line("train", "model=transfr", r));
  out.records.table = format_table(r);
  out.adapter = std::move(m.adapter);
  out.rounds = std::move(m.reports);
  return out;
}

Records run_transfer_experiment(const World& world, const ExperimentConfig& cfg) {
  const PipelineConfig p = pipeline_config(cfg);
  const TransferRun t = run_transfer(world.source, world.target, p);
  const IdTransferRun b = run_id_transfer(world.source, world.target, p);
  Records out;
  for (const auto& [name, rep] : {std::pair{std::string("transfr"), t.report},
                                  std::pair{std::string("id"), b.report}}) {
    out.lines.push_back(metric_line("transfer", "model=" + name, rep.source));
    out.lines.push_back(metric_line("transfer", "model=" + name, rep.target));
    out.lines.push_back("delta model=" + name + " hr=" + fmt(rep.delta_hr) +
                        " ndcg=" + fmt(rep.delta_ndcg));
    out.table += "[" + name + "]\n" + format_table(rep);
  }
  return out;
}

ColdStartComparison compare_coldstart(const World& world, const ExperimentConfig& cfg) {
  if (!world.cold) throw PreconditionError("coldstart: no cold items available");
  const PipelineConfig p = pipeline_config(cfg);
  const TransferRun t = run_transfer(world.source, world.target, p);
  const IdTransferRun b = run_id_transfer(world.source, world.target, p);
  const ColdSet& cold = *world.cold;
  ColdStartComparison out;
  out.transfr = cold_start_eval(cold, t.target_clients, t.source_model.adapter, p.eval);
  std::vector<Vector> cold_rows;
  for (const auto& id : cold.item_ids) cold_rows.push_back(cold_item_embedding(id, p.e, p.seed));
  out.id = cold_start_eval(
      cold, b.target_model.user_ids,
      [&](std::size_t u, std::size_t i) { return dot(b.target_model.users[u], cold_rows[i]); },
      p.eval, "cold");
  return out;
}

Records run_coldstart_experiment(const World& world, const ExperimentConfig& cfg) {
  const ColdStartComparison c = compare_coldstart(world, cfg);
  Records out;
  out.lines.push_back(metric_line("coldstart", "model=transfr", c.transfr));
  out.lines.push_back(metric_line("coldstart", "model=id", c.id));
  out.table = "[transfr]\n" + format_table(c.transfr) + "[id]\n" + format_table(c.id);
  return out;
}

Records run_dp_sweep(const World& world, const ExperimentConfig& cfg) {
  Records out;
  for (double sigma : cfg.dp_sigmas) {
    PipelineConfig p = pipeline_config(cfg);
    p.dp = DpConfig{true, cfg.dp_clip, sigma};
    const TransferRun t = run_transfer(world.source, world.target, p);
    out.lines.push_back("dp sigma=" + fmt(sigma) + " clip=" + fmt(cfg.dp_clip) +
                        " " + metric_fields(t.report.target));
  }
  out.table = render_records(out.lines);
  return out;
}

Records run_ablation(const ExperimentConfig& cfg) {
  struct Variant {
    std::string name;
    ExperimentConfig cfg;
  };
  std::vector<Variant> variants{{"full", cfg}, {"no_pt", cfg}, {"no_fat", cfg}, {"no_pap", cfg}};
  variants[1].cfg.pretrain = false;
  variants[2].cfg.fat = false;
  variants[3].cfg.pap = false;
  const World text_world = build_world(cfg);
  Records out;
  for (const auto& v : variants) {
    const World random_world = v.cfg.pretrain == cfg.pretrain ? World{} : build_world(v.cfg);
    const World& w = v.cfg.pretrain == cfg.pretrain ? text_world : random_world;
    const TransferRun t = run_transfer(w.source, w.target, pipeline_config(v.cfg));
    for (const auto* r : {&t.report.source, &t.report.target}) {
      out.lines.push_back("ablate variant=" + v.name + " " + metric_fields(*r));
    }
  }
  out.table = render_records(out.lines);
  return out;
}

Records run_theory(const ExperimentConfig& cfg) {
  SweepConfig s;
  s.l = cfg.theory_l;
  s.f = cfg.theory_f;
  s.d = cfg.theory_d;
  s.n = cfg.theory_n;
  s.taus = cfg.theory_taus;
  s.iters = cfg.theory_iters;
  s.lr = cfg.theory_lr;
  s.seed = cfg.seed;
  s.threads = cfg.threads;
  const auto rows = heterogeneity_sweep(s);
  Records out;
  for (const auto& r : rows) out.lines.push_back(format_record(r));
  out.table = format_table(rows);
  return out;
}

std::string render_records(const std::vector<std::string>& lines) {
  struct Group {
    std::vector<std::string> columns;
    std::vector<std::map<std::string, std::string>> rows;
  };
  std::vector<std::pair<std::string, Group>> groups;
  for (const auto& line : lines) {
    std::istringstream in(line);
    std::string kind, tok;
    if (!(in >> kind)) continue;
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const auto& g) { return g.first == kind; });
    if (it == groups.end()) {
      groups.push_back({kind, {}});
      it = std::prev(groups.end());
    }
    Group& g = it->second;
    std::map<std::string, std::string> row;
    while (in >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw FormatError(0, "record token without '=': " + tok);
      std::string key = tok.substr(0, eq), value = tok.substr(eq + 1);
      if (value.find('.') != std::string::npos || value.find('e') != std::string::npos) {
        char* end = nullptr;
        const double v = std::strtod(value.c_str(), &end);
        if (end && *end == '\0') {
          char buf[32];
          std::snprintf(buf, sizeof(buf), "%.4f", v);
          value = buf;
        }
      }
      if (std::find(g.columns.begin(), g.columns.end(), key) == g.columns.end()) {
        g.columns.push_back(key);
      }
      row[key] = value;
    }
    g.rows.push_back(std::move(row));
  }
  std::string out;
  for (const auto& [kind, g] : groups) {
    std::vector<std::size_t> width;
    for (const auto& c : g.columns) {
      std::size_t w = c.size();
      for (const auto& r : g.rows) {
        if (auto f = r.find(c); f != r.end()) w = std::max(w, f->second.size());
      }
      width.push_back(w);
    }
    auto cell = [](const std::string& s, std::size_t w) {
      return s + std::string(w - s.size() + 2, ' ');
    };
    out += "[" + kind + "]\n";
    for (std::size_t c = 0; c < g.columns.size(); ++c) out += cell(g.columns[c], width[c]);
    out += "\n";
    for (const auto& r : g.rows) {
      for (std::size_t c = 0; c < g.columns.size(); ++c) {
        auto f = r.find(g.columns[c]);
        out += cell(f == r.end() ? "-" : f->second, width[c]);
      }
      out += "\n";
    }
  }
  return out;
}

}  // namespace transfr
