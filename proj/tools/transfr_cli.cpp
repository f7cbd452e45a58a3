// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

// transfr command-line tool. Every subcommand writes config.txt (the
// effective configuration), records.txt and table.txt into --out.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "transfr/config.hpp"
#include "transfr/errors.hpp"
#include "transfr/experiment.hpp"
#include "transfr/synth.hpp"

namespace fs = std::filesystem;
using namespace transfr;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct Options {
  std::string config;
  std::string out = "transfr-out";
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  std::optional<int> rounds;
  bool disable_pt = false;
  bool disable_fat = false;
  bool disable_pap = false;
  std::vector<std::string> report_inputs;
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

void write_records(const fs::path& dir, const Records& r) {
  std::string text;
  for (const auto& line : r.lines) text += line + "\n";
  write_file(dir / "records.txt", text);
  write_file(dir / "table.txt", r.table);
  std::cout << r.table;
}

std::string split_manifest(const SplitDataset& s) {
  std::string text = "user\theldout\ttrain_positives\n";
  for (std::size_t u = 0; u < s.train.num_users(); ++u) {
    text += s.train.users[u] + "\t" + s.train.items[s.heldout[u]] + "\t" +
            std::to_string(s.train.positives[u].size()) + "\n";
  }
  return text;
}

std::string interactions_text(const std::vector<Interaction>& records) {
  std::ostringstream out;
  write_interactions(out, records);
  return out.str();
}

std::string ingest_line(const DomainSetup& d) {
  const auto& t = d.split.train;
  return "ingest domain=" + t.domain_tag + " users=" + std::to_string(t.num_users()) +
         " items=" + std::to_string(t.num_items()) +
         " interactions=" + std::to_string(t.num_interactions() + d.split.heldout.size());
}

Records run_ingest(const ExperimentConfig& cfg, const fs::path& dir) {
  if (cfg.source.empty()) {
    const SyntheticCorpus c = make_synthetic_corpus(synthetic_config(cfg));
    write_file(dir / "source.tsv", interactions_text(c.source));
    write_file(dir / "target.tsv", interactions_text(c.target));
    write_file(dir / "cold.tsv", interactions_text(c.target_cold));
    std::string texts;
    for (const auto& [id, title] : c.titles) texts += id + "\t" + title + "\n";
    write_file(dir / "texts.tsv", texts);
  }
  const World w = build_world(cfg);
  write_file(dir / "split_source.tsv", split_manifest(w.source.split));
  write_file(dir / "split_target.tsv", split_manifest(w.target.split));
  Records r;
  r.lines = {ingest_line(w.source), ingest_line(w.target)};
  if (w.cold) {
    r.lines.push_back("ingest domain=cold items=" + std::to_string(w.cold->item_ids.size()) +
                      " interactions=" + std::to_string(w.cold->positives.size()));
  }
  r.table = render_records(r.lines);
  return r;
}

Records run_distill_command(const ExperimentConfig& cfg, const fs::path& dir) {
  const DistillTask task = make_distill_task(cfg);
  const DistillResult res = run_distill(task, cfg);
  store_transformer(res.student, dir / "student.txt");
  std::string trace = "epoch,loss\n";
  char buf[64];
  for (std::size_t e = 0; e < res.loss_trace.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", e, res.loss_trace[e]);
    trace += buf;
  }
  write_file(dir / "loss.csv", trace);
  const double first = res.loss_trace.front(), last = res.loss_trace.back();
  std::snprintf(buf, sizeof(buf), "%.17g", first);
  std::string line = std::string("distill initial=") + buf;
  std::snprintf(buf, sizeof(buf), "%.17g", last);
  line += std::string(" final=") + buf;
  std::snprintf(buf, sizeof(buf), "%.17g", first > 0 ? last / first : 0.0);
  line += std::string(" ratio=") + buf;
  Records r;
  r.lines = {line};
  r.table = render_records(r.lines);
  return r;
}

Records run_train_command(const ExperimentConfig& cfg, const fs::path& dir) {
  TrainOutput t = run_train_experiment(build_world(cfg), cfg);
  store_mlp(t.adapter, dir / "adapter.txt");
  std::ostringstream rounds;
  write_report_header(rounds);
  for (const auto& rep : t.rounds) rounds << format_report_line(rep) << "\n";
  write_file(dir / "rounds.csv", rounds.str());
  return std::move(t.records);
}

Records run_report(const std::vector<std::string>& inputs) {
  Records r;
  for (const auto& in : inputs) {
    fs::path p = in;
    if (fs::is_directory(p)) p /= "records.txt";
    std::ifstream f(p);
    if (!f) throw ConfigError("cannot read records file " + p.string());
    std::string line;
    while (std::getline(f, line)) {
      if (!line.empty()) r.lines.push_back(line);
    }
  }
  r.table = render_records(r.lines);
  return r;
}

ExperimentConfig effective_config(const Options& o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : read_config(o.config);
  if (o.threads) cfg.threads = *o.threads;
  if (o.seed) cfg.seed = *o.seed;
  if (o.rounds) cfg.rounds = *o.rounds;
  if (o.disable_pt) cfg.pretrain = false;
  if (o.disable_fat) cfg.fat = false;
  if (o.disable_pap) cfg.pap = false;
  validate(cfg);
  return cfg;
}

int dispatch(const std::string& command, const Options& o) {
  const ExperimentConfig cfg = effective_config(o);
  const fs::path dir = o.out;
  fs::create_directories(dir);
  Records r;
  if (command == "report") {
    r = run_report(o.report_inputs);
    write_file(dir / "table.txt", r.table);
    std::cout << r.table;
    return 0;
  }
  write_file(dir / "config.txt", serialize_config(cfg));
  if (command == "ingest") {
    r = run_ingest(cfg, dir);
  } else if (command == "distill") {
    r = run_distill_command(cfg, dir);
  } else if (command == "train") {
    r = run_train_command(cfg, dir);
  } else if (command == "transfer") {
    r = run_transfer_experiment(build_world(cfg), cfg);
  } else if (command == "coldstart") {
    r = run_coldstart_experiment(build_world(cfg), cfg);
  } else if (command == "dp-sweep") {
    r = run_dp_sweep(build_world(cfg), cfg);
  } else if (command == "ablate") {
    r = run_ablation(cfg);
  } else {
    r = run_theory(cfg);
  }
  write_records(dir, r);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated transferable recommendation experiments"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config, "key = value configuration file");
  app.add_option("--out", o.out, "output directory")->capture_default_str();
  app.add_option("--threads", o.threads, "worker threads (results do not depend on it)");
  app.add_option("--seed", o.seed, "root seed");
  app.add_option("--rounds", o.rounds, "federated rounds");
  app.add_flag("--disable-pt", o.disable_pt, "random item vectors instead of text encodings");
  app.add_flag("--disable-fat", o.disable_fat, "skip server aggregation");
  app.add_flag("--disable-pap", o.disable_pap, "skip head personalization");
  app.fallthrough();

  const std::vector<std::pair<std::string, std::string>> commands{
      {"ingest", "parse, filter and split the interaction data"},
      {"distill", "toy teacher-to-student distillation"},
      {"train", "federated training on the source domain"},
      {"transfer", "source-to-target transfer against the ID baseline"},
      {"coldstart", "ranking of items never seen in training"},
      {"dp-sweep", "target-domain accuracy over the DP noise list"},
      {"ablate", "w/o PT, w/o FAT and w/o PAP variants"},
      {"theory", "personalized versus shared adapter sweep"},
      {"report", "render stored records as tables"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    if (name == "report") {
      sub->add_option("records", o.report_inputs, "records files or output directories")
          ->required();
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return dispatch(command, o);
  } catch (const ConfigError& e) {
    std::cerr << "transfr: config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "transfr: " << command << ": " << e.what() << "\n";
    return kExitRuntime;
  }
}
