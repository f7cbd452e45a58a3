// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

#include "transfr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "transfr/errors.hpp"
#include "transfr/parallel.hpp"
#include "transfr/rng.hpp"

namespace transfr {
namespace {

void check_ranks(std::span<const std::size_t> ranks) {
  if (ranks.empty()) throw ProtocolError("metric over an empty rank list");
  for (std::size_t r : ranks) {
    if (r == 0) throw DomainError("ranks are 1-based; got 0");
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fixed(double v, int prec) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

// Nonces separating the local fits of different pipeline stages.
constexpr std::uint64_t kPapNonce = 0x5041500000000001ULL;
constexpr std::uint64_t kTargetNonce = 0x5447540000000001ULL;

}  // namespace

double hit_rate_at_k(std::span<const std::size_t> ranks, std::size_t k) {
  check_ranks(ranks);
  std::size_t hits = 0;
  for (std::size_t r : ranks) hits += r <= k ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double ndcg_at_k(std::span<const std::size_t> ranks, std::size_t k) {
  check_ranks(ranks);
  double sum = 0.0;
  for (std::size_t r : ranks) {
    if (r <= k) sum += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  }
  return sum / static_cast<double>(ranks.size());
}

double transfer_delta(double source, double target) {
  if (!(source > 0)) throw DomainError("transfer_delta: source must be > 0");
  return (source - target) / source;
}

MetricReport make_report(std::span<const std::size_t> ranks, std::size_t k,
                         std::string domain_tag) {
  MetricReport r;
  r.hr = hit_rate_at_k(ranks, k);
  r.ndcg = ndcg_at_k(ranks, k);
  r.k = k;
  r.users = ranks.size();
  r.domain_tag = std::move(domain_tag);
  return r;
}

TransferReport make_transfer_report(MetricReport source, MetricReport target) {
  TransferReport t;
  t.delta_hr = transfer_delta(source.hr, target.hr);
  t.delta_ndcg = transfer_delta(source.ndcg, target.ndcg);
  t.source = std::move(source);
  t.target = std::move(target);
  return t;
}

std::string format_record(const MetricReport& r) {
  return "metric domain=" + r.domain_tag + " k=" + std::to_string(r.k) +
         " users=" + std::to_string(r.users) + " hr=" + fmt(r.hr) +
         " ndcg=" + fmt(r.ndcg);
}

std::string format_record(const TransferReport& r) {
  return format_record(r.source) + "\n" + format_record(r.target) +
         "\ndelta hr=" + fmt(r.delta_hr) + " ndcg=" + fmt(r.delta_ndcg);
}

std::string format_table(const MetricReport& r) {
  std::ostringstream out;
  out << "domain      users    HR@" << r.k << "   NDCG@" << r.k << "\n";
  char line[128];
  std::snprintf(line, sizeof(line), "%-10s %6zu  %7s  %7s\n",
                r.domain_tag.c_str(), r.users, fixed(r.hr, 4).c_str(),
                fixed(r.ndcg, 4).c_str());
  out << line;
  return out.str();
}

std::string format_table(const TransferReport& r) {
  std::ostringstream out;
  out << "           HR@" << r.source.k << "   NDCG@" << r.source.k << "\n";
  char line[128];
  std::snprintf(line, sizeof(line), "source   %7s  %7s\n",
                fixed(r.source.hr, 4).c_str(), fixed(r.source.ndcg, 4).c_str());
  out << line;
  std::snprintf(line, sizeof(line), "target   %7s  %7s\n",
                fixed(r.target.hr, 4).c_str(), fixed(r.target.ndcg, 4).c_str());
  out << line;
  std::snprintf(line, sizeof(line), "delta    %6s%%  %6s%%\n",
                fixed(100 * r.delta_hr, 2).c_str(),
                fixed(100 * r.delta_ndcg, 2).c_str());
  out << line;
  return out.str();
}

std::vector<std::vector<std::size_t>> build_candidates(
    const SplitDataset& split, std::size_t candidate_size, std::uint64_t seed) {
  SplitDataset copy;
  copy.train = split.train;
  copy.heldout = split.heldout;
  attach_candidates(copy, candidate_size, seed);
  std::vector<std::vector<std::size_t>> out(copy.candidates.size());
  for (std::size_t u = 0; u < out.size(); ++u) {
    out[u].push_back(split.heldout[u]);
    out[u].insert(out[u].end(), copy.candidates[u].begin(),
                  copy.candidates[u].end());
  }
  return out;
}

std::vector<std::size_t> rank_all(
    const std::vector<std::vector<std::size_t>>& candidates,
    const ScoreFn& score, int threads) {
  std::vector<std::size_t> ranks(candidates.size());
  parallel_for(candidates.size(), threads, [&](std::size_t u) {
    const auto& c = candidates[u];
    if (c.empty()) throw ProtocolError("empty candidate list");
    std::vector<double> s(c.size());
    for (std::size_t j = 0; j < c.size(); ++j) s[j] = score(u, c[j]);
    ranks[u] = rank_of(c[0], c, s);
  });
  return ranks;
}

MetricReport evaluate_model(const std::vector<ClientState>& clients,
                            const AdapterParams& adapter,
                            const Matrix& features, const SplitDataset& split,
                            const EvalConfig& cfg) {
  if (clients.size() != split.heldout.size()) {
    throw PreconditionError("evaluate_model: one client per split user required");
  }
  const auto cands = build_candidates(split, cfg.candidate_size, cfg.seed);
  std::vector<std::size_t> ranks(cands.size());
  parallel_for(cands.size(), cfg.threads, [&](std::size_t u) {
    ranks[u] = evaluate_client(clients[u], adapter, features, cands[u][0],
                               cands[u]);
  });
  return make_report(ranks, cfg.k, split.train.domain_tag);
}

DomainSetup make_domain(std::span<const Interaction> records,
                        std::string domain_tag, const FrozenEncoder& encoder,
                        std::uint64_t seed) {
  DomainSetup d;
  d.split = leave_one_out_split(make_dataset(records, std::move(domain_tag)),
                                seed);
  d.features = item_features(encoder, d.split.train);
  return d;
}

TrainedModel train_transfr(const DomainSetup& domain,
                           const PipelineConfig& cfg) {
  const std::size_t f = domain.features.cols();
  TrainedModel m;
  m.clients = make_clients(domain.split.train, cfg.e, cfg.seed);
  ServerState server;
  server.adapter = make_adapter(f, cfg.d, cfg.e, cfg.adapter_layers,
                                derive_seed(cfg.seed, "adapter-init"));
  server.eta_s = cfg.eta_s;
  server.fraction = cfg.fraction;
  server.seed = cfg.seed;
  server.dp = cfg.dp;
  TrainingConfig tc;
  tc.local = LocalConfig{cfg.n_negatives, cfg.eta_c, false};
  tc.rounds = cfg.rounds;
  tc.threads = cfg.threads;
  tc.fat_enabled = cfg.fat;
  auto result = run_training(std::move(server), m.clients, domain.features, tc);
  m.adapter = std::move(result.server.adapter);
  m.reports = std::move(result.reports);
  if (cfg.pap) {
    parallel_for(m.clients.size(), cfg.threads, [&](std::size_t u) {
      m.clients[u] = pap_train(std::move(m.clients[u]), m.adapter,
                               domain.features, cfg.pap_epochs, cfg.eta_c,
                               cfg.n_negatives, kPapNonce)
                         .state;
    });
  }
  return m;
}

std::vector<ClientState> adapt_clients(const std::vector<ClientState>& from,
                                       const AdapterParams& adapter,
                                       const DomainSetup& domain,
                                       const PipelineConfig& cfg) {
  std::map<std::string, const ClientState*> by_id;
  for (const auto& c : from) by_id[c.user_id] = &c;
  auto clients = make_clients(domain.split.train, cfg.e, cfg.seed);
  parallel_for(clients.size(), cfg.threads, [&](std::size_t u) {
    auto& c = clients[u];
    if (auto it = by_id.find(c.user_id); it != by_id.end()) {
      c.p_u = it->second->p_u;
      c.head = it->second->head;
    }
    c = fit_local(std::move(c), adapter, domain.features, cfg.target_epochs,
                  cfg.eta_c, cfg.n_negatives, cfg.pap, kTargetNonce)
            .state;
  });
  return clients;
}

TransferRun run_transfer(const DomainSetup& source, const DomainSetup& target,
                         const PipelineConfig& cfg) {
  TransferRun run;
  run.source_model = train_transfr(source, cfg);
  run.target_clients =
      adapt_clients(run.source_model.clients, run.source_model.adapter, target,
                    cfg);
  auto src = evaluate_model(run.source_model.clients, run.source_model.adapter,
                            source.features, source.split, cfg.eval);
  auto tgt = evaluate_model(run.target_clients, run.source_model.adapter,
                            target.features, target.split, cfg.eval);
  run.report = make_transfer_report(std::move(src), std::move(tgt));
  return run;
}

ColdSet make_cold_set(std::span<const Interaction> cold_records,
                      const std::vector<std::string>& cold_ids,
                      const FrozenEncoder& encoder) {
  ColdSet cs;
  cs.item_ids = cold_ids;
  cs.features = Matrix(cold_ids.size(), encoder.dim());
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < cold_ids.size(); ++i) {
    const Vector v = encoder.encode_item(cold_ids[i]);
    std::copy(v.begin(), v.end(), cs.features.row(i).begin());
    if (!index.emplace(cold_ids[i], i).second) {
      throw DomainError("duplicate cold item '" + cold_ids[i] + "'");
    }
  }
  for (const auto& r : cold_records) {
    auto it = index.find(r.item_id);
    if (it == index.end()) {
      throw MissingItemError("cold interaction with unknown item '" +
                             r.item_id + "'");
    }
    cs.positives.emplace_back(r.user_id, it->second);
  }
  std::sort(cs.positives.begin(), cs.positives.end());
  cs.positives.erase(std::unique(cs.positives.begin(), cs.positives.end()),
                     cs.positives.end());
  return cs;
}

MetricReport cold_start_eval(const ColdSet& cold,
                             const std::vector<std::string>& users,
                             const ScoreFn& score, const EvalConfig& cfg,
                             std::string domain_tag) {
  std::map<std::string, std::vector<std::size_t>> pos;
  for (const auto& [user, item] : cold.positives) pos[user].push_back(item);
  std::vector<std::size_t> user_index;
  std::vector<std::vector<std::size_t>> cands;
  for (std::size_t u = 0; u < users.size(); ++u) {
    auto it = pos.find(users[u]);
    if (it == pos.end()) continue;
    const auto& mine = it->second;  // ascending
    const std::size_t available = cold.item_ids.size() - mine.size();
    const std::size_t want = cfg.candidate_size == 0
                                 ? available
                                 : std::min(available, cfg.candidate_size - 1);
    auto negs = sample_excluding(
        cold.item_ids.size(), mine, want,
        derive_seed(cfg.seed, "cold-candidates", {hash_string(users[u])}));
    std::vector<std::size_t> c{mine.front()};
    c.insert(c.end(), negs.begin(), negs.end());
    user_index.push_back(u);
    cands.push_back(std::move(c));
  }
  if (cands.empty()) throw ProtocolError("cold_start_eval: no user has a cold positive");
  const auto ranks = rank_all(
      cands,
      [&](std::size_t k, std::size_t item) { return score(user_index[k], item); },
      cfg.threads);
  return make_report(ranks, cfg.k, std::move(domain_tag));
}

MetricReport cold_start_eval(const ColdSet& cold,
                             const std::vector<ClientState>& clients,
                             const AdapterParams& adapter,
                             const EvalConfig& cfg) {
  std::vector<std::string> users;
  for (const auto& c : clients) users.push_back(c.user_id);
  return cold_start_eval(
      cold, users,
      [&](std::size_t u, std::size_t item) {
        const auto& c = clients[u];
        const Vector q =
            head_forward(c.head, adapter_forward(adapter, cold.features.row(item)));
        return dot(c.p_u, q);
      },
      cfg, "cold");
}

double IdBaseline::score(std::size_t user, std::size_t item) const {
  return dot(users.at(user), items.row(item));
}

Vector cold_item_embedding(std::string_view item_id, std::size_t e,
                           std::uint64_t seed) {
  Rng rng(seed, "cold-item", {hash_string(item_id)});
  Vector v(e);
  for (double& x : v) x = rng.normal(0.0, kColdItemScale);
  return v;
}

namespace {

struct IdGradient {
  Vector user;
  Vector items;  // num_items * e, dense
  double loss = 0.0;
};

IdGradient id_gradient(const Vector& p, const Matrix& items, const Batch& batch) {
  const std::size_t e = p.size();
  IdGradient g;
  g.user.assign(e, 0.0);
  g.items.assign(items.rows() * e, 0.0);
  for (const auto& ex : batch) {
    const auto q = items.row(ex.item);
    const double s = dot(p, q);
    g.loss += softplus(s) - ex.label * s;
    const double r = sigmoid(s) - ex.label;
    for (std::size_t j = 0; j < e; ++j) {
      g.user[j] += r * q[j];
      g.items[ex.item * e + j] += r * p[j];
    }
  }
  return g;
}

Matrix cold_matrix(const std::vector<std::string>& ids, std::size_t e,
                   std::uint64_t seed) {
  Matrix m(ids.size(), e);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Vector v = cold_item_embedding(ids[i], e, seed);
    std::copy(v.begin(), v.end(), m.row(i).begin());
  }
  return m;
}

// Shuffled per-example SGD on the user embedding, negatives resampled per
// epoch as in fit_local.
void refit_user(Vector& p, const Matrix& items, const ClientState& c,
                const PipelineConfig& cfg) {
  for (int epoch = 1; epoch <= cfg.target_epochs; ++epoch) {
    const Batch batch = sample_batch(
        c, cfg.n_negatives,
        derive_seed(kTargetNonce, "fit-epoch",
                    {static_cast<std::uint64_t>(epoch)}));
    std::vector<std::size_t> order(batch.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    Rng rng(c.seed, "fit-shuffle",
            {kTargetNonce, static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (std::size_t k : order) {
      const auto q = items.row(batch[k].item);
      const double r = sigmoid(dot(p, q)) - batch[k].label;
      for (std::size_t j = 0; j < p.size(); ++j) p[j] -= cfg.eta_c * r * q[j];
    }
    if (!all_finite(p)) throw DivergenceError(epoch, "baseline user refit");
  }
}

}  // namespace

IdBaseline train_id_baseline(const InteractionDataset& train,
                             const PipelineConfig& cfg) {
  const std::size_t e = cfg.e;
  IdBaseline m;
  m.item_ids = train.items;
  m.items = cold_matrix(train.items, e, cfg.seed);
  auto clients = make_clients(train, e, cfg.seed);
  ServerState sampler;
  sampler.fraction = cfg.fraction;
  sampler.seed = cfg.seed;
  validate(sampler);
  for (int r = 0; r < cfg.rounds; ++r) {
    sampler.round = static_cast<std::size_t>(r);
    const auto picked = sample_clients(sampler, clients.size(), cfg.seed);
    std::vector<IdGradient> grads(picked.size());
    parallel_for(picked.size(), cfg.threads, [&](std::size_t k) {
      ClientState& c = clients[picked[k]];
      const Batch batch =
          sample_batch(c, cfg.n_negatives, static_cast<std::uint64_t>(r + 1));
      grads[k] = id_gradient(c.p_u, m.items, batch);
      c.p_u = sgd_step(c.p_u, grads[k].user, cfg.eta_c);
    });
    Vector mean(m.items.rows() * e, 0.0);
    for (const auto& g : grads)
      for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += g.items[j];
    const double inv = 1.0 / static_cast<double>(grads.size());
    Vector& data = m.items.data();
    for (std::size_t j = 0; j < mean.size(); ++j)
      data[j] -= cfg.baseline_eta_s * mean[j] * inv;
    if (!all_finite(data)) {
      throw DivergenceError(r + 1, "id baseline training");
    }
  }
  for (auto& c : clients) {
    m.user_ids.push_back(c.user_id);
    m.users.push_back(std::move(c.p_u));
  }
  return m;
}

IdBaseline adapt_id_baseline(const IdBaseline& from,
                             const InteractionDataset& train,
                             const PipelineConfig& cfg) {
  std::map<std::string, std::size_t> by_id;
  for (std::size_t u = 0; u < from.user_ids.size(); ++u) by_id[from.user_ids[u]] = u;
  IdBaseline m;
  m.item_ids = train.items;
  // Item ids of the new domain were never trained; all start cold.
  m.items = Matrix(train.num_items(), cfg.e);
  for (std::size_t i = 0; i < train.num_items(); ++i) {
    auto it = std::find(from.item_ids.begin(), from.item_ids.end(), train.items[i]);
    if (it != from.item_ids.end()) {
      const auto src = from.items.row(
          static_cast<std::size_t>(it - from.item_ids.begin()));
      std::copy(src.begin(), src.end(), m.items.row(i).begin());
    } else {
      const Vector v = cold_item_embedding(train.items[i], cfg.e, cfg.seed);
      std::copy(v.begin(), v.end(), m.items.row(i).begin());
    }
  }
  auto clients = make_clients(train, cfg.e, cfg.seed);
  m.users.resize(clients.size());
  parallel_for(clients.size(), cfg.threads, [&](std::size_t u) {
    const auto& c = clients[u];
    Vector p = c.p_u;
    if (auto it = by_id.find(c.user_id); it != by_id.end()) p = from.users[it->second];
    refit_user(p, m.items, c, cfg);
    m.users[u] = std::move(p);
  });
  for (const auto& c : clients) m.user_ids.push_back(c.user_id);
  return m;
}

MetricReport evaluate_id_baseline(const IdBaseline& model,
                                  const SplitDataset& split,
                                  const EvalConfig& cfg) {
  const auto cands = build_candidates(split, cfg.candidate_size, cfg.seed);
  const auto ranks = rank_all(
      cands, [&](std::size_t u, std::size_t i) { return model.score(u, i); },
      cfg.threads);
  return make_report(ranks, cfg.k, split.train.domain_tag);
}

IdTransferRun run_id_transfer(const DomainSetup& source,
                              const DomainSetup& target,
                              const PipelineConfig& cfg) {
  IdTransferRun run;
  run.source_model = train_id_baseline(source.split.train, cfg);
  run.target_model = adapt_id_baseline(run.source_model, target.split.train, cfg);
  auto src = evaluate_id_baseline(run.source_model, source.split, cfg.eval);
  auto tgt = evaluate_id_baseline(run.target_model, target.split, cfg.eval);
  run.report = make_transfer_report(std::move(src), std::move(tgt));
  return run;
}

}  // namespace transfr
