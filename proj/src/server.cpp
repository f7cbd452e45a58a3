// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

#include "transfr/server.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "transfr/errors.hpp"
#include "transfr/parallel.hpp"

namespace transfr {

void validate(const ServerState& state) {
  if (!(state.fraction > 0.0 && state.fraction <= 1.0)) {
    throw ConfigError("client fraction must be in (0, 1]");
  }
  if (!(state.eta_s >= 0.0)) throw ConfigError("eta_s must be >= 0");
  if (!(state.dp.sigma >= 0.0)) throw ConfigError("dp sigma must be >= 0");
  if (!(state.dp.clip > 0.0)) throw ConfigError("dp clip must be > 0");
}

std::string format_report_line(const RoundReport& r) {
  std::string ids;
  for (const auto& p : r.participants) {
    if (!ids.empty()) ids += ';';
    ids += p;
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), ",%.17g,%.17g,%d", r.mean_loss, r.grad_norm,
                r.dp_applied ? 1 : 0);
  return std::to_string(r.round) + ',' + ids + buf;
}

void write_report_header(std::ostream& out) {
  out << "round,participants,mean_loss,grad_norm,dp_applied\n";
}

std::size_t participants_for(double fraction, std::size_t n_total) {
  // The epsilon absorbs products such as 0.3 * 10 = 3.0000000000000004.
  const double raw = std::ceil(fraction * static_cast<double>(n_total) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(raw, 1.0)),
                                 1, n_total);
}

std::vector<std::size_t> sample_clients(const ServerState& state,
                                        std::size_t n_total,
                                        std::uint64_t seed) {
  if (n_total == 0) throw PreconditionError("sample_clients: no clients");
  const std::size_t k = participants_for(state.fraction, n_total);
  Rng rng(seed, "client-sampling", {state.round + 1});
  auto picked = rng.sample_without_replacement(n_total, k);
  std::sort(picked.begin(), picked.end());
  return picked;
}

ServerState aggregate_and_update(ServerState state,
                                 std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw ProtocolError("aggregate: no client updates");
  const std::size_t n = state.adapter.param_count();
  Vector mean(n, 0.0);
  for (const auto& u : updates) {
    if (u.gradient.size() != n) {
      throw ShapeError("aggregate: update of length " +
                       std::to_string(u.gradient.size()) + ", adapter has " +
                       std::to_string(n));
    }
    for (std::size_t k = 0; k < n; ++k) mean[k] += u.gradient[k];
  }
  const double inv = 1.0 / static_cast<double>(updates.size());
  for (double& v : mean) v *= inv;
  if (state.eta_s != 0.0) state.adapter.step(mean, state.eta_s);
  return state;
}

ClientUpdate apply_dp(ClientUpdate update, double clip, double sigma, Rng& rng) {
  if (!(clip > 0)) throw DomainError("apply_dp: clip must be > 0");
  if (!(sigma >= 0)) throw DomainError("apply_dp: sigma must be >= 0");
  const double norm = norm2(update.gradient);
  if (norm > clip) {
    const double s = clip / norm;
    for (double& v : update.gradient) v *= s;
  }
  if (sigma > 0) {
    for (double& v : update.gradient) v += rng.normal(0.0, sigma * clip);
  }
  return update;
}

double mi_bound_quantized(std::size_t f, std::size_t d, double c,
                          double delta_q) {
  if (!(c > 0)) throw DomainError("mi_bound_quantized: C must be > 0");
  if (!(delta_q > 0)) throw DomainError("mi_bound_quantized: delta_q must be > 0");
  if (delta_q > 2 * c) {
    throw DomainError("mi_bound_quantized: delta_q exceeds the range 2C");
  }
  return static_cast<double>(f) * static_cast<double>(d) *
         std::log2(2 * c / delta_q);
}

double mi_bound_dp(double epsilon, double delta) {
  if (!(epsilon >= 0) || !(delta >= 0)) {
    throw DomainError("mi_bound_dp: epsilon and delta must be >= 0");
  }
  return epsilon * epsilon + delta;
}

TrainingResult run_training(ServerState server,
                            std::vector<ClientState>& clients,
                            const Matrix& features, const TrainingConfig& cfg) {
  validate(server);
  if (cfg.rounds < 1) throw ConfigError("rounds must be >= 1");
  if (clients.empty()) throw PreconditionError("run_training: no clients");
  TrainingResult result;
  for (int r = 0; r < cfg.rounds; ++r) {
    const auto picked = sample_clients(server, clients.size(), server.seed);
    const std::size_t round_no = server.round + 1;
    std::vector<LocalRoundResult> local(picked.size());
    const AdapterParams& snapshot = server.adapter;
    parallel_for(picked.size(), cfg.threads, [&](std::size_t k) {
      ClientState& c = clients[picked[k]];
      local[k] = local_round(c, snapshot, features, cfg.local, round_no);
      if (server.dp.enabled) {
        Rng rng(server.seed, "dp-noise", {round_no, hash_string(c.user_id)});
        local[k].update =
            apply_dp(std::move(local[k].update), server.dp.clip,
                     server.dp.sigma, rng);
      }
    });

    RoundReport report;
    report.round = round_no;
    report.dp_applied = server.dp.enabled;
    std::vector<ClientUpdate> updates;
    updates.reserve(picked.size());
    double loss_sum = 0.0;
    for (std::size_t k = 0; k < picked.size(); ++k) {
      report.participants.push_back(clients[picked[k]].user_id);
      const auto samples = std::max<std::size_t>(local[k].update.samples, 1);
      loss_sum += local[k].loss / static_cast<double>(samples);
      if (cfg.audit) {
        cfg.audit->record("client_update", serialize_update(local[k].update));
      }
      updates.push_back(std::move(local[k].update));
    }
    report.mean_loss = loss_sum / static_cast<double>(picked.size());

    if (cfg.fat_enabled) {
      server = aggregate_and_update(std::move(server), updates);
      Vector mean(server.adapter.param_count(), 0.0);
      for (const auto& u : updates)
        for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += u.gradient[j];
      for (double& v : mean) v /= static_cast<double>(updates.size());
      report.grad_norm = norm2(mean);
    }
    server.round = round_no;
    result.reports.push_back(std::move(report));
  }
  result.server = std::move(server);
  return result;
}

}  // namespace transfr
