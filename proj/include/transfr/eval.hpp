// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

// Leave-one-out ranking metrics, the cross-domain transfer protocol, cold-start
// evaluation and the federated ID-embedding baseline.

#ifndef TRANSFR_EVAL_HPP_
#define TRANSFR_EVAL_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "transfr/client.hpp"
#include "transfr/data.hpp"
#include "transfr/server.hpp"

namespace transfr {

// Fraction of ranks <= k. Throws ProtocolError on an empty list and
// DomainError on a rank of 0.
double hit_rate_at_k(std::span<const std::size_t> ranks, std::size_t k);

// Mean of 1/log2(rank + 1) over ranks <= k (0 otherwise).
double ndcg_at_k(std::span<const std::size_t> ranks, std::size_t k);

// (source - target) / source. Throws DomainError when source <= 0.
double transfer_delta(double source, double target);

struct MetricReport {
  double hr = 0.0;
  double ndcg = 0.0;
  std::size_t k = 10;
  std::size_t users = 0;
  std::string domain_tag;

  bool operator==(const MetricReport&) const = default;
};

struct TransferReport {
  MetricReport source;
  MetricReport target;
  double delta_hr = 0.0;
  double delta_ndcg = 0.0;

  bool operator==(const TransferReport&) const = default;
};

MetricReport make_report(std::span<const std::size_t> ranks, std::size_t k,
                         std::string domain_tag);
TransferReport make_transfer_report(MetricReport source, MetricReport target);

// `metric domain=<tag> k=<k> users=<n> hr=<v> ndcg=<v>`, round-trippable.
std::string format_record(const MetricReport& r);
// Two metric records followed by `delta hr=<v> ndcg=<v>`.
std::string format_record(const TransferReport& r);
std::string format_table(const MetricReport& r);
std::string format_table(const TransferReport& r);

struct EvalConfig {
  std::size_t k = 10;
  // Held-out item plus candidate_size - 1 sampled non-positives; 0 ranks
  // against every non-positive item.
  std::size_t candidate_size = 100;
  std::uint64_t seed = 0;
  int threads = 1;
};

// Per-user candidate lists with the held-out item first.
std::vector<std::vector<std::size_t>> build_candidates(
    const SplitDataset& split, std::size_t candidate_size, std::uint64_t seed);

// Scores (user index, item index). Must be safe to call concurrently.
using ScoreFn = std::function<double(std::size_t, std::size_t)>;

// Rank of each user's held-out item (candidates[u][0]) under `score`.
std::vector<std::size_t> rank_all(
    const std::vector<std::vector<std::size_t>>& candidates,
    const ScoreFn& score, int threads);

// clients[u] must belong to split user u.
MetricReport evaluate_model(const std::vector<ClientState>& clients,
                            const AdapterParams& adapter,
                            const Matrix& features, const SplitDataset& split,
                            const EvalConfig& cfg);

// One domain ready for training: split plus frozen features per item index.
struct DomainSetup {
  SplitDataset split;
  Matrix features;
};

// Builds the dataset, holds out one positive per user and encodes every item.
DomainSetup make_domain(std::span<const Interaction> records,
                        std::string domain_tag, const FrozenEncoder& encoder,
                        std::uint64_t seed);

struct PipelineConfig {
  std::size_t e = 8;
  std::size_t d = 4;
  std::size_t adapter_layers = 2;
  double eta_c = 0.05;
  double eta_s = 1.0;
  std::size_t n_negatives = 4;
  int rounds = 40;
  double fraction = 0.5;
  bool fat = true;
  bool pap = false;
  int pap_epochs = 6;
  // Local epochs each user spends fitting to the target domain.
  int target_epochs = 6;
  // Server step for the ID baseline's item table. Each item row receives
  // gradient from few clients, so it needs a larger step than the adapter.
  double baseline_eta_s = 1.0;
  DpConfig dp;
  EvalConfig eval;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct TrainedModel {
  AdapterParams adapter;
  std::vector<ClientState> clients;
  std::vector<RoundReport> reports;
};

// Federated adapter tuning on one domain, then PAP when enabled.
TrainedModel train_transfr(const DomainSetup& domain, const PipelineConfig& cfg);

// Clients of `domain` whose user vectors (and heads) are carried over from
// `from` by user id and refit locally for cfg.target_epochs with the adapter
// frozen. The head is trained only when cfg.pap.
std::vector<ClientState> adapt_clients(const std::vector<ClientState>& from,
                                       const AdapterParams& adapter,
                                       const DomainSetup& domain,
                                       const PipelineConfig& cfg);

struct TransferRun {
  TransferReport report;
  TrainedModel source_model;
  std::vector<ClientState> target_clients;
};

// Train on source, freeze encoder and adapter, refit user-side parameters on
// the target, evaluate both domains.
TransferRun run_transfer(const DomainSetup& source, const DomainSetup& target,
                         const PipelineConfig& cfg);

// Items that appear in no training interaction. `positives` holds each
// evaluated user's interactions with them as (user id, cold item index).
struct ColdSet {
  Matrix features;  // one row per cold item
  std::vector<std::string> item_ids;
  std::vector<std::pair<std::string, std::size_t>> positives;
};

// Throws MissingItemError when the encoder cannot represent a cold item.
ColdSet make_cold_set(std::span<const Interaction> cold_records,
                      const std::vector<std::string>& cold_ids,
                      const FrozenEncoder& encoder);

// Per user with cold positives: hold out the first, rank it against
// candidate_size - 1 cold non-positives (all of them when 0 or when fewer
// remain). `score(user index, cold item index)`; user indices follow `users`.
MetricReport cold_start_eval(const ColdSet& cold,
                             const std::vector<std::string>& users,
                             const ScoreFn& score, const EvalConfig& cfg,
                             std::string domain_tag);

MetricReport cold_start_eval(const ColdSet& cold,
                             const std::vector<ClientState>& clients,
                             const AdapterParams& adapter,
                             const EvalConfig& cfg);

// Federated matrix factorization with free item embeddings aggregated on the
// server and user embeddings kept on clients.
struct IdBaseline {
  std::vector<std::string> item_ids;
  Matrix items;  // one row per item
  std::vector<std::string> user_ids;
  std::vector<Vector> users;

  double score(std::size_t user, std::size_t item) const;
};

IdBaseline train_id_baseline(const InteractionDataset& train,
                             const PipelineConfig& cfg);

// Scale of the seeded default embedding given to items the baseline never saw.
inline constexpr double kColdItemScale = 0.1;
Vector cold_item_embedding(std::string_view item_id, std::size_t e,
                           std::uint64_t seed);

// Carries user embeddings by id into `train` (a new domain), gives every item
// its cold default, then refits only the user embeddings for
// cfg.target_epochs.
IdBaseline adapt_id_baseline(const IdBaseline& from,
                             const InteractionDataset& train,
                             const PipelineConfig& cfg);

MetricReport evaluate_id_baseline(const IdBaseline& model,
                                  const SplitDataset& split,
                                  const EvalConfig& cfg);

struct IdTransferRun {
  TransferReport report;
  IdBaseline source_model;
  IdBaseline target_model;
};

IdTransferRun run_id_transfer(const DomainSetup& source,
                              const DomainSetup& target,
                              const PipelineConfig& cfg);

}  // namespace transfr

#endif  // TRANSFR_EVAL_HPP_
