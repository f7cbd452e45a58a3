// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

// One simulated federated client. The client owns its user vector, its
// optional personalization head and its interactions; the only thing it
// hands to the server is the adapter gradient wrapped in a ClientUpdate.

#ifndef TRANSFR_CLIENT_HPP_
#define TRANSFR_CLIENT_HPP_

#include <cstddef>
#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "transfr/data.hpp"
#include "transfr/encoder.hpp"
#include "transfr/numerics.hpp"

namespace transfr {

// Frozen encoder outputs, one row per item index of a dataset.
Matrix item_features(const FrozenEncoder& encoder,
                     const InteractionDataset& ds);

struct ClientState {
  std::string user_id;
  Vector p_u;
  // nullopt means the head is the identity (personalization off).
  std::optional<HeadParams> head;
  std::vector<std::size_t> positives;  // ascending item indices
  std::size_t num_items = 0;
  std::uint64_t seed = 0;
};

// One client per user of `train`, with p_u drawn from a stream keyed by the
// user id.
std::vector<ClientState> make_clients(const InteractionDataset& train,
                                      std::size_t e, std::uint64_t seed,
                                      double init_scale = 0.1);

struct Example {
  std::size_t item = 0;
  double label = 0.0;
};
using Batch = std::vector<Example>;

// All positives, followed by n_negatives * |positives| distinct non-positive
// items drawn uniformly for this nonce.
Batch sample_batch(const ClientState& state, std::size_t n_negatives,
                   std::uint64_t nonce);

// Summed binary cross-entropy of the batch.
double local_loss(const ClientState& state, const AdapterParams& adapter,
                  const Matrix& features, std::span<const Example> batch);

struct LocalGradients {
  double loss = 0.0;
  Vector p_u;
  Vector adapter;
  Vector head;  // empty when the client has no head
};

// Closed-form gradients of the summed BCE. The backbone has no trainable
// parameters here, so its gradient is identically zero and never formed.
LocalGradients local_gradients(const ClientState& state,
                               const AdapterParams& adapter,
                               const Matrix& features,
                               std::span<const Example> batch);

struct ClientUpdate {
  Vector gradient;  // flattened adapter gradient
  std::size_t samples = 0;
};

// Byte image of an update as it would travel to the server.
std::string serialize_update(const ClientUpdate& update);

struct LocalConfig {
  std::size_t n_negatives = 4;
  double eta_c = 0.05;
  // Co-train the head during adapter tuning; off by default.
  bool train_head = false;
};

struct LocalRoundResult {
  ClientUpdate update;
  // Pre-update summed loss on the round's batch. Simulation diagnostic only;
  // it feeds RoundReport and is not part of the upload.
  double loss = 0.0;
};

// Samples the round's batch, computes gradients at the current state, takes
// one SGD step on p_u (and the head when cfg.train_head) and returns the
// adapter gradient. eta_c == 0 leaves the state untouched.
LocalRoundResult local_round(ClientState& state, const AdapterParams& adapter,
                             const Matrix& features, const LocalConfig& cfg,
                             std::uint64_t nonce);

struct FitResult {
  ClientState state;
  // Entry 0: summed loss on epoch 1's batch before training. Entry k: summed
  // loss on epoch k's batch after epoch k.
  std::vector<double> loss_trace;
};

// `epochs` shuffled per-example SGD passes, each over all positives and a
// freshly sampled set of negatives, updating p_u and, when train_head, the
// head (created as the identity if absent). The adapter is read-only. Throws
// DivergenceError naming the epoch.
FitResult fit_local(ClientState state, const AdapterParams& adapter,
                    const Matrix& features, int epochs, double eta_c,
                    std::size_t n_negatives, bool train_head,
                    std::uint64_t nonce);

// Post-adaptation personalization: fit_local with the head enabled. Nothing
// leaves the client.
FitResult pap_train(ClientState state, const AdapterParams& adapter,
                    const Matrix& features, int epochs, double eta_c,
                    std::size_t n_negatives = 4, std::uint64_t nonce = 0);

// 1-based rank of `heldout` within `candidates` (scores aligned with it) by
// descending score, ties broken by ascending item index. Throws ProtocolError
// when heldout is not among the candidates.
std::size_t rank_of(std::size_t heldout, std::span<const std::size_t> candidates,
                    std::span<const double> scores);

// Scores every candidate with the full pipeline and ranks the held-out item.
// `candidates` must contain `heldout`.
std::size_t evaluate_client(const ClientState& state,
                            const AdapterParams& adapter,
                            const Matrix& features, std::size_t heldout,
                            std::span<const std::size_t> candidates);

// Records every payload that crosses the client boundary.
class BoundaryAudit {
 public:
  struct Record {
    std::string channel;
    std::string payload;
  };

  void record(std::string_view channel, std::string payload);
  std::vector<Record> records() const;

 private:
  mutable std::mutex mu_;
  std::vector<Record> records_;
};

}  // namespace transfr

#endif  // TRANSFR_CLIENT_HPP_
