// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

#include "transfr/client.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "transfr/errors.hpp"
#include "transfr/rng.hpp"

namespace transfr {

Matrix item_features(const FrozenEncoder& encoder,
                     const InteractionDataset& ds) {
  Matrix x(ds.num_items(), encoder.dim());
  for (std::size_t i = 0; i < ds.num_items(); ++i) {
    const Vector v = encoder.encode_item(ds.items[i]);
    std::copy(v.begin(), v.end(), x.row(i).begin());
  }
  return x;
}

std::vector<ClientState> make_clients(const InteractionDataset& train,
                                      std::size_t e, std::uint64_t seed,
                                      double init_scale) {
  std::vector<ClientState> clients;
  clients.reserve(train.num_users());
  for (std::size_t u = 0; u < train.num_users(); ++u) {
    ClientState c;
    c.user_id = train.users[u];
    const std::uint64_t key = hash_string(c.user_id);
    Rng rng(seed, "user-init", {key});
    c.p_u.resize(e);
    for (double& v : c.p_u) v = rng.normal(0.0, init_scale);
    c.positives = train.positive_items(u);
    c.num_items = train.num_items();
    c.seed = derive_seed(seed, "client", {key});
    clients.push_back(std::move(c));
  }
  return clients;
}

Batch sample_batch(const ClientState& state, std::size_t n_negatives,
                   std::uint64_t nonce) {
  Batch batch;
  for (std::size_t i : state.positives) batch.push_back({i, 1.0});
  const std::size_t want = n_negatives * state.positives.size();
  if (want > 0) {
    const auto negs = sample_excluding(state.num_items, state.positives, want,
                                       derive_seed(state.seed, "batch", {nonce}));
    for (std::size_t i : negs) batch.push_back({i, 0.0});
  }
  return batch;
}

namespace {

// Forward pass for one example, keeping what the gradient needs.
struct ExampleTrace {
  Mlp::Cache adapter_cache;
  Mlp::Cache head_cache;
  Vector q;
  double score = 0.0;
};

ExampleTrace run_example(const ClientState& state, const AdapterParams& adapter,
                         const Matrix& features, std::size_t item) {
  if (item >= features.rows()) {
    throw MissingItemError("item index " + std::to_string(item) +
                           " has no frozen features");
  }
  ExampleTrace t;
  Vector g = adapter.forward(features.row(item), t.adapter_cache);
  t.q = state.head ? state.head->forward(g, t.head_cache) : std::move(g);
  t.score = dot(state.p_u, t.q);
  return t;
}

// -[y log s(z) + (1 - y) log(1 - s(z))] = softplus(z) - y z.
double bce(double score, double label) {
  return softplus(score) - label * score;
}

}  // namespace

double local_loss(const ClientState& state, const AdapterParams& adapter,
                  const Matrix& features, std::span<const Example> batch) {
  double loss = 0.0;
  for (const auto& ex : batch) {
    loss += bce(run_example(state, adapter, features, ex.item).score, ex.label);
  }
  return loss;
}

LocalGradients local_gradients(const ClientState& state,
                               const AdapterParams& adapter,
                               const Matrix& features,
                               std::span<const Example> batch) {
  LocalGradients g;
  g.p_u.assign(state.p_u.size(), 0.0);
  g.adapter.assign(adapter.param_count(), 0.0);
  if (state.head) g.head.assign(state.head->param_count(), 0.0);
  for (const auto& ex : batch) {
    const ExampleTrace t = run_example(state, adapter, features, ex.item);
    g.loss += bce(t.score, ex.label);
    const double delta = sigmoid(t.score) - ex.label;
    Vector dq(state.p_u.size());
    for (std::size_t j = 0; j < dq.size(); ++j) {
      g.p_u[j] += delta * t.q[j];
      dq[j] = delta * state.p_u[j];
    }
    const Vector dg =
        state.head ? state.head->backward(dq, t.head_cache, g.head) : dq;
    adapter.backward(dg, t.adapter_cache, g.adapter);
  }
  return g;
}

std::string serialize_update(const ClientUpdate& update) {
  std::string out;
  auto put = [&out](std::uint64_t v) {
    for (int s = 0; s < 64; s += 8) out.push_back(static_cast<char>((v >> s) & 0xff));
  };
  put(update.samples);
  put(update.gradient.size());
  for (double v : update.gradient) put(std::bit_cast<std::uint64_t>(v));
  return out;
}

LocalRoundResult local_round(ClientState& state, const AdapterParams& adapter,
                             const Matrix& features, const LocalConfig& cfg,
                             std::uint64_t nonce) {
  const Batch batch = sample_batch(state, cfg.n_negatives, nonce);
  const LocalGradients g = local_gradients(state, adapter, features, batch);
  if (!std::isfinite(g.loss) || !all_finite(g.adapter)) {
    throw NumericError("local_round: non-finite loss or gradient for user '" +
                       state.user_id + "'");
  }
  if (cfg.eta_c > 0) {
    state.p_u = sgd_step(state.p_u, g.p_u, cfg.eta_c);
    if (cfg.train_head && state.head) state.head->step(g.head, cfg.eta_c);
  }
  LocalRoundResult r;
  r.update.gradient = g.adapter;
  r.update.samples = batch.size();
  r.loss = g.loss;
  return r;
}

FitResult fit_local(ClientState state, const AdapterParams& adapter,
                    const Matrix& features, int epochs, double eta_c,
                    std::size_t n_negatives, bool train_head,
                    std::uint64_t nonce) {
  if (epochs < 0) throw DomainError("fit_local: negative epochs");
  FitResult result;
  if (epochs == 0) {
    result.state = std::move(state);
    return result;
  }
  if (train_head && !state.head) state.head = make_identity_head(state.p_u.size());
  auto epoch_batch = [&](int epoch) {
    return sample_batch(state, n_negatives,
                        derive_seed(nonce, "fit-epoch",
                                    {static_cast<std::uint64_t>(epoch)}));
  };
  result.loss_trace.push_back(
      local_loss(state, adapter, features, epoch_batch(1)));
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    const Batch batch = epoch_batch(epoch);
    std::vector<std::size_t> order(batch.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    Rng rng(state.seed, "fit-shuffle",
            {nonce, static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (std::size_t k : order) {
      const Example one[] = {batch[k]};
      const LocalGradients g = local_gradients(state, adapter, features, one);
      for (std::size_t j = 0; j < state.p_u.size(); ++j)
        state.p_u[j] -= eta_c * g.p_u[j];
      if (train_head) state.head->step(g.head, eta_c);
    }
    const double loss = local_loss(state, adapter, features, batch);
    if (!std::isfinite(loss) || !all_finite(state.p_u)) {
      throw DivergenceError(epoch, "local fit for user '" + state.user_id + "'");
    }
    result.loss_trace.push_back(loss);
  }
  result.state = std::move(state);
  return result;
}

FitResult pap_train(ClientState state, const AdapterParams& adapter,
                    const Matrix& features, int epochs, double eta_c,
                    std::size_t n_negatives, std::uint64_t nonce) {
  return fit_local(std::move(state), adapter, features, epochs, eta_c,
                   n_negatives, /*train_head=*/true, nonce);
}

std::size_t rank_of(std::size_t heldout, std::span<const std::size_t> candidates,
                    std::span<const double> scores) {
  if (candidates.size() != scores.size()) {
    throw ShapeError("rank_of: candidates and scores differ in length");
  }
  auto it = std::find(candidates.begin(), candidates.end(), heldout);
  if (it == candidates.end()) {
    throw ProtocolError("held-out item " + std::to_string(heldout) +
                        " is not among the candidates");
  }
  const double target = scores[static_cast<std::size_t>(it - candidates.begin())];
  std::size_t rank = 1;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (candidates[k] == heldout) continue;
    if (scores[k] > target || (scores[k] == target && candidates[k] < heldout)) {
      ++rank;
    }
  }
  return rank;
}

std::size_t evaluate_client(const ClientState& state,
                            const AdapterParams& adapter,
                            const Matrix& features, std::size_t heldout,
                            std::span<const std::size_t> candidates) {
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (std::size_t c : candidates) {
    scores.push_back(run_example(state, adapter, features, c).score);
  }
  return rank_of(heldout, candidates, scores);
}

void BoundaryAudit::record(std::string_view channel, std::string payload) {
  std::lock_guard<std::mutex> lock(mu_);
  records_.push_back({std::string(channel), std::move(payload)});
}

std::vector<BoundaryAudit::Record> BoundaryAudit::records() const {
  std::lock_guard<std::mutex> lock(mu_);
  return records_;
}

}  // namespace transfr
