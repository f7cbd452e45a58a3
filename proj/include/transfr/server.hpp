// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

// Round orchestration for federated adapter tuning: client sampling,
// unweighted averaging of adapter gradients, optional per-client Gaussian
// perturbation, and the two mutual-information bound calculators.

#ifndef TRANSFR_SERVER_HPP_
#define TRANSFR_SERVER_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "transfr/client.hpp"
#include "transfr/encoder.hpp"
#include "transfr/rng.hpp"

namespace transfr {

// The symbol delta is overloaded in the literature this implements; the
// three meanings live in separate fields: quantization resolution (argument
// of mi_bound_quantized), the (epsilon, delta) privacy parameter (argument of
// mi_bound_dp) and the noise multiplier `sigma` below.
struct DpConfig {
  bool enabled = false;
  double clip = 1.0;   // C_dp, L2 clipping bound
  double sigma = 0.0;  // noise stddev as a multiple of clip
};

struct ServerState {
  AdapterParams adapter;
  std::size_t round = 0;  // rounds completed so far
  double eta_s = 1.0;
  double fraction = 1.0;  // client sampling fraction in (0, 1]
  std::uint64_t seed = 0;
  DpConfig dp;
};

// Throws ConfigError when fraction is outside (0, 1], eta_s < 0, sigma < 0 or
// clip <= 0.
void validate(const ServerState& state);

struct RoundReport {
  std::size_t round = 0;
  std::vector<std::string> participants;
  // Mean over participants of the per-example BCE on their round batch.
  double mean_loss = 0.0;
  // L2 norm of the averaged (post-DP) gradient that was applied.
  double grad_norm = 0.0;
  bool dp_applied = false;

  bool operator==(const RoundReport&) const = default;
};

// `round,participants,mean_loss,grad_norm,dp_applied` with participant ids
// joined by ';' and round-trippable floats.
std::string format_report_line(const RoundReport& r);
void write_report_header(std::ostream& out);

// ceil(fraction * n_total) distinct clients of [0, n_total), ascending,
// deterministic per (state.round + 1, seed).
std::vector<std::size_t> sample_clients(const ServerState& state,
                                        std::size_t n_total,
                                        std::uint64_t seed);

std::size_t participants_for(double fraction, std::size_t n_total);

// theta <- theta - eta_s * mean(updates). Updates are summed in the order
// given; callers pass them in ascending client order. Throws ShapeError on a
// length mismatch and ProtocolError for an empty list.
ServerState aggregate_and_update(ServerState state,
                                 std::span<const ClientUpdate> updates);

// Clip to L2 norm <= clip, then add N(0, (sigma * clip)^2) per coordinate.
ClientUpdate apply_dp(ClientUpdate update, double clip, double sigma, Rng& rng);

// f * d * log2(2C / delta_q) bits. Requires C > 0 and 0 < delta_q <= 2C.
double mi_bound_quantized(std::size_t f, std::size_t d, double c,
                          double delta_q);

// epsilon^2 + delta. Requires both >= 0.
double mi_bound_dp(double epsilon, double delta);

struct TrainingConfig {
  LocalConfig local;
  int rounds = 30;
  int threads = 1;
  // When false the adapter stays at its initialization and clients only fit
  // their user vectors.
  bool fat_enabled = true;
  BoundaryAudit* audit = nullptr;
};

struct TrainingResult {
  ServerState server;
  std::vector<RoundReport> reports;
};

// Per round: sample, run local_round on every participant in parallel,
// perturb each update when DP is enabled, aggregate in ascending client order,
// report. Results are bitwise independent of cfg.threads.
TrainingResult run_training(ServerState server,
                            std::vector<ClientState>& clients,
                            const Matrix& features, const TrainingConfig& cfg);

}  // namespace transfr

#endif  // TRANSFR_SERVER_HPP_
