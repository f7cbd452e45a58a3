// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <set>
#include <sstream>

#include "transfr/client.hpp"
#include "transfr/errors.hpp"
#include "transfr/rng.hpp"
#include "transfr/server.hpp"

namespace transfr {
namespace {

ClientState client(std::vector<std::size_t> positives, std::size_t items, std::size_t e = 3) {
  ClientState c;
  c.user_id = "alice";
  c.p_u.assign(e, 0.2);
  c.positives = std::move(positives);
  c.num_items = items;
  c.seed = 77;
  return c;
}

Matrix random_features(std::size_t items, std::size_t f, std::uint64_t seed) {
  Rng rng(seed, "features");
  Matrix x(items, f);
  for (auto& v : x.data()) v = rng.normal();
  return x;
}

TEST(SampleBatchTest, PositivesFirstThenDisjointNegatives) {
  const ClientState c = client({1, 4, 6}, 12);
  const Batch b = sample_batch(c, 2, 5);
  ASSERT_EQ(b.size(), 9u);
  std::set<std::size_t> negs;
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(b[k].item, c.positives[k]);
    EXPECT_EQ(b[k].label, 1.0);
  }
  for (std::size_t k = 3; k < 9; ++k) {
    EXPECT_EQ(b[k].label, 0.0);
    EXPECT_FALSE(std::binary_search(c.positives.begin(), c.positives.end(), b[k].item));
    negs.insert(b[k].item);
  }
  EXPECT_EQ(negs.size(), 6u);
  EXPECT_EQ(sample_batch(c, 2, 5).size(), b.size());
  for (std::size_t k = 0; k < b.size(); ++k) EXPECT_EQ(sample_batch(c, 2, 5)[k].item, b[k].item);
}

TEST(SampleBatchTest, TooFewItemsThrows) {
  EXPECT_THROW(sample_batch(client({0, 1}, 4), 2, 0), InsufficientCandidatesError);
}

TEST(LocalLossTest, ZeroUserVectorGivesLogTwoPerExample) {
  ClientState c = client({0}, 5);
  c.p_u.assign(3, 0.0);
  const AdapterParams a = make_adapter(4, 2, 3, 2, 1);
  const Batch b = sample_batch(c, 3, 0);
  EXPECT_NEAR(local_loss(c, a, random_features(5, 4, 1), b), 4 * std::log(2.0), 1e-12);
}

TEST(LocalLossTest, MatchesBceOfPredict) {
  ClientState c = client({2, 3}, 8);
  const AdapterParams a = make_adapter(4, 2, 3, 2, 9);
  const Matrix x = random_features(8, 4, 2);
  const Batch b = sample_batch(c, 1, 0);
  double expect = 0;
  for (const auto& ex : b) {
    const double p = predict(c.p_u, adapter_forward(a, x.row(ex.item)));
    expect -= ex.label * std::log(p) + (1 - ex.label) * std::log(1 - p);
  }
  EXPECT_NEAR(local_loss(c, a, x, b), expect, 1e-10);
}

TEST(LocalLossTest, UnknownItemThrows) {
  const ClientState c = client({0}, 5);
  const Example ex[] = {{9, 1.0}};
  EXPECT_THROW(local_loss(c, make_adapter(4, 2, 3, 1, 1), random_features(5, 4, 1), ex),
               MissingItemError);
}

TEST(LocalGradientsTest, LossFieldMatchesLocalLossAndHeadIsSized) {
  ClientState c = client({1}, 6);
  c.head = make_identity_head(3);
  const AdapterParams a = make_adapter(4, 2, 3, 2, 3);
  const Matrix x = random_features(6, 4, 3);
  const Batch b = sample_batch(c, 2, 1);
  const LocalGradients g = local_gradients(c, a, x, b);
  EXPECT_NEAR(g.loss, local_loss(c, a, x, b), 1e-12);
  EXPECT_EQ(g.adapter.size(), a.param_count());
  EXPECT_EQ(g.head.size(), c.head->param_count());
  EXPECT_EQ(g.p_u.size(), 3u);
}

TEST(FitLocalTest, ZeroEpochsIsNoOp) {
  const ClientState c = client({1, 2}, 10);
  const FitResult r = fit_local(c, make_adapter(4, 2, 3, 1, 1), random_features(10, 4, 4), 0, 0.1, 2,
                                false, 0);
  EXPECT_EQ(r.state.p_u, c.p_u);
  EXPECT_TRUE(r.loss_trace.empty());
  EXPECT_THROW(fit_local(c, make_adapter(4, 2, 3, 1, 1), random_features(10, 4, 4), -1, 0.1, 2, false, 0),
               DomainError);
}

TEST(FitLocalTest, LossDropsAndAdapterUntouched) {
  const ClientState c = client({1, 2, 5}, 20);
  const AdapterParams a = make_adapter(4, 2, 3, 2, 5);
  const AdapterParams before = a;
  const FitResult r = fit_local(c, a, random_features(20, 4, 5), 30, 0.1, 1, false, 3);
  ASSERT_EQ(r.loss_trace.size(), 31u);
  EXPECT_LT(r.loss_trace.back(), r.loss_trace.front());
  EXPECT_EQ(a, before);
  EXPECT_FALSE(r.state.head.has_value());
}

TEST(PapTrainTest, AddsIdentityHeadAndTrainsIt) {
  const ClientState c = client({1, 2, 5}, 20);
  const AdapterParams a = make_adapter(4, 2, 3, 2, 6);
  const FitResult r = pap_train(c, a, random_features(20, 4, 6), 5, 0.1, 1, 0);
  ASSERT_TRUE(r.state.head.has_value());
  EXPECT_NE(*r.state.head, make_identity_head(3));
  EXPECT_EQ(r.loss_trace.size(), 6u);
}

TEST(RankOfTest, StrictlyHigherAndTiesOnSmallerIdsCount) {
  const std::vector<std::size_t> cand{7, 3, 9, 1};
  EXPECT_EQ(rank_of(9, cand, std::vector<double>{0.1, 0.2, 0.9, 0.3}), 1u);
  EXPECT_EQ(rank_of(7, cand, std::vector<double>{0.1, 0.2, 0.9, 0.3}), 4u);
  // All tied: rank is one plus the number of smaller ids.
  EXPECT_EQ(rank_of(7, cand, std::vector<double>(4, 0.5)), 3u);
  EXPECT_EQ(rank_of(1, cand, std::vector<double>(4, 0.5)), 1u);
  EXPECT_THROW(rank_of(5, cand, std::vector<double>(4, 0.5)), ProtocolError);
  EXPECT_THROW(rank_of(7, cand, std::vector<double>(3, 0.5)), ShapeError);
}

TEST(SerializeUpdateTest, LayoutIsCountsThenDoubles) {
  const ClientUpdate u{{1.5, -2.0}, 6};
  const std::string s = serialize_update(u);
  ASSERT_EQ(s.size(), 32u);
  std::uint64_t samples = 0, len = 0, bits = 0;
  std::memcpy(&samples, s.data(), 8);
  std::memcpy(&len, s.data() + 8, 8);
  std::memcpy(&bits, s.data() + 24, 8);
  EXPECT_EQ(samples, 6u);
  EXPECT_EQ(len, 2u);
  EXPECT_EQ(std::bit_cast<double>(bits), -2.0);
}

struct Federation {
  std::vector<ClientState> clients;
  Matrix features;
  ServerState server;
};

Federation federation(std::uint64_t seed) {
  Federation f;
  const std::size_t items = 30;
  f.features = random_features(items, 6, seed);
  Rng rng(seed, "positives");
  for (int u = 0; u < 10; ++u) {
    ClientState c;
    c.user_id = "user" + std::to_string(u);
    c.p_u.resize(4);
    for (auto& v : c.p_u) v = rng.normal(0.0, 0.1);
    auto pos = rng.sample_without_replacement(items, 3);
    std::sort(pos.begin(), pos.end());
    c.positives = pos;
    c.num_items = items;
    c.seed = derive_seed(seed, "client", {static_cast<std::uint64_t>(u)});
    f.clients.push_back(c);
  }
  f.server.adapter = make_adapter(6, 3, 4, 2, seed);
  f.server.eta_s = 0.05;
  f.server.fraction = 0.5;
  f.server.seed = seed;
  return f;
}

TEST(SampleClientsTest, FullFractionSelectsEveryoneAscending) {
  ServerState s;
  s.fraction = 1.0;
  const auto all = sample_clients(s, 7, 3);
  EXPECT_EQ(all, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6}));
  EXPECT_THROW(sample_clients(s, 0, 3), PreconditionError);
}

TEST(SampleClientsTest, SingleDrawIsUniform) {
  ServerState s;
  s.fraction = 0.1;
  std::vector<int> hits(10, 0);
  constexpr int kTrials = 10000;
  for (int t = 0; t < kTrials; ++t) {
    const auto p = sample_clients(s, 10, t);
    ASSERT_EQ(p.size(), 1u);
    ++hits[p[0]];
  }
  for (int h : hits) EXPECT_NEAR(h / static_cast<double>(kTrials), 0.1, 0.02);
}

TEST(SampleClientsTest, ParticipantCountRoundsUp) {
  EXPECT_EQ(participants_for(0.3, 10), 3u);
  EXPECT_EQ(participants_for(0.25, 10), 3u);
  EXPECT_EQ(participants_for(0.001, 10), 1u);
  EXPECT_EQ(participants_for(1.0, 10), 10u);
}

TEST(AggregateTest, AppliesMeanGradientStep) {
  ServerState s;
  s.adapter = Mlp::zeros(std::vector<std::size_t>{1, 1});
  s.eta_s = 0.5;
  const std::vector<ClientUpdate> ups{{{2.0, 4.0}, 1}, {{4.0, 0.0}, 9}};
  const ServerState out = aggregate_and_update(s, ups);
  EXPECT_EQ(out.adapter.flatten(), (Vector{-1.5, -1.0}));
  EXPECT_THROW(aggregate_and_update(s, std::span<const ClientUpdate>{}), ProtocolError);
  const std::vector<ClientUpdate> bad{{{1.0}, 1}};
  EXPECT_THROW(aggregate_and_update(s, bad), ShapeError);
}

TEST(AggregateTest, OrderOfUpdatesDoesNotMatter) {
  Federation f = federation(2);
  Rng rng(2, "agg");
  std::vector<ClientUpdate> ups(5);
  for (auto& u : ups) {
    u.gradient.resize(f.server.adapter.param_count());
    for (auto& v : u.gradient) v = std::round(rng.normal() * 64) / 64;
  }
  const auto a = aggregate_and_update(f.server, ups).adapter;
  std::reverse(ups.begin(), ups.end());
  EXPECT_EQ(aggregate_and_update(f.server, ups).adapter, a);
}

TEST(ApplyDpTest, ZeroNoiseInsideClipIsIdentity) {
  Rng rng(1);
  const ClientUpdate u{{0.3, -0.4}, 2};
  EXPECT_EQ(apply_dp(u, 1.0, 0.0, rng).gradient, u.gradient);
}

TEST(ApplyDpTest, ClipsToExactBound) {
  Rng rng(1);
  const ClientUpdate u{{6.0, 8.0}, 2};  // norm 10 = 2 C
  const ClientUpdate out = apply_dp(u, 5.0, 0.0, rng);
  EXPECT_DOUBLE_EQ(norm2(out.gradient), 5.0);
  EXPECT_DOUBLE_EQ(out.gradient[0], 3.0);
}

TEST(ApplyDpTest, ClippingNeverIncreasesNorm) {
  Rng rng(9, "clip");
  for (int t = 0; t < 200; ++t) {
    ClientUpdate u{Vector(5), 1};
    for (auto& v : u.gradient) v = rng.normal(0.0, 3.0);
    const double c = 0.1 + rng.uniform() * 5;
    const double before = norm2(u.gradient);
    const double after = norm2(apply_dp(u, c, 0.0, rng).gradient);
    EXPECT_LE(after, before + 1e-12);
    EXPECT_LE(after, c + 1e-12);
  }
}

TEST(ApplyDpTest, NoiseStdIsSigmaTimesClip) {
  Rng rng(5, "dp-std");
  const double clip = 2.0;
  constexpr int kDraws = 10000;
  double sum = 0, sq = 0;
  for (int t = 0; t < kDraws; ++t) {
    const ClientUpdate out = apply_dp({{0.5, -0.5}, 1}, clip, 0.1, rng);
    const double x = out.gradient[0] - 0.5;
    sum += x;
    sq += x * x;
  }
  const double mean = sum / kDraws;
  const double sd = std::sqrt(sq / kDraws - mean * mean);
  EXPECT_NEAR(sd, 0.1 * clip, 0.05 * 0.1 * clip);
}

TEST(ApplyDpTest, RejectsBadParameters) {
  Rng rng(1);
  EXPECT_THROW(apply_dp({{1.0}, 1}, 0.0, 0.1, rng), DomainError);
  EXPECT_THROW(apply_dp({{1.0}, 1}, 1.0, -0.1, rng), DomainError);
}

TEST(MiBoundTest, SpotValues) {
  EXPECT_EQ(mi_bound_quantized(16, 4, 1.0, 0.5), 128.0);
  EXPECT_EQ(mi_bound_quantized(1, 1, 1.0, 2.0), 0.0);
  EXPECT_NEAR(mi_bound_dp(0.1, 0.01), 0.02, 1e-15);
  EXPECT_EQ(mi_bound_dp(0.0, 0.0), 0.0);
  EXPECT_THROW(mi_bound_quantized(1, 1, 0.0, 0.5), DomainError);
  EXPECT_THROW(mi_bound_quantized(1, 1, 1.0, 0.0), DomainError);
  EXPECT_THROW(mi_bound_quantized(1, 1, 1.0, 3.0), DomainError);
  EXPECT_THROW(mi_bound_dp(-0.1, 0.0), DomainError);
}

TEST(ServerValidateTest, RejectsOutOfRangeFields) {
  ServerState s;
  EXPECT_NO_THROW(validate(s));
  s.fraction = 0.0;
  EXPECT_THROW(validate(s), ConfigError);
  s.fraction = 1.5;
  EXPECT_THROW(validate(s), ConfigError);
  s = ServerState{};
  s.eta_s = -1;
  EXPECT_THROW(validate(s), ConfigError);
  s = ServerState{};
  s.dp.sigma = -0.5;
  EXPECT_THROW(validate(s), ConfigError);
}

TEST(RoundReportTest, LineFormat) {
  RoundReport r;
  r.round = 3;
  r.participants = {"u1", "u7"};
  r.mean_loss = 0.5;
  r.grad_norm = 2;
  r.dp_applied = true;
  EXPECT_EQ(format_report_line(r), "3,u1;u7,0.5,2,1");
  std::ostringstream os;
  write_report_header(os);
  EXPECT_EQ(os.str(), "round,participants,mean_loss,grad_norm,dp_applied\n");
}

TEST(RunTrainingTest, ThreadCountDoesNotChangeResult) {
  Federation a = federation(4), b = federation(4);
  TrainingConfig cfg;
  cfg.rounds = 8;
  cfg.local.n_negatives = 2;
  a.server.dp = {true, 1.0, 0.1};
  b.server.dp = a.server.dp;
  const TrainingResult ra = run_training(a.server, a.clients, a.features, cfg);
  cfg.threads = 4;
  const TrainingResult rb = run_training(b.server, b.clients, b.features, cfg);
  EXPECT_EQ(ra.server.adapter, rb.server.adapter);
  EXPECT_EQ(ra.reports, rb.reports);
  for (std::size_t u = 0; u < a.clients.size(); ++u) EXPECT_EQ(a.clients[u].p_u, b.clients[u].p_u);
  EXPECT_EQ(ra.reports.size(), 8u);
  EXPECT_EQ(ra.server.round, 8u);
}

TEST(RunTrainingTest, FatDisabledLeavesAdapterAtInit) {
  Federation f = federation(5);
  TrainingConfig cfg;
  cfg.rounds = 3;
  cfg.local.n_negatives = 2;
  cfg.fat_enabled = false;
  const TrainingResult r = run_training(f.server, f.clients, f.features, cfg);
  EXPECT_EQ(r.server.adapter, f.server.adapter);
}

TEST(RunTrainingTest, RejectsZeroRoundsAndNoClients) {
  Federation f = federation(6);
  TrainingConfig cfg;
  cfg.rounds = 0;
  EXPECT_THROW(run_training(f.server, f.clients, f.features, cfg), ConfigError);
  cfg.rounds = 1;
  std::vector<ClientState> none;
  EXPECT_THROW(run_training(f.server, none, f.features, cfg), PreconditionError);
}

bool contains_bytes(const std::string& hay, const void* needle, std::size_t n) {
  return hay.find(std::string(static_cast<const char*>(needle), n)) != std::string::npos;
}

TEST(BoundaryAuditTest, UploadsCarryOnlyAdapterGradients) {
  Federation f = federation(7);
  BoundaryAudit audit;
  TrainingConfig cfg;
  cfg.rounds = 4;
  cfg.local.n_negatives = 2;
  cfg.audit = &audit;
  const std::vector<ClientState> initial = f.clients;
  run_training(f.server, f.clients, f.features, cfg);
  const auto recs = audit.records();
  ASSERT_EQ(recs.size(), 4u * 5u);
  const std::size_t expect_len = 16 + 8 * f.server.adapter.param_count();
  for (const auto& r : recs) {
    EXPECT_EQ(r.channel, "client_update");
    EXPECT_EQ(r.payload.size(), expect_len);
    for (std::size_t u = 0; u < f.clients.size(); ++u) {
      EXPECT_EQ(r.payload.find(f.clients[u].user_id), std::string::npos);
      for (const ClientState* s : {&initial[u], static_cast<const ClientState*>(&f.clients[u])})
        for (double v : s->p_u) EXPECT_FALSE(contains_bytes(r.payload, &v, sizeof v));
    }
  }
}

}  // namespace
}  // namespace transfr
