// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

// Linear-model check of personalized versus shared adapters. Every client u
// wants the L x d map A* B_u*; a personalized fit learns one B_u per client
// and can match all of them, a shared fit must use a single product A B.

#ifndef TRANSFR_THEORY_HPP_
#define TRANSFR_THEORY_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "transfr/numerics.hpp"

namespace transfr {

struct LinearInstance {
  Matrix a_star;               // L x f, orthonormal columns
  Matrix b_bar;                // f x d
  std::vector<Matrix> b_star;  // per client, f x d
  double tau = 0.0;

  std::size_t clients() const { return b_star.size(); }
};

// B_u* = B_bar + tau * E_u with B_bar and E_u standard normal. The draws do
// not depend on tau, so instances built from one seed differ only in scale
// of the perturbation. A draw with a rank-deficient A* or B_bar is retried
// with the next seed; NumericError after 10 attempts.
LinearInstance make_instance(std::size_t l, std::size_t f, std::size_t d,
                             std::size_t n, double tau, std::uint64_t seed);

// (1/n) sum_u ||A B_u - A* B_u*||_F^2.
double personalized_objective(const LinearInstance& inst, const Matrix& a,
                              std::span<const Matrix> b);

struct PersonalizedFit {
  double objective = 0.0;
  std::vector<double> trace;  // objective before each iteration, then final
};

// Gradient descent on A and every B_u from a seeded small random start. A
// moves along the gradient of the averaged objective; each B_u moves along
// the gradient of its own client's term, which is the same direction scaled
// by n. Stops early once the objective falls below `tolerance`. Throws
// DivergenceError when the objective becomes non-finite or grows.
PersonalizedFit fit_personalized(const LinearInstance& inst, int iters,
                                 double lr, std::uint64_t seed = 0,
                                 double tolerance = 0.0);

// Closed-form minimum of (1/n) sum_u ||A B - A* B_u*||_F^2 over one shared
// (A, B): the best product is the mean target A* B_bar*, leaving
// (1/n) sum_u ||A* (B_u* - B_bar*)||_F^2 with B_bar* the client mean.
double fit_shared(const LinearInstance& inst);

// Plain gradient descent on the shared objective; reference for fit_shared.
double fit_shared_iterative(const LinearInstance& inst, int iters, double lr,
                            std::uint64_t seed = 0);

struct SweepRow {
  double tau = 0.0;
  double personalized = 0.0;
  double shared = 0.0;

  bool operator==(const SweepRow&) const = default;
};

struct SweepConfig {
  std::size_t l = 8;
  std::size_t f = 4;
  std::size_t d = 2;
  std::size_t n = 6;
  std::vector<double> taus{0.0, 0.5, 1.0, 2.0};
  int iters = 20000;
  double lr = 0.05;
  double tolerance = 1e-9;
  std::uint64_t seed = 0;
  int threads = 1;
};

std::vector<SweepRow> heterogeneity_sweep(const SweepConfig& cfg);

// `theory tau=<v> personalized=<v> shared=<v>`, round-trippable.
std::string format_record(const SweepRow& row);
std::string format_table(std::span<const SweepRow> rows);

}  // namespace transfr

#endif  // TRANSFR_THEORY_HPP_
