// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

// Deterministic random streams. Every consumer derives its own generator
// from (root seed, stream name, integer keys) so results never depend on
// call order or thread scheduling.

#ifndef TRANSFR_RNG_HPP_
#define TRANSFR_RNG_HPP_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>
#include <vector>

namespace transfr {

std::uint64_t splitmix64(std::uint64_t x);

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream,
                          std::initializer_list<std::uint64_t> keys = {});

std::uint64_t hash_string(std::string_view s);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t root, std::string_view stream,
      std::initializer_list<std::uint64_t> keys = {})
      : engine_(derive_seed(root, stream, keys)) {}

  // Uniform in [0, 1).
  double uniform();
  double normal(double mean = 0.0, double stddev = 1.0);
  // Uniform integer in [0, n). n must be > 0.
  std::size_t index(std::size_t n);
  // k distinct values of [0, n), uniformly, in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t k);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace transfr

#endif  // TRANSFR_RNG_HPP_
