// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

// Layer-mapped knowledge distillation from a deep teacher to a shallow
// student. Student layer z is matched against teacher layer stride * z:
// z = 0 pairs the embedding layers through a learnable projection W
// (f x f'), z >= 1 pairs the post-softmax attention matrices head by head.
// Both per-layer terms are means over entries.

#ifndef TRANSFR_DISTILL_HPP_
#define TRANSFR_DISTILL_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "transfr/numerics.hpp"
#include "transfr/transformer.hpp"

namespace transfr {

using TokenSequence = std::vector<std::size_t>;

enum class Optimizer { kSgd, kAdam };

struct HkdConfig {
  std::size_t layer_stride = 3;
  double attn_weight = 1.0;
  double embed_weight = 1.0;
  int epochs = 200;
  double learning_rate = 0.01;
  Optimizer optimizer = Optimizer::kAdam;
  int threads = 1;
};

// Teacher layer paired with student layer z. Throws ConfigError when the
// mapped layer exceeds the teacher depth.
std::size_t layer_map(std::size_t z, std::size_t teacher_layers,
                      std::size_t stride = 3);

// (1/h) sum_i mean((A_i^stu - A_i^tea)^2). Throws ShapeError on mismatch.
double attn_loss(std::span<const Matrix> student,
                 std::span<const Matrix> teacher);

// mean((E_stu W - E_tea)^2).
double embed_loss(const Matrix& student_embed, const Matrix& projection,
                  const Matrix& teacher_embed);

// Gradient of embed_loss with respect to the projection.
Matrix embed_loss_grad_projection(const Matrix& student_embed,
                                  const Matrix& projection,
                                  const Matrix& teacher_embed);

// Checks that every student layer maps into the teacher and that the two
// models agree on head count.
void validate_pair(const ToyTransformer& student, const ToyTransformer& teacher,
                   const Matrix& projection, const HkdConfig& cfg);

double hkd_loss(const ToyTransformer& student, const ToyTransformer& teacher,
                const Matrix& projection, std::span<const std::size_t> tokens,
                const HkdConfig& cfg);

struct HkdGradients {
  double loss = 0.0;
  ToyTransformer student;
  Matrix projection;
};

// Loss and gradients against a precomputed teacher trace (the teacher is
// frozen so its forward pass can be shared across epochs).
HkdGradients hkd_gradients(const ToyTransformer& student,
                           const ForwardTrace& teacher_trace,
                           const Matrix& projection, const HkdConfig& cfg);

struct DistillResult {
  ToyTransformer student;
  Matrix projection;
  // Mean hkd_loss over the corpus: entry e is measured before the update of
  // epoch e, and the last entry after the final update (epochs + 1 values).
  std::vector<double> loss_trace;
};

// Full-batch training of the student and projection; the teacher is only
// read. Throws DivergenceError on a non-finite loss.
DistillResult distill_train(const ToyTransformer& teacher,
                            ToyTransformer student, Matrix projection,
                            std::span<const TokenSequence> corpus,
                            const HkdConfig& cfg);

}  // namespace transfr

#endif  // TRANSFR_DISTILL_HPP_
