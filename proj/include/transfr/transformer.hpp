// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

// A small multi-head self-attention stack with hand-written backprop. It
// serves as the frozen text encoder of the recommendation pipeline and as the
// teacher/student pair for layer-mapped distillation.
//
// Layer l maps X (L x dim) to
//   X1 = X + concat_h(softmax(X Wq_h (X Wk_h)^T / sqrt(dk)) X Wv_h) Wo
//   X2 = X1 + relu(X1 W1 + b1) W2 + b2
// There is no positional signal and no normalization; token order only
// matters through the attention pattern of the tokens themselves.

#ifndef TRANSFR_TRANSFORMER_HPP_
#define TRANSFR_TRANSFORMER_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "transfr/numerics.hpp"

namespace transfr {

struct TransformerShape {
  std::size_t vocab = 0;
  std::size_t dim = 0;
  std::size_t heads = 1;
  std::size_t layers = 0;
  std::size_t ffn_dim = 0;

  bool operator==(const TransformerShape&) const = default;
};

// Standard deviations used at initialization, expressed as gains over
// 1/sqrt(fan_in).
struct TransformerInit {
  double embedding = 1.0;
  double query_key = 1.0;
  double value = 1.0;
  double output = 0.5;
  double ffn = 0.5;
};

struct TransformerLayer {
  Matrix wq, wk, wv, wo;  // dim x dim
  Matrix w1;              // dim x ffn
  Vector b1;              // ffn
  Matrix w2;              // ffn x dim
  Vector b2;              // dim

  bool operator==(const TransformerLayer&) const = default;
};

class ToyTransformer {
 public:
  ToyTransformer() = default;
  // All-zero parameters of the given shape.
  explicit ToyTransformer(const TransformerShape& shape);

  static ToyTransformer random(const TransformerShape& shape,
                               std::uint64_t seed,
                               const TransformerInit& init = {});

  const TransformerShape& shape() const { return shape_; }
  std::size_t head_dim() const { return shape_.dim / shape_.heads; }

  Matrix token_embedding;  // vocab x dim
  std::vector<TransformerLayer> layers;

  std::size_t param_count() const;
  // Order: token_embedding, then per layer wq wk wv wo w1 b1 w2 b2.
  Vector flatten() const;
  void assign(std::span<const double> flat);

  // Returns a copy keeping only the first `depth` layers.
  ToyTransformer truncated(std::size_t depth) const;

  bool operator==(const ToyTransformer&) const = default;

 private:
  TransformerShape shape_;
};

// Everything the backward pass needs from one forward evaluation.
struct ForwardTrace {
  // states[0] is the embedding-layer output; states[l] the output of layer l.
  std::vector<Matrix> states;
  // attention[l][h] for layer l+1, each L x L and row-stochastic.
  std::vector<std::vector<Matrix>> attention;
  std::vector<Matrix> q, k, v;        // per layer, L x dim
  std::vector<Matrix> attn_out;       // per layer, concat of heads, L x dim
  std::vector<Matrix> mid;            // per layer, X1
  std::vector<Matrix> ffn_pre;        // per layer, X1 W1 + b1
  std::vector<std::size_t> tokens;
};

// Throws DomainError for an empty sequence and MissingItemError for an
// out-of-vocabulary token index.
ForwardTrace forward(const ToyTransformer& model,
                     std::span<const std::size_t> tokens);

// Per layer (1..layers), per head, the post-softmax attention weights.
std::vector<std::vector<Matrix>> attention_matrices(
    const ToyTransformer& model, std::span<const std::size_t> tokens);

// Gradient sinks for backward(). Empty entries mean "no gradient".
struct BackwardSeeds {
  Matrix d_embedding_state;                    // L x dim, or empty
  std::vector<std::vector<Matrix>> d_attention;  // [layer][head], or empty
  Matrix d_final_state;                        // L x dim, or empty
};

// Returns dLoss/dParams in a ToyTransformer-shaped container.
ToyTransformer backward(const ToyTransformer& model, const ForwardTrace& trace,
                        const BackwardSeeds& seeds);

// Mean of the final-layer token states.
Vector mean_pool(const ForwardTrace& trace);

// Whitespace tokenizer with a vocabulary fixed at construction. Index 0 is
// reserved for unknown words.
class Vocabulary {
 public:
  static constexpr std::string_view kUnknown = "<unk>";

  Vocabulary();
  // Words are numbered by first occurrence across `lines`.
  static Vocabulary build(std::span<const std::string> lines);

  std::size_t size() const { return words_.size(); }
  std::size_t id(std::string_view word) const;
  const std::string& word(std::size_t id) const { return words_.at(id); }
  std::vector<std::size_t> encode(std::string_view line) const;
  const std::vector<std::string>& words() const { return words_; }

 private:
  void add(std::string word);
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

std::vector<std::string> split_whitespace(std::string_view line);

// Binary "TFTT" container: magic, u32 version, five u32 shape fields, then
// flatten() as float64 little-endian.
std::string encode_transformer(const ToyTransformer& model);
ToyTransformer decode_transformer(std::string_view bytes);
void store_transformer(const ToyTransformer& model,
                       const std::filesystem::path& path);
ToyTransformer load_transformer(const std::filesystem::path& path);

}  // namespace transfr

#endif  // TRANSFR_TRANSFORMER_HPP_
