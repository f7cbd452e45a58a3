// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

// Item representation stack: frozen text encoder -> shared adapter ->
// optional per-client head, fused with the user vector by an inner product.

#ifndef TRANSFR_ENCODER_HPP_
#define TRANSFR_ENCODER_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "transfr/data.hpp"
#include "transfr/numerics.hpp"
#include "transfr/transformer.hpp"

namespace transfr {

// Fully connected stack with ReLU between layers and a linear output.
// Each layer computes y = x W + b with W stored in x in_dim x out_dim.
class Mlp {
 public:
  struct Dense {
    Matrix w;
    Vector b;
    bool operator==(const Dense&) const = default;
  };

  // Intermediate values kept for backward().
  struct Cache {
    std::vector<Vector> inputs;  // input of every layer
    std::vector<Vector> pre;     // pre-activation of every layer
  };

  Mlp() = default;
  // widths = {in, hidden..., out}; at least two entries.
  static Mlp zeros(std::span<const std::size_t> widths);
  static Mlp random(std::span<const std::size_t> widths, std::uint64_t seed,
                    double gain = 1.0);

  std::size_t in_dim() const;
  std::size_t out_dim() const;
  std::size_t depth() const { return layers.size(); }
  std::size_t param_count() const;

  Vector forward(std::span<const double> x) const;
  Vector forward(std::span<const double> x, Cache& cache) const;
  // Adds dLoss/dParams (flatten() order) into dparams; returns dLoss/dx.
  Vector backward(std::span<const double> dout, const Cache& cache,
                  std::span<double> dparams) const;

  // Layer by layer: W row-major, then b.
  Vector flatten() const;
  void assign(std::span<const double> flat);
  void step(std::span<const double> grad, double lr);

  bool operator==(const Mlp&) const = default;

  std::vector<Dense> layers;
};

using AdapterParams = Mlp;
using HeadParams = Mlp;

// f_enc -> d -> ... -> e with `layers` dense layers (>= 1). A single layer is
// a linear map f_enc -> e. Rejects d == 0 and d > f_enc.
AdapterParams make_adapter(std::size_t f_enc, std::size_t d, std::size_t e,
                           std::size_t layers, std::uint64_t seed);

// Text image: `mlp <depth>` then per layer `<in> <out>` followed by the
// weights row-major and the biases, one %.17g value per line.
std::string encode_mlp(const Mlp& m);
// Throws FormatError with the byte offset of the first bad token.
Mlp decode_mlp(std::string_view text);
void store_mlp(const Mlp& m, const std::filesystem::path& path);
Mlp load_mlp(const std::filesystem::path& path);

// e -> 2e -> e head initialised to the exact identity on all of R^e via
// relu(x) - relu(-x) = x.
HeadParams make_identity_head(std::size_t e);

std::size_t adapter_param_count(const AdapterParams& a);

Vector adapter_forward(const AdapterParams& a, std::span<const double> x);
// A missing head is the identity (personalization disabled).
Vector head_forward(const std::optional<HeadParams>& h,
                    std::span<const double> g_out);

// sigmoid(<p_u, q_i>).
double predict(std::span<const double> p_u, std::span<const double> q_i);

// item_id<TAB>title lines.
std::map<std::string, std::string> parse_item_texts(std::istream& in);
std::map<std::string, std::string> read_item_texts(
    const std::filesystem::path& path);

// The frozen factor of the item encoder: either a stored table or a toy
// transformer run over the item's title with mean pooling.
class FrozenEncoder {
 public:
  static FrozenEncoder from_table(EmbeddingTable table);
  static FrozenEncoder from_transformer(ToyTransformer model, Vocabulary vocab,
                                        std::map<std::string, std::string> texts);

  std::size_t dim() const;
  bool contains(std::string_view item_id) const;
  // Throws MissingItemError for an unknown item.
  Vector encode_item(std::string_view item_id) const;
  // Encodes `ids` in order into a table.
  EmbeddingTable materialize(std::span<const std::string> ids) const;

 private:
  struct TableBacked {
    EmbeddingTable table;
  };
  struct TransformerBacked {
    ToyTransformer model;
    Vocabulary vocab;
    std::map<std::string, std::string> texts;
  };
  std::variant<TableBacked, TransformerBacked> impl_;
};

}  // namespace transfr

#endif  // TRANSFR_ENCODER_HPP_
