// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

// Interaction logs, k-core filtering, leave-one-out splits, negative sampling
// and the TFRE embedding-table file format.

#ifndef TRANSFR_DATA_HPP_
#define TRANSFR_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "transfr/numerics.hpp"

namespace transfr {

struct Interaction {
  std::string user_id;
  std::string item_id;
  std::optional<std::int64_t> timestamp;

  bool operator==(const Interaction&) const = default;
};

// Parses `user<TAB>item[<TAB>timestamp]` lines. Blank lines are skipped.
// Duplicate (user, item) pairs collapse onto the first occurrence and keep
// the earliest timestamp seen. Throws ParseError with the 1-based line.
std::vector<Interaction> parse_interactions(std::istream& in);
std::vector<Interaction> read_interactions(const std::filesystem::path& path);
void write_interactions(std::ostream& out,
                        std::span<const Interaction> records);

struct Positive {
  std::size_t item = 0;  // index into InteractionDataset::items
  std::optional<std::int64_t> timestamp;

  bool operator==(const Positive&) const = default;
};

// Users and items are kept in ascending id order, so an index comparison is
// an id comparison. Every user has at least one positive.
struct InteractionDataset {
  std::vector<std::string> users;
  std::vector<std::string> items;
  std::vector<std::vector<Positive>> positives;  // per user, ascending item
  std::string domain_tag;

  std::size_t num_users() const { return users.size(); }
  std::size_t num_items() const { return items.size(); }
  std::size_t num_interactions() const;
  bool empty() const { return users.empty(); }

  std::optional<std::size_t> user_index(std::string_view id) const;
  std::optional<std::size_t> item_index(std::string_view id) const;
  bool is_positive(std::size_t user, std::size_t item) const;
  // Ascending item indices of the user's positives.
  std::vector<std::size_t> positive_items(std::size_t user) const;

  std::vector<Interaction> to_records() const;

  bool operator==(const InteractionDataset&) const = default;
};

// Builds a dataset without filtering. `extra_items` are added to the item
// universe even if no record references them (cold items).
InteractionDataset make_dataset(std::span<const Interaction> records,
                                std::string domain_tag,
                                std::span<const std::string> extra_items = {});

// Iteratively drops users with fewer than min_user and items with fewer than
// min_item interactions until neither rule removes anything. An empty result
// is returned as an empty dataset.
InteractionDataset filter_kcore(std::span<const Interaction> records,
                                std::size_t min_user, std::size_t min_item,
                                std::string domain_tag = "");

inline constexpr std::size_t kDefaultMinUserInteractions = 20;
inline constexpr std::size_t kDefaultMinItemInteractions = 30;

struct SplitDataset {
  // Same user and item lists as the source dataset, minus the held-out item
  // in each user's positives.
  InteractionDataset train;
  std::vector<std::size_t> heldout;  // per user, item index
  // Per user evaluation negatives; filled by attach_candidates.
  std::vector<std::vector<std::size_t>> candidates;
};

// Holds out the latest-timestamp positive per user (smallest item id among
// ties). When any of the user's positives lacks a timestamp, one positive is
// held out uniformly at random from a stream keyed by (seed, user).
SplitDataset leave_one_out_split(const InteractionDataset& ds,
                                 std::uint64_t seed);

// n items drawn uniformly without replacement from the items that are not
// positives of `user` in `ds`. Deterministic per (user, seed, nonce).
std::vector<std::size_t> sample_negatives(const InteractionDataset& ds,
                                          std::size_t user, std::size_t n,
                                          std::uint64_t seed,
                                          std::uint64_t nonce = 0);

// Same draw over an explicit universe: picks n of [0, universe) avoiding the
// ascending `excluded` list.
std::vector<std::size_t> sample_excluding(std::size_t universe,
                                          std::span<const std::size_t> excluded,
                                          std::size_t n, std::uint64_t seed);

// Fills split.candidates with (candidate_size - 1) sampled items per user that
// are neither train positives nor the held-out item. candidate_size == 0
// means every such item.
void attach_candidates(SplitDataset& split, std::size_t candidate_size,
                       std::uint64_t seed);

// item_id -> frozen f_enc-dimensional vector, in insertion order.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }

  // Throws ShapeError on a wrong-length vector, DomainError on a duplicate
  // id or non-finite entry.
  void add(std::string id, Vector v);
  bool contains(std::string_view id) const;
  // Throws MissingItemError.
  const Vector& at(std::string_view id) const;

  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<Vector>& vectors() const { return vectors_; }

  bool operator==(const EmbeddingTable& o) const {
    return dim_ == o.dim_ && ids_ == o.ids_ && vectors_ == o.vectors_;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<Vector> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

// TFRE layout, little-endian throughout:
//   "TFRE" | u32 version=1 | u32 item_count | u32 dim |
//   item_count x { u16 id_len | id bytes | dim x float32 }
inline constexpr std::uint32_t kTfreVersion = 1;

std::string encode_tfre(const EmbeddingTable& table);
// Throws FormatError carrying the byte offset of the first bad field.
EmbeddingTable decode_tfre(std::string_view bytes);

EmbeddingTable load_embedding_table(const std::filesystem::path& path);
void store_embedding_table(const EmbeddingTable& table,
                           const std::filesystem::path& path);

}  // namespace transfr

#endif  // TRANSFR_DATA_HPP_
