// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

#include "transfr/data.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "transfr/errors.hpp"
#include "transfr/rng.hpp"

namespace transfr {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\r';
  });
}

std::vector<std::string> sorted_unique(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::size_t lookup(const std::vector<std::string>& sorted,
                   std::string_view id) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), id);
  return static_cast<std::size_t>(it - sorted.begin());
}

}  // namespace

std::vector<Interaction> parse_interactions(std::istream& in) {
  std::vector<Interaction> out;
  std::map<std::pair<std::string, std::string>, std::size_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view(line);
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (is_blank(view)) continue;
    const auto fields = split_tabs(view);
    if (fields.size() < 2 || fields.size() > 3) {
      throw ParseError(lineno, "expected 2 or 3 tab-separated fields, got " +
                                   std::to_string(fields.size()));
    }
    if (fields[0].empty()) throw ParseError(lineno, "empty user id");
    if (fields[1].empty()) throw ParseError(lineno, "empty item id");
    Interaction rec{std::string(fields[0]), std::string(fields[1]),
                    std::nullopt};
    if (fields.size() == 3) {
      std::int64_t ts = 0;
      const auto f = fields[2];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), ts);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw ParseError(lineno, "bad timestamp '" + std::string(f) + "'");
      }
      rec.timestamp = ts;
    }
    auto key = std::make_pair(rec.user_id, rec.item_id);
    auto it = seen.find(key);
    if (it == seen.end()) {
      seen.emplace(std::move(key), out.size());
      out.push_back(std::move(rec));
      continue;
    }
    auto& kept = out[it->second];
    if (rec.timestamp &&
        (!kept.timestamp || *rec.timestamp < *kept.timestamp)) {
      kept.timestamp = rec.timestamp;
    }
  }
  return out;
}

std::vector<Interaction> read_interactions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open interaction log " + path.string());
  return parse_interactions(in);
}

void write_interactions(std::ostream& out,
                        std::span<const Interaction> records) {
  for (const auto& r : records) {
    out << r.user_id << '\t' << r.item_id;
    if (r.timestamp) out << '\t' << *r.timestamp;
    out << '\n';
  }
}

std::size_t InteractionDataset::num_interactions() const {
  std::size_t n = 0;
  for (const auto& p : positives) n += p.size();
  return n;
}

std::optional<std::size_t> InteractionDataset::user_index(
    std::string_view id) const {
  const std::size_t i = lookup(users, id);
  if (i < users.size() && users[i] == id) return i;
  return std::nullopt;
}

std::optional<std::size_t> InteractionDataset::item_index(
    std::string_view id) const {
  const std::size_t i = lookup(items, id);
  if (i < items.size() && items[i] == id) return i;
  return std::nullopt;
}

bool InteractionDataset::is_positive(std::size_t user, std::size_t item) const {
  const auto& p = positives.at(user);
  auto it = std::lower_bound(
      p.begin(), p.end(), item,
      [](const Positive& a, std::size_t b) { return a.item < b; });
  return it != p.end() && it->item == item;
}

std::vector<std::size_t> InteractionDataset::positive_items(
    std::size_t user) const {
  std::vector<std::size_t> out;
  out.reserve(positives.at(user).size());
  for (const auto& p : positives[user]) out.push_back(p.item);
  return out;
}

std::vector<Interaction> InteractionDataset::to_records() const {
  std::vector<Interaction> out;
  for (std::size_t u = 0; u < users.size(); ++u)
    for (const auto& p : positives[u])
      out.push_back({users[u], items[p.item], p.timestamp});
  return out;
}

InteractionDataset make_dataset(std::span<const Interaction> records,
                                std::string domain_tag,
                                std::span<const std::string> extra_items) {
  InteractionDataset ds;
  ds.domain_tag = std::move(domain_tag);
  std::vector<std::string> users, items(extra_items.begin(), extra_items.end());
  for (const auto& r : records) {
    users.push_back(r.user_id);
    items.push_back(r.item_id);
  }
  ds.users = sorted_unique(std::move(users));
  ds.items = sorted_unique(std::move(items));
  ds.positives.resize(ds.users.size());
  for (const auto& r : records) {
    const std::size_t u = lookup(ds.users, r.user_id);
    const std::size_t i = lookup(ds.items, r.item_id);
    auto& p = ds.positives[u];
    auto it = std::find_if(p.begin(), p.end(),
                           [i](const Positive& x) { return x.item == i; });
    if (it == p.end()) {
      p.push_back({i, r.timestamp});
    } else if (r.timestamp && (!it->timestamp || *r.timestamp < *it->timestamp)) {
      it->timestamp = r.timestamp;
    }
  }
  for (auto& p : ds.positives) {
    std::sort(p.begin(), p.end(),
              [](const Positive& a, const Positive& b) { return a.item < b.item; });
  }
  return ds;
}

InteractionDataset filter_kcore(std::span<const Interaction> records,
                                std::size_t min_user, std::size_t min_item,
                                std::string domain_tag) {
  if (min_user < 1 || min_item < 1) {
    throw DomainError("filter_kcore: thresholds must be >= 1");
  }
  // Deduplicate first so counts are per (user, item) pair.
  std::vector<Interaction> active;
  {
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& r : records)
      if (seen.emplace(r.user_id, r.item_id).second) active.push_back(r);
  }
  while (true) {
    std::map<std::string, std::size_t> user_count, item_count;
    for (const auto& r : active) {
      ++user_count[r.user_id];
      ++item_count[r.item_id];
    }
    std::vector<Interaction> kept;
    kept.reserve(active.size());
    for (const auto& r : active) {
      if (user_count[r.user_id] >= min_user &&
          item_count[r.item_id] >= min_item) {
        kept.push_back(r);
      }
    }
    if (kept.size() == active.size()) break;
    active = std::move(kept);
  }
  return make_dataset(active, std::move(domain_tag));
}

SplitDataset leave_one_out_split(const InteractionDataset& ds,
                                 std::uint64_t seed) {
  SplitDataset split;
  split.train = ds;
  split.heldout.resize(ds.num_users());
  split.candidates.resize(ds.num_users());
  for (std::size_t u = 0; u < ds.num_users(); ++u) {
    const auto& pos = ds.positives[u];
    if (pos.size() < 2) {
      throw PreconditionError("leave_one_out_split: user '" + ds.users[u] +
                              "' has fewer than 2 positives");
    }
    const bool timed = std::all_of(pos.begin(), pos.end(),
                                   [](const Positive& p) { return p.timestamp; });
    std::size_t pick = 0;
    if (timed) {
      for (std::size_t k = 1; k < pos.size(); ++k)
        if (*pos[k].timestamp > *pos[pick].timestamp) pick = k;
    } else {
      Rng rng(seed, "loo-holdout", {hash_string(ds.users[u])});
      pick = rng.index(pos.size());
    }
    split.heldout[u] = pos[pick].item;
    auto& train_pos = split.train.positives[u];
    train_pos.erase(train_pos.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return split;
}

std::vector<std::size_t> sample_excluding(std::size_t universe,
                                          std::span<const std::size_t> excluded,
                                          std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> pool;
  pool.reserve(universe);
  std::size_t e = 0;
  for (std::size_t i = 0; i < universe; ++i) {
    while (e < excluded.size() && excluded[e] < i) ++e;
    if (e < excluded.size() && excluded[e] == i) continue;
    pool.push_back(i);
  }
  if (pool.size() < n) {
    throw InsufficientCandidatesError(
        "need " + std::to_string(n) + " candidates, only " +
        std::to_string(pool.size()) + " available");
  }
  Rng rng(seed);
  const auto picks = rng.sample_without_replacement(pool.size(), n);
  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t p : picks) out.push_back(pool[p]);
  return out;
}

std::vector<std::size_t> sample_negatives(const InteractionDataset& ds,
                                          std::size_t user, std::size_t n,
                                          std::uint64_t seed,
                                          std::uint64_t nonce) {
  const auto excluded = ds.positive_items(user);
  try {
    return sample_excluding(
        ds.num_items(), excluded, n,
        derive_seed(seed, "negatives", {hash_string(ds.users.at(user)), nonce}));
  } catch (const InsufficientCandidatesError& e) {
    throw InsufficientCandidatesError("user '" + ds.users[user] +
                                      "': " + e.what());
  }
}

void attach_candidates(SplitDataset& split, std::size_t candidate_size,
                       std::uint64_t seed) {
  const auto& ds = split.train;
  split.candidates.assign(ds.num_users(), {});
  for (std::size_t u = 0; u < ds.num_users(); ++u) {
    auto excluded = ds.positive_items(u);
    excluded.insert(std::lower_bound(excluded.begin(), excluded.end(),
                                     split.heldout[u]),
                    split.heldout[u]);
    std::vector<std::size_t> cands;
    if (candidate_size == 0) {
      cands = sample_excluding(ds.num_items(), excluded,
                               ds.num_items() - excluded.size(), 0);
      std::sort(cands.begin(), cands.end());
    } else {
      cands = sample_excluding(
          ds.num_items(), excluded, candidate_size - 1,
          derive_seed(seed, "eval-candidates", {hash_string(ds.users[u])}));
    }
    split.candidates[u] = std::move(cands);
  }
}

void EmbeddingTable::add(std::string id, Vector v) {
  if (v.size() != dim_) {
    throw ShapeError("embedding for '" + id + "' has length " +
                     std::to_string(v.size()) + ", table dim is " +
                     std::to_string(dim_));
  }
  if (!all_finite(v)) throw DomainError("non-finite embedding for '" + id + "'");
  if (index_.contains(id)) throw DomainError("duplicate item id '" + id + "'");
  index_.emplace(id, ids_.size());
  ids_.push_back(std::move(id));
  vectors_.push_back(std::move(v));
}

bool EmbeddingTable::contains(std::string_view id) const {
  return index_.contains(std::string(id));
}

const Vector& EmbeddingTable::at(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) {
    throw MissingItemError("item '" + std::string(id) +
                           "' not in embedding table");
  }
  return vectors_[it->second];
}

namespace {

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<char>((v >> s) & 0xff));
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t offset() const { return pos_; }

  std::string_view take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(pos_, std::string("truncated ") + what);
    }
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint16_t u16(const char* what) {
    auto b = take(2, what);
    return static_cast<std::uint16_t>(static_cast<unsigned char>(b[0]) |
                                      (static_cast<unsigned char>(b[1]) << 8));
  }
  std::uint32_t u32(const char* what) {
    auto b = take(4, what);
    std::uint32_t v = 0;
    for (int k = 3; k >= 0; --k) v = (v << 8) | static_cast<unsigned char>(b[k]);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_tfre(const EmbeddingTable& table) {
  std::string out = "TFRE";
  put_u32(out, kTfreVersion);
  put_u32(out, static_cast<std::uint32_t>(table.size()));
  put_u32(out, static_cast<std::uint32_t>(table.dim()));
  for (std::size_t k = 0; k < table.size(); ++k) {
    const auto& id = table.ids()[k];
    if (id.size() > 0xffff) throw DomainError("item id longer than 65535 bytes");
    put_u16(out, static_cast<std::uint16_t>(id.size()));
    out += id;
    for (double v : table.vectors()[k]) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  return out;
}

EmbeddingTable decode_tfre(std::string_view bytes) {
  ByteReader r(bytes);
  const auto magic = r.take(4, "magic");
  if (magic != "TFRE") throw FormatError(0, "bad magic");
  const std::uint64_t version_at = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version != kTfreVersion) {
    throw FormatError(version_at,
                      "unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32("item count");
  const std::uint32_t dim = r.u32("dim");
  EmbeddingTable table(dim);
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint64_t record_at = r.offset();
    const std::uint16_t len = r.u16("id length");
    std::string id(r.take(len, "id"));
    Vector v(dim);
    for (std::uint32_t j = 0; j < dim; ++j) {
      v[j] = static_cast<double>(std::bit_cast<float>(r.u32("vector")));
    }
    try {
      table.add(std::move(id), std::move(v));
    } catch (const Error& e) {
      throw FormatError(record_at, e.what());
    }
  }
  if (!r.done()) throw FormatError(r.offset(), "trailing bytes");
  return table;
}

EmbeddingTable load_embedding_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open embedding table " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_tfre(buf.str());
}

void store_embedding_table(const EmbeddingTable& table,
                           const std::filesystem::path& path) {
  const std::string bytes = encode_tfre(table);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write embedding table " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

}  // namespace transfr
