// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

#include "transfr/data.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "transfr/errors.hpp"
#include "transfr/rng.hpp"

namespace transfr {
namespace {

std::vector<Interaction> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_interactions(in);
}

TEST(ParseInteractionsTest, SingleRecord) {
  const auto r = parse("u1\ti1\t100\n");
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].user_id, "u1");
  EXPECT_EQ(r[0].item_id, "i1");
  EXPECT_EQ(r[0].timestamp, 100);
}

TEST(ParseInteractionsTest, EmptyStream) { EXPECT_TRUE(parse("").empty()); }

TEST(ParseInteractionsTest, DuplicateKeepsEarliestTimestamp) {
  const auto r = parse("u1\ti1\t200\nu1\ti1\t100\n");
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].timestamp, 100);
}

TEST(ParseInteractionsTest, TimestampIsOptionalAndBlankLinesSkipped) {
  const auto r = parse("u1\ti1\n\nu2\ti1\t5\n");
  ASSERT_EQ(r.size(), 2u);
  EXPECT_FALSE(r[0].timestamp.has_value());
  EXPECT_EQ(r[1].timestamp, 5);
}

TEST(ParseInteractionsTest, MalformedLineReportsLineNumber) {
  try {
    parse("u1\ti1\t1\nu2\t\t3\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse("u1\ti1\tsoon\n"), ParseError);
  EXPECT_THROW(parse("justone\n"), ParseError);
  EXPECT_THROW(parse("a\tb\t1\textra\n"), ParseError);
}

TEST(ParseInteractionsTest, WriteThenParseRoundTrips) {
  const auto r = parse("u2\ti9\t7\nu1\ti3\n");
  std::ostringstream out;
  write_interactions(out, r);
  EXPECT_EQ(parse(out.str()), r);
}

// Removes under-threshold users and items by full rescans until stable.
std::set<std::pair<std::string, std::string>> kcore_oracle(
    const std::vector<Interaction>& records, std::size_t min_user, std::size_t min_item) {
  std::set<std::pair<std::string, std::string>> edges;
  for (const auto& r : records) edges.insert({r.user_id, r.item_id});
  for (bool changed = true; changed;) {
    changed = false;
    std::map<std::string, std::size_t> uc, ic;
    for (const auto& [u, i] : edges) {
      ++uc[u];
      ++ic[i];
    }
    for (auto it = edges.begin(); it != edges.end();) {
      if (uc[it->first] < min_user || ic[it->second] < min_item) {
        it = edges.erase(it);
        changed = true;
      } else {
        ++it;
      }
    }
  }
  return edges;
}

std::set<std::pair<std::string, std::string>> edges_of(const InteractionDataset& ds) {
  std::set<std::pair<std::string, std::string>> edges;
  for (std::size_t u = 0; u < ds.num_users(); ++u) {
    for (const auto& p : ds.positives[u]) edges.insert({ds.users[u], ds.items[p.item]});
  }
  return edges;
}

TEST(FilterKcoreTest, DenseDataUnchanged) {
  std::vector<Interaction> r;
  for (const char* u : {"a", "b", "c"})
    for (const char* i : {"x", "y", "z"}) r.push_back({u, i, std::nullopt});
  const auto ds = filter_kcore(r, 3, 3);
  EXPECT_EQ(ds.num_users(), 3u);
  EXPECT_EQ(ds.num_items(), 3u);
  EXPECT_EQ(ds.num_interactions(), 9u);
}

TEST(FilterKcoreTest, SingleShortUserGivesEmpty) {
  const std::vector<Interaction> r{{"u", "i", std::nullopt}};
  EXPECT_TRUE(filter_kcore(r, 2, 1).empty());
}

TEST(FilterKcoreTest, ChainCascadeMatchesOracle) {
  // Dropping item i3 (one interaction) pushes u2 below two, which in turn
  // leaves i2 with one.
  const auto r = parse("u1\ti1\nu1\ti2\nu2\ti2\nu2\ti3\nu3\ti1\nu3\ti4\nu4\ti1\nu4\ti4\n");
  const auto ds = filter_kcore(r, 2, 2);
  EXPECT_EQ(edges_of(ds), kcore_oracle(r, 2, 2));
  EXPECT_EQ(ds.users, (std::vector<std::string>{"u3", "u4"}));
}

TEST(FilterKcoreTest, RandomGraphsMatchOracleAndSatisfyThresholds) {
  for (int t = 0; t < 40; ++t) {
    Rng rng(t, "kcore");
    std::vector<Interaction> r;
    const std::size_t users = 5 + rng.index(20), items = 5 + rng.index(20);
    for (std::size_t u = 0; u < users; ++u)
      for (std::size_t i = 0; i < items; ++i)
        if (rng.uniform() < 0.3) r.push_back({"u" + std::to_string(u), "i" + std::to_string(i), std::nullopt});
    const std::size_t mu = 1 + rng.index(5), mi = 1 + rng.index(5);
    const auto ds = filter_kcore(r, mu, mi);
    EXPECT_EQ(edges_of(ds), kcore_oracle(r, mu, mi));
    std::vector<std::size_t> item_count(ds.num_items(), 0);
    for (std::size_t u = 0; u < ds.num_users(); ++u) {
      EXPECT_GE(ds.positives[u].size(), mu);
      for (const auto& p : ds.positives[u]) ++item_count[p.item];
    }
    for (std::size_t c : item_count) EXPECT_GE(c, mi);
  }
}

TEST(FilterKcoreTest, DefaultThresholds) {
  EXPECT_EQ(kDefaultMinUserInteractions, 20u);
  EXPECT_EQ(kDefaultMinItemInteractions, 30u);
}

TEST(LeaveOneOutTest, HoldsOutLatestTimestamp) {
  const auto ds = make_dataset(parse("u\ti1\t1\nu\ti2\t9\n"), "d");
  const auto split = leave_one_out_split(ds, 3);
  EXPECT_EQ(split.train.items[split.heldout[0]], "i2");
  ASSERT_EQ(split.train.positives[0].size(), 1u);
  EXPECT_EQ(split.train.items[split.train.positives[0][0].item], "i1");
}

TEST(LeaveOneOutTest, SameSeedSameSplitWithoutTimestamps) {
  const auto ds = make_dataset(parse("u\ta\nu\tb\nu\tc\nv\ta\nv\tc\n"), "d");
  const auto a = leave_one_out_split(ds, 17), b = leave_one_out_split(ds, 17);
  EXPECT_EQ(a.heldout, b.heldout);
  EXPECT_EQ(a.train, b.train);
}

TEST(LeaveOneOutTest, RandomHoldoutIsUniform) {
  const auto ds = make_dataset(parse("u\ta\nu\tb\nu\tc\n"), "d");
  std::vector<int> counts(3, 0);
  for (std::uint64_t s = 0; s < 3000; ++s) ++counts[leave_one_out_split(ds, s).heldout[0]];
  for (int c : counts) EXPECT_NEAR(c / 3000.0, 1.0 / 3.0, 0.05);
}

TEST(LeaveOneOutTest, PartitionsPositives) {
  Rng rng(4, "loo");
  std::vector<Interaction> r;
  for (int u = 0; u < 30; ++u)
    for (int i = 0; i < 15; ++i)
      if (rng.uniform() < 0.4 || i < 2)
        r.push_back({"u" + std::to_string(u), "i" + std::to_string(i),
                     u % 2 ? std::optional<std::int64_t>(rng.index(5)) : std::nullopt});
  const auto ds = make_dataset(r, "d");
  const auto split = leave_one_out_split(ds, 9);
  for (std::size_t u = 0; u < ds.num_users(); ++u) {
    std::set<std::size_t> all, rest;
    for (const auto& p : ds.positives[u]) all.insert(p.item);
    for (const auto& p : split.train.positives[u]) rest.insert(p.item);
    EXPECT_FALSE(rest.count(split.heldout[u]));
    rest.insert(split.heldout[u]);
    EXPECT_EQ(rest, all);
  }
}

TEST(LeaveOneOutTest, SinglePositiveUserIsRejectedByName) {
  const auto ds = make_dataset(parse("lonely\ta\nu\ta\nu\tb\n"), "d");
  try {
    leave_one_out_split(ds, 1);
    FAIL() << "expected PreconditionError";
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("lonely"), std::string::npos);
  }
}

TEST(SampleNegativesTest, OnlyRemainingItem) {
  const auto ds = make_dataset(parse("u\ta\nu\tb\nu\tc\nv\td\n"), "d");
  EXPECT_EQ(sample_negatives(ds, 0, 1, 5), (std::vector<std::size_t>{3}));
}

TEST(SampleNegativesTest, ZeroIsEmpty) {
  const auto ds = make_dataset(parse("u\ta\nv\tb\n"), "d");
  EXPECT_TRUE(sample_negatives(ds, 0, 0, 5).empty());
}

TEST(SampleNegativesTest, TooFewNonPositivesThrows) {
  const auto ds = make_dataset(parse("u\ta\nu\tb\nv\tc\n"), "d");
  EXPECT_THROW(sample_negatives(ds, 0, 2, 5), InsufficientCandidatesError);
}

TEST(SampleNegativesTest, UniformWithoutReplacementAndDisjointFromPositives) {
  std::string text = "u\tp0\nu\tp1\n";
  for (int i = 0; i < 10; ++i) text += "v\tn" + std::to_string(i) + "\n";
  const auto ds = make_dataset(parse(text), "d");
  const auto positives = ds.positive_items(0);
  std::map<std::size_t, int> freq;
  for (std::uint64_t s = 0; s < 10000; ++s) {
    const auto neg = sample_negatives(ds, 0, 3, s);
    ASSERT_EQ(neg.size(), 3u);
    EXPECT_EQ(std::set<std::size_t>(neg.begin(), neg.end()).size(), 3u);
    for (std::size_t i : neg) {
      EXPECT_FALSE(std::binary_search(positives.begin(), positives.end(), i));
      ++freq[i];
    }
  }
  EXPECT_EQ(freq.size(), 10u);
  for (const auto& [item, c] : freq) EXPECT_NEAR(c / 10000.0, 0.3, 0.02);
}

TEST(SampleNegativesTest, DeterministicPerNonce) {
  std::string text;
  for (int i = 0; i < 30; ++i) text += "v\tn" + std::to_string(i) + "\n";
  text += "u\tn0\n";
  const auto ds = make_dataset(parse(text), "d");
  const auto u = *ds.user_index("u");
  EXPECT_EQ(sample_negatives(ds, u, 5, 1, 2), sample_negatives(ds, u, 5, 1, 2));
  EXPECT_NE(sample_negatives(ds, u, 5, 1, 2), sample_negatives(ds, u, 5, 1, 3));
}

TEST(AttachCandidatesTest, ExcludesPositivesAndHeldout) {
  Rng rng(2, "cands");
  std::vector<Interaction> r;
  for (int u = 0; u < 10; ++u)
    for (int i = 0; i < 40; ++i)
      if (rng.uniform() < 0.2 || i < 2) r.push_back({"u" + std::to_string(u), "i" + std::to_string(i), std::nullopt});
  auto split = leave_one_out_split(make_dataset(r, "d"), 1);
  attach_candidates(split, 10, 5);
  for (std::size_t u = 0; u < split.heldout.size(); ++u) {
    ASSERT_EQ(split.candidates[u].size(), 9u);
    for (std::size_t c : split.candidates[u]) {
      EXPECT_NE(c, split.heldout[u]);
      EXPECT_FALSE(split.train.is_positive(u, c));
    }
  }
}

EmbeddingTable one_item_table() {
  EmbeddingTable t(2);
  t.add("item", {0.5, -1.0});
  return t;
}

TEST(TfreTest, OneItemByteLayout) {
  const std::string bytes = encode_tfre(one_item_table());
  ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 4 + (2 + 4) + 8);
  EXPECT_EQ(bytes.substr(0, 4), "TFRE");
  const unsigned char expect_header[] = {1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 4, 0};
  EXPECT_EQ(std::memcmp(bytes.data() + 4, expect_header, sizeof(expect_header)), 0);
  EXPECT_EQ(bytes.substr(18, 4), "item");
  float f[2];
  std::memcpy(f, bytes.data() + 22, 8);
  EXPECT_EQ(f[0], 0.5f);
  EXPECT_EQ(f[1], -1.0f);
  EXPECT_EQ(decode_tfre(bytes), one_item_table());
}

TEST(TfreTest, EmptyTableIsHeaderOnly) {
  const std::string bytes = encode_tfre(EmbeddingTable(7));
  EXPECT_EQ(bytes.size(), 16u);
  const EmbeddingTable t = decode_tfre(bytes);
  EXPECT_EQ(t.size(), 0u);
  EXPECT_EQ(t.dim(), 7u);
}

TEST(TfreTest, RandomTableRoundTripsThroughDisk) {
  Rng rng(20, "tfre");
  EmbeddingTable t(6);
  for (int i = 0; i < 20; ++i) {
    Vector v(6);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    t.add("item-" + std::to_string(i), v);
  }
  const auto path = std::filesystem::temp_directory_path() / "transfr_tfre_test.bin";
  store_embedding_table(t, path);
  const EmbeddingTable back = load_embedding_table(path);
  EXPECT_EQ(back, t);
  EXPECT_EQ(encode_tfre(back), encode_tfre(t));
  std::filesystem::remove(path);
}

TEST(TfreTest, CorruptInputsReportOffsets) {
  std::string bytes = encode_tfre(one_item_table());
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  try {
    decode_tfre(bad_magic);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
  std::string bad_version = bytes;
  bad_version[4] = 2;
  try {
    decode_tfre(bad_version);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 4u);
  }
  EXPECT_THROW(decode_tfre(bytes.substr(0, bytes.size() - 1)), FormatError);
  EXPECT_THROW(decode_tfre(bytes.substr(0, 10)), FormatError);
  EXPECT_THROW(decode_tfre(bytes + "x"), FormatError);
}

TEST(EmbeddingTableTest, RejectsBadEntries) {
  EmbeddingTable t(2);
  EXPECT_THROW(t.add("a", {1.0}), ShapeError);
  t.add("a", {1.0, 2.0});
  EXPECT_THROW(t.add("a", {1.0, 2.0}), DomainError);
  EXPECT_THROW(t.add("b", {1.0, std::nan("")}), DomainError);
  EXPECT_THROW(t.at("zzz"), MissingItemError);
}

}  // namespace
}  // namespace transfr
