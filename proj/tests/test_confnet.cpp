#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "sstd/confnet.hpp"

using namespace sstd;

namespace {

ConfusionNetwork net_of(std::vector<std::vector<Hypothesis>> slots) {
  ConfusionNetwork net;
  net.utterance_id = "u";
  for (auto& s : slots) net.slots.push_back({std::move(s), std::nullopt, std::nullopt});
  return net;
}

LexiconTrie trie_of(std::initializer_list<const char*> words) {
  std::vector<LexiconEntry> lex;
  for (const char* w : words) lex.push_back({w, util::utf8_chars(w), {}});
  return build_trie(lex);
}

bool subset(const std::vector<ConfnetMatch>& a, const std::vector<ConfnetMatch>& b) {
  return std::all_of(a.begin(), a.end(), [&](const ConfnetMatch& m) {
    return std::any_of(b.begin(), b.end(), [&](const ConfnetMatch& o) { return o.key() == m.key(); });
  });
}

}  // namespace

TEST(Confnet, ParseSchemaExample) {
  const auto net = parse_confnet(R"({"utterance_id":"u1","slots":[
    {"hyps":[{"phone":"a","prob":0.6},{"phone":"b","prob":0.4}]},
    {"hyps":[{"phone":"b","prob":0.7},{"phone":"c","prob":0.3}]}]})");
  EXPECT_EQ(net.utterance_id, "u1");
  ASSERT_EQ(net.slots.size(), 2u);
  EXPECT_EQ(net.slots[1].hyps[1].phone, "c");
  EXPECT_EQ(parse_confnet(to_json(net)).slots.size(), 2u);
}

TEST(Confnet, AscendingProbabilitiesRejected) {
  try {
    parse_confnet(R"({"utterance_id":"u","slots":[{"hyps":[{"phone":"a","prob":0.4},{"phone":"b","prob":0.6}]}]})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invariant_violation);
  }
}

TEST(Confnet, OtherInvariants) {
  const auto bad = [](const char* slots) {
    try {
      parse_confnet(std::string(R"({"utterance_id":"u","slots":)") + slots + "}");
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::invalid_argument;
  };
  EXPECT_EQ(bad(R"([{"hyps":[]}])"), Errc::invariant_violation);
  EXPECT_EQ(bad(R"([{"hyps":[{"phone":"a","prob":0.7},{"phone":"b","prob":0.6}]}])"), Errc::invariant_violation);
  EXPECT_EQ(bad(R"([{"hyps":[{"phone":"a","prob":1.5}]}])"), Errc::invariant_violation);
  EXPECT_EQ(bad(R"([{"hyps":[{"phone":"a","prob":0.5},{"phone":"a","prob":0.2}]}])"), Errc::invariant_violation);
  EXPECT_EQ(bad(R"([{"start_s":2,"end_s":1,"hyps":[{"phone":"a","prob":0.5}]}])"), Errc::invariant_violation);
  EXPECT_EQ(bad(R"(nope)"), Errc::parse_error);
}

TEST(Confnet, EmptyNetwork) {
  const auto net = parse_confnet(R"({"utterance_id":"u","slots":[]})");
  EXPECT_TRUE(net.slots.empty());
  const auto trie = trie_of({"ab"});
  EXPECT_TRUE(greedy_search(net, trie).empty());
  EXPECT_TRUE(oracle_search(net, trie).empty());
}

TEST(Prune, FilterSemantics) {
  const auto net = net_of({{{"a", 0.6}, {"b", 0.25}, {"c", 0.15}}, {{"a", 0.15}, {"b", 0.10}}});
  const auto p = prune(net, 0.2);
  ASSERT_EQ(p.slots[0].hyps.size(), 2u);
  EXPECT_EQ(p.slots[0].hyps[1].phone, "b");
  ASSERT_EQ(p.slots[1].hyps.size(), 1u);
  EXPECT_EQ(p.slots[1].hyps[0].phone, "a");
  EXPECT_EQ(prune(net, 0.0).slots[0].hyps.size(), 3u);
  EXPECT_EQ(prune(net, 0.0).slots[1].hyps.size(), 2u);
}

TEST(Greedy, RestartsAndEndsOnBun) {
  const auto trie = trie_of({"manu", "bun"});
  const auto net = net_of({{{"m", 0.9}, {"b", 0.1}},
                           {{"a", 1.0}},
                           {{"n", 1.0}},
                           {{"b", 0.8}, {"x", 0.2}},
                           {{"u", 1.0}},
                           {{"n", 1.0}}});
  const auto g = greedy_search(net, trie);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g[0].word, "bun");
  EXPECT_EQ(g[0].start_slot, 3u);
  EXPECT_EQ(g[0].end_slot, 5u);
}

TEST(Greedy, AbExample) {
  const auto trie = trie_of({"ab"});
  const auto net = net_of({{{"a", 0.6}, {"x", 0.4}}, {{"b", 0.7}, {"c", 0.3}}});
  const auto g = greedy_search(net, trie);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g[0].word, "ab");
  EXPECT_EQ(g[0].start_slot, 0u);
  EXPECT_EQ(g[0].end_slot, 1u);
  EXPECT_DOUBLE_EQ(g[0].score, 0.42);
  const auto o = oracle_search(net, trie);
  ASSERT_EQ(o.size(), 1u);
  EXPECT_EQ(o[0].key(), g[0].key());
}

TEST(Greedy, FollowsLowerRankedHypothesis) {
  const auto trie = trie_of({"ab"});
  const auto net = net_of({{{"x", 0.5}, {"a", 0.4}}, {{"c", 0.6}, {"b", 0.3}}});
  const auto g = greedy_search(net, trie);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_DOUBLE_EQ(g[0].score, 0.4 * 0.3);
  SearchParams top1;
  top1.top_k = 1;
  EXPECT_TRUE(greedy_search(net, trie, top1).empty());
}

TEST(Greedy, PrefersLongerWord) {
  const auto trie = trie_of({"ab", "abc"});
  const auto net = net_of({{{"a", 1.0}}, {{"b", 1.0}}, {{"c", 1.0}}});
  const auto g = greedy_search(net, trie);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g[0].word, "abc");
}

TEST(Greedy, ShortWordsIgnored) {
  const auto trie = trie_of({"a", "ab"});
  const auto net = net_of({{{"a", 1.0}}, {{"x", 1.0}}, {{"a", 1.0}}, {{"b", 1.0}}});
  const auto g = greedy_search(net, trie);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g[0].word, "ab");
  SearchParams one;
  one.min_word_phones = 1;
  EXPECT_EQ(greedy_search(net, trie, one).size(), 2u);
}

TEST(Greedy, EmptyLexicon) {
  const LexiconTrie empty;
  const auto net = net_of({{{"a", 1.0}}});
  EXPECT_TRUE(greedy_search(net, empty).empty());
  EXPECT_TRUE(oracle_search(net, empty).empty());
}

TEST(Oracle, TwoCombinations) {
  const auto trie = trie_of({"ab", "aa"});
  const auto net = net_of({{{"a", 0.9}}, {{"b", 0.6}, {"a", 0.4}}});
  const auto o = oracle_search(net, trie);
  ASSERT_EQ(o.size(), 2u);
  EXPECT_EQ(o[0].word, "aa");
  EXPECT_EQ(o[1].word, "ab");
  for (const auto& m : o) {
    EXPECT_EQ(m.start_slot, 0u);
    EXPECT_EQ(m.end_slot, 1u);
  }
}

TEST(Oracle, SizeGuard) {
  const auto trie = trie_of({"ab"});
  std::vector<std::vector<Hypothesis>> slots(5, {{"a", 1.0}});
  SearchParams p;
  p.oracle_max_slots = 4;
  try {
    oracle_search(net_of(slots), trie, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::network_too_large);
  }
}

TEST(Oracle, ThresholdMonotone) {
  const auto trie = trie_of({"ab", "ba", "abc"});
  const auto net = net_of({{{"a", 0.5}, {"b", 0.3}, {"c", 0.15}}, {{"b", 0.55}, {"a", 0.19}}, {{"c", 0.12}, {"a", 0.11}}});
  const auto o2 = oracle_search(prune(net, 0.2), trie);
  const auto o1 = oracle_search(prune(net, 0.1), trie);
  const auto o0 = oracle_search(net, trie);
  EXPECT_TRUE(subset(o2, o1));
  EXPECT_TRUE(subset(o1, o0));
  EXPECT_LT(o2.size(), o0.size());
}

TEST(Greedy, SoundAgainstOracle) {
  std::mt19937_64 rng(31);
  const std::vector<std::string> alpha{"a", "b", "c", "d"};
  for (int trial = 0; trial < 300; ++trial) {
    const auto lex = oracle::random_lexicon(rng, alpha, 12);
    const auto trie = build_trie(lex);
    const auto net = oracle::random_network(rng, alpha, 8, 4);
    validate(net);
    const auto g = greedy_search(net, trie);
    const auto o = oracle_search(net, trie);
    EXPECT_TRUE(subset(g, o));
    for (const auto& m : g) {
      const auto words = trie.lookup(m.phones);
      EXPECT_TRUE(std::find(words.begin(), words.end(), m.word) != words.end());
      EXPECT_EQ(m.end_slot + 1 - m.start_slot, m.phones.size());
    }
  }
}

TEST(Confnet, OneBestAndTopK) {
  const auto net = net_of({{{"a", 0.6}, {"b", 0.3}, {"c", 0.1}}, {{"d", 1.0}}});
  EXPECT_EQ(one_best(net), (PhoneSeq{"a", "d"}));
  EXPECT_EQ(truncate_top_k(net, 2).slots[0].hyps.size(), 2u);
}

TEST(Confnet, MatchTimes) {
  auto net = net_of({{{"a", 1.0}}, {{"b", 1.0}}});
  net.slots[0].start_s = 0.1;
  net.slots[0].end_s = 0.2;
  net.slots[1].start_s = 0.2;
  net.slots[1].end_s = 0.35;
  const auto g = greedy_search(net, trie_of({"ab"}));
  ASSERT_EQ(g.size(), 1u);
  const auto t = match_time(net, g[0]);
  ASSERT_TRUE(t);
  EXPECT_DOUBLE_EQ(t->first, 0.1);
  EXPECT_DOUBLE_EQ(t->second, 0.35);
}
