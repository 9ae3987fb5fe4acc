#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "sstd/dtw.hpp"

using namespace sstd;

namespace {

FeatureMatrix concat(std::initializer_list<const FeatureMatrix*> parts, std::string id) {
  FeatureMatrix out;
  out.dim = (*parts.begin())->dim;
  out.utterance_id = std::move(id);
  for (auto* p : parts) out.data.insert(out.data.end(), p->data.begin(), p->data.end());
  return out;
}

}  // namespace

TEST(Dtw, SelfDistanceIsZero) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    const auto x = oracle::random_matrix(rng, 1 + i % 9, 3);
    EXPECT_EQ(dtw_distance(x, x), 0.0);
  }
}

TEST(Dtw, SingleCell) {
  const auto a = FeatureMatrix::from_rows({{0}});
  const auto b = FeatureMatrix::from_rows({{3}});
  EXPECT_EQ(dtw_distance(a, b), 3.0);
}

TEST(Dtw, MatchesPathEnumeration) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = oracle::random_matrix(rng, 1 + rng() % 7, 2);
    const auto b = oracle::random_matrix(rng, 1 + rng() % 7, 2);
    EXPECT_EQ(dtw_distance(a, b), oracle::dtw_brute(a, b));
    DtwParams cos;
    cos.distance = Distance::cosine;
    EXPECT_EQ(dtw_distance(a, b, cos), oracle::dtw_brute(a, b, Distance::cosine));
  }
}

TEST(Dtw, Symmetric) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = oracle::random_matrix(rng, 1 + rng() % 10, 4);
    const auto b = oracle::random_matrix(rng, 1 + rng() % 10, 4);
    EXPECT_DOUBLE_EQ(dtw_distance(a, b), dtw_distance(b, a));
  }
}

TEST(Dtw, BandNeverBeatsUnbanded) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = oracle::random_matrix(rng, 2 + rng() % 10, 3);
    const auto b = oracle::random_matrix(rng, 2 + rng() % 10, 3);
    DtwParams banded;
    banded.band_width = 1;
    const double full = dtw_distance(a, b);
    const double narrow = dtw_distance(a, b, banded);
    EXPECT_TRUE(std::isfinite(narrow));
    // A wide enough band is the unbanded problem.
    banded.band_width = 20;
    EXPECT_EQ(dtw_distance(a, b, banded), full);
  }
}

TEST(Dtw, Errors) {
  const auto a = FeatureMatrix::from_rows({{0, 1}});
  const auto b = FeatureMatrix::from_rows({{0}});
  try {
    dtw_distance(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::dimension_mismatch);
  }
  try {
    dtw_distance(a, FeatureMatrix{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::empty_input);
  }
}

TEST(Subsequence, EmbeddedCopyFoundExactly) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const auto q = oracle::random_matrix(rng, 3 + rng() % 6, 4);
    const auto pre = oracle::random_matrix(rng, 1 + rng() % 8, 4);
    const auto suf = oracle::random_matrix(rng, 1 + rng() % 8, 4);
    const auto u = concat({&pre, &q, &suf}, "u");
    const auto m = subsequence_search(q, u);
    EXPECT_EQ(m.score, 0.0);
    EXPECT_EQ(m.start_frame, pre.frames());
    EXPECT_EQ(m.end_frame, pre.frames() + q.frames());
  }
}

TEST(Subsequence, WholeUtterance) {
  std::mt19937_64 rng(4);
  const auto q = oracle::random_matrix(rng, 6, 3);
  const auto m = subsequence_search(q, q);
  EXPECT_EQ(m.score, 0.0);
  EXPECT_EQ(m.start_frame, 0u);
  EXPECT_EQ(m.end_frame, 6u);
}

TEST(Subsequence, MatchesSpanEnumeration) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 60; ++trial) {
    const auto q = oracle::random_matrix(rng, 1 + rng() % 5, 2);
    const auto u = oracle::random_matrix(rng, 1 + rng() % 9, 2);
    const auto m = subsequence_search(q, u);
    const auto o = oracle::span_brute(q, u);
    EXPECT_EQ(m.score, o.score);
    EXPECT_EQ(m.start_frame, o.start);
    EXPECT_EQ(m.end_frame, o.end);
  }
}

TEST(Subsequence, NeverWorseThanFullAlignment) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const auto q = oracle::random_matrix(rng, 2 + rng() % 6, 3);
    const auto u = oracle::random_matrix(rng, 2 + rng() % 12, 3);
    EXPECT_LE(subsequence_search(q, u).score, dtw_distance(q, u));
    DtwParams ob;
    ob.mode = SubsequenceMode::open_begin;
    const auto m = subsequence_search(q, u, ob);
    EXPECT_LE(m.score, dtw_distance(q, u) + 1e-12);
    EXPECT_LT(m.start_frame, m.end_frame);
  }
}

TEST(Subsequence, OpenBeginFindsEmbeddedCopy) {
  std::mt19937_64 rng(13);
  const auto q = oracle::random_matrix(rng, 5, 4);
  const auto pre = oracle::random_matrix(rng, 4, 4);
  const auto suf = oracle::random_matrix(rng, 3, 4);
  const auto u = concat({&pre, &q, &suf}, "u");
  DtwParams ob;
  ob.mode = SubsequenceMode::open_begin;
  const auto m = subsequence_search(q, u, ob);
  EXPECT_EQ(m.score, 0.0);
  EXPECT_EQ(m.start_frame, 4u);
  EXPECT_EQ(m.end_frame, 9u);
}

TEST(Rank, ExactCopyRanksFirst) {
  std::mt19937_64 rng(21);
  const auto q = oracle::random_matrix(rng, 5, 3);
  auto u0 = oracle::random_matrix(rng, 12, 3);
  u0.utterance_id = "u0";
  const auto pre = oracle::random_matrix(rng, 3, 3);
  const auto u1 = concat({&pre, &q}, "u1");
  auto u2 = oracle::random_matrix(rng, 9, 3);
  u2.utterance_id = "u2";
  std::vector<FeatureMatrix> coll{u0, u1, u2};
  const auto all = rank_candidates(q, coll, {}, 2, "spk");
  ASSERT_EQ(all.size(), 3u);
  EXPECT_EQ(all[0].utterance_id, "u1");
  EXPECT_EQ(all[0].score, 0.0);
  EXPECT_EQ(all[0].query_speaker, "spk");
  EXPECT_LE(all[0].score, all[1].score);
  EXPECT_LE(all[1].score, all[2].score);

  DtwParams top1;
  top1.n_best = 1;
  const auto one = rank_candidates(q, coll, top1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].utterance_id, "u1");
}

TEST(Rank, ParallelEqualsSerial) {
  std::mt19937_64 rng(22);
  const auto q = oracle::random_matrix(rng, 4, 3);
  std::vector<FeatureMatrix> coll;
  for (int i = 0; i < 12; ++i) {
    coll.push_back(oracle::random_matrix(rng, 5 + i, 3));
    coll.back().utterance_id = "u" + std::to_string(i);
  }
  DtwParams p;
  p.n_best = 20;
  const auto a = rank_candidates(q, coll, p, 1);
  const auto b = rank_candidates(q, coll, p, 4);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].utterance_id, b[i].utterance_id);
    EXPECT_EQ(a[i].score, b[i].score);
  }
}

TEST(Rank, AllSpansAreDisjointWithinUtterance) {
  std::mt19937_64 rng(23);
  const auto q = oracle::random_matrix(rng, 3, 2);
  const auto gap = oracle::random_matrix(rng, 4, 2);
  const auto u = concat({&q, &gap, &q}, "u");
  DtwParams p;
  p.one_per_utterance = false;
  p.n_best = 10;
  const auto ms = rank_candidates(q, std::vector<FeatureMatrix>{u}, p);
  ASSERT_GE(ms.size(), 2u);
  EXPECT_EQ(ms[0].score, 0.0);
  EXPECT_EQ(ms[1].score, 0.0);
  for (std::size_t i = 0; i < ms.size(); ++i)
    for (std::size_t j = i + 1; j < ms.size(); ++j)
      EXPECT_TRUE(ms[i].end_frame <= ms[j].start_frame || ms[j].end_frame <= ms[i].start_frame);
}

TEST(Rank, EmptyCollection) {
  const auto q = FeatureMatrix::from_rows({{1}});
  try {
    rank_candidates(q, std::vector<FeatureMatrix>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::empty_collection);
  }
}

TEST(Rank, CsvRow) {
  DtwMatch m{"q", "utt1", 10, 25, 0.5, {}, {}};
  EXPECT_EQ(match_csv_header(), "query_id,utterance_id,start_s,end_s,score");
  EXPECT_EQ(to_csv_row(m, 0.01), "q,utt1,0.100000,0.250000,0.500000");
}

TEST(FrameDistance, Cosine) {
  const std::vector<float> a{1, 0}, b{0, 1}, z{0, 0};
  EXPECT_NEAR(frame_distance(a, b, Distance::cosine), 1.0, 1e-12);
  EXPECT_EQ(frame_distance(a, a, Distance::cosine), 0.0);
  EXPECT_EQ(frame_distance(a, z, Distance::cosine), 1.0);
}
