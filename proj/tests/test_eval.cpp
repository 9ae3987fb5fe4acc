#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>

#include "oracles.hpp"
#include "sstd/eval.hpp"

using namespace sstd;

namespace {

ReferenceToken ref(const char* utt, const char* word, double s, double e, const char* spk = "s1", bool lex = false) {
  return {utt, word, s, e, spk, lex};
}

Detection det(const char* utt, const char* word, std::optional<TimeSpan> span, const char* method = "dtw") {
  return {method, word, utt, span, 0.0, {}};
}

}  // namespace

TEST(Match, PerfectOverlap) {
  const auto m = match_detections({det("u", "w", TimeSpan{1, 2})}, {ref("u", "w", 1, 2)});
  EXPECT_EQ(m.tp.size(), 1u);
  EXPECT_TRUE(m.fp.empty());
  EXPECT_TRUE(m.fn.empty());
}

TEST(Match, NoIntersection) {
  const auto m = match_detections({det("u", "w", TimeSpan{3, 4})}, {ref("u", "w", 1, 2)});
  EXPECT_TRUE(m.tp.empty());
  EXPECT_EQ(m.fp.size(), 1u);
  EXPECT_EQ(m.fn.size(), 1u);
}

TEST(Match, SingleAssignment) {
  const auto m =
      match_detections({det("u", "w", TimeSpan{1.0, 2.0}), det("u", "w", TimeSpan{1.1, 2.0})}, {ref("u", "w", 1, 2)});
  ASSERT_EQ(m.tp.size(), 1u);
  EXPECT_EQ(m.tp[0].first, 0u);
  EXPECT_EQ(m.fp, std::vector<std::size_t>{1});
}

TEST(Match, WrongWordOrUtterance) {
  const auto m = match_detections({det("u", "x", TimeSpan{1, 2}), det("v", "w", TimeSpan{1, 2})}, {ref("u", "w", 1, 2)});
  EXPECT_TRUE(m.tp.empty());
  EXPECT_EQ(m.fp.size(), 2u);
}

TEST(Match, OverlapThreshold) {
  // IoU of [0, 1) against [0.5, 1.5) is 1/3.
  const std::vector<Detection> d{det("u", "w", TimeSpan{0.5, 1.5})};
  const std::vector<ReferenceToken> r{ref("u", "w", 0, 1)};
  EXPECT_TRUE(match_detections(d, r, 0.5).tp.empty());
  EXPECT_EQ(match_detections(d, r, 0.3).tp.size(), 1u);
}

TEST(Match, UntimedOccurrenceOrder) {
  const std::vector<ReferenceToken> r{ref("u", "w", 5, 6), ref("u", "w", 1, 2), ref("u", "x", 3, 4)};
  const std::vector<Detection> d{det("u", "w", std::nullopt, "p2w_1best"), det("u", "w", std::nullopt, "p2w_1best"),
                                 det("u", "w", std::nullopt, "p2w_1best")};
  const auto m = match_detections(d, r);
  ASSERT_EQ(m.tp.size(), 2u);
  EXPECT_EQ(m.tp[0], (std::pair<std::size_t, std::size_t>{0, 1}));
  EXPECT_EQ(m.tp[1], (std::pair<std::size_t, std::size_t>{1, 0}));
  EXPECT_EQ(m.fp, std::vector<std::size_t>{2});
  EXPECT_EQ(m.fn, std::vector<std::size_t>{2});
}

TEST(Match, CountInvariants) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0, 10);
  const char* words[] = {"a", "b", "c"};
  const char* utts[] = {"u1", "u2"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ReferenceToken> refs;
    std::vector<Detection> dets;
    for (int i = 0; i < 6; ++i) {
      const double s = u(rng);
      refs.push_back(ref(utts[rng() % 2], words[rng() % 3], s, s + 0.5));
    }
    for (int i = 0; i < 8; ++i) {
      const double s = u(rng);
      std::optional<TimeSpan> span;
      if (rng() % 3) span = TimeSpan{s, s + 0.5};
      dets.push_back(det(utts[rng() % 2], words[rng() % 3], span));
    }
    const auto m = match_detections(dets, refs);
    EXPECT_EQ(m.tp.size() + m.fn.size(), refs.size());
    EXPECT_EQ(m.tp.size() + m.fp.size(), dets.size());
    for (const auto& [d, r] : m.tp) {
      EXPECT_EQ(dets[d].word, refs[r].word);
      EXPECT_EQ(dets[d].utterance_id, refs[r].utterance_id);
    }
  }
}

TEST(Prf, KnownRows) {
  struct Row {
    double r, p, f;
  };
  for (const Row& row : {Row{33.24, 21.67, 26.24}, Row{21.18, 13.55, 16.53}})
    EXPECT_NEAR(f_measure(row.p, row.r), row.f, 0.01);
}

TEST(Prf, Counts) {
  const auto s = compute_prf(3, 1, 1, 1, 2);
  EXPECT_DOUBLE_EQ(s.precision, 75.0);
  EXPECT_DOUBLE_EQ(s.recall, 75.0);
  EXPECT_DOUBLE_EQ(s.f_score, 75.0);
  EXPECT_NEAR(s.recall_no_lex, 200.0 / 3.0, 1e-12);
  const auto z = compute_prf(0, 5, 7, 0, 0);
  EXPECT_EQ(z.precision, 0.0);
  EXPECT_EQ(z.recall, 0.0);
  EXPECT_EQ(z.f_score, 0.0);
}

TEST(Per, Examples) {
  EXPECT_EQ(per({"a", "b"}, {"a", "b"}), 0.0);
  EXPECT_DOUBLE_EQ(per({"a", "b", "c", "d"}, {"a", "x", "c", "d"}), 25.0);
  try {
    per({"a"}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::empty_reference);
  }
}

TEST(Per, BruteForceAndRelabeling) {
  std::mt19937_64 rng(23);
  const std::vector<std::string> alpha{"a", "b", "c"};
  const std::map<std::string, std::string> relabel{{"a", "q"}, {"b", "a"}, {"c", "z"}};
  for (int trial = 0; trial < 200; ++trial) {
    PhoneSeq h, r;
    for (std::size_t i = rng() % 7; i > 0; --i) h.push_back(alpha[rng() % 3]);
    for (std::size_t i = 1 + rng() % 6; i > 0; --i) r.push_back(alpha[rng() % 3]);
    EXPECT_EQ(edit_distance(h, r), oracle::edit_brute(h, 0, r, 0));
    PhoneSeq h2, r2;
    for (auto& x : h) h2.push_back(relabel.at(x));
    for (auto& x : r) r2.push_back(relabel.at(x));
    EXPECT_EQ(per(h, r), per(h2, r2));
    EXPECT_EQ(per(r, r), 0.0);
  }
}

TEST(Speakers, Fractions) {
  const std::vector<LexiconEntry> lex{{"w", {"w"}, {{"w.wav", "s1"}}}};
  const auto r1 = ref("u", "w", 0, 1, "s1");
  const auto r2 = ref("u", "w", 2, 3, "s2");
  const auto d = det("u", "w", TimeSpan{0, 1}, "p2w_1best");
  const auto all_same = speaker_breakdown({{d, r1}, {d, r1}}, lex, {r1, r2});
  EXPECT_DOUBLE_EQ(*all_same.same, 1.0);
  EXPECT_DOUBLE_EQ(*all_same.reference_same, 0.5);
  const auto half = speaker_breakdown({{d, r1}, {d, r2}}, lex, {r1, r2});
  EXPECT_DOUBLE_EQ(*half.same, 0.5);
  EXPECT_DOUBLE_EQ(*half.different, 0.5);
  const auto none = speaker_breakdown({}, lex, {r1, r2});
  EXPECT_FALSE(none.same);
  EXPECT_FALSE(none.different);
}

TEST(Speakers, QuerySpeakerOnDetectionWins) {
  const std::vector<LexiconEntry> lex{{"w", {"w"}, {{"w.wav", "s1"}}}};
  auto d = det("u", "w", TimeSpan{0, 1});
  d.query_speaker = "s2";
  const auto b = speaker_breakdown({{d, ref("u", "w", 0, 1, "s2")}}, lex, {});
  EXPECT_DOUBLE_EQ(*b.same, 1.0);
}

TEST(Speakers, MissingMetadata) {
  const std::vector<LexiconEntry> lex{{"w", {"w"}, {}}};
  try {
    speaker_breakdown({{det("u", "w", TimeSpan{0, 1}), ref("u", "w", 0, 1)}}, lex, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::missing_speaker_metadata);
  }
}

TEST(Overlap, SetArithmetic) {
  const auto same = method_overlap({1, 2}, {1, 2}, 4);
  EXPECT_EQ(same.only_a, 0u);
  EXPECT_EQ(same.only_b, 0u);
  EXPECT_EQ(same.both, 2u);
  const auto disjoint = method_overlap({1}, {2, 3}, 4);
  EXPECT_EQ(disjoint.both, 0u);
  EXPECT_DOUBLE_EQ(disjoint.coverage, 75.0);
  const auto mixed = method_overlap({1, 2}, {2, 3}, 10);
  EXPECT_EQ(mixed.only_a, 1u);
  EXPECT_EQ(mixed.only_b, 1u);
  EXPECT_EQ(mixed.both, 1u);
  EXPECT_EQ(mixed.union_count, 3u);
  EXPECT_EQ(mixed.only_a + mixed.both, 2u);
}

TEST(Evaluate, RecallNoLexOnlyForExemplarMethods) {
  const std::vector<ReferenceToken> refs{ref("u", "w", 0, 1, "s1", true), ref("u", "w", 2, 3, "s2")};
  const std::vector<Detection> dets{det("u", "w", TimeSpan{0, 1})};
  const auto d = evaluate("dtw", dets, refs);
  ASSERT_TRUE(d.recall_no_lex);
  EXPECT_DOUBLE_EQ(*d.recall_no_lex, 0.0);
  EXPECT_DOUBLE_EQ(d.recall, 50.0);
  EXPECT_DOUBLE_EQ(d.precision, 100.0);
  EXPECT_FALSE(evaluate("p2w_1best", dets, refs).recall_no_lex);
}

TEST(Evaluate, DetectionsOutsideReference) {
  const auto rep = evaluate("dtw", {det("zz", "w", TimeSpan{0, 1}), det("zz", "w", TimeSpan{2, 3})},
                            {ref("u", "w", 0, 1)});
  EXPECT_EQ(rep.fp, 2u);
  EXPECT_EQ(rep.detections_outside_reference, 2u);
}

TEST(Evaluate, ReportJsonRoundTripAndTable) {
  const std::vector<LexiconEntry> lex{{"w", {"w"}, {{"w.wav", "s1"}}}};
  const auto rep = evaluate("dtw", {det("u", "w", TimeSpan{0, 1})}, {ref("u", "w", 0, 1)}, 0.5, &lex);
  const auto back = report_from_json(nlohmann::json::parse(to_json(rep).dump()));
  EXPECT_EQ(back.tp, rep.tp);
  EXPECT_EQ(back.recall_no_lex, rep.recall_no_lex);
  ASSERT_TRUE(back.speakers);
  EXPECT_EQ(back.speakers->same, rep.speakers->same);
  const auto table = render_table({rep, evaluate("p2w_1best", {}, {ref("u", "w", 0, 1)})});
  EXPECT_NE(table.find("100.00%"), std::string::npos);
  EXPECT_NE(table.find(" - "), std::string::npos);
}

TEST(Files, DetectionsCsvRoundTrip) {
  const std::vector<Detection> d{{"dtw", "w", "u", TimeSpan{0.25, 0.5}, 1.5, {}},
                                 {"p2w_1best", "x", "v", std::nullopt, 1.0, {}}};
  const auto back = parse_detections(to_csv(d));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].span->start_s, 0.25);
  EXPECT_FALSE(back[1].span);
  EXPECT_EQ(back[1].method, "p2w_1best");
}

TEST(Files, ReferenceJsonRoundTrip) {
  const std::vector<ReferenceToken> r{ref("u", "w", 0.5, 1.25, "s3", true)};
  const auto back = parse_reference(to_json(r));
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].speaker, "s3");
  EXPECT_TRUE(back[0].from_lexicon);
  EXPECT_EQ(back[0].end_s, 1.25);
}
