#pragma once

/**
 * @file eval.hpp
 * @brief Scoring detections against a time-aligned word reference.
 *
 * Timed detections are paired with reference tokens of the same word and
 * utterance by intersection-over-union, greedily in descending overlap.
 * Untimed detections (phone-stream matches without timing) fall back to
 * occurrence order: the k-th detection of a word in an utterance pairs with
 * the k-th still-unmatched reference token of that word.
 */

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sstd/error.hpp"
#include "sstd/g2p.hpp"
#include "sstd/lexicon.hpp"
#include "sstd/util.hpp"

namespace sstd {

struct TimeSpan {
  double start_s = 0.0;
  double end_s = 0.0;

  friend bool operator==(const TimeSpan&, const TimeSpan&) = default;
};

inline double overlap_ratio(const TimeSpan& a, const TimeSpan& b) {
  const double inter = std::max(0.0, std::min(a.end_s, b.end_s) - std::max(a.start_s, b.start_s));
  const double uni = std::max(a.end_s, b.end_s) - std::min(a.start_s, b.start_s);
  return uni > 0.0 ? inter / uni : 0.0;
}

struct ReferenceToken {
  std::string utterance_id;
  std::string word;
  double start_s = 0.0;
  double end_s = 0.0;
  std::string speaker;
  bool from_lexicon = false;

  TimeSpan span() const { return {start_s, end_s}; }
  friend bool operator==(const ReferenceToken&, const ReferenceToken&) = default;
};

namespace method {
inline constexpr const char* dtw = "dtw";
inline constexpr const char* p2w_1best = "p2w_1best";
inline constexpr const char* p2w_confnet = "p2w_confnet";
}  // namespace method

/// Methods that search with spoken exemplars; only these get recall-no-lex.
inline bool uses_spoken_exemplars(std::string_view method_label) { return method_label.starts_with("dtw"); }

struct Detection {
  std::string method;
  std::string word;
  std::string utterance_id;
  std::optional<TimeSpan> span;  ///< absent for untimed phone-stream matches
  double score = 0.0;
  std::string query_speaker;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct MatchResult {
  std::vector<std::pair<std::size_t, std::size_t>> tp;  ///< (detection, reference) indices
  std::vector<std::size_t> fp;                          ///< detection indices
  std::vector<std::size_t> fn;                          ///< reference indices
};

inline MatchResult match_detections(const std::vector<Detection>& dets, const std::vector<ReferenceToken>& refs,
                                    double overlap_min = 0.5) {
  if (!(overlap_min > 0.0 && overlap_min <= 1.0)) throw Error(Errc::invalid_argument, "overlap_min must be in (0, 1]");
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> refs_by_key;  // (utt, word)
  for (std::size_t r = 0; r < refs.size(); ++r) refs_by_key[{refs[r].utterance_id, refs[r].word}].push_back(r);

  std::vector<char> det_used(dets.size(), 0), ref_used(refs.size(), 0);
  MatchResult res;

  struct Cand {
    double iou;
    std::size_t d, r;
  };
  std::vector<Cand> cands;
  for (std::size_t d = 0; d < dets.size(); ++d) {
    if (!dets[d].span) continue;
    auto it = refs_by_key.find({dets[d].utterance_id, dets[d].word});
    if (it == refs_by_key.end()) continue;
    for (auto r : it->second) {
      const double iou = overlap_ratio(*dets[d].span, refs[r].span());
      if (iou >= overlap_min) cands.push_back({iou, d, r});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    return std::tie(b.iou, a.d, a.r) < std::tie(a.iou, b.d, b.r);
  });
  for (const auto& c : cands) {
    if (det_used[c.d] || ref_used[c.r]) continue;
    det_used[c.d] = ref_used[c.r] = 1;
    res.tp.emplace_back(c.d, c.r);
  }

  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> untimed;
  for (std::size_t d = 0; d < dets.size(); ++d)
    if (!dets[d].span) untimed[{dets[d].utterance_id, dets[d].word}].push_back(d);
  for (auto& [key, ds] : untimed) {
    auto it = refs_by_key.find(key);
    if (it == refs_by_key.end()) continue;
    std::vector<std::size_t> free_refs;
    for (auto r : it->second)
      if (!ref_used[r]) free_refs.push_back(r);
    std::stable_sort(free_refs.begin(), free_refs.end(),
                     [&](std::size_t a, std::size_t b) { return refs[a].start_s < refs[b].start_s; });
    for (std::size_t k = 0; k < ds.size() && k < free_refs.size(); ++k) {
      det_used[ds[k]] = ref_used[free_refs[k]] = 1;
      res.tp.emplace_back(ds[k], free_refs[k]);
    }
  }

  std::sort(res.tp.begin(), res.tp.end());
  for (std::size_t d = 0; d < dets.size(); ++d)
    if (!det_used[d]) res.fp.push_back(d);
  for (std::size_t r = 0; r < refs.size(); ++r)
    if (!ref_used[r]) res.fn.push_back(r);
  return res;
}

/// Harmonic mean; 0 when both are 0.
inline double f_measure(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

struct PrfScores {
  double precision = 0.0;      ///< percent
  double recall = 0.0;         ///< percent
  double recall_no_lex = 0.0;  ///< percent
  double f_score = 0.0;        ///< percent, from regular recall
};

inline PrfScores compute_prf(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t fn_no_lex,
                             std::size_t tp_no_lex) {
  const auto pct = [](std::size_t num, std::size_t den) { return den ? 100.0 * num / den : 0.0; };
  PrfScores s;
  s.precision = pct(tp, tp + fp);
  s.recall = pct(tp, tp + fn);
  s.recall_no_lex = pct(tp_no_lex, tp_no_lex + fn_no_lex);
  s.f_score = f_measure(s.precision, s.recall);
  return s;
}

/// Unit-cost Levenshtein distance.
inline std::size_t edit_distance(const PhoneSeq& a, const PhoneSeq& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// Phone error rate in percent.
inline double per(const PhoneSeq& hyp, const PhoneSeq& ref) {
  if (ref.empty()) throw Error(Errc::empty_reference, "PER needs a non-empty reference");
  return 100.0 * static_cast<double>(edit_distance(hyp, ref)) / static_cast<double>(ref.size());
}

struct SpeakerBreakdown {
  std::optional<double> same;            ///< fraction of TPs spoken by the query speaker
  std::optional<double> different;
  std::optional<double> reference_same;  ///< same fraction over all retrievable reference tokens
  std::size_t tp_count = 0;
  std::size_t reference_count = 0;
};

/// Same/different-speaker split of true positives. The query speaker is the
/// detection's own when set, else the first exemplar speaker of the word.
/// The reference distribution covers every lexicon-word token not used as
/// an exemplar.
inline SpeakerBreakdown speaker_breakdown(const std::vector<std::pair<Detection, ReferenceToken>>& tps,
                                          const std::vector<LexiconEntry>& lexicon,
                                          const std::vector<ReferenceToken>& refs) {
  std::map<std::string, std::string> exemplar_speaker;
  for (const auto& e : lexicon)
    for (const auto& ex : e.exemplars)
      if (!ex.speaker.empty()) {
        exemplar_speaker.emplace(e.orthography, ex.speaker);
        break;
      }
  const auto speaker_of = [&](const std::string& word) -> const std::string& {
    auto it = exemplar_speaker.find(word);
    if (it == exemplar_speaker.end())
      throw Error(Errc::missing_speaker_metadata, "no exemplar speaker for '" + word + "'");
    return it->second;
  };

  SpeakerBreakdown out;
  std::size_t same = 0;
  for (const auto& [det, ref] : tps) {
    const std::string& q = det.query_speaker.empty() ? speaker_of(det.word) : det.query_speaker;
    if (ref.speaker.empty()) throw Error(Errc::missing_speaker_metadata, "reference token without speaker");
    same += ref.speaker == q;
  }
  out.tp_count = tps.size();
  if (!tps.empty()) {
    out.same = static_cast<double>(same) / tps.size();
    out.different = 1.0 - *out.same;
  }

  std::set<std::string> words;
  for (const auto& e : lexicon) words.insert(e.orthography);
  std::size_t ref_same = 0;
  for (const auto& r : refs) {
    if (r.from_lexicon || !words.count(r.word)) continue;
    ++out.reference_count;
    ref_same += r.speaker == speaker_of(r.word);
  }
  if (out.reference_count) out.reference_same = static_cast<double>(ref_same) / out.reference_count;
  return out;
}

struct MethodOverlap {
  std::size_t only_a = 0;
  std::size_t only_b = 0;
  std::size_t both = 0;
  std::size_t union_count = 0;
  double coverage = 0.0;  ///< union over reference tokens, percent
};

/// TP sets are given as reference-token indices.
inline MethodOverlap method_overlap(const std::set<std::size_t>& tps_a, const std::set<std::size_t>& tps_b,
                                    std::size_t reference_tokens) {
  MethodOverlap o;
  for (auto r : tps_a) (tps_b.count(r) ? o.both : o.only_a)++;
  for (auto r : tps_b)
    if (!tps_a.count(r)) ++o.only_b;
  o.union_count = o.only_a + o.only_b + o.both;
  o.coverage = reference_tokens ? 100.0 * o.union_count / reference_tokens : 0.0;
  return o;
}

struct WordStats {
  std::string word;
  std::size_t tp = 0, fp = 0, fn = 0;
};

struct EvalReport {
  std::string method;
  double recall = 0.0;
  std::optional<double> recall_no_lex;
  double precision = 0.0;
  double f_score = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0;
  std::size_t detections_outside_reference = 0;  ///< detections whose utterance has no reference tokens
  std::optional<SpeakerBreakdown> speakers;
  std::vector<WordStats> per_word;
  std::set<std::size_t> tp_refs;  ///< indices of matched reference tokens
};

/// Keeps the reference tokens whose word is in the lexicon.
inline std::vector<ReferenceToken> restrict_to_lexicon(const std::vector<ReferenceToken>& refs,
                                                       const std::vector<LexiconEntry>& lexicon) {
  std::set<std::string> words;
  for (const auto& e : lexicon) words.insert(e.orthography);
  std::vector<ReferenceToken> out;
  for (const auto& r : refs)
    if (words.count(r.word)) out.push_back(r);
  return out;
}

/// Scores one method's detections. `refs` must already be restricted to the
/// query lexicon. Speaker analysis runs when `lexicon` is given and carries
/// the needed speakers; otherwise it is left absent.
inline EvalReport evaluate(const std::string& method_label, const std::vector<Detection>& dets,
                           const std::vector<ReferenceToken>& refs, double overlap_min = 0.5,
                           const std::vector<LexiconEntry>* lexicon = nullptr) {
  const auto m = match_detections(dets, refs, overlap_min);
  EvalReport rep;
  rep.method = method_label;
  rep.tp = m.tp.size();
  rep.fp = m.fp.size();
  rep.fn = m.fn.size();
  std::size_t tp_no_lex = 0, fn_no_lex = 0;
  for (const auto& [d, r] : m.tp) {
    tp_no_lex += !refs[r].from_lexicon;
    rep.tp_refs.insert(r);
  }
  for (auto r : m.fn) fn_no_lex += !refs[r].from_lexicon;
  const auto s = compute_prf(rep.tp, rep.fp, rep.fn, fn_no_lex, tp_no_lex);
  rep.precision = s.precision;
  rep.recall = s.recall;
  rep.f_score = s.f_score;
  if (uses_spoken_exemplars(method_label)) rep.recall_no_lex = s.recall_no_lex;

  std::set<std::string> ref_utts;
  for (const auto& r : refs) ref_utts.insert(r.utterance_id);
  for (const auto& d : dets) rep.detections_outside_reference += !ref_utts.count(d.utterance_id);

  std::map<std::string, WordStats> words;
  for (const auto& [d, r] : m.tp) words[dets[d].word].tp++;
  for (auto d : m.fp) words[dets[d].word].fp++;
  for (auto r : m.fn) words[refs[r].word].fn++;
  for (auto& [w, st] : words) {
    st.word = w;
    rep.per_word.push_back(st);
  }

  if (lexicon) {
    std::vector<std::pair<Detection, ReferenceToken>> pairs;
    for (const auto& [d, r] : m.tp) pairs.emplace_back(dets[d], refs[r]);
    try {
      rep.speakers = speaker_breakdown(pairs, *lexicon, refs);
    } catch (const Error& e) {
      if (e.code() != Errc::missing_speaker_metadata) throw;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// File formats

inline std::vector<ReferenceToken> parse_reference(std::string_view text, const std::string& origin = "<reference>") {
  std::vector<ReferenceToken> out;
  try {
    for (const auto& j : nlohmann::json::parse(text)) {
      ReferenceToken t;
      t.utterance_id = j.at("utterance_id").get<std::string>();
      t.word = j.at("word").get<std::string>();
      t.start_s = j.at("start_s").get<double>();
      t.end_s = j.at("end_s").get<double>();
      t.speaker = j.value("speaker", std::string{});
      t.from_lexicon = j.value("from_lexicon", false);
      if (!(t.start_s < t.end_s))
        throw Error(Errc::invariant_violation, origin + ": token '" + t.word + "' in " + t.utterance_id + " has start_s >= end_s");
      out.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, origin + ": " + e.what());
  }
  return out;
}

inline std::vector<ReferenceToken> load_reference(const std::filesystem::path& path) {
  return parse_reference(util::read_text_file(path), path.string());
}

inline std::string to_json(const std::vector<ReferenceToken>& refs) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& t : refs)
    arr.push_back({{"utterance_id", t.utterance_id}, {"word", t.word}, {"start_s", t.start_s}, {"end_s", t.end_s},
                   {"speaker", t.speaker}, {"from_lexicon", t.from_lexicon}});
  return arr.dump(1) + "\n";
}

inline std::string detection_csv_header() { return "method,word,utterance_id,start_s,end_s,score"; }

inline std::string to_csv_row(const Detection& d) {
  std::string row = d.method + "," + d.word + "," + d.utterance_id + ",";
  if (d.span) row += util::fixed(d.span->start_s, 6) + "," + util::fixed(d.span->end_s, 6);
  else row += ",";
  return row + "," + util::fixed(d.score, 6);
}

inline std::string to_csv(const std::vector<Detection>& dets) {
  std::string out = detection_csv_header() + "\n";
  for (const auto& d : dets) out += to_csv_row(d) + "\n";
  return out;
}

/// Empty start_s/end_s fields mark an untimed detection.
inline std::vector<Detection> parse_detections(std::string_view text, const std::string& origin = "<detections>") {
  std::vector<Detection> out;
  std::size_t line_no = 0;
  for (auto raw : util::split(text, '\n')) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (util::trim(raw).empty()) continue;
    if (line_no == 1 && raw == detection_csv_header()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    auto cols = util::split(raw, ',');
    if (cols.size() != 6) throw Error(Errc::parse_error, where + ": expected 6 comma-separated columns");
    Detection d;
    d.method = cols[0];
    d.word = cols[1];
    d.utterance_id = cols[2];
    try {
      if (!cols[3].empty() || !cols[4].empty()) {
        d.span = TimeSpan{std::stod(cols[3]), std::stod(cols[4])};
        if (!(d.span->start_s < d.span->end_s)) throw Error(Errc::invariant_violation, where + ": start_s >= end_s");
      }
      d.score = cols[5].empty() ? 0.0 : std::stod(cols[5]);
    } catch (const std::logic_error&) {
      throw Error(Errc::parse_error, where + ": bad number");
    }
    out.push_back(std::move(d));
  }
  return out;
}

inline std::vector<Detection> load_detections(const std::filesystem::path& path) {
  return parse_detections(util::read_text_file(path), path.string());
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  const auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
  nlohmann::ordered_json j;
  j["method"] = r.method;
  j["recall_no_lex"] = opt(r.recall_no_lex);
  j["recall"] = r.recall;
  j["precision"] = r.precision;
  j["f_score"] = r.f_score;
  j["tp"] = r.tp;
  j["fp"] = r.fp;
  j["fn"] = r.fn;
  j["detections_outside_reference"] = r.detections_outside_reference;
  if (r.speakers) {
    j["speakers"] = {{"same", opt(r.speakers->same)},
                     {"different", opt(r.speakers->different)},
                     {"reference_same", opt(r.speakers->reference_same)},
                     {"tp_count", r.speakers->tp_count},
                     {"reference_count", r.speakers->reference_count}};
  } else {
    j["speakers"] = nullptr;
  }
  j["per_word"] = nlohmann::ordered_json::array();
  for (const auto& w : r.per_word) j["per_word"].push_back({{"word", w.word}, {"tp", w.tp}, {"fp", w.fp}, {"fn", w.fn}});
  return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  const auto opt = [](const nlohmann::json& v) { return v.is_null() ? std::optional<double>{} : v.get<double>(); };
  EvalReport r;
  r.method = j.at("method").get<std::string>();
  r.recall_no_lex = opt(j.at("recall_no_lex"));
  r.recall = j.at("recall").get<double>();
  r.precision = j.at("precision").get<double>();
  r.f_score = j.at("f_score").get<double>();
  r.tp = j.at("tp").get<std::size_t>();
  r.fp = j.at("fp").get<std::size_t>();
  r.fn = j.at("fn").get<std::size_t>();
  r.detections_outside_reference = j.value("detections_outside_reference", std::size_t{0});
  if (j.contains("speakers") && !j["speakers"].is_null()) {
    const auto& s = j["speakers"];
    r.speakers = SpeakerBreakdown{opt(s.at("same")), opt(s.at("different")), opt(s.at("reference_same")),
                                  s.at("tp_count").get<std::size_t>(), s.at("reference_count").get<std::size_t>()};
  }
  for (const auto& w : j.value("per_word", nlohmann::json::array()))
    r.per_word.push_back({w.at("word").get<std::string>(), w.at("tp").get<std::size_t>(), w.at("fp").get<std::size_t>(),
                          w.at("fn").get<std::size_t>()});
  return r;
}

/// Text table with columns recall-no-lex | recall | precision | F-score.
inline std::string render_table(const std::vector<EvalReport>& reports) {
  std::size_t name_w = 6;
  for (const auto& r : reports) name_w = std::max(name_w, r.method.size());
  const auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.insert(0, w - s.size(), ' ');
    return s;
  };
  const auto pct = [](double v) { return util::fixed(v, 2) + "%"; };
  std::string out = pad("method", name_w) + " | " + pad("recall-no-lex", 13) + " | " + pad("recall", 8) + " | " +
                    pad("precision", 9) + " | " + pad("F-score", 8) + "\n";
  out += std::string(name_w + 3 + 13 + 3 + 8 + 3 + 9 + 3 + 8, '-') + "\n";
  for (const auto& r : reports)
    out += pad(r.method, name_w) + " | " + pad(r.recall_no_lex ? pct(*r.recall_no_lex) : "-", 13) + " | " +
           pad(pct(r.recall), 8) + " | " + pad(pct(r.precision), 9) + " | " + pad(pct(r.f_score), 8) + "\n";
  return out;
}

}  // namespace sstd
