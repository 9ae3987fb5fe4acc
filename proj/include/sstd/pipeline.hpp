#pragma once

// End-to-end detection runs shared by the command-line tool and the
// acceptance suite: each returns Detections ready for evaluate().

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sstd/audio_features.hpp"
#include "sstd/confnet.hpp"
#include "sstd/dtw.hpp"
#include "sstd/eval.hpp"
#include "sstd/lexicon.hpp"
#include "sstd/p2w.hpp"
#include "sstd/util.hpp"

namespace sstd {

/// Files of `dir` with extension `ext`, sorted by name.
inline std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir, const std::string& ext) {
  if (!std::filesystem::is_directory(dir)) throw Error(Errc::file_not_found, dir.string() + " is not a directory");
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<FeatureMatrix> load_feature_dir(const std::filesystem::path& dir) {
  std::vector<FeatureMatrix> out;
  for (const auto& p : list_files(dir, ".feat")) out.push_back(read_features(p));
  return out;
}

inline std::vector<ConfusionNetwork> load_confnet_dir(const std::filesystem::path& dir) {
  std::vector<ConfusionNetwork> out;
  for (const auto& p : list_files(dir, ".json")) out.push_back(load_confnet(p));
  std::sort(out.begin(), out.end(),
            [](const ConfusionNetwork& a, const ConfusionNetwork& b) { return a.utterance_id < b.utterance_id; });
  return out;
}

/// Features of a query exemplar: a .feat file is read as is, a .wav file goes
/// through mfcc + cmvn.
inline FeatureMatrix exemplar_features(const LexiconEntry& entry, const FeatureConfig& config = {},
                                       bool apply_cmvn = true) {
  if (entry.exemplars.empty() || entry.exemplars.front().audio.empty())
    throw Error(Errc::invalid_argument, "word '" + entry.orthography + "' has no exemplar");
  const auto& path = entry.exemplars.front().audio;
  FeatureMatrix fm;
  if (path.extension() == ".wav") {
    fm = mfcc(load_audio(path), config);
    if (apply_cmvn) fm = cmvn(fm);
  } else {
    fm = read_features(path);
  }
  fm.utterance_id = entry.orthography;
  return fm;
}

struct DtwQuery {
  std::string word;
  std::string speaker;
  FeatureMatrix features;
};

inline std::vector<DtwQuery> dtw_queries(const std::vector<LexiconEntry>& lexicon, const FeatureConfig& config = {},
                                         bool apply_cmvn = true) {
  std::vector<DtwQuery> out;
  for (const auto& e : lexicon) {
    if (e.exemplars.empty() || e.exemplars.front().audio.empty()) continue;
    out.push_back({e.orthography, e.exemplars.front().speaker, exemplar_features(e, config, apply_cmvn)});
  }
  return out;
}

inline Detection to_detection(const DtwMatch& m, const std::string& word, double frame_shift_s) {
  return {method::dtw, word, m.utterance_id,
          TimeSpan{m.start_frame * frame_shift_s, m.end_frame * frame_shift_s}, m.score, m.query_speaker};
}

struct DtwRun {
  std::vector<DtwMatch> matches;
  std::vector<Detection> detections;
};

/// Top-n matches of every query, in query order.
inline DtwRun run_dtw(const std::vector<DtwQuery>& queries, const std::vector<FeatureMatrix>& collection,
                      const DtwParams& params, unsigned jobs = 1) {
  DtwRun run;
  for (const auto& q : queries) {
    for (auto& m : rank_candidates(q.features, collection, params, jobs, q.speaker)) {
      m.query_id = q.word;
      const auto it = std::find_if(collection.begin(), collection.end(),
                                   [&](const FeatureMatrix& f) { return f.utterance_id == m.utterance_id; });
      run.detections.push_back(to_detection(m, q.word, it->frame_shift_s));
      run.matches.push_back(std::move(m));
    }
  }
  return run;
}

/// 1-best longest matching over every stream. Matches get times from
/// per-symbol spans, or from `durations` (utterance -> seconds) by
/// interpolation; otherwise they stay untimed.
inline std::vector<Detection> run_p2w(const std::vector<PhoneStream>& streams, const LexiconTrie& trie,
                                      ScanMode mode = ScanMode::longest,
                                      const std::map<std::string, double>* durations = nullptr) {
  std::vector<Detection> out;
  for (const auto& s : streams) {
    std::optional<double> dur;
    if (durations) {
      auto it = durations->find(s.utterance_id);
      if (it != durations->end()) dur = it->second;
    }
    for (const auto& m : longest_match_scan(s, trie, mode)) {
      Detection d{method::p2w_1best, m.word, m.utterance_id, std::nullopt, 1.0, {}};
      if (auto t = match_time(s, m, dur)) d.span = TimeSpan{t->first, t->second};
      out.push_back(std::move(d));
    }
  }
  return out;
}

/// Confusion-network search over every network (top-k, prune, then greedy
/// or oracle search). Networks are searched in parallel; output follows
/// network order.
inline std::vector<Detection> run_confnet(const std::vector<ConfusionNetwork>& nets, const LexiconTrie& trie,
                                          const SearchParams& params, bool oracle = false, unsigned jobs = 1,
                                          const std::string& label = method::p2w_confnet) {
  std::vector<std::vector<Detection>> per_net(nets.size());
  util::parallel_for(nets.size(), jobs, [&](std::size_t i) {
    const auto net = prepare(nets[i], params);
    const auto matches = oracle ? oracle_search(net, trie, params) : greedy_search(net, trie, params);
    for (const auto& m : matches) {
      Detection d{label, m.word, m.utterance_id, std::nullopt, m.score, {}};
      if (auto t = match_time(net, m)) d.span = TimeSpan{t->first, t->second};
      per_net[i].push_back(std::move(d));
    }
  });
  std::vector<Detection> out;
  for (auto& v : per_net) out.insert(out.end(), v.begin(), v.end());
  return out;
}

struct EvaluationSet {
  std::vector<EvalReport> reports;
  struct PairOverlap {
    std::string a, b;
    MethodOverlap overlap;
  };
  std::vector<PairOverlap> overlaps;
  std::size_t reference_tokens = 0;
};

/// One report per method label (first-seen order) plus pairwise overlaps
/// when two or more methods are present.
inline EvaluationSet evaluate_methods(const std::vector<Detection>& detections, const std::vector<ReferenceToken>& refs,
                                      double overlap_min, const std::vector<LexiconEntry>* lexicon) {
  std::vector<std::string> labels;
  std::map<std::string, std::vector<Detection>> by_method;
  for (const auto& d : detections) {
    if (!by_method.count(d.method)) labels.push_back(d.method);
    by_method[d.method].push_back(d);
  }
  EvaluationSet set;
  set.reference_tokens = refs.size();
  for (const auto& l : labels) set.reports.push_back(evaluate(l, by_method[l], refs, overlap_min, lexicon));
  for (std::size_t i = 0; i < set.reports.size(); ++i)
    for (std::size_t j = i + 1; j < set.reports.size(); ++j)
      set.overlaps.push_back({set.reports[i].method, set.reports[j].method,
                              method_overlap(set.reports[i].tp_refs, set.reports[j].tp_refs, refs.size())});
  return set;
}

inline std::string to_json(const EvaluationSet& set) {
  nlohmann::ordered_json j;
  j["reference_tokens"] = set.reference_tokens;
  j["methods"] = nlohmann::ordered_json::array();
  for (const auto& r : set.reports) j["methods"].push_back(to_json(r));
  j["overlaps"] = nlohmann::ordered_json::array();
  for (const auto& o : set.overlaps)
    j["overlaps"].push_back({{"a", o.a},
                             {"b", o.b},
                             {"only_a", o.overlap.only_a},
                             {"only_b", o.overlap.only_b},
                             {"both", o.overlap.both},
                             {"union", o.overlap.union_count},
                             {"coverage", o.overlap.coverage}});
  return j.dump(2) + "\n";
}

/// Human-readable report: the score table, speaker split and overlaps.
inline std::string render_report(const nlohmann::json& j) {
  std::vector<EvalReport> reports;
  for (const auto& m : j.at("methods")) reports.push_back(report_from_json(m));
  std::string out = render_table(reports);
  const auto pct = [](const std::optional<double>& v) { return v ? util::fixed(100.0 * *v, 2) + "%" : std::string("-"); };
  bool header = false;
  for (const auto& r : reports) {
    if (!r.speakers) continue;
    if (!header) out += "\nspeaker split (same / different / reference same)\n";
    header = true;
    out += "  " + r.method + ": " + pct(r.speakers->same) + " / " + pct(r.speakers->different) + " / " +
           pct(r.speakers->reference_same) + "\n";
  }
  if (j.contains("overlaps") && !j["overlaps"].empty()) {
    out += "\ntrue-positive overlap\n";
    for (const auto& o : j["overlaps"])
      out += "  " + o.at("a").get<std::string>() + " vs " + o.at("b").get<std::string>() +
             ": only_a=" + std::to_string(o.at("only_a").get<std::size_t>()) +
             " only_b=" + std::to_string(o.at("only_b").get<std::size_t>()) +
             " both=" + std::to_string(o.at("both").get<std::size_t>()) +
             " coverage=" + util::fixed(o.at("coverage").get<double>(), 2) + "%\n";
  }
  return out;
}

}  // namespace sstd
