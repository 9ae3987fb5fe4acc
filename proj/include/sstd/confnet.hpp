#pragma once

/**
 * @file confnet.hpp
 * @brief Phone confusion networks and lexicon search over them.
 *
 * A confusion network is a sequence of slots, each holding phone hypotheses
 * sorted by descending probability. greedy_search walks the slots left to
 * right guided by the lexicon trie; oracle_search enumerates every lexicon
 * word reachable through any choice of hypotheses and serves as its
 * reference.
 */

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sstd/error.hpp"
#include "sstd/lexicon.hpp"
#include "sstd/util.hpp"

namespace sstd {

struct Hypothesis {
  std::string phone;
  double prob = 0.0;

  friend bool operator==(const Hypothesis&, const Hypothesis&) = default;
};

struct Slot {
  std::vector<Hypothesis> hyps;
  std::optional<double> start_s;
  std::optional<double> end_s;

  friend bool operator==(const Slot&, const Slot&) = default;
};

struct ConfusionNetwork {
  std::string utterance_id;
  std::string speaker;
  std::vector<Slot> slots;

  friend bool operator==(const ConfusionNetwork&, const ConfusionNetwork&) = default;
};

inline constexpr double kProbSumTolerance = 1e-6;

/// Throws InvariantViolation naming the first offending slot.
inline void validate(const ConfusionNetwork& net) {
  for (std::size_t i = 0; i < net.slots.size(); ++i) {
    const auto& slot = net.slots[i];
    const auto fail = [&](const std::string& why) {
      throw Error(Errc::invariant_violation, net.utterance_id + " slot " + std::to_string(i) + ": " + why);
    };
    if (slot.hyps.empty()) fail("no hypotheses");
    double sum = 0.0;
    for (std::size_t h = 0; h < slot.hyps.size(); ++h) {
      const auto& hyp = slot.hyps[h];
      if (hyp.phone.empty()) fail("empty phone symbol");
      if (!(hyp.prob > 0.0 && hyp.prob <= 1.0)) fail("probability " + util::exact(hyp.prob) + " outside (0, 1]");
      if (h > 0 && hyp.prob > slot.hyps[h - 1].prob) fail("hypotheses not sorted by descending probability");
      for (std::size_t g = 0; g < h; ++g)
        if (slot.hyps[g].phone == hyp.phone) fail("phone '" + hyp.phone + "' appears twice");
      sum += hyp.prob;
    }
    if (sum > 1.0 + kProbSumTolerance) fail("probabilities sum to " + util::exact(sum));
    if (slot.start_s.has_value() != slot.end_s.has_value()) fail("start_s and end_s must be given together");
    if (slot.start_s && *slot.start_s > *slot.end_s) fail("start_s after end_s");
  }
}

inline ConfusionNetwork parse_confnet(std::string_view text, const std::string& origin = "<confnet>") {
  ConfusionNetwork net;
  try {
    const auto j = nlohmann::json::parse(text);
    net.utterance_id = j.at("utterance_id").get<std::string>();
    net.speaker = j.value("speaker", std::string{});
    for (const auto& js : j.at("slots")) {
      Slot slot;
      if (js.contains("start_s") && !js["start_s"].is_null()) slot.start_s = js["start_s"].get<double>();
      if (js.contains("end_s") && !js["end_s"].is_null()) slot.end_s = js["end_s"].get<double>();
      for (const auto& jh : js.at("hyps")) slot.hyps.push_back({jh.at("phone").get<std::string>(), jh.at("prob").get<double>()});
      net.slots.push_back(std::move(slot));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, origin + ": " + e.what());
  }
  validate(net);
  return net;
}

inline ConfusionNetwork load_confnet(const std::filesystem::path& path) {
  return parse_confnet(util::read_text_file(path), path.string());
}

inline std::string to_json(const ConfusionNetwork& net) {
  nlohmann::ordered_json j;
  j["utterance_id"] = net.utterance_id;
  j["speaker"] = net.speaker;
  j["slots"] = nlohmann::ordered_json::array();
  for (const auto& s : net.slots) {
    nlohmann::ordered_json js;
    if (s.start_s) js["start_s"] = *s.start_s;
    if (s.end_s) js["end_s"] = *s.end_s;
    js["hyps"] = nlohmann::ordered_json::array();
    for (const auto& h : s.hyps) js["hyps"].push_back({{"phone", h.phone}, {"prob", h.prob}});
    j["slots"].push_back(std::move(js));
  }
  return j.dump(1) + "\n";
}

/// Drops hypotheses below `threshold`; each slot keeps its top-1 regardless.
inline ConfusionNetwork prune(const ConfusionNetwork& net, double threshold) {
  ConfusionNetwork out = net;
  for (auto& slot : out.slots) {
    if (slot.hyps.size() <= 1) continue;
    auto keep_from = std::find_if(slot.hyps.begin() + 1, slot.hyps.end(),
                                  [&](const Hypothesis& h) { return h.prob < threshold; });
    slot.hyps.erase(keep_from, slot.hyps.end());
  }
  return out;
}

/// Keeps at most k hypotheses per slot.
inline ConfusionNetwork truncate_top_k(const ConfusionNetwork& net, std::size_t k) {
  ConfusionNetwork out = net;
  for (auto& slot : out.slots)
    if (slot.hyps.size() > k) slot.hyps.resize(k);
  return out;
}

/// The 1-best phone sequence (top hypothesis of every slot).
inline PhoneSeq one_best(const ConfusionNetwork& net) {
  PhoneSeq out;
  for (const auto& s : net.slots) out.push_back(s.hyps.front().phone);
  return out;
}

struct SearchParams {
  double prune_threshold = 0.0;
  std::size_t top_k = 5;
  std::size_t min_word_phones = 2;
  std::size_t oracle_max_slots = 64;

  void validate() const {
    if (!(prune_threshold >= 0.0 && prune_threshold <= 1.0))
      throw Error(Errc::invalid_argument, "prune_threshold must be in [0, 1]");
    if (top_k < 1) throw Error(Errc::invalid_argument, "top_k must be >= 1");
    if (min_word_phones < 1) throw Error(Errc::invalid_argument, "min_word_phones must be >= 1");
  }
};

/// top-k truncation followed by threshold pruning.
inline ConfusionNetwork prepare(const ConfusionNetwork& net, const SearchParams& params) {
  params.validate();
  return prune(truncate_top_k(net, params.top_k), params.prune_threshold);
}

struct ConfnetMatch {
  std::string word;
  PhoneSeq phones;
  std::size_t start_slot = 0;  ///< inclusive
  std::size_t end_slot = 0;    ///< inclusive
  std::string utterance_id;
  double score = 0.0;  ///< product of the chosen hypothesis probabilities

  auto key() const { return std::tie(start_slot, end_slot, word, phones); }
  friend bool operator==(const ConfnetMatch&, const ConfnetMatch&) = default;
};

/// Time span of a match when its boundary slots carry times.
inline std::optional<std::pair<double, double>> match_time(const ConfusionNetwork& net, const ConfnetMatch& m) {
  const auto& first = net.slots.at(m.start_slot);
  const auto& last = net.slots.at(m.end_slot);
  if (!first.start_s || !last.end_s) return std::nullopt;
  return std::make_pair(*first.start_s, *last.end_s);
}

/// Greedy trie-guided search.
///
/// At each slot the highest-probability hypothesis that extends the current
/// trie path is followed. Completed words (of at least min_word_phones) are
/// remembered and the path keeps extending to prefer longer words. When no
/// hypothesis extends the path, or the network ends, the remembered word is
/// emitted and scanning resumes after its last slot; with nothing remembered
/// scanning resumes one slot after where the dead path began.
inline std::vector<ConfnetMatch> greedy_search(const ConfusionNetwork& net, const LexiconTrie& trie,
                                               const SearchParams& params = {}) {
  params.validate();
  std::vector<ConfnetMatch> matches;
  const std::size_t n = net.slots.size();

  TrieCursor cursor(trie);
  PhoneSeq token;
  double token_score = 1.0;
  std::optional<std::size_t> save_point;
  struct Valid {
    LexiconTrie::NodeId node;
    PhoneSeq phones;
    std::size_t end_slot;
    double score;
  };
  std::optional<Valid> valid;

  std::size_t i = 0;
  while (i < n || save_point) {
    if (i < n) {
      const auto& hyps = net.slots[i].hyps;
      const std::size_t limit = std::min(hyps.size(), params.top_k);
      bool extended = false;
      for (std::size_t h = 0; h < limit; ++h) {
        if (!cursor.advance(hyps[h].phone)) continue;
        token.push_back(hyps[h].phone);
        token_score *= hyps[h].prob;
        if (!save_point) save_point = i;
        if (cursor.is_word() && token.size() >= params.min_word_phones)
          valid = Valid{cursor.node(), token, i, token_score};
        extended = true;
        break;
      }
      if (extended || !save_point) {
        ++i;
        continue;
      }
    }
    // Dead path (or end of network with a path pending).
    std::size_t resume;
    if (valid) {
      const std::size_t start = valid->end_slot + 1 - valid->phones.size();
      for (const auto& w : trie.words(valid->node))
        matches.push_back({w, valid->phones, start, valid->end_slot, net.utterance_id, valid->score});
      resume = valid->end_slot + 1;
    } else {
      resume = *save_point + 1;
    }
    cursor.reset();
    token.clear();
    token_score = 1.0;
    save_point.reset();
    valid.reset();
    i = resume;
  }
  return matches;
}

/// Every (span, hypothesis choice) whose phones spell a lexicon word of at
/// least min_word_phones, deduplicated and sorted by (start, end, word).
inline std::vector<ConfnetMatch> oracle_search(const ConfusionNetwork& net, const LexiconTrie& trie,
                                               const SearchParams& params = {}) {
  params.validate();
  if (net.slots.size() > params.oracle_max_slots)
    throw Error(Errc::network_too_large, net.utterance_id + ": " + std::to_string(net.slots.size()) +
                                             " slots exceed the oracle limit of " +
                                             std::to_string(params.oracle_max_slots));
  std::map<std::tuple<std::size_t, std::size_t, std::string, PhoneSeq>, double> found;
  PhoneSeq path;

  // Depth-first over hypothesis choices; branches leave the trie as soon as
  // no lexicon word has the chosen prefix.
  const auto explore = [&](auto&& self, std::size_t start, std::size_t slot, LexiconTrie::NodeId node,
                           double score) -> void {
    if (slot >= net.slots.size()) return;
    const auto& hyps = net.slots[slot].hyps;
    const std::size_t limit = std::min(hyps.size(), params.top_k);
    for (std::size_t h = 0; h < limit; ++h) {
      auto next = trie.child(node, hyps[h].phone);
      if (!next) continue;
      path.push_back(hyps[h].phone);
      const double s = score * hyps[h].prob;
      if (trie.is_word(*next) && path.size() >= params.min_word_phones)
        for (const auto& w : trie.words(*next)) found.emplace(std::make_tuple(start, slot, w, path), s);
      self(self, start, slot + 1, *next, s);
      path.pop_back();
    }
  };
  for (std::size_t s = 0; s < net.slots.size(); ++s) explore(explore, s, s, LexiconTrie::kRoot, 1.0);

  std::vector<ConfnetMatch> out;
  out.reserve(found.size());
  for (const auto& [k, score] : found) {
    const auto& [start, end, word, phones] = k;
    out.push_back({word, phones, start, end, net.utterance_id, score});
  }
  return out;
}

}  // namespace sstd
