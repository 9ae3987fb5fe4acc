#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sstd/error.hpp"
#include "sstd/g2p.hpp"
#include "sstd/lexicon.hpp"
#include "sstd/util.hpp"

namespace sstd {

/// 1-best recognizer output for one utterance.
struct PhoneStream {
  std::string utterance_id;
  std::string speaker;
  PhoneSeq phones;
  std::vector<std::pair<double, double>> times;  ///< per-symbol spans, empty when unknown

  friend bool operator==(const PhoneStream&, const PhoneStream&) = default;
};

struct StreamMatch {
  std::string word;
  std::size_t start_index = 0;  ///< inclusive
  std::size_t end_index = 0;    ///< exclusive
  std::string utterance_id;

  friend bool operator==(const StreamMatch&, const StreamMatch&) = default;
};

enum class ScanMode {
  longest,          ///< longest word at each position, consumed without overlap
  all_occurrences,  ///< every word at every position, overlaps allowed
};

/// Left-to-right longest-match scan of the stream against the lexicon trie.
/// Homophones yield one match each over the same span.
inline std::vector<StreamMatch> longest_match_scan(const PhoneStream& stream, const LexiconTrie& trie,
                                                   ScanMode mode = ScanMode::longest) {
  std::vector<StreamMatch> out;
  const auto& ph = stream.phones;
  std::size_t pos = 0;
  while (pos < ph.size()) {
    TrieCursor cursor(trie);
    std::optional<std::pair<LexiconTrie::NodeId, std::size_t>> last;  // node, end index
    for (std::size_t j = pos; j < ph.size() && cursor.advance(ph[j]); ++j) {
      if (!cursor.is_word()) continue;
      last = std::make_pair(cursor.node(), j + 1);
      if (mode == ScanMode::all_occurrences)
        for (const auto& w : cursor.words()) out.push_back({w, pos, j + 1, stream.utterance_id});
    }
    if (mode == ScanMode::longest && last) {
      for (const auto& w : trie.words(last->first)) out.push_back({w, pos, last->second, stream.utterance_id});
      pos = last->second;
    } else {
      ++pos;
    }
  }
  return out;
}

/// Phones of every word of the transcript, concatenated without boundaries.
inline PhoneStream stream_from_text(std::string_view transcript, const G2PTable& table, std::string utterance_id = {},
                                    std::string speaker = {}, UnknownPolicy policy = UnknownPolicy::error) {
  PhoneStream s{std::move(utterance_id), std::move(speaker), {}, {}};
  for (const auto& word : util::split_ws(transcript)) {
    auto phones = to_phones(word, table, policy);
    s.phones.insert(s.phones.end(), phones.begin(), phones.end());
  }
  return s;
}

/// Seconds covered by a match: per-symbol times when present, otherwise a
/// linear interpolation of symbol indices over `duration_s`.
inline std::optional<std::pair<double, double>> match_time(const PhoneStream& stream, const StreamMatch& m,
                                                           std::optional<double> duration_s = std::nullopt) {
  if (!stream.times.empty()) return std::make_pair(stream.times.at(m.start_index).first, stream.times.at(m.end_index - 1).second);
  if (!duration_s || stream.phones.empty()) return std::nullopt;
  const double per = *duration_s / static_cast<double>(stream.phones.size());
  return std::make_pair(per * m.start_index, per * m.end_index);
}

/// Stream file: utterance_id<TAB>speaker<TAB>space-separated phones, one utterance per line.
inline std::vector<PhoneStream> parse_streams(std::string_view text, const std::string& origin = "<streams>") {
  std::vector<PhoneStream> out;
  std::size_t line_no = 0;
  for (auto raw : util::split(text, '\n')) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    const auto t = util::trim(raw);
    if (t.empty() || t.front() == '#') continue;
    auto cols = util::split(raw, '\t');
    if (cols.size() < 2 || cols.size() > 3)
      throw Error(Errc::parse_error, origin + ":" + std::to_string(line_no) + ": expected 3 tab-separated columns");
    cols.resize(3);
    PhoneStream s{std::string(util::trim(cols[0])), std::string(util::trim(cols[1])), util::split_ws(cols[2]), {}};
    if (s.utterance_id.empty()) throw Error(Errc::parse_error, origin + ":" + std::to_string(line_no) + ": empty utterance id");
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<PhoneStream> load_streams(const std::filesystem::path& path) {
  return parse_streams(util::read_text_file(path), path.string());
}

inline std::string to_tsv(const std::vector<PhoneStream>& streams) {
  std::string out;
  for (const auto& s : streams) out += s.utterance_id + "\t" + s.speaker + "\t" + util::join(s.phones, " ") + "\n";
  return out;
}

}  // namespace sstd
