#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sstd/error.hpp"
#include "sstd/util.hpp"

namespace sstd {

using PhoneSeq = std::vector<std::string>;

/// Separator emitted between words by the text-mode transliteration.
inline constexpr std::string_view kWordBoundary = "|";

enum class UnknownPolicy { error, skip, passthrough };

/// Bijective grapheme <-> phone table.
class G2PTable {
 public:
  G2PTable() = default;

  G2PTable(std::string language_id, std::vector<std::pair<std::string, std::string>> pairs)
      : language_id_(std::move(language_id)), pairs_(std::move(pairs)) {
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
      const auto& [g, p] = pairs_[i];
      if (g.empty() || p.empty())
        throw Error(Errc::invalid_argument, "table row " + std::to_string(i + 1) + " has an empty column");
      if (!to_phone_.emplace(g, p).second) throw Error(Errc::duplicate_entry, "grapheme '" + g + "' listed twice");
      if (!to_grapheme_.emplace(p, g).second) throw Error(Errc::duplicate_entry, "phone '" + p + "' listed twice");
      max_grapheme_bytes_ = std::max(max_grapheme_bytes_, g.size());
    }
  }

  const std::string& language_id() const { return language_id_; }
  const std::vector<std::pair<std::string, std::string>>& pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }
  std::size_t max_grapheme_bytes() const { return max_grapheme_bytes_; }

  const std::string* phone_of(std::string_view grapheme) const {
    auto it = to_phone_.find(std::string(grapheme));
    return it == to_phone_.end() ? nullptr : &it->second;
  }
  const std::string* grapheme_of(std::string_view phone) const {
    auto it = to_grapheme_.find(std::string(phone));
    return it == to_grapheme_.end() ? nullptr : &it->second;
  }
  bool has_phone(std::string_view phone) const { return grapheme_of(phone) != nullptr; }

  std::vector<std::string> phones() const {
    std::vector<std::string> out;
    for (const auto& [g, p] : pairs_) out.push_back(p);
    return out;
  }

 private:
  std::string language_id_;
  std::vector<std::pair<std::string, std::string>> pairs_;
  std::unordered_map<std::string, std::string> to_phone_;
  std::unordered_map<std::string, std::string> to_grapheme_;
  std::size_t max_grapheme_bytes_ = 0;
};

/// Kunwinjku orthography to IPA, 27 rows.
inline const G2PTable& kunwinjku_table() {
  static const G2PTable table("gup", {
                                         {"a", "ɑ"},  {"b", "b"},  {"d", "d"},  {"h", "ʔ"},  {"e", "ɛ"},  {"i", "i"},
                                         {"ch", "ʃ"}, {"y", "j"},  {"o", "ɔ"},  {"k", "k"},  {"dj", "ɟ"}, {"s", "s"},
                                         {"r", "ɻ"},  {"rr", "r"}, {"ng", "ŋ"}, {"rd", "ɖ"}, {"rl", "ɭ"}, {"nj", "ɲ"},
                                         {"rn", "ɳ"}, {"u", "u"},  {"f", "f"},  {"l", "l"},  {"m", "m"},  {"n", "n"},
                                         {"w", "w"},  {"p", "p"},  {"t", "t"},
                                     });
  return table;
}

/// Table mapping every listed character to itself (accented vowels, tone
/// marks included, become distinct phones).
inline G2PTable identity_table(const std::vector<std::string>& characters, std::string language_id = "identity") {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& c : characters) pairs.emplace_back(c, c);
  return G2PTable(std::move(language_id), std::move(pairs));
}

/// Identity table over the distinct characters of `text`, in first-seen order.
inline G2PTable identity_table_from_text(std::string_view text, std::string language_id = "identity") {
  std::vector<std::string> chars;
  for (auto& c : util::utf8_chars(text)) {
    if (util::trim(c).empty()) continue;
    if (std::find(chars.begin(), chars.end(), c) == chars.end()) chars.push_back(c);
  }
  return identity_table(chars, std::move(language_id));
}

/// TSV: grapheme<TAB>phone per line, '#' comments.
inline G2PTable load_g2p_table(const std::filesystem::path& path) {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& line : util::read_data_lines(path)) {
    auto cols = util::split(line.text, '\t');
    if (cols.size() != 2)
      throw Error(Errc::parse_error, path.string() + ":" + std::to_string(line.line_no) + ": expected 2 columns");
    pairs.emplace_back(std::string(util::trim(cols[0])), std::string(util::trim(cols[1])));
  }
  try {
    return G2PTable(path.stem().string(), std::move(pairs));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

inline std::string to_tsv(const G2PTable& table) {
  std::string out = "# grapheme\tphone\n";
  for (const auto& [g, p] : table.pairs()) out += g + "\t" + p + "\n";
  return out;
}

/// Greedy longest-match split of `text` into table graphemes.
inline std::vector<std::string> tokenize_graphemes(std::string_view text, const G2PTable& table,
                                                   UnknownPolicy policy = UnknownPolicy::error) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t len = std::min(table.max_grapheme_bytes(), text.size() - pos);
    for (; len > 0; --len)
      if (table.phone_of(text.substr(pos, len))) break;
    if (len > 0) {
      tokens.emplace_back(text.substr(pos, len));
      pos += len;
      continue;
    }
    const std::size_t clen = util::utf8_char_len(text, pos);
    switch (policy) {
      case UnknownPolicy::error: throw UnknownGraphemeError(pos, std::string(text.substr(pos, clen)));
      case UnknownPolicy::passthrough: tokens.emplace_back(text.substr(pos, clen)); break;
      case UnknownPolicy::skip: break;
    }
    pos += clen;
  }
  return tokens;
}

inline PhoneSeq to_phones(std::string_view text, const G2PTable& table, UnknownPolicy policy = UnknownPolicy::error) {
  PhoneSeq phones;
  for (auto& tok : tokenize_graphemes(text, table, policy)) {
    const std::string* p = table.phone_of(tok);
    phones.push_back(p ? *p : std::move(tok));
  }
  return phones;
}

inline std::string to_graphemes(const PhoneSeq& phones, const G2PTable& table,
                                UnknownPolicy policy = UnknownPolicy::error) {
  std::string out;
  for (const auto& ph : phones) {
    if (const std::string* g = table.grapheme_of(ph)) {
      out += *g;
      continue;
    }
    switch (policy) {
      case UnknownPolicy::error: throw Error(Errc::unknown_phone, "phone '" + ph + "' is not in the table");
      case UnknownPolicy::passthrough: out += ph; break;
      case UnknownPolicy::skip: break;
    }
  }
  return out;
}

/// Whitespace-separated words to phones with kWordBoundary between words.
inline PhoneSeq transliterate_text(std::string_view text, const G2PTable& table,
                                   UnknownPolicy policy = UnknownPolicy::error) {
  PhoneSeq out;
  for (const auto& word : util::split_ws(text)) {
    if (!out.empty()) out.emplace_back(kWordBoundary);
    auto phones = to_phones(word, table, policy);
    out.insert(out.end(), phones.begin(), phones.end());
  }
  return out;
}

/// Inverse of transliterate_text: words are joined with single spaces.
inline std::string render_text(const PhoneSeq& phones, const G2PTable& table,
                               UnknownPolicy policy = UnknownPolicy::error) {
  std::vector<std::string> words;
  PhoneSeq current;
  for (const auto& ph : phones) {
    if (ph == kWordBoundary) {
      words.push_back(to_graphemes(current, table, policy));
      current.clear();
    } else {
      current.push_back(ph);
    }
  }
  if (!current.empty() || !words.empty()) words.push_back(to_graphemes(current, table, policy));
  return util::join(words, " ");
}

}  // namespace sstd
