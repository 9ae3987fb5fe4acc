#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sstd/error.hpp"
#include "sstd/g2p.hpp"
#include "sstd/util.hpp"

namespace sstd {

struct Exemplar {
  std::filesystem::path audio;
  std::string speaker;

  friend bool operator==(const Exemplar&, const Exemplar&) = default;
};

struct LexiconEntry {
  std::string orthography;
  PhoneSeq phones;
  std::vector<Exemplar> exemplars;

  friend bool operator==(const LexiconEntry&, const LexiconEntry&) = default;
};

/// Parses lexicon TSV text:
///   orthography<TAB>phones (space-separated, optional)<TAB>exemplar path (optional)<TAB>speaker (optional)
/// Missing phones are derived from the orthography through `table`. Relative
/// exemplar paths are resolved against `base_dir`.
inline std::vector<LexiconEntry> parse_lexicon(std::string_view text, const std::string& origin,
                                               const std::filesystem::path& base_dir, const G2PTable* table,
                                               UnknownPolicy policy = UnknownPolicy::error) {
  std::vector<LexiconEntry> entries;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  for (auto raw : util::split(text, '\n')) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    const auto trimmed = util::trim(raw);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const std::string where = origin + ":" + std::to_string(line_no);

    auto cols = util::split(raw, '\t');
    if (cols.size() > 4) throw Error(Errc::parse_error, where + ": more than 4 columns");
    cols.resize(4);
    LexiconEntry e;
    e.orthography = std::string(util::trim(cols[0]));
    if (e.orthography.empty()) throw Error(Errc::parse_error, where + ": empty orthography");
    if (!seen.insert(e.orthography).second)
      throw Error(Errc::duplicate_entry, where + ": word '" + e.orthography + "' listed twice");

    e.phones = util::split_ws(cols[1]);
    try {
      if (e.phones.empty()) {
        if (!table) throw Error(Errc::parse_error, "no phones given and no g2p table");
        e.phones = to_phones(e.orthography, *table, policy);
      } else if (table && policy != UnknownPolicy::passthrough) {
        for (const auto& p : e.phones)
          if (!table->has_phone(p)) throw Error(Errc::unknown_phone, "phone '" + p + "' is not in the table");
      }
    } catch (const Error& err) {
      throw Error(err.code(), where + ": " + err.what());
    }
    if (e.phones.empty()) throw Error(Errc::parse_error, where + ": entry has no phones");

    const auto audio = util::trim(cols[2]);
    const auto speaker = util::trim(cols[3]);
    if (!audio.empty() || !speaker.empty()) {
      std::filesystem::path p(audio);
      if (!p.empty() && p.is_relative()) p = base_dir / p;
      e.exemplars.push_back({p, std::string(speaker)});
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

inline std::vector<LexiconEntry> load_lexicon(const std::filesystem::path& path, const G2PTable* table,
                                              UnknownPolicy policy = UnknownPolicy::error) {
  return parse_lexicon(util::read_text_file(path), path.string(), path.parent_path(), table, policy);
}

/// Writes entries as lexicon TSV; exemplar paths are written relative to `base_dir` when possible.
inline std::string to_tsv(const std::vector<LexiconEntry>& entries, const std::filesystem::path& base_dir = {}) {
  std::string out = "# orthography\tphones\texemplar\tspeaker\n";
  for (const auto& e : entries) {
    out += e.orthography + "\t" + util::join(e.phones, " ");
    if (!e.exemplars.empty()) {
      const auto& ex = e.exemplars.front();
      auto p = ex.audio;
      if (!base_dir.empty() && !p.empty()) p = p.lexically_relative(base_dir);
      out += "\t" + p.generic_string() + "\t" + ex.speaker;
    }
    out += "\n";
  }
  return out;
}

/// Prefix tree over lexicon phone sequences. Final nodes carry every
/// orthography spelled by that phone sequence (homophones).
class LexiconTrie {
 public:
  using NodeId = std::uint32_t;
  static constexpr NodeId kRoot = 0;

  struct Node {
    std::map<std::string, NodeId, std::less<>> children;
    std::vector<std::string> words;  ///< sorted, unique
  };

  LexiconTrie() : nodes_(1) {}

  void insert(const PhoneSeq& phones, const std::string& word) {
    if (phones.empty()) throw Error(Errc::invalid_argument, "cannot insert '" + word + "' without phones");
    NodeId cur = kRoot;
    for (const auto& p : phones) {
      auto it = nodes_[cur].children.find(p);
      if (it == nodes_[cur].children.end()) {
        const auto id = static_cast<NodeId>(nodes_.size());
        nodes_[cur].children.emplace(p, id);
        nodes_.emplace_back();
        cur = id;
      } else {
        cur = it->second;
      }
    }
    auto& words = nodes_[cur].words;
    auto pos = std::lower_bound(words.begin(), words.end(), word);
    if (pos == words.end() || *pos != word) words.insert(pos, word);
  }

  std::optional<NodeId> child(NodeId node, std::string_view phone) const {
    const auto& ch = nodes_[node].children;
    auto it = ch.find(phone);
    if (it == ch.end()) return std::nullopt;
    return it->second;
  }

  bool is_word(NodeId node) const { return !nodes_[node].words.empty(); }
  const std::vector<std::string>& words(NodeId node) const { return nodes_[node].words; }
  const Node& node(NodeId id) const { return nodes_[id]; }
  std::size_t node_count() const { return nodes_.size(); }
  bool empty() const { return nodes_.size() == 1; }

  /// Node reached by walking `phones` from the root, if every step exists.
  std::optional<NodeId> find(const PhoneSeq& phones) const {
    NodeId cur = kRoot;
    for (const auto& p : phones) {
      auto next = child(cur, p);
      if (!next) return std::nullopt;
      cur = *next;
    }
    return cur;
  }

  /// Orthographies spelled exactly by `phones` (empty when none).
  std::vector<std::string> lookup(const PhoneSeq& phones) const {
    auto n = find(phones);
    return n ? nodes_[*n].words : std::vector<std::string>{};
  }

  /// Every (phones, word) pair stored in the trie, depth-first in phone order.
  std::vector<std::pair<PhoneSeq, std::string>> entries() const {
    std::vector<std::pair<PhoneSeq, std::string>> out;
    PhoneSeq path;
    collect(kRoot, path, out);
    return out;
  }

 private:
  void collect(NodeId id, PhoneSeq& path, std::vector<std::pair<PhoneSeq, std::string>>& out) const {
    for (const auto& w : nodes_[id].words) out.emplace_back(path, w);
    for (const auto& [phone, next] : nodes_[id].children) {
      path.push_back(phone);
      collect(next, path, out);
      path.pop_back();
    }
  }

  std::vector<Node> nodes_;
};

inline LexiconTrie build_trie(const std::vector<LexiconEntry>& entries) {
  LexiconTrie trie;
  for (const auto& e : entries) {
    if (e.orthography.empty()) throw Error(Errc::invalid_argument, "lexicon entry without orthography");
    trie.insert(e.phones, e.orthography);
  }
  return trie;
}

/// Position inside a trie; one per running search.
class TrieCursor {
 public:
  explicit TrieCursor(const LexiconTrie& trie, LexiconTrie::NodeId node = LexiconTrie::kRoot)
      : trie_(&trie), node_(node) {}

  LexiconTrie::NodeId node() const { return node_; }
  bool at_root() const { return node_ == LexiconTrie::kRoot; }
  bool is_word() const { return trie_->is_word(node_); }
  const std::vector<std::string>& words() const { return trie_->words(node_); }
  const LexiconTrie& trie() const { return *trie_; }

  /// Moves to the child labelled `phone`; leaves the cursor untouched and
  /// returns false when there is none.
  bool advance(std::string_view phone) {
    auto next = trie_->child(node_, phone);
    if (!next) return false;
    node_ = *next;
    return true;
  }

  void reset() { node_ = LexiconTrie::kRoot; }

  friend bool operator==(const TrieCursor& a, const TrieCursor& b) {
    return a.trie_ == b.trie_ && a.node_ == b.node_;
  }

 private:
  const LexiconTrie* trie_;
  LexiconTrie::NodeId node_;
};

/// The advanced cursor, or nullopt for no transition.
inline std::optional<TrieCursor> step(TrieCursor cursor, std::string_view phone) {
  if (!cursor.advance(phone)) return std::nullopt;
  return cursor;
}

}  // namespace sstd
