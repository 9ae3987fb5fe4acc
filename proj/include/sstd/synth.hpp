#pragma once

/**
 * @file synth.hpp
 * @brief Seeded synthetic corpora with known word occurrences.
 *
 * Lexicon words are built from `phones_inventory`; everything between
 * planted words comes from the disjoint `filler_inventory`, so planted
 * occurrences are the only places a lexicon word can appear in the clean
 * phone sequence. No word's phone sequence occurs inside another word's.
 *
 * Features are template-based: every phone owns one random Gaussian frame
 * vector, repeated for 3-10 frames per occurrence. A word's exemplar is the
 * exact frame slice of its first occurrence.
 *
 * Recognizer output is simulated per true phone: deletion, then substitution
 * (the true phone moves to rank 2 of the confusion slot), then insertion of a
 * random extra slot.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "sstd/audio_features.hpp"
#include "sstd/confnet.hpp"
#include "sstd/error.hpp"
#include "sstd/eval.hpp"
#include "sstd/g2p.hpp"
#include "sstd/lexicon.hpp"
#include "sstd/p2w.hpp"
#include "sstd/util.hpp"

namespace sstd {

struct NoiseRates {
  double substitution = 0.0;
  double deletion = 0.0;
  double insertion = 0.0;
};

struct SynthSpec {
  std::size_t lexicon_size = 20;
  std::size_t utterance_count = 200;
  std::size_t occurrences_per_word = 3;
  std::vector<std::string> phones_inventory{"a", "b", "d", "e", "g", "i", "k", "m", "n", "o", "p", "r", "s", "t", "u"};
  std::vector<std::string> filler_inventory{"f", "h", "l", "v", "w", "y", "z"};
  std::size_t speakers = 4;
  std::size_t min_word_phones = 2;
  std::size_t max_word_phones = 5;
  std::size_t feature_dim = 13;
  double frame_shift_s = 0.01;
  NoiseRates noise;
  std::size_t confusion_k = 5;
  std::uint64_t seed = 1;

  void validate() const {
    const auto rate_ok = [](double r) { return r >= 0.0 && r <= 1.0; };
    if (!rate_ok(noise.substitution) || !rate_ok(noise.deletion) || !rate_ok(noise.insertion))
      throw Error(Errc::invalid_argument, "noise rates must be in [0, 1]");
    if (noise.deletion >= 1.0 || noise.insertion >= 1.0)
      throw Error(Errc::invalid_argument, "deletion and insertion rates must be below 1");
    if (confusion_k < 1) throw Error(Errc::invalid_argument, "confusion_k must be >= 1");
    if (occurrences_per_word < 1 || occurrences_per_word > utterance_count)
      throw Error(Errc::invalid_argument, "occurrences_per_word must be in [1, utterance_count]");
    if (min_word_phones < 1 || min_word_phones > max_word_phones)
      throw Error(Errc::invalid_argument, "need 1 <= min_word_phones <= max_word_phones");
    if (phones_inventory.size() < 2 || filler_inventory.empty())
      throw Error(Errc::invalid_argument, "need at least 2 word phones and 1 filler phone");
    if (speakers < 1 || feature_dim < 1) throw Error(Errc::invalid_argument, "speakers and feature_dim must be >= 1");
    std::set<std::string> all;
    for (const auto* inv : {&phones_inventory, &filler_inventory})
      for (const auto& p : *inv) {
        if (util::utf8_chars(p).size() != 1) throw Error(Errc::invalid_argument, "phone '" + p + "' is not a single character");
        if (p == kWordBoundary) throw Error(Errc::invalid_argument, "'|' is reserved");
        if (!all.insert(p).second) throw Error(Errc::invalid_argument, "phone '" + p + "' listed twice");
      }
  }
};

struct SynthCorpus {
  G2PTable table;
  std::vector<LexiconEntry> lexicon;       ///< exemplar paths point at queries/<word>.feat
  std::vector<FeatureMatrix> queries;      ///< one per lexicon entry, same order
  std::vector<FeatureMatrix> features;     ///< one per utterance
  std::vector<PhoneStream> truth;          ///< clean phone sequences
  std::vector<PhoneStream> streams;        ///< simulated 1-best output
  std::vector<ConfusionNetwork> confnets;  ///< simulated confusion networks
  std::vector<ReferenceToken> reference;
};

namespace detail {

inline bool contains_run(const PhoneSeq& hay, const PhoneSeq& needle) {
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

}  // namespace detail

inline SynthCorpus generate(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const auto uniform_int = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  const auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  SynthCorpus c;
  std::vector<std::string> inventory = spec.phones_inventory;
  inventory.insert(inventory.end(), spec.filler_inventory.begin(), spec.filler_inventory.end());
  c.table = identity_table(inventory, "synthetic");

  // Lexicon: unique words, no repeated adjacent phones, none inside another.
  std::vector<PhoneSeq> words;
  for (std::size_t attempts = 0; words.size() < spec.lexicon_size; ++attempts) {
    if (attempts > 100000 + 1000 * spec.lexicon_size)
      throw Error(Errc::invalid_argument, "cannot build " + std::to_string(spec.lexicon_size) +
                                              " distinct words from the phone inventory");
    PhoneSeq w;
    const std::size_t len = uniform_int(spec.min_word_phones, spec.max_word_phones);
    while (w.size() < len) {
      const auto& p = spec.phones_inventory[uniform_int(0, spec.phones_inventory.size() - 1)];
      if (w.empty() || w.back() != p) w.push_back(p);
    }
    const bool clash = std::any_of(words.begin(), words.end(), [&](const PhoneSeq& o) {
      return detail::contains_run(o, w) || detail::contains_run(w, o);
    });
    if (!clash) words.push_back(std::move(w));
  }

  // Phone templates.
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::map<std::string, std::vector<float>> templates;
  for (const auto& p : inventory) {
    auto& t = templates[p];
    for (std::size_t d = 0; d < spec.feature_dim; ++d) t.push_back(static_cast<float>(gauss(rng)));
  }

  // Plant every word in distinct utterances.
  std::vector<std::vector<std::size_t>> planted(spec.utterance_count);
  std::vector<std::size_t> exemplar_utt(words.size());
  std::vector<std::size_t> order(spec.utterance_count);
  for (std::size_t w = 0; w < words.size(); ++w) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t k = 0; k < spec.occurrences_per_word; ++k) planted[order[k]].push_back(w);
    exemplar_utt[w] = order[0];
  }

  const auto utt_id = [](std::size_t u) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "utt%04zu", u);
    return std::string(buf);
  };
  const auto filler_run = [&](std::size_t lo, std::size_t hi, PhoneSeq& out) {
    const std::size_t n = uniform_int(lo, hi);
    for (std::size_t i = 0; i < n; ++i) out.push_back(spec.filler_inventory[uniform_int(0, spec.filler_inventory.size() - 1)]);
  };

  c.queries.resize(words.size());
  std::vector<std::string> exemplar_speaker(words.size());
  for (std::size_t u = 0; u < spec.utterance_count; ++u) {
    const std::string id = utt_id(u);
    const std::string speaker = "spk" + std::to_string(uniform_int(0, spec.speakers - 1));
    auto& words_here = planted[u];
    std::shuffle(words_here.begin(), words_here.end(), rng);

    PhoneStream truth{id, speaker, {}, {}};
    struct Placed {
      std::size_t word, first_phone;
    };
    std::vector<Placed> placed;
    if (words_here.empty()) {
      filler_run(3, 8, truth.phones);
    } else {
      filler_run(1, 3, truth.phones);
      for (auto w : words_here) {
        placed.push_back({w, truth.phones.size()});
        truth.phones.insert(truth.phones.end(), words[w].begin(), words[w].end());
        filler_run(1, 3, truth.phones);
      }
    }

    FeatureMatrix fm;
    fm.utterance_id = id;
    fm.dim = spec.feature_dim;
    fm.frame_shift_s = spec.frame_shift_s;
    fm.frame_length_s = spec.frame_shift_s;
    std::vector<std::size_t> phone_start(truth.phones.size() + 1);
    for (std::size_t i = 0; i < truth.phones.size(); ++i) {
      phone_start[i] = fm.frames();
      const std::size_t dur = uniform_int(3, 10);
      for (std::size_t f = 0; f < dur; ++f) fm.append(templates.at(truth.phones[i]));
    }
    phone_start[truth.phones.size()] = fm.frames();

    for (const auto& pl : placed) {
      const std::size_t b = phone_start[pl.first_phone];
      const std::size_t e = phone_start[pl.first_phone + words[pl.word].size()];
      const bool exemplar = exemplar_utt[pl.word] == u;
      c.reference.push_back({id, util::join(words[pl.word], ""), b * spec.frame_shift_s, e * spec.frame_shift_s,
                             speaker, exemplar});
      if (exemplar) {
        c.queries[pl.word] = fm.slice(b, e);
        c.queries[pl.word].utterance_id = util::join(words[pl.word], "");
        exemplar_speaker[pl.word] = speaker;
      }
    }

    // Simulated recognizer output.
    ConfusionNetwork net{id, speaker, {}};
    const auto random_other = [&](const std::set<std::string>& exclude) {
      std::vector<std::string> pool;
      for (const auto& p : inventory)
        if (!exclude.count(p)) pool.push_back(p);
      return pool[uniform_int(0, pool.size() - 1)];
    };
    const auto make_slot = [&](const std::string& top, const std::string* second, double p1) {
      Slot slot;
      std::set<std::string> used{top};
      slot.hyps.push_back({top, p1});
      std::vector<std::string> rest;
      if (second && spec.confusion_k >= 2) {
        rest.push_back(*second);
        used.insert(*second);
      }
      while (1 + rest.size() < spec.confusion_k && used.size() < inventory.size()) {
        rest.push_back(random_other(used));
        used.insert(rest.back());
      }
      double wsum = 0.0;
      for (std::size_t j = 0; j < rest.size(); ++j) wsum += std::ldexp(1.0, -static_cast<int>(j));
      for (std::size_t j = 0; j < rest.size(); ++j)
        slot.hyps.push_back({rest[j], (1.0 - p1) * std::ldexp(1.0, -static_cast<int>(j)) / wsum});
      return slot;
    };
    for (const auto& ph : truth.phones) {
      if (uniform(0.0, 1.0) < spec.noise.deletion) continue;
      if (uniform(0.0, 1.0) < spec.noise.substitution) {
        net.slots.push_back(make_slot(random_other({ph}), &ph, uniform(0.5, 0.7)));
      } else {
        net.slots.push_back(make_slot(ph, nullptr, uniform(0.55, 0.95)));
      }
      if (uniform(0.0, 1.0) < spec.noise.insertion)
        net.slots.push_back(make_slot(inventory[uniform_int(0, inventory.size() - 1)], nullptr, uniform(0.5, 0.7)));
    }
    validate(net);

    c.streams.push_back({id, speaker, one_best(net), {}});
    c.confnets.push_back(std::move(net));
    c.truth.push_back(std::move(truth));
    c.features.push_back(std::move(fm));
  }

  for (std::size_t w = 0; w < words.size(); ++w) {
    const std::string orth = util::join(words[w], "");
    c.lexicon.push_back({orth, words[w], {{std::filesystem::path("queries") / (orth + ".feat"), exemplar_speaker[w]}}});
  }
  return c;
}

/// Writes the corpus in the on-disk formats read by the CLI:
///   lexicon.tsv g2p.tsv reference.json streams.tsv truth.tsv
///   features/<utt>.feat queries/<word>.feat confnets/<utt>.json
inline void write_corpus(const SynthCorpus& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  util::write_text_file(dir / "g2p.tsv", to_tsv(c.table));
  util::write_text_file(dir / "lexicon.tsv", to_tsv(c.lexicon));
  util::write_text_file(dir / "reference.json", to_json(c.reference));
  util::write_text_file(dir / "streams.tsv", to_tsv(c.streams));
  util::write_text_file(dir / "truth.tsv", to_tsv(c.truth));
  for (const auto& f : c.features) write_features(dir / "features" / (f.utterance_id + ".feat"), f);
  for (const auto& q : c.queries) write_features(dir / "queries" / (q.utterance_id + ".feat"), q);
  for (const auto& n : c.confnets) util::write_text_file(dir / "confnets" / (n.utterance_id + ".json"), to_json(n));
}

}  // namespace sstd
