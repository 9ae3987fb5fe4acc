#pragma once

/**
 * @file dtw.hpp
 * @brief Query-by-example search with dynamic time warping.
 *
 * Costs are accumulated along warping paths with steps (1,0), (0,1), (1,1).
 * The optimal path of a grid minimizes accumulated cost; among equal-cost
 * paths the longest one is taken. Its cost divided by its length is the
 * normalized score reported everywhere in this header.
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sstd/audio_features.hpp"
#include "sstd/error.hpp"
#include "sstd/util.hpp"

namespace sstd {

enum class Distance { euclidean, cosine };

enum class SubsequenceMode {
  exact,       ///< minimizes the normalized score over every span [s, e)
  open_begin,  ///< single open-begin/open-end pass, normalized at the end column
};

struct DtwParams {
  std::size_t n_best = 5;
  std::optional<std::size_t> band_width;  ///< Sakoe-Chiba radius in frames
  Distance distance = Distance::euclidean;
  SubsequenceMode mode = SubsequenceMode::exact;
  bool one_per_utterance = true;

  void validate() const {
    if (n_best < 1) throw Error(Errc::invalid_argument, "n_best must be >= 1");
    if (band_width && *band_width < 1) throw Error(Errc::invalid_argument, "band_width must be >= 1");
  }
};

struct DtwMatch {
  std::string query_id;
  std::string utterance_id;
  std::size_t start_frame = 0;  ///< inclusive
  std::size_t end_frame = 0;    ///< exclusive
  double score = 0.0;
  std::string query_speaker;
  std::string matched_speaker;

  friend bool operator==(const DtwMatch&, const DtwMatch&) = default;
};

inline double frame_distance(std::span<const float> a, std::span<const float> b, Distance metric) {
  if (metric == Distance::euclidean) {
    double acc = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
      const double diff = static_cast<double>(a[d]) - b[d];
      acc += diff * diff;
    }
    return std::sqrt(acc);
  }
  if (std::equal(a.begin(), a.end(), b.begin())) return 0.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    dot += static_cast<double>(a[d]) * b[d];
    na += static_cast<double>(a[d]) * a[d];
    nb += static_cast<double>(b[d]) * b[d];
  }
  if (na == 0.0 || nb == 0.0) return 1.0;
  return std::max(0.0, 1.0 - dot / (std::sqrt(na) * std::sqrt(nb)));
}

namespace detail {

struct PathCost {
  double cost = std::numeric_limits<double>::infinity();
  std::size_t length = 0;
  std::size_t start = 0;

  bool reachable() const { return length > 0; }
  // Lower accumulated cost wins; ties go to the longer path.
  bool better_than(const PathCost& o) const {
    if (!o.reachable()) return reachable();
    if (!reachable()) return false;
    return cost < o.cost || (cost == o.cost && length > o.length);
  }
};

inline void check_pair(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (a.empty() || b.empty()) throw Error(Errc::empty_input, "DTW needs non-empty feature matrices");
  if (a.dim != b.dim)
    throw Error(Errc::dimension_mismatch,
                "dimension " + std::to_string(a.dim) + " vs " + std::to_string(b.dim));
}

/// rows x cols frame distance matrix, row-major.
inline std::vector<double> distance_matrix(const FeatureMatrix& rows, const FeatureMatrix& cols, Distance metric) {
  std::vector<double> dist(rows.frames() * cols.frames());
  for (std::size_t i = 0; i < rows.frames(); ++i)
    for (std::size_t j = 0; j < cols.frames(); ++j)
      dist[i * cols.frames() + j] = frame_distance(rows.frame(i), cols.frame(j), metric);
  return dist;
}

inline PathCost extend(const PathCost& diag, const PathCost& up, const PathCost& left, double d) {
  PathCost best = diag;
  if (up.better_than(best)) best = up;
  if (left.better_than(best)) best = left;
  if (!best.reachable()) return best;
  return {best.cost + d, best.length + 1, best.start};
}

}  // namespace detail

/// Normalized cost of the optimal full alignment of `a` and `b`. With a band,
/// the radius is widened to |len(a) - len(b)| so the end cell stays reachable.
inline double dtw_distance(const FeatureMatrix& a, const FeatureMatrix& b, const DtwParams& params = {}) {
  detail::check_pair(a, b);
  params.validate();
  const std::size_t n = a.frames(), m = b.frames();
  const std::size_t gap = n > m ? n - m : m - n;
  const std::size_t radius = params.band_width ? std::max(*params.band_width, gap) : std::max(n, m);

  std::vector<detail::PathCost> prev(m), cur(m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      cur[j] = {};
      const std::size_t diff = i > j ? i - j : j - i;
      if (diff > radius) continue;
      const double d = frame_distance(a.frame(i), b.frame(j), params.distance);
      if (i == 0 && j == 0) {
        cur[j] = {d, 1, 0};
        continue;
      }
      const detail::PathCost none;
      cur[j] = detail::extend(i > 0 && j > 0 ? prev[j - 1] : none, i > 0 ? prev[j] : none,
                              j > 0 ? cur[j - 1] : none, d);
    }
    std::swap(prev, cur);
  }
  const auto& end = prev[m - 1];
  return end.cost / static_cast<double>(end.length);
}

namespace detail {

struct SpanScore {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  double score = std::numeric_limits<double>::infinity();
  bool valid = false;

  // Lower score first, then the longer span, then the earlier start.
  bool better_than(const SpanScore& o) const {
    if (!o.valid) return valid;
    if (!valid) return false;
    if (score != o.score) return score < o.score;
    if (end - start != o.end - o.start) return end - start > o.end - o.start;
    return start < o.start;
  }
};

/// Best-scoring span for every end frame of the utterance.
inline std::vector<SpanScore> best_span_per_end(const FeatureMatrix& query, const FeatureMatrix& utterance,
                                                const DtwParams& params) {
  check_pair(query, utterance);
  params.validate();
  const std::size_t rows = query.frames(), cols = utterance.frames();
  const auto dist = distance_matrix(query, utterance, params.distance);
  const auto at = [&](std::size_t i, std::size_t j) { return dist[i * cols + j]; };
  const std::size_t radius = params.band_width.value_or(std::numeric_limits<std::size_t>::max());
  const auto in_band = [&](std::size_t i, std::size_t offset) {
    const std::size_t diff = i > offset ? i - offset : offset - i;
    return diff <= radius;
  };

  std::vector<SpanScore> best(cols);
  const auto offer = [&](std::size_t j, const PathCost& p) {
    if (!p.reachable()) return;
    SpanScore cand{p.start, j + 1, p.cost / static_cast<double>(p.length), true};
    if (cand.better_than(best[j])) best[j] = cand;
  };

  std::vector<PathCost> prev(cols), cur(cols);
  const PathCost none;
  if (params.mode == SubsequenceMode::open_begin) {
    // Every column of the first row may start a path; the band is taken
    // relative to the diagonal through each path's own start column.
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) {
        if (i == 0) {
          cur[j] = {at(0, j), 1, j};
          if (j > 0 && in_band(0, j - cur[j - 1].start)) {
            PathCost horiz{cur[j - 1].cost + at(0, j), cur[j - 1].length + 1, cur[j - 1].start};
            if (horiz.better_than(cur[j])) cur[j] = horiz;
          }
          continue;
        }
        PathCost cand = extend(j > 0 ? prev[j - 1] : none, prev[j], j > 0 ? cur[j - 1] : none, at(i, j));
        cur[j] = cand.reachable() && in_band(i, j - cand.start) ? cand : none;
      }
      if (i + 1 < rows) std::swap(prev, cur);
    }
    for (std::size_t j = 0; j < cols; ++j) offer(j, cur[j]);
    return best;
  }

  // Exact mode: one DP per start column.
  for (std::size_t s = 0; s < cols; ++s) {
    const std::size_t width = cols - s;
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t k = 0; k < width; ++k) {
        if (!in_band(i, k)) {
          cur[k] = none;
          continue;
        }
        const double d = at(i, s + k);
        if (i == 0 && k == 0) {
          cur[k] = {d, 1, s};
          continue;
        }
        cur[k] = extend(i > 0 && k > 0 ? prev[k - 1] : none, i > 0 ? prev[k] : none, k > 0 ? cur[k - 1] : none, d);
      }
      if (i + 1 < rows) std::swap(prev, cur);
    }
    for (std::size_t k = 0; k < width; ++k) offer(s + k, cur[k]);
  }
  return best;
}

}  // namespace detail

/// Best span of `utterance` for `query`: minimizes the normalized alignment
/// score; ties prefer the longer span, then the earlier start.
inline DtwMatch subsequence_search(const FeatureMatrix& query, const FeatureMatrix& utterance,
                                   const DtwParams& params = {}) {
  const auto per_end = detail::best_span_per_end(query, utterance, params);
  detail::SpanScore best;
  for (const auto& s : per_end)
    if (s.better_than(best)) best = s;
  if (!best.valid) throw Error(Errc::empty_input, "no alignment inside the band");
  return {query.utterance_id, utterance.utterance_id, best.start, best.end, best.score, {}, {}};
}

/// Non-overlapping candidate spans of one utterance, best first.
inline std::vector<DtwMatch> subsequence_candidates(const FeatureMatrix& query, const FeatureMatrix& utterance,
                                                    const DtwParams& params = {}) {
  auto per_end = detail::best_span_per_end(query, utterance, params);
  std::erase_if(per_end, [](const detail::SpanScore& s) { return !s.valid; });
  std::sort(per_end.begin(), per_end.end(),
            [](const detail::SpanScore& a, const detail::SpanScore& b) { return a.better_than(b); });
  std::vector<detail::SpanScore> kept;
  for (const auto& s : per_end) {
    const bool overlaps = std::any_of(kept.begin(), kept.end(),
                                      [&](const detail::SpanScore& k) { return s.start < k.end && k.start < s.end; });
    if (!overlaps) kept.push_back(s);
  }
  std::vector<DtwMatch> out;
  for (const auto& s : kept) out.push_back({query.utterance_id, utterance.utterance_id, s.start, s.end, s.score, {}, {}});
  return out;
}

/// Ascending score; ties by (utterance_id, start_frame).
inline bool match_order(const DtwMatch& a, const DtwMatch& b) {
  if (a.score != b.score) return a.score < b.score;
  if (a.utterance_id != b.utterance_id) return a.utterance_id < b.utterance_id;
  return a.start_frame < b.start_frame;
}

/// The n_best lowest-score matches of `query` over `collection`. With
/// `one_per_utterance`, each utterance contributes only its best span;
/// otherwise all its non-overlapping candidates compete.
inline std::vector<DtwMatch> rank_candidates(const FeatureMatrix& query, std::span<const FeatureMatrix> collection,
                                             const DtwParams& params = {}, unsigned jobs = 1,
                                             const std::string& query_speaker = {}) {
  params.validate();
  if (collection.empty()) throw Error(Errc::empty_collection, "no utterances to search");
  std::vector<std::vector<DtwMatch>> per_utt(collection.size());
  util::parallel_for(collection.size(), jobs, [&](std::size_t u) {
    if (params.one_per_utterance)
      per_utt[u] = {subsequence_search(query, collection[u], params)};
    else
      per_utt[u] = subsequence_candidates(query, collection[u], params);
  });
  std::vector<DtwMatch> all;
  for (auto& v : per_utt)
    for (auto& m : v) {
      m.query_speaker = query_speaker;
      all.push_back(std::move(m));
    }
  std::sort(all.begin(), all.end(), match_order);
  if (all.size() > params.n_best) all.resize(params.n_best);
  return all;
}

/// CSV row: query_id,utterance_id,start_s,end_s,score
inline std::string match_csv_header() { return "query_id,utterance_id,start_s,end_s,score"; }

inline std::string to_csv_row(const DtwMatch& m, double frame_shift_s) {
  return m.query_id + "," + m.utterance_id + "," + util::fixed(m.start_frame * frame_shift_s, 6) + "," +
         util::fixed(m.end_frame * frame_shift_s, 6) + "," + util::fixed(m.score, 6);
}

}  // namespace sstd
