#pragma once

// Scoring: normalized Levenshtein distance over NFC codepoints, greedy
// one-to-one TP assignment, threshold sweeps and the HIPE 2020 reference
// numbers.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "zsner/corpus.hpp"
#include "zsner/unicode.hpp"
#include "zsner/util.hpp"

namespace zsner::metrics {

using corpus::EntityType;
using corpus::PeriodBin;

// Unit-cost edit distance over codepoints.
inline std::size_t levenshtein(const std::vector<char32_t>& a, const std::vector<char32_t>& b) {
  const std::size_t n = a.size(), m = b.size();
  if (n == 0) return m;
  if (m == 0) return n;
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

// Strings are compared as Unicode scalar values after canonical composition,
// so composed and decomposed diacritics measure equal.
inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  return levenshtein(uni::nfc(uni::utf8_decode(a)), uni::nfc(uni::utf8_decode(b)));
}

inline double normalized_levenshtein(const std::vector<char32_t>& a,
                                     const std::vector<char32_t>& b) {
  std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 0.0;
  return static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

inline double normalized_levenshtein(std::string_view a, std::string_view b) {
  return normalized_levenshtein(uni::nfc(uni::utf8_decode(a)), uni::nfc(uni::utf8_decode(b)));
}

struct Distance {
  std::size_t raw = 0;
  double normalized = 0.0;
};

inline Distance distance(std::string_view a, std::string_view b) {
  auto ca = uni::nfc(uni::utf8_decode(a));
  auto cb = uni::nfc(uni::utf8_decode(b));
  Distance d;
  d.raw = levenshtein(ca, cb);
  std::size_t longest = std::max(ca.size(), cb.size());
  d.normalized = longest ? static_cast<double>(d.raw) / static_cast<double>(longest) : 0.0;
  return d;
}

struct Counts {
  long tp = 0;
  long fp = 0;
  long fn = 0;

  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const Counts&) const = default;
};

// One answer item as seen by the scorer: its text plus the best normalized
// distance to any window of the input sentence (absent when the sentence
// had no tokens to match against).
struct EvalPred {
  std::string text;
  std::optional<double> presence_distance;
};

namespace detail {

inline std::vector<char32_t> fold_key(std::string_view s) {
  return uni::fold(uni::nfc(uni::utf8_decode(s)));
}

}  // namespace detail

// Greedy one-to-one assignment between predictions and gold surfaces by
// ascending normalized distance, ties broken by gold sentence order then by
// prediction order. A pair is admissible when its distance is at most the
// threshold. Unassigned golds count as misses; unassigned predictions count
// as false positives only when they are not present in the sentence at the
// threshold (their best in-sentence distance exceeds it). Matching is
// case-insensitive; stored text stays verbatim.
inline Counts classify(const std::vector<EvalPred>& preds, const std::vector<std::string>& golds,
                       double threshold) {
  Counts counts;
  const std::size_t np = preds.size(), ng = golds.size();

  std::vector<std::vector<char32_t>> pk(np), gk(ng);
  for (std::size_t i = 0; i < np; ++i) pk[i] = detail::fold_key(preds[i].text);
  for (std::size_t j = 0; j < ng; ++j) gk[j] = detail::fold_key(golds[j]);

  struct Pair {
    double d;
    std::size_t gold;
    std::size_t pred;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < np; ++i)
    for (std::size_t j = 0; j < ng; ++j) {
      double d = normalized_levenshtein(pk[i], gk[j]);
      if (d <= threshold) pairs.push_back({d, j, i});
    }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.d != b.d) return a.d < b.d;
    if (a.gold != b.gold) return a.gold < b.gold;
    return a.pred < b.pred;
  });

  std::vector<bool> pred_used(np, false), gold_used(ng, false);
  for (const Pair& p : pairs) {
    if (pred_used[p.pred] || gold_used[p.gold]) continue;
    pred_used[p.pred] = true;
    gold_used[p.gold] = true;
    ++counts.tp;
  }
  counts.fn = static_cast<long>(ng) - counts.tp;
  for (std::size_t i = 0; i < np; ++i) {
    if (pred_used[i]) continue;
    bool present = preds[i].presence_distance && *preds[i].presence_distance <= threshold;
    if (!present) ++counts.fp;
  }
  return counts;
}

struct MetricsRow {
  std::string language;
  EntityType entity = EntityType::PERS;
  std::optional<PeriodBin> period;
  double threshold = 0.0;
  Counts counts;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  void finish() {
    precision = counts.tp + counts.fp ? static_cast<double>(counts.tp) / (counts.tp + counts.fp) : 0.0;
    recall = counts.tp + counts.fn ? static_cast<double>(counts.tp) / (counts.tp + counts.fn) : 0.0;
    f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
  }
};

// One scored query: everything classify needs plus the grouping keys.
struct EvalQuery {
  std::string language;
  EntityType entity = EntityType::PERS;
  PeriodBin period;
  std::vector<EvalPred> preds;
  std::vector<std::string> golds;  // in sentence order
};

inline int entity_order(EntityType t) {
  for (std::size_t i = 0; i < corpus::kEntityTypes.size(); ++i)
    if (corpus::kEntityTypes[i] == t) return static_cast<int>(i);
  return -1;
}

// Rows per (language, entity, threshold) over the whole threshold list, plus
// per-period rows at `period_threshold`. Row order is language, then entity
// in fixed type order, then overall rows before period rows, then ascending
// threshold/period.
inline std::vector<MetricsRow> sweep(const std::vector<EvalQuery>& queries,
                                     const std::vector<double>& thresholds,
                                     double period_threshold = 0.4) {
  struct Key {
    std::string language;
    int entity;
    int has_period;
    int period_start;
    double threshold;
    auto operator<=>(const Key&) const = default;
  };
  std::map<Key, Counts> cells;
  std::set<std::pair<std::string, int>> groups;
  for (const EvalQuery& q : queries) groups.insert({q.language, entity_order(q.entity)});

  // make every (language, entity) row present even when counts stay zero
  for (auto& [lang, ent] : groups) {
    for (double t : thresholds) cells[{lang, ent, 0, 0, t}];
  }
  for (const EvalQuery& q : queries) {
    for (double t : thresholds)
      cells[{q.language, entity_order(q.entity), 0, 0, t}] += classify(q.preds, q.golds, t);
    cells[{q.language, entity_order(q.entity), 1, q.period.start_year, period_threshold}] +=
        classify(q.preds, q.golds, period_threshold);
  }

  std::vector<MetricsRow> rows;
  rows.reserve(cells.size());
  for (auto& [key, counts] : cells) {
    MetricsRow row;
    row.language = key.language;
    row.entity = corpus::kEntityTypes[key.entity];
    if (key.has_period)
      row.period = PeriodBin{key.period_start, key.period_start + corpus::kBinYears};
    row.threshold = key.threshold;
    row.counts = counts;
    row.finish();
    rows.push_back(std::move(row));
  }
  return rows;
}

struct BaselineRow {
  std::string language;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// HIPE 2020 best coarse-literal fuzzy-boundary results, for report context.
inline std::vector<BaselineRow> baseline_table() {
  return {
      {"en", 0.794, 0.817, 0.806},
      {"de", 0.870, 0.886, 0.878},
      {"fr", 0.912, 0.931, 0.921},
  };
}

}  // namespace zsner::metrics
