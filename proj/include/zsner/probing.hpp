#pragma once

// Factual probing: language identification over a WiLI-style sentence set
// and publication-date prediction over corpus documents, with free-text
// answer normalization and mean/median absolute-error scoring.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "zsner/backend.hpp"
#include "zsner/corpus.hpp"
#include "zsner/prompts.hpp"
#include "zsner/unicode.hpp"
#include "zsner/util.hpp"

namespace zsner::probe {

struct LanguageProbeResult {
  std::string ref;
  std::string gold_language;
  std::string raw_answer;
  std::optional<std::string> predicted;
  std::optional<std::string> error;
};

struct DateProbeResult {
  std::string doc_id;
  std::string language;
  int gold_year = 0;
  std::string raw_answer;
  std::optional<int> predicted_year;
  std::optional<std::string> error;

  std::optional<int> absolute_error() const {
    if (!predicted_year) return std::nullopt;
    return std::abs(*predicted_year - gold_year);
  }
};

// Case-insensitive containment, checked in fixed language order.
inline std::optional<std::string> parse_language_answer(std::string_view raw) {
  std::string folded = uni::casefold_nfc(raw);
  struct Entry {
    const char* code;
    std::vector<std::string> names;
  };
  static const std::vector<Entry> table = {
      {"en", {"english"}},
      {"de", {"german", "deutsch"}},
      {"fr", {"french", "français"}},
  };
  for (const Entry& e : table)
    for (const std::string& name : e.names)
      if (util::contains(folded, name)) return std::string(e.code);
  return std::nullopt;
}

struct LanguageAccuracy {
  long total = 0;
  long correct = 0;
  double accuracy() const { return total ? static_cast<double>(correct) / total : 0.0; }
};

// Accuracy per gold language; answers that parse to nothing count as wrong.
inline std::map<std::string, LanguageAccuracy> language_accuracy(
    const std::vector<LanguageProbeResult>& results) {
  std::map<std::string, LanguageAccuracy> acc;
  for (const LanguageProbeResult& r : results) {
    LanguageAccuracy& a = acc[r.gold_language];
    ++a.total;
    if (r.predicted && *r.predicted == r.gold_language) ++a.correct;
  }
  return acc;
}

// First run of exactly four digits whose value lies in [1400, 2100].
inline std::optional<int> parse_year(std::string_view raw) {
  std::size_t i = 0;
  while (i < raw.size()) {
    if (raw[i] < '0' || raw[i] > '9') {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < raw.size() && raw[j] >= '0' && raw[j] <= '9') ++j;
    if (j - i == 4) {
      int v = 0;
      for (std::size_t k = i; k < j; ++k) v = v * 10 + (raw[k] - '0');
      if (v >= 1400 && v <= 2100) return v;
    }
    i = j;
  }
  return std::nullopt;
}

struct DateErrorStats {
  long n_scored = 0;
  long n_unparsed = 0;
  std::optional<double> mean_abs_error;
  std::optional<double> median_abs_error;
};

// Unparseable answers are excluded from the mean/median and reported
// separately; the median of an even count averages the middle two.
inline std::map<std::string, DateErrorStats> date_errors(
    const std::vector<DateProbeResult>& results) {
  std::map<std::string, std::vector<double>> errors;
  std::map<std::string, DateErrorStats> stats;
  for (const DateProbeResult& r : results) {
    DateErrorStats& s = stats[r.language];
    if (auto err = r.absolute_error()) {
      ++s.n_scored;
      errors[r.language].push_back(static_cast<double>(*err));
    } else {
      ++s.n_unparsed;
    }
  }
  for (auto& [lang, errs] : errors) {
    if (errs.empty()) continue;
    DateErrorStats& s = stats[lang];
    double sum = 0;
    for (double e : errs) sum += e;
    s.mean_abs_error = sum / static_cast<double>(errs.size());
    std::sort(errs.begin(), errs.end());
    std::size_t n = errs.size();
    s.median_abs_error = n % 2 ? errs[n / 2] : (errs[n / 2 - 1] + errs[n / 2]) / 2.0;
  }
  return stats;
}

// --- WiLI-style sentence sets ---------------------------------------------------

struct WiliSentence {
  std::string text;
  std::string language;  // en | de | fr
};

inline std::optional<std::string> normalize_language_label(std::string_view label) {
  std::string l = uni::casefold_nfc(util::trim(label));
  if (l == "en" || l == "eng" || l == "english") return "en";
  if (l == "de" || l == "deu" || l == "ger" || l == "german") return "de";
  if (l == "fr" || l == "fra" || l == "fre" || l == "french") return "fr";
  return std::nullopt;
}

// Either one combined file with "sentence<TAB>label" lines, or a sentence
// file paired with a label file, one per line. Lines with labels outside
// en/de/fr are ignored.
inline std::vector<WiliSentence> load_wili(std::string_view sentences,
                                           std::optional<std::string_view> labels = std::nullopt) {
  std::vector<WiliSentence> out;
  std::vector<std::string> sent_lines = util::split(sentences, '\n');
  if (!sent_lines.empty() && util::trim(sent_lines.back()).empty()) sent_lines.pop_back();

  if (labels) {
    std::vector<std::string> label_lines = util::split(*labels, '\n');
    if (!label_lines.empty() && util::trim(label_lines.back()).empty()) label_lines.pop_back();
    if (label_lines.size() != sent_lines.size())
      throw ParseError("sentence and label files differ in length: " +
                       std::to_string(sent_lines.size()) + " vs " +
                       std::to_string(label_lines.size()));
    for (std::size_t i = 0; i < sent_lines.size(); ++i) {
      auto lang = normalize_language_label(label_lines[i]);
      if (!lang) continue;
      out.push_back({sent_lines[i], *lang});
    }
    return out;
  }

  std::size_t line_no = 0;
  for (const std::string& line : sent_lines) {
    ++line_no;
    if (util::trim(line).empty()) continue;
    auto tab = line.rfind('\t');
    if (tab == std::string::npos)
      throw ParseError("expected sentence<TAB>label", line_no);
    auto lang = normalize_language_label(std::string_view(line).substr(tab + 1));
    if (!lang) continue;
    out.push_back({line.substr(0, tab), *lang});
  }
  return out;
}

namespace detail {

// Deterministic across platforms, unlike std::shuffle.
struct SplitMix64 {
  std::uint64_t state;
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  // rejection sampling keeps the draw unbiased
  std::uint64_t bounded(std::uint64_t n) {
    std::uint64_t limit = ~0ull - (~0ull % n);
    std::uint64_t v;
    do {
      v = next();
    } while (v >= limit);
    return v % n;
  }
};

template <typename T>
void fisher_yates(std::vector<T>& v, SplitMix64& rng) {
  for (std::size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[rng.bounded(i)]);
}

}  // namespace detail

// Seeded sample of exactly `per_language` sentences for each of en/de/fr,
// a pure function of the input sentences, the count and the seed. Selected
// sentences keep file order within each language.
inline std::vector<WiliSentence> sample_wili_subset(const std::vector<WiliSentence>& all,
                                                    std::size_t per_language, std::uint64_t seed) {
  std::vector<WiliSentence> out;
  detail::SplitMix64 rng{seed};
  for (std::string_view lang : {"en", "de", "fr"}) {
    std::vector<std::size_t> indices;
    for (std::size_t i = 0; i < all.size(); ++i)
      if (all[i].language == lang) indices.push_back(i);
    if (indices.size() < per_language)
      throw Error("not enough " + std::string(lang) + " sentences: need " +
                  std::to_string(per_language) + ", have " + std::to_string(indices.size()));
    detail::fisher_yates(indices, rng);
    indices.resize(per_language);
    std::sort(indices.begin(), indices.end());
    for (std::size_t i : indices) out.push_back(all[i]);
  }
  return out;
}

// --- probe runners ----------------------------------------------------------------

inline std::vector<LanguageProbeResult> run_language_probe(
    const std::vector<WiliSentence>& sentences, backend::CachingBackend& backend,
    const prompt::TemplateSet& templates, int max_new_tokens = 64) {
  std::vector<backend::GenerationRequest> requests;
  requests.reserve(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    backend::GenerationRequest req;
    req.prompt = prompt::render_language_probe(templates, sentences[i].text,
                                               "wili/" + std::to_string(i))
                     .text;
    req.max_new_tokens = max_new_tokens;
    requests.push_back(std::move(req));
  }
  std::vector<backend::GenResult> replies = backend.generate_batch(requests, "probe");

  std::vector<LanguageProbeResult> results;
  results.reserve(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    LanguageProbeResult r;
    r.ref = "wili/" + std::to_string(i);
    r.gold_language = sentences[i].language;
    if (replies[i].ok) {
      r.raw_answer = replies[i].response.text;
      r.predicted = parse_language_answer(r.raw_answer);
    } else {
      r.error = replies[i].error;
    }
    results.push_back(std::move(r));
  }
  return results;
}

inline std::string document_prefix(const corpus::Document& doc, int max_tokens) {
  std::vector<std::string> words;
  for (const corpus::Sentence& sent : doc.sentences) {
    for (const corpus::Token& tok : sent.tokens) {
      if (static_cast<int>(words.size()) >= max_tokens) return util::join(words, " ");
      words.push_back(tok.surface);
    }
  }
  return util::join(words, " ");
}

// Gold year is the document's metadata year; the prompt sees the document's
// first `text_tokens` tokens.
inline std::vector<DateProbeResult> run_date_probe(const std::vector<corpus::Document>& documents,
                                                   backend::CachingBackend& backend,
                                                   const prompt::TemplateSet& templates,
                                                   int text_tokens = 100, int max_new_tokens = 64) {
  std::vector<backend::GenerationRequest> requests;
  requests.reserve(documents.size());
  for (const corpus::Document& doc : documents) {
    backend::GenerationRequest req;
    req.prompt = prompt::render_date_probe(templates, document_prefix(doc, text_tokens), doc.id).text;
    req.max_new_tokens = max_new_tokens;
    requests.push_back(std::move(req));
  }
  std::vector<backend::GenResult> replies = backend.generate_batch(requests, "probe");

  std::vector<DateProbeResult> results;
  results.reserve(documents.size());
  for (std::size_t i = 0; i < documents.size(); ++i) {
    DateProbeResult r;
    r.doc_id = documents[i].id;
    r.language = documents[i].language;
    r.gold_year = documents[i].date.year;
    if (replies[i].ok) {
      r.raw_answer = replies[i].response.text;
      r.predicted_year = parse_year(r.raw_answer);
    } else {
      r.error = replies[i].error;
    }
    results.push_back(std::move(r));
  }
  return results;
}

// --- probe reports ------------------------------------------------------------------

inline std::string language_report_csv(const std::vector<LanguageProbeResult>& results) {
  auto acc = language_accuracy(results);
  std::string out = "language,n,accuracy\n";
  for (auto& [lang, a] : acc)
    out += lang + ',' + std::to_string(a.total) + ',' + util::format_fixed(a.accuracy(), 3) + '\n';
  return out;
}

inline std::string date_report_csv(const std::vector<DateProbeResult>& results) {
  auto stats = date_errors(results);
  std::string out = "language,n_scored,n_unparsed,mean_abs_error,median_abs_error\n";
  for (auto& [lang, s] : stats) {
    out += lang + ',' + std::to_string(s.n_scored) + ',' + std::to_string(s.n_unparsed) + ',';
    out += s.mean_abs_error ? util::format_fixed(*s.mean_abs_error, 2) : "-";
    out += ',';
    out += s.median_abs_error ? util::format_fixed(*s.median_abs_error, 1) : "-";
    out += '\n';
  }
  return out;
}

}  // namespace zsner::probe
