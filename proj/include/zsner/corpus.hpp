#pragma once

// CLEF-HIPE style corpus handling: TSV ingestion, coarse literal IOB tags,
// entity span decoding with conventional repair, train/dev merging, 20-year
// period bins and per-split statistics.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "zsner/util.hpp"

namespace zsner::corpus {

enum class EntityType { PERS, LOC, ORG, TIME, PROD };

inline constexpr std::array<EntityType, 5> kEntityTypes = {
    EntityType::PERS, EntityType::LOC, EntityType::ORG, EntityType::TIME, EntityType::PROD};

inline std::string_view to_string(EntityType t) {
  switch (t) {
    case EntityType::PERS: return "PERS";
    case EntityType::LOC: return "LOC";
    case EntityType::ORG: return "ORG";
    case EntityType::TIME: return "TIME";
    case EntityType::PROD: return "PROD";
  }
  return "?";
}

inline std::optional<EntityType> entity_from_string(std::string_view s) {
  std::string up;
  up.reserve(s.size());
  for (char c : s) up += static_cast<char>(c >= 'a' && c <= 'z' ? c - 0x20 : c);
  for (EntityType t : kEntityTypes)
    if (up == to_string(t)) return t;
  return std::nullopt;
}

// One IOB tag from the NE-COARSE-LIT column. Unknown tag values map to
// outside rather than failing the parse.
struct Iob {
  enum class Kind { O, B, I };
  Kind kind = Kind::O;
  EntityType type = EntityType::PERS;  // meaningful iff kind != O

  bool outside() const { return kind == Kind::O; }
  bool operator==(const Iob&) const = default;
};

inline Iob parse_iob(std::string_view cell) {
  std::string_view s = util::trim(cell);
  if (s.empty() || s == "O" || s == "o" || s == "_" || s == "-") return {};
  if (s.size() > 2 && (s[1] == '-')) {
    char p = s[0];
    auto type = entity_from_string(s.substr(2));
    if (type && (p == 'B' || p == 'b')) return {Iob::Kind::B, *type};
    if (type && (p == 'I' || p == 'i')) return {Iob::Kind::I, *type};
  }
  return {};  // anything else is outside
}

inline std::string iob_to_string(const Iob& tag) {
  if (tag.outside()) return "O";
  std::string s = tag.kind == Iob::Kind::B ? "B-" : "I-";
  for (char c : to_string(tag.type)) s += static_cast<char>(c + 0x20);
  return s;
}

struct Token {
  std::string surface;
  int index = 0;  // 0-based position within the sentence
  Iob tag;

  bool operator==(const Token&) const = default;
};

struct Sentence {
  int id = 0;  // document-scoped ordinal
  std::vector<Token> tokens;

  // Single-space join; no detokenization is attempted on OCR text.
  std::string text() const {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i) out += ' ';
      out += tokens[i].surface;
    }
    return out;
  }
  bool operator==(const Sentence&) const = default;
};

struct Date {
  int year = 0;
  std::optional<int> month;
  std::optional<int> day;

  std::string to_string() const {
    std::string s = std::to_string(year);
    auto pad2 = [](int v) {
      std::string t = std::to_string(v);
      return t.size() < 2 ? "0" + t : t;
    };
    if (month) {
      s += "-" + pad2(*month);
      if (day) s += "-" + pad2(*day);
    }
    return s;
  }
  bool operator==(const Date&) const = default;
};

struct Document {
  std::string id;
  std::string language;  // en | de | fr
  Date date;
  std::vector<Sentence> sentences;

  bool operator==(const Document&) const = default;
};

struct Corpus {
  std::vector<Document> documents;
};

struct EntitySpan {
  EntityType type = EntityType::PERS;
  int start = 0;
  int end = 0;  // inclusive
  std::string surface;

  int length() const { return end - start + 1; }
  bool operator==(const EntitySpan&) const = default;
};

inline constexpr int kFirstYear = 1790;
inline constexpr int kTableEndYear = 1950;  // Table splits stop here
inline constexpr int kMaxYear = 2010;
inline constexpr int kBinYears = 20;

// Half-open [start_year, end_year) interval. Bins starting at 1950 or later
// are parsed but sit outside the reference table.
struct PeriodBin {
  int start_year = 0;
  int end_year = 0;

  bool in_table() const { return start_year < kTableEndYear; }
  std::string label() const {
    return std::to_string(start_year) + "-" + std::to_string(end_year);
  }
  bool operator==(const PeriodBin&) const = default;
  auto operator<=>(const PeriodBin&) const = default;
};

inline PeriodBin assign_period(int year) {
  if (year < kFirstYear)
    throw Error("year " + std::to_string(year) + " precedes the corpus range");
  int start = kFirstYear + kBinYears * ((year - kFirstYear) / kBinYears);
  return {start, start + kBinYears};
}

inline PeriodBin assign_period(const Document& doc) { return assign_period(doc.date.year); }

inline bool valid_language(std::string_view lang) {
  return lang == "en" || lang == "de" || lang == "fr";
}

// --- date comments ----------------------------------------------------------

inline std::optional<Date> parse_date(std::string_view text) {
  auto parts = util::split(std::string(util::trim(text)), '-');
  if (parts.empty() || parts.size() > 3) return std::nullopt;
  auto to_int = [](const std::string& s, std::size_t digits) -> std::optional<int> {
    if (s.size() != digits) return std::nullopt;
    int v = 0;
    for (char c : s) {
      if (c < '0' || c > '9') return std::nullopt;
      v = v * 10 + (c - '0');
    }
    return v;
  };
  auto year = to_int(parts[0], 4);
  if (!year) return std::nullopt;
  Date d{*year, std::nullopt, std::nullopt};
  if (parts.size() >= 2) {
    auto m = to_int(parts[1], 2);
    if (!m || *m < 1 || *m > 12) return std::nullopt;
    d.month = m;
  }
  if (parts.size() == 3) {
    auto day = to_int(parts[2], 2);
    if (!day || *day < 1 || *day > 31) return std::nullopt;
    d.day = day;
  }
  return d;
}

// --- TSV parsing -------------------------------------------------------------

namespace detail {

struct DocBuilder {
  Document doc;
  std::vector<Token> pending;
  bool date_seen = false;

  void close_sentence() {
    if (pending.empty()) return;
    Sentence s;
    s.id = static_cast<int>(doc.sentences.size());
    s.tokens = std::move(pending);
    pending.clear();
    doc.sentences.push_back(std::move(s));
  }
};

}  // namespace detail

// Parses the HIPE TSV layout: a header line naming the columns, `#` metadata
// comments (`document_id`, `date`), one token per row. Sentences end on a
// blank line or an EndOfSentence flag in the MISC column. Columns other than
// TOKEN, NE-COARSE-LIT and MISC are ignored.
inline std::vector<Document> parse_hipe_tsv(std::string_view text, std::string_view language) {
  if (!valid_language(language))
    throw Error("unsupported language code: " + std::string(language));

  // strip a UTF-8 BOM if present
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

  std::vector<Document> docs;
  std::optional<detail::DocBuilder> cur;
  int token_col = -1, tag_col = -1, misc_col = -1;
  bool header_seen = false;

  auto finish_doc = [&](std::size_t line_no) {
    if (!cur) return;
    cur->close_sentence();
    if (!cur->date_seen)
      throw ParseError("document " + cur->doc.id + " has no date comment", line_no);
    docs.push_back(std::move(cur->doc));
    cur.reset();
  };

  std::size_t line_no = 0;
  for (const std::string& raw : util::split(text, '\n')) {
    ++line_no;
    std::string line = raw;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view trimmed = util::trim(line);

    if (trimmed.empty()) {
      if (cur) cur->close_sentence();
      continue;
    }
    if (trimmed.front() == '#') {
      std::string_view body = util::trim(trimmed.substr(1));
      auto eq = body.find('=');
      if (eq == std::string_view::npos) continue;
      std::string key(util::trim(body.substr(0, eq)));
      std::string value(util::trim(body.substr(eq + 1)));
      if (key == "document_id") {
        finish_doc(line_no);
        cur.emplace();
        cur->doc.id = value;
        cur->doc.language = language;
      } else if (key == "date") {
        if (!cur) throw ParseError("date comment before any document_id", line_no);
        auto d = parse_date(value);
        if (!d)
          throw ParseError("unparseable date '" + value + "' in document " + cur->doc.id,
                           line_no);
        if (d->year < kFirstYear || d->year > kMaxYear)
          throw ParseError("year " + std::to_string(d->year) + " out of range in document " +
                               cur->doc.id,
                           line_no);
        cur->doc.date = *d;
        cur->date_seen = true;
      }
      // other metadata comments are ignored
      continue;
    }

    if (!header_seen) {
      auto cols = util::split(line, '\t');
      for (std::size_t i = 0; i < cols.size(); ++i) {
        std::string_view c = util::trim(cols[i]);
        if (c == "TOKEN") token_col = static_cast<int>(i);
        else if (c == "NE-COARSE-LIT") tag_col = static_cast<int>(i);
        else if (c == "MISC") misc_col = static_cast<int>(i);
      }
      if (token_col < 0 || tag_col < 0)
        throw ParseError("header is missing the TOKEN or NE-COARSE-LIT column", line_no);
      header_seen = true;
      continue;
    }

    if (!cur) throw ParseError("token row before any document_id comment", line_no);

    auto cells = util::split(line, '\t');
    int needed = std::max(token_col, tag_col);
    if (static_cast<int>(cells.size()) <= needed)
      throw ParseError("row has " + std::to_string(cells.size()) + " columns, expected at least " +
                           std::to_string(needed + 1),
                       line_no);

    std::string surface(util::trim(cells[token_col]));
    if (surface.empty()) continue;  // stray whitespace row

    Token tok;
    tok.surface = std::move(surface);
    tok.index = static_cast<int>(cur->pending.size());
    tok.tag = parse_iob(cells[tag_col]);
    cur->pending.push_back(std::move(tok));

    if (misc_col >= 0 && misc_col < static_cast<int>(cells.size()) &&
        util::contains(cells[misc_col], "EndOfSentence"))
      cur->close_sentence();
  }
  finish_doc(line_no);
  return docs;
}

// Normal-form serialization; parse(serialize(parse(x))) == parse(x).
inline std::string serialize_hipe_tsv(const std::vector<Document>& docs) {
  std::string out = "TOKEN\tNE-COARSE-LIT\tMISC\n";
  for (const Document& doc : docs) {
    out += "# document_id = " + doc.id + "\n";
    out += "# date = " + doc.date.to_string() + "\n";
    for (const Sentence& sent : doc.sentences) {
      for (std::size_t i = 0; i < sent.tokens.size(); ++i) {
        const Token& tok = sent.tokens[i];
        out += tok.surface;
        out += '\t';
        out += iob_to_string(tok.tag);
        out += '\t';
        out += (i + 1 == sent.tokens.size()) ? "EndOfSentence" : "_";
        out += '\n';
      }
    }
  }
  return out;
}

// --- IOB spans ---------------------------------------------------------------

// Conventional repair: an I-X that does not continue a B-X/I-X run opens a
// new span.
inline std::vector<Iob> repair_iob(const std::vector<Iob>& tags) {
  std::vector<Iob> out = tags;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].kind != Iob::Kind::I) continue;
    bool continues = i > 0 && !out[i - 1].outside() && out[i - 1].type == out[i].type;
    if (!continues) out[i].kind = Iob::Kind::B;
  }
  return out;
}

inline std::vector<Iob> sentence_tags(const Sentence& sent) {
  std::vector<Iob> tags;
  tags.reserve(sent.tokens.size());
  for (const Token& t : sent.tokens) tags.push_back(t.tag);
  return tags;
}

// Maximal contiguous runs after repair; non-overlapping, sorted by start.
inline std::vector<EntitySpan> decode_entities(const Sentence& sent) {
  std::vector<Iob> tags = repair_iob(sentence_tags(sent));
  std::vector<EntitySpan> spans;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i].kind != Iob::Kind::B) continue;
    EntitySpan span;
    span.type = tags[i].type;
    span.start = static_cast<int>(i);
    std::size_t j = i + 1;
    while (j < tags.size() && tags[j].kind == Iob::Kind::I && tags[j].type == span.type) ++j;
    span.end = static_cast<int>(j) - 1;
    std::vector<std::string> parts;
    for (int k = span.start; k <= span.end; ++k) parts.push_back(sent.tokens[k].surface);
    span.surface = util::join(parts, " ");
    spans.push_back(std::move(span));
    i = j - 1;
  }
  return spans;
}

inline std::vector<Iob> encode_entities(const std::vector<EntitySpan>& spans, std::size_t n_tokens) {
  std::vector<Iob> tags(n_tokens);
  for (const EntitySpan& s : spans) {
    tags[s.start] = {Iob::Kind::B, s.type};
    for (int i = s.start + 1; i <= s.end; ++i) tags[i] = {Iob::Kind::I, s.type};
  }
  return tags;
}

// --- merging -----------------------------------------------------------------

// Concatenates splits of one language; duplicate document ids are fatal.
inline Corpus merge_splits(const std::vector<std::vector<Document>>& inputs) {
  Corpus corpus;
  std::set<std::string> ids;
  std::string language;
  for (const auto& docs : inputs) {
    for (const Document& doc : docs) {
      if (language.empty()) language = doc.language;
      else if (doc.language != language)
        throw Error("merge inputs mix languages " + language + " and " + doc.language);
      if (!ids.insert(doc.id).second) throw Error("duplicate document id: " + doc.id);
      corpus.documents.push_back(doc);
    }
  }
  return corpus;
}

// --- statistics --------------------------------------------------------------

struct StatsRow {
  std::optional<PeriodBin> period;  // nullopt = per-language total
  std::string language;
  long documents = 0;
  long tokens = 0;
  long ne_tokens = 0;

  // Absent for empty splits, rendered as "-".
  std::optional<double> ne_percent() const {
    if (tokens == 0) return std::nullopt;
    return 100.0 * static_cast<double>(ne_tokens) / static_cast<double>(tokens);
  }
};

struct StatsTable {
  std::vector<StatsRow> rows;  // per language: all table bins ascending, then total
  long excluded_documents = 0;  // year >= 1950, outside the table splits
};

inline StatsTable corpus_stats(const Corpus& corpus) {
  StatsTable table;
  std::map<std::string, std::map<int, StatsRow>> cells;  // language -> bin start
  std::set<std::string> languages;
  for (const Document& doc : corpus.documents) languages.insert(doc.language);
  for (const std::string& lang : languages)
    for (int start = kFirstYear; start < kTableEndYear; start += kBinYears) {
      StatsRow row;
      row.period = PeriodBin{start, start + kBinYears};
      row.language = lang;
      cells[lang][start] = row;
    }

  for (const Document& doc : corpus.documents) {
    PeriodBin bin = assign_period(doc);
    if (!bin.in_table()) {
      ++table.excluded_documents;
      continue;
    }
    StatsRow& row = cells[doc.language][bin.start_year];
    ++row.documents;
    for (const Sentence& sent : doc.sentences) {
      row.tokens += static_cast<long>(sent.tokens.size());
      for (const Iob& tag : repair_iob(sentence_tags(sent)))
        if (!tag.outside()) ++row.ne_tokens;
    }
  }

  for (auto& [lang, bins] : cells) {
    StatsRow total;
    total.language = lang;
    for (auto& [start, row] : bins) {
      total.documents += row.documents;
      total.tokens += row.tokens;
      total.ne_tokens += row.ne_tokens;
      table.rows.push_back(row);
    }
    table.rows.push_back(total);
  }
  return table;
}

inline std::string stats_csv(const StatsTable& table) {
  std::string out = "period,language,documents,tokens,ne_percent\n";
  for (const StatsRow& row : table.rows) {
    out += row.period ? row.period->label() : "Total";
    out += ',' + row.language;
    out += ',' + std::to_string(row.documents);
    out += ',' + std::to_string(row.tokens);
    auto pct = row.ne_percent();
    out += ',';
    out += pct ? util::format_fixed(*pct, 1) : "-";
    out += '\n';
  }
  return out;
}

}  // namespace zsner::corpus
