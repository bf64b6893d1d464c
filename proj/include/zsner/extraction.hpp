#pragma once

// The three-step extraction pipeline: query every sentence with each
// generation prompt, split and filter the answers against sentence tokens by
// normalized Levenshtein distance, keep the longest span among nested
// matches, and disambiguate tokens claimed by several entity types. Every
// stage is recorded in a newline-delimited prediction store.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "zsner/backend.hpp"
#include "zsner/corpus.hpp"
#include "zsner/metrics.hpp"
#include "zsner/prompts.hpp"
#include "zsner/unicode.hpp"
#include "zsner/util.hpp"

namespace zsner::extract {

using corpus::EntityType;
using corpus::Sentence;

struct AnswerItem {
  std::string text;  // trimmed, terminal periods removed, otherwise verbatim
  int position = 0;  // ordinal among the kept items
  bool operator==(const AnswerItem&) const = default;
};

struct TokenRange {
  int start = 0;
  int end = 0;  // inclusive
  int length() const { return end - start + 1; }
  bool overlaps(const TokenRange& o) const { return start <= o.end && o.start <= end; }
  bool operator==(const TokenRange&) const = default;
};

struct CandidatePrediction {
  EntityType type = EntityType::PERS;
  AnswerItem item;
  std::optional<TokenRange> range;        // present iff matched at the run threshold
  std::optional<double> distance;         // present iff matched
  std::optional<double> window_distance;  // best distance to any sentence window
  bool echoes_entity_name = false;
};

struct DisambiguationTask {
  std::string doc_id;
  int sentence_id = 0;
  std::string surface;  // contested tokens, joined
  TokenRange tokens;
  std::vector<EntityType> types;  // distinct, in fixed type order
};

// Answer strings that merely repeat the type noun instead of naming a token.
inline const std::vector<std::string>& echo_terms(EntityType t) {
  static const std::vector<std::string> pers = {"person"};
  static const std::vector<std::string> loc = {"location"};
  static const std::vector<std::string> org = {"organization"};
  static const std::vector<std::string> time = {"date"};
  static const std::vector<std::string> prod = {"media or doctrine", "media", "doctrine"};
  switch (t) {
    case EntityType::PERS: return pers;
    case EntityType::LOC: return loc;
    case EntityType::ORG: return org;
    case EntityType::TIME: return time;
    case EntityType::PROD: return prod;
  }
  return pers;
}

namespace detail {

inline std::string strip_terminal_periods(std::string_view s) {
  std::string_view t = util::trim(s);
  while (!t.empty() && t.back() == '.') t.remove_suffix(1);
  return std::string(util::trim(t));
}

inline std::string fold_key(std::string_view s) { return uni::casefold_nfc(s); }

inline int word_count(std::string_view s) {
  int n = 0;
  bool in_word = false;
  for (char c : s) {
    bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r';
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

}  // namespace detail

inline bool is_echo_answer(std::string_view text, EntityType type) {
  std::string norm = detail::fold_key(detail::strip_terminal_periods(text));
  for (const std::string& term : echo_terms(type))
    if (norm == term) return true;
  return false;
}

// Comma-separated answer -> items: trimmed, terminal periods stripped,
// empties dropped, case-insensitive duplicates removed keeping the first.
inline std::vector<AnswerItem> parse_answer(std::string_view raw) {
  std::vector<AnswerItem> items;
  std::vector<std::string> seen;
  for (const std::string& part : util::split(raw, ',')) {
    std::string text = detail::strip_terminal_periods(part);
    if (text.empty()) continue;
    std::string key = detail::fold_key(text);
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
    seen.push_back(std::move(key));
    items.push_back({std::move(text), static_cast<int>(items.size())});
  }
  return items;
}

// Matches each item against contiguous token windows no wider than the
// item's own word count, minimizing normalized Levenshtein distance over
// case-folded NFC text. Ties prefer the earliest window, then the narrower
// one. Items above the threshold stay in the result with no range so false
// positives remain countable.
inline std::vector<CandidatePrediction> match_items(const std::vector<AnswerItem>& items,
                                                    const Sentence& sentence, EntityType type,
                                                    double threshold) {
  const std::size_t n = sentence.tokens.size();
  std::vector<std::vector<char32_t>> token_keys(n);
  for (std::size_t i = 0; i < n; ++i)
    token_keys[i] = uni::fold(uni::nfc(uni::utf8_decode(sentence.tokens[i].surface)));

  std::vector<CandidatePrediction> preds;
  preds.reserve(items.size());
  for (const AnswerItem& item : items) {
    CandidatePrediction pred;
    pred.type = type;
    pred.item = item;
    pred.echoes_entity_name = is_echo_answer(item.text, type);

    std::vector<char32_t> item_key = uni::fold(uni::nfc(uni::utf8_decode(item.text)));
    int max_width = std::max(1, detail::word_count(item.text));

    std::optional<double> best;
    TokenRange best_range{0, 0};
    for (std::size_t start = 0; start < n; ++start) {
      std::vector<char32_t> window;
      for (int w = 1; w <= max_width && start + w <= n; ++w) {
        if (w > 1) window.push_back(U' ');
        const auto& tk = token_keys[start + w - 1];
        window.insert(window.end(), tk.begin(), tk.end());
        double d = metrics::normalized_levenshtein(item_key, window);
        if (!best || d < *best) {
          best = d;
          best_range = {static_cast<int>(start), static_cast<int>(start) + w - 1};
        }
      }
    }
    pred.window_distance = best;
    if (best && *best <= threshold) {
      pred.range = best_range;
      pred.distance = best;
    }
    preds.push_back(std::move(pred));
  }
  return preds;
}

// Among overlapping ranges of one type, only the longest span survives;
// equal lengths keep the earlier start, then the earlier answer item.
// Predictions without a range are dropped here; the pipeline carries them
// separately for false-positive accounting.
inline std::vector<CandidatePrediction> resolve_nested(const std::vector<CandidatePrediction>& preds) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i].range) order.push_back(i);

  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const TokenRange &ra = *preds[a].range, &rb = *preds[b].range;
    if (ra.length() != rb.length()) return ra.length() > rb.length();
    if (ra.start != rb.start) return ra.start < rb.start;
    return preds[a].item.position < preds[b].item.position;
  });

  std::vector<TokenRange> kept_ranges;
  std::vector<bool> keep(preds.size(), false);
  for (std::size_t i : order) {
    const TokenRange& r = *preds[i].range;
    bool clash = std::any_of(kept_ranges.begin(), kept_ranges.end(),
                             [&](const TokenRange& k) { return k.overlaps(r); });
    if (clash) continue;
    kept_ranges.push_back(r);
    keep[i] = true;
  }

  std::vector<CandidatePrediction> out;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (keep[i]) out.push_back(preds[i]);
  return out;
}

// One task per maximal run of tokens claimed by the same set of >= 2 types.
inline std::vector<DisambiguationTask> detect_conflicts(
    const std::map<EntityType, std::vector<CandidatePrediction>>& per_type,
    const Sentence& sentence, const std::string& doc_id) {
  const int n = static_cast<int>(sentence.tokens.size());
  std::vector<std::vector<EntityType>> claims(n);
  for (EntityType t : corpus::kEntityTypes) {
    auto it = per_type.find(t);
    if (it == per_type.end()) continue;
    for (const CandidatePrediction& p : it->second) {
      if (!p.range) continue;
      for (int i = p.range->start; i <= p.range->end && i < n; ++i)
        if (std::find(claims[i].begin(), claims[i].end(), t) == claims[i].end())
          claims[i].push_back(t);
    }
  }

  std::vector<DisambiguationTask> tasks;
  int i = 0;
  while (i < n) {
    if (claims[i].size() < 2) {
      ++i;
      continue;
    }
    int j = i;
    while (j + 1 < n && claims[j + 1] == claims[i]) ++j;
    DisambiguationTask task;
    task.doc_id = doc_id;
    task.sentence_id = sentence.id;
    task.tokens = {i, j};
    std::vector<std::string> parts;
    for (int k = i; k <= j; ++k) parts.push_back(sentence.tokens[k].surface);
    task.surface = util::join(parts, " ");
    task.types = claims[i];  // already in fixed type order by construction
    tasks.push_back(std::move(task));
    i = j + 1;
  }
  return tasks;
}

// Maps a free-text answer to one of the competing types by case-insensitive
// containment of the type noun; no match means the conflict stands.
inline std::optional<EntityType> apply_disambiguation(const DisambiguationTask& task,
                                                      std::string_view answer) {
  std::string folded = detail::fold_key(answer);
  for (EntityType t : task.types)
    for (const std::string& noun : echo_terms(t))
      if (util::contains(folded, noun)) return t;
  return std::nullopt;
}

// --- prediction store ----------------------------------------------------------

// One generation query: a (document, sentence, entity type) cell with every
// stage the pipeline produced for it.
struct StoreCell {
  std::string doc_id;
  int sentence_id = 0;
  EntityType type = EntityType::PERS;
  std::string request_id;
  std::optional<std::string> raw;  // absent when the request errored
  std::optional<std::string> error;
  std::vector<AnswerItem> items;
  std::vector<CandidatePrediction> predictions;  // all items, matched or not
  std::vector<CandidatePrediction> survivors;    // after nested resolution
  std::vector<CandidatePrediction> final_spans;  // after disambiguation
};

struct DisambiguationRecord {
  DisambiguationTask task;
  std::vector<std::string> request_ids;  // one per pairwise round
  std::vector<std::string> answers;
  std::optional<EntityType> winner;
  std::optional<std::string> error;
};

struct Store {
  std::vector<StoreCell> cells;  // ordered by document, sentence, type
  std::vector<DisambiguationRecord> disambiguations;
  double match_threshold = 0.4;
};

struct Diagnostics {
  std::map<EntityType, std::optional<double>> echo_rate;
  std::optional<double> unmatched_rate;
  long empty_answer_count = 0;
  long dropped_conflicts = 0;
  long failed_requests = 0;
  long total_items = 0;
  long unmatched_items = 0;
};

inline Diagnostics diagnostics(const Store& store) {
  Diagnostics d;
  std::map<EntityType, long> answers, echoes;
  for (const StoreCell& cell : store.cells) {
    if (cell.error) {
      ++d.failed_requests;
      continue;
    }
    if (!cell.raw) continue;
    ++answers[cell.type];
    if (util::trim(*cell.raw).empty()) ++d.empty_answer_count;
    if (is_echo_answer(*cell.raw, cell.type)) ++echoes[cell.type];
    for (const CandidatePrediction& p : cell.predictions) {
      ++d.total_items;
      if (!p.range) ++d.unmatched_items;
    }
  }
  for (EntityType t : corpus::kEntityTypes) {
    auto it = answers.find(t);
    if (it == answers.end() || it->second == 0)
      d.echo_rate[t] = std::nullopt;
    else
      d.echo_rate[t] = static_cast<double>(echoes[t]) / static_cast<double>(it->second);
  }
  if (d.total_items > 0)
    d.unmatched_rate = static_cast<double>(d.unmatched_items) / static_cast<double>(d.total_items);
  for (const DisambiguationRecord& r : store.disambiguations) {
    if (r.error) ++d.failed_requests;
    else if (!r.winner) ++d.dropped_conflicts;
  }
  return d;
}

inline nlohmann::ordered_json diagnostics_json(const Diagnostics& d) {
  nlohmann::ordered_json j;
  for (EntityType t : corpus::kEntityTypes) {
    auto it = d.echo_rate.find(t);
    if (it != d.echo_rate.end() && it->second)
      j["echo_rate"][std::string(corpus::to_string(t))] = *it->second;
    else
      j["echo_rate"][std::string(corpus::to_string(t))] = nullptr;
  }
  if (d.unmatched_rate) j["unmatched_rate"] = *d.unmatched_rate;
  else j["unmatched_rate"] = nullptr;
  j["empty_answer_count"] = d.empty_answer_count;
  j["dropped_conflicts"] = d.dropped_conflicts;
  j["failed_requests"] = d.failed_requests;
  j["total_items"] = d.total_items;
  j["unmatched_items"] = d.unmatched_items;
  return j;
}

// --- pipeline -------------------------------------------------------------------

struct PipelineConfig {
  prompt::TemplateSet templates = prompt::TemplateSet::defaults();
  double match_threshold = 0.4;
  int max_new_tokens = 64;
};

struct PipelineResult {
  Store store;
  long failed_requests = 0;
};

// Runs generation for every sentence x entity type, post-processes answers,
// then resolves cross-type conflicts with pairwise disambiguation prompts in
// fixed type order. Backend errors mark their cell and the run keeps going.
inline PipelineResult run_pipeline(const std::vector<corpus::Document>& documents,
                                   backend::CachingBackend& backend, const PipelineConfig& config) {
  PipelineResult result;
  Store& store = result.store;
  store.match_threshold = config.match_threshold;

  struct CellRef {
    const corpus::Document* doc;
    const Sentence* sentence;
    EntityType type;
  };
  std::vector<CellRef> refs;
  std::vector<backend::GenerationRequest> requests;
  for (const corpus::Document& doc : documents)
    for (const Sentence& sent : doc.sentences)
      for (EntityType type : corpus::kEntityTypes) {
        refs.push_back({&doc, &sent, type});
        backend::GenerationRequest req;
        req.prompt =
            prompt::render_generation(config.templates, sent.text(), type,
                                      doc.id + "/" + std::to_string(sent.id))
                .text;
        req.max_new_tokens = config.max_new_tokens;
        requests.push_back(std::move(req));
      }

  std::vector<backend::GenResult> answers = backend.generate_batch(requests, "generation");

  for (std::size_t i = 0; i < refs.size(); ++i) {
    StoreCell cell;
    cell.doc_id = refs[i].doc->id;
    cell.sentence_id = refs[i].sentence->id;
    cell.type = refs[i].type;
    cell.request_id = answers[i].request_id;
    if (!answers[i].ok) {
      cell.error = answers[i].error;
      ++result.failed_requests;
      store.cells.push_back(std::move(cell));
      continue;
    }
    cell.raw = answers[i].response.text;
    cell.items = parse_answer(*cell.raw);
    cell.predictions = match_items(cell.items, *refs[i].sentence, refs[i].type,
                                   config.match_threshold);
    cell.survivors = resolve_nested(cell.predictions);
    store.cells.push_back(std::move(cell));
  }

  // conflicts, sentence by sentence
  struct PendingTask {
    DisambiguationRecord record;
    const corpus::Document* doc;
    const Sentence* sentence;
    EntityType champion;
    std::size_t next_challenger;  // index into record.task.types
    bool settled = false;
  };
  std::vector<PendingTask> pending;

  std::map<std::pair<std::string, int>, std::map<EntityType, std::size_t>> cell_index;
  for (std::size_t i = 0; i < store.cells.size(); ++i)
    cell_index[{store.cells[i].doc_id, store.cells[i].sentence_id}][store.cells[i].type] = i;

  for (const corpus::Document& doc : documents)
    for (const Sentence& sent : doc.sentences) {
      auto sit = cell_index.find({doc.id, sent.id});
      if (sit == cell_index.end()) continue;
      std::map<EntityType, std::vector<CandidatePrediction>> per_type;
      for (auto& [type, idx] : sit->second)
        if (!store.cells[idx].error) per_type[type] = store.cells[idx].survivors;
      for (DisambiguationTask& task : detect_conflicts(per_type, sent, doc.id)) {
        PendingTask p;
        p.record.task = std::move(task);
        p.doc = &doc;
        p.sentence = &sent;
        p.champion = p.record.task.types[0];
        p.next_challenger = 1;
        pending.push_back(std::move(p));
      }
    }

  while (true) {
    std::vector<std::size_t> active;
    std::vector<backend::GenerationRequest> round;
    for (std::size_t i = 0; i < pending.size(); ++i) {
      PendingTask& p = pending[i];
      if (p.settled || p.next_challenger >= p.record.task.types.size()) continue;
      backend::GenerationRequest req;
      req.prompt = prompt::render_disambiguation(
                       config.templates, p.sentence->text(), p.record.task.surface, p.champion,
                       p.record.task.types[p.next_challenger],
                       p.record.task.doc_id + "/" + std::to_string(p.record.task.sentence_id))
                       .text;
      req.max_new_tokens = config.max_new_tokens;
      round.push_back(std::move(req));
      active.push_back(i);
    }
    if (active.empty()) break;

    std::vector<backend::GenResult> replies = backend.generate_batch(round, "disambiguation");
    for (std::size_t k = 0; k < active.size(); ++k) {
      PendingTask& p = pending[active[k]];
      p.record.request_ids.push_back(replies[k].request_id);
      if (!replies[k].ok) {
        p.record.error = replies[k].error;
        p.settled = true;
        ++result.failed_requests;
        continue;
      }
      p.record.answers.push_back(replies[k].response.text);
      DisambiguationTask pair = p.record.task;
      pair.types = {p.champion, p.record.task.types[p.next_challenger]};
      std::optional<EntityType> winner = apply_disambiguation(pair, replies[k].response.text);
      if (!winner) {
        p.record.winner = std::nullopt;  // conflict stands; all claims dropped
        p.settled = true;
        continue;
      }
      p.champion = *winner;
      ++p.next_challenger;
      if (p.next_challenger >= p.record.task.types.size()) {
        p.record.winner = p.champion;
        p.settled = true;
      }
    }
  }

  // final spans: survivors minus claims dropped by disambiguation
  for (StoreCell& cell : store.cells) {
    if (cell.error) continue;
    cell.final_spans = cell.survivors;
  }
  for (PendingTask& p : pending) {
    const DisambiguationTask& task = p.record.task;
    for (EntityType t : task.types) {
      bool keep_type = p.record.winner && *p.record.winner == t;
      if (keep_type) continue;
      auto sit = cell_index.find({task.doc_id, task.sentence_id});
      if (sit == cell_index.end()) continue;
      auto cit = sit->second.find(t);
      if (cit == sit->second.end()) continue;
      StoreCell& cell = store.cells[cit->second];
      std::erase_if(cell.final_spans, [&](const CandidatePrediction& pred) {
        return pred.range && pred.range->overlaps(task.tokens);
      });
    }
    store.disambiguations.push_back(std::move(p.record));
  }

  return result;
}

// --- store serialization ---------------------------------------------------------

namespace detail {

inline nlohmann::ordered_json prediction_json(const CandidatePrediction& p) {
  nlohmann::ordered_json j;
  j["text"] = p.item.text;
  j["position"] = p.item.position;
  j["matched"] = p.range.has_value();
  if (p.range) {
    j["start"] = p.range->start;
    j["end"] = p.range->end;
    j["distance"] = *p.distance;
  }
  if (p.window_distance) j["window_distance"] = *p.window_distance;
  j["echo"] = p.echoes_entity_name;
  return j;
}

inline CandidatePrediction prediction_from_json(const nlohmann::json& j, EntityType type) {
  CandidatePrediction p;
  p.type = type;
  p.item.text = j.at("text").get<std::string>();
  p.item.position = j.at("position").get<int>();
  if (j.at("matched").get<bool>()) {
    p.range = TokenRange{j.at("start").get<int>(), j.at("end").get<int>()};
    p.distance = j.at("distance").get<double>();
  }
  if (j.contains("window_distance")) p.window_distance = j["window_distance"].get<double>();
  p.echoes_entity_name = j.at("echo").get<bool>();
  return p;
}

inline nlohmann::ordered_json stage_header(const StoreCell& cell, std::string_view stage) {
  nlohmann::ordered_json j;
  j["doc"] = cell.doc_id;
  j["sentence"] = cell.sentence_id;
  j["type"] = std::string(corpus::to_string(cell.type));
  j["stage"] = std::string(stage);
  return j;
}

}  // namespace detail

inline std::string store_to_jsonl(const Store& store) {
  std::string out;
  nlohmann::ordered_json head;
  head["stage"] = "header";
  head["match_threshold"] = store.match_threshold;
  out += head.dump() + "\n";

  auto emit = [&](const nlohmann::ordered_json& j) { out += j.dump() + "\n"; };

  // cells are already ordered by document, sentence, type
  std::size_t i = 0;
  while (i < store.cells.size()) {
    const std::string doc = store.cells[i].doc_id;
    const int sent = store.cells[i].sentence_id;
    while (i < store.cells.size() && store.cells[i].doc_id == doc &&
           store.cells[i].sentence_id == sent) {
      const StoreCell& cell = store.cells[i];
      if (cell.error) {
        auto j = detail::stage_header(cell, "error");
        j["request_id"] = cell.request_id;
        j["message"] = *cell.error;
        emit(j);
        ++i;
        continue;
      }
      {
        auto j = detail::stage_header(cell, "raw_answer");
        j["request_id"] = cell.request_id;
        j["answer"] = cell.raw ? *cell.raw : "";
        emit(j);
      }
      {
        auto j = detail::stage_header(cell, "items");
        j["items"] = nlohmann::ordered_json::array();
        for (const AnswerItem& item : cell.items) j["items"].push_back(item.text);
        emit(j);
      }
      for (std::string_view stage : {"matches", "resolved", "final"}) {
        const std::vector<CandidatePrediction>* preds =
            stage == "matches" ? &cell.predictions
                               : (stage == "resolved" ? &cell.survivors : &cell.final_spans);
        auto j = detail::stage_header(cell, stage);
        j["predictions"] = nlohmann::ordered_json::array();
        for (const CandidatePrediction& p : *preds)
          j["predictions"].push_back(detail::prediction_json(p));
        emit(j);
      }
      ++i;
    }
    for (const DisambiguationRecord& r : store.disambiguations) {
      if (r.task.doc_id != doc || r.task.sentence_id != sent) continue;
      nlohmann::ordered_json j;
      j["doc"] = doc;
      j["sentence"] = sent;
      j["type"] = nullptr;
      j["stage"] = "disambiguation";
      j["surface"] = r.task.surface;
      j["tokens"] = {r.task.tokens.start, r.task.tokens.end};
      j["competing"] = nlohmann::ordered_json::array();
      for (EntityType t : r.task.types) j["competing"].push_back(std::string(corpus::to_string(t)));
      j["request_ids"] = r.request_ids;
      j["answers"] = r.answers;
      j["winner"] = r.winner ? nlohmann::ordered_json(std::string(corpus::to_string(*r.winner)))
                             : nlohmann::ordered_json(nullptr);
      if (r.error) j["error"] = *r.error;
      emit(j);
    }
  }
  return out;
}

inline Store store_from_jsonl(std::string_view text) {
  Store store;
  std::map<std::string, std::size_t> cell_at;  // doc/sent/type -> index
  auto cell_key = [](const std::string& doc, int sent, std::string_view type) {
    return doc + "\x1f" + std::to_string(sent) + "\x1f" + std::string(type);
  };

  std::size_t line_no = 0;
  for (const std::string& line : util::split(text, '\n')) {
    ++line_no;
    if (util::trim(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ParseError("corrupt store record", line_no);
    try {
      const std::string stage = j.at("stage").get<std::string>();
      if (stage == "header") {
        store.match_threshold = j.at("match_threshold").get<double>();
        continue;
      }
      if (stage == "disambiguation") {
        DisambiguationRecord r;
        r.task.doc_id = j.at("doc").get<std::string>();
        r.task.sentence_id = j.at("sentence").get<int>();
        r.task.surface = j.at("surface").get<std::string>();
        r.task.tokens = {j.at("tokens")[0].get<int>(), j.at("tokens")[1].get<int>()};
        for (const auto& t : j.at("competing"))
          r.task.types.push_back(*corpus::entity_from_string(t.get<std::string>()));
        r.request_ids = j.at("request_ids").get<std::vector<std::string>>();
        r.answers = j.at("answers").get<std::vector<std::string>>();
        if (!j.at("winner").is_null())
          r.winner = corpus::entity_from_string(j["winner"].get<std::string>());
        if (j.contains("error")) r.error = j["error"].get<std::string>();
        store.disambiguations.push_back(std::move(r));
        continue;
      }

      const std::string doc = j.at("doc").get<std::string>();
      const int sent = j.at("sentence").get<int>();
      auto type = corpus::entity_from_string(j.at("type").get<std::string>());
      if (!type) throw ParseError("unknown entity type in store", line_no);
      std::string key = cell_key(doc, sent, corpus::to_string(*type));
      if (!cell_at.count(key)) {
        StoreCell cell;
        cell.doc_id = doc;
        cell.sentence_id = sent;
        cell.type = *type;
        cell_at[key] = store.cells.size();
        store.cells.push_back(std::move(cell));
      }
      StoreCell& cell = store.cells[cell_at[key]];
      if (stage == "error") {
        cell.request_id = j.at("request_id").get<std::string>();
        cell.error = j.at("message").get<std::string>();
      } else if (stage == "raw_answer") {
        cell.request_id = j.at("request_id").get<std::string>();
        cell.raw = j.at("answer").get<std::string>();
      } else if (stage == "items") {
        for (const auto& t : j.at("items"))
          cell.items.push_back({t.get<std::string>(), static_cast<int>(cell.items.size())});
      } else if (stage == "matches" || stage == "resolved" || stage == "final") {
        std::vector<CandidatePrediction>* preds =
            stage == "matches" ? &cell.predictions
                               : (stage == "resolved" ? &cell.survivors : &cell.final_spans);
        for (const auto& pj : j.at("predictions"))
          preds->push_back(detail::prediction_from_json(pj, *type));
      } else {
        throw ParseError("unknown store stage: " + stage, line_no);
      }
    } catch (const nlohmann::json::exception&) {
      throw ParseError("corrupt store record", line_no);
    }
  }
  return store;
}

// --- bridge to the scorer ----------------------------------------------------------

// Builds one scoring query per ok cell: nested-resolution survivors plus the
// items that matched nothing, against the gold spans of the cell's type.
// Errored cells are skipped; the run's nonzero exit already flags them.
inline std::vector<metrics::EvalQuery> build_eval_queries(
    const Store& store, const std::vector<corpus::Document>& documents) {
  std::map<std::string, const corpus::Document*> doc_by_id;
  for (const corpus::Document& d : documents) doc_by_id[d.id] = &d;

  std::vector<metrics::EvalQuery> queries;
  for (const StoreCell& cell : store.cells) {
    if (cell.error) continue;
    auto dit = doc_by_id.find(cell.doc_id);
    if (dit == doc_by_id.end())
      throw Error("store references unknown document " + cell.doc_id);
    const corpus::Document& doc = *dit->second;
    if (cell.sentence_id < 0 || cell.sentence_id >= static_cast<int>(doc.sentences.size()))
      throw Error("store references unknown sentence " + cell.doc_id + "/" +
                  std::to_string(cell.sentence_id));
    const Sentence& sent = doc.sentences[cell.sentence_id];

    metrics::EvalQuery q;
    q.language = doc.language;
    q.entity = cell.type;
    q.period = corpus::assign_period(doc);

    std::vector<const CandidatePrediction*> preds;
    for (const CandidatePrediction& p : cell.survivors)
      if (p.range) preds.push_back(&p);
    for (const CandidatePrediction& p : cell.predictions)
      if (!p.range) preds.push_back(&p);
    std::sort(preds.begin(), preds.end(), [](const CandidatePrediction* a, const CandidatePrediction* b) {
      return a->item.position < b->item.position;
    });
    for (const CandidatePrediction* p : preds)
      q.preds.push_back({p->item.text, p->window_distance});

    for (const corpus::EntitySpan& span : corpus::decode_entities(sent))
      if (span.type == cell.type) q.golds.push_back(span.surface);

    queries.push_back(std::move(q));
  }
  return queries;
}

}  // namespace zsner::extract
