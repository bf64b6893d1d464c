#pragma once

// Prompt templates for the generation, disambiguation and probing queries.
// The built-in defaults are fixed byte-for-byte; every template can be
// overridden through a flat key=value file so prompt experiments need no
// code change.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "zsner/corpus.hpp"
#include "zsner/util.hpp"

namespace zsner::prompt {

using corpus::EntityType;

enum class TemplateKind { generation, disambiguation, probe_language, probe_date };

inline std::string_view to_string(TemplateKind k) {
  switch (k) {
    case TemplateKind::generation: return "generation";
    case TemplateKind::disambiguation: return "disambiguation";
    case TemplateKind::probe_language: return "probe_language";
    case TemplateKind::probe_date: return "probe_date";
  }
  return "?";
}

// The noun each entity type goes by inside a prompt.
inline std::string_view type_noun(EntityType t) {
  switch (t) {
    case EntityType::PERS: return "person";
    case EntityType::LOC: return "location";
    case EntityType::ORG: return "organization";
    case EntityType::TIME: return "date";
    case EntityType::PROD: return "media or doctrine";
  }
  return "?";
}

struct Provenance {
  TemplateKind kind = TemplateKind::generation;
  std::optional<EntityType> entity_type;
  std::string ref;              // e.g. "<doc_id>/<sentence_id>"
  bool degenerate_input = false;  // rendered from an empty sentence/text
};

struct RenderedPrompt {
  std::string text;
  Provenance provenance;
};

namespace detail {

inline std::size_t count_occurrences(std::string_view s, std::string_view needle) {
  std::size_t n = 0, pos = 0;
  while ((pos = s.find(needle, pos)) != std::string_view::npos) {
    ++n;
    pos += needle.size();
  }
  return n;
}

// Single left-to-right pass; substituted text is never rescanned, so a
// sentence containing a placeholder string stays verbatim.
inline std::string substitute(std::string_view tmpl,
                              const std::vector<std::pair<std::string_view, std::string_view>>& subs) {
  std::string out;
  out.reserve(tmpl.size() + 64);
  std::size_t i = 0;
  while (i < tmpl.size()) {
    bool replaced = false;
    for (auto& [key, value] : subs) {
      if (tmpl.compare(i, key.size(), key) == 0) {
        out += value;
        i += key.size();
        replaced = true;
        break;
      }
    }
    if (!replaced) out += tmpl[i++];
  }
  return out;
}

}  // namespace detail

struct TemplateSet {
  std::string generation_pers;
  std::string generation_loc;
  std::string generation_org;
  std::string generation_time;
  std::string generation_prod;
  std::string disambiguation;
  std::string probe_language;
  std::string probe_date;

  static TemplateSet defaults() {
    TemplateSet t;
    auto gen = [](std::string_view noun) {
      return "Input: <sentence>\n In input, what are the names of " + std::string(noun) +
             "? Separate answers with commas.";
    };
    t.generation_pers = gen(type_noun(EntityType::PERS));
    t.generation_loc = gen(type_noun(EntityType::LOC));
    t.generation_org = gen(type_noun(EntityType::ORG));
    t.generation_time = gen(type_noun(EntityType::TIME));
    t.generation_prod = gen(type_noun(EntityType::PROD));
    t.disambiguation =
        "Input: <sentence>\n In input, is <entity> a <type_a> or a <type_b>? Give only one answer.";
    t.probe_language = "<sentence>\n Q:Name the language of the previous sentence.\nA: ";
    t.probe_date = "In which year is the following text likely to have been published: text: <text>";
    return t;
  }

  const std::string& generation(EntityType t) const {
    switch (t) {
      case EntityType::PERS: return generation_pers;
      case EntityType::LOC: return generation_loc;
      case EntityType::ORG: return generation_org;
      case EntityType::TIME: return generation_time;
      case EntityType::PROD: return generation_prod;
    }
    return generation_pers;
  }

  void validate() const {
    for (EntityType t : corpus::kEntityTypes) {
      if (detail::count_occurrences(generation(t), "<sentence>") != 1)
        throw ConfigError("generation template for " + std::string(corpus::to_string(t)) +
                          " must contain <sentence> exactly once");
    }
    for (std::string_view ph : {"<sentence>", "<entity>", "<type_a>", "<type_b>"})
      if (!util::contains(disambiguation, ph))
        throw ConfigError("disambiguation template must contain " + std::string(ph));
    if (!util::contains(probe_language, "<sentence>"))
      throw ConfigError("language probe template must contain <sentence>");
    if (!util::contains(probe_date, "<text>"))
      throw ConfigError("date probe template must contain <text>");
  }

  util::KvFile to_kv() const {
    util::KvFile kv;
    kv.set("generation.PERS", generation_pers);
    kv.set("generation.LOC", generation_loc);
    kv.set("generation.ORG", generation_org);
    kv.set("generation.TIME", generation_time);
    kv.set("generation.PROD", generation_prod);
    kv.set("disambiguation", disambiguation);
    kv.set("probe.language", probe_language);
    kv.set("probe.date", probe_date);
    return kv;
  }

  // Missing keys keep their defaults; unknown keys are rejected.
  static TemplateSet from_kv(const util::KvFile& kv) {
    TemplateSet t = defaults();
    for (auto& [key, value] : kv.entries) {
      if (key == "generation.PERS") t.generation_pers = value;
      else if (key == "generation.LOC") t.generation_loc = value;
      else if (key == "generation.ORG") t.generation_org = value;
      else if (key == "generation.TIME") t.generation_time = value;
      else if (key == "generation.PROD") t.generation_prod = value;
      else if (key == "disambiguation") t.disambiguation = value;
      else if (key == "probe.language") t.probe_language = value;
      else if (key == "probe.date") t.probe_date = value;
      else throw ConfigError("unknown template key: " + key);
    }
    t.validate();
    return t;
  }
};

inline RenderedPrompt render_generation(const TemplateSet& templates, std::string_view sentence,
                                        EntityType type, std::string ref = {}) {
  RenderedPrompt p;
  p.text = detail::substitute(templates.generation(type), {{"<sentence>", sentence}});
  p.provenance = {TemplateKind::generation, type, std::move(ref), sentence.empty()};
  return p;
}

inline RenderedPrompt render_disambiguation(const TemplateSet& templates, std::string_view sentence,
                                            std::string_view entity_surface, EntityType type_a,
                                            EntityType type_b, std::string ref = {}) {
  if (type_a == type_b)
    throw Error("disambiguation needs two distinct entity types");
  if (!util::contains(sentence, entity_surface))
    throw Error("entity surface '" + std::string(entity_surface) + "' does not occur in sentence");
  RenderedPrompt p;
  p.text = detail::substitute(templates.disambiguation, {{"<sentence>", sentence},
                                                         {"<entity>", entity_surface},
                                                         {"<type_a>", type_noun(type_a)},
                                                         {"<type_b>", type_noun(type_b)}});
  p.provenance = {TemplateKind::disambiguation, std::nullopt, std::move(ref), sentence.empty()};
  return p;
}

inline RenderedPrompt render_language_probe(const TemplateSet& templates, std::string_view sentence,
                                            std::string ref = {}) {
  RenderedPrompt p;
  p.text = detail::substitute(templates.probe_language, {{"<sentence>", sentence}});
  p.provenance = {TemplateKind::probe_language, std::nullopt, std::move(ref), sentence.empty()};
  return p;
}

inline RenderedPrompt render_date_probe(const TemplateSet& templates, std::string_view text,
                                        std::string ref = {}) {
  RenderedPrompt p;
  p.text = detail::substitute(templates.probe_date, {{"<text>", text}});
  p.provenance = {TemplateKind::probe_date, std::nullopt, std::move(ref), text.empty()};
  return p;
}

}  // namespace zsner::prompt
