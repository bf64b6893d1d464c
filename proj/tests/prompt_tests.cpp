#include <set>
#include <string>

#include "doctest.h"
#include "support/oracles.hpp"
#include "zsner/prompts.hpp"

using namespace zsner;
using namespace zsner::prompt;
using corpus::EntityType;

namespace {
const TemplateSet kDefaults = TemplateSet::defaults();
}

TEST_CASE("generation prompts render byte exactly") {
  auto p = render_generation(kDefaults, "X visited Paris.", EntityType::PERS);
  CHECK(p.text ==
        "Input: X visited Paris.\n In input, what are the names of person? "
        "Separate answers with commas.");
  CHECK(p.provenance.kind == TemplateKind::generation);
  CHECK(p.provenance.entity_type == EntityType::PERS);
  CHECK_FALSE(p.provenance.degenerate_input);

  CHECK(render_generation(kDefaults, "s", EntityType::LOC).text ==
        "Input: s\n In input, what are the names of location? Separate answers with commas.");
  CHECK(render_generation(kDefaults, "s", EntityType::PROD).text ==
        "Input: s\n In input, what are the names of media or doctrine? "
        "Separate answers with commas.");
  // ORG and TIME follow the same family with their own nouns
  CHECK(render_generation(kDefaults, "s", EntityType::ORG).text ==
        "Input: s\n In input, what are the names of organization? Separate answers with commas.");
  CHECK(render_generation(kDefaults, "s", EntityType::TIME).text ==
        "Input: s\n In input, what are the names of date? Separate answers with commas.");
}

TEST_CASE("disambiguation prompt uses the argument order for nouns") {
  std::string s = "Lincoln spoke.";
  auto p = render_disambiguation(kDefaults, s, "Lincoln", EntityType::PERS, EntityType::LOC);
  CHECK(p.text ==
        "Input: Lincoln spoke.\n In input, is Lincoln a person or a location? "
        "Give only one answer.");
  auto q = render_disambiguation(kDefaults, s, "Lincoln", EntityType::LOC, EntityType::PERS);
  CHECK(q.text ==
        "Input: Lincoln spoke.\n In input, is Lincoln a location or a person? "
        "Give only one answer.");
}

TEST_CASE("disambiguation rejects equal types and absent surfaces") {
  CHECK_THROWS_AS(
      render_disambiguation(kDefaults, "Die Zeitung.", "Zeitung", EntityType::PERS, EntityType::PERS),
      Error);
  CHECK_THROWS_AS(
      render_disambiguation(kDefaults, "Die Zeitung.", "Journal", EntityType::PERS, EntityType::LOC),
      Error);
}

TEST_CASE("language probe renders byte exactly and tolerates empty input") {
  CHECK(render_language_probe(kDefaults, "Bonjour.").text ==
        "Bonjour.\n Q:Name the language of the previous sentence.\nA: ");
  auto p = render_language_probe(kDefaults, "");
  CHECK(p.text == "\n Q:Name the language of the previous sentence.\nA: ");
  CHECK(p.provenance.degenerate_input);
}

TEST_CASE("embedded newlines pass through verbatim") {
  auto p = render_language_probe(kDefaults, "line one\nline two");
  CHECK(p.text == "line one\nline two\n Q:Name the language of the previous sentence.\nA: ");
  auto g = render_generation(kDefaults, "a\nb", EntityType::PERS);
  CHECK(util::contains(g.text, "Input: a\nb\n In input,"));
}

TEST_CASE("date probe renders byte exactly") {
  CHECK(render_date_probe(kDefaults, "Nous sommes en guerre.").text ==
        "In which year is the following text likely to have been published: "
        "text: Nous sommes en guerre.");
  auto p = render_date_probe(kDefaults, "");
  CHECK(p.provenance.degenerate_input);
  CHECK(p.text == "In which year is the following text likely to have been published: text: ");
}

TEST_CASE("a sentence containing a placeholder string is not re-expanded") {
  auto p = render_generation(kDefaults, "weird <sentence> token", EntityType::PERS);
  CHECK(util::contains(p.text, "Input: weird <sentence> token\n"));
  auto d = render_disambiguation(kDefaults, "the <entity> here", "<entity>", EntityType::PERS,
                                 EntityType::LOC);
  CHECK(util::contains(d.text, "is <entity> a person or a location?"));
}

TEST_CASE("rendering is deterministic and injective in the sentence") {
  testsupport::Rng rng(0xABCD);
  std::set<std::string> prompts;
  std::vector<std::string> sentences;
  for (int i = 0; i < 200; ++i) {
    std::string s = testsupport::random_unicode_string(rng, 30);
    if (std::find(sentences.begin(), sentences.end(), s) != sentences.end()) continue;
    sentences.push_back(s);
    auto once = render_generation(kDefaults, s, EntityType::LOC).text;
    auto twice = render_generation(kDefaults, s, EntityType::LOC).text;
    CHECK(once == twice);
    prompts.insert(once);
  }
  CHECK(prompts.size() == sentences.size());
}

TEST_CASE("default templates round trip through the config format") {
  util::KvFile kv = kDefaults.to_kv();
  std::string serialized = util::serialize_kv(kv);
  TemplateSet reloaded = TemplateSet::from_kv(util::parse_kv(serialized));
  for (EntityType t : corpus::kEntityTypes) CHECK(reloaded.generation(t) == kDefaults.generation(t));
  CHECK(reloaded.disambiguation == kDefaults.disambiguation);
  CHECK(reloaded.probe_language == kDefaults.probe_language);
  CHECK(reloaded.probe_date == kDefaults.probe_date);
  CHECK(util::serialize_kv(reloaded.to_kv()) == serialized);
}

TEST_CASE("template validation rejects missing placeholders") {
  TemplateSet bad = kDefaults;
  bad.generation_pers = "no placeholder here";
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  TemplateSet twice = kDefaults;
  twice.generation_loc = "<sentence> and <sentence>";
  CHECK_THROWS_AS(twice.validate(), ConfigError);

  TemplateSet probe = kDefaults;
  probe.probe_date = "missing the text slot";
  CHECK_THROWS_AS(probe.validate(), ConfigError);

  util::KvFile kv = kDefaults.to_kv();
  kv.set("generation.MISC", "bogus");
  CHECK_THROWS_AS(TemplateSet::from_kv(kv), ConfigError);
}

TEST_CASE("overridden templates are used by the renderers") {
  util::KvFile kv;
  kv.set("generation.PERS", "Who is in <sentence>?");
  TemplateSet custom = TemplateSet::from_kv(kv);
  CHECK(render_generation(custom, "here", EntityType::PERS).text == "Who is in here?");
  // untouched keys keep the defaults
  CHECK(custom.generation_loc == kDefaults.generation_loc);
}
