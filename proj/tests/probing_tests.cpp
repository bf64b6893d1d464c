#include <string>
#include <vector>

#include "doctest.h"
#include "support/oracles.hpp"
#include "zsner/backend.hpp"
#include "zsner/probing.hpp"

using namespace zsner;
using namespace zsner::probe;

TEST_CASE("language answers normalize by containment") {
  CHECK(parse_language_answer("French") == "fr");
  CHECK(parse_language_answer("The language is German.") == "de");
  CHECK(parse_language_answer("deutsch") == "de");
  CHECK(parse_language_answer("C'est du FRANÇAIS") == "fr");
  CHECK(parse_language_answer("français") == "fr");
  CHECK(parse_language_answer("english, probably") == "en");
  CHECK_FALSE(parse_language_answer("Latin").has_value());
  CHECK_FALSE(parse_language_answer("").has_value());
  // fixed en/de/fr probe order decides multi-language answers
  CHECK(parse_language_answer("German or English") == "en");
}

TEST_CASE("language accuracy counts absent predictions as wrong") {
  std::vector<LanguageProbeResult> results;
  auto add = [&](const std::string& gold, std::optional<std::string> pred) {
    LanguageProbeResult r;
    r.gold_language = gold;
    r.predicted = std::move(pred);
    results.push_back(std::move(r));
  };
  // hand-scored 10-item fixture: fr 3/4, de 2/3, en 1/3
  add("fr", "fr");
  add("fr", "fr");
  add("fr", "fr");
  add("fr", "en");
  add("de", "de");
  add("de", "de");
  add("de", std::nullopt);
  add("en", "en");
  add("en", "de");
  add("en", std::nullopt);

  auto acc = language_accuracy(results);
  CHECK(acc["fr"].total == 4);
  CHECK(acc["fr"].correct == 3);
  CHECK(acc["fr"].accuracy() == doctest::Approx(0.75));
  CHECK(acc["de"].accuracy() == doctest::Approx(2.0 / 3.0));
  CHECK(acc["en"].accuracy() == doctest::Approx(1.0 / 3.0));

  std::vector<LanguageProbeResult> perfect;
  for (int i = 0; i < 5; ++i) {
    LanguageProbeResult r;
    r.gold_language = "de";
    r.predicted = "de";
    perfect.push_back(r);
  }
  CHECK(language_accuracy(perfect)["de"].accuracy() == 1.0);
}

TEST_CASE("year parsing takes the first plausible four digit run") {
  CHECK(parse_year("1850") == 1850);
  CHECK(parse_year("around 1850 or 1860") == 1850);
  CHECK_FALSE(parse_year("unknown").has_value());
  CHECK_FALSE(parse_year("18500 years ago").has_value());  // five digit run
  CHECK(parse_year("in 18500 or 1901") == 1901);
  CHECK(parse_year("year 2099.") == 2099);
  CHECK_FALSE(parse_year("1399").has_value());
  CHECK_FALSE(parse_year("2101").has_value());
  CHECK(parse_year("the 1300s, well, 1402") == 1402);
}

TEST_CASE("year parsing round trips its own rendering") {
  for (int y = 1400; y <= 2100; y += 7) CHECK(parse_year(std::to_string(y)) == y);
  CHECK(parse_year("1400") == 1400);
  CHECK(parse_year("2100") == 2100);
}

TEST_CASE("date errors use mean and median of absolute errors") {
  std::vector<DateProbeResult> results;
  auto add = [&](const std::string& lang, int gold, std::optional<int> pred) {
    DateProbeResult r;
    r.language = lang;
    r.gold_year = gold;
    r.predicted_year = pred;
    results.push_back(std::move(r));
  };
  add("en", 1910, 1900);  // error 10
  add("en", 1800, 1850);  // error 50
  auto stats = date_errors(results);
  CHECK(stats["en"].n_scored == 2);
  CHECK(stats["en"].mean_abs_error == doctest::Approx(30.0));
  CHECK(stats["en"].median_abs_error == doctest::Approx(30.0));  // even count: middle average

  results.clear();
  add("fr", 1900, 1900);
  stats = date_errors(results);
  CHECK(stats["fr"].mean_abs_error == doctest::Approx(0.0));
  CHECK(stats["fr"].median_abs_error == doctest::Approx(0.0));

  results.clear();
  add("de", 1900, std::nullopt);
  stats = date_errors(results);
  CHECK(stats["de"].n_scored == 0);
  CHECK(stats["de"].n_unparsed == 1);
  CHECK_FALSE(stats["de"].mean_abs_error.has_value());
  CHECK_FALSE(stats["de"].median_abs_error.has_value());

  // odd count median is the middle element
  results.clear();
  add("en", 1900, 1901);  // 1
  add("en", 1900, 1910);  // 10
  add("en", 1900, 2000);  // 100
  stats = date_errors(results);
  CHECK(stats["en"].median_abs_error == doctest::Approx(10.0));
  CHECK(stats["en"].mean_abs_error == doctest::Approx(111.0 / 3.0));
}

namespace {

std::vector<WiliSentence> small_wili() {
  std::vector<WiliSentence> all;
  for (int i = 0; i < 4; ++i) all.push_back({"english sentence " + std::to_string(i), "en"});
  for (int i = 0; i < 3; ++i) all.push_back({"deutscher satz " + std::to_string(i), "de"});
  for (int i = 0; i < 3; ++i) all.push_back({"phrase française " + std::to_string(i), "fr"});
  return all;
}

}  // namespace

TEST_CASE("wili loading accepts combined and paired layouts") {
  auto combined = load_wili("hello world\teng\nhallo welt\tdeu\nbonjour\tfra\nciao\tita\n");
  REQUIRE(combined.size() == 3);  // the Italian line is ignored
  CHECK(combined[0].language == "en");
  CHECK(combined[1].language == "de");
  CHECK(combined[2].language == "fr");
  CHECK(combined[0].text == "hello world");

  auto paired = load_wili("one\ntwo\nthree\n", std::optional<std::string_view>("en\nde\nfr\n"));
  REQUIRE(paired.size() == 3);
  CHECK(paired[2].text == "three");
  CHECK(paired[2].language == "fr");

  CHECK_THROWS_AS(load_wili("a\nb\n", std::optional<std::string_view>("en\n")), ParseError);
  CHECK_THROWS_AS(load_wili("no label here\n"), ParseError);
}

TEST_CASE("wili sampling is deterministic in the seed") {
  auto all = small_wili();
  auto a = sample_wili_subset(all, 2, 42);
  auto b = sample_wili_subset(all, 2, 42);
  REQUIRE(a.size() == 6);  // 2 per language
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].text == b[i].text);
    CHECK(a[i].language == b[i].language);
  }
  long en = 0, de = 0, fr = 0;
  for (auto& s : a) {
    if (s.language == "en") ++en;
    if (s.language == "de") ++de;
    if (s.language == "fr") ++fr;
  }
  CHECK(en == 2);
  CHECK(de == 2);
  CHECK(fr == 2);

  // a different seed is allowed to pick a different subset; over a few seeds
  // at least one must differ or the sampler is ignoring the seed
  bool any_difference = false;
  for (std::uint64_t seed = 1; seed <= 8 && !any_difference; ++seed) {
    auto c = sample_wili_subset(all, 2, seed);
    for (std::size_t i = 0; i < a.size(); ++i)
      if (c[i].text != a[i].text) any_difference = true;
  }
  CHECK(any_difference);
}

TEST_CASE("wili sampling reports insufficient sentences") {
  auto all = small_wili();
  CHECK_THROWS_WITH_AS(sample_wili_subset(all, 1000000, 1), doctest::Contains("have 4"), Error);
}

TEST_CASE("document prefixes truncate to the requested token count") {
  corpus::Document doc;
  doc.id = "d";
  doc.language = "en";
  doc.date = {1900, {}, {}};
  corpus::Sentence s1, s2;
  for (int i = 0; i < 6; ++i) {
    corpus::Token tok;
    tok.surface = "w" + std::to_string(i);
    tok.index = i;
    (i < 4 ? s1 : s2).tokens.push_back(tok);
  }
  s1.id = 0;
  s2.id = 1;
  doc.sentences = {s1, s2};

  CHECK(document_prefix(doc, 100) == "w0 w1 w2 w3 w4 w5");
  CHECK(document_prefix(doc, 5) == "w0 w1 w2 w3 w4");  // crosses the sentence boundary
  CHECK(document_prefix(doc, 1) == "w0");
}

TEST_CASE("probe runners parse answers through the scripted mock") {
  prompt::TemplateSet templates = prompt::TemplateSet::defaults();
  backend::MockBackend mock;
  std::vector<WiliSentence> sentences = {{"Guten Tag allerseits", "de"},
                                         {"Bonjour tout le monde", "fr"}};
  mock.script(prompt::render_language_probe(templates, sentences[0].text, "").text, "German");
  mock.script(prompt::render_language_probe(templates, sentences[1].text, "").text, "Latin");

  backend::ResponseCache cache = backend::ResponseCache::in_memory();
  backend::CachingBackend cached(mock, cache, 2);
  auto results = run_language_probe(sentences, cached, templates);
  REQUIRE(results.size() == 2);
  CHECK(results[0].predicted == "de");
  CHECK_FALSE(results[1].predicted.has_value());
  auto acc = language_accuracy(results);
  CHECK(acc["de"].accuracy() == 1.0);
  CHECK(acc["fr"].accuracy() == 0.0);

  corpus::Document doc;
  doc.id = "probe-doc";
  doc.language = "fr";
  doc.date = {1900, {}, {}};
  corpus::Sentence sent;
  corpus::Token tok;
  tok.surface = "texte";
  sent.tokens = {tok};
  doc.sentences = {sent};
  backend::MockBackend date_mock;
  date_mock.script(prompt::render_date_probe(templates, "texte", "").text, "probably 1890 or so");
  backend::CachingBackend date_cached(date_mock, cache, 1);
  auto date_results = run_date_probe({doc}, date_cached, templates);
  REQUIRE(date_results.size() == 1);
  CHECK(date_results[0].predicted_year == 1890);
  CHECK(date_results[0].absolute_error() == 10);
  auto stats = date_errors(date_results);
  CHECK(stats["fr"].mean_abs_error == doctest::Approx(10.0));

  std::string csv = date_report_csv(date_results);
  CHECK(util::contains(csv, "language,n_scored,n_unparsed,mean_abs_error,median_abs_error"));
  CHECK(util::contains(csv, "fr,1,0,10.00,10.0"));
  std::string lang_csv = language_report_csv(results);
  CHECK(util::contains(lang_csv, "language,n,accuracy"));
  CHECK(util::contains(lang_csv, "de,1,1.000"));
}
