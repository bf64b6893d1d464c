#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "zsner/cli.hpp"
#include "zsner/util.hpp"

using namespace zsner;

namespace {

namespace fs = std::filesystem;

const std::string kFixtures = ZSNER_FIXTURE_DIR;

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  std::streambuf* old_out = std::cout.rdbuf(out.rdbuf());
  std::streambuf* old_err = std::cerr.rdbuf(err.rdbuf());
  int code = cli::dispatch(args);
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  return {code, out.str(), err.str()};
}

fs::path temp_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("zsner_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string fixture_config(const fs::path& dir, const std::string& extra = "") {
  std::string config =
      "corpus.de.dev = " + kFixtures + "/corpus/de_dev.tsv\n" +
      "corpus.en.dev = " + kFixtures + "/corpus/en_dev.tsv\n" +
      "corpus.fr.train = " + kFixtures + "/corpus/fr_train.tsv\n" +
      "corpus.fr.dev = " + kFixtures + "/corpus/fr_dev.tsv\n" +
      "backend.kind = mock\n" +
      "mock.script = " + kFixtures + "/mock_script.jsonl\n" +
      "out = " + (dir / "out").string() + "\n" + extra;
  fs::path path = dir / "config.kv";
  std::ofstream(path) << config;
  return path.string();
}

}  // namespace

TEST_CASE("help lists the subcommands and exits cleanly") {
  auto res = run_cli({"--help"});
  CHECK(res.code == 0);
  for (const char* cmd : {"stats", "run", "eval", "probe-lang", "probe-date", "report"})
    CHECK(util::contains(res.out, cmd));
  auto sub = run_cli({"run", "--help"});
  CHECK(sub.code == 0);
  for (const char* flag : {"--config", "--backend-url", "--mock-script", "--threshold",
                           "--parallelism", "--seed", "--out", "--cache"})
    CHECK(util::contains(sub.out, flag));
}

TEST_CASE("unknown flags fail fast with a usage error") {
  auto res = run_cli({"stats", "--bogus-flag"});
  CHECK(res.code == 2);
  CHECK(util::contains(res.err, "error"));
  auto nocmd = run_cli({});
  CHECK(nocmd.code == 2);
}

TEST_CASE("missing config keys are reported as machine readable usage errors") {
  fs::path dir = temp_dir("missing");
  std::ofstream(dir / "config.kv") << "backend.kind = mock\n";
  auto res = run_cli({"stats", "--config", (dir / "config.kv").string()});
  CHECK(res.code == 2);
  auto err = nlohmann::json::parse(res.err);
  CHECK(err["error"]["type"] == "usage");
  CHECK(util::contains(err["error"]["missing_keys"].dump(), "corpus"));

  std::ofstream(dir / "run.kv") << "corpus.en.dev = " + kFixtures + "/corpus/en_dev.tsv\n";
  auto run_res = run_cli({"run", "--config", (dir / "run.kv").string()});
  CHECK(run_res.code == 2);
  auto run_err = nlohmann::json::parse(run_res.err);
  CHECK(util::contains(run_err["error"]["missing_keys"].dump(), "mock.script"));
}

TEST_CASE("unknown config keys are rejected") {
  fs::path dir = temp_dir("unknown_key");
  std::ofstream(dir / "config.kv") << "no.such.key = 1\n";
  auto res = run_cli({"stats", "--config", (dir / "config.kv").string()});
  CHECK(res.code == 2);
  CHECK(util::contains(res.err, "no.such.key"));
}

TEST_CASE("stats writes the csv atomically and mirrors it to stdout") {
  fs::path dir = temp_dir("stats");
  auto res = run_cli({"stats", "--config", fixture_config(dir)});
  REQUIRE(res.code == 0);
  CHECK(util::contains(res.out, "period,language,documents,tokens,ne_percent"));
  CHECK(util::contains(res.out, "Total,fr,3,18,50.0"));
  CHECK(util::contains(res.out, "Total,de,1,6,66.7"));  // 4 of 6 tokens covered
  CHECK(util::contains(res.out, "Total,en,1,5,40.0"));

  std::string file = util::read_file(dir / "out" / "stats.csv");
  CHECK(file == res.out);
  CHECK_FALSE(fs::exists(dir / "out" / "stats.csv.tmp"));
}

TEST_CASE("run produces the store, diagnostics and cache; eval matches the oracle file") {
  fs::path dir = temp_dir("run_eval");
  std::string config = fixture_config(dir);

  auto run_res = run_cli({"run", "--config", config});
  REQUIRE(run_res.code == 0);
  CHECK(fs::exists(dir / "out" / "store.jsonl"));
  CHECK(fs::exists(dir / "out" / "diagnostics.json"));
  CHECK(fs::exists(dir / "out" / "cache.jsonl"));

  auto diag = nlohmann::json::parse(util::read_file(dir / "out" / "diagnostics.json"));
  CHECK(diag["failed_requests"] == 0);
  CHECK(diag["empty_answer_count"] == 3);

  auto eval_res = run_cli({"eval", "--config", config});
  REQUIRE(eval_res.code == 0);
  std::string metrics = util::read_file(dir / "out" / "metrics.csv");
  std::string expected = util::read_file(kFixtures + "/expected_metrics.csv");
  CHECK(metrics == expected);
}

TEST_CASE("rerunning with a warm cache is idempotent") {
  fs::path dir = temp_dir("idempotent");
  std::string config = fixture_config(dir);

  REQUIRE(run_cli({"run", "--config", config}).code == 0);
  std::string cache_first = util::read_file(dir / "out" / "cache.jsonl");
  std::string store_first = util::read_file(dir / "out" / "store.jsonl");

  REQUIRE(run_cli({"run", "--config", config}).code == 0);
  CHECK(util::read_file(dir / "out" / "cache.jsonl") == cache_first);
  CHECK(util::read_file(dir / "out" / "store.jsonl") == store_first);
}

TEST_CASE("a run against an unreachable backend exits nonzero with error records") {
  fs::path dir = temp_dir("unreachable");
  std::string config = fixture_config(dir,
                                      "backend.kind = http\n"
                                      "backend.url = http://127.0.0.1:9/generate\n"
                                      "http.retries = 0\n"
                                      "http.timeout_s = 1\n");
  auto res = run_cli({"run", "--config", config});
  CHECK(res.code == 1);
  auto err = nlohmann::json::parse(res.err);
  CHECK(err["error"]["failed_requests"] == 25);
  std::string store = util::read_file(dir / "out" / "store.jsonl");
  CHECK(util::contains(store, "\"stage\":\"error\""));
}

TEST_CASE("flags beat the environment which beats the config") {
  fs::path dir = temp_dir("precedence");
  std::string config = fixture_config(dir);
  setenv("GENERATION_BACKEND_URL", "http://127.0.0.1:9/nowhere", 1);
  // env alone switches to the http backend, which is unreachable -> failure
  std::ofstream(dir / "fast.kv") << util::read_file(dir / "config.kv")
                                 << "http.retries = 0\nhttp.timeout_s = 1\n";
  auto env_res = run_cli({"run", "--config", (dir / "fast.kv").string()});
  CHECK(env_res.code == 1);
  // an explicit mock flag wins over the environment
  auto flag_res = run_cli({"run", "--config", config, "--mock-script",
                           kFixtures + "/mock_script.jsonl"});
  CHECK(flag_res.code == 0);
  unsetenv("GENERATION_BACKEND_URL");
}

TEST_CASE("mutually exclusive backend flags are rejected") {
  fs::path dir = temp_dir("exclusive");
  auto res = run_cli({"run", "--config", fixture_config(dir), "--backend-url", "http://x/",
                      "--mock-script", "y"});
  CHECK(res.code == 2);
}

TEST_CASE("threshold overrides flow into the run and the sweep") {
  fs::path dir = temp_dir("thresholds");
  std::string config = fixture_config(dir);
  REQUIRE(run_cli({"run", "--config", config, "--threshold", "0.0"}).code == 0);
  auto store = nlohmann::json::parse(
      util::split(util::read_file(dir / "out" / "store.jsonl"), '\n')[0]);
  CHECK(store["match_threshold"] == 0.0);

  REQUIRE(run_cli({"eval", "--config", config, "--thresholds", "0.0,0.5"}).code == 0);
  std::string metrics = util::read_file(dir / "out" / "metrics.csv");
  CHECK(util::contains(metrics, ",0.000,"));
  CHECK(util::contains(metrics, ",0.500,"));
  CHECK_FALSE(util::contains(metrics, ",0.100,"));

  auto bad = run_cli({"eval", "--config", config, "--thresholds", "0.0,nope"});
  CHECK(bad.code == 2);
}

TEST_CASE("report renders the bundle and rejects unknown formats") {
  fs::path dir = temp_dir("report");
  std::string config = fixture_config(dir);
  REQUIRE(run_cli({"run", "--config", config}).code == 0);
  REQUIRE(run_cli({"eval", "--config", config}).code == 0);

  auto res = run_cli({"report", "--config", config});
  REQUIRE(res.code == 0);
  for (const char* file : {"metrics.csv", "metrics.json", "baselines.csv",
                           "charts_thresholds.svg", "charts_periods.svg"})
    CHECK(fs::exists(dir / "out" / file));
  CHECK(util::contains(util::read_file(dir / "out" / "baselines.csv"), "fr,0.912,0.931,0.921"));
  std::string svg = util::read_file(dir / "out" / "charts_thresholds.svg");
  CHECK(util::contains(svg, "data-series=\"fr:precision\""));

  auto bad = run_cli({"report", "--config", config, "--format", "yaml"});
  CHECK(bad.code == 2);

  auto csv_only_dir = temp_dir("report_csv");
  std::string csv_config = fixture_config(csv_only_dir);
  REQUIRE(run_cli({"run", "--config", csv_config}).code == 0);
  REQUIRE(run_cli({"eval", "--config", csv_config}).code == 0);
  fs::remove(csv_only_dir / "out" / "charts_thresholds.svg");
  REQUIRE(run_cli({"report", "--config", csv_config, "--format", "csv"}).code == 0);
  CHECK_FALSE(fs::exists(csv_only_dir / "out" / "charts_thresholds.svg"));
}

TEST_CASE("probe commands run through the mock and write their reports") {
  fs::path dir = temp_dir("probes");

  // build a small wili file and script both probes
  prompt::TemplateSet templates = prompt::TemplateSet::defaults();
  std::string wili;
  std::string script;
  for (int i = 0; i < 3; ++i) {
    std::string en = "english text " + std::to_string(i);
    std::string de = "deutscher text " + std::to_string(i);
    std::string fr = "texte français " + std::to_string(i);
    wili += en + "\teng\n" + de + "\tdeu\n" + fr + "\tfra\n";
    for (auto& [text, answer] : std::vector<std::pair<std::string, std::string>>{
             {en, "English"}, {de, "German"}, {fr, "Latin"}}) {
      nlohmann::json j;
      j["prompt"] = prompt::render_language_probe(templates, text, "").text;
      j["response"] = answer;
      script += j.dump() + "\n";
    }
  }
  // date probes over the fixture corpus documents
  for (auto& [file, lang] : std::vector<std::pair<std::string, std::string>>{
           {"corpus/de_dev.tsv", "de"},
           {"corpus/en_dev.tsv", "en"},
           {"corpus/fr_train.tsv", "fr"},
           {"corpus/fr_dev.tsv", "fr"}}) {
    for (auto& doc : corpus::parse_hipe_tsv(util::read_file(kFixtures + "/" + file), lang)) {
      nlohmann::json j;
      j["prompt"] = prompt::render_date_probe(templates, probe::document_prefix(doc, 100), "").text;
      j["response"] = "published around " + std::to_string(doc.date.year + 10);
      script += j.dump() + "\n";
    }
  }
  std::ofstream(dir / "wili.tsv") << wili;
  std::ofstream(dir / "script.jsonl") << script;

  std::string config = fixture_config(dir, "mock.script = " + (dir / "script.jsonl").string() +
                                               "\nwili.sentences = " + (dir / "wili.tsv").string() +
                                               "\nprobe.per_language = 2\n");

  auto lang_res = run_cli({"probe-lang", "--config", config});
  REQUIRE(lang_res.code == 0);
  std::string lang_csv = util::read_file(dir / "out" / "probe_language.csv");
  CHECK(util::contains(lang_csv, "en,2,1.000"));
  CHECK(util::contains(lang_csv, "de,2,1.000"));
  CHECK(util::contains(lang_csv, "fr,2,0.000"));  // scripted to answer Latin

  auto date_res = run_cli({"probe-date", "--config", config});
  REQUIRE(date_res.code == 0);
  std::string date_csv = util::read_file(dir / "out" / "probe_date.csv");
  CHECK(util::contains(date_csv, "language,n_scored,n_unparsed,mean_abs_error,median_abs_error"));
  CHECK(util::contains(date_csv, "de,1,0,10.00,10.0"));
  CHECK(util::contains(date_csv, "fr,3,0,10.00,10.0"));

  auto missing = run_cli({"probe-lang", "--config", fixture_config(temp_dir("probe_missing"))});
  CHECK(missing.code == 2);
}
