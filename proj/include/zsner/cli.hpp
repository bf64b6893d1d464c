#pragma once

// The zsner command line: stats, run, eval, probe-lang, probe-date, report.
// Configuration comes from a flat key=value file with flag overrides (flags
// win); the backend URL may also arrive via GENERATION_BACKEND_URL, which
// ranks between flags and the config file. All outputs are written through
// a temp-file rename so readers never see partial files.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "zsner/backend.hpp"
#include "zsner/corpus.hpp"
#include "zsner/extraction.hpp"
#include "zsner/http_backend.hpp"
#include "zsner/metrics.hpp"
#include "zsner/probing.hpp"
#include "zsner/prompts.hpp"
#include "zsner/report.hpp"
#include "zsner/util.hpp"

namespace zsner::cli {

namespace fs = std::filesystem;

struct RunConfig {
  // language -> (split name, path) in config-file order; merged per language
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> corpus_files;
  std::string backend_kind = "mock";
  std::string backend_url;
  std::string mock_script_path;
  std::string templates_path;
  double match_threshold = 0.4;
  std::vector<double> eval_thresholds = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  double period_threshold = 0.4;
  int parallelism = 4;
  std::string cache_path;  // defaults to <out>/cache.jsonl
  std::uint64_t seed = 42;
  std::string out_dir = "out";
  int max_new_tokens = 64;
  int http_timeout_s = 30;
  int http_retries = 3;
  int probe_date_tokens = 100;
  long probe_per_language = 1000;
  std::string wili_sentences_path;
  std::string wili_labels_path;

  std::string cache_file() const {
    return cache_path.empty() ? (fs::path(out_dir) / "cache.jsonl").string() : cache_path;
  }
};

inline std::vector<double> parse_threshold_list(const std::string& text) {
  std::vector<double> out;
  for (const std::string& part : util::split(text, ',')) {
    auto t = util::trim(part);
    if (t.empty()) continue;
    try {
      out.push_back(std::stod(std::string(t)));
    } catch (const std::exception&) {
      throw UsageError("bad threshold value: " + std::string(t));
    }
  }
  for (double t : out)
    if (t < 0.0 || t > 1.0) throw UsageError("thresholds must lie in [0,1]");
  if (out.empty()) throw UsageError("empty threshold list");
  return out;
}

inline RunConfig config_from_kv(const util::KvFile& kv) {
  RunConfig cfg;
  for (auto& [key, value] : kv.entries) {
    if (key.rfind("corpus.", 0) == 0) {
      auto rest = key.substr(7);
      auto dot = rest.find('.');
      if (dot == std::string::npos)
        throw UsageError("corpus keys look like corpus.<lang>.<split>: " + key);
      std::string lang = rest.substr(0, dot);
      if (!corpus::valid_language(lang)) throw UsageError("unsupported language in key: " + key);
      cfg.corpus_files[lang].emplace_back(rest.substr(dot + 1), value);
    } else if (key == "backend.kind") {
      if (value != "mock" && value != "http")
        throw UsageError("backend.kind must be mock or http");
      cfg.backend_kind = value;
    } else if (key == "backend.url") cfg.backend_url = value;
    else if (key == "mock.script") cfg.mock_script_path = value;
    else if (key == "templates") cfg.templates_path = value;
    else if (key == "match_threshold") cfg.match_threshold = std::stod(value);
    else if (key == "eval_thresholds") cfg.eval_thresholds = parse_threshold_list(value);
    else if (key == "period_threshold") cfg.period_threshold = std::stod(value);
    else if (key == "parallelism") cfg.parallelism = std::stoi(value);
    else if (key == "cache") cfg.cache_path = value;
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "out") cfg.out_dir = value;
    else if (key == "max_new_tokens") cfg.max_new_tokens = std::stoi(value);
    else if (key == "http.timeout_s") cfg.http_timeout_s = std::stoi(value);
    else if (key == "http.retries") cfg.http_retries = std::stoi(value);
    else if (key == "probe.date_tokens") cfg.probe_date_tokens = std::stoi(value);
    else if (key == "probe.per_language") cfg.probe_per_language = std::stol(value);
    else if (key == "wili.sentences") cfg.wili_sentences_path = value;
    else if (key == "wili.labels") cfg.wili_labels_path = value;
    else throw UsageError("unknown config key: " + key);
  }
  if (cfg.parallelism < 1) throw UsageError("parallelism must be >= 1");
  if (cfg.match_threshold < 0.0 || cfg.match_threshold > 1.0)
    throw UsageError("match_threshold must lie in [0,1]");
  return cfg;
}

// --- shared command plumbing -------------------------------------------------

inline prompt::TemplateSet load_templates(const RunConfig& cfg) {
  if (cfg.templates_path.empty()) return prompt::TemplateSet::defaults();
  return prompt::TemplateSet::from_kv(util::parse_kv(util::read_file(cfg.templates_path)));
}

inline std::vector<corpus::Document> load_corpus(const RunConfig& cfg) {
  if (cfg.corpus_files.empty())
    throw UsageError("no corpus files configured", {"corpus.<lang>.<split>"});
  std::vector<corpus::Document> all;
  for (auto& [lang, files] : cfg.corpus_files) {
    std::vector<std::vector<corpus::Document>> splits;
    for (auto& [split, path] : files)
      splits.push_back(corpus::parse_hipe_tsv(util::read_file(path), lang));
    corpus::Corpus merged = corpus::merge_splits(splits);
    all.insert(all.end(), merged.documents.begin(), merged.documents.end());
  }
  return all;
}

inline std::unique_ptr<backend::Backend> build_backend(const RunConfig& cfg) {
  if (cfg.backend_kind == "http") {
    if (cfg.backend_url.empty())
      throw UsageError("http backend needs a URL", {"backend.url"});
    backend::HttpOptions options;
    options.timeout_s = cfg.http_timeout_s;
    options.retries = cfg.http_retries;
    return std::make_unique<backend::HttpBackend>(cfg.backend_url, options);
  }
  if (cfg.mock_script_path.empty())
    throw UsageError("mock backend needs a script file", {"mock.script"});
  return std::make_unique<backend::MockBackend>(
      backend::MockBackend::script_from_jsonl(util::read_file(cfg.mock_script_path)));
}

// --- commands ------------------------------------------------------------------

inline int cmd_stats(const RunConfig& cfg) {
  corpus::Corpus merged;
  merged.documents = load_corpus(cfg);
  corpus::StatsTable table = corpus::corpus_stats(merged);
  std::string csv = corpus::stats_csv(table);
  util::write_file_atomic(fs::path(cfg.out_dir) / "stats.csv", csv);
  std::cout << csv;
  return 0;
}

inline int cmd_run(const RunConfig& cfg) {
  std::vector<corpus::Document> documents = load_corpus(cfg);
  std::unique_ptr<backend::Backend> inner = build_backend(cfg);
  fs::create_directories(cfg.out_dir);
  backend::ResponseCache cache(cfg.cache_file());
  backend::CachingBackend cached(*inner, cache, cfg.parallelism);

  extract::PipelineConfig pipeline_cfg;
  pipeline_cfg.templates = load_templates(cfg);
  pipeline_cfg.match_threshold = cfg.match_threshold;
  pipeline_cfg.max_new_tokens = cfg.max_new_tokens;

  extract::PipelineResult result = extract::run_pipeline(documents, cached, pipeline_cfg);
  util::write_file_atomic(fs::path(cfg.out_dir) / "store.jsonl",
                          extract::store_to_jsonl(result.store));
  util::write_file_atomic(
      fs::path(cfg.out_dir) / "diagnostics.json",
      extract::diagnostics_json(extract::diagnostics(result.store)).dump(2) + "\n");

  std::cout << "cells: " << result.store.cells.size()
            << "  cache records: " << cache.size()
            << "  failed requests: " << result.failed_requests << "\n";
  if (result.failed_requests > 0) {
    nlohmann::ordered_json err;
    err["error"]["type"] = "backend";
    err["error"]["message"] = "some generation requests failed; see store.jsonl error records";
    err["error"]["failed_requests"] = result.failed_requests;
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}

inline int cmd_eval(const RunConfig& cfg) {
  std::vector<corpus::Document> documents = load_corpus(cfg);
  fs::path store_path = fs::path(cfg.out_dir) / "store.jsonl";
  extract::Store store = extract::store_from_jsonl(util::read_file(store_path));
  std::vector<metrics::EvalQuery> queries = extract::build_eval_queries(store, documents);
  std::vector<metrics::MetricsRow> rows =
      metrics::sweep(queries, cfg.eval_thresholds, cfg.period_threshold);

  util::write_file_atomic(fs::path(cfg.out_dir) / "metrics.csv", metrics::metrics_csv(rows));
  util::write_file_atomic(
      fs::path(cfg.out_dir) / "metrics.json",
      metrics::metrics_json(rows, metrics::baseline_table(), store.match_threshold).dump(2) + "\n");
  std::cout << "metrics rows: " << rows.size() << "\n";
  return 0;
}

inline int cmd_probe_lang(const RunConfig& cfg) {
  std::vector<std::string> missing;
  if (cfg.wili_sentences_path.empty()) missing.push_back("wili.sentences");
  if (!missing.empty()) throw UsageError("language probe needs a WiLI sentence file", missing);

  std::vector<probe::WiliSentence> all;
  if (cfg.wili_labels_path.empty())
    all = probe::load_wili(util::read_file(cfg.wili_sentences_path));
  else
    all = probe::load_wili(util::read_file(cfg.wili_sentences_path),
                           util::read_file(cfg.wili_labels_path));
  std::vector<probe::WiliSentence> sample =
      probe::sample_wili_subset(all, static_cast<std::size_t>(cfg.probe_per_language), cfg.seed);

  std::unique_ptr<backend::Backend> inner = build_backend(cfg);
  fs::create_directories(cfg.out_dir);
  backend::ResponseCache cache(cfg.cache_file());
  backend::CachingBackend cached(*inner, cache, cfg.parallelism);
  prompt::TemplateSet templates = load_templates(cfg);

  std::vector<probe::LanguageProbeResult> results =
      probe::run_language_probe(sample, cached, templates, cfg.max_new_tokens);
  util::write_file_atomic(fs::path(cfg.out_dir) / "probe_language.csv",
                          probe::language_report_csv(results));

  std::string detail;
  long failed = 0;
  for (const probe::LanguageProbeResult& r : results) {
    nlohmann::ordered_json j;
    j["ref"] = r.ref;
    j["gold"] = r.gold_language;
    j["answer"] = r.raw_answer;
    j["predicted"] = r.predicted ? nlohmann::ordered_json(*r.predicted)
                                 : nlohmann::ordered_json(nullptr);
    if (r.error) {
      j["error"] = *r.error;
      ++failed;
    }
    detail += j.dump() + "\n";
  }
  util::write_file_atomic(fs::path(cfg.out_dir) / "probe_language.jsonl", detail);
  std::cout << probe::language_report_csv(results);
  return failed ? 1 : 0;
}

inline int cmd_probe_date(const RunConfig& cfg) {
  std::vector<corpus::Document> documents = load_corpus(cfg);
  std::unique_ptr<backend::Backend> inner = build_backend(cfg);
  fs::create_directories(cfg.out_dir);
  backend::ResponseCache cache(cfg.cache_file());
  backend::CachingBackend cached(*inner, cache, cfg.parallelism);
  prompt::TemplateSet templates = load_templates(cfg);

  std::vector<probe::DateProbeResult> results = probe::run_date_probe(
      documents, cached, templates, cfg.probe_date_tokens, cfg.max_new_tokens);
  util::write_file_atomic(fs::path(cfg.out_dir) / "probe_date.csv",
                          probe::date_report_csv(results));

  std::string detail;
  long failed = 0;
  for (const probe::DateProbeResult& r : results) {
    nlohmann::ordered_json j;
    j["doc"] = r.doc_id;
    j["language"] = r.language;
    j["gold_year"] = r.gold_year;
    j["answer"] = r.raw_answer;
    j["predicted_year"] = r.predicted_year ? nlohmann::ordered_json(*r.predicted_year)
                                           : nlohmann::ordered_json(nullptr);
    if (r.error) {
      j["error"] = *r.error;
      ++failed;
    }
    detail += j.dump() + "\n";
  }
  util::write_file_atomic(fs::path(cfg.out_dir) / "probe_date.jsonl", detail);
  std::cout << probe::date_report_csv(results);
  return failed ? 1 : 0;
}

inline int cmd_report(const RunConfig& cfg, const std::string& format) {
  if (format != "csv" && format != "json" && format != "svg" && format != "all")
    throw UsageError("unknown report format: " + format);
  fs::path metrics_path = fs::path(cfg.out_dir) / "metrics.json";
  nlohmann::json j = nlohmann::json::parse(util::read_file(metrics_path));
  std::vector<metrics::MetricsRow> rows = metrics::metrics_rows_from_json(j);
  fs::path out(cfg.out_dir);

  if (format == "csv" || format == "all") {
    util::write_file_atomic(out / "metrics.csv", metrics::metrics_csv(rows));
    util::write_file_atomic(out / "baselines.csv",
                            metrics::baselines_csv(metrics::baseline_table()));
  }
  if (format == "json" || format == "all") {
    double match_threshold = 0.4;
    if (j.contains("metadata") && j["metadata"].contains("match_threshold"))
      match_threshold = j["metadata"]["match_threshold"].get<double>();
    util::write_file_atomic(
        out / "metrics.json",
        metrics::metrics_json(rows, metrics::baseline_table(), match_threshold).dump(2) + "\n");
  }
  if (format == "svg" || format == "all") {
    util::write_file_atomic(out / "charts_thresholds.svg", metrics::threshold_chart_svg(rows));
    util::write_file_atomic(out / "charts_periods.svg", metrics::period_chart_svg(rows));
  }
  return 0;
}

}  // namespace zsner::cli

#include "CLI11.hpp"

namespace zsner::cli {

namespace detail {

struct FlagValues {
  std::string config_path;
  std::string backend_url;
  std::string mock_script;
  std::string templates;
  std::string out_dir;
  std::string cache;
  std::string thresholds;
  std::string wili_sentences;
  std::string wili_labels;
  std::string format = "all";
  double threshold = 0.4;
  int parallelism = 4;
  std::uint64_t seed = 42;
  long per_language = 1000;
  int date_tokens = 100;
  int max_new_tokens = 64;
};

struct CommonOpts {
  CLI::Option* backend_url = nullptr;
  CLI::Option* mock_script = nullptr;
  CLI::Option* templates = nullptr;
  CLI::Option* out_dir = nullptr;
  CLI::Option* cache = nullptr;
  CLI::Option* threshold = nullptr;
  CLI::Option* thresholds = nullptr;
  CLI::Option* parallelism = nullptr;
  CLI::Option* seed = nullptr;
  CLI::Option* max_new_tokens = nullptr;
};

inline CommonOpts add_common_options(CLI::App* cmd, FlagValues& v) {
  CommonOpts o;
  cmd->add_option("--config", v.config_path, "flat key=value run config file");
  o.backend_url = cmd->add_option("--backend-url", v.backend_url,
                                  "HTTP generation endpoint (implies the http backend)");
  o.mock_script = cmd->add_option("--mock-script", v.mock_script,
                                  "scripted mock responses, one JSON object per line");
  o.templates = cmd->add_option("--templates", v.templates, "prompt template file");
  o.out_dir = cmd->add_option("--out", v.out_dir, "output directory");
  o.cache = cmd->add_option("--cache", v.cache, "response cache path");
  o.threshold = cmd->add_option("--threshold", v.threshold,
                                "matching threshold used by the run pipeline");
  o.thresholds = cmd->add_option("--thresholds", v.thresholds,
                                 "comma-separated evaluation thresholds");
  o.parallelism = cmd->add_option("--parallelism", v.parallelism, "bounded backend parallelism");
  o.seed = cmd->add_option("--seed", v.seed, "sampling seed");
  o.max_new_tokens =
      cmd->add_option("--max-new-tokens", v.max_new_tokens, "generation length limit");
  return o;
}

inline void apply_overrides(RunConfig& cfg, const FlagValues& v, const CommonOpts& o) {
  // precedence: flag > environment > config file
  if (const char* env = std::getenv("GENERATION_BACKEND_URL"); env && *env) {
    cfg.backend_url = env;
    cfg.backend_kind = "http";
  }
  if (o.backend_url->count()) {
    cfg.backend_url = v.backend_url;
    cfg.backend_kind = "http";
  }
  if (o.mock_script->count()) {
    cfg.mock_script_path = v.mock_script;
    cfg.backend_kind = "mock";
  }
  if (o.backend_url->count() && o.mock_script->count())
    throw UsageError("--backend-url and --mock-script are mutually exclusive");
  if (o.templates->count()) cfg.templates_path = v.templates;
  if (o.out_dir->count()) cfg.out_dir = v.out_dir;
  if (o.cache->count()) cfg.cache_path = v.cache;
  if (o.threshold->count()) {
    if (v.threshold < 0.0 || v.threshold > 1.0)
      throw UsageError("--threshold must lie in [0,1]");
    cfg.match_threshold = v.threshold;
  }
  if (o.thresholds->count()) cfg.eval_thresholds = parse_threshold_list(v.thresholds);
  if (o.parallelism->count()) {
    if (v.parallelism < 1) throw UsageError("--parallelism must be >= 1");
    cfg.parallelism = v.parallelism;
  }
  if (o.seed->count()) cfg.seed = v.seed;
  if (o.max_new_tokens->count()) cfg.max_new_tokens = v.max_new_tokens;
}

inline void print_error_json(std::string_view type, const std::exception& e,
                             const std::vector<std::string>& missing = {}) {
  nlohmann::ordered_json j;
  j["error"]["type"] = std::string(type);
  j["error"]["message"] = e.what();
  if (!missing.empty()) j["error"]["missing_keys"] = missing;
  std::cerr << j.dump() << "\n";
}

}  // namespace detail

// Entry point shared by the binary and the test suites. Exit codes: 0 on
// success, 1 on runtime/backend failure, 2 on usage errors.
inline int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"zero-shot prompt-based NER harness for historical newspaper corpora"};
  app.require_subcommand(1);

  detail::FlagValues v;
  std::map<std::string, detail::CommonOpts> opts;

  CLI::App* stats = app.add_subcommand("stats", "corpus statistics by period and language");
  CLI::App* run = app.add_subcommand("run", "run the generation pipeline into a prediction store");
  CLI::App* eval = app.add_subcommand("eval", "score a prediction store against the gold corpus");
  CLI::App* probe_lang = app.add_subcommand("probe-lang", "language identification probe");
  CLI::App* probe_date = app.add_subcommand("probe-date", "publication date probe");
  CLI::App* report = app.add_subcommand("report", "render CSV/JSON/SVG reports from metrics.json");

  for (CLI::App* cmd : {stats, run, eval, probe_lang, probe_date, report})
    opts[cmd->get_name()] = detail::add_common_options(cmd, v);

  probe_lang->add_option("--wili-sentences", v.wili_sentences, "WiLI sentence file");
  probe_lang->add_option("--wili-labels", v.wili_labels, "WiLI label file");
  probe_lang->add_option("--per-language", v.per_language, "sample size per language");
  probe_date->add_option("--date-tokens", v.date_tokens, "document tokens fed to the date probe");
  report->add_option("--format", v.format, "csv | json | svg | all");

  std::vector<const char*> argv;
  argv.push_back("zsner");
  for (const std::string& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    if (code != 0) detail::print_error_json("usage", e);
    return code == 0 ? 0 : 2;
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    util::KvFile kv;
    if (!v.config_path.empty()) kv = util::parse_kv(util::read_file(v.config_path));
    RunConfig cfg = config_from_kv(kv);
    detail::apply_overrides(cfg, v, opts[active->get_name()]);

    if (active == stats) return cmd_stats(cfg);
    if (active == run) return cmd_run(cfg);
    if (active == eval) return cmd_eval(cfg);
    if (active == probe_lang) {
      if (probe_lang->count("--wili-sentences")) cfg.wili_sentences_path = v.wili_sentences;
      if (probe_lang->count("--wili-labels")) cfg.wili_labels_path = v.wili_labels;
      if (probe_lang->count("--per-language")) cfg.probe_per_language = v.per_language;
      return cmd_probe_lang(cfg);
    }
    if (active == probe_date) {
      if (probe_date->count("--date-tokens")) cfg.probe_date_tokens = v.date_tokens;
      return cmd_probe_date(cfg);
    }
    if (active == report) return cmd_report(cfg, v.format);
    return 2;
  } catch (const UsageError& e) {
    detail::print_error_json("usage", e, e.missing_keys);
    return 2;
  } catch (const backend::BackendError& e) {
    detail::print_error_json("backend", e);
    return 1;
  } catch (const std::exception& e) {
    detail::print_error_json("runtime", e);
    return 1;
  }
}

}  // namespace zsner::cli
