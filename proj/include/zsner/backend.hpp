#pragma once

// Text-generation backends behind one contract: a live HTTP client speaking
// the common text-generation-server wire shape, a strict scripted mock for
// offline runs, and an append-only JSONL response cache shared by both. The
// cache is consulted before any backend call, records are written in request
// order through a single writer, and every record carries the decoding
// parameters so runs stay comparable.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"
#include "zsner/util.hpp"

namespace zsner::backend {

struct GenerationRequest {
  std::string prompt;
  int max_new_tokens = 64;
  std::string decoding = "greedy";

  // Stable hash of the prompt and decoding parameters.
  std::string id() const {
    std::uint64_t h = util::fnv1a64(prompt);
    h = util::fnv1a64("\x1f" + std::to_string(max_new_tokens) + "\x1f" + decoding, h);
    return util::to_hex(h);
  }
};

struct GenerationResponse {
  std::string text;  // verbatim, whitespace preserved
  std::string backend_name;
  double elapsed_ms = 0.0;
};

struct BackendError : Error {
  BackendError(const std::string& msg, std::string req_id)
      : Error(msg + " [request " + req_id + "]"), request_id(std::move(req_id)) {}
  std::string request_id;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual GenerationResponse generate(const GenerationRequest& request) = 0;
  virtual std::string name() const = 0;
};

// --- scripted mock -----------------------------------------------------------

// Deterministic prompt -> response table. Strict by default: an unscripted
// prompt is an error, which is how pipeline tests simulate backend failures.
class MockBackend : public Backend {
 public:
  MockBackend() = default;
  explicit MockBackend(std::map<std::string, std::string> script) : script_(std::move(script)) {}

  void script(std::string prompt, std::string response) {
    script_[std::move(prompt)] = std::move(response);
  }
  void set_default_response(std::string text) { default_response_ = std::move(text); }

  // One JSON object per line: {"prompt": ..., "response": ...}
  static std::map<std::string, std::string> script_from_jsonl(std::string_view text) {
    std::map<std::string, std::string> script;
    std::size_t line_no = 0;
    for (const std::string& line : util::split(text, '\n')) {
      ++line_no;
      if (util::trim(line).empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("prompt") || !j.contains("response"))
        throw ParseError("bad mock script record", line_no);
      script[j["prompt"].get<std::string>()] = j["response"].get<std::string>();
    }
    return script;
  }

  GenerationResponse generate(const GenerationRequest& request) override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    auto it = script_.find(request.prompt);
    if (it == script_.end()) {
      if (default_response_) return {*default_response_, name(), 0.0};
      throw BackendError("no scripted response", request.id());
    }
    return {it->second, name(), 0.0};
  }

  std::string name() const override { return "mock"; }
  long calls() const { return calls_.load(std::memory_order_relaxed); }

 private:
  std::map<std::string, std::string> script_;
  std::optional<std::string> default_response_;
  std::atomic<long> calls_{0};
};

// --- response cache ----------------------------------------------------------

struct CacheRecord {
  long seq = 0;  // logical timestamp: append position within the cache
  std::string stage;  // generation | disambiguation | probe
  std::string request_id;
  std::string prompt;
  std::string response;
  std::string backend;
  int max_new_tokens = 64;
  std::string decoding = "greedy";
};

// Append-only newline-delimited JSON store keyed by (stage, request_id).
// Each append is flushed immediately so an interrupted run leaves a valid,
// resumable prefix.
class ResponseCache {
 public:
  ResponseCache() = default;

  explicit ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
    if (std::filesystem::exists(path_)) load(util::read_file(path_));
    out_.open(path_, std::ios::binary | std::ios::app);
    if (!out_) throw Error("cannot open cache file: " + path_.string());
  }

  static ResponseCache in_memory() { return ResponseCache(); }

  const CacheRecord* lookup(std::string_view stage, std::string_view request_id) const {
    std::lock_guard lock(mutex_);
    auto it = index_.find(key(stage, request_id));
    return it == index_.end() ? nullptr : &records_[it->second];
  }

  void append(CacheRecord record) {
    std::lock_guard lock(mutex_);
    if (index_.count(key(record.stage, record.request_id))) return;  // one record per id per stage
    record.seq = static_cast<long>(records_.size());
    if (out_.is_open()) {
      out_ << to_json(record).dump() << '\n';
      out_.flush();
    }
    index_[key(record.stage, record.request_id)] = records_.size();
    records_.push_back(std::move(record));
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
  }

  std::vector<CacheRecord> records() const {
    std::lock_guard lock(mutex_);
    return records_;
  }

  GenerationResponse replay(std::string_view request_id) const {
    std::lock_guard lock(mutex_);
    for (const CacheRecord& r : records_)
      if (r.request_id == request_id) return {r.response, "cache", 0.0};
    throw NotFoundError("no cache record for request " + std::string(request_id));
  }

  GenerationResponse replay(std::string_view stage, std::string_view request_id) const {
    std::lock_guard lock(mutex_);
    auto it = index_.find(key(stage, request_id));
    if (it == index_.end())
      throw NotFoundError("no cache record for request " + std::string(request_id) + " in stage " +
                          std::string(stage));
    return {records_[it->second].response, "cache", 0.0};
  }

  static nlohmann::ordered_json to_json(const CacheRecord& r) {
    nlohmann::ordered_json j;
    j["seq"] = r.seq;
    j["stage"] = r.stage;
    j["request_id"] = r.request_id;
    j["prompt"] = r.prompt;
    j["response"] = r.response;
    j["backend"] = r.backend;
    j["max_new_tokens"] = r.max_new_tokens;
    j["decoding"] = r.decoding;
    return j;
  }

 private:
  static std::string key(std::string_view stage, std::string_view request_id) {
    return std::string(stage) + "/" + std::string(request_id);
  }

  void load(std::string_view text) {
    std::size_t line_no = 0;
    for (const std::string& line : util::split(text, '\n')) {
      ++line_no;
      if (util::trim(line).empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded()) throw ParseError("corrupt cache record", line_no);
      CacheRecord r;
      try {
        r.seq = j.at("seq").get<long>();
        r.stage = j.at("stage").get<std::string>();
        r.request_id = j.at("request_id").get<std::string>();
        r.prompt = j.at("prompt").get<std::string>();
        r.response = j.at("response").get<std::string>();
        r.backend = j.at("backend").get<std::string>();
        r.max_new_tokens = j.at("max_new_tokens").get<int>();
        r.decoding = j.at("decoding").get<std::string>();
      } catch (const nlohmann::json::exception&) {
        throw ParseError("corrupt cache record", line_no);
      }
      index_[key(r.stage, r.request_id)] = records_.size();
      records_.push_back(std::move(r));
    }
  }

  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<std::string, std::size_t> index_;
  std::vector<CacheRecord> records_;
  std::ofstream out_;
};

// --- cache-aware batched execution --------------------------------------------

struct GenResult {
  std::string request_id;
  bool ok = false;
  bool from_cache = false;
  GenerationResponse response;
  std::string error;
};

// Runs a batch through the cache and backend with bounded parallelism.
// Workers complete in any order; records are appended to the cache strictly
// in request order so reruns produce byte-identical cache files. Responses
// are keyed by request_id, never by arrival order.
class CachingBackend {
 public:
  CachingBackend(Backend& inner, ResponseCache& cache, int parallelism = 4)
      : inner_(inner), cache_(cache), parallelism_(parallelism < 1 ? 1 : parallelism) {}

  GenResult generate(const GenerationRequest& request, const std::string& stage) {
    return generate_batch({request}, stage).front();
  }

  std::vector<GenResult> generate_batch(const std::vector<GenerationRequest>& requests,
                                        const std::string& stage) {
    const std::size_t n = requests.size();
    std::vector<GenResult> results(n);
    for (std::size_t i = 0; i < n; ++i) {
      results[i].request_id = requests[i].id();
      if (const CacheRecord* hit = cache_.lookup(stage, results[i].request_id)) {
        results[i].ok = true;
        results[i].from_cache = true;
        results[i].response = {hit->response, hit->backend, 0.0};
      }
    }
    // one backend call per distinct request id; repeats share the result
    std::vector<std::size_t> misses;
    std::map<std::string, std::size_t> leader_of;
    std::vector<std::vector<std::size_t>> followers;
    for (std::size_t i = 0; i < n; ++i) {
      if (results[i].from_cache) continue;
      auto it = leader_of.find(results[i].request_id);
      if (it == leader_of.end()) {
        leader_of[results[i].request_id] = misses.size();
        misses.push_back(i);
        followers.emplace_back();
      } else {
        followers[it->second].push_back(i);
      }
    }
    if (misses.empty()) return results;

    std::mutex m;
    std::condition_variable cv;
    std::vector<bool> done(misses.size(), false);
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
      while (true) {
        std::size_t k = next.fetch_add(1);
        if (k >= misses.size()) return;
        std::size_t i = misses[k];
        GenResult& r = results[i];
        auto t0 = std::chrono::steady_clock::now();
        try {
          r.response = inner_.generate(requests[i]);
          r.response.elapsed_ms =
              std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                  .count();
          r.ok = true;
        } catch (const std::exception& e) {
          r.ok = false;
          r.error = e.what();
        }
        {
          std::lock_guard lock(m);
          done[k] = true;
        }
        cv.notify_all();
      }
    };

    std::vector<std::thread> pool;
    std::size_t n_workers = std::min<std::size_t>(parallelism_, misses.size());
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);

    // single writer: append miss records in request order as they complete
    for (std::size_t k = 0; k < misses.size(); ++k) {
      {
        std::unique_lock lock(m);
        cv.wait(lock, [&] { return done[k]; });
      }
      std::size_t i = misses[k];
      if (results[i].ok) {
        CacheRecord rec;
        rec.stage = stage;
        rec.request_id = results[i].request_id;
        rec.prompt = requests[i].prompt;
        rec.response = results[i].response.text;
        rec.backend = results[i].response.backend_name;
        rec.max_new_tokens = requests[i].max_new_tokens;
        rec.decoding = requests[i].decoding;
        cache_.append(std::move(rec));
      }
      for (std::size_t f : followers[k]) results[f] = results[i];
    }
    for (std::thread& t : pool) t.join();
    return results;
  }

  ResponseCache& cache() { return cache_; }

 private:
  Backend& inner_;
  ResponseCache& cache_;
  int parallelism_;
};

}  // namespace zsner::backend
