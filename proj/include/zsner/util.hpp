#pragma once

// Shared plumbing: error types, string helpers, the flat key=value config
// format, stable hashing and atomic file writes.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace zsner {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file (TSV corpus, cache, config). Carries a 1-based line
// number when one is known; 0 means "not line-addressable".
struct ParseError : Error {
  ParseError(const std::string& msg, std::size_t line_no = 0)
      : Error(line_no ? msg + " (line " + std::to_string(line_no) + ")" : msg),
        line(line_no) {}
  std::size_t line;
};

struct ConfigError : Error {
  using Error::Error;
};

// CLI-level misuse: unknown flag, missing config keys.
struct UsageError : Error {
  explicit UsageError(const std::string& msg, std::vector<std::string> keys = {})
      : Error(msg), missing_keys(std::move(keys)) {}
  std::vector<std::string> missing_keys;
};

struct NotFoundError : Error {
  using Error::Error;
};

namespace util {

inline std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n\f\v";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      break;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

inline bool contains(std::string_view hay, std::string_view needle) {
  return hay.find(needle) != std::string_view::npos;
}

inline std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  if (from.empty()) return s;
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

// Fixed-point decimal formatting, C locale, for deterministic report bytes.
inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// FNV-1a 64-bit; used for stable request ids.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ull) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Write to a sibling temp file, then rename over the target.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write file: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("short write: " + tmp.string());
  }
  fs::rename(tmp, path);
}

// --- flat key=value config files -------------------------------------------
//
// One `key = value` pair per line, `#` comments, values may use \n, \t, \s
// and \\ escapes. Leading and trailing spaces are written as \s so that
// whitespace-significant values (prompt templates) survive the value trim.

inline std::string escape_value(std::string_view v) {
  std::size_t first = v.find_first_not_of(' ');
  if (first == std::string_view::npos) first = v.size();
  std::size_t last = v.find_last_not_of(' ');
  std::size_t end = last == std::string_view::npos ? 0 : last + 1;

  std::string out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    char c = v[i];
    if (c == ' ' && (i < first || i >= end)) {
      out += "\\s";
      continue;
    }
    switch (c) {
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\\': out += "\\\\"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string unescape_value(std::string_view v, std::size_t line_no = 0) {
  std::string out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] != '\\') {
      out += v[i];
      continue;
    }
    if (i + 1 >= v.size()) throw ParseError("dangling escape in value", line_no);
    ++i;
    switch (v[i]) {
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case 's': out += ' '; break;
      case '\\': out += '\\'; break;
      default: throw ParseError(std::string("unknown escape \\") + v[i], line_no);
    }
  }
  return out;
}

struct KvFile {
  std::vector<std::pair<std::string, std::string>> entries;  // file order

  bool has(std::string_view key) const {
    return std::any_of(entries.begin(), entries.end(),
                       [&](auto& e) { return e.first == key; });
  }
  const std::string* find(std::string_view key) const {
    for (auto& e : entries)
      if (e.first == key) return &e.second;
    return nullptr;
  }
  std::string get(std::string_view key, std::string_view fallback = "") const {
    const std::string* v = find(key);
    return v ? *v : std::string(fallback);
  }
  void set(std::string_view key, std::string_view value) {
    for (auto& e : entries)
      if (e.first == key) {
        e.second = value;
        return;
      }
    entries.emplace_back(std::string(key), std::string(value));
  }
};

inline KvFile parse_kv(std::string_view text) {
  KvFile kv;
  std::size_t line_no = 0;
  for (const std::string& raw : split(text, '\n')) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ParseError("expected key = value", line_no);
    std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ParseError("empty key", line_no);
    kv.set(key, unescape_value(trim(line.substr(eq + 1)), line_no));
  }
  return kv;
}

inline std::string serialize_kv(const KvFile& kv) {
  std::string out;
  for (auto& [k, v] : kv.entries) {
    out += k;
    out += " = ";
    out += escape_value(v);
    out += '\n';
  }
  return out;
}

}  // namespace util
}  // namespace zsner
