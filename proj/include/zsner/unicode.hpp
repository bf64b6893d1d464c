#pragma once

// Minimal Unicode support for distance computation over OCR'd newspaper
// text: UTF-8 <-> codepoints, canonical composition (NFC) and simple case
// folding. Composition data covers the Latin-1 Supplement and Latin
// Extended-A blocks plus the combining diacritical marks range, which is
// what the en/de/fr corpus needs; codepoints outside those tables pass
// through unchanged.

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace zsner::uni {

inline constexpr char32_t kReplacement = 0xFFFD;

// Lenient decoder: malformed bytes become U+FFFD instead of failing, since
// OCR-era files occasionally carry mojibake.
inline std::vector<char32_t> utf8_decode(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    unsigned char b0 = s[i];
    char32_t cp = 0;
    std::size_t len = 0;
    if (b0 < 0x80) {
      cp = b0;
      len = 1;
    } else if ((b0 & 0xE0) == 0xC0) {
      cp = b0 & 0x1F;
      len = 2;
    } else if ((b0 & 0xF0) == 0xE0) {
      cp = b0 & 0x0F;
      len = 3;
    } else if ((b0 & 0xF8) == 0xF0) {
      cp = b0 & 0x07;
      len = 4;
    } else {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    if (i + len > s.size()) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    bool ok = true;
    for (std::size_t k = 1; k < len; ++k) {
      unsigned char b = s[i + k];
      if ((b & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    if (!ok || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF) ||
        (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000)) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline void utf8_append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

inline std::string utf8_encode(const std::vector<char32_t>& cps) {
  std::string out;
  out.reserve(cps.size());
  for (char32_t cp : cps) utf8_append(out, cp);
  return out;
}

namespace detail {

struct Decomp {
  char32_t composed;
  char32_t base;
  char32_t mark;
};

// Canonical decompositions, Latin-1 Supplement + Latin Extended-A.
inline constexpr std::array<Decomp, 180> kDecomp = {{
    {0x00C0, 0x0041, 0x0300}, {0x00C1, 0x0041, 0x0301}, {0x00C2, 0x0041, 0x0302},
    {0x00C3, 0x0041, 0x0303}, {0x00C4, 0x0041, 0x0308}, {0x00C5, 0x0041, 0x030A},
    {0x00C7, 0x0043, 0x0327}, {0x00C8, 0x0045, 0x0300}, {0x00C9, 0x0045, 0x0301},
    {0x00CA, 0x0045, 0x0302}, {0x00CB, 0x0045, 0x0308}, {0x00CC, 0x0049, 0x0300},
    {0x00CD, 0x0049, 0x0301}, {0x00CE, 0x0049, 0x0302}, {0x00CF, 0x0049, 0x0308},
    {0x00D1, 0x004E, 0x0303}, {0x00D2, 0x004F, 0x0300}, {0x00D3, 0x004F, 0x0301},
    {0x00D4, 0x004F, 0x0302}, {0x00D5, 0x004F, 0x0303}, {0x00D6, 0x004F, 0x0308},
    {0x00D9, 0x0055, 0x0300}, {0x00DA, 0x0055, 0x0301}, {0x00DB, 0x0055, 0x0302},
    {0x00DC, 0x0055, 0x0308}, {0x00DD, 0x0059, 0x0301}, {0x00E0, 0x0061, 0x0300},
    {0x00E1, 0x0061, 0x0301}, {0x00E2, 0x0061, 0x0302}, {0x00E3, 0x0061, 0x0303},
    {0x00E4, 0x0061, 0x0308}, {0x00E5, 0x0061, 0x030A}, {0x00E7, 0x0063, 0x0327},
    {0x00E8, 0x0065, 0x0300}, {0x00E9, 0x0065, 0x0301}, {0x00EA, 0x0065, 0x0302},
    {0x00EB, 0x0065, 0x0308}, {0x00EC, 0x0069, 0x0300}, {0x00ED, 0x0069, 0x0301},
    {0x00EE, 0x0069, 0x0302}, {0x00EF, 0x0069, 0x0308}, {0x00F1, 0x006E, 0x0303},
    {0x00F2, 0x006F, 0x0300}, {0x00F3, 0x006F, 0x0301}, {0x00F4, 0x006F, 0x0302},
    {0x00F5, 0x006F, 0x0303}, {0x00F6, 0x006F, 0x0308}, {0x00F9, 0x0075, 0x0300},
    {0x00FA, 0x0075, 0x0301}, {0x00FB, 0x0075, 0x0302}, {0x00FC, 0x0075, 0x0308},
    {0x00FD, 0x0079, 0x0301}, {0x00FF, 0x0079, 0x0308},
    {0x0100, 0x0041, 0x0304}, {0x0101, 0x0061, 0x0304}, {0x0102, 0x0041, 0x0306},
    {0x0103, 0x0061, 0x0306}, {0x0104, 0x0041, 0x0328}, {0x0105, 0x0061, 0x0328},
    {0x0106, 0x0043, 0x0301}, {0x0107, 0x0063, 0x0301}, {0x0108, 0x0043, 0x0302},
    {0x0109, 0x0063, 0x0302}, {0x010A, 0x0043, 0x0307}, {0x010B, 0x0063, 0x0307},
    {0x010C, 0x0043, 0x030C}, {0x010D, 0x0063, 0x030C}, {0x010E, 0x0044, 0x030C},
    {0x010F, 0x0064, 0x030C}, {0x0112, 0x0045, 0x0304}, {0x0113, 0x0065, 0x0304},
    {0x0114, 0x0045, 0x0306}, {0x0115, 0x0065, 0x0306}, {0x0116, 0x0045, 0x0307},
    {0x0117, 0x0065, 0x0307}, {0x0118, 0x0045, 0x0328}, {0x0119, 0x0065, 0x0328},
    {0x011A, 0x0045, 0x030C}, {0x011B, 0x0065, 0x030C}, {0x011C, 0x0047, 0x0302},
    {0x011D, 0x0067, 0x0302}, {0x011E, 0x0047, 0x0306}, {0x011F, 0x0067, 0x0306},
    {0x0120, 0x0047, 0x0307}, {0x0121, 0x0067, 0x0307}, {0x0122, 0x0047, 0x0327},
    {0x0123, 0x0067, 0x0327}, {0x0124, 0x0048, 0x0302}, {0x0125, 0x0068, 0x0302},
    {0x0128, 0x0049, 0x0303}, {0x0129, 0x0069, 0x0303}, {0x012A, 0x0049, 0x0304},
    {0x012B, 0x0069, 0x0304}, {0x012C, 0x0049, 0x0306}, {0x012D, 0x0069, 0x0306},
    {0x012E, 0x0049, 0x0328}, {0x012F, 0x0069, 0x0328}, {0x0130, 0x0049, 0x0307},
    {0x0134, 0x004A, 0x0302}, {0x0135, 0x006A, 0x0302}, {0x0136, 0x004B, 0x0327},
    {0x0137, 0x006B, 0x0327}, {0x0139, 0x004C, 0x0301}, {0x013A, 0x006C, 0x0301},
    {0x013B, 0x004C, 0x0327}, {0x013C, 0x006C, 0x0327}, {0x013D, 0x004C, 0x030C},
    {0x013E, 0x006C, 0x030C}, {0x0143, 0x004E, 0x0301}, {0x0144, 0x006E, 0x0301},
    {0x0145, 0x004E, 0x0327}, {0x0146, 0x006E, 0x0327}, {0x0147, 0x004E, 0x030C},
    {0x0148, 0x006E, 0x030C}, {0x014C, 0x004F, 0x0304}, {0x014D, 0x006F, 0x0304},
    {0x014E, 0x004F, 0x0306}, {0x014F, 0x006F, 0x0306}, {0x0150, 0x004F, 0x030B},
    {0x0151, 0x006F, 0x030B}, {0x0154, 0x0052, 0x0301}, {0x0155, 0x0072, 0x0301},
    {0x0156, 0x0052, 0x0327}, {0x0157, 0x0072, 0x0327}, {0x0158, 0x0052, 0x030C},
    {0x0159, 0x0072, 0x030C}, {0x015A, 0x0053, 0x0301}, {0x015B, 0x0073, 0x0301},
    {0x015C, 0x0053, 0x0302}, {0x015D, 0x0073, 0x0302}, {0x015E, 0x0053, 0x0327},
    {0x015F, 0x0073, 0x0327}, {0x0160, 0x0053, 0x030C}, {0x0161, 0x0073, 0x030C},
    {0x0162, 0x0054, 0x0327}, {0x0163, 0x0074, 0x0327}, {0x0164, 0x0054, 0x030C},
    {0x0165, 0x0074, 0x030C}, {0x0168, 0x0055, 0x0303}, {0x0169, 0x0075, 0x0303},
    {0x016A, 0x0055, 0x0304}, {0x016B, 0x0075, 0x0304}, {0x016C, 0x0055, 0x0306},
    {0x016D, 0x0075, 0x0306}, {0x016E, 0x0055, 0x030A}, {0x016F, 0x0075, 0x030A},
    {0x0170, 0x0055, 0x030B}, {0x0171, 0x0075, 0x030B}, {0x0172, 0x0055, 0x0328},
    {0x0173, 0x0075, 0x0328}, {0x0174, 0x0057, 0x0302}, {0x0175, 0x0077, 0x0302},
    {0x0176, 0x0059, 0x0302}, {0x0177, 0x0079, 0x0302}, {0x0178, 0x0059, 0x0308},
    {0x0179, 0x005A, 0x0301}, {0x017A, 0x007A, 0x0301}, {0x017B, 0x005A, 0x0307},
    {0x017C, 0x007A, 0x0307}, {0x017D, 0x005A, 0x030C}, {0x017E, 0x007A, 0x030C},
    // padding entries keep the array size fixed; composed==0 terminates
    {0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0},
    {0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0},
}};

inline const Decomp* find_decomp(char32_t cp) {
  for (const auto& d : kDecomp) {
    if (d.composed == 0) break;
    if (d.composed == cp) return &d;
  }
  return nullptr;
}

inline char32_t compose_pair(char32_t base, char32_t mark) {
  for (const auto& d : kDecomp) {
    if (d.composed == 0) break;
    if (d.base == base && d.mark == mark) return d.composed;
  }
  return 0;
}

// Canonical combining class for U+0300..U+036F; everything else here is 0.
inline int ccc(char32_t cp) {
  if (cp < 0x0300 || cp > 0x036F) return 0;
  struct Range {
    char32_t lo, hi;
    int cls;
  };
  static constexpr Range ranges[] = {
      {0x0300, 0x0314, 230}, {0x0315, 0x0315, 232}, {0x0316, 0x0319, 220},
      {0x031A, 0x031A, 232}, {0x031B, 0x031B, 216}, {0x031C, 0x0320, 220},
      {0x0321, 0x0322, 202}, {0x0323, 0x0326, 220}, {0x0327, 0x0328, 202},
      {0x0329, 0x0333, 220}, {0x0334, 0x0338, 1},   {0x0339, 0x033C, 220},
      {0x033D, 0x0344, 230}, {0x0345, 0x0345, 240}, {0x0346, 0x0346, 230},
      {0x0347, 0x0349, 220}, {0x034A, 0x034C, 230}, {0x034D, 0x034E, 220},
      {0x034F, 0x034F, 0},   {0x0350, 0x0352, 230}, {0x0353, 0x0356, 220},
      {0x0357, 0x0357, 230}, {0x0358, 0x0358, 232}, {0x0359, 0x035A, 220},
      {0x035B, 0x035B, 230}, {0x035C, 0x035C, 233}, {0x035D, 0x035E, 234},
      {0x035F, 0x035F, 233}, {0x0360, 0x0361, 234}, {0x0362, 0x0362, 233},
      {0x0363, 0x036F, 230},
  };
  for (const auto& r : ranges)
    if (cp >= r.lo && cp <= r.hi) return r.cls;
  return 0;
}

}  // namespace detail

// Canonical composition over the tables above: decompose, reorder combining
// marks by combining class, then recompose unblocked starter+mark pairs.
inline std::vector<char32_t> nfc(const std::vector<char32_t>& in) {
  std::vector<char32_t> seq;
  seq.reserve(in.size());
  for (char32_t cp : in) {
    if (const detail::Decomp* d = detail::find_decomp(cp)) {
      seq.push_back(d->base);
      seq.push_back(d->mark);
    } else {
      seq.push_back(cp);
    }
  }
  // canonical ordering: stable sort maximal runs of nonzero-ccc marks
  std::size_t i = 0;
  while (i < seq.size()) {
    if (detail::ccc(seq[i]) == 0) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < seq.size() && detail::ccc(seq[j]) != 0) ++j;
    std::stable_sort(seq.begin() + i, seq.begin() + j,
                     [](char32_t a, char32_t b) { return detail::ccc(a) < detail::ccc(b); });
    i = j;
  }
  // composition
  std::vector<char32_t> out;
  out.reserve(seq.size());
  std::ptrdiff_t last_starter = -1;
  int prev_ccc = 0;
  for (char32_t cp : seq) {
    int cls = detail::ccc(cp);
    if (last_starter >= 0 && cls > 0 && prev_ccc < cls) {
      if (char32_t comp = detail::compose_pair(out[last_starter], cp)) {
        out[last_starter] = comp;
        continue;
      }
    }
    out.push_back(cp);
    if (cls == 0) {
      last_starter = static_cast<std::ptrdiff_t>(out.size()) - 1;
      prev_ccc = 0;
    } else {
      prev_ccc = cls;
    }
  }
  return out;
}

inline std::string nfc(std::string_view s) { return utf8_encode(nfc(utf8_decode(s))); }

// Simple case folding for the Latin ranges used by the corpus languages.
inline char32_t fold_cp(char32_t cp) {
  if (cp >= U'A' && cp <= U'Z') return cp + 0x20;
  if (cp >= 0x00C0 && cp <= 0x00DE && cp != 0x00D7) return cp + 0x20;
  if (cp == 0x0130) return U'i';
  if (cp == 0x0178) return 0x00FF;
  if (cp == 0x017F) return U's';
  if (cp >= 0x0100 && cp <= 0x0137) return (cp % 2 == 0) ? cp + 1 : cp;
  if (cp >= 0x0139 && cp <= 0x0148) return (cp % 2 == 1) ? cp + 1 : cp;
  if (cp >= 0x014A && cp <= 0x0177) return (cp % 2 == 0) ? cp + 1 : cp;
  if (cp >= 0x0179 && cp <= 0x017E) return (cp % 2 == 1) ? cp + 1 : cp;
  return cp;
}

inline std::vector<char32_t> fold(const std::vector<char32_t>& cps) {
  std::vector<char32_t> out;
  out.reserve(cps.size());
  for (char32_t cp : cps) out.push_back(fold_cp(cp));
  return out;
}

inline std::string fold(std::string_view s) { return utf8_encode(fold(utf8_decode(s))); }

// Comparison key used wherever matching is case-insensitive.
inline std::string casefold_nfc(std::string_view s) {
  return utf8_encode(fold(nfc(utf8_decode(s))));
}

}  // namespace zsner::uni
