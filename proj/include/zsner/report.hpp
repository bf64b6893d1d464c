#pragma once

// Report rendering for metrics rows: CSV with a stable column order, JSON
// that round-trips, and small hand-rolled SVG line charts.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "zsner/metrics.hpp"
#include "zsner/util.hpp"

namespace zsner::metrics {

inline std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "language,entity,period,threshold,tp,fp,fn,precision,recall,f1\n";
  for (const MetricsRow& row : rows) {
    out += row.language;
    out += ',';
    out += corpus::to_string(row.entity);
    out += ',';
    if (row.period) out += row.period->label();
    out += ',' + util::format_fixed(row.threshold, 3);
    out += ',' + std::to_string(row.counts.tp);
    out += ',' + std::to_string(row.counts.fp);
    out += ',' + std::to_string(row.counts.fn);
    out += ',' + util::format_fixed(row.precision, 3);
    out += ',' + util::format_fixed(row.recall, 3);
    out += ',' + util::format_fixed(row.f1, 3);
    out += '\n';
  }
  return out;
}

inline nlohmann::ordered_json row_json(const MetricsRow& row) {
  nlohmann::ordered_json j;
  j["language"] = row.language;
  j["entity"] = std::string(corpus::to_string(row.entity));
  j["period"] = row.period ? nlohmann::ordered_json(row.period->label())
                           : nlohmann::ordered_json(nullptr);
  j["threshold"] = row.threshold;
  j["tp"] = row.counts.tp;
  j["fp"] = row.counts.fp;
  j["fn"] = row.counts.fn;
  j["precision"] = row.precision;
  j["recall"] = row.recall;
  j["f1"] = row.f1;
  return j;
}

// The metadata block records scoring conventions that the numbers depend on.
inline nlohmann::ordered_json metrics_json(const std::vector<MetricsRow>& rows,
                                           const std::vector<BaselineRow>& baselines,
                                           double match_threshold) {
  nlohmann::ordered_json j;
  j["metadata"]["fp_accounting"] = "per_item";
  j["metadata"]["gold_target"] = "joined_span_surface";
  j["metadata"]["normalization"] = "nfc_casefold";
  j["metadata"]["match_threshold"] = match_threshold;
  j["rows"] = nlohmann::ordered_json::array();
  for (const MetricsRow& row : rows) j["rows"].push_back(row_json(row));
  j["baselines"] = nlohmann::ordered_json::array();
  for (const BaselineRow& b : baselines) {
    nlohmann::ordered_json bj;
    bj["language"] = b.language;
    bj["precision"] = b.precision;
    bj["recall"] = b.recall;
    bj["f1"] = b.f1;
    j["baselines"].push_back(bj);
  }
  return j;
}

inline std::vector<MetricsRow> metrics_rows_from_json(const nlohmann::json& j) {
  std::vector<MetricsRow> rows;
  for (const auto& rj : j.at("rows")) {
    MetricsRow row;
    row.language = rj.at("language").get<std::string>();
    auto entity = corpus::entity_from_string(rj.at("entity").get<std::string>());
    if (!entity) throw ParseError("unknown entity in metrics json");
    row.entity = *entity;
    if (!rj.at("period").is_null()) {
      auto parts = util::split(rj["period"].get<std::string>(), '-');
      if (parts.size() != 2) throw ParseError("bad period label in metrics json");
      row.period = corpus::PeriodBin{std::stoi(parts[0]), std::stoi(parts[1])};
    }
    row.threshold = rj.at("threshold").get<double>();
    row.counts.tp = rj.at("tp").get<long>();
    row.counts.fp = rj.at("fp").get<long>();
    row.counts.fn = rj.at("fn").get<long>();
    row.precision = rj.at("precision").get<double>();
    row.recall = rj.at("recall").get<double>();
    row.f1 = rj.at("f1").get<double>();
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string baselines_csv(const std::vector<BaselineRow>& baselines) {
  std::string out = "language,precision,recall,f1\n";
  for (const BaselineRow& b : baselines) {
    out += b.language;
    out += ',' + util::format_fixed(b.precision, 3);
    out += ',' + util::format_fixed(b.recall, 3);
    out += ',' + util::format_fixed(b.f1, 3);
    out += '\n';
  }
  return out;
}

namespace detail {

struct Series {
  std::string key;  // "<language>:<metric>"
  std::vector<std::pair<double, double>> points;  // x position, value in [0,1]
};

inline const char* series_color(std::string_view language) {
  if (language == "en") return "#1f77b4";
  if (language == "de") return "#d62728";
  if (language == "fr") return "#2ca02c";
  return "#7f7f7f";
}

// Three panels (precision, recall, f1), one polyline per language series.
inline std::string panels_svg(const std::vector<std::string>& languages,
                              const std::vector<std::string>& metric_names,
                              const std::map<std::string, Series>& series,
                              const std::vector<std::string>& x_labels, std::string_view title) {
  const int panel_w = 320, panel_h = 260, margin = 46, gap = 24;
  const int width = 3 * panel_w + 2 * gap, height = panel_h + 40;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
                    "\" height=\"" + std::to_string(height) + "\">\n";
  svg += "<title>" + std::string(title) + "</title>\n";

  for (std::size_t m = 0; m < metric_names.size(); ++m) {
    const int x0 = static_cast<int>(m) * (panel_w + gap) + margin;
    const int y0 = 20, plot_w = panel_w - margin - 10, plot_h = panel_h - 50;
    svg += "<text x=\"" + std::to_string(x0 + plot_w / 2) + "\" y=\"14\" text-anchor=\"middle\" "
           "font-size=\"12\">" + metric_names[m] + "</text>\n";
    svg += "<rect x=\"" + std::to_string(x0) + "\" y=\"" + std::to_string(y0) + "\" width=\"" +
           std::to_string(plot_w) + "\" height=\"" + std::to_string(plot_h) +
           "\" fill=\"none\" stroke=\"#999\"/>\n";
    for (std::size_t xi = 0; xi < x_labels.size(); ++xi) {
      double fx = x_labels.size() > 1 ? static_cast<double>(xi) / (x_labels.size() - 1) : 0.5;
      int px = x0 + static_cast<int>(fx * plot_w);
      svg += "<text x=\"" + std::to_string(px) + "\" y=\"" + std::to_string(y0 + plot_h + 14) +
             "\" text-anchor=\"middle\" font-size=\"9\">" + x_labels[xi] + "</text>\n";
    }
    for (const std::string& lang : languages) {
      auto it = series.find(lang + ":" + metric_names[m]);
      if (it == series.end() || it->second.points.empty()) continue;
      std::string pts;
      for (auto& [x, v] : it->second.points) {
        double fx = x_labels.size() > 1 ? x / (x_labels.size() - 1) : 0.5;
        int px = x0 + static_cast<int>(fx * plot_w);
        int py = y0 + plot_h - static_cast<int>(v * plot_h);
        if (!pts.empty()) pts += ' ';
        pts += std::to_string(px) + "," + std::to_string(py);
      }
      svg += "<polyline data-series=\"" + it->second.key + "\" fill=\"none\" stroke=\"" +
             series_color(lang) + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    }
  }
  // legend
  int lx = 10;
  for (const std::string& lang : languages) {
    svg += "<rect x=\"" + std::to_string(lx) + "\" y=\"" + std::to_string(height - 14) +
           "\" width=\"10\" height=\"10\" fill=\"" + std::string(series_color(lang)) + "\"/>\n";
    svg += "<text x=\"" + std::to_string(lx + 14) + "\" y=\"" + std::to_string(height - 5) +
           "\" font-size=\"11\">" + lang + "</text>\n";
    lx += 50;
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace detail

// Per-language micro-averaged curves over the evaluation thresholds; counts
// are summed across entity types before precision/recall/F1.
inline std::string threshold_chart_svg(const std::vector<MetricsRow>& rows) {
  std::set<double> threshold_set;
  std::set<std::string> language_set;
  for (const MetricsRow& r : rows)
    if (!r.period) {
      threshold_set.insert(r.threshold);
      language_set.insert(r.language);
    }
  std::vector<double> thresholds(threshold_set.begin(), threshold_set.end());
  std::vector<std::string> languages(language_set.begin(), language_set.end());

  std::map<std::pair<std::string, double>, Counts> micro;
  for (const MetricsRow& r : rows)
    if (!r.period) micro[{r.language, r.threshold}] += r.counts;

  const std::vector<std::string> metric_names = {"precision", "recall", "f1"};
  std::map<std::string, detail::Series> series;
  for (const std::string& lang : languages)
    for (std::size_t ti = 0; ti < thresholds.size(); ++ti) {
      MetricsRow tmp;
      tmp.counts = micro[{lang, thresholds[ti]}];
      tmp.finish();
      double vals[3] = {tmp.precision, tmp.recall, tmp.f1};
      for (std::size_t m = 0; m < 3; ++m) {
        detail::Series& s = series[lang + ":" + metric_names[m]];
        s.key = lang + ":" + metric_names[m];
        s.points.emplace_back(static_cast<double>(ti), vals[m]);
      }
    }

  std::vector<std::string> x_labels;
  for (double t : thresholds) x_labels.push_back(util::format_fixed(t, 1));
  return detail::panels_svg(languages, metric_names, series, x_labels,
                            "scores by matching threshold");
}

// Per-language curves across period bins at the fixed period threshold.
inline std::string period_chart_svg(const std::vector<MetricsRow>& rows) {
  std::set<corpus::PeriodBin> bin_set;
  std::set<std::string> language_set;
  for (const MetricsRow& r : rows)
    if (r.period) {
      bin_set.insert(*r.period);
      language_set.insert(r.language);
    }
  std::vector<corpus::PeriodBin> bins(bin_set.begin(), bin_set.end());
  std::vector<std::string> languages(language_set.begin(), language_set.end());

  std::map<std::pair<std::string, int>, Counts> micro;
  for (const MetricsRow& r : rows)
    if (r.period) micro[{r.language, r.period->start_year}] += r.counts;

  const std::vector<std::string> metric_names = {"precision", "recall", "f1"};
  std::map<std::string, detail::Series> series;
  for (const std::string& lang : languages)
    for (std::size_t bi = 0; bi < bins.size(); ++bi) {
      auto it = micro.find({lang, bins[bi].start_year});
      if (it == micro.end()) continue;
      MetricsRow tmp;
      tmp.counts = it->second;
      tmp.finish();
      double vals[3] = {tmp.precision, tmp.recall, tmp.f1};
      for (std::size_t m = 0; m < 3; ++m) {
        detail::Series& s = series[lang + ":" + metric_names[m]];
        s.key = lang + ":" + metric_names[m];
        s.points.emplace_back(static_cast<double>(bi), vals[m]);
      }
    }

  std::vector<std::string> x_labels;
  for (const corpus::PeriodBin& b : bins) x_labels.push_back(b.label());
  return detail::panels_svg(languages, metric_names, series, x_labels, "scores by period");
}

}  // namespace zsner::metrics
