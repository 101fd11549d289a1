#include "overprec/report.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>

#include <fmt/format.h>

#include "overprec/aggregation.hpp"
#include "overprec/numeric.hpp"

namespace overprec {
namespace {

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\n") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

class CsvWriter {
 public:
  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i > 0) out_.push_back(',');
      out_ += csv_field(fields[i]);
    }
    out_.push_back('\n');
  }
  std::string str() const { return out_; }

 private:
  std::string out_;
};

std::string level_label(double c) { return fmt::format("hit@{}%", format_number(c)); }

// Levels present in any report, highest first.
std::vector<double> levels_desc(const std::vector<const MetricReport*>& reports) {
  std::set<double> levels;
  for (const auto* report : reports) {
    for (double c : report->levels) {
      if (c != kAllLevels) levels.insert(c);
    }
  }
  return {levels.rbegin(), levels.rend()};
}

std::vector<const MetricReport*> select(std::span<const MetricReport> reports,
                                        const std::function<bool(const MetricReport&)>& keep) {
  std::vector<const MetricReport*> out;
  for (const auto& report : reports) {
    if (keep(report)) out.push_back(&report);
  }
  return out;
}

void append_pair(std::vector<std::string>& row, const MeanStd& stat) {
  row.push_back(format_percent(stat.mean));
  row.push_back(format_percent(stat.std));
}

void append_level_pair(std::vector<std::string>& row, const MetricReport& report, double c) {
  auto it = report.hit.find(c);
  append_pair(row, it == report.hit.end() ? MeanStd{} : it->second);
}

void append_corr_pair(std::vector<std::string>& row, const MeanStd& stat) {
  row.push_back(format_correlation(stat.mean));
  row.push_back(format_correlation(stat.std));
}

std::vector<std::string> head(const MetricReport& report) {
  return {report.dataset, report.model, report.strategy};
}

std::string format_plain(std::optional<double> value, int decimals) {
  if (!value || !std::isfinite(*value)) return "NA";
  return fmt::format("{:.{}f}", *value, decimals);
}

}  // namespace

std::string format_percent(std::optional<double> fraction) {
  if (!fraction || !std::isfinite(*fraction)) return "NA";
  return fmt::format("{:.2f}", *fraction * 100.0);
}

std::string format_correlation(std::optional<double> r) { return format_plain(r, 4); }

std::string generation_csv(std::span<const MetricReport> reports) {
  const auto rows = select(reports, [](const MetricReport& r) { return r.phase == "generation"; });
  const auto levels = levels_desc(rows);
  CsvWriter csv;
  std::vector<std::string> header = {"dataset", "model", "P.S."};
  for (double c : levels) {
    header.push_back(level_label(c) + "_mean");
    header.push_back(level_label(c) + "_std");
  }
  for (const char* name : {"hit-avg_mean", "hit-avg_std", "corr_mean", "corr_std"}) header.push_back(name);
  csv.row(header);
  for (const auto* report : rows) {
    auto row = head(*report);
    for (double c : levels) append_level_pair(row, *report, c);
    append_pair(row, report->hit_avg);
    append_corr_pair(row, report->correlation);
    csv.row(row);
  }
  return csv.str();
}

std::string aggregation_single_csv(std::span<const MetricReport> reports) {
  const auto rows = select(reports, [](const MetricReport& r) {
    return r.phase == "aggregation" && r.setting == "single";
  });
  const auto levels = levels_desc(rows);
  CsvWriter csv;
  std::vector<std::string> header = {"dataset", "model", "P.S.", "agg_strategy", "hit-avg_mean",
                                     "hit-avg_std"};
  for (double c : levels) {
    header.push_back(level_label(c) + "_mean");
    header.push_back(level_label(c) + "_std");
  }
  header.push_back("corr_mean");
  header.push_back("corr_std");
  csv.row(header);
  for (const auto* report : rows) {
    auto row = head(*report);
    row.push_back(report->method);
    append_pair(row, report->hit_avg);
    for (double c : levels) append_level_pair(row, *report, c);
    append_corr_pair(row, report->correlation);
    csv.row(row);
  }
  return csv.str();
}

std::string aggregation_mixed_csv(std::span<const MetricReport> reports) {
  const auto rows = select(reports, [](const MetricReport& r) {
    return r.phase == "aggregation" && r.setting == "mixed";
  });
  CsvWriter csv;
  std::vector<std::string> header = {"dataset", "model", "P.S."};
  for (SchemeKind kind : all_schemes()) {
    header.push_back(fmt::format("{}_mean", to_string(kind)));
    header.push_back(fmt::format("{}_std", to_string(kind)));
  }
  csv.row(header);

  // One row per (dataset, model, strategy), schemes pivoted into columns.
  std::vector<std::vector<std::string>> keys;
  std::map<std::vector<std::string>, std::map<std::string, const MetricReport*>> pivot;
  for (const auto* report : rows) {
    auto key = head(*report);
    if (pivot.find(key) == pivot.end()) keys.push_back(key);
    pivot[key][report->method] = report;
  }
  for (const auto& key : keys) {
    auto row = key;
    const auto& by_scheme = pivot[key];
    for (SchemeKind kind : all_schemes()) {
      auto it = by_scheme.find(std::string(to_string(kind)));
      append_pair(row, it == by_scheme.end() ? MeanStd{} : it->second->hit_avg);
    }
    csv.row(row);
  }
  return csv.str();
}

std::string self_refine_single_csv(std::span<const MetricReport> reports) {
  const auto rows = select(reports, [](const MetricReport& r) {
    return r.phase == "self_refine" && r.setting == "single";
  });
  const auto levels = levels_desc(rows);
  CsvWriter csv;
  std::vector<std::string> header = {"dataset", "model", "P.S.", "kind"};
  for (double c : levels) header.push_back(level_label(c));
  header.push_back("hit-avg");
  header.push_back("corr");
  csv.row(header);
  for (const auto* report : rows) {
    auto row = head(*report);
    row.push_back(report->method);
    for (double c : levels) {
      auto it = report->hit.find(c);
      row.push_back(format_percent(it == report->hit.end() ? std::nullopt : it->second.mean));
    }
    row.push_back(format_percent(report->hit_avg.mean));
    row.push_back(format_correlation(report->correlation.mean));
    csv.row(row);
  }
  return csv.str();
}

std::string self_refine_mixed_csv(std::span<const MetricReport> reports) {
  const auto rows = select(reports, [](const MetricReport& r) {
    return r.phase == "self_refine" && r.setting == "mixed";
  });
  CsvWriter csv;
  csv.row({"dataset", "model", "P.S.", "kind", "hit-avg"});
  for (const auto* report : rows) {
    auto row = head(*report);
    row.push_back(report->method);
    row.push_back(format_percent(report->hit_avg.mean));
    csv.row(row);
  }
  return csv.str();
}

std::string ds_ils_csv(std::span<const MetricReport> reports) {
  const auto rows = select(reports, [](const MetricReport& r) { return r.phase == "generation"; });
  CsvWriter csv;
  csv.row({"dataset", "model", "P.S.", "confidence", "ds_mean", "ds_std", "ils_mean", "ils_std"});
  for (const auto* report : rows) {
    for (double c : report->levels) {
      auto row = head(*report);
      row.push_back(format_number(c));
      const auto ds = report->ds.count(c) ? report->ds.at(c) : MeanStd{};
      const auto ils = report->ils.count(c) ? report->ils.at(c) : MeanStd{};
      row.push_back(format_plain(ds.mean, 6));
      row.push_back(format_plain(ds.std, 6));
      row.push_back(format_plain(ils.mean, 6));
      row.push_back(format_plain(ils.std, 6));
      csv.row(row);
    }
  }
  return csv.str();
}

std::string refine_sweep_csv(std::span<const MetricReport> reports) {
  const auto rows = select(reports, [](const MetricReport& r) { return r.phase == "self_refine"; });
  CsvWriter csv;
  csv.row({"dataset", "model", "P.S.", "setting", "kind", "e", "hit-avg_mean", "hit-avg_std"});
  for (const auto* report : rows) {
    auto row = head(*report);
    row.push_back(report->setting);
    row.push_back(report->method);
    row.push_back(std::to_string(report->examples));
    append_pair(row, report->hit_avg);
    csv.row(row);
  }
  return csv.str();
}

std::string scale_bins_csv(const TrialArchive& archive, std::span<const double> edges) {
  CsvWriter csv;
  csv.row({"dataset", "model", "P.S.", "bin_low", "bin_high", "count", "hit_rate"});
  for (const auto& [model, strategy] : archive.configurations()) {
    const TrialArchive subset = archive.filter(model, strategy);
    for (const auto& dataset : subset.datasets()) {
      EvaluatedSet set;
      for (const auto& record : subset.records()) {
        if (record.source != dataset || !record.interval) continue;
        set.items.push_back({record.question_id, record.ground_truth, *record.interval});
      }
      for (const auto& bin : scale_bins(set, edges)) {
        csv.row({dataset, model, strategy, format_number(bin.low), format_number(bin.high),
                 std::to_string(bin.count), format_plain(bin.hit_rate, 6)});
      }
    }
  }
  return csv.str();
}

nlohmann::json reports_json(std::span<const MetricReport> reports) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& report : reports) out.push_back(report.to_json());
  return out;
}

}  // namespace overprec
