#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "overprec/metrics.hpp"
#include "overprec/orchestrator.hpp"

namespace overprec {

/// Fraction shown as a percentage with two decimals; "NA" when absent.
std::string format_percent(std::optional<double> fraction);
/// Correlation with four decimals; "NA" when undefined.
std::string format_correlation(std::optional<double> r);

// Table families. Each takes every report and keeps the rows that belong to
// it; rows come out in the order given. Hit columns run from the highest
// level to the lowest, as mean/std pairs.

/// dataset, model, P.S., hit@c mean/std..., hit-avg mean/std, corr mean/std
std::string generation_csv(std::span<const MetricReport> reports);
/// dataset, model, P.S., agg_strategy, hit-avg, hit@c..., corr (mean/std pairs)
std::string aggregation_single_csv(std::span<const MetricReport> reports);
/// dataset, model, P.S., then hit-avg mean/std for CWA, LWA, MIA, Union, iLWA
std::string aggregation_mixed_csv(std::span<const MetricReport> reports);
/// dataset, model, P.S., kind, hit@c..., hit-avg, corr
std::string self_refine_single_csv(std::span<const MetricReport> reports);
/// dataset, model, P.S., kind, hit-avg
std::string self_refine_mixed_csv(std::span<const MetricReport> reports);

/// dataset, model, P.S., confidence, ds/ils mean and std (generation rows).
std::string ds_ils_csv(std::span<const MetricReport> reports);
/// dataset, model, P.S., setting, kind, e, hit-avg mean/std.
std::string refine_sweep_csv(std::span<const MetricReport> reports);
/// dataset, model, P.S., bin_low, bin_high, count, hit_rate over every
/// parsed answer of each configuration.
std::string scale_bins_csv(const TrialArchive& archive, std::span<const double> edges);

nlohmann::json reports_json(std::span<const MetricReport> reports);

}  // namespace overprec
