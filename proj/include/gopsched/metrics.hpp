#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "csv.hpp"
#include "error.hpp"
#include "simcore.hpp"
#include "workload.hpp"

namespace gopsched {

// ---------------------------------------------------------------------------
// Performance ratios from traces

struct RatioSample {
    std::string video_id;
    std::uint32_t gop_index = 0;
    Operation operation = Operation::codec;
    std::string vm_type;
    double ratio = 0.0;
};

struct RatioFilter {
    std::optional<std::string> vm_type;
    std::optional<Operation> operation;
};

struct MatchedRatios {
    std::vector<RatioSample> samples; // trace order of the non-baseline records
    std::size_t skipped = 0;          // non-baseline records with no baseline partner
};

/// Pairs every non-baseline record with the baseline time of the same
/// (video_id, gop_index, operation) key; repeated baseline records are averaged.
inline MatchedRatios matched_ratios(const std::vector<TraceRecord> &trace, std::string_view baseline_vm,
                                    const RatioFilter &filter = {}) {
    using Key = std::tuple<std::string, std::uint32_t, Operation>;
    std::map<Key, std::pair<double, int>> base;
    for (const auto &r : trace) {
        if (r.vm_type == baseline_vm) {
            auto &acc = base[Key{r.video_id, r.gop_index, r.operation}];
            acc.first += r.transcode_time_s;
            acc.second += 1;
        }
    }
    MatchedRatios out;
    for (const auto &r : trace) {
        if (r.vm_type == baseline_vm) {
            continue;
        }
        if ((filter.vm_type && r.vm_type != *filter.vm_type) || (filter.operation && r.operation != *filter.operation)) {
            continue;
        }
        const auto it = base.find(Key{r.video_id, r.gop_index, r.operation});
        if (it == base.end()) {
            ++out.skipped;
            continue;
        }
        const double t_base = it->second.first / it->second.second;
        out.samples.push_back({r.video_id, r.gop_index, r.operation, r.vm_type, r.transcode_time_s / t_base});
    }
    return out;
}

struct Moments {
    double mean = 0.0;
    double stddev = 0.0; // n - 1 denominator; 0 for a single value
};

inline Moments sample_moments(std::span<const double> values) {
    Moments m;
    if (values.empty()) {
        return m;
    }
    for (double v : values) {
        m.mean += v;
    }
    m.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) {
            ss += (v - m.mean) * (v - m.mean);
        }
        m.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return m;
}

struct HistogramFit {
    std::vector<double> bin_edges; // bins + 1 ascending edges
    std::vector<std::size_t> counts;
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t skipped = 0;
};

/// Fixed-width histogram starting at floor(min / w) * w, plus the Normal
/// parameters (sample mean and std) of the ratios.
inline HistogramFit histogram_of(std::span<const double> values, double bin_width) {
    if (!(bin_width > 0.0)) {
        throw Error("InvalidArgument", "bin width must be positive");
    }
    if (values.empty()) {
        throw Error("NoMatchedPairs", "no values to histogram");
    }
    const auto [lo_it, hi_it] = std::ranges::minmax_element(values);
    const double lo = std::floor(*lo_it / bin_width) * bin_width;
    const auto bins = static_cast<std::size_t>(std::floor((*hi_it - lo) / bin_width)) + 1;
    HistogramFit h;
    h.counts.assign(bins, 0);
    for (std::size_t k = 0; k <= bins; ++k) {
        h.bin_edges.push_back(lo + static_cast<double>(k) * bin_width);
    }
    for (double v : values) {
        auto k = static_cast<std::size_t>(std::floor((v - lo) / bin_width));
        h.counts[std::min(k, bins - 1)] += 1;
    }
    const auto m = sample_moments(values);
    h.mean = m.mean;
    h.stddev = m.stddev;
    return h;
}

inline HistogramFit ratio_histogram(const std::vector<TraceRecord> &trace, std::string_view baseline_vm,
                                    double bin_width, const RatioFilter &filter = {}) {
    const auto matched = matched_ratios(trace, baseline_vm, filter);
    if (matched.samples.empty()) {
        throw Error("NoMatchedPairs", "no record has a baseline partner");
    }
    std::vector<double> ratios;
    ratios.reserve(matched.samples.size());
    for (const auto &s : matched.samples) {
        ratios.push_back(s.ratio);
    }
    auto h = histogram_of(ratios, bin_width);
    h.skipped = matched.skipped;
    return h;
}

inline void write_histogram(std::ostream &out, const HistogramFit &h) {
    out << "bin_lo,bin_hi,count\n";
    for (std::size_t k = 0; k < h.counts.size(); ++k) {
        out << csv::fixed(h.bin_edges[k], 6) << ',' << csv::fixed(h.bin_edges[k + 1], 6) << ',' << h.counts[k] << '\n';
    }
    out << "#mean=" << csv::fixed(h.mean, 6) << ",std=" << csv::fixed(h.stddev, 6) << '\n';
}

// ---------------------------------------------------------------------------
// Threshold tables: share of GOPs whose ratio is below a threshold

struct ThresholdTable {
    double threshold = 1.0;
    bool strict = true;
    std::map<std::pair<std::string, Operation>, double> cells; // percent; absent when no samples
};

inline ThresholdTable threshold_table(const std::vector<TraceRecord> &trace, std::string_view baseline_vm,
                                      double threshold, bool strict) {
    const auto matched = matched_ratios(trace, baseline_vm);
    if (matched.samples.empty()) {
        throw Error("NoMatchedPairs", "no record has a baseline partner");
    }
    std::map<std::pair<std::string, Operation>, std::pair<std::size_t, std::size_t>> tally; // (hits, total)
    for (const auto &s : matched.samples) {
        auto &cell = tally[{s.vm_type, s.operation}];
        const bool hit = strict ? s.ratio < threshold : s.ratio <= threshold;
        cell.first += hit ? 1 : 0;
        cell.second += 1;
    }
    ThresholdTable table;
    table.threshold = threshold;
    table.strict = strict;
    for (const auto &[key, hits] : tally) {
        table.cells[key] = 100.0 * static_cast<double>(hits.first) / static_cast<double>(hits.second);
    }
    return table;
}

/// Rows are the catalog's non-baseline VM types, columns the four operations.
inline void write_threshold_table(std::ostream &out, const ThresholdTable &t, const Catalog &catalog,
                                  std::string_view baseline_vm) {
    out << "vm_type";
    for (auto op : kOperations) {
        out << ',' << to_string(op);
    }
    out << '\n';
    for (const auto &vm : catalog) {
        if (vm.name == baseline_vm) {
            continue;
        }
        out << vm.name;
        for (auto op : kOperations) {
            out << ',';
            const auto it = t.cells.find({vm.name, op});
            if (it != t.cells.end()) {
                out << csv::fixed(it->second, 2);
            }
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Mean transcoding time per (vm_type, operation)

struct OperationSummary {
    std::string video_id; // empty when pooled over videos
    std::string vm_type;
    Operation operation = Operation::codec;
    double mean_s = 0.0;
    std::size_t count = 0;
};

inline std::vector<OperationSummary> summarize_by_operation(const std::vector<TraceRecord> &trace,
                                                            bool per_video = false) {
    if (trace.empty()) {
        throw Error("EmptyTrace", "no records");
    }
    std::map<std::tuple<std::string, std::string, Operation>, std::pair<double, std::size_t>> groups;
    for (const auto &r : trace) {
        auto &g = groups[{per_video ? r.video_id : std::string(), r.vm_type, r.operation}];
        g.first += r.transcode_time_s;
        g.second += 1;
    }
    std::vector<OperationSummary> out;
    for (const auto &[key, acc] : groups) {
        const auto &[video, vm, op] = key;
        out.push_back({video, vm, op, acc.first / static_cast<double>(acc.second), acc.second});
    }
    return out;
}

inline void write_operation_summary(std::ostream &out, const std::vector<OperationSummary> &rows) {
    out << "video_id,vm_type,operation,mean_time_s,count\n";
    for (const auto &r : rows) {
        out << (r.video_id.empty() ? std::string("*") : r.video_id) << ',' << r.vm_type << ','
            << to_string(r.operation) << ',' << csv::fixed(r.mean_s, 6) << ',' << r.count << '\n';
    }
}

// ---------------------------------------------------------------------------
// Replication summaries

enum class Metric { startup_delay_s, miss_rate, cost_usd };

inline constexpr std::array<Metric, 3> kMetrics{Metric::startup_delay_s, Metric::miss_rate, Metric::cost_usd};

inline std::string_view to_string(Metric m) {
    switch (m) {
    case Metric::startup_delay_s: return "startup_delay_s";
    case Metric::miss_rate: return "miss_rate";
    case Metric::cost_usd: return "cost_usd";
    }
    return "?";
}

inline double metric_value(const SimResult &r, Metric m) {
    switch (m) {
    case Metric::startup_delay_s: return r.mean_startup_delay_s();
    case Metric::miss_rate: return r.miss_rate();
    case Metric::cost_usd: return r.total_cost_usd;
    }
    return 0.0;
}

struct CiSummary {
    Metric metric = Metric::startup_delay_s;
    double mean = 0.0;
    double ci_half_width = 0.0;
    std::size_t n_reps = 0;

    bool operator==(const CiSummary &) const = default;
};

// Normal-approximation 95% interval.
inline constexpr double kZ95 = 1.96;

inline CiSummary aggregate(std::span<const double> values, Metric metric) {
    if (values.size() < 2) {
        throw Error("TooFewReps", "need at least 2 replications");
    }
    const auto m = sample_moments(values);
    return {metric, m.mean, kZ95 * m.stddev / std::sqrt(static_cast<double>(values.size())), values.size()};
}

inline CiSummary aggregate(std::span<const SimResult> reps, Metric metric) {
    std::vector<double> values;
    values.reserve(reps.size());
    for (const auto &r : reps) {
        values.push_back(metric_value(r, metric));
    }
    return aggregate(values, metric);
}

inline void write_summary(std::ostream &out, std::span<const CiSummary> rows) {
    out << "metric,mean,ci_half_width,n_reps\n";
    for (const auto &s : rows) {
        out << to_string(s.metric) << ',' << csv::fixed(s.mean, 6) << ',' << csv::fixed(s.ci_half_width, 6) << ','
            << s.n_reps << '\n';
    }
}

} // namespace gopsched
