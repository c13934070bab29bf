#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "csv.hpp"
#include "error.hpp"
#include "timemodel.hpp"
#include "workload.hpp"

namespace gopsched {

/// Performance preference p and cost preference c, with p + c = 1.
struct TradeoffPreference {
    double p = 0.5;
    double c = 0.5;

    static TradeoffPreference from_performance(double p) { return {p, 1.0 - p}; }
    static TradeoffPreference from_cost(double c) { return {1.0 - c, c}; }

    void validate() const {
        if (!(p > 0.0 && p < 1.0) || !(c > 0.0 && c < 1.0)) {
            throw Error("PrefOutOfRange", "preferences must lie strictly inside (0, 1)");
        }
        if (std::abs(p + c - 1.0) > 1e-9) {
            throw Error("PrefOutOfRange", "p + c must equal 1");
        }
    }
};

// Logistic membership parameters. alpha scales the logit, beta shifts it.
struct FuzzyParams {
    double alpha = 1.0;
    double beta = 5.0;

    void validate() const {
        if (!(alpha > 0.0) || !std::isfinite(beta)) {
            throw Error("BadFuzzyParams", "alpha must be positive and beta finite");
        }
    }
};

/// Performance threshold gap in seconds: ln((1 - p) / p) / alpha + beta.
inline double threshold_gap(const TradeoffPreference &pref, const FuzzyParams &params = {}) {
    pref.validate();
    params.validate();
    return std::log((1.0 - pref.p) / pref.p) / params.alpha + params.beta;
}

/// Cost-preference form as published: ln(c / (1 - c)) / alpha - beta.
/// Note the sign of beta makes this disagree with threshold_gap for p = 1 - c;
/// it is kept only for compatibility.
inline double threshold_gap_cost_form(double c, const FuzzyParams &params = {}) {
    if (!(c > 0.0 && c < 1.0)) {
        throw Error("PrefOutOfRange", "cost preference must lie strictly inside (0, 1)");
    }
    params.validate();
    return std::log(c / (1.0 - c)) / params.alpha - params.beta;
}

/// Hourly rates aligned with the given VM type names.
inline std::vector<double> hourly_rates(std::span<const std::string> vm_types, const Catalog &catalog) {
    std::vector<double> rates;
    rates.reserve(vm_types.size());
    for (const auto &name : vm_types) {
        const auto i = find_vm(catalog, name);
        if (!i) {
            throw Error("UnknownVmType", name);
        }
        rates.push_back(catalog[*i].hourly_cost);
    }
    return rates;
}

inline std::size_t baseline_index(std::span<const std::string> vm_types, std::string_view baseline) {
    for (std::size_t i = 0; i < vm_types.size(); ++i) {
        if (vm_types[i] == baseline) {
            return i;
        }
    }
    throw Error("UnknownBaseline", std::string(baseline));
}

/// Delta_i = t_i - t_baseline (seconds). Negative when VM i beats the baseline.
inline std::vector<double> perf_gaps(std::span<const double> times, std::size_t baseline) {
    if (baseline >= times.size()) {
        throw Error("UnknownBaseline", "baseline column out of range");
    }
    std::vector<double> gaps(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        gaps[i] = times[i] - times[baseline];
    }
    gaps[baseline] = 0.0;
    return gaps;
}

inline std::vector<double> perf_gaps(std::span<const double> times, std::span<const std::string> vm_types,
                                     std::string_view baseline) {
    return perf_gaps(times, baseline_index(vm_types, baseline));
}

/// phi_i: dollars to transcode the GOP on VM i, prorating the hourly rate per second.
inline std::vector<double> transcode_costs(std::span<const double> times, std::span<const double> rates) {
    std::vector<double> phi(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        phi[i] = times[i] * rates[i] / 3600.0;
    }
    return phi;
}

/// 1 - phi_i / sum(phi).
inline std::vector<double> cost_factors(std::span<const double> phis) {
    double total = 0.0;
    for (double v : phis) {
        total += v;
    }
    std::vector<double> cf(phis.size());
    for (std::size_t i = 0; i < phis.size(); ++i) {
        cf[i] = 1.0 - phis[i] / total;
    }
    return cf;
}

// Below this the gaps carry no performance information and cost alone decides.
inline constexpr double kGapSumGuard = 1e-12;

/// (Delta_th - Delta_i) / sum(Delta), or 1 for every VM when sum(Delta) <= 1e-12.
inline std::vector<double> performance_factors(std::span<const double> gaps, double delta_th) {
    double total = 0.0;
    for (double g : gaps) {
        total += g;
    }
    std::vector<double> pf(gaps.size(), 1.0);
    if (total > kGapSumGuard) {
        for (std::size_t i = 0; i < gaps.size(); ++i) {
            pf[i] = (delta_th - gaps[i]) / total;
        }
    }
    return pf;
}

/// W_i = performance factor x cost factor.
inline std::vector<double> weight_row(std::span<const double> times, std::span<const double> rates,
                                      std::size_t baseline, double delta_th) {
    if (times.size() != rates.size()) {
        throw Error("InvalidArgument", "times and rates differ in length");
    }
    const auto pf = performance_factors(perf_gaps(times, baseline), delta_th);
    const auto cf = cost_factors(transcode_costs(times, rates));
    std::vector<double> w(times.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = pf[i] * cf[i];
    }
    return w;
}

enum class Normalization {
    min_max, // (W - min) / (max - min), in [0, 1]
    literal, // (W - max) / (max - min) as printed, in [-1, 0]
};

inline std::vector<double> normalize_row(std::span<const double> weights, Normalization mode = Normalization::min_max) {
    if (weights.empty()) {
        throw Error("InvalidArgument", "empty weight row");
    }
    const auto [lo_it, hi_it] = std::ranges::minmax_element(weights);
    const double lo = *lo_it;
    const double hi = *hi_it;
    std::vector<double> s(weights.size());
    if (hi == lo) {
        std::ranges::fill(s, mode == Normalization::min_max ? 1.0 : 0.0);
        return s;
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
        s[i] = mode == Normalization::min_max ? (weights[i] - lo) / (hi - lo) : (weights[i] - hi) / (hi - lo);
    }
    return s;
}

struct SuitabilityRow {
    std::uint64_t task_id = 0;
    double delta_th = 0.0;
    std::vector<double> gaps;
    std::vector<double> phis;
    std::vector<double> weights;
    std::vector<double> scores;
};

struct SuitabilityMatrix {
    std::vector<std::string> vm_types;
    std::vector<SuitabilityRow> rows;
};

struct SuitabilityOptions {
    std::string baseline = "gpu";
    Normalization normalization = Normalization::min_max;
};

inline SuitabilityRow suitability_row(std::uint64_t task_id, std::span<const double> times,
                                      std::span<const double> rates, std::size_t baseline, double delta_th,
                                      Normalization mode = Normalization::min_max) {
    SuitabilityRow row;
    row.task_id = task_id;
    row.delta_th = delta_th;
    row.gaps = perf_gaps(times, baseline);
    row.phis = transcode_costs(times, rates);
    row.weights = weight_row(times, rates, baseline, delta_th);
    row.scores = normalize_row(row.weights, mode);
    return row;
}

inline SuitabilityMatrix suitability_matrix(const EtcMatrix &etc, const Catalog &catalog, double delta_th,
                                            const SuitabilityOptions &opts = {}) {
    SuitabilityMatrix m;
    m.vm_types = etc.vm_types;
    if (etc.rows() == 0) {
        return m;
    }
    const auto rates = hourly_rates(etc.vm_types, catalog);
    const auto base = baseline_index(etc.vm_types, opts.baseline);
    m.rows.reserve(etc.rows());
    for (std::size_t r = 0; r < etc.rows(); ++r) {
        m.rows.push_back(suitability_row(etc.task_ids[r], etc.row(r), rates, base, delta_th, opts.normalization));
    }
    return m;
}

inline SuitabilityMatrix suitability_matrix(const EtcMatrix &etc, const Catalog &catalog,
                                            const TradeoffPreference &pref, const FuzzyParams &params,
                                            const SuitabilityOptions &opts = {}) {
    return suitability_matrix(etc, catalog, threshold_gap(pref, params), opts);
}

// ---------------------------------------------------------------------------
// Naive weighted-sum baseline

struct NaiveParams {
    double k = 0.5;

    void validate() const {
        if (!(k >= 0.0 && k <= 1.0)) {
            throw Error("BadNaiveParams", "k must lie in [0, 1]");
        }
    }
};

namespace detail {

// 0 for the smallest entry, 1 for the largest; all zero when flat.
inline std::vector<double> min_max_zero_best(std::span<const double> v) {
    std::vector<double> out(v.size(), 0.0);
    if (v.empty()) {
        return out;
    }
    const auto [lo_it, hi_it] = std::ranges::minmax_element(v);
    if (*hi_it == *lo_it) {
        return out;
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = (v[i] - *lo_it) / (*hi_it - *lo_it);
    }
    return out;
}

} // namespace detail

/// 1 - (k * T_hat + (1 - k) * C_hat), with T_hat and C_hat the row-wise
/// min-max normalised time and cost (0 = best). Higher is better.
inline std::vector<double> naive_row(std::span<const double> times, std::span<const double> rates,
                                     const NaiveParams &params = {}) {
    params.validate();
    if (times.size() != rates.size()) {
        throw Error("InvalidArgument", "times and rates differ in length");
    }
    const auto t_hat = detail::min_max_zero_best(times);
    const auto phis = transcode_costs(times, rates);
    const auto c_hat = detail::min_max_zero_best(phis);
    std::vector<double> scores(times.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        scores[i] = 1.0 - (params.k * t_hat[i] + (1.0 - params.k) * c_hat[i]);
    }
    return scores;
}

// ---------------------------------------------------------------------------
// Dense score grid shared by every scheduling policy.

struct ScoreMatrix {
    std::vector<std::uint64_t> task_ids;
    std::vector<std::string> vm_types;
    std::vector<double> scores; // row-major, task x vm; higher is better
    std::optional<double> delta_th;

    std::size_t cols() const { return vm_types.size(); }
    double at(std::size_t r, std::size_t c) const { return scores[r * cols() + c]; }
    std::span<const double> row(std::size_t r) const { return {scores.data() + r * cols(), cols()}; }
};

inline ScoreMatrix to_scores(const SuitabilityMatrix &m) {
    ScoreMatrix s;
    s.vm_types = m.vm_types;
    for (const auto &row : m.rows) {
        s.task_ids.push_back(row.task_id);
        s.scores.insert(s.scores.end(), row.scores.begin(), row.scores.end());
        s.delta_th = row.delta_th;
    }
    return s;
}

inline ScoreMatrix naive_matrix(const EtcMatrix &etc, const Catalog &catalog, const NaiveParams &params = {}) {
    ScoreMatrix s;
    s.vm_types = etc.vm_types;
    s.task_ids = etc.task_ids;
    const auto rates = hourly_rates(etc.vm_types, catalog);
    for (std::size_t r = 0; r < etc.rows(); ++r) {
        const auto row = naive_row(etc.row(r), rates, params);
        s.scores.insert(s.scores.end(), row.begin(), row.end());
    }
    return s;
}

/// Suitability CSV: task_id,delta_th,<vm types>, four decimals. delta_th is
/// "na" for score grids without a threshold (the naive method).
inline void write_scores(std::ostream &out, const ScoreMatrix &s) {
    out << "task_id,delta_th";
    for (const auto &vm : s.vm_types) {
        out << ',' << vm;
    }
    out << '\n';
    for (std::size_t r = 0; r < s.task_ids.size(); ++r) {
        out << s.task_ids[r] << ',' << (s.delta_th ? csv::fixed(*s.delta_th, 4) : std::string("na"));
        for (double v : s.row(r)) {
            out << ',' << csv::fixed(v, 4);
        }
        out << '\n';
    }
}

} // namespace gopsched
