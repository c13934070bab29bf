#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "csv.hpp"
#include "error.hpp"
#include "rng.hpp"
#include "workload.hpp"

namespace gopsched {

enum class Predictor { frame_count, gop_size_mb };

inline std::string_view to_string(Predictor p) { return p == Predictor::frame_count ? "frame_count" : "gop_size_mb"; }

inline std::optional<Predictor> parse_predictor(std::string_view s) {
    if (s == "frame_count") {
        return Predictor::frame_count;
    }
    if (s == "gop_size_mb") {
        return Predictor::gop_size_mb;
    }
    return std::nullopt;
}

inline double predictor_value(const GopTask &t, Predictor p) {
    return p == Predictor::frame_count ? static_cast<double>(t.frame_count) : t.gop_size_mb;
}

inline double predictor_value(const TraceRecord &r, Predictor p) {
    return p == Predictor::frame_count ? static_cast<double>(r.frame_count) : r.gop_size_mb;
}

// Lower clamp on predicted transcoding times; extrapolating the quadratic to
// tiny GOPs can otherwise go negative.
inline constexpr double kTimeFloorSeconds = 0.05;

/// t(x) = a + b*x + c*x^2 in seconds.
struct QuadraticFit {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    Predictor predictor = Predictor::frame_count;
    std::optional<double> r2;

    double eval(double x) const { return a + b * x + c * x * x; }
    double time_at(double x, double floor = kTimeFloorSeconds) const { return std::max(eval(x), floor); }

    bool operator==(const QuadraticFit &) const = default;
};

// Baseline (gpu) model used when no trace is fitted: a 250-frame GOP costs about 3.55 s.
inline QuadraticFit default_base_fit() { return {0.30, 0.012, 4.0e-6, Predictor::frame_count, std::nullopt}; }

struct FitPoint {
    double x = 0.0;
    double t_s = 0.0;
};

/// 1 - SS_res/SS_tot. Not clamped: a poor fit on held-out data can go negative.
inline double r_squared(const QuadraticFit &fit, std::span<const FitPoint> points) {
    if (points.empty()) {
        throw Error("EmptyInput", "r_squared needs at least one point");
    }
    double mean = 0.0;
    for (const auto &p : points) {
        mean += p.t_s;
    }
    mean /= static_cast<double>(points.size());
    double ss_tot = 0.0;
    double ss_res = 0.0;
    for (const auto &p : points) {
        ss_tot += (p.t_s - mean) * (p.t_s - mean);
        const double r = p.t_s - fit.eval(p.x);
        ss_res += r * r;
    }
    if (ss_tot == 0.0) {
        throw Error("ZeroVariance", "all observed times are equal");
    }
    return 1.0 - ss_res / ss_tot;
}

/// Least-squares quadratic via the 3x3 normal equations. The predictor is
/// centred and scaled to [-1, 1] before forming the system, which is then
/// solved by Gaussian elimination with partial pivoting.
inline QuadraticFit fit_quadratic(std::span<const FitPoint> points, Predictor predictor) {
    if (points.size() < 3) {
        throw Error("TooFewPoints", "need at least 3 points, got " + std::to_string(points.size()));
    }
    std::set<double> distinct;
    double lo = points.front().x;
    double hi = points.front().x;
    for (const auto &p : points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.t_s)) {
            throw Error("InvalidArgument", "non-finite point");
        }
        distinct.insert(p.x);
        lo = std::min(lo, p.x);
        hi = std::max(hi, p.x);
    }
    if (distinct.size() < 3) {
        throw Error("SingularSystem", "need at least 3 distinct x values");
    }

    const double centre = 0.5 * (lo + hi);
    const double scale = 0.5 * (hi - lo);
    std::array<double, 5> su{}; // sums of u^k
    std::array<double, 3> st{}; // sums of t*u^k
    for (const auto &p : points) {
        const double u = (p.x - centre) / scale;
        double uk = 1.0;
        for (int k = 0; k < 5; ++k) {
            su[k] += uk;
            if (k < 3) {
                st[k] += p.t_s * uk;
            }
            uk *= u;
        }
    }
    std::array<std::array<double, 4>, 3> m{{
        {su[0], su[1], su[2], st[0]},
        {su[1], su[2], su[3], st[1]},
        {su[2], su[3], su[4], st[2]},
    }};
    for (int col = 0; col < 3; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 3; ++r) {
            if (std::abs(m[r][col]) > std::abs(m[pivot][col])) {
                pivot = r;
            }
        }
        if (std::abs(m[pivot][col]) < 1e-12) {
            throw Error("SingularSystem", "pivot below 1e-12");
        }
        std::swap(m[col], m[pivot]);
        for (int r = col + 1; r < 3; ++r) {
            const double f = m[r][col] / m[col][col];
            for (int k = col; k < 4; ++k) {
                m[r][k] -= f * m[col][k];
            }
        }
    }
    std::array<double, 3> coef{};
    for (int r = 2; r >= 0; --r) {
        double acc = m[r][3];
        for (int k = r + 1; k < 3; ++k) {
            acc -= m[r][k] * coef[k];
        }
        coef[r] = acc / m[r][r];
    }

    // Back to the original predictor: u = (x - centre) / scale.
    QuadraticFit fit;
    fit.predictor = predictor;
    fit.c = coef[2] / (scale * scale);
    fit.b = coef[1] / scale - 2.0 * coef[2] * centre / (scale * scale);
    fit.a = coef[0] - coef[1] * centre / scale + coef[2] * centre * centre / (scale * scale);
    try {
        fit.r2 = r_squared(fit, points);
    } catch (const Error &) {
        fit.r2.reset();
    }
    return fit;
}

inline void write_fit(std::ostream &out, const QuadraticFit &fit) {
    char buf[64];
    auto g17 = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    out << "a=" << g17(fit.a) << '\n'
        << "b=" << g17(fit.b) << '\n'
        << "c=" << g17(fit.c) << '\n'
        << "predictor=" << to_string(fit.predictor) << '\n'
        << "r2=" << (fit.r2 ? g17(*fit.r2) : std::string("unset")) << '\n';
}

inline QuadraticFit read_fit(std::istream &in) {
    QuadraticFit fit;
    std::set<std::string> seen;
    std::string line;
    while (csv::read_line(in, line)) {
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error("BadFit", "expected key=value, got '" + line + "'");
        }
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "predictor") {
            const auto p = parse_predictor(value);
            if (!p) {
                throw Error("BadFit", "unknown predictor '" + value + "'");
            }
            fit.predictor = *p;
        } else if (key == "r2") {
            if (value != "unset") {
                fit.r2 = csv::to_double(value);
            }
        } else if (key == "a" || key == "b" || key == "c") {
            const auto v = csv::to_double(value);
            if (!v) {
                throw Error("BadFit", "bad number for " + key);
            }
            (key == "a" ? fit.a : key == "b" ? fit.b : fit.c) = *v;
        } else {
            throw Error("BadFit", "unknown key '" + key + "'");
        }
        seen.insert(key);
    }
    for (const char *k : {"a", "b", "c"}) {
        if (!seen.count(k)) {
            throw Error("BadFit", std::string("missing key ") + k);
        }
    }
    return fit;
}

// ---------------------------------------------------------------------------
// Performance ratios (time on a VM type / time on the baseline for the same GOP)

struct RatioDistribution {
    std::string vm_type;
    double mean = 1.0;
    double stddev = 1.0;
    double floor = 0.1;

    void validate() const {
        if (!(stddev > 0.0) || !(floor > 0.0) || !(floor < mean)) {
            throw Error("BadDistribution", vm_type + ": need stddev > 0 and 0 < floor < mean");
        }
    }
};

using RatioTable = std::map<std::string, RatioDistribution>;

// Normal fits of the measured ratio histograms against the gpu baseline.
inline RatioTable default_ratio_distributions() {
    return {
        {"general", {"general", 2.781, 1.524, 0.1}},
        {"cpu_opt", {"cpu_opt", 1.263, 0.508, 0.1}},
        {"mem_opt", {"mem_opt", 1.608, 0.652, 0.1}},
    };
}

/// Plain Normal(mean, std) draw, no truncation.
inline double sample_untruncated(const RatioDistribution &dist, Rng &rng) { return normal(rng, dist.mean, dist.stddev); }

/// Normal(mean, std) resampled until the draw is >= floor (at most 1000 tries).
inline double sample_ratio(const RatioDistribution &dist, Rng &rng) {
    dist.validate();
    for (int attempt = 0; attempt < 1000; ++attempt) {
        const double r = normal(rng, dist.mean, dist.stddev);
        if (r >= dist.floor) {
            return r;
        }
    }
    throw Error("Degenerate", dist.vm_type + ": 1000 draws below the floor");
}

// ---------------------------------------------------------------------------
// ETC matrix

struct EtcMatrix {
    std::vector<std::uint64_t> task_ids;
    std::vector<std::string> vm_types;
    std::vector<double> times_s; // row-major, task x vm

    std::size_t rows() const { return task_ids.size(); }
    std::size_t cols() const { return vm_types.size(); }
    double at(std::size_t r, std::size_t c) const { return times_s[r * cols() + c]; }
    std::span<const double> row(std::size_t r) const { return {times_s.data() + r * cols(), cols()}; }

    std::optional<std::size_t> row_of(std::uint64_t task_id) const {
        for (std::size_t r = 0; r < rows(); ++r) {
            if (task_ids[r] == task_id) {
                return r;
            }
        }
        return std::nullopt;
    }

    std::optional<std::size_t> col_of(std::string_view vm) const {
        for (std::size_t c = 0; c < cols(); ++c) {
            if (vm_types[c] == vm) {
                return c;
            }
        }
        return std::nullopt;
    }

    bool operator==(const EtcMatrix &) const = default;
};

enum class RatioMode { sampled, means };

struct EtcOptions {
    std::string baseline = "gpu";
    RatioMode ratios = RatioMode::sampled;
    double time_floor_s = kTimeFloorSeconds;
};

/// Baseline column = clamp(base_fit(x)); other columns = baseline x ratio,
/// with each ratio drawn from its own (seed, task_id, vm index) stream so
/// entries do not depend on task order.
inline EtcMatrix build_etc(const Workload &workload, const QuadraticFit &base_fit, const RatioTable &ratio_dists,
                           const Catalog &catalog, std::uint64_t seed, const EtcOptions &opts = {}) {
    const auto baseline = find_vm(catalog, opts.baseline);
    if (!baseline) {
        throw Error("UnknownBaseline", opts.baseline);
    }
    for (std::size_t v = 0; v < catalog.size(); ++v) {
        if (v == *baseline) {
            continue;
        }
        const auto it = ratio_dists.find(catalog[v].name);
        if (it == ratio_dists.end()) {
            throw Error("MissingDistribution", catalog[v].name);
        }
        it->second.validate();
    }

    EtcMatrix etc;
    for (const auto &vm : catalog) {
        etc.vm_types.push_back(vm.name);
    }
    etc.task_ids.reserve(workload.tasks.size());
    etc.times_s.reserve(workload.tasks.size() * catalog.size());
    for (const auto &task : workload.tasks) {
        etc.task_ids.push_back(task.task_id);
        const double t_base = base_fit.time_at(predictor_value(task, base_fit.predictor), opts.time_floor_s);
        for (std::size_t v = 0; v < catalog.size(); ++v) {
            if (v == *baseline) {
                etc.times_s.push_back(t_base);
                continue;
            }
            const auto &dist = ratio_dists.at(catalog[v].name);
            double ratio = dist.mean;
            if (opts.ratios == RatioMode::sampled) {
                Rng rng = make_stream(seed, {0x657463ULL, task.task_id, v});
                ratio = sample_ratio(dist, rng);
            }
            etc.times_s.push_back(t_base * ratio);
        }
    }
    return etc;
}

/// ETC from a measured trace: one row per (video, gop, operation) key that has
/// a record for every catalog VM type; repeated measurements are averaged.
/// Rows are numbered 0.. in order of first appearance.
inline EtcMatrix etc_from_trace(const std::vector<TraceRecord> &trace, const Catalog &catalog) {
    using Key = std::tuple<std::string, std::uint32_t, Operation>;
    std::vector<Key> order;
    std::map<Key, std::vector<std::pair<double, int>>> sums;
    for (const auto &r : trace) {
        Key key{r.video_id, r.gop_index, r.operation};
        auto [it, inserted] = sums.try_emplace(key, catalog.size(), std::pair<double, int>{0.0, 0});
        if (inserted) {
            order.push_back(key);
        }
        const auto v = find_vm(catalog, r.vm_type);
        if (!v) {
            throw Error("UnknownEnum", "vm_type '" + r.vm_type + "'");
        }
        it->second[*v].first += r.transcode_time_s;
        it->second[*v].second += 1;
    }
    EtcMatrix etc;
    for (const auto &vm : catalog) {
        etc.vm_types.push_back(vm.name);
    }
    std::uint64_t next = 0;
    for (const auto &key : order) {
        const auto &cells = sums.at(key);
        if (std::ranges::any_of(cells, [](const auto &c) { return c.second == 0; })) {
            continue;
        }
        etc.task_ids.push_back(next++);
        for (const auto &[sum, n] : cells) {
            etc.times_s.push_back(sum / n);
        }
    }
    return etc;
}

inline void write_etc(std::ostream &out, const EtcMatrix &etc) {
    out << "task_id";
    for (const auto &vm : etc.vm_types) {
        out << ',' << vm;
    }
    out << '\n';
    for (std::size_t r = 0; r < etc.rows(); ++r) {
        out << etc.task_ids[r];
        for (double t : etc.row(r)) {
            out << ',' << csv::fixed(t, 6);
        }
        out << '\n';
    }
}

inline EtcMatrix read_etc(std::istream &in) {
    std::string line;
    if (!csv::read_line(in, line)) {
        throw ParseError("MissingHeader", 1, "empty ETC file");
    }
    const auto head = csv::split(line);
    if (head.size() < 2 || head[0] != "task_id") {
        throw ParseError("MissingHeader", 1, "expected task_id,<vm types...>");
    }
    EtcMatrix etc;
    for (std::size_t i = 1; i < head.size(); ++i) {
        if (head[i].empty() || etc.col_of(head[i])) {
            throw ParseError("MissingHeader", 1, "empty or duplicate VM column");
        }
        etc.vm_types.emplace_back(head[i]);
    }
    std::set<std::uint64_t> ids;
    std::size_t lineno = 1;
    while (csv::read_line(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const auto f = csv::split(line);
        if (f.size() != head.size()) {
            throw ParseError("BadColumnCount", lineno, std::to_string(f.size()) + " columns");
        }
        const auto id = csv::to_int<std::uint64_t>(f[0]);
        if (!id || !ids.insert(*id).second) {
            throw ParseError("BadNumber", lineno, "task_id");
        }
        etc.task_ids.push_back(*id);
        for (std::size_t i = 1; i < f.size(); ++i) {
            etc.times_s.push_back(detail::positive_real(f[i], lineno, head[i]));
        }
    }
    return etc;
}

} // namespace gopsched
