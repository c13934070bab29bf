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
#include <string>
#include <string_view>
#include <vector>

#include "csv.hpp"
#include "error.hpp"
#include "rng.hpp"

namespace gopsched {

enum class ContentType { slow, fast, mixed };

inline constexpr std::array<ContentType, 3> kContentTypes{ContentType::slow, ContentType::fast, ContentType::mixed};

inline std::string_view to_string(ContentType c) {
    switch (c) {
    case ContentType::slow: return "slow";
    case ContentType::fast: return "fast";
    case ContentType::mixed: return "mixed";
    }
    return "?";
}

inline std::optional<ContentType> parse_content_type(std::string_view s) {
    for (auto c : kContentTypes) {
        if (to_string(c) == s) {
            return c;
        }
    }
    return std::nullopt;
}

enum class Operation { codec, bitrate, framerate, resolution };

inline constexpr std::array<Operation, 4> kOperations{Operation::codec, Operation::bitrate, Operation::framerate,
                                                      Operation::resolution};

inline std::string_view to_string(Operation op) {
    switch (op) {
    case Operation::codec: return "codec";
    case Operation::bitrate: return "bitrate";
    case Operation::framerate: return "framerate";
    case Operation::resolution: return "resolution";
    }
    return "?";
}

inline std::optional<Operation> parse_operation(std::string_view s) {
    for (auto op : kOperations) {
        if (to_string(op) == s) {
            return op;
        }
    }
    return std::nullopt;
}

struct VmTypeSpec {
    std::string name;
    int vcpu = 1;
    double memory_gb = 1.0;
    double hourly_cost = 0.0; // USD per hour

    bool operator==(const VmTypeSpec &) const = default;
};

using Catalog = std::vector<VmTypeSpec>;

/// The four EC2 representatives (m4.large, c4.xlarge, r3.xlarge, g2.2xlarge)
/// in fixed order: general, cpu_opt, mem_opt, gpu.
inline Catalog default_vm_catalog() {
    return {
        {"general", 2, 8.0, 0.15},
        {"cpu_opt", 4, 7.5, 0.20},
        {"mem_opt", 4, 30.5, 0.33},
        {"gpu", 8, 15.0, 0.65},
    };
}

inline void validate_catalog(const Catalog &catalog) {
    std::set<std::string> seen;
    for (const auto &vm : catalog) {
        if (vm.name.empty() || !seen.insert(vm.name).second) {
            throw Error("BadCatalog", "duplicate or empty VM type name '" + vm.name + "'");
        }
        if (vm.vcpu < 1 || !(vm.memory_gb > 0.0) || !(vm.hourly_cost > 0.0)) {
            throw Error("BadCatalog", "VM type '" + vm.name + "' needs vcpu >= 1, memory > 0, hourly cost > 0");
        }
    }
}

inline std::optional<std::size_t> find_vm(const Catalog &catalog, std::string_view name) {
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        if (catalog[i].name == name) {
            return i;
        }
    }
    return std::nullopt;
}

struct GopTask {
    std::uint64_t task_id = 0;
    std::string video_id;
    std::uint32_t gop_index = 0;
    double gop_size_mb = 0.0;
    std::uint32_t frame_count = 1;
    double fps = 30.0;
    ContentType content_type = ContentType::slow;
    double arrival_time_s = 0.0;

    bool operator==(const GopTask &) const = default;
};

struct TraceRecord {
    std::string video_id;
    std::uint32_t gop_index = 0;
    Operation operation = Operation::codec;
    std::string vm_type;
    ContentType content_type = ContentType::slow;
    double gop_size_mb = 0.0;
    std::uint32_t frame_count = 1;
    double transcode_time_s = 0.0;

    bool operator==(const TraceRecord &) const = default;
};

struct VideoStream {
    double fps = 30.0;
    std::vector<std::uint64_t> gop_task_ids; // indexed by gop_index
};

struct Workload {
    std::vector<GopTask> tasks; // sorted by (arrival_time_s, task_id)
    std::map<std::string, VideoStream> videos;
    double window_s = 1.0;

    const GopTask &task(std::uint64_t task_id) const {
        for (const auto &t : tasks) {
            if (t.task_id == task_id) {
                return t;
            }
        }
        throw Error("UnknownTask", std::to_string(task_id));
    }
};

// ---------------------------------------------------------------------------
// Trace CSV

inline constexpr std::string_view kTraceHeader =
    "video_id,gop_index,operation,vm_type,content_type,gop_size_mb,frame_count,transcode_time_s";

namespace detail {

// Shortest "%.6f" rendering: trailing zeros dropped, at least one decimal kept.
inline std::string decimal6(double v) {
    std::string s = csv::fixed(v, 6);
    const auto dot = s.find('.');
    if (dot != std::string::npos) {
        auto last = s.find_last_not_of('0');
        if (last == dot) {
            ++last;
        }
        s.erase(last + 1);
    }
    return s;
}

inline double positive_real(std::string_view field, std::size_t line, std::string_view column) {
    const auto v = csv::to_double(field);
    if (!v) {
        throw ParseError("BadNumber", line, std::string(column));
    }
    if (!(*v > 0.0)) {
        throw ParseError("NonPositiveValue", line, std::string(column));
    }
    return *v;
}

inline std::uint32_t positive_count(std::string_view field, std::size_t line, std::string_view column) {
    const auto v = csv::to_int<std::int64_t>(field);
    if (!v) {
        throw ParseError("BadNumber", line, std::string(column));
    }
    if (*v <= 0 || *v > UINT32_MAX) {
        throw ParseError("NonPositiveValue", line, std::string(column));
    }
    return static_cast<std::uint32_t>(*v);
}

inline std::uint32_t index_field(std::string_view field, std::size_t line, std::string_view column) {
    const auto v = csv::to_int<std::uint32_t>(field);
    if (!v) {
        throw ParseError("BadNumber", line, std::string(column));
    }
    return *v;
}

inline void expect_header(std::istream &in, std::string_view header) {
    std::string line;
    if (!csv::read_line(in, line) || line != header) {
        throw ParseError("MissingHeader", 1, "expected '" + std::string(header) + "'");
    }
}

} // namespace detail

/// Parses the trace CSV. Errors name the first offending line (header is line 1).
inline std::vector<TraceRecord> parse_trace(std::istream &in, const Catalog &catalog = default_vm_catalog()) {
    detail::expect_header(in, kTraceHeader);
    std::vector<TraceRecord> records;
    std::string line;
    std::size_t lineno = 1;
    while (csv::read_line(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const auto f = csv::split(line);
        if (f.size() != 8) {
            throw ParseError("BadColumnCount", lineno, std::to_string(f.size()) + " columns");
        }
        TraceRecord r;
        if (f[0].empty()) {
            throw ParseError("BadNumber", lineno, "video_id");
        }
        r.video_id = std::string(f[0]);
        r.gop_index = detail::index_field(f[1], lineno, "gop_index");
        const auto op = parse_operation(f[2]);
        if (!op) {
            throw ParseError("UnknownEnum", lineno, "operation '" + std::string(f[2]) + "'");
        }
        r.operation = *op;
        if (!find_vm(catalog, f[3])) {
            throw ParseError("UnknownEnum", lineno, "vm_type '" + std::string(f[3]) + "'");
        }
        r.vm_type = std::string(f[3]);
        const auto ct = parse_content_type(f[4]);
        if (!ct) {
            throw ParseError("UnknownEnum", lineno, "content_type '" + std::string(f[4]) + "'");
        }
        r.content_type = *ct;
        r.gop_size_mb = detail::positive_real(f[5], lineno, "gop_size_mb");
        r.frame_count = detail::positive_count(f[6], lineno, "frame_count");
        r.transcode_time_s = detail::positive_real(f[7], lineno, "transcode_time_s");
        records.push_back(std::move(r));
    }
    return records;
}

inline void serialize_trace(std::ostream &out, const std::vector<TraceRecord> &records) {
    out << kTraceHeader << '\n';
    for (const auto &r : records) {
        out << r.video_id << ',' << r.gop_index << ',' << to_string(r.operation) << ',' << r.vm_type << ','
            << to_string(r.content_type) << ',' << detail::decimal6(r.gop_size_mb) << ',' << r.frame_count << ','
            << detail::decimal6(r.transcode_time_s) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Synthetic workloads

enum class ArrivalProcess { uniform, poisson };

// Content-type profiles. The defaults are tunable stand-ins: slow-motion GOPs
// carry more frames and are larger than fast-motion ones.
struct ContentProfiles {
    double slow_frames_median = 240.0;
    double fast_frames_median = 36.0;
    double frames_sigma = 0.5;
    double mb_per_frame_median = 0.010;
    double mb_per_frame_sigma = 0.3;
    double mixed_slow_probability = 0.5;
};

struct GenerateOptions {
    std::uint32_t gops_per_video = 1;
    double fps = 30.0;
    ArrivalProcess arrivals = ArrivalProcess::uniform;
    ContentProfiles profiles{};
};

using ContentMix = std::map<ContentType, double>;

inline void validate_mix(const ContentMix &mix) {
    double sum = 0.0;
    for (const auto &[type, fraction] : mix) {
        if (!std::isfinite(fraction) || fraction < 0.0 || fraction > 1.0) {
            throw Error("BadMix", "fraction for " + std::string(to_string(type)) + " outside [0, 1]");
        }
        sum += fraction;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw Error("BadMix", "fractions sum to " + csv::fixed(sum, 9));
    }
}

/// "slow=0.5,fast=0.5" -> mix. Unlisted types get fraction 0.
inline ContentMix parse_mix(std::string_view text) {
    ContentMix mix;
    for (auto item : csv::split(text)) {
        const auto eq = item.find('=');
        const auto type = parse_content_type(item.substr(0, eq));
        if (eq == std::string_view::npos || !type) {
            throw Error("BadMix", "cannot parse '" + std::string(item) + "'");
        }
        const auto v = csv::to_double(item.substr(eq + 1));
        if (!v || mix.count(*type)) {
            throw Error("BadMix", "cannot parse '" + std::string(item) + "'");
        }
        mix[*type] = *v;
    }
    validate_mix(mix);
    return mix;
}

inline void sort_tasks(std::vector<GopTask> &tasks) {
    std::ranges::sort(tasks, [](const GopTask &a, const GopTask &b) {
        return a.arrival_time_s != b.arrival_time_s ? a.arrival_time_s < b.arrival_time_s : a.task_id < b.task_id;
    });
}

/// Rebuilds the video index and checks per-video GOP numbering (0..k-1, unique).
inline std::map<std::string, VideoStream> index_videos(const std::vector<GopTask> &tasks) {
    std::map<std::string, std::map<std::uint32_t, const GopTask *>> by_video;
    std::set<std::uint64_t> ids;
    for (const auto &t : tasks) {
        if (!ids.insert(t.task_id).second) {
            throw Error("BadWorkload", "duplicate task_id " + std::to_string(t.task_id));
        }
        if (!by_video[t.video_id].emplace(t.gop_index, &t).second) {
            throw Error("BadWorkload", "duplicate GOP " + t.video_id + "/" + std::to_string(t.gop_index));
        }
    }
    std::map<std::string, VideoStream> videos;
    for (const auto &[video, gops] : by_video) {
        VideoStream stream;
        stream.fps = gops.begin()->second->fps;
        std::uint32_t expected = 0;
        for (const auto &[index, task] : gops) {
            if (index != expected++) {
                throw Error("BadWorkload", "video " + video + " GOP indices are not 0..k-1");
            }
            stream.gop_task_ids.push_back(task->task_id);
        }
        videos.emplace(video, std::move(stream));
    }
    return videos;
}

inline Workload generate_workload(std::uint32_t n_tasks, const ContentMix &mix, double window_s, std::uint64_t seed,
                                  const GenerateOptions &opts = {}) {
    if (n_tasks == 0) {
        throw Error("InvalidArgument", "n_tasks must be positive");
    }
    if (!(window_s > 0.0) || !std::isfinite(window_s)) {
        throw Error("InvalidArgument", "window must be positive");
    }
    if (opts.gops_per_video == 0 || !(opts.fps > 0.0)) {
        throw Error("InvalidArgument", "gops_per_video and fps must be positive");
    }
    validate_mix(mix);

    const auto &prof = opts.profiles;
    Rng rng = make_stream(seed, {0x776f726b6c6f6164ULL});
    const std::uint32_t n_videos = (n_tasks + opts.gops_per_video - 1) / opts.gops_per_video;
    const double rate = n_videos / window_s;

    Workload w;
    w.window_s = window_s;
    w.tasks.reserve(n_tasks);
    double poisson_clock = 0.0;
    std::uint64_t next_id = 0;
    for (std::uint32_t v = 0; v < n_videos; ++v) {
        ContentType type = ContentType::mixed;
        const double u = uniform01(rng);
        double cumulative = 0.0;
        for (auto c : kContentTypes) {
            const auto it = mix.find(c);
            if (it == mix.end() || it->second <= 0.0) {
                continue;
            }
            type = c;
            cumulative += it->second;
            if (u < cumulative) {
                break;
            }
        }

        double arrival = 0.0;
        if (opts.arrivals == ArrivalProcess::uniform) {
            arrival = window_s * uniform01(rng);
        } else {
            poisson_clock += exponential(rng, rate);
            arrival = std::min(poisson_clock, window_s);
        }

        const std::string video_id = "v" + std::to_string(v);
        const std::uint32_t gops = std::min(opts.gops_per_video, n_tasks - v * opts.gops_per_video);
        for (std::uint32_t g = 0; g < gops; ++g) {
            bool slow_profile = type == ContentType::slow;
            if (type == ContentType::mixed) {
                slow_profile = uniform01(rng) < prof.mixed_slow_probability;
            }
            const double median = slow_profile ? prof.slow_frames_median : prof.fast_frames_median;
            const double frames = std::max(1.0, std::round(lognormal_median(rng, median, prof.frames_sigma)));
            const double mb_per_frame = lognormal_median(rng, prof.mb_per_frame_median, prof.mb_per_frame_sigma);

            GopTask t;
            t.task_id = next_id++;
            t.video_id = video_id;
            t.gop_index = g;
            t.frame_count = static_cast<std::uint32_t>(frames);
            t.gop_size_mb = frames * mb_per_frame;
            t.fps = opts.fps;
            t.content_type = type;
            t.arrival_time_s = arrival;
            w.tasks.push_back(std::move(t));
        }
    }
    sort_tasks(w.tasks);
    w.videos = index_videos(w.tasks);
    return w;
}

// ---------------------------------------------------------------------------
// Workload CSV

inline constexpr std::string_view kWorkloadHeader =
    "task_id,video_id,gop_index,gop_size_mb,frame_count,fps,content_type,arrival_time_s";

inline void write_workload(std::ostream &out, const Workload &w) {
    out << kWorkloadHeader << '\n';
    for (const auto &t : w.tasks) {
        out << t.task_id << ',' << t.video_id << ',' << t.gop_index << ',' << csv::fixed(t.gop_size_mb, 6) << ','
            << t.frame_count << ',' << csv::fixed(t.fps, 6) << ',' << to_string(t.content_type) << ','
            << csv::fixed(t.arrival_time_s, 6) << '\n';
    }
}

/// The window is not stored in the file; it is taken as the latest arrival.
inline Workload read_workload(std::istream &in) {
    detail::expect_header(in, kWorkloadHeader);
    Workload w;
    std::string line;
    std::size_t lineno = 1;
    while (csv::read_line(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const auto f = csv::split(line);
        if (f.size() != 8) {
            throw ParseError("BadColumnCount", lineno, std::to_string(f.size()) + " columns");
        }
        GopTask t;
        const auto id = csv::to_int<std::uint64_t>(f[0]);
        if (!id) {
            throw ParseError("BadNumber", lineno, "task_id");
        }
        t.task_id = *id;
        t.video_id = std::string(f[1]);
        t.gop_index = detail::index_field(f[2], lineno, "gop_index");
        t.gop_size_mb = detail::positive_real(f[3], lineno, "gop_size_mb");
        t.frame_count = detail::positive_count(f[4], lineno, "frame_count");
        t.fps = detail::positive_real(f[5], lineno, "fps");
        const auto ct = parse_content_type(f[6]);
        if (!ct) {
            throw ParseError("UnknownEnum", lineno, "content_type '" + std::string(f[6]) + "'");
        }
        t.content_type = *ct;
        const auto arrival = csv::to_double(f[7]);
        if (!arrival || *arrival < 0.0) {
            throw ParseError("BadNumber", lineno, "arrival_time_s");
        }
        t.arrival_time_s = *arrival;
        w.tasks.push_back(std::move(t));
    }
    sort_tasks(w.tasks);
    w.videos = index_videos(w.tasks);
    w.window_s = w.tasks.empty() ? 1.0 : std::max(w.tasks.back().arrival_time_s, 1e-9);
    return w;
}

} // namespace gopsched
