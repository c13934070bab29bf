#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "gopsched/gopsched.hpp"
#include "oracles.hpp"

namespace fixtures {

// t = 1 + 0.5x + 0.01x^2 at 200 evenly spaced x in [10, 100], plus N(0, sigma) noise.
inline std::vector<gopsched::FitPoint> noisy_quadratic(std::uint64_t seed = 42, double sigma = 0.1,
                                                       std::size_t n = 200) {
    gopsched::Rng rng(seed);
    std::vector<gopsched::FitPoint> pts;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = 10.0 + 90.0 * static_cast<double>(i) / static_cast<double>(n - 1);
        pts.push_back({x, 1.0 + 0.5 * x + 0.01 * x * x + gopsched::normal(rng, 0.0, sigma)});
    }
    return pts;
}

// The four-VM row used throughout: times 12.0/5.0/6.5/4.0 s in catalog order.
inline gopsched::EtcMatrix one_row_etc() {
    gopsched::EtcMatrix etc;
    etc.vm_types = {"general", "cpu_opt", "mem_opt", "gpu"};
    etc.task_ids = {0};
    etc.times_s = {12.0, 5.0, 6.5, 4.0};
    return etc;
}

inline std::vector<double> catalog_rates() { return {0.15, 0.20, 0.33, 0.65}; }

// Trace of n matched (gpu, vm) pairs whose ratio is drawn from Normal(mean, sd) without truncation.
inline std::vector<gopsched::TraceRecord> ratio_trace(const std::string &vm, double mean, double sd, std::size_t n,
                                                      std::uint64_t seed) {
    gopsched::Rng rng(seed);
    std::vector<gopsched::TraceRecord> trace;
    trace.reserve(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        gopsched::TraceRecord base;
        base.video_id = "s" + std::to_string(i);
        base.vm_type = "gpu";
        base.gop_size_mb = 1.0;
        base.frame_count = 100;
        base.transcode_time_s = 1.0;
        gopsched::TraceRecord other = base;
        other.vm_type = vm;
        other.transcode_time_s = gopsched::normal(rng, mean, sd);
        trace.push_back(base);
        trace.push_back(other);
    }
    return trace;
}

inline gopsched::GopTask make_task(std::uint64_t id, std::string video, std::uint32_t gop, std::uint32_t frames,
                                   double arrival) {
    gopsched::GopTask t;
    t.task_id = id;
    t.video_id = std::move(video);
    t.gop_index = gop;
    t.frame_count = frames;
    t.gop_size_mb = frames * 0.01;
    t.arrival_time_s = arrival;
    return t;
}

inline gopsched::Workload make_workload(std::vector<gopsched::GopTask> tasks) {
    gopsched::Workload w;
    w.tasks = std::move(tasks);
    gopsched::sort_tasks(w.tasks);
    w.videos = gopsched::index_videos(w.tasks);
    return w;
}

// ETC with explicit rows, ids 0..n-1, catalog columns.
inline gopsched::EtcMatrix etc_rows(const std::vector<std::vector<double>> &rows) {
    gopsched::EtcMatrix etc;
    etc.vm_types = {"general", "cpu_opt", "mem_opt", "gpu"};
    for (std::size_t r = 0; r < rows.size(); ++r) {
        etc.task_ids.push_back(r);
        etc.times_s.insert(etc.times_s.end(), rows[r].begin(), rows[r].end());
    }
    return etc;
}

struct SimInstance {
    gopsched::Workload workload;
    gopsched::EtcMatrix etc;
    gopsched::ClusterConfig cluster;
    gopsched::PolicyConfig policy;
};

// Up to 5 tasks on 1 or 2 VMs. Integer arrivals and service times make
// simultaneous events common.
inline SimInstance random_sim_instance(gopsched::Rng &rng) {
    using gopsched::uniform01;
    SimInstance in;
    const auto n = static_cast<std::uint32_t>(uniform01(rng) * 6);
    std::vector<gopsched::GopTask> tasks;
    std::uint32_t next_gop = 0;
    std::uint32_t video = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
        const double arrival = std::floor(uniform01(rng) * 4.0);
        if (i > 0 && uniform01(rng) < 0.4) {
            tasks.push_back(make_task(i, "v" + std::to_string(video), next_gop++, 30 + i, tasks.back().arrival_time_s));
        } else {
            video = i;
            next_gop = 0;
            tasks.push_back(make_task(i, "v" + std::to_string(video), next_gop++, 30 + i, arrival));
        }
    }
    in.workload = make_workload(tasks);
    std::vector<std::vector<double>> rows;
    for (std::uint32_t i = 0; i < n; ++i) {
        std::vector<double> row(4);
        for (auto &v : row) {
            v = 1.0 + std::floor(uniform01(rng) * 4.0);
        }
        rows.push_back(row);
    }
    in.etc = etc_rows(rows);
    const char *types[] = {"general", "cpu_opt", "mem_opt", "gpu"};
    std::map<std::string, std::uint32_t> counts;
    counts[types[static_cast<std::size_t>(uniform01(rng) * 4)]] += 1;
    if (uniform01(rng) < 0.6) {
        counts[types[static_cast<std::size_t>(uniform01(rng) * 4)]] += 1;
    }
    for (const char *t : types) {
        in.cluster.counts.emplace_back(t, counts.count(t) ? counts[t] : 0u);
    }
    in.cluster.startup_allowance_s = uniform01(rng) < 0.3 ? gopsched::kNoDeadline : 1.0 + 5.0 * uniform01(rng);
    const gopsched::Policy policies[] = {gopsched::Policy::suitability, gopsched::Policy::naive,
                                         gopsched::Policy::fastest_vm, gopsched::Policy::random};
    in.policy.policy = policies[static_cast<std::size_t>(uniform01(rng) * 4)];
    in.policy.pref = gopsched::TradeoffPreference::from_performance(0.05 + 0.9 * uniform01(rng));
    in.policy.window = 1 + static_cast<std::size_t>(uniform01(rng) * 3);
    return in;
}

struct ReplayCheck {
    std::size_t mismatches = 0; // tasks whose (vm, start, finish) differ
    double miss_rate = 0.0;
};

// Runs the simulator and the straight-line replay on the same scores.
inline ReplayCheck compare_with_replay(const SimInstance &in, std::uint64_t seed) {
    const auto cat = gopsched::default_vm_catalog();
    const auto scores = gopsched::policy_scores(in.etc, cat, in.policy, seed);
    const auto r = gopsched::run_sim(in.workload, in.etc, scores, cat, in.cluster, in.policy.window, seed);

    std::vector<int> vm_type_of;
    for (const auto &vm : gopsched::instantiate(in.cluster)) {
        vm_type_of.push_back(static_cast<int>(*in.etc.col_of(vm.vm_type)));
    }
    const auto deadlines = gopsched::task_deadlines(in.workload, in.cluster);
    std::vector<oracle::ReplayTask> tasks;
    for (std::size_t i = 0; i < in.workload.tasks.size(); ++i) {
        const auto &t = in.workload.tasks[i];
        const auto row = *in.etc.row_of(t.task_id);
        oracle::ReplayTask rt{t.task_id, t.arrival_time_s, deadlines[i], {}, {}};
        for (std::size_t c = 0; c < in.etc.cols(); ++c) {
            rt.time_on_type.push_back(in.etc.at(row, c));
            rt.score_on_type.push_back(scores.at(row, c));
        }
        tasks.push_back(rt);
    }
    const auto replay = oracle::replay_schedule(tasks, vm_type_of, in.policy.window);
    ReplayCheck check;
    check.miss_rate = r.miss_rate();
    check.mismatches = replay.size() == r.per_task.size() ? 0 : std::max(replay.size(), r.per_task.size());
    for (std::size_t i = 0; i < std::min(replay.size(), r.per_task.size()); ++i) {
        const auto &o = r.per_task[i];
        if (o.task_id != replay[i].id || o.vm_id != replay[i].vm || o.start_s != replay[i].start ||
            o.finish_s != replay[i].finish) {
            ++check.mismatches;
        }
    }
    return check;
}

} // namespace fixtures
