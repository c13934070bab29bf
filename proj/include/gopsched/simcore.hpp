#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "csv.hpp"
#include "error.hpp"
#include "rng.hpp"
#include "suitability.hpp"
#include "timemodel.hpp"
#include "workload.hpp"

namespace gopsched {

inline constexpr double kNoDeadline = std::numeric_limits<double>::infinity();

struct ClusterConfig {
    std::vector<std::pair<std::string, std::uint32_t>> counts; // VM type -> instances
    double billing_quantum_s = 3600.0;
    double startup_allowance_s = 5.0; // kNoDeadline disables deadlines
    // A VM idle for this long is released and its next use opens a new lease.
    // Unset means one billing quantum; infinity keeps a single lease per VM.
    std::optional<double> idle_release_s;

    double release_after_s() const { return idle_release_s.value_or(billing_quantum_s); }

    std::uint32_t total_vms() const {
        std::uint32_t n = 0;
        for (const auto &[type, count] : counts) {
            n += count;
        }
        return n;
    }
};

/// "gpu=2,cpu_opt=4" -> counts in catalog order (types not listed get 0).
inline std::vector<std::pair<std::string, std::uint32_t>> parse_cluster_spec(std::string_view spec,
                                                                             const Catalog &catalog) {
    std::map<std::string, std::uint32_t> parsed;
    for (auto item : csv::split(spec)) {
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) {
            throw Error("BadCluster", "expected type=count, got '" + std::string(item) + "'");
        }
        const std::string name(item.substr(0, eq));
        const auto count = csv::to_int<std::uint32_t>(item.substr(eq + 1));
        if (!find_vm(catalog, name) || !count || parsed.count(name)) {
            throw Error("BadCluster", "bad entry '" + std::string(item) + "'");
        }
        parsed[name] = *count;
    }
    std::vector<std::pair<std::string, std::uint32_t>> counts;
    for (const auto &vm : catalog) {
        const auto it = parsed.find(vm.name);
        counts.emplace_back(vm.name, it == parsed.end() ? 0u : it->second);
    }
    return counts;
}

enum class Policy { suitability, naive, fastest_vm, random };

inline std::string_view to_string(Policy p) {
    switch (p) {
    case Policy::suitability: return "suitability";
    case Policy::naive: return "naive";
    case Policy::fastest_vm: return "fastest_vm";
    case Policy::random: return "random";
    }
    return "?";
}

inline std::optional<Policy> parse_policy(std::string_view s) {
    for (auto p : {Policy::suitability, Policy::naive, Policy::fastest_vm, Policy::random}) {
        if (to_string(p) == s) {
            return p;
        }
    }
    return std::nullopt;
}

struct PolicyConfig {
    Policy policy = Policy::suitability;
    TradeoffPreference pref{};
    FuzzyParams fuzzy{};
    NaiveParams naive{};
    SuitabilityOptions suitability{};
    std::size_t window = 10; // EDF look-ahead K
};

/// Score grid consulted by the scheduler. fastest_vm ranks by time alone;
/// random draws one uniform score per (seed, task_id, column).
inline ScoreMatrix policy_scores(const EtcMatrix &etc, const Catalog &catalog, const PolicyConfig &cfg,
                                 std::uint64_t seed) {
    switch (cfg.policy) {
    case Policy::suitability:
        return to_scores(suitability_matrix(etc, catalog, cfg.pref, cfg.fuzzy, cfg.suitability));
    case Policy::naive: return naive_matrix(etc, catalog, cfg.naive);
    case Policy::fastest_vm: return naive_matrix(etc, catalog, NaiveParams{1.0});
    case Policy::random: {
        ScoreMatrix s;
        s.vm_types = etc.vm_types;
        s.task_ids = etc.task_ids;
        for (std::size_t r = 0; r < etc.rows(); ++r) {
            for (std::size_t c = 0; c < etc.cols(); ++c) {
                Rng rng = make_stream(seed, {0x72616e64ULL, etc.task_ids[r], c});
                s.scores.push_back(uniform01(rng));
            }
        }
        return s;
    }
    }
    throw Error("InvalidArgument", "unknown policy");
}

// ---------------------------------------------------------------------------

/// Playback deadline: the stream starts playing startup_allowance after its
/// first GOP arrives, and each GOP must be ready when playback reaches it.
inline double deadline_of(const Workload &workload, const GopTask &task, const ClusterConfig &cluster) {
    const auto &stream = workload.videos.at(task.video_id);
    if (!(stream.fps > 0.0)) {
        throw Error("InvalidArgument", "fps must be positive");
    }
    if (std::isinf(cluster.startup_allowance_s)) {
        return kNoDeadline;
    }
    const double stream_arrival = workload.task(stream.gop_task_ids.at(0)).arrival_time_s;
    double played = 0.0;
    for (std::uint32_t j = 0; j < task.gop_index; ++j) {
        played += workload.task(stream.gop_task_ids.at(j)).frame_count / stream.fps;
    }
    return stream_arrival + cluster.startup_allowance_s + played;
}

/// Deadlines aligned with workload.tasks, in one pass per stream.
inline std::vector<double> task_deadlines(const Workload &workload, const ClusterConfig &cluster) {
    std::map<std::uint64_t, double> by_id;
    for (const auto &[video, stream] : workload.videos) {
        if (stream.gop_task_ids.empty()) {
            continue;
        }
        std::vector<const GopTask *> gops;
        for (auto id : stream.gop_task_ids) {
            gops.push_back(&workload.task(id));
        }
        const double start = gops.front()->arrival_time_s + cluster.startup_allowance_s;
        double played = 0.0;
        for (const auto *g : gops) {
            by_id[g->task_id] = std::isinf(cluster.startup_allowance_s) ? kNoDeadline : start + played;
            played += g->frame_count / stream.fps;
        }
    }
    std::vector<double> out;
    out.reserve(workload.tasks.size());
    for (const auto &t : workload.tasks) {
        out.push_back(by_id.at(t.task_id));
    }
    return out;
}

// ---------------------------------------------------------------------------

struct QueuedTask {
    double deadline_s = 0.0;
    std::uint64_t task_id = 0;
    std::size_t score_row = 0;
};

struct IdleVm {
    std::uint32_t vm_id = 0;
    std::size_t score_col = 0;
};

struct Assignment {
    std::uint64_t task_id = 0;
    std::uint32_t vm_id = 0;
    std::size_t queue_pos = 0;

    bool operator==(const Assignment &) const = default;
};

inline bool queue_order(const QueuedTask &a, const QueuedTask &b) {
    return a.deadline_s != b.deadline_s ? a.deadline_s < b.deadline_s : a.task_id < b.task_id;
}

/// Best (task, VM) pair by score among the `window` earliest-deadline queued
/// tasks and all idle VMs. Ties go to the earlier deadline, then the smaller
/// task_id, then the smaller vm_id. `queue` must be sorted by queue_order.
inline std::optional<Assignment> schedule_next(std::span<const QueuedTask> queue, std::span<const IdleVm> idle,
                                               const ScoreMatrix &scores, std::size_t window = 10) {
    std::optional<Assignment> best;
    double best_score = 0.0;
    const std::size_t considered = std::min(queue.size(), std::max<std::size_t>(window, 1));
    for (std::size_t q = 0; q < considered; ++q) {
        for (const auto &vm : idle) {
            const double s = scores.at(queue[q].score_row, vm.score_col);
            // Strictly better only: earlier queue positions already win ties,
            // and within one task the smaller vm_id wins.
            const bool better = !best || s > best_score ||
                                (s == best_score && q == best->queue_pos && vm.vm_id < best->vm_id);
            if (better) {
                best = Assignment{queue[q].task_id, vm.vm_id, q};
                best_score = s;
            }
        }
    }
    return best;
}

// ---------------------------------------------------------------------------

struct Lease {
    double start_s = 0.0;
    double end_s = 0.0;
};

struct VmInstance {
    std::uint32_t vm_id = 0;
    std::string vm_type;
    double busy_until_s = 0.0;
    std::optional<double> first_use_s;
    double last_release_s = 0.0;
    std::vector<Lease> leases; // empty: bill first_use..last_release as one lease
    std::vector<std::uint64_t> assignments;

    // Records a service interval, opening a new lease after an idle gap of at least release_after.
    void occupy(double start, double finish, double release_after) {
        if (leases.empty() || start - leases.back().end_s >= release_after) {
            leases.push_back({start, finish});
        } else {
            leases.back().end_s = std::max(leases.back().end_s, finish);
        }
        if (!first_use_s) {
            first_use_s = start;
        }
        busy_until_s = finish;
    }
};

struct TaskOutcome {
    std::uint64_t task_id = 0;
    std::uint32_t vm_id = 0;
    double start_s = 0.0;
    double finish_s = 0.0;
    double deadline_s = 0.0;
    bool missed = false;

    bool operator==(const TaskOutcome &) const = default;
};

enum class EventKind { arrive, start, finish, miss };

inline std::string_view to_string(EventKind k) {
    switch (k) {
    case EventKind::arrive: return "arrive";
    case EventKind::start: return "start";
    case EventKind::finish: return "finish";
    case EventKind::miss: return "miss";
    }
    return "?";
}

struct SimEvent {
    double time_s = 0.0;
    EventKind kind = EventKind::arrive;
    std::uint64_t task_id = 0;
    std::optional<std::uint32_t> vm_id;
};

struct SimResult {
    std::vector<TaskOutcome> per_task; // workload task order
    std::map<std::string, double> per_stream_startup_delay_s;
    double total_cost_usd = 0.0;
    std::uint64_t replication_seed = 0;
    std::vector<VmInstance> vms;
    std::vector<SimEvent> events;

    // False for an empty workload, where miss_rate() reports 0.
    bool miss_rate_defined() const { return !per_task.empty(); }

    double miss_rate() const {
        if (per_task.empty()) {
            return 0.0;
        }
        const auto missed = std::ranges::count_if(per_task, [](const TaskOutcome &t) { return t.missed; });
        return static_cast<double>(missed) / static_cast<double>(per_task.size());
    }

    double mean_startup_delay_s() const {
        if (per_stream_startup_delay_s.empty()) {
            return 0.0;
        }
        double sum = 0.0;
        for (const auto &[video, delay] : per_stream_startup_delay_s) {
            sum += delay;
        }
        return sum / static_cast<double>(per_stream_startup_delay_s.size());
    }
};

/// Each lease pays for its first-use..last-release span rounded up to whole
/// billing quanta (at least one). Never-used VMs cost nothing.
inline double billed_cost(std::span<const VmInstance> vms, const ClusterConfig &cluster, const Catalog &catalog) {
    const double quantum = cluster.billing_quantum_s;
    if (!(quantum > 0.0)) {
        throw Error("InvalidArgument", "billing quantum must be positive");
    }
    double total = 0.0;
    for (const auto &vm : vms) {
        if (!vm.first_use_s) {
            continue;
        }
        const auto type = find_vm(catalog, vm.vm_type);
        if (!type) {
            throw Error("UnknownVmType", vm.vm_type);
        }
        double quanta = 0.0;
        if (vm.leases.empty()) {
            quanta = std::max(1.0, std::ceil((vm.last_release_s - *vm.first_use_s) / quantum));
        }
        for (const auto &lease : vm.leases) {
            quanta += std::max(1.0, std::ceil((lease.end_s - lease.start_s) / quantum));
        }
        total += quanta * catalog[*type].hourly_cost * (quantum / 3600.0);
    }
    return total;
}

/// Instances in cluster.counts order, vm_id 0.. consecutively.
inline std::vector<VmInstance> instantiate(const ClusterConfig &cluster) {
    std::vector<VmInstance> vms;
    for (const auto &[type, count] : cluster.counts) {
        for (std::uint32_t i = 0; i < count; ++i) {
            VmInstance vm;
            vm.vm_id = static_cast<std::uint32_t>(vms.size());
            vm.vm_type = type;
            vms.push_back(std::move(vm));
        }
    }
    return vms;
}

/// Discrete-event run with a central EDF-ordered ready queue. All events at
/// one timestamp are applied before any VM is handed work. Service time is
/// the ETC entry of the chosen VM's type; tasks are never preempted or dropped.
inline SimResult run_sim(const Workload &workload, const EtcMatrix &etc, const ScoreMatrix &scores,
                         const Catalog &catalog, const ClusterConfig &cluster, std::size_t window = 10,
                         std::uint64_t replication_seed = 0) {
    if (cluster.total_vms() == 0) {
        throw Error("EmptyCluster", "cluster has no VMs");
    }
    const double release_after = cluster.release_after_s();
    if (!(release_after > 0.0)) {
        throw Error("InvalidArgument", "idle release must be positive");
    }
    SimResult result;
    result.replication_seed = replication_seed;
    result.vms = instantiate(cluster);

    // Column lookups per VM (ETC and scores may order VM types differently).
    std::vector<std::size_t> etc_col(result.vms.size());
    std::vector<std::size_t> score_col(result.vms.size());
    for (std::size_t v = 0; v < result.vms.size(); ++v) {
        const auto &type = result.vms[v].vm_type;
        if (!find_vm(catalog, type)) {
            throw Error("UnknownVmType", type);
        }
        const auto ec = etc.col_of(type);
        const auto sc = std::ranges::find(scores.vm_types, type);
        if (!ec || sc == scores.vm_types.end()) {
            throw Error("EtcGap", "no column for VM type " + type);
        }
        etc_col[v] = *ec;
        score_col[v] = static_cast<std::size_t>(sc - scores.vm_types.begin());
    }

    const std::size_t n = workload.tasks.size();
    std::vector<std::size_t> etc_row(n);
    std::vector<std::size_t> score_row(n);
    std::map<std::uint64_t, std::size_t> score_index;
    for (std::size_t r = 0; r < scores.task_ids.size(); ++r) {
        score_index[scores.task_ids[r]] = r;
    }
    std::map<std::uint64_t, std::size_t> etc_index;
    for (std::size_t r = 0; r < etc.rows(); ++r) {
        etc_index[etc.task_ids[r]] = r;
    }
    std::map<std::uint64_t, std::size_t> task_pos;
    for (std::size_t i = 0; i < n; ++i) {
        const auto id = workload.tasks[i].task_id;
        const auto e = etc_index.find(id);
        const auto s = score_index.find(id);
        if (e == etc_index.end() || s == score_index.end()) {
            throw Error("EtcGap", "no ETC row for task " + std::to_string(id));
        }
        etc_row[i] = e->second;
        score_row[i] = s->second;
        task_pos[id] = i;
    }

    const auto deadlines = task_deadlines(workload, cluster);
    result.per_task.resize(n);

    // Pending events: (time, kind, index). kind 0 = arrival (task index), 1 = VM free (vm index).
    using Pending = std::tuple<double, int, std::size_t>;
    std::priority_queue<Pending, std::vector<Pending>, std::greater<>> pending;
    for (std::size_t i = 0; i < n; ++i) {
        pending.emplace(workload.tasks[i].arrival_time_s, 0, i);
    }

    std::vector<QueuedTask> ready;
    std::vector<bool> vm_idle(result.vms.size(), true);
    std::vector<std::size_t> running(result.vms.size(), 0);

    while (!pending.empty()) {
        const double now = std::get<0>(pending.top());
        while (!pending.empty() && std::get<0>(pending.top()) == now) {
            const auto [t, kind, index] = pending.top();
            pending.pop();
            if (kind == 0) {
                const auto &task = workload.tasks[index];
                QueuedTask q{deadlines[index], task.task_id, score_row[index]};
                ready.insert(std::ranges::upper_bound(ready, q, queue_order), q);
                result.events.push_back({now, EventKind::arrive, task.task_id, std::nullopt});
            } else {
                auto &vm = result.vms[index];
                vm_idle[index] = true;
                vm.last_release_s = now;
                const auto &out = result.per_task[running[index]];
                result.events.push_back({now, EventKind::finish, out.task_id, vm.vm_id});
                if (out.missed) {
                    result.events.push_back({now, EventKind::miss, out.task_id, vm.vm_id});
                }
            }
        }

        for (;;) {
            std::vector<IdleVm> idle;
            for (std::size_t v = 0; v < result.vms.size(); ++v) {
                if (vm_idle[v]) {
                    idle.push_back({result.vms[v].vm_id, score_col[v]});
                }
            }
            const auto pick = schedule_next(ready, idle, scores, window);
            if (!pick) {
                break;
            }
            const std::size_t v = pick->vm_id;
            const std::size_t i = task_pos.at(pick->task_id);
            ready.erase(ready.begin() + static_cast<std::ptrdiff_t>(pick->queue_pos));

            auto &vm = result.vms[v];
            const double service = etc.at(etc_row[i], etc_col[v]);
            TaskOutcome &out = result.per_task[i];
            out.task_id = pick->task_id;
            out.vm_id = vm.vm_id;
            out.start_s = now;
            out.finish_s = now + service;
            out.deadline_s = deadlines[i];
            out.missed = out.finish_s > out.deadline_s;

            vm_idle[v] = false;
            running[v] = i;
            vm.occupy(now, out.finish_s, release_after);
            vm.assignments.push_back(out.task_id);
            result.events.push_back({now, EventKind::start, out.task_id, vm.vm_id});
            pending.emplace(out.finish_s, 1, v);
        }
    }

    for (const auto &[video, stream] : workload.videos) {
        const auto first = task_pos.at(stream.gop_task_ids.at(0));
        result.per_stream_startup_delay_s[video] = result.per_task[first].finish_s - workload.tasks[first].arrival_time_s;
    }
    result.total_cost_usd = billed_cost(result.vms, cluster, catalog);
    return result;
}

inline SimResult run_sim(const Workload &workload, const EtcMatrix &etc, const Catalog &catalog,
                         const ClusterConfig &cluster, const PolicyConfig &policy, std::uint64_t seed) {
    const auto scores = policy_scores(etc, catalog, policy, seed);
    return run_sim(workload, etc, scores, catalog, cluster, policy.window, seed);
}

// ---------------------------------------------------------------------------

inline void write_events(std::ostream &out, const SimResult &r) {
    out << "time_s,event,task_id,vm_id\n";
    for (const auto &e : r.events) {
        out << csv::fixed(e.time_s, 6) << ',' << to_string(e.kind) << ',' << e.task_id << ',';
        if (e.vm_id) {
            out << *e.vm_id;
        }
        out << '\n';
    }
}

inline void write_task_log(std::ostream &out, const SimResult &r, const Workload &w) {
    out << "task_id,video_id,gop_index,vm_id,vm_type,start_s,finish_s,deadline_s,missed\n";
    for (std::size_t i = 0; i < r.per_task.size(); ++i) {
        const auto &t = r.per_task[i];
        out << t.task_id << ',' << w.tasks[i].video_id << ',' << w.tasks[i].gop_index << ',' << t.vm_id << ','
            << r.vms[t.vm_id].vm_type << ',' << csv::fixed(t.start_s, 6) << ',' << csv::fixed(t.finish_s, 6) << ','
            << (std::isinf(t.deadline_s) ? std::string("inf") : csv::fixed(t.deadline_s, 6)) << ','
            << (t.missed ? 1 : 0) << '\n';
    }
}

} // namespace gopsched
