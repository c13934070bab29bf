#pragma once

// Reference implementations used only by tests. Each one is written
// independently of the library code path it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace oracle {

// ---------------------------------------------------------------------------
// Quadratic least squares on raw x via Cramer's rule in long double, plus the
// classical standard errors sqrt(diag(sigma^2 (X^T X)^-1)).

struct QuadOracle {
    long double a = 0, b = 0, c = 0;
    long double se_a = 0, se_b = 0, se_c = 0;
};

inline long double det3(const long double m[3][3]) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

inline QuadOracle quadratic_normal_equations(const std::vector<double> &xs, const std::vector<double> &ts) {
    long double s[5] = {0, 0, 0, 0, 0};
    long double y[3] = {0, 0, 0};
    for (std::size_t i = 0; i < xs.size(); ++i) {
        long double p = 1;
        for (int k = 0; k < 5; ++k) {
            s[k] += p;
            if (k < 3) {
                y[k] += ts[i] * p;
            }
            p *= xs[i];
        }
    }
    const long double m[3][3] = {{s[0], s[1], s[2]}, {s[1], s[2], s[3]}, {s[2], s[3], s[4]}};
    const long double d = det3(m);
    long double coef[3];
    for (int col = 0; col < 3; ++col) {
        long double mc[3][3];
        std::memcpy(mc, m, sizeof mc);
        for (int r = 0; r < 3; ++r) {
            mc[r][col] = y[r];
        }
        coef[col] = det3(mc) / d;
    }
    QuadOracle q{coef[0], coef[1], coef[2]};
    long double ss = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const long double r = ts[i] - (q.a + q.b * xs[i] + q.c * xs[i] * xs[i]);
        ss += r * r;
    }
    const long double sigma2 = ss / static_cast<long double>(xs.size() - 3);
    // Diagonal of the inverse via cofactors.
    const long double c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
    const long double c11 = m[0][0] * m[2][2] - m[0][2] * m[2][0];
    const long double c22 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    q.se_a = std::sqrt(sigma2 * c00 / d);
    q.se_b = std::sqrt(sigma2 * c11 / d);
    q.se_c = std::sqrt(sigma2 * c22 / d);
    return q;
}

// ---------------------------------------------------------------------------
// Straight-line schedule replay. Time advances from one decision instant to
// the next (an arrival or a VM becoming free); at each instant every arrived,
// unstarted task and every free VM is eligible. The `window` earliest
// (deadline, id) tasks are scanned exhaustively for the highest score with
// ties on (deadline, task id, vm id).

struct ReplayTask {
    std::uint64_t id = 0;
    double arrival = 0;
    double deadline = 0;
    std::vector<double> time_on_type;  // by VM type index
    std::vector<double> score_on_type; // by VM type index
};

struct ReplayEntry {
    std::uint64_t id = 0;
    std::uint32_t vm = 0;
    double start = 0;
    double finish = 0;
};

inline std::vector<ReplayEntry> replay_schedule(const std::vector<ReplayTask> &tasks,
                                                const std::vector<int> &vm_type_of, std::size_t window) {
    const std::size_t n = tasks.size();
    std::vector<bool> started(n, false);
    std::vector<double> free_at(vm_type_of.size(), -INFINITY);
    std::vector<ReplayEntry> out(n);
    std::size_t done = 0;
    double now = -INFINITY;
    while (done < n) {
        // Next decision instant strictly after `now`.
        double next = INFINITY;
        for (std::size_t i = 0; i < n; ++i) {
            if (!started[i] && tasks[i].arrival > now) {
                next = std::min(next, tasks[i].arrival);
            }
        }
        for (double f : free_at) {
            if (f > now) {
                next = std::min(next, f);
            }
        }
        now = next;
        for (;;) {
            std::vector<std::size_t> ready;
            for (std::size_t i = 0; i < n; ++i) {
                if (!started[i] && tasks[i].arrival <= now) {
                    ready.push_back(i);
                }
            }
            std::sort(ready.begin(), ready.end(), [&](std::size_t a, std::size_t b) {
                if (tasks[a].deadline != tasks[b].deadline) {
                    return tasks[a].deadline < tasks[b].deadline;
                }
                return tasks[a].id < tasks[b].id;
            });
            if (ready.size() > window) {
                ready.resize(window);
            }
            long best_task = -1;
            long best_vm = -1;
            double best_score = -INFINITY;
            for (std::size_t qi = 0; qi < ready.size(); ++qi) {
                for (std::size_t v = 0; v < free_at.size(); ++v) {
                    if (free_at[v] > now) {
                        continue;
                    }
                    const double s = tasks[ready[qi]].score_on_type[vm_type_of[v]];
                    if (s > best_score) {
                        best_score = s;
                        best_task = static_cast<long>(ready[qi]);
                        best_vm = static_cast<long>(v);
                    }
                }
            }
            if (best_task < 0) {
                break;
            }
            const auto &t = tasks[best_task];
            const double finish = now + t.time_on_type[vm_type_of[best_vm]];
            out[best_task] = {t.id, static_cast<std::uint32_t>(best_vm), now, finish};
            started[best_task] = true;
            free_at[best_vm] = finish;
            ++done;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// One-pass counting over a trace CSV file, rendering the same report formats
// as the library writers with printf.

struct Row {
    std::string video, op, vm;
    int gop = 0;
    double t = 0;
};

inline std::vector<Row> load_rows(const std::string &path) {
    std::ifstream in(path);
    std::string line;
    std::getline(in, line); // header
    std::vector<Row> rows;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        char video[64], op[32], vm[32], content[32];
        int gop = 0, frames = 0;
        double size = 0, t = 0;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::sscanf(line.c_str(), "%63s %d %31s %31s %31s %lf %d %lf", video, &gop, op, vm, content, &size, &frames,
                    &t);
        rows.push_back({video, op, vm, gop, t});
    }
    return rows;
}

inline std::string fmt(const char *f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

inline std::vector<double> ratios_for(const std::vector<Row> &rows, const std::string &vm_filter,
                                      std::vector<std::pair<std::string, std::string>> *labels = nullptr) {
    std::vector<double> out;
    for (const auto &r : rows) {
        if (r.vm == "gpu" || (!vm_filter.empty() && r.vm != vm_filter)) {
            continue;
        }
        for (const auto &g : rows) {
            if (g.vm == "gpu" && g.video == r.video && g.gop == r.gop && g.op == r.op) {
                out.push_back(r.t / g.t);
                if (labels) {
                    labels->push_back({r.vm, r.op});
                }
                break;
            }
        }
    }
    return out;
}

inline std::string threshold_csv(const std::vector<Row> &rows, double theta, bool strict) {
    std::vector<std::pair<std::string, std::string>> labels;
    const auto ratios = ratios_for(rows, "", &labels);
    const char *vms[] = {"general", "cpu_opt", "mem_opt"};
    const char *ops[] = {"codec", "bitrate", "framerate", "resolution"};
    std::string s = "vm_type,codec,bitrate,framerate,resolution\n";
    for (const char *vm : vms) {
        s += vm;
        for (const char *op : ops) {
            int hit = 0, total = 0;
            for (std::size_t i = 0; i < ratios.size(); ++i) {
                if (labels[i].first == vm && labels[i].second == op) {
                    ++total;
                    hit += strict ? (ratios[i] < theta) : (ratios[i] <= theta);
                }
            }
            s += ",";
            if (total > 0) {
                s += fmt("%.2f", 100.0 * hit / total);
            }
        }
        s += "\n";
    }
    return s;
}

inline std::string histogram_csv(const std::vector<Row> &rows, double w, const std::string &vm_filter = "") {
    const auto r = ratios_for(rows, vm_filter);
    double mn = r[0], mx = r[0], sum = 0;
    for (double v : r) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
        sum += v;
    }
    const double lo = std::floor(mn / w) * w;
    const int bins = static_cast<int>(std::floor((mx - lo) / w)) + 1;
    std::vector<int> counts(bins, 0);
    for (double v : r) {
        counts[std::min(bins - 1, static_cast<int>(std::floor((v - lo) / w)))]++;
    }
    const double mean = sum / r.size();
    double ss = 0;
    for (double v : r) {
        ss += (v - mean) * (v - mean);
    }
    const double sd = r.size() > 1 ? std::sqrt(ss / (r.size() - 1)) : 0.0;
    std::string s = "bin_lo,bin_hi,count\n";
    for (int k = 0; k < bins; ++k) {
        s += fmt("%.6f", lo + k * w) + "," + fmt("%.6f", lo + (k + 1) * w) + "," + std::to_string(counts[k]) + "\n";
    }
    s += "#mean=" + fmt("%.6f", mean) + ",std=" + fmt("%.6f", sd) + "\n";
    return s;
}

inline std::string operation_summary_csv(const std::vector<Row> &rows, bool per_video) {
    std::map<std::string, std::pair<double, int>> groups; // "video\x1fvm\x1fop" sorts like the tuple
    std::map<std::string, std::string> op_order = {
        {"codec", "0"}, {"bitrate", "1"}, {"framerate", "2"}, {"resolution", "3"}};
    for (const auto &r : rows) {
        const std::string key = (per_video ? r.video : "") + '\x1f' + r.vm + '\x1f' + op_order[r.op] + r.op;
        groups[key].first += r.t;
        groups[key].second += 1;
    }
    std::string s = "video_id,vm_type,operation,mean_time_s,count\n";
    for (const auto &[key, acc] : groups) {
        const auto p1 = key.find('\x1f');
        const auto p2 = key.find('\x1f', p1 + 1);
        const std::string video = key.substr(0, p1);
        s += (video.empty() ? "*" : video) + "," + key.substr(p1 + 1, p2 - p1 - 1) + "," + key.substr(p2 + 2) + "," +
             fmt("%.6f", acc.first / acc.second) + "," + std::to_string(acc.second) + "\n";
    }
    return s;
}

} // namespace oracle
