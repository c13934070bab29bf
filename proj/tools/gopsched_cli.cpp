// gopsched command-line front end.
//
// Every command accepts --seed, --out (output directory) and --config (flat
// key=value file; explicit flags win). The merged parameters are written to
// <out>/run_manifest.txt, which can be fed back through --config to reproduce
// the run.

#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gopsched/gopsched.hpp"

namespace fs = std::filesystem;
using namespace gopsched;

namespace {

std::string show(const std::string &v) { return v; }
std::string show(bool v) { return v ? "true" : "false"; }
std::string show(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
template <typename Int>
std::string show(Int v) {
    return std::to_string(v);
}

// Options of one subcommand, remembered in declaration order for the manifest.
struct Command {
    CLI::App *app = nullptr;
    std::vector<std::pair<std::string, std::function<std::string()>>> fields;
    std::uint64_t seed = 1;
    std::string out = "out";
    std::string config;

    Command(CLI::App &parent, const std::string &name, const std::string &desc) {
        app = parent.add_subcommand(name, desc);
        add("seed", seed, "master seed");
        app->add_option("--out", out, "output directory")->capture_default_str();
        app->add_option("--config", config, "key=value file; explicit flags take precedence");
    }

    template <typename T>
    CLI::Option *add(const std::string &name, T &var, const std::string &desc) {
        fields.emplace_back(name, [&var] { return show(var); });
        return app->add_option("--" + name, var, desc)->capture_default_str();
    }

    CLI::Option *flag(const std::string &name, bool &var, const std::string &desc) {
        fields.emplace_back(name, [&var] { return show(var); });
        return app->add_flag("--" + name, var, desc);
    }

    // Fills options not given on the command line from the config file.
    void apply_config() const {
        if (config.empty()) {
            return;
        }
        std::ifstream in(config);
        if (!in) {
            throw Error("MissingInput", "cannot open config " + config);
        }
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line.front() == '#') {
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw ParseError("BadConfig", lineno, "expected key=value");
            }
            std::string key = line.substr(0, eq);
            const std::string value = line.substr(eq + 1);
            if (key == "command") {
                if (value != app->get_name()) {
                    throw ParseError("BadConfig", lineno, "config is for command '" + value + "'");
                }
                continue;
            }
            std::replace(key.begin(), key.end(), '_', '-');
            if (key == "out" || key == "config") {
                continue;
            }
            auto *opt = app->get_option_no_throw("--" + key);
            if (opt == nullptr) {
                throw ParseError("BadConfig", lineno, "unknown key '" + key + "'");
            }
            if (opt->count() == 0) {
                opt->add_result(value);
                opt->run_callback();
            }
        }
    }

    void write_manifest() const {
        std::ofstream f(fs::path(out) / "run_manifest.txt");
        f << "command=" << app->get_name() << '\n';
        for (const auto &[name, print] : fields) {
            f << name << '=' << print() << '\n';
        }
    }
};

std::ifstream open_input(const std::string &path, const std::string &what) {
    if (path.empty()) {
        throw Error("MissingInput", "no " + what + " given");
    }
    std::ifstream in(path);
    if (!in) {
        throw Error("MissingInput", "cannot open " + what + " " + path);
    }
    return in;
}

void write_file(const fs::path &path, const std::function<void(std::ostream &)> &body) {
    std::ofstream f(path);
    if (!f) {
        throw Error("OutputError", "cannot write " + path.string());
    }
    body(f);
}

std::vector<std::string> list_of(const std::string &text) {
    std::vector<std::string> out;
    if (text.empty()) {
        return out;
    }
    for (auto item : csv::split(text)) {
        out.emplace_back(item);
    }
    return out;
}

double real_of(const std::string &text, const std::string &what) {
    const auto v = csv::to_double(text);
    if (!v) {
        throw Error("InvalidArgument", what + " must be a number, got '" + text + "'");
    }
    return *v;
}

// A real or "inf"; empty means unset.
std::optional<double> real_or_inf(const std::string &text, const std::string &what) {
    if (text.empty()) {
        return std::nullopt;
    }
    if (text == "inf") {
        return kNoDeadline;
    }
    return real_of(text, what);
}

std::vector<TraceRecord> load_trace(const std::string &path) {
    auto in = open_input(path, "trace");
    return parse_trace(in);
}

QuadraticFit load_fit_or_default(const std::string &path) {
    if (path.empty()) {
        return default_base_fit();
    }
    auto in = open_input(path, "fit");
    return read_fit(in);
}

// ---------------------------------------------------------------------------

struct AnalyzeArgs {
    std::string trace;
    std::string baseline = "gpu";
    std::string strict_thresholds = "1.0";
    std::string thresholds = "1.2";
    double bin_width = 0.1;
    std::string operation;
    bool per_video = false;
};

void cmd_analyze(const Command &cmd, const AnalyzeArgs &a) {
    const auto trace = load_trace(a.trace);
    const auto catalog = default_vm_catalog();
    const fs::path out(cmd.out);

    for (const auto &[list, strict] : {std::pair{a.strict_thresholds, true}, std::pair{a.thresholds, false}}) {
        for (const auto &token : list_of(list)) {
            const double theta = real_of(token, "threshold");
            const auto table = threshold_table(trace, a.baseline, theta, strict);
            write_file(out / ("threshold_table_" + std::string(strict ? "lt" : "le") + token + ".csv"),
                       [&](std::ostream &f) { write_threshold_table(f, table, catalog, a.baseline); });
        }
    }

    RatioFilter filter;
    if (!a.operation.empty()) {
        filter.operation = parse_operation(a.operation);
        if (!filter.operation) {
            throw Error("UnknownEnum", "operation '" + a.operation + "'");
        }
    }
    const auto pooled = ratio_histogram(trace, a.baseline, a.bin_width, filter);
    write_file(out / "histogram.csv", [&](std::ostream &f) { write_histogram(f, pooled); });
    std::printf("pooled ratios: mean=%s std=%s skipped=%zu\n", csv::fixed(pooled.mean, 6).c_str(),
                csv::fixed(pooled.stddev, 6).c_str(), pooled.skipped);
    for (const auto &vm : catalog) {
        if (vm.name == a.baseline) {
            continue;
        }
        RatioFilter one = filter;
        one.vm_type = vm.name;
        if (matched_ratios(trace, a.baseline, one).samples.empty()) {
            continue;
        }
        const auto h = ratio_histogram(trace, a.baseline, a.bin_width, one);
        write_file(out / ("histogram_" + vm.name + ".csv"), [&](std::ostream &f) { write_histogram(f, h); });
        std::printf("%s ratios: mean=%s std=%s\n", vm.name.c_str(), csv::fixed(h.mean, 6).c_str(),
                    csv::fixed(h.stddev, 6).c_str());
    }

    const auto summary = summarize_by_operation(trace, a.per_video);
    write_file(out / "operation_summary.csv", [&](std::ostream &f) { write_operation_summary(f, summary); });
}

// ---------------------------------------------------------------------------

struct FitArgs {
    std::string trace;
    std::string vm = "gpu";
    std::string predictor = "frame_count";
    std::string operation;
};

void cmd_fit(const Command &cmd, const FitArgs &a) {
    const auto trace = load_trace(a.trace);
    const auto predictor = parse_predictor(a.predictor);
    if (!predictor) {
        throw Error("InvalidArgument", "unknown predictor '" + a.predictor + "'");
    }
    std::optional<Operation> op;
    if (!a.operation.empty()) {
        op = parse_operation(a.operation);
        if (!op) {
            throw Error("UnknownEnum", "operation '" + a.operation + "'");
        }
    }
    std::vector<FitPoint> points;
    for (const auto &r : trace) {
        if (r.vm_type == a.vm && (!op || r.operation == *op)) {
            points.push_back({predictor_value(r, *predictor), r.transcode_time_s});
        }
    }
    const auto fit = fit_quadratic(points, *predictor);
    write_file(fs::path(cmd.out) / "fit.txt", [&](std::ostream &f) { write_fit(f, fit); });
    std::printf("a=%s b=%s c=%s r2=%s n=%zu\n", show(fit.a).c_str(), show(fit.b).c_str(), show(fit.c).c_str(),
                fit.r2 ? csv::fixed(*fit.r2, 6).c_str() : "unset", points.size());
}

// ---------------------------------------------------------------------------

struct SuitabilityArgs {
    std::string etc;
    std::string trace;
    std::string method = "suitability";
    double p = 0.5;
    std::string delta_th;
    double alpha = 1.0;
    double beta = 5.0;
    double k = 0.5;
    bool literal = false;
    bool cost_form = false;
    std::string baseline = "gpu";
};

void cmd_suitability(const Command &cmd, const SuitabilityArgs &a) {
    const auto catalog = default_vm_catalog();
    if (a.etc.empty() == a.trace.empty()) {
        throw Error("MissingInput", "give exactly one of --etc or --trace");
    }
    EtcMatrix etc;
    if (!a.etc.empty()) {
        auto in = open_input(a.etc, "ETC");
        etc = read_etc(in);
    } else {
        etc = etc_from_trace(load_trace(a.trace), catalog);
    }

    ScoreMatrix scores;
    if (a.method == "naive") {
        scores = naive_matrix(etc, catalog, NaiveParams{a.k});
        std::printf("delta_th=na\n");
    } else if (a.method == "suitability") {
        double dth = 0.0;
        if (!a.delta_th.empty()) {
            dth = real_of(a.delta_th, "delta-th");
        } else {
            const FuzzyParams params{a.alpha, a.beta};
            const auto pref = TradeoffPreference::from_performance(a.p);
            dth = a.cost_form ? threshold_gap_cost_form(pref.c, params) : threshold_gap(pref, params);
        }
        SuitabilityOptions opts;
        opts.baseline = a.baseline;
        opts.normalization = a.literal ? Normalization::literal : Normalization::min_max;
        scores = to_scores(suitability_matrix(etc, catalog, dth, opts));
        scores.delta_th = dth;
        std::printf("delta_th=%s\n", csv::fixed(dth, 6).c_str());
    } else {
        throw Error("InvalidArgument", "method must be suitability or naive");
    }
    write_file(fs::path(cmd.out) / "suitability.csv", [&](std::ostream &f) { write_scores(f, scores); });
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
    std::uint32_t n = 100;
    std::string mix = "slow=0.5,fast=0.5";
    double window = 3600.0;
    std::uint32_t gops_per_video = 1;
    std::string arrivals = "uniform";
    double fps = 30.0;
    std::string fit;
    std::string ratios = "sampled";
};

GenerateOptions generate_options(const GenerateArgs &a) {
    GenerateOptions opts;
    opts.gops_per_video = a.gops_per_video;
    opts.fps = a.fps;
    if (a.arrivals == "uniform") {
        opts.arrivals = ArrivalProcess::uniform;
    } else if (a.arrivals == "poisson") {
        opts.arrivals = ArrivalProcess::poisson;
    } else {
        throw Error("InvalidArgument", "arrivals must be uniform or poisson");
    }
    return opts;
}

EtcOptions etc_options(const GenerateArgs &a) {
    EtcOptions opts;
    if (a.ratios == "means") {
        opts.ratios = RatioMode::means;
    } else if (a.ratios != "sampled") {
        throw Error("InvalidArgument", "ratios must be sampled or means");
    }
    return opts;
}

void cmd_generate(const Command &cmd, const GenerateArgs &a) {
    const auto mix = parse_mix(a.mix);
    const auto fit = load_fit_or_default(a.fit);
    const auto catalog = default_vm_catalog();
    const auto w = generate_workload(a.n, mix, a.window, cmd.seed, generate_options(a));
    const auto etc = build_etc(w, fit, default_ratio_distributions(), catalog, cmd.seed, etc_options(a));
    const fs::path out(cmd.out);
    write_file(out / "workload.csv", [&](std::ostream &f) { write_workload(f, w); });
    write_file(out / "etc.csv", [&](std::ostream &f) { write_etc(f, etc); });
    std::printf("tasks=%zu videos=%zu\n", w.tasks.size(), w.videos.size());
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    GenerateArgs gen;
    std::string workload;
    std::string etc;
    std::string cluster = "gpu=2,cpu_opt=4,general=4";
    std::string policy = "suitability";
    double p = 0.5;
    double alpha = 1.0;
    double beta = 5.0;
    double k = 0.5;
    std::uint32_t reps = 30;
    std::string startup_allowance = "5";
    double quantum = 3600.0;
    std::string idle_release;
    std::uint32_t window_k = 10;
    std::uint32_t parallel = 1;
    bool emit_events = false;
};

void cmd_simulate(const Command &cmd, const SimulateArgs &a) {
    const auto catalog = default_vm_catalog();
    if (a.workload.empty() != a.etc.empty()) {
        throw Error("MissingInput", "--workload and --etc go together");
    }
    std::optional<Workload> fixed_workload;
    std::optional<EtcMatrix> fixed_etc;
    if (!a.workload.empty()) {
        auto win = open_input(a.workload, "workload");
        fixed_workload = read_workload(win);
        auto ein = open_input(a.etc, "ETC");
        fixed_etc = read_etc(ein);
    }
    const auto mix = parse_mix(a.gen.mix);
    const auto fit = load_fit_or_default(a.gen.fit);
    const auto gen_opts = generate_options(a.gen);
    const auto etc_opts = etc_options(a.gen);

    ClusterConfig cluster;
    cluster.counts = parse_cluster_spec(a.cluster, catalog);
    cluster.billing_quantum_s = a.quantum;
    cluster.startup_allowance_s = real_or_inf(a.startup_allowance, "startup-allowance").value_or(5.0);
    cluster.idle_release_s = real_or_inf(a.idle_release, "idle-release");
    if (cluster.total_vms() == 0) {
        throw Error("EmptyCluster", "cluster has no VMs");
    }

    PolicyConfig policy;
    const auto parsed = parse_policy(a.policy);
    if (!parsed) {
        throw Error("InvalidArgument", "unknown policy '" + a.policy + "'");
    }
    policy.policy = *parsed;
    policy.pref = TradeoffPreference::from_performance(a.p);
    policy.fuzzy = {a.alpha, a.beta};
    policy.naive = {a.k};
    policy.window = a.window_k;
    policy.pref.validate();
    policy.fuzzy.validate();
    policy.naive.validate();
    if (a.reps < 2) {
        throw Error("TooFewReps", "need at least 2 replications");
    }

    struct Rep {
        Workload workload;
        SimResult result;
    };
    std::vector<Rep> reps(a.reps);
    std::atomic<std::uint32_t> next{0};
    std::vector<std::exception_ptr> errors(a.reps);
    auto worker = [&] {
        for (std::uint32_t i = next++; i < a.reps; i = next++) {
            try {
                const auto seed = derive_seed(cmd.seed, {i});
                Rep &rep = reps[i];
                if (fixed_workload) {
                    rep.workload = *fixed_workload;
                    rep.result = run_sim(rep.workload, *fixed_etc, catalog, cluster, policy, seed);
                } else {
                    rep.workload = generate_workload(a.gen.n, mix, a.gen.window, seed, gen_opts);
                    const auto etc = build_etc(rep.workload, fit, default_ratio_distributions(), catalog, seed, etc_opts);
                    rep.result = run_sim(rep.workload, etc, catalog, cluster, policy, seed);
                }
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::uint32_t threads = std::max<std::uint32_t>(1, std::min(a.parallel, a.reps));
    std::vector<std::thread> pool;
    for (std::uint32_t t = 1; t < threads; ++t) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto &t : pool) {
        t.join();
    }
    for (const auto &e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }

    const fs::path out(cmd.out);
    std::vector<SimResult> results;
    for (std::uint32_t i = 0; i < a.reps; ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "rep_%03u_tasks.csv", i);
        write_file(out / name, [&](std::ostream &f) { write_task_log(f, reps[i].result, reps[i].workload); });
        if (a.emit_events) {
            std::snprintf(name, sizeof name, "rep_%03u_events.csv", i);
            write_file(out / name, [&](std::ostream &f) { write_events(f, reps[i].result); });
        }
        results.push_back(reps[i].result);
    }
    write_file(out / "reps.csv", [&](std::ostream &f) {
        f << "rep,seed,startup_delay_s,miss_rate,cost_usd\n";
        for (std::uint32_t i = 0; i < a.reps; ++i) {
            const auto &r = results[i];
            f << i << ',' << r.replication_seed << ',' << csv::fixed(r.mean_startup_delay_s(), 6) << ','
              << csv::fixed(r.miss_rate(), 6) << ',' << csv::fixed(r.total_cost_usd, 6) << '\n';
        }
    });
    std::vector<CiSummary> summary;
    for (auto m : kMetrics) {
        summary.push_back(aggregate(std::span<const SimResult>(results), m));
    }
    write_file(out / "summary.csv", [&](std::ostream &f) { write_summary(f, summary); });
    write_summary(std::cout, summary);
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"GOP transcoding cost/performance modelling and scheduling simulator", "gopsched"};
    app.require_subcommand(1);

    AnalyzeArgs analyze_args;
    Command analyze(app, "analyze", "ratio histograms, threshold tables and per-operation means of a trace");
    analyze.add("trace", analyze_args.trace, "trace CSV");
    analyze.add("baseline", analyze_args.baseline, "baseline VM type");
    analyze.add("strict-thresholds", analyze_args.strict_thresholds, "comma list; share of ratios < theta");
    analyze.add("thresholds", analyze_args.thresholds, "comma list; share of ratios <= theta");
    analyze.add("bin-width", analyze_args.bin_width, "histogram bin width");
    analyze.add("operation", analyze_args.operation, "restrict histograms to one operation");
    analyze.flag("per-video", analyze_args.per_video, "group the operation summary by video");

    FitArgs fit_args;
    Command fit(app, "fit", "second-degree regression of transcoding time");
    fit.add("trace", fit_args.trace, "trace CSV");
    fit.add("vm", fit_args.vm, "VM type whose records are fitted");
    fit.add("predictor", fit_args.predictor, "frame_count or gop_size_mb");
    fit.add("operation", fit_args.operation, "restrict to one operation");

    SuitabilityArgs suit_args;
    Command suit(app, "suitability", "suitability (or naive) score matrix");
    suit.add("etc", suit_args.etc, "ETC CSV");
    suit.add("trace", suit_args.trace, "trace CSV (ETC from matched records)");
    suit.add("method", suit_args.method, "suitability or naive");
    suit.add("p", suit_args.p, "performance preference in (0, 1)");
    suit.add("delta-th", suit_args.delta_th, "threshold gap in seconds; overrides --p");
    suit.add("alpha", suit_args.alpha, "membership scale");
    suit.add("beta", suit_args.beta, "membership shift");
    suit.add("k", suit_args.k, "naive time weight");
    suit.flag("literal", suit_args.literal, "(W - max) / (max - min) normalisation");
    suit.flag("cost-form", suit_args.cost_form, "threshold from the cost-preference formula");
    suit.add("baseline", suit_args.baseline, "baseline VM type");

    GenerateArgs gen_args;
    Command gen(app, "generate", "synthetic workload and ETC matrix");
    auto add_generation = [](Command &c, GenerateArgs &g) {
        c.add("n", g.n, "number of GOP tasks");
        c.add("mix", g.mix, "content mix, e.g. slow=0.5,fast=0.5");
        c.add("window", g.window, "arrival window in seconds");
        c.add("gops-per-video", g.gops_per_video, "GOPs grouped into one stream");
        c.add("arrivals", g.arrivals, "uniform or poisson");
        c.add("fps", g.fps, "frames per second");
        c.add("fit", g.fit, "baseline fit file (default built-in)");
        c.add("ratios", g.ratios, "sampled or means");
    };
    add_generation(gen, gen_args);

    SimulateArgs sim_args;
    Command sim(app, "simulate", "replicated discrete-event scheduling simulation");
    sim.add("workload", sim_args.workload, "workload CSV (otherwise generated per replication)");
    sim.add("etc", sim_args.etc, "ETC CSV matching --workload");
    add_generation(sim, sim_args.gen);
    sim.add("cluster", sim_args.cluster, "VM counts, e.g. gpu=2,cpu_opt=4");
    sim.add("policy", sim_args.policy, "suitability, naive, fastest_vm or random");
    sim.add("p", sim_args.p, "performance preference in (0, 1)");
    sim.add("alpha", sim_args.alpha, "membership scale");
    sim.add("beta", sim_args.beta, "membership shift");
    sim.add("k", sim_args.k, "naive time weight");
    sim.add("reps", sim_args.reps, "replications");
    sim.add("startup-allowance", sim_args.startup_allowance, "seconds before playback starts, or inf");
    sim.add("quantum", sim_args.quantum, "billing quantum in seconds");
    sim.add("idle-release", sim_args.idle_release, "idle seconds before a VM is released (default quantum), or inf");
    sim.add("window-k", sim_args.window_k, "scheduler look-ahead");
    sim.add("parallel", sim_args.parallel, "worker threads");
    sim.flag("emit-events", sim_args.emit_events, "write per-replication event logs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        Command *cmd = nullptr;
        for (Command *c : {&analyze, &fit, &suit, &gen, &sim}) {
            if (c->app->parsed()) {
                cmd = c;
            }
        }
        cmd->apply_config();
        fs::create_directories(cmd->out);
        if (cmd == &analyze) {
            cmd_analyze(*cmd, analyze_args);
        } else if (cmd == &fit) {
            cmd_fit(*cmd, fit_args);
        } else if (cmd == &suit) {
            cmd_suitability(*cmd, suit_args);
        } else if (cmd == &gen) {
            cmd_generate(*cmd, gen_args);
        } else {
            cmd_simulate(*cmd, sim_args);
        }
        cmd->write_manifest();
    } catch (const Error &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const CLI::Error &e) {
        std::fprintf(stderr, "error: BadConfig: %s\n", e.what());
        return 2;
    } catch (const std::exception &e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 1;
    }
    return 0;
}
