#include "pxbh/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>

#include "pxbh/bench_record.hpp"
#include "pxbh/dataflow.hpp"
#include "pxbh/error.hpp"
#include "pxbh/icgen.hpp"
#include "pxbh/simulation.hpp"

namespace pxbh::cli {

namespace {

struct GenOptions {
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::string out;
};

struct RunOptions {
    std::string in;
    std::string backend = "dataflow";
    double theta = 0.5;
    std::size_t grain = 64;
    std::size_t tasks = 0;
    std::size_t workers = 1;
    std::size_t steps = 1;
    double dt = 1e-3;
    double softening = 1e-2;
    std::string accum = "det";
    bool stealing = false;
    std::string timings_out;
    std::string out = "final.nbody";
};

struct VerifyOptions {
    std::string in;
    double theta = 0.5;
    std::optional<std::size_t> sample;  // min(N, 100) when omitted
    double bound = 1e-2;
    std::size_t workers = 1;
    std::size_t grain = 64;
    double softening = 1e-2;
};

struct BenchOptions {
    std::string in;
    std::vector<std::size_t> workers_list;
    std::vector<std::size_t> grain_list;
    double theta = 0.5;
    std::size_t steps = 1;
    double dt = 1e-3;
    double softening = 1e-2;
    std::string accum = "det";
    std::string out;
};

class UsageError : public Error {
public:
    using Error::Error;
};

Accumulation parse_accum(const std::string& s) {
    if (s == "det") return Accumulation::Deterministic;
    if (s == "stream") return Accumulation::Streaming;
    throw UsageError("--accum must be det or stream");
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::ios_base::failure("cannot open " + path + " for writing");
    return f;
}

int cmd_gen(const GenOptions& o, std::ostream& out) {
    if (o.n < 1) throw UsageError("--n must be >= 1");
    PlummerConfig cfg;
    cfg.n = o.n;
    cfg.seed = o.seed;
    write_particles(std::filesystem::path(o.out), plummer(cfg));
    out << "wrote " << o.n << " bodies to " << o.out << '\n';
    return kOk;
}

SimConfig sim_config(const RunOptions& o, std::size_t n) {
    SimConfig c;
    c.n = n;
    c.backend = parse_backend(o.backend);
    c.theta = Theta{o.theta};
    c.workers = o.workers;
    c.steps = o.steps;
    c.dt = o.dt;
    c.params.softening = o.softening;
    c.stealing = o.stealing;
    const auto acc = parse_accum(o.accum);
    c.grain = o.tasks > 0 ? GrainConfig::fixed_count(o.tasks, acc) : GrainConfig::fixed_grain(o.grain, acc);
    return c;
}

int cmd_run(const RunOptions& o, std::ostream& out) {
    auto particles = read_particles(std::filesystem::path(o.in));
    const std::size_t n = particles.size();
    SimConfig config;
    try {
        config = sim_config(o, n);
        config.validate();
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    }
    const auto result = run_simulation(config, std::move(particles));

    std::ofstream csv_file;
    std::ostream* csv = &out;
    if (!o.timings_out.empty()) {
        csv_file = open_out(o.timings_out);
        csv = &csv_file;
    }
    write_bench_header(*csv);
    for (const auto& t : result.timings) write_bench_record(*csv, make_record(config, n, t));
    write_particles(std::filesystem::path(o.out), result.final_state.particles);
    return kOk;
}

int cmd_verify(const VerifyOptions& o, std::ostream& out) {
    const auto particles = read_particles(std::filesystem::path(o.in));
    const std::size_t n = particles.size();
    const std::size_t sample = o.sample.value_or(std::min<std::size_t>(n, 100));
    if (sample < 1 || sample > n) throw UsageError("--sample must be in [1, N]");
    if (o.theta < 0.0) throw UsageError("--theta must be >= 0");

    ForceParams params;
    params.softening = o.softening;
    Engine engine(EngineConfig{o.workers});
    const Octree tree = make_tree(particles);
    const InputRow input = flatten(tree, engine);
    const OutputRow output = wire(input, tree, particles, Theta{o.theta}, engine);
    const auto stage = execute_force_stage(input, output, GrainConfig::fixed_grain(o.grain), params, engine);

    std::vector<double> errors;
    errors.reserve(sample);
    for (std::size_t k = 0; k < sample; ++k) {
        const std::size_t i = k * n / sample;
        const Vec3 exact = accel_direct(particles, i, params);
        const double scale = norm(exact);
        const double diff = norm(stage.accelerations[i] - exact);
        errors.push_back(scale > 0.0 ? diff / scale : diff);
    }
    std::sort(errors.begin(), errors.end());
    const double max_err = errors.back();
    const double median = errors.size() % 2 == 1
                              ? errors[errors.size() / 2]
                              : 0.5 * (errors[errors.size() / 2 - 1] + errors[errors.size() / 2]);
    out << "n=" << n << " theta=" << o.theta << " sample=" << sample << '\n'
        << "max_rel_err=" << max_err << '\n'
        << "median_rel_err=" << median << '\n';
    const bool ok = o.theta == 0.0 ? max_err == 0.0 : median < o.bound;
    out << (ok ? "verify: PASS" : "verify: FAIL") << '\n';
    return ok ? kOk : kVerifyFailed;
}

int cmd_bench(const BenchOptions& o, std::ostream& out) {
    if (o.workers_list.empty() || o.grain_list.empty()) throw UsageError("--workers-list and --grain-list must be nonempty");
    const auto initial = read_particles(std::filesystem::path(o.in));
    const std::size_t n = initial.size();
    const auto acc = parse_accum(o.accum);

    auto csv = open_out(o.out);
    write_bench_header(csv);
    std::vector<BenchRecord> records;

    auto sweep = [&](SimConfig config) {
        try {
            config.validate();
        } catch (const ConfigError& e) {
            throw UsageError(e.what());
        }
        const auto result = run_simulation(config, initial);
        for (const auto& t : result.timings) {
            records.push_back(make_record(config, n, t));
            write_bench_record(csv, records.back());
        }
        csv.flush();
    };

    SimConfig base;
    base.n = n;
    base.theta = Theta{o.theta};
    base.steps = o.steps;
    base.dt = o.dt;
    base.params.softening = o.softening;

    for (const auto w : o.workers_list) {
        for (const auto g : o.grain_list) {
            SimConfig c = base;
            c.backend = Backend::Dataflow;
            c.workers = w;
            c.grain = GrainConfig::fixed_grain(g, acc);
            sweep(c);
        }
        SimConfig c = base;
        c.backend = Backend::StaticChunk;
        c.workers = w;
        sweep(c);
    }
    SimConfig serial = base;
    serial.backend = Backend::Serial;
    sweep(serial);

    out << "# best grain per worker count\n";
    for (const auto& choice : best_grain_per_workers(records)) {
        out << "workers=" << choice.workers << " grain=" << choice.grain
            << " mean_force_time_s=" << choice.mean_force_time_s << '\n';
    }
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Barnes-Hut N-body on a lightweight-task dataflow engine", "pxbh"};
    app.require_subcommand(1);

    GenOptions gen;
    auto* gen_cmd = app.add_subcommand("gen", "Write a Plummer-sphere particle file");
    gen_cmd->add_option("--n", gen.n, "Number of bodies")->required();
    gen_cmd->add_option("--seed", gen.seed, "RNG seed");
    gen_cmd->add_option("--out", gen.out, "Output particle file")->required();

    RunOptions run_opts;
    auto* run_cmd = app.add_subcommand("run", "Run a simulation and write per-iteration timings");
    run_cmd->add_option("--in", run_opts.in, "Input particle file")->required();
    run_cmd->add_option("--backend", run_opts.backend, "dataflow, static or serial")
        ->check(CLI::IsMember({"dataflow", "static", "serial"}));
    run_cmd->add_option("--theta", run_opts.theta, "Opening angle");
    run_cmd->add_option("--grain", run_opts.grain, "Output elements per management task");
    run_cmd->add_option("--tasks", run_opts.tasks, "Fixed management task count (overrides --grain)");
    run_cmd->add_option("--workers", run_opts.workers, "Worker threads");
    run_cmd->add_option("--steps", run_opts.steps, "Iterations");
    run_cmd->add_option("--dt", run_opts.dt, "Time step");
    run_cmd->add_option("--softening", run_opts.softening, "Plummer softening length");
    run_cmd->add_option("--accum", run_opts.accum, "det or stream")->check(CLI::IsMember({"det", "stream"}));
    run_cmd->add_flag("--stealing", run_opts.stealing, "Let idle workers steal queued tasks");
    run_cmd->add_option("--timings-out", run_opts.timings_out, "CSV path (stdout when omitted)");
    run_cmd->add_option("--out", run_opts.out, "Final particle state file");

    VerifyOptions verify;
    auto* verify_cmd = app.add_subcommand("verify", "Compare dataflow forces with the direct sum");
    verify_cmd->add_option("--in", verify.in, "Input particle file")->required();
    verify_cmd->add_option("--theta", verify.theta, "Opening angle");
    verify_cmd->add_option("--sample", verify.sample, "Particles checked against the direct sum");
    verify_cmd->add_option("--bound", verify.bound, "Median relative error bound for theta > 0");
    verify_cmd->add_option("--workers", verify.workers, "Worker threads");
    verify_cmd->add_option("--grain", verify.grain, "Output elements per management task");
    verify_cmd->add_option("--softening", verify.softening, "Plummer softening length");

    BenchOptions bench;
    auto* bench_cmd = app.add_subcommand("bench", "Sweep workers x grain and write a timing CSV");
    bench_cmd->add_option("--in", bench.in, "Input particle file")->required();
    bench_cmd->add_option("--workers-list", bench.workers_list, "Comma-separated worker counts")
        ->delimiter(',')
        ->required();
    bench_cmd->add_option("--grain-list", bench.grain_list, "Comma-separated grain sizes")->delimiter(',')->required();
    bench_cmd->add_option("--theta", bench.theta, "Opening angle");
    bench_cmd->add_option("--steps", bench.steps, "Iterations per configuration");
    bench_cmd->add_option("--dt", bench.dt, "Time step");
    bench_cmd->add_option("--softening", bench.softening, "Plummer softening length");
    bench_cmd->add_option("--accum", bench.accum, "det or stream")->check(CLI::IsMember({"det", "stream"}));
    bench_cmd->add_option("--out", bench.out, "CSV output path")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*gen_cmd) return cmd_gen(gen, out);
        if (*run_cmd) return cmd_run(run_opts, out);
        if (*verify_cmd) return cmd_verify(verify, out);
        if (*bench_cmd) return cmd_bench(bench, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const ConfigError& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const DeadlockError& e) {
        err << "engine " << e.what() << '\n';
        return kDeadlock;
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << '\n';
        return kParseOrIo;
    } catch (const std::ios_base::failure& e) {
        err << "i/o error: " << e.what() << '\n';
        return kParseOrIo;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kParseOrIo;
    }
    return kUsage;
}

}  // namespace pxbh::cli
