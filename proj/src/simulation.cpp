#include "pxbh/simulation.hpp"

#include <chrono>
#include <cmath>
#include <optional>
#include <string>

#include "pxbh/error.hpp"
#include "pxbh/icgen.hpp"
#include "pxbh/static_chunk.hpp"

namespace pxbh {

namespace {

using Clock = std::chrono::steady_clock;

double seconds(Clock::time_point a, Clock::time_point b) { return std::chrono::duration<double>(b - a).count(); }

void kick(std::vector<Particle>& particles, std::span<const Vec3> acc, double half_dt) {
    for (std::size_t i = 0; i < particles.size(); ++i) particles[i].velocity += acc[i] * half_dt;
}

}  // namespace

std::string_view to_string(Backend backend) noexcept {
    switch (backend) {
        case Backend::Dataflow: return "dataflow";
        case Backend::StaticChunk: return "static";
        case Backend::Serial: return "serial";
    }
    return "unknown";
}

Backend parse_backend(std::string_view name) {
    if (name == "dataflow") return Backend::Dataflow;
    if (name == "static") return Backend::StaticChunk;
    if (name == "serial") return Backend::Serial;
    throw ConfigError("unknown backend '" + std::string(name) + "'");
}

void SimConfig::validate() const {
    if (n < 1) throw ConfigError("n must be >= 1");
    if (steps < 1) throw ConfigError("steps must be >= 1");
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (theta.value < 0.0) throw ConfigError("theta must be >= 0");
    if (!(params.g_const > 0.0) || params.softening < 0.0) throw ConfigError("invalid force parameters");
    if (grain.value < 1) throw ConfigError("grain must be >= 1");
}

ForceEvaluation evaluate_forces(std::span<const Particle> particles, const SimConfig& config, Engine* engine) {
    ForceEvaluation eval;
    auto& t = eval.timing;
    const auto t0 = Clock::now();
    const Octree tree = make_tree(particles);

    if (config.backend == Backend::Dataflow) {
        if (engine == nullptr) throw ConfigError("dataflow backend needs an engine");
        const auto before = engine->stats();
        const InputRow input = flatten(tree, *engine);
        const OutputRow output = wire(input, tree, particles, config.theta, *engine);
        const auto t1 = Clock::now();
        auto stage = execute_force_stage(input, output, config.grain, config.params, *engine);
        const auto t2 = Clock::now();
        const auto after = engine->stats();
        t.tree_time = seconds(t0, t1);
        t.force_time = seconds(t1, t2);
        t.stage = stage.stats;
        t.tasks_spawned = after.tasks_spawned - before.tasks_spawned;
        t.suspensions = after.suspensions - before.suspensions;
        t.mean_list_len = output.mean_deps();
        eval.accelerations = std::move(stage.accelerations);
        return eval;
    }

    const auto t1 = Clock::now();
    BaselineForce force = config.backend == Backend::Serial
                              ? serial_force(particles, tree, config.theta, config.params)
                              : static_chunk_force(particles, tree, config.theta, config.workers, config.params);
    const auto t2 = Clock::now();
    t.tree_time = seconds(t0, t1);
    t.force_time = seconds(t1, t2);
    t.mean_list_len = force.mean_list_len;
    t.chunk_seconds = std::move(force.chunk_seconds);
    eval.accelerations = std::move(force.accelerations);
    return eval;
}

IterationTiming step(SimState& state, const SimConfig& config, Engine* engine) {
    const auto start = Clock::now();
    ForceEvaluation eval = evaluate_forces(state.particles, config, engine);
    const auto integrate_start = Clock::now();
    const double half_dt = 0.5 * config.dt;
    if (state.closing_kick_pending) kick(state.particles, eval.accelerations, half_dt);
    kick(state.particles, eval.accelerations, half_dt);
    for (auto& p : state.particles) {
        p.position += p.velocity * config.dt;
        if (!is_finite(p.position) || !is_finite(p.velocity)) {
            throw NumericalBlowupError(state.iteration, "particle " + std::to_string(p.index) + " left finite range");
        }
    }
    state.closing_kick_pending = true;
    state.time += config.dt;
    const auto stop = Clock::now();

    IterationTiming timing = std::move(eval.timing);
    timing.iteration = state.iteration++;
    timing.integrate_time = seconds(integrate_start, stop);
    timing.total_time = seconds(start, stop);
    return timing;
}

void synchronize(SimState& state, const SimConfig& config, Engine* engine) {
    if (!state.closing_kick_pending) return;
    const ForceEvaluation eval = evaluate_forces(state.particles, config, engine);
    kick(state.particles, eval.accelerations, 0.5 * config.dt);
    state.closing_kick_pending = false;
}

SimResult run_simulation(const SimConfig& config, std::vector<Particle> initial) {
    config.validate();
    if (initial.empty()) throw ConfigError("simulation needs at least one particle");
    std::optional<Engine> engine;
    if (config.backend == Backend::Dataflow) engine.emplace(EngineConfig{config.workers, Placement::RoundRobin, config.stealing});
    Engine* eng = engine ? &*engine : nullptr;

    SimResult result;
    result.final_state.particles = std::move(initial);
    result.timings.reserve(config.steps);
    for (std::size_t s = 0; s < config.steps; ++s) result.timings.push_back(step(result.final_state, config, eng));
    synchronize(result.final_state, config, eng);
    return result;
}

SimResult run_simulation(const SimConfig& config) {
    config.validate();
    PlummerConfig ic;
    ic.n = config.n;
    ic.seed = config.seed;
    ic.g_const = config.params.g_const;
    return run_simulation(config, plummer(ic));
}

Diagnostics diagnostics(std::span<const Particle> particles, const ForceParams& params) {
    Diagnostics d;
    const double eps2 = params.softening * params.softening;
    for (std::size_t i = 0; i < particles.size(); ++i) {
        const auto& p = particles[i];
        d.kinetic += 0.5 * p.mass * dot(p.velocity, p.velocity);
        d.momentum += p.velocity * p.mass;
        for (std::size_t j = i + 1; j < particles.size(); ++j) {
            const Vec3 r = particles[j].position - p.position;
            d.potential -= params.g_const * p.mass * particles[j].mass / std::sqrt(dot(r, r) + eps2);
        }
    }
    d.total = d.kinetic + d.potential;
    return d;
}

}  // namespace pxbh
