#pragma once

// Iteration driver. Each step rebuilds the tree (the per-iteration barrier), runs the
// force stage on the selected backend and advances the particles with a
// synchronized kick-drift-kick leapfrog that reuses each force evaluation: the
// closing half-kick of step k is applied at the start of step k+1.

#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "pxbh/dataflow.hpp"
#include "pxbh/engine.hpp"
#include "pxbh/octree.hpp"

namespace pxbh {

enum class Backend { Dataflow, StaticChunk, Serial };

std::string_view to_string(Backend backend) noexcept;
Backend parse_backend(std::string_view name);

struct SimConfig {
    std::size_t n = 1;  // used when the driver generates its own Plummer sample
    Theta theta{0.5};
    double dt = 1e-3;
    std::size_t steps = 1;
    ForceParams params;
    GrainConfig grain;
    std::size_t workers = 1;
    Backend backend = Backend::Dataflow;
    std::uint64_t seed = 0;
    bool stealing = false;

    void validate() const;
};

struct SimState {
    std::vector<Particle> particles;
    double time = 0.0;
    std::uint64_t iteration = 0;
    /// Velocities sit half a step ahead and still owe the closing kick.
    bool closing_kick_pending = false;
};

struct IterationTiming {
    std::uint64_t iteration = 0;
    double tree_time = 0.0;
    double force_time = 0.0;
    double integrate_time = 0.0;
    double total_time = 0.0;
    StageStats stage;
    std::uint64_t tasks_spawned = 0;
    std::uint64_t suspensions = 0;
    double mean_list_len = 0.0;
    std::vector<double> chunk_seconds;
};

/// Accelerations at the current positions plus the timing split of that evaluation.
struct ForceEvaluation {
    std::vector<Vec3> accelerations;
    IterationTiming timing;
};

/// `engine` is required for the dataflow backend and ignored otherwise.
ForceEvaluation evaluate_forces(std::span<const Particle> particles, const SimConfig& config, Engine* engine);

IterationTiming step(SimState& state, const SimConfig& config, Engine* engine);

/// Applies the owed closing kick with a fresh force evaluation, leaving positions
/// and velocities at the same time level.
void synchronize(SimState& state, const SimConfig& config, Engine* engine);

struct SimResult {
    SimState final_state;
    std::vector<IterationTiming> timings;
};

/// Runs `config.steps` iterations from `initial` and synchronizes the final state.
SimResult run_simulation(const SimConfig& config, std::vector<Particle> initial);
/// Same, starting from a Plummer sample of `config.n` bodies drawn with `config.seed`.
SimResult run_simulation(const SimConfig& config);

struct Diagnostics {
    double kinetic = 0.0;
    double potential = 0.0;
    double total = 0.0;
    Vec3 momentum;
};

Diagnostics diagnostics(std::span<const Particle> particles, const ForceParams& params);

}  // namespace pxbh
