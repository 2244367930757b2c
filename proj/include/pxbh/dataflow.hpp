#pragma once

// Force stage as a dataflow graph. The moment-annotated tree is flattened into an
// input row of GID-addressed elements (one per tree node), each particle gets an
// output element whose dependency vector names the input elements of its
// interaction list, and management tasks drive the element computations on the
// engine in chunks of `grain` output elements.

#include <cstdint>
#include <span>
#include <vector>

#include "pxbh/engine.hpp"
#include "pxbh/octree.hpp"

namespace pxbh {

enum class ElementKind { Particle, InternalNode };

/// Payload stored in each input-row future.
struct InputPayload {
    double mass = 0.0;
    Vec3 com;
    std::int32_t node_id = 0;
    ElementKind kind = ElementKind::Particle;
};

struct InputElement {
    Gid gid;
    InputPayload payload;
};

struct InputRow {
    std::vector<InputElement> elements;  // depth-first order
    std::vector<Gid> gid_of_node;        // indexed by node_id
};

struct OutputElement {
    Gid gid;  // result future, payload is the acceleration Vec3
    std::size_t particle_index = 0;
    Gid input;  // the particle's own input-row element
    Vec3 position;
    std::vector<Gid> deps;
};

struct OutputRow {
    std::vector<OutputElement> elements;

    double mean_deps() const noexcept;
};

enum class Accumulation { Deterministic, Streaming };

struct GrainConfig {
    enum class Mode { FixedGrain, FixedCount };

    Mode mode = Mode::FixedGrain;
    std::size_t value = 64;  // g for FixedGrain, T for FixedCount
    Accumulation accumulation = Accumulation::Deterministic;

    static GrainConfig fixed_grain(std::size_t g, Accumulation acc = Accumulation::Deterministic) {
        return GrainConfig{Mode::FixedGrain, g, acc};
    }
    static GrainConfig fixed_count(std::size_t tasks, Accumulation acc = Accumulation::Deterministic) {
        return GrainConfig{Mode::FixedCount, tasks, acc};
    }

    /// Output elements per management task for a row of `elements`.
    std::size_t grain_for(std::size_t elements) const;
};

struct StageCounts {
    std::uint64_t management_tasks = 0;
    std::uint64_t element_tasks = 0;
    std::uint64_t get_tasks = 0;

    friend bool operator==(const StageCounts&, const StageCounts&) = default;
};

struct StageStats {
    StageCounts counts;
    double wall_time_force = 0.0;  // seconds
    std::vector<std::uint64_t> managers_per_worker;
};

struct ForceStageResult {
    std::vector<Vec3> accelerations;  // indexed by particle
    StageStats stats;
};

InputRow flatten(const Octree& tree, Engine& engine);
OutputRow wire(const InputRow& input, const Octree& tree, std::span<const Particle> particles, Theta theta,
               Engine& engine);
ForceStageResult execute_force_stage(const InputRow& input, const OutputRow& output, const GrainConfig& grain,
                                     const ForceParams& params, Engine& engine);

/// Predicted counters for a streaming stage: (ceil(P/g), P, sum of deps).
StageCounts stage_task_count(std::size_t elements, std::span<const std::size_t> deps_sizes, std::size_t grain);

}  // namespace pxbh
