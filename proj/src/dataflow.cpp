#include "pxbh/dataflow.hpp"

#include <chrono>
#include <memory>
#include <mutex>
#include <numeric>

namespace pxbh {

namespace {

struct StageCounters {
    explicit StageCounters(std::size_t workers) : per_worker(workers) {}
    std::vector<std::atomic<std::uint64_t>> per_worker;
    std::atomic<std::uint64_t> management{0};
    std::atomic<std::uint64_t> elements{0};
    std::atomic<std::uint64_t> gets{0};
};

// Result buffer for arrival-order accumulation; contributions are applied under
// the element's own lock.
struct StreamBuffer {
    std::mutex mutex;
    Vec3 acc;
    std::size_t remaining = 0;
};

const InputPayload& as_input(const Payload& p) { return std::any_cast<const InputPayload&>(p); }

}  // namespace

double OutputRow::mean_deps() const noexcept {
    if (elements.empty()) return 0.0;
    std::size_t total = 0;
    for (const auto& e : elements) total += e.deps.size();
    return static_cast<double>(total) / static_cast<double>(elements.size());
}

std::size_t GrainConfig::grain_for(std::size_t elements) const {
    if (value == 0) throw ConfigError(mode == Mode::FixedGrain ? "grain must be >= 1" : "task count must be >= 1");
    if (mode == Mode::FixedGrain) return value;
    return std::max<std::size_t>(1, (elements + value - 1) / value);
}

InputRow flatten(const Octree& tree, Engine& engine) {
    InputRow row;
    row.elements.reserve(tree.size());
    row.gid_of_node.resize(tree.size());
    // Node storage is already depth-first preorder.
    for (const auto& node : tree.nodes()) {
        InputElement e;
        e.gid = engine.future_new();
        e.payload = InputPayload{node.total_mass, node.com, node.node_id,
                                 node.kind == NodeKind::Leaf ? ElementKind::Particle : ElementKind::InternalNode};
        engine.future_set(e.gid, e.payload);
        row.gid_of_node[static_cast<std::size_t>(node.node_id)] = e.gid;
        row.elements.push_back(e);
    }
    return row;
}

OutputRow wire(const InputRow& input, const Octree& tree, std::span<const Particle> particles, Theta theta,
               Engine& engine) {
    std::vector<Gid> leaf_gid(particles.size());
    for (const auto& node : tree.nodes()) {
        if (node.kind == NodeKind::Leaf) leaf_gid[node.particle] = input.gid_of_node[static_cast<std::size_t>(node.node_id)];
    }
    OutputRow row;
    row.elements.reserve(particles.size());
    std::vector<Source> sources;
    for (const auto& p : particles) {
        interaction_list(tree, p, theta, sources);
        OutputElement e;
        e.gid = engine.future_new();
        e.particle_index = p.index;
        e.input = leaf_gid[p.index];
        e.position = p.position;
        e.deps.reserve(sources.size());
        for (const auto& s : sources) e.deps.push_back(input.gid_of_node[static_cast<std::size_t>(s.node_id)]);
        row.elements.push_back(std::move(e));
    }
    return row;
}

ForceStageResult execute_force_stage(const InputRow& input, const OutputRow& output, const GrainConfig& grain,
                                     const ForceParams& params, Engine& engine) {
    (void)input;  // inputs are reached through the dependency Gids
    const std::size_t count = output.elements.size();
    const std::size_t g = grain.grain_for(count);
    const bool streaming = grain.accumulation == Accumulation::Streaming;
    auto counters = std::make_shared<StageCounters>(engine.workers());

    auto element_task = [&engine, &params, counters, streaming](const OutputElement* out) {
        return [&engine, &params, counters, streaming, out] {
            counters->elements.fetch_add(1, std::memory_order_relaxed);
            if (!streaming) {
                engine.when_all(out->deps, [&engine, &params, out](std::span<const Payload* const> values) {
                    Vec3 acc;
                    for (const Payload* v : values) {
                        const auto& in = as_input(*v);
                        accumulate_pull(acc, out->position, in.mass, in.com, params);
                    }
                    engine.future_set(out->gid, acc);
                });
                return;
            }
            if (out->deps.empty()) {
                engine.future_set(out->gid, Vec3{});
                return;
            }
            auto buffer = std::make_shared<StreamBuffer>();
            buffer->remaining = out->deps.size();
            for (const Gid dep : out->deps) {
                engine.future_get(dep, [&engine, &params, counters, buffer, out](const Payload& v) {
                    counters->gets.fetch_add(1, std::memory_order_relaxed);
                    const auto& in = as_input(v);
                    Vec3 contribution;
                    accumulate_pull(contribution, out->position, in.mass, in.com, params);
                    bool last = false;
                    Vec3 total;
                    {
                        std::lock_guard lk(buffer->mutex);
                        buffer->acc += contribution;
                        last = --buffer->remaining == 0;
                        total = buffer->acc;
                    }
                    if (last) engine.future_set(out->gid, total);
                });
            }
        };
    };

    const auto start = std::chrono::steady_clock::now();
    for (std::size_t begin = 0; begin < count; begin += g) {
        const std::size_t end = std::min(count, begin + g);
        engine.spawn([&engine, &output, counters, element_task, begin, end] {
            counters->management.fetch_add(1, std::memory_order_relaxed);
            const auto here = engine.current_worker();
            counters->per_worker[*here].fetch_add(1, std::memory_order_relaxed);
            for (std::size_t k = begin; k < end; ++k) engine.spawn(element_task(&output.elements[k]), here);
        });
    }
    try {
        engine.quiesce();
    } catch (const DeadlockError& e) {
        throw DeadlockError("force stage", e.unsatisfied());
    }
    const auto stop = std::chrono::steady_clock::now();

    ForceStageResult result;
    result.accelerations.resize(count);
    for (const auto& e : output.elements) {
        const Payload* value = engine.peek(e.gid);
        if (value == nullptr) throw Error("force stage left result gid " + std::to_string(e.gid.value) + " unset");
        result.accelerations[e.particle_index] = std::any_cast<const Vec3&>(*value);
    }
    result.stats.counts = StageCounts{counters->management.load(), counters->elements.load(), counters->gets.load()};
    result.stats.wall_time_force = std::chrono::duration<double>(stop - start).count();
    for (const auto& c : counters->per_worker) result.stats.managers_per_worker.push_back(c.load());
    return result;
}

StageCounts stage_task_count(std::size_t elements, std::span<const std::size_t> deps_sizes, std::size_t grain) {
    if (grain == 0) throw ConfigError("grain must be >= 1");
    return StageCounts{(elements + grain - 1) / grain, elements,
                       std::accumulate(deps_sizes.begin(), deps_sizes.end(), std::uint64_t{0})};
}

}  // namespace pxbh
