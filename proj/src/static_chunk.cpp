#include "pxbh/static_chunk.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <thread>

#include "pxbh/error.hpp"

namespace pxbh {

namespace {

// Returns the total interaction-list length over [begin, end).
std::size_t force_range(std::span<const Particle> particles, const Octree& tree, Theta theta,
                        const ForceParams& params, std::size_t begin, std::size_t end, std::span<Vec3> out) {
    std::vector<Source> sources;
    std::size_t listed = 0;
    for (std::size_t i = begin; i < end; ++i) {
        interaction_list(tree, particles[i], theta, sources);
        listed += sources.size();
        out[i] = accel_from_sources(particles[i], sources, params);
    }
    return listed;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

double BaselineForce::imbalance() const noexcept {
    if (chunk_seconds.empty()) return 1.0;
    const auto [lo, hi] = std::minmax_element(chunk_seconds.begin(), chunk_seconds.end());
    return *lo > 0.0 ? *hi / *lo : 1.0;
}

BaselineForce serial_force(std::span<const Particle> particles, const Octree& tree, Theta theta,
                           const ForceParams& params) {
    BaselineForce result;
    result.accelerations.resize(particles.size());
    const auto start = std::chrono::steady_clock::now();
    const auto listed = force_range(particles, tree, theta, params, 0, particles.size(), result.accelerations);
    result.chunk_seconds.push_back(seconds_since(start));
    result.mean_list_len = particles.empty() ? 0.0 : static_cast<double>(listed) / static_cast<double>(particles.size());
    return result;
}

BaselineForce static_chunk_force(std::span<const Particle> particles, const Octree& tree, Theta theta,
                                 std::size_t workers, const ForceParams& params) {
    if (workers == 0) throw ConfigError("static chunking needs at least one worker");
    const std::size_t n = particles.size();
    BaselineForce result;
    result.accelerations.resize(n);
    result.chunk_seconds.assign(workers, 0.0);
    std::vector<std::size_t> listed(workers, 0);
    std::vector<std::exception_ptr> failures(workers);

    auto chunk = [&](std::size_t w) {
        const std::size_t begin = n * w / workers;
        const std::size_t end = n * (w + 1) / workers;
        const auto start = std::chrono::steady_clock::now();
        try {
            listed[w] = force_range(particles, tree, theta, params, begin, end, result.accelerations);
        } catch (...) {
            failures[w] = std::current_exception();
        }
        result.chunk_seconds[w] = seconds_since(start);
    };

    std::vector<std::jthread> threads;
    threads.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(chunk, w);
    chunk(0);
    threads.clear();
    for (auto& f : failures) {
        if (f) std::rethrow_exception(f);
    }

    std::size_t total = 0;
    for (auto l : listed) total += l;
    result.mean_list_len = n == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(n);
    return result;
}

}  // namespace pxbh
