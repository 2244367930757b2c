#pragma once

#include <span>
#include <vector>

#include "pxbh/octree.hpp"

namespace pxbh {

/// Accelerations from a plain loop over particles, plus the mean interaction-list length.
struct BaselineForce {
    std::vector<Vec3> accelerations;
    double mean_list_len = 0.0;
    std::vector<double> chunk_seconds;  // one entry per chunk; a single entry for the serial loop

    /// Slowest over fastest chunk time.
    double imbalance() const noexcept;
};

BaselineForce serial_force(std::span<const Particle> particles, const Octree& tree, Theta theta,
                           const ForceParams& params);

/// Conventional striping: `workers` equal contiguous index ranges, one OS thread each,
/// no redistribution.
BaselineForce static_chunk_force(std::span<const Particle> particles, const Octree& tree, Theta theta,
                                 std::size_t workers, const ForceParams& params);

}  // namespace pxbh
