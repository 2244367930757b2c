#pragma once

// Plummer-sphere initial conditions driven by a bit-exact splitmix64 stream, and the
// `nbody v1` particle file format.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "pxbh/octree.hpp"

namespace pxbh {

class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next_u64() noexcept {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double next_unit() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    std::uint64_t state() const noexcept { return state_; }

private:
    std::uint64_t state_;
};

struct PlummerConfig {
    std::size_t n = 1;
    std::uint64_t seed = 0;
    double scale_a = 1.0;
    double total_mass = 1.0;
    double rmax_cut = 20.0;  // in units of scale_a
    double g_const = 1.0;
};

std::vector<Particle> plummer(const PlummerConfig& config);

void write_particles(std::ostream& out, std::span<const Particle> particles);
void write_particles(const std::filesystem::path& path, std::span<const Particle> particles);
std::vector<Particle> read_particles(std::istream& in);
std::vector<Particle> read_particles(const std::filesystem::path& path);

}  // namespace pxbh
