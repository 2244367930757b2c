#pragma once

// Barnes-Hut octree: bounding cube, recursive octant subdivision down to one
// particle per leaf, monopole moments, the s/D < theta acceptance test,
// interaction lists and the softened Newtonian kernel, plus the O(N^2) direct sum.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "pxbh/error.hpp"
#include "pxbh/vec3.hpp"

namespace pxbh {

/// Particles live in a list where `index` equals the position in that list.
struct Particle {
    std::size_t index = 0;
    double mass = 0.0;
    Vec3 position;
    Vec3 velocity;

    friend bool operator==(const Particle&, const Particle&) = default;
};

struct Cube {
    Vec3 center;
    double half_width = 0.0;

    double side() const noexcept { return 2.0 * half_width; }
    /// Half-open containment, lower bound inclusive on every axis.
    bool contains(const Vec3& p) const noexcept;
    /// Octant index of `p`: bit 0 for x, bit 1 for y, bit 2 for z, set when p >= center.
    int octant_of(const Vec3& p) const noexcept;
    Cube octant(int index) const noexcept;
};

struct ForceParams {
    double g_const = 1.0;
    double softening = 1e-2;
};

struct Theta {
    double value = 0.5;
};

enum class NodeKind { Internal, Leaf };

inline constexpr std::int32_t kNoChild = -1;

struct OctreeNode {
    Cube cube;
    NodeKind kind = NodeKind::Leaf;
    std::array<std::int32_t, 8> children{kNoChild, kNoChild, kNoChild, kNoChild,
                                         kNoChild, kNoChild, kNoChild, kNoChild};
    std::size_t particle = 0;  // Leaf only: position in the particle list
    double total_mass = 0.0;
    Vec3 com;
    std::int32_t node_id = 0;
    std::size_t depth = 0;
    /// Smallest particle index in the subtree; orders interaction-list entries.
    std::size_t min_index = 0;
};

/// Arena-backed tree. Nodes are stored in depth-first preorder, so node_id equals
/// the position in `nodes` and the root is node 0.
class Octree {
public:
    static constexpr std::size_t kMaxDepth = 64;

    const OctreeNode& root() const { return nodes_.front(); }
    const OctreeNode& node(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)]; }
    std::span<const OctreeNode> nodes() const noexcept { return nodes_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    std::size_t leaf_count() const noexcept;
    bool has_moments() const noexcept { return has_moments_; }

private:
    friend Octree build_tree(std::span<const Particle>, const Cube&);
    friend void compute_moments(Octree&, std::span<const Particle>);

    std::vector<OctreeNode> nodes_;
    bool has_moments_ = false;
};

/// One entry of an interaction list: a particle or an accepted cell centroid.
struct Source {
    double mass = 0.0;
    Vec3 com;
    std::int32_t node_id = 0;
};

Cube bounds(std::span<const Particle> particles);
Octree build_tree(std::span<const Particle> particles, const Cube& root);
void compute_moments(Octree& tree, std::span<const Particle> particles);
/// bounds + build_tree + compute_moments.
Octree make_tree(std::span<const Particle> particles);

bool mac_accept(const OctreeNode& node, const Vec3& target, Theta theta) noexcept;

/// Depth-first walk collecting the sources acting on `target`. Accepted cells
/// contribute their centroid, cells holding the target are always opened, and the
/// target's own leaf is skipped. Entries are ordered by the smallest particle
/// index they contain, so at theta = 0 the list is in ascending particle order.
std::vector<Source> interaction_list(const Octree& tree, const Particle& target, Theta theta);
void interaction_list(const Octree& tree, const Particle& target, Theta theta, std::vector<Source>& out);

/// Adds the softened pull of one source on a body at `at`. Every force path uses
/// this kernel so results are bitwise comparable.
inline void accumulate_pull(Vec3& acc, const Vec3& at, double mass, const Vec3& from, const ForceParams& params) {
    const Vec3 d = from - at;
    const double r2 = dot(d, d) + params.softening * params.softening;
    if (r2 == 0.0) throw Error("coincident source with zero softening");
    const double inv_r3 = 1.0 / (r2 * std::sqrt(r2));
    acc += d * (params.g_const * mass * inv_r3);
}

Vec3 accel_from_sources(const Particle& target, std::span<const Source> sources, const ForceParams& params);
Vec3 accel_direct(std::span<const Particle> particles, std::size_t i, const ForceParams& params);

}  // namespace pxbh
