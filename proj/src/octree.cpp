#include "pxbh/octree.hpp"

#include <algorithm>
#include <array>
#include <limits>

#include "pxbh/error.hpp"

namespace pxbh {

namespace {

constexpr double kPadding = 1.001;
constexpr double kMinHalfWidth = 1e-9;

class TreeBuilder {
public:
    TreeBuilder(std::span<const Particle> particles, std::vector<OctreeNode>& nodes)
        : particles_(particles), nodes_(nodes) {}

    std::int32_t build(const Cube& cube, std::span<std::size_t> members, std::size_t depth) {
        const auto id = static_cast<std::int32_t>(nodes_.size());
        OctreeNode node;
        node.cube = cube;
        node.node_id = id;
        node.depth = depth;
        if (members.size() == 1) {
            node.kind = NodeKind::Leaf;
            node.particle = members[0];
            node.min_index = members[0];
            nodes_.push_back(node);
            return id;
        }
        if (depth >= Octree::kMaxDepth) {
            std::vector<std::size_t> indices;
            indices.assign(members.begin(), members.end());
            std::sort(indices.begin(), indices.end());
            throw DuplicatePositionError(std::move(indices));
        }
        node.kind = NodeKind::Internal;
        nodes_.push_back(node);

        // Stable counting sort of the members by octant.
        std::array<std::size_t, 9> offsets{};
        std::vector<int> octants(members.size());
        for (std::size_t k = 0; k < members.size(); ++k) {
            octants[k] = cube.octant_of(particles_[members[k]].position);
            ++offsets[static_cast<std::size_t>(octants[k]) + 1];
        }
        for (std::size_t o = 1; o < offsets.size(); ++o) offsets[o] += offsets[o - 1];
        std::vector<std::size_t> sorted(members.size());
        auto cursor = offsets;
        for (std::size_t k = 0; k < members.size(); ++k) sorted[cursor[static_cast<std::size_t>(octants[k])]++] = members[k];
        std::copy(sorted.begin(), sorted.end(), members.begin());

        std::size_t min_index = std::numeric_limits<std::size_t>::max();
        for (int o = 0; o < 8; ++o) {
            const auto begin = offsets[static_cast<std::size_t>(o)];
            const auto end = offsets[static_cast<std::size_t>(o) + 1];
            if (begin == end) continue;
            const auto child = build(cube.octant(o), members.subspan(begin, end - begin), depth + 1);
            nodes_[static_cast<std::size_t>(id)].children[static_cast<std::size_t>(o)] = child;
            min_index = std::min(min_index, nodes_[static_cast<std::size_t>(child)].min_index);
        }
        nodes_[static_cast<std::size_t>(id)].min_index = min_index;
        return id;
    }

private:
    std::span<const Particle> particles_;
    std::vector<OctreeNode>& nodes_;
};

// Interaction-list entries are sorted by (smallest particle index << 32 | emission slot).
constexpr std::uint64_t kSlotMask = 0xFFFFFFFFULL;

std::uint64_t pack_key(std::size_t min_index, std::size_t slot) noexcept {
    return (static_cast<std::uint64_t>(min_index) << 32) | static_cast<std::uint64_t>(slot);
}

// LSD radix sort on the upper half of the packed keys; `bound` exceeds every particle index.
void radix_sort_keys(std::vector<std::uint64_t>& keys, std::size_t bound) {
    if (keys.size() < 64) {
        std::sort(keys.begin(), keys.end());
        return;
    }
    constexpr unsigned kDigitBits = 11;
    constexpr std::size_t kBuckets = std::size_t{1} << kDigitBits;
    thread_local std::vector<std::uint64_t> scratch;
    scratch.resize(keys.size());
    std::array<std::uint32_t, kBuckets> count;
    for (unsigned shift = 32; shift < 64 && (bound >> (shift - 32)) != 0; shift += kDigitBits) {
        count.fill(0);
        for (const auto k : keys) ++count[(k >> shift) & (kBuckets - 1)];
        std::uint32_t sum = 0;
        for (auto& c : count) {
            const auto here = c;
            c = sum;
            sum += here;
        }
        for (const auto k : keys) scratch[count[(k >> shift) & (kBuckets - 1)]++] = k;
        keys.swap(scratch);
    }
}

}  // namespace

bool Cube::contains(const Vec3& p) const noexcept {
    return p.x >= center.x - half_width && p.x < center.x + half_width &&
           p.y >= center.y - half_width && p.y < center.y + half_width &&
           p.z >= center.z - half_width && p.z < center.z + half_width;
}

int Cube::octant_of(const Vec3& p) const noexcept {
    return (p.x >= center.x ? 1 : 0) | (p.y >= center.y ? 2 : 0) | (p.z >= center.z ? 4 : 0);
}

Cube Cube::octant(int index) const noexcept {
    const double h = 0.5 * half_width;
    return Cube{Vec3{center.x + ((index & 1) ? h : -h),
                     center.y + ((index & 2) ? h : -h),
                     center.z + ((index & 4) ? h : -h)},
                h};
}

std::size_t Octree::leaf_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const OctreeNode& n) { return n.kind == NodeKind::Leaf; }));
}

Cube bounds(std::span<const Particle> particles) {
    if (particles.empty()) throw Error("bounds of an empty particle set");
    Vec3 lo = particles.front().position;
    Vec3 hi = lo;
    for (const auto& p : particles) {
        lo = Vec3{std::min(lo.x, p.position.x), std::min(lo.y, p.position.y), std::min(lo.z, p.position.z)};
        hi = Vec3{std::max(hi.x, p.position.x), std::max(hi.y, p.position.y), std::max(hi.z, p.position.z)};
    }
    const double extent = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z});
    const Vec3 center = (lo + hi) * 0.5;
    return Cube{center, std::max(0.5 * extent * kPadding, kMinHalfWidth)};
}

Octree build_tree(std::span<const Particle> particles, const Cube& root) {
    if (particles.empty()) throw Error("build_tree needs at least one particle");
    if (!(root.half_width > 0.0)) throw Error("root cube must have positive half width");
    std::vector<std::size_t> members(particles.size());
    for (std::size_t k = 0; k < particles.size(); ++k) {
        if (!root.contains(particles[k].position)) {
            throw Error("particle " + std::to_string(k) + " lies outside the root cube");
        }
        members[k] = k;
    }
    Octree tree;
    tree.nodes_.reserve(2 * particles.size());
    TreeBuilder(particles, tree.nodes_).build(root, members, 0);
    return tree;
}

void compute_moments(Octree& tree, std::span<const Particle> particles) {
    // Preorder storage: children always follow their parent.
    for (auto it = tree.nodes_.rbegin(); it != tree.nodes_.rend(); ++it) {
        OctreeNode& node = *it;
        if (node.kind == NodeKind::Leaf) {
            node.total_mass = particles[node.particle].mass;
            node.com = particles[node.particle].position;
            continue;
        }
        double mass = 0.0;
        Vec3 weighted;
        for (const auto child : node.children) {
            if (child == kNoChild) continue;
            const OctreeNode& c = tree.nodes_[static_cast<std::size_t>(child)];
            mass += c.total_mass;
            weighted += c.com * c.total_mass;
        }
        node.total_mass = mass;
        node.com = weighted * (1.0 / mass);
    }
    tree.has_moments_ = true;
}

Octree make_tree(std::span<const Particle> particles) {
    Octree tree = build_tree(particles, bounds(particles));
    compute_moments(tree, particles);
    return tree;
}

bool mac_accept(const OctreeNode& node, const Vec3& target, Theta theta) noexcept {
    if (!(theta.value > 0.0)) return false;
    const double distance = norm(target - node.com);
    if (distance == 0.0) return false;
    return node.cube.side() < theta.value * distance;
}

void interaction_list(const Octree& tree, const Particle& target, Theta theta, std::vector<Source>& out) {
    thread_local std::vector<Source> found;
    thread_local std::vector<std::uint64_t> keyed;
    found.clear();
    keyed.clear();
    const Vec3& at = target.position;
    auto visit = [&](auto&& self, std::int32_t id, bool on_path) -> void {
        const OctreeNode& node = tree.node(id);
        if (node.kind == NodeKind::Leaf) {
            if (node.particle != target.index) {
                keyed.push_back(pack_key(node.min_index, found.size()));
                found.push_back(Source{node.total_mass, node.com, id});
            }
            return;
        }
        if (!on_path && mac_accept(node, at, theta)) {
            keyed.push_back(pack_key(node.min_index, found.size()));
            found.push_back(Source{node.total_mass, node.com, id});
            return;
        }
        const int path_octant = on_path ? node.cube.octant_of(at) : -1;
        for (int o = 0; o < 8; ++o) {
            const auto child = node.children[static_cast<std::size_t>(o)];
            if (child != kNoChild) self(self, child, o == path_octant);
        }
    };
    visit(visit, 0, tree.root().cube.contains(at));
    radix_sort_keys(keyed, tree.root().min_index + tree.leaf_count());
    out.clear();
    out.reserve(keyed.size());
    for (const auto key : keyed) out.push_back(found[key & kSlotMask]);
}

std::vector<Source> interaction_list(const Octree& tree, const Particle& target, Theta theta) {
    std::vector<Source> out;
    interaction_list(tree, target, theta, out);
    return out;
}

Vec3 accel_from_sources(const Particle& target, std::span<const Source> sources, const ForceParams& params) {
    Vec3 acc;
    for (const auto& s : sources) accumulate_pull(acc, target.position, s.mass, s.com, params);
    return acc;
}

Vec3 accel_direct(std::span<const Particle> particles, std::size_t i, const ForceParams& params) {
    Vec3 acc;
    const Vec3& at = particles[i].position;
    for (std::size_t j = 0; j < particles.size(); ++j) {
        if (j != i) accumulate_pull(acc, at, particles[j].mass, particles[j].position, params);
    }
    return acc;
}

}  // namespace pxbh
