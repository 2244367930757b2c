#include "pxbh/icgen.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "pxbh/error.hpp"

namespace pxbh {

namespace {

Vec3 random_direction(Rng& rng) {
    const double cos_t = 2.0 * rng.next_unit() - 1.0;
    const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
    const double phi = 2.0 * std::numbers::pi * rng.next_unit();
    return Vec3{sin_t * std::cos(phi), sin_t * std::sin(phi), cos_t};
}

// Speed fraction q of the local escape speed, drawn from q^2 (1 - q^2)^(7/2).
double sample_speed_fraction(Rng& rng) {
    for (;;) {
        const double q = rng.next_unit();
        const double y = 0.1 * rng.next_unit();
        if (y < q * q * std::pow(1.0 - q * q, 3.5)) return q;
    }
}

}  // namespace

std::vector<Particle> plummer(const PlummerConfig& config) {
    if (config.n < 1) throw ConfigError("plummer needs n >= 1");
    if (!(config.scale_a > 0.0) || !(config.rmax_cut > 0.0) || !(config.total_mass > 0.0)) {
        throw ConfigError("plummer scale, mass and cutoff must be positive");
    }
    Rng rng(config.seed);
    const double a = config.scale_a;
    const double m = config.total_mass / static_cast<double>(config.n);
    const double v_scale = std::sqrt(config.g_const * config.total_mass / a);

    std::vector<Particle> particles(config.n);
    for (std::size_t i = 0; i < config.n; ++i) {
        double r = 0.0;
        do {
            double u = 0.0;
            while (u == 0.0) u = rng.next_unit();
            r = a / std::sqrt(std::pow(u, -2.0 / 3.0) - 1.0);
        } while (!(r <= config.rmax_cut * a));
        const Vec3 pos = random_direction(rng) * r;
        const double x = r / a;
        const double v_esc = std::numbers::sqrt2 * std::pow(1.0 + x * x, -0.25) * v_scale;
        const double speed = sample_speed_fraction(rng) * v_esc;
        const Vec3 vel = random_direction(rng) * speed;
        particles[i] = Particle{i, m, pos, vel};
    }

    Vec3 com;
    Vec3 momentum;
    double mass = 0.0;
    for (const auto& p : particles) {
        com += p.position * p.mass;
        momentum += p.velocity * p.mass;
        mass += p.mass;
    }
    com *= 1.0 / mass;
    const Vec3 drift = momentum * (1.0 / mass);
    for (auto& p : particles) {
        p.position -= com;
        p.velocity -= drift;
    }
    return particles;
}

void write_particles(std::ostream& out, std::span<const Particle> particles) {
    out << "# nbody v1 N=" << particles.size() << '\n';
    char line[7 * 32];
    for (const auto& p : particles) {
        std::snprintf(line, sizeof line, "%.17g %.17g %.17g %.17g %.17g %.17g %.17g\n", p.mass, p.position.x,
                      p.position.y, p.position.z, p.velocity.x, p.velocity.y, p.velocity.z);
        out << line;
    }
}

void write_particles(const std::filesystem::path& path, std::span<const Particle> particles) {
    std::ofstream out(path);
    if (!out) throw std::ios_base::failure("cannot open " + path.string() + " for writing");
    write_particles(out, particles);
    out.flush();
    if (!out) throw std::ios_base::failure("write to " + path.string() + " failed");
}

std::vector<Particle> read_particles(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(1, "missing header");
    constexpr std::string_view prefix = "# nbody v1 N=";
    if (line.rfind(prefix, 0) != 0) throw ParseError(1, "malformed header '" + line + "'");
    std::size_t n = 0;
    const char* first = line.data() + prefix.size();
    const char* last = line.data() + line.size();
    auto [ptr, ec] = std::from_chars(first, last, n);
    if (ec != std::errc{} || ptr != last || first == last) throw ParseError(1, "malformed particle count in header");

    std::vector<Particle> particles;
    particles.reserve(n);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (particles.size() == n) throw ParseError(lineno, "more body lines than the header count " + std::to_string(n));
        double v[7];
        std::size_t fields = 0;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        while (p < end) {
            while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
            if (p == end) break;
            if (fields == 7) throw ParseError(lineno, "expected 7 fields");
            auto [next, err] = std::from_chars(p, end, v[fields]);
            if (err != std::errc{} || (next < end && *next != ' ' && *next != '\t' && *next != '\r')) {
                throw ParseError(lineno, "bad number");
            }
            if (!std::isfinite(v[fields])) throw ParseError(lineno, "non-finite value");
            ++fields;
            p = next;
        }
        if (fields != 7) throw ParseError(lineno, "expected 7 fields, got " + std::to_string(fields));
        if (!(v[0] > 0.0)) throw ParseError(lineno, "mass must be positive");
        particles.push_back(Particle{particles.size(), v[0], Vec3{v[1], v[2], v[3]}, Vec3{v[4], v[5], v[6]}});
    }
    if (particles.size() != n) {
        throw ParseError(lineno, "header promises " + std::to_string(n) + " bodies, found " +
                                         std::to_string(particles.size()));
    }
    return particles;
}

std::vector<Particle> read_particles(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open " + path.string());
    return read_particles(in);
}

}  // namespace pxbh
