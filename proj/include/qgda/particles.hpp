#pragma once

// Lagrangian floe tracer: particles relax towards the local ocean velocity
// under linear drag and carry additive position noise.
//
//   dx = v dt + sigma_x dW
//   dv = drag (u(x) - v) dt
//   u  = (-dpsi/dy, dpsi/dx)

#include <array>
#include <cmath>
#include <cstdint>
#include <tuple>
#include <utility>
#include <vector>

#include "qgda/cgns.hpp"
#include "qgda/grid.hpp"

namespace qgda {

struct ParticleConfig {
    int count = 100;
    double drag_beta = 0.1;
    double sigma_x = 0.01;
    std::uint64_t seed = 1;
    int layer = 1;

    void validate() const {
        if (count < 1) throw ConfigError("particles: count must be >= 1");
        if (!(drag_beta >= 0.0)) throw ConfigError("particles: drag_beta must be >= 0");
        if (!(sigma_x >= 0.0)) throw ConfigError("particles: sigma_x must be >= 0");
        if (layer != 1 && layer != 2) throw ConfigError("particles: layer must be 1 or 2");
    }
};

using Point = std::array<double, 2>;

struct ParticleSet {
    std::vector<Point> positions;
    std::vector<Point> velocities;
    std::size_t size() const noexcept { return positions.size(); }
};

/// Maps a coordinate into [0, 1).
inline double wrap_unit(double x) {
    double w = x - std::floor(x);
    return w >= 1.0 ? 0.0 : w;
}

inline std::pair<ScalarField, ScalarField> velocity_field(const ScalarField& psi) {
    ScalarField u = central_diff(psi, Axis::y);
    u *= -1.0;
    return {std::move(u), central_diff(psi, Axis::x)};
}

/// Bilinear interpolation between the four surrounding nodes, wrapping periodically.
inline double interp(const ScalarField& f, double x, double y) {
    const int n = f.n();
    const double gx = wrap_unit(x) * n, gy = wrap_unit(y) * n;
    const int k0 = std::min(static_cast<int>(gx), n - 1), l0 = std::min(static_cast<int>(gy), n - 1);
    const double fx = gx - k0, fy = gy - l0;
    const int k1 = k0 + 1 == n ? 0 : k0 + 1, l1 = l0 + 1 == n ? 0 : l0 + 1;
    return (1 - fx) * (1 - fy) * f(k0, l0) + fx * (1 - fy) * f(k1, l0) + (1 - fx) * fy * f(k0, l1) +
           fx * fy * f(k1, l1);
}

inline Point interp_velocity(const ScalarField& u, const ScalarField& v, const Point& pos) {
    return {interp(u, pos[0], pos[1]), interp(v, pos[0], pos[1])};
}

/// Counter-based N(0,1) pair for (seed, step, particle): the same draw no
/// matter how particles are partitioned or in what order they are stepped.
inline std::pair<double, double> particle_normals(std::uint64_t seed, long step, std::size_t particle) {
    auto splitmix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    };
    const std::uint64_t key = splitmix(splitmix(seed) ^ splitmix(static_cast<std::uint64_t>(step) * 2 + 1) ^
                                       splitmix(static_cast<std::uint64_t>(particle) << 1));
    const std::uint64_t a = splitmix(key), b = splitmix(key ^ 0xd1b54a32d192ed03ull);
    // 53-bit uniforms in (0, 1].
    const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
    constexpr double two_pi = 6.28318530717958647692;
    const double r = std::sqrt(-2.0 * std::log(u1));
    return {r * std::cos(two_pi * u2), r * std::sin(two_pi * u2)};
}

/// Euler-Maruyama step; the drag uses the flow at the pre-move position.
/// `step_index` selects the noise draw.
inline ParticleSet step_particles(const ParticleSet& pset, const ScalarField& u, const ScalarField& v,
                                  const ParticleConfig& cfg, double dt, long step_index = 0) {
    if (!(dt > 0.0)) throw ConfigError("step_particles: dt must be > 0");
    if (pset.velocities.size() != pset.positions.size())
        throw ConfigError("particles: positions and velocities differ in length");
    const double noise_scale = cfg.sigma_x * std::sqrt(dt);
    ParticleSet out = pset;
    for (std::size_t i = 0; i < pset.size(); ++i) {
        const Point& x = pset.positions[i];
        const Point& vel = pset.velocities[i];
        const Point flow = interp_velocity(u, v, x);
        double nx = 0.0, ny = 0.0;
        if (noise_scale > 0.0) std::tie(nx, ny) = particle_normals(cfg.seed, step_index, i);
        out.positions[i] = {wrap_unit(x[0] + vel[0] * dt + noise_scale * nx),
                            wrap_unit(x[1] + vel[1] * dt + noise_scale * ny)};
        out.velocities[i] = {vel[0] + cfg.drag_beta * (flow[0] - vel[0]) * dt,
                             vel[1] + cfg.drag_beta * (flow[1] - vel[1]) * dt};
    }
    return out;
}

/// Uniformly scattered particles at rest.
inline ParticleSet scatter_particles(const ParticleConfig& cfg) {
    cfg.validate();
    Rng rng = make_stream(cfg.seed, 3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    ParticleSet set;
    for (int i = 0; i < cfg.count; ++i) {
        const double x = unit(rng);
        set.positions.push_back({x, unit(rng)});
        set.velocities.push_back({0.0, 0.0});
    }
    return set;
}

}  // namespace qgda
