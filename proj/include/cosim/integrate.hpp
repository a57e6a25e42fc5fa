#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "cosim/dae.hpp"
#include "cosim/errors.hpp"
#include "cosim/newton.hpp"
#include "cosim/waveform.hpp"

namespace cosim {

enum class Method { ImplicitEuler, Trapezoidal };

/// Fixed-step implicit integration. No adaptivity on purpose: splitting
/// errors must stay controllable independently of the window size.
struct IntegratorConfig {
    Method method = Method::Trapezoidal;
    double h = 1e-2;
    double newton_tol = 1e-10;
    int newton_max = 25;
    double fd_step = 1e-7;

    NewtonConfig newton() const {
        NewtonConfig cfg;
        cfg.tol = newton_tol;
        cfg.max_iterations = newton_max;
        cfg.fd_step = fd_step;
        return cfg;
    }
};

struct Trajectory {
    std::vector<double> t;
    std::vector<Vector> y;
    std::vector<Vector> z;

    std::size_t size() const { return t.size(); }
    void append(double time, Vector yv, Vector zv) {
        t.push_back(time);
        y.push_back(std::move(yv));
        z.push_back(std::move(zv));
    }
};

/// One implicit step of the semi-explicit system. The algebraic part is
/// always enforced at the end point, also under the trapezoidal rule, which
/// keeps z free of spurious oscillation.
inline std::pair<Vector, Vector> step(const SemiExplicitSystem& sys, double t, const Vector& y,
                                      const Vector& z, const WaveformSet& inputs,
                                      const IntegratorConfig& cfg) {
    const double h = cfg.h;
    const double t_next = t + h;
    const PortValues u_next = sample_all(inputs, t_next);
    Vector f_old;
    if (cfg.method == Method::Trapezoidal && sys.ny > 0) {
        const PortValues u_old = sample_all(inputs, t);
        f_old = sys.f(t, y, z, u_old);
    }
    const std::size_t ny = sys.ny, nz = sys.nz;
    auto residual = [&](const Vector& u) {
        const Vector yn(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(ny));
        const Vector zn(u.begin() + static_cast<std::ptrdiff_t>(ny), u.end());
        Vector r(ny + nz);
        if (ny > 0) {
            const Vector fn = sys.f(t_next, yn, zn, u_next);
            if (cfg.method == Method::ImplicitEuler) {
                for (std::size_t i = 0; i < ny; ++i) r[i] = yn[i] - y[i] - h * fn[i];
            } else {
                for (std::size_t i = 0; i < ny; ++i)
                    r[i] = yn[i] - y[i] - 0.5 * h * (f_old[i] + fn[i]);
            }
        }
        if (nz > 0) {
            const Vector gn = sys.g(t_next, yn, zn, u_next);
            for (std::size_t i = 0; i < nz; ++i) r[ny + i] = gn[i];
        }
        return r;
    };
    Vector u0(ny + nz);
    for (std::size_t i = 0; i < ny; ++i) u0[i] = y[i];
    for (std::size_t i = 0; i < nz; ++i) u0[ny + i] = z[i];
    Vector u;
    try {
        u = newton_solve(residual, std::move(u0), cfg.newton());
    } catch (const NewtonDiverged& e) {
        throw NewtonDiverged("step of '" + sys.name + "' at t=" + std::to_string(t_next) +
                                 ": " + e.what(),
                             e.last_iterate, e.residual_norm, e.iterations);
    }
    Vector yn(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(ny));
    Vector zn(u.begin() + static_cast<std::ptrdiff_t>(ny), u.end());
    return {std::move(yn), std::move(zn)};
}

/// Integrates over [t_a, t_b]; the step must tile the window exactly.
/// Starting values that violate the algebraic constraint (stale inputs at
/// the window start) are Newton-projected onto the constraint first.
inline Trajectory integrate_window(const SemiExplicitSystem& sys, double t_a, double t_b,
                                   const WaveformSet& inputs, const IntegratorConfig& cfg,
                                   Vector y_start, Vector z_start) {
    const double span = t_b - t_a;
    const double ratio = span / cfg.h;
    const auto steps = static_cast<std::size_t>(std::llround(ratio));
    if (steps == 0 || std::abs(ratio - static_cast<double>(steps)) > 1e-12 * std::max(1.0, ratio))
        throw GridMismatch("integrate_window: step " + std::to_string(cfg.h) +
                           " does not tile window of length " + std::to_string(span));
    if (sys.nz > 0) {
        const PortValues u0 = sample_all(inputs, t_a);
        const Vector g0 = sys.g(t_a, y_start, z_start, u0);
        if (norm_inf(g0) > cfg.newton_tol)
            z_start = make_consistent(sys, t_a, y_start, std::move(z_start), u0, cfg.newton_tol);
    }
    Trajectory traj;
    traj.append(t_a, y_start, z_start);
    Vector y = std::move(y_start), z = std::move(z_start);
    for (std::size_t i = 1; i <= steps; ++i) {
        const double t_prev = t_a + static_cast<double>(i - 1) * cfg.h;
        auto [yn, zn] = step(sys, t_prev, y, z, inputs, cfg);
        y = std::move(yn);
        z = std::move(zn);
        traj.append(t_a + static_cast<double>(i) * cfg.h, y, z);
    }
    return traj;
}

inline Trajectory integrate_window(const SemiExplicitSystem& sys, double t_a, double t_b,
                                   const WaveformSet& inputs, const IntegratorConfig& cfg) {
    return integrate_window(sys, t_a, t_b, inputs, cfg, sys.y0, sys.z0);
}

}  // namespace cosim
