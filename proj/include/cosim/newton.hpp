#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "cosim/errors.hpp"
#include "cosim/linalg.hpp"

namespace cosim {

struct NewtonConfig {
    double tol = 1e-10;     // on the residual sup-norm
    int max_iterations = 25;
    double fd_step = 1e-7;  // scaled per component: fd_step * (1 + |x_i|)
    int max_halvings = 8;
};

using ResidualFn = std::function<Vector(const Vector&)>;

inline DenseMatrix fd_jacobian(const ResidualFn& residual, const Vector& x, const Vector& r0,
                               double fd_step) {
    const std::size_t n = x.size(), m = r0.size();
    DenseMatrix jac(m, n);
    Vector xp = x;
    for (std::size_t j = 0; j < n; ++j) {
        const double dx = fd_step * (1.0 + std::abs(x[j]));
        xp[j] = x[j] + dx;
        const Vector rp = residual(xp);
        xp[j] = x[j];
        for (std::size_t i = 0; i < m; ++i) jac(i, j) = (rp[i] - r0[i]) / dx;
    }
    return jac;
}

/// Damped Newton on a finite-difference Jacobian. Steps that increase the
/// residual norm are halved, at most max_halvings times.
inline Vector newton_solve(const ResidualFn& residual, Vector x, const NewtonConfig& cfg = {}) {
    Vector r = residual(x);
    double rn = norm_inf(r);
    if (rn <= cfg.tol) return x;
    for (int it = 1; it <= cfg.max_iterations; ++it) {
        DenseMatrix jac = fd_jacobian(residual, x, r, cfg.fd_step);
        Vector dx;
        try {
            Vector rhs(r.size());
            for (std::size_t i = 0; i < r.size(); ++i) rhs[i] = -r[i];
            dx = lu_solve(jac, rhs);
        } catch (const SingularMatrix& e) {
            throw NewtonDiverged(std::string("newton_solve: singular jacobian (") + e.what() +
                                     ")",
                                 x, rn, it);
        }
        double lambda = 1.0;
        Vector x_try(x.size());
        Vector r_try;
        double rn_try = 0.0;
        for (int halving = 0; halving <= cfg.max_halvings; ++halving) {
            for (std::size_t i = 0; i < x.size(); ++i) x_try[i] = x[i] + lambda * dx[i];
            r_try = residual(x_try);
            rn_try = norm_inf(r_try);
            if (rn_try < rn || halving == cfg.max_halvings) break;
            lambda *= 0.5;
        }
        x = x_try;
        r = std::move(r_try);
        rn = rn_try;
        if (rn <= cfg.tol) return x;
    }
    throw NewtonDiverged("newton_solve: no convergence after " +
                             std::to_string(cfg.max_iterations) + " iterations",
                         x, rn, cfg.max_iterations);
}

}  // namespace cosim
