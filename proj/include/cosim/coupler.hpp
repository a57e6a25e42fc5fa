#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "cosim/dae.hpp"
#include "cosim/errors.hpp"
#include "cosim/integrate.hpp"
#include "cosim/linalg.hpp"
#include "cosim/waveform.hpp"

namespace cosim {

// ---------------------------------------------------------------------------
// Wiring
// ---------------------------------------------------------------------------

struct Connection {
    std::string dst_sys, dst_port;
    std::string src_sys, src_port;
};

struct Wiring {
    std::vector<Connection> connections;
};

enum class SweepKind { GaussSeidel, Jacobi };

struct DynamicIterationMode {
    SweepKind sweep = SweepKind::GaussSeidel;
    double window = 0.1;  // H
    int k_max = 20;
    double tol = 1e-8;
};

/// Per-sweep diagnostics record; dy/dz are the sup-norms over the window
/// grid of the change between consecutive iterates, differential and
/// algebraic parts separately.
struct SweepReport {
    std::size_t window = 0;
    int k = 0;
    double dy = 0.0;
    double dz = 0.0;
    double alpha_estimate = 0.0;  // observed dz ratio vs previous sweep
    bool converged = false;
};

struct ConvergenceReport {
    double alpha_jacobian = 0.0;  // contraction estimate from the Jacobian split
    double alpha_observed = 0.0;  // geometric mean of per-sweep dz ratios
    double window_size = 0.0;
    std::vector<int> window_iterations;
    std::vector<double> first_sweep_error;  // max(dy, dz) of sweep 1, per window
    bool all_converged = true;
};

struct CoupledTrajectory {
    std::vector<double> t;
    std::vector<Trajectory> sub;  // aligned: sub[j].t == t
};

struct DynamicIterationResult {
    CoupledTrajectory trajectory;
    std::vector<SweepReport> sweeps;
    ConvergenceReport report;
};

/// Largest relative state deviation between two runs on the same grid.
/// Each subsystem is normalized by its own reference magnitude so that
/// quantities of very different physical scale compare fairly.
inline double sup_deviation(const CoupledTrajectory& a, const CoupledTrajectory& b) {
    if (a.sub.size() != b.sub.size() || a.t.size() != b.t.size())
        throw DimensionMismatch("sup_deviation: runs have different shape");
    double dev = 0.0;
    for (std::size_t j = 0; j < a.sub.size(); ++j) {
        double scale = 0.0;
        for (std::size_t s = 0; s < a.t.size(); ++s) {
            scale = std::max(scale, norm_inf(b.sub[j].y[s]));
            scale = std::max(scale, norm_inf(b.sub[j].z[s]));
        }
        if (scale == 0.0) scale = 1.0;
        for (std::size_t s = 0; s < a.t.size(); ++s) {
            for (std::size_t i = 0; i < a.sub[j].y[s].size(); ++i)
                dev = std::max(dev, std::abs(a.sub[j].y[s][i] - b.sub[j].y[s][i]) / scale);
            for (std::size_t i = 0; i < a.sub[j].z[s].size(); ++i)
                dev = std::max(dev, std::abs(a.sub[j].z[s][i] - b.sub[j].z[s][i]) / scale);
        }
    }
    return dev;
}

// ---------------------------------------------------------------------------
// Coupled network: wiring resolution shared by all run modes
// ---------------------------------------------------------------------------

namespace detail {

struct PortSource {
    bool connected = false;
    std::size_t src_sys = 0;
    std::size_t offset = 0;  // into the source's concatenated output vector
    std::size_t dim = 0;
};

struct Network {
    std::vector<SemiExplicitSystem> subs;
    // per subsystem: input port name → source
    std::vector<std::map<std::string, PortSource>> sources;

    std::size_t index_of(const std::string& name) const {
        for (std::size_t j = 0; j < subs.size(); ++j)
            if (subs[j].name == name) return j;
        throw WiringError("wiring references unknown subsystem '" + name + "'");
    }
};

inline std::size_t output_offset(const SemiExplicitSystem& sys, const std::string& port,
                                 std::size_t& dim) {
    std::size_t off = 0;
    for (const auto& p : sys.output_ports) {
        if (p.name == port) {
            dim = p.dimension;
            return off;
        }
        off += p.dimension;
    }
    throw WiringError("subsystem '" + sys.name + "' has no output port '" + port + "'");
}

inline Network build_network(std::vector<SemiExplicitSystem> subsystems, const Wiring& wiring) {
    Network net;
    net.subs = std::move(subsystems);
    for (const auto& s : net.subs) validate_ports(s);
    net.sources.resize(net.subs.size());
    for (const auto& c : wiring.connections) {
        const std::size_t dst = net.index_of(c.dst_sys);
        const std::size_t src = net.index_of(c.src_sys);
        const CouplingPort* in = net.subs[dst].find_input(c.dst_port);
        if (!in)
            throw WiringError("subsystem '" + c.dst_sys + "' has no input port '" +
                              c.dst_port + "'");
        PortSource ps;
        ps.connected = true;
        ps.src_sys = src;
        ps.offset = output_offset(net.subs[src], c.src_port, ps.dim);
        if (ps.dim != in->dimension)
            throw WiringError("port dimension mismatch on " + c.dst_sys + "." + c.dst_port);
        if (!net.sources[dst].emplace(c.dst_port, ps).second)
            throw WiringError("input port " + c.dst_sys + "." + c.dst_port +
                              " wired more than once");
    }
    return net;
}

/// Values of every subsystem's input ports at one time/state point.
/// Output evaluators may themselves consume inputs, so the network is
/// resolved by fixed-point passes; chains settle after at most n passes.
inline std::vector<PortValues> resolve_ports(const Network& net, double t,
                                             const std::vector<Vector>& y,
                                             const std::vector<Vector>& z) {
    const std::size_t n = net.subs.size();
    std::vector<PortValues> u(n);
    for (std::size_t j = 0; j < n; ++j) u[j] = default_inputs(net.subs[j]);
    for (std::size_t pass = 0; pass <= n; ++pass) {
        std::vector<Vector> outs(n);
        for (std::size_t j = 0; j < n; ++j)
            if (net.subs[j].outputs) outs[j] = net.subs[j].outputs(t, y[j], z[j], u[j]);
        bool changed = false;
        for (std::size_t j = 0; j < n; ++j) {
            for (auto& [port, ps] : net.sources[j]) {
                if (!ps.connected) continue;
                Vector v(outs[ps.src_sys].begin() + static_cast<std::ptrdiff_t>(ps.offset),
                         outs[ps.src_sys].begin() +
                             static_cast<std::ptrdiff_t>(ps.offset + ps.dim));
                Vector& cur = u[j][port];
                if (cur != v) {
                    cur = std::move(v);
                    changed = true;
                }
            }
        }
        if (!changed) break;
    }
    return u;
}

/// Consistent coupled initialization: Newton on the stacked algebraic
/// residual with ports resolved per evaluation.
inline void initialize_coupled(const Network& net, double t0, std::vector<Vector>& y,
                               std::vector<Vector>& z, double tol = 1e-10) {
    const std::size_t n = net.subs.size();
    std::vector<std::size_t> z_off(n + 1, 0);
    for (std::size_t j = 0; j < n; ++j) z_off[j + 1] = z_off[j] + net.subs[j].nz;
    const std::size_t nz_total = z_off[n];
    if (nz_total == 0) return;
    Vector zs(nz_total);
    for (std::size_t j = 0; j < n; ++j)
        std::copy(z[j].begin(), z[j].end(), zs.begin() + static_cast<std::ptrdiff_t>(z_off[j]));
    auto residual = [&](const Vector& zhat) {
        std::vector<Vector> zl(n);
        for (std::size_t j = 0; j < n; ++j)
            zl[j].assign(zhat.begin() + static_cast<std::ptrdiff_t>(z_off[j]),
                         zhat.begin() + static_cast<std::ptrdiff_t>(z_off[j + 1]));
        const auto u = resolve_ports(net, t0, y, zl);
        Vector r(nz_total);
        for (std::size_t j = 0; j < n; ++j) {
            if (net.subs[j].nz == 0) continue;
            const Vector gj = net.subs[j].g(t0, y[j], zl[j], u[j]);
            std::copy(gj.begin(), gj.end(), r.begin() + static_cast<std::ptrdiff_t>(z_off[j]));
        }
        return r;
    };
    NewtonConfig cfg;
    cfg.tol = tol;
    const Vector zc = newton_solve(residual, std::move(zs), cfg);
    for (std::size_t j = 0; j < n; ++j)
        z[j].assign(zc.begin() + static_cast<std::ptrdiff_t>(z_off[j]),
                    zc.begin() + static_cast<std::ptrdiff_t>(z_off[j + 1]));
}

/// Builds the input waveforms for subsystem j from the current per-port
/// waveform store, falling back to constant defaults for unconnected ports.
inline WaveformSet input_waveforms(const Network& net, std::size_t j, double t_start,
                                   const std::map<std::string, Waveform>& port_wave) {
    WaveformSet ws;
    for (const auto& p : net.subs[j].input_ports) {
        const auto key = net.subs[j].name + "/" + p.name;
        const auto it = port_wave.find(key);
        if (it != port_wave.end() && !it->second.empty()) {
            ws.emplace(p.name, it->second);
        } else {
            Vector v = p.default_value;
            if (v.empty()) v.assign(p.dimension, 0.0);
            ws.emplace(p.name, Waveform::constant(t_start, std::move(v)));
        }
    }
    return ws;
}

/// Records subsystem j's output waveforms along a trajectory and publishes
/// them to every destination port fed by j.
inline void publish_outputs(const Network& net, std::size_t j, const Trajectory& traj,
                            const WaveformSet& inputs_used,
                            std::map<std::string, Waveform>& port_wave) {
    if (!net.subs[j].outputs) return;
    std::vector<Vector> out_nodes(traj.size());
    for (std::size_t s = 0; s < traj.size(); ++s) {
        const PortValues u = sample_all(inputs_used, traj.t[s]);
        out_nodes[s] = net.subs[j].outputs(traj.t[s], traj.y[s], traj.z[s], u);
    }
    for (std::size_t dst = 0; dst < net.subs.size(); ++dst) {
        for (const auto& [port, ps] : net.sources[dst]) {
            if (!ps.connected || ps.src_sys != j) continue;
            Waveform w;
            for (std::size_t s = 0; s < traj.size(); ++s)
                w.append(traj.t[s],
                         Vector(out_nodes[s].begin() + static_cast<std::ptrdiff_t>(ps.offset),
                                out_nodes[s].begin() +
                                    static_cast<std::ptrdiff_t>(ps.offset + ps.dim)));
            port_wave[net.subs[dst].name + "/" + port] = std::move(w);
        }
    }
}

/// Constant-value waveforms for every connected port, from a resolved state.
inline std::map<std::string, Waveform> constant_port_waveforms(
    const Network& net, double t, const std::vector<Vector>& y, const std::vector<Vector>& z) {
    const auto u = resolve_ports(net, t, y, z);
    std::map<std::string, Waveform> pw;
    for (std::size_t j = 0; j < net.subs.size(); ++j)
        for (const auto& [port, ps] : net.sources[j])
            if (ps.connected)
                pw[net.subs[j].name + "/" + port] = Waveform::constant(t, u[j].at(port));
    return pw;
}

inline std::vector<std::size_t> order_indices(const Network& net,
                                              const std::vector<std::string>& order) {
    if (order.empty()) {
        std::vector<std::size_t> idx(net.subs.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        return idx;
    }
    if (order.size() != net.subs.size())
        throw WiringError("order must list every subsystem exactly once");
    std::vector<std::size_t> idx;
    for (const auto& name : order) idx.push_back(net.index_of(name));
    std::vector<std::size_t> sorted = idx;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t j = 0; j < sorted.size(); ++j)
        if (sorted[j] != j) throw WiringError("order must list every subsystem exactly once");
    return idx;
}

inline void append_window(CoupledTrajectory& acc, const std::vector<Trajectory>& trajs) {
    const std::size_t n = trajs.size();
    if (acc.sub.empty()) acc.sub.resize(n);
    const std::size_t from = acc.t.empty() ? 0 : 1;  // window boundary appears once
    for (std::size_t s = from; s < trajs[0].size(); ++s) acc.t.push_back(trajs[0].t[s]);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t s = from; s < trajs[j].size(); ++s) {
            acc.sub[j].t.push_back(trajs[j].t[s]);
            acc.sub[j].y.push_back(trajs[j].y[s]);
            acc.sub[j].z.push_back(trajs[j].z[s]);
        }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// estimate_contraction / suggest_order
// ---------------------------------------------------------------------------

namespace detail {

/// Stacked ∂g/∂z of the coupled network, by finite differences through the
/// resolved port values.
inline DenseMatrix stacked_algebraic_jacobian(const Network& net, double t,
                                              const std::vector<Vector>& y,
                                              const std::vector<Vector>& z,
                                              std::vector<std::size_t>& z_off) {
    const std::size_t n = net.subs.size();
    z_off.assign(n + 1, 0);
    for (std::size_t j = 0; j < n; ++j) z_off[j + 1] = z_off[j] + net.subs[j].nz;
    const std::size_t nz = z_off[n];
    auto stacked_g = [&](const Vector& zhat) {
        std::vector<Vector> zl(n);
        for (std::size_t j = 0; j < n; ++j)
            zl[j].assign(zhat.begin() + static_cast<std::ptrdiff_t>(z_off[j]),
                         zhat.begin() + static_cast<std::ptrdiff_t>(z_off[j + 1]));
        const auto u = resolve_ports(net, t, y, zl);
        Vector r(nz);
        for (std::size_t j = 0; j < n; ++j) {
            if (net.subs[j].nz == 0) continue;
            const Vector gj = net.subs[j].g(t, y[j], zl[j], u[j]);
            std::copy(gj.begin(), gj.end(), r.begin() + static_cast<std::ptrdiff_t>(z_off[j]));
        }
        return r;
    };
    Vector zs(nz);
    for (std::size_t j = 0; j < n; ++j)
        std::copy(z[j].begin(), z[j].end(), zs.begin() + static_cast<std::ptrdiff_t>(z_off[j]));
    const Vector r0 = stacked_g(zs);
    DenseMatrix jac(nz, nz);
    Vector zp = zs;
    for (std::size_t c = 0; c < nz; ++c) {
        const double dz = 1e-6 * (1.0 + std::abs(zs[c]));
        zp[c] = zs[c] + dz;
        const Vector rp = stacked_g(zp);
        zp[c] = zs[c];
        for (std::size_t r = 0; r < nz; ++r) jac(r, c) = (rp[r] - r0[r]) / dz;
    }
    return jac;
}

/// α for one ordering from a precomputed stacked Jacobian: the spectral
/// norm of (new-iterate part)⁻¹ · (old-iterate part).
inline double contraction_from_jacobian(const DenseMatrix& jac,
                                        const std::vector<std::size_t>& z_off,
                                        const std::vector<std::size_t>& order,
                                        SweepKind sweep) {
    const std::size_t nz = jac.rows();
    if (nz == 0) return 0.0;
    const std::size_t n = z_off.size() - 1;
    std::vector<std::size_t> pos(n);
    for (std::size_t p = 0; p < order.size(); ++p) pos[order[p]] = p;
    auto block_of = [&](std::size_t idx) {
        std::size_t j = 0;
        while (z_off[j + 1] <= idx) ++j;
        return j;
    };
    DenseMatrix nu(nz, nz), old(nz, nz);
    for (std::size_t r = 0; r < nz; ++r) {
        const std::size_t bi = block_of(r);
        for (std::size_t c = 0; c < nz; ++c) {
            const std::size_t bj = block_of(c);
            const bool is_new = (sweep == SweepKind::GaussSeidel) ? pos[bj] <= pos[bi]
                                                                  : bj == bi;
            (is_new ? nu : old)(r, c) = jac(r, c);
        }
    }
    LuFactors nf;
    try {
        nf = lu_factor(nu);
    } catch (const SingularMatrix&) {
        throw SingularAlgebraicPart("estimate_contraction: new-iterate block singular");
    }
    DenseMatrix map(nz, nz);
    Vector col(nz);
    for (std::size_t c = 0; c < nz; ++c) {
        for (std::size_t r = 0; r < nz; ++r) col[r] = old(r, c);
        const Vector x = lu_solve_factored(nf, col);
        for (std::size_t r = 0; r < nz; ++r) map(r, c) = x[r];
    }
    return operator_norm(map);
}

}  // namespace detail

/// Contraction factor of one sweep: how strongly old algebraic iterates
/// feed back into new ones. Values below 1 guarantee convergence for small
/// enough windows; 0 means the ordering removed the algebraic feedback
/// entirely.
inline double estimate_contraction(const std::vector<SemiExplicitSystem>& subsystems,
                                   const Wiring& wiring,
                                   const std::vector<std::string>& order, double t,
                                   const std::vector<Vector>& y, const std::vector<Vector>& z,
                                   SweepKind sweep = SweepKind::GaussSeidel) {
    const detail::Network net = detail::build_network(subsystems, wiring);
    std::vector<std::size_t> z_off;
    const DenseMatrix jac = detail::stacked_algebraic_jacobian(net, t, y, z, z_off);
    return detail::contraction_from_jacobian(jac, z_off, detail::order_indices(net, order),
                                             sweep);
}

struct OrderSuggestion {
    std::vector<std::string> order;
    double alpha = 0.0;
};

/// Exhaustive search over subsystem orderings (n ≤ 10) minimizing the
/// Gauss-Seidel contraction factor; ties resolve to the lexicographically
/// first permutation of the original ordering.
inline OrderSuggestion suggest_order(const std::vector<SemiExplicitSystem>& subsystems,
                                     const Wiring& wiring, double t,
                                     const std::vector<Vector>& y,
                                     const std::vector<Vector>& z) {
    if (subsystems.size() > 10)
        throw Error("suggest_order: exhaustive search limited to 10 subsystems");
    const detail::Network net = detail::build_network(subsystems, wiring);
    std::vector<std::size_t> z_off;
    const DenseMatrix jac = detail::stacked_algebraic_jacobian(net, t, y, z, z_off);
    std::vector<std::size_t> perm(net.subs.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    OrderSuggestion best;
    best.alpha = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> best_perm;
    do {
        const double alpha =
            detail::contraction_from_jacobian(jac, z_off, perm, SweepKind::GaussSeidel);
        if (alpha < best.alpha - 1e-12) {
            best.alpha = alpha;
            best_perm = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    for (std::size_t j : best_perm) best.order.push_back(net.subs[j].name);
    return best;
}

// ---------------------------------------------------------------------------
// run_monolithic
// ---------------------------------------------------------------------------

/// All subsystems concatenated into one semi-explicit system with the
/// coupling substituted exactly; the reference every split scheme is
/// measured against.
inline CoupledTrajectory run_monolithic(const std::vector<SemiExplicitSystem>& subsystems,
                                        const Wiring& wiring, double t_end,
                                        const IntegratorConfig& cfg, double t0 = 0.0) {
    const detail::Network net = detail::build_network(subsystems, wiring);
    const std::size_t n = net.subs.size();
    std::vector<std::size_t> y_off(n + 1, 0), z_off(n + 1, 0);
    for (std::size_t j = 0; j < n; ++j) {
        y_off[j + 1] = y_off[j] + net.subs[j].ny;
        z_off[j + 1] = z_off[j] + net.subs[j].nz;
    }
    auto unstack = [&](const Vector& ys, const Vector& zs, std::vector<Vector>& y,
                       std::vector<Vector>& z) {
        y.resize(n);
        z.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            y[j].assign(ys.begin() + static_cast<std::ptrdiff_t>(y_off[j]),
                        ys.begin() + static_cast<std::ptrdiff_t>(y_off[j + 1]));
            z[j].assign(zs.begin() + static_cast<std::ptrdiff_t>(z_off[j]),
                        zs.begin() + static_cast<std::ptrdiff_t>(z_off[j + 1]));
        }
    };
    SemiExplicitSystem stacked;
    stacked.name = "monolithic";
    stacked.ny = y_off[n];
    stacked.nz = z_off[n];
    stacked.f = [&net, unstack, y_off, n](double t, const Vector& ys, const Vector& zs,
                                          const PortValues&) {
        std::vector<Vector> y, z;
        unstack(ys, zs, y, z);
        const auto u = detail::resolve_ports(net, t, y, z);
        Vector out(y_off[n]);
        for (std::size_t j = 0; j < n; ++j) {
            if (net.subs[j].ny == 0) continue;
            const Vector fj = net.subs[j].f(t, y[j], z[j], u[j]);
            std::copy(fj.begin(), fj.end(),
                      out.begin() + static_cast<std::ptrdiff_t>(y_off[j]));
        }
        return out;
    };
    stacked.g = [&net, unstack, z_off, n](double t, const Vector& ys, const Vector& zs,
                                          const PortValues&) {
        std::vector<Vector> y, z;
        unstack(ys, zs, y, z);
        const auto u = detail::resolve_ports(net, t, y, z);
        Vector out(z_off[n]);
        for (std::size_t j = 0; j < n; ++j) {
            if (net.subs[j].nz == 0) continue;
            const Vector gj = net.subs[j].g(t, y[j], z[j], u[j]);
            std::copy(gj.begin(), gj.end(),
                      out.begin() + static_cast<std::ptrdiff_t>(z_off[j]));
        }
        return out;
    };

    std::vector<Vector> y(n), z(n);
    for (std::size_t j = 0; j < n; ++j) {
        y[j] = net.subs[j].y0;
        z[j] = net.subs[j].z0;
    }
    detail::initialize_coupled(net, t0, y, z, cfg.newton_tol);
    stacked.y0.resize(stacked.ny);
    stacked.z0.resize(stacked.nz);
    for (std::size_t j = 0; j < n; ++j) {
        std::copy(y[j].begin(), y[j].end(),
                  stacked.y0.begin() + static_cast<std::ptrdiff_t>(y_off[j]));
        std::copy(z[j].begin(), z[j].end(),
                  stacked.z0.begin() + static_cast<std::ptrdiff_t>(z_off[j]));
    }
    if (stacked.nz > 0) verify_index1(stacked, t0, stacked.y0, stacked.z0, {});

    const Trajectory traj = integrate_window(stacked, t0, t_end, {}, cfg);
    CoupledTrajectory out;
    out.t = traj.t;
    out.sub.resize(n);
    for (std::size_t s = 0; s < traj.size(); ++s) {
        std::vector<Vector> ys, zs;
        unstack(traj.y[s], traj.z[s], ys, zs);
        for (std::size_t j = 0; j < n; ++j) {
            out.sub[j].t.push_back(traj.t[s]);
            out.sub[j].y.push_back(std::move(ys[j]));
            out.sub[j].z.push_back(std::move(zs[j]));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// run_one_way
// ---------------------------------------------------------------------------

/// Each subsystem is integrated exactly once, consuming upstream waveforms
/// already computed; feedback against the order is a wiring error.
inline CoupledTrajectory run_one_way(const std::vector<SemiExplicitSystem>& subsystems,
                                     const Wiring& wiring,
                                     const std::vector<std::string>& order, double t_end,
                                     const IntegratorConfig& cfg, double t0 = 0.0) {
    const detail::Network net = detail::build_network(subsystems, wiring);
    const auto idx = detail::order_indices(net, order);
    std::vector<std::size_t> pos(idx.size());
    for (std::size_t p = 0; p < idx.size(); ++p) pos[idx[p]] = p;
    for (std::size_t dst = 0; dst < net.subs.size(); ++dst)
        for (const auto& [port, ps] : net.sources[dst])
            if (ps.connected && pos[ps.src_sys] >= pos[dst])
                throw CycleDetected("one-way coupling impossible: " + net.subs[dst].name +
                                    "." + port + " feeds back against the given order");

    const std::size_t n = net.subs.size();
    std::vector<Vector> y(n), z(n);
    for (std::size_t j = 0; j < n; ++j) {
        y[j] = net.subs[j].y0;
        z[j] = net.subs[j].z0;
    }
    detail::initialize_coupled(net, t0, y, z, cfg.newton_tol);

    std::map<std::string, Waveform> port_wave;
    std::vector<Trajectory> trajs(n);
    for (std::size_t j : idx) {
        const WaveformSet inputs = detail::input_waveforms(net, j, t0, port_wave);
        trajs[j] = integrate_window(net.subs[j], t0, t_end, inputs, cfg, y[j], z[j]);
        detail::publish_outputs(net, j, trajs[j], inputs, port_wave);
    }
    CoupledTrajectory out;
    out.t = trajs[idx[0]].t;
    out.sub = std::move(trajs);
    return out;
}

// ---------------------------------------------------------------------------
// run_weak
// ---------------------------------------------------------------------------

/// Weak coupling: subsystems advance one synchronization slab at a time in
/// the given order. Partners not yet advanced within the slab are seen
/// through a zero-order hold of their value at the previous sync point;
/// already-advanced partners are seen through their fresh waveform.
inline CoupledTrajectory run_weak(const std::vector<SemiExplicitSystem>& subsystems,
                                  const Wiring& wiring, const std::vector<std::string>& order,
                                  double t_end, double sync_step, const IntegratorConfig& cfg,
                                  double t0 = 0.0) {
    const detail::Network net = detail::build_network(subsystems, wiring);
    const auto idx = detail::order_indices(net, order);
    const double slabs_real = (t_end - t0) / sync_step;
    const auto slabs = static_cast<std::size_t>(std::llround(slabs_real));
    if (slabs == 0 || std::abs(slabs_real - static_cast<double>(slabs)) > 1e-12 * slabs_real)
        throw GridMismatch("run_weak: sync_step does not tile the simulation span");

    const std::size_t n = net.subs.size();
    std::vector<Vector> y(n), z(n);
    for (std::size_t j = 0; j < n; ++j) {
        y[j] = net.subs[j].y0;
        z[j] = net.subs[j].z0;
    }
    detail::initialize_coupled(net, t0, y, z, cfg.newton_tol);

    CoupledTrajectory acc;
    for (std::size_t slab = 0; slab < slabs; ++slab) {
        const double ta = t0 + static_cast<double>(slab) * sync_step;
        const double tb = t0 + static_cast<double>(slab + 1) * sync_step;
        std::map<std::string, Waveform> port_wave =
            detail::constant_port_waveforms(net, ta, y, z);
        std::vector<Trajectory> trajs(n);
        for (std::size_t j : idx) {
            const WaveformSet inputs = detail::input_waveforms(net, j, ta, port_wave);
            trajs[j] = integrate_window(net.subs[j], ta, tb, inputs, cfg, y[j], z[j]);
            detail::publish_outputs(net, j, trajs[j], inputs, port_wave);
        }
        for (std::size_t j = 0; j < n; ++j) {
            y[j] = trajs[j].y.back();
            z[j] = trajs[j].z.back();
        }
        detail::append_window(acc, trajs);
    }
    return acc;
}

// ---------------------------------------------------------------------------
// run_dynamic_iteration
// ---------------------------------------------------------------------------

/// Waveform relaxation: per window, Gauss-Seidel or Jacobi sweeps exchange
/// whole waveforms until the splitting error drops below tolerance. The
/// initial iterate of each window is the constant extrapolation of the
/// previous window's final values.
inline DynamicIterationResult run_dynamic_iteration(
    const std::vector<SemiExplicitSystem>& subsystems, const Wiring& wiring,
    const std::vector<std::string>& order, const DynamicIterationMode& mode, double t_end,
    const IntegratorConfig& cfg, double t0 = 0.0) {
    const detail::Network net = detail::build_network(subsystems, wiring);
    const auto idx = detail::order_indices(net, order);
    const double win_real = (t_end - t0) / mode.window;
    const auto windows = static_cast<std::size_t>(std::llround(win_real));
    if (windows == 0 || std::abs(win_real - static_cast<double>(windows)) > 1e-12 * win_real)
        throw GridMismatch("run_dynamic_iteration: window does not tile the simulation span");
    if (mode.k_max < 1) throw Error("run_dynamic_iteration: k_max must be at least 1");

    const std::size_t n = net.subs.size();
    std::vector<Vector> y(n), z(n);
    for (std::size_t j = 0; j < n; ++j) {
        y[j] = net.subs[j].y0;
        z[j] = net.subs[j].z0;
    }
    detail::initialize_coupled(net, t0, y, z, cfg.newton_tol);

    DynamicIterationResult result;
    result.report.window_size = mode.window;
    {
        std::vector<std::size_t> z_off;
        const DenseMatrix jac = detail::stacked_algebraic_jacobian(net, t0, y, z, z_off);
        result.report.alpha_jacobian =
            detail::contraction_from_jacobian(jac, z_off, idx, mode.sweep);
    }

    std::vector<double> ratio_log;
    for (std::size_t w = 0; w < windows; ++w) {
        const double ta = t0 + static_cast<double>(w) * mode.window;
        const double tb = t0 + static_cast<double>(w + 1) * mode.window;
        std::map<std::string, Waveform> port_wave =
            detail::constant_port_waveforms(net, ta, y, z);

        // iterate 0: constant extrapolation of the window-start state
        const auto node_count =
            static_cast<std::size_t>(std::llround(mode.window / cfg.h)) + 1;
        std::vector<Trajectory> prev(n);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t s = 0; s < node_count; ++s)
                prev[j].append(ta + static_cast<double>(s) * cfg.h, y[j], z[j]);

        std::vector<Trajectory> cur(n);
        bool converged = false;
        double dz_min = std::numeric_limits<double>::infinity();
        double prev_dz = -1.0;
        int grow_streak = 0;
        int k_used = 0;
        for (int k = 1; k <= mode.k_max; ++k) {
            k_used = k;
            if (mode.sweep == SweepKind::GaussSeidel) {
                for (std::size_t j : idx) {
                    const WaveformSet inputs = detail::input_waveforms(net, j, ta, port_wave);
                    cur[j] = integrate_window(net.subs[j], ta, tb, inputs, cfg, y[j], z[j]);
                    detail::publish_outputs(net, j, cur[j], inputs, port_wave);
                }
            } else {
                const std::map<std::string, Waveform> snapshot = port_wave;
                std::vector<WaveformSet> inputs(n);
                for (std::size_t j : idx) {
                    inputs[j] = detail::input_waveforms(net, j, ta, snapshot);
                    cur[j] = integrate_window(net.subs[j], ta, tb, inputs[j], cfg, y[j], z[j]);
                }
                for (std::size_t j : idx)
                    detail::publish_outputs(net, j, cur[j], inputs[j], port_wave);
            }
            double dy = 0.0, dz = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t s = 0; s < node_count; ++s) {
                    for (std::size_t i = 0; i < net.subs[j].ny; ++i)
                        dy = std::max(dy, std::abs(cur[j].y[s][i] - prev[j].y[s][i]));
                    for (std::size_t i = 0; i < net.subs[j].nz; ++i)
                        dz = std::max(dz, std::abs(cur[j].z[s][i] - prev[j].z[s][i]));
                }
            SweepReport rep;
            rep.window = w;
            rep.k = k;
            rep.dy = dy;
            rep.dz = dz;
            rep.alpha_estimate = (prev_dz > 0.0 && dz > 0.0) ? dz / prev_dz : 0.0;
            rep.converged = std::max(dy, dz) <= mode.tol;
            result.sweeps.push_back(rep);
            if (k == 1) result.report.first_sweep_error.push_back(std::max(dy, dz));
            if (prev_dz > 0.0 && dz > 0.0) ratio_log.push_back(dz / prev_dz);

            prev = cur;
            if (rep.converged) {
                converged = true;
                break;
            }
            // divergence guard: algebraic error growing for three sweeps in a
            // row and at least 10x above its running minimum
            if (dz < dz_min) dz_min = dz;
            grow_streak = (prev_dz >= 0.0 && dz > prev_dz) ? grow_streak + 1 : 0;
            if (grow_streak >= 3 && dz >= 10.0 * dz_min) {
                double alpha = 0.0;
                std::size_t cnt = 0;
                for (auto it = ratio_log.rbegin(); it != ratio_log.rend() && cnt < 3;
                     ++it, ++cnt)
                    alpha += std::log(*it);
                alpha = cnt ? std::exp(alpha / static_cast<double>(cnt)) : 0.0;
                std::vector<double> hist;
                for (const auto& r : result.sweeps)
                    if (r.window == w) hist.push_back(r.dz);
                throw IterationDiverged(
                    "dynamic iteration diverged on window " + std::to_string(w) +
                        " (estimated contraction " + std::to_string(alpha) + ")",
                    alpha, std::move(hist));
            }
            prev_dz = dz;
        }
        result.report.window_iterations.push_back(k_used);
        result.report.all_converged = result.report.all_converged && converged;
        for (std::size_t j = 0; j < n; ++j) {
            y[j] = cur[j].y.back();
            z[j] = cur[j].z.back();
        }
        detail::append_window(result.trajectory, cur);
    }
    if (!ratio_log.empty()) {
        double s = 0.0;
        for (double r : ratio_log) s += std::log(r);
        result.report.alpha_observed = std::exp(s / static_cast<double>(ratio_log.size()));
    }
    return result;
}

}  // namespace cosim
