#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "cosim/coupler.hpp"
#include "cosim/dae.hpp"
#include "cosim/errors.hpp"
#include "cosim/integrate.hpp"
#include "cosim/linalg.hpp"

namespace cosim::cable {

/// Insulation material data. The conductivity law works in °C and kV/mm;
/// everything else is SI. Defaults are plausible polyethylene-like values,
/// not normative data.
struct MaterialLaw {
    double k0 = 1e-16;       // S/m, dc conductivity at 0 °C and 0 kV/mm
    double alpha_T = 0.1;    // 1/K, temperature coefficient
    double beta_E = 0.1;     // mm/kV, field-strength coefficient
    double Cp = 2000.0;      // J/(kg K)
    double rho = 920.0;      // kg/m^3
    double lambda_th = 0.3;  // W/(m K)
};

inline void validate(const MaterialLaw& law) {
    if (law.k0 <= 0 || law.alpha_T <= 0 || law.beta_E <= 0 || law.Cp <= 0 || law.rho <= 0 ||
        law.lambda_th <= 0)
        throw Error("MaterialLaw: all coefficients must be positive");
}

/// k(T, |E|) = k0 · exp(alpha_T·T) · exp(beta_E·|E|), T in °C, |E| in kV/mm.
inline double conductivity(double temperature_c, double e_kv_mm, const MaterialLaw& law) {
    return law.k0 * std::exp(law.alpha_T * temperature_c) * std::exp(law.beta_E * e_kv_mm);
}

/// 1D radial geometry with logarithmically spaced cell edges; cell centers
/// sit at the log midpoint, where the within-cell log-potential is exactly
/// the mean of its edge values.
struct CableGeometry {
    double r_in = 0.01;   // m
    double r_out = 0.03;  // m
    std::size_t n_cells = 32;

    std::vector<double> edges() const {
        std::vector<double> r(n_cells + 1);
        const double ratio = r_out / r_in;
        for (std::size_t i = 0; i <= n_cells; ++i)
            r[i] = r_in * std::pow(ratio, static_cast<double>(i) / n_cells);
        r.back() = r_out;
        return r;
    }
    std::vector<double> centers() const {
        const auto r = edges();
        std::vector<double> c(n_cells);
        for (std::size_t i = 0; i < n_cells; ++i) c[i] = std::sqrt(r[i] * r[i + 1]);
        return c;
    }
    /// Cell cross-section areas per unit cable length.
    std::vector<double> volumes() const {
        const auto r = edges();
        std::vector<double> v(n_cells);
        for (std::size_t i = 0; i < n_cells; ++i)
            v[i] = M_PI * (r[i + 1] * r[i + 1] - r[i] * r[i]);
        return v;
    }
};

inline void validate(const CableGeometry& g) {
    if (!(0.0 < g.r_in && g.r_in < g.r_out))
        throw Error("CableGeometry: need 0 < r_in < r_out");
    if (g.n_cells < 4) throw Error("CableGeometry: need at least 4 cells");
}

constexpr double kVPerMmFromSi = 1e-6;  // V/m → kV/mm

struct ElectroThermalState {
    Vector phi;          // node potentials, V (n_cells + 1)
    Vector e_field;      // per-cell |E| at the centers, kV/mm
    Vector current_j;    // per-cell current density, A/m^2
    Vector joule;        // per-cell Q_E, W/m^3
    double current = 0;  // total conduction current per unit length, A/m
};

namespace detail_cable {

/// Per-cell field magnitude at the cell center from node potentials:
/// within a cell E(r) = c/r with c fixed by the edge potentials.
inline Vector cell_fields_kv_mm(const CableGeometry& geo, const Vector& phi) {
    const auto r = geo.edges();
    const auto c = geo.centers();
    Vector e(geo.n_cells);
    for (std::size_t i = 0; i < geo.n_cells; ++i) {
        const double coef = (phi[i] - phi[i + 1]) / std::log(r[i + 1] / r[i]);
        e[i] = std::abs(coef) / c[i] * kVPerMmFromSi;
    }
    return e;
}

/// Cell conductances G_i = 2π k_i / ln(r_{i+1}/r_i); the face current
/// between nodes i and i+1 is G_i (phi_i − phi_{i+1}).
inline Vector cell_conductances(const CableGeometry& geo, const Vector& temperature,
                                const Vector& e_kv_mm, const MaterialLaw& law) {
    const auto r = geo.edges();
    Vector g(geo.n_cells);
    for (std::size_t i = 0; i < geo.n_cells; ++i)
        g[i] = 2.0 * M_PI * conductivity(temperature[i], e_kv_mm[i], law) /
               std::log(r[i + 1] / r[i]);
    return g;
}

/// Solves the flux-continuity system for interior node potentials given
/// fixed cell conductances. phi[0] = u0, phi[n] = 0.
inline Vector solve_linear_potential(const CableGeometry& geo, const Vector& conduct,
                                     double u0) {
    const std::size_t n = geo.n_cells;
    if (n == 1) return {u0, 0.0};
    Vector sub(n - 2), diag(n - 1), super(n - 2), rhs(n - 1, 0.0);
    for (std::size_t j = 0; j < n - 1; ++j) {
        diag[j] = conduct[j] + conduct[j + 1];
        if (j > 0) sub[j - 1] = -conduct[j];
        if (j + 1 < n - 1) super[j] = -conduct[j + 1];
    }
    rhs[0] = conduct[0] * u0;
    const Vector inner = solve_tridiagonal(sub, diag, super, rhs);
    Vector phi(n + 1);
    phi[0] = u0;
    for (std::size_t j = 0; j < n - 1; ++j) phi[j + 1] = inner[j];
    phi[n] = 0.0;
    return phi;
}

inline void fill_derived(const CableGeometry& geo, const MaterialLaw& law,
                         const Vector& temperature, ElectroThermalState& st) {
    st.e_field = cell_fields_kv_mm(geo, st.phi);
    st.current_j.assign(geo.n_cells, 0.0);
    st.joule.assign(geo.n_cells, 0.0);
    for (std::size_t i = 0; i < geo.n_cells; ++i) {
        const double k = conductivity(temperature[i], st.e_field[i], law);
        const double e_si = st.e_field[i] / kVPerMmFromSi;
        st.current_j[i] = k * e_si;
        st.joule[i] = k * e_si * e_si;
    }
    const auto conduct = cell_conductances(geo, temperature, st.e_field, law);
    st.current = conduct[0] * (st.phi[0] - st.phi[1]);
}

}  // namespace detail_cable

/// Stationary current problem with the field-dependent conductivity
/// resolved by a damped Picard iteration on the cell fields.
inline ElectroThermalState solve_stationary_current(const CableGeometry& geo,
                                                    const Vector& temperature,
                                                    const MaterialLaw& law, double u0,
                                                    double rel_tol = 1e-10,
                                                    int max_iterations = 200) {
    validate(geo);
    validate(law);
    if (temperature.size() != geo.n_cells)
        throw DimensionMismatch("solve_stationary_current: temperature per cell required");
    ElectroThermalState st;
    const double scale = std::max(std::abs(u0), 1.0);
    Vector e(geo.n_cells, 0.0);
    st.phi.assign(geo.n_cells + 1, 0.0);
    std::vector<double> trace;
    double prev_change = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iterations; ++it) {
        const auto conduct = detail_cable::cell_conductances(geo, temperature, e, law);
        const Vector phi_new = detail_cable::solve_linear_potential(geo, conduct, u0);
        double change = 0.0;
        for (std::size_t i = 0; i < phi_new.size(); ++i)
            change = std::max(change, std::abs(phi_new[i] - st.phi[i]));
        const double damping = (change > prev_change) ? 0.5 : 1.0;
        for (std::size_t i = 0; i < phi_new.size(); ++i)
            st.phi[i] += damping * (phi_new[i] - st.phi[i]);
        e = detail_cable::cell_fields_kv_mm(geo, st.phi);
        trace.push_back(change / scale);
        if (change <= rel_tol * scale) {
            detail_cable::fill_derived(geo, law, temperature, st);
            return st;
        }
        prev_change = change;
    }
    throw PicardDiverged("solve_stationary_current: no convergence after " +
                             std::to_string(max_iterations) + " iterations",
                         std::move(trace));
}

/// Volumetric Joule losses from a potential and temperature profile.
inline Vector joule_source(const Vector& phi, const Vector& temperature,
                           const MaterialLaw& law, const CableGeometry& geo) {
    const Vector e = detail_cable::cell_fields_kv_mm(geo, phi);
    Vector q(geo.n_cells);
    for (std::size_t i = 0; i < geo.n_cells; ++i) {
        const double k = conductivity(temperature[i], e[i], law);
        const double e_si = e[i] / kVPerMmFromSi;
        q[i] = k * e_si * e_si;
    }
    return q;
}

struct CableBoundary {
    double T_outer = 20.0;    // °C, fixed at r_out
    double T_initial = 20.0;  // °C, uniform initial temperature
    /// Conductor loss injected at r_in, W per meter of cable; 0 keeps the
    /// inner boundary insulated.
    double conductor_loss = 0.0;
    bool include_insulation_joule = true;
};

/// Transient radial heat transport as a pure-ODE subsystem. Input: the
/// volumetric Joule source per cell; output: the cell temperatures.
inline SemiExplicitSystem heat_subsystem(const CableGeometry& geo, const MaterialLaw& law,
                                         const CableBoundary& bc) {
    validate(geo);
    validate(law);
    const std::size_t n = geo.n_cells;
    const auto centers = geo.centers();
    const auto volumes = geo.volumes();
    // log-spaced face conductances are exact for source-free steady states
    Vector face(n - 1);
    for (std::size_t j = 0; j + 1 < n; ++j)
        face[j] = 2.0 * M_PI * law.lambda_th / std::log(centers[j + 1] / centers[j]);
    const double outer =
        2.0 * M_PI * law.lambda_th / std::log(geo.r_out / centers[n - 1]);
    const double heat_capacity = law.rho * law.Cp;

    SemiExplicitSystem sys;
    sys.name = "heat";
    sys.ny = n;
    sys.nz = 0;
    sys.y0.assign(n, bc.T_initial);
    sys.f = [n, face, outer, volumes, heat_capacity, bc](double, const Vector& temp,
                                                         const Vector&, const PortValues& u) {
        const Vector& q = u.at("Q_E");
        Vector dT(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double power = q[i] * volumes[i];
            if (i > 0) power += face[i - 1] * (temp[i - 1] - temp[i]);
            if (i + 1 < n) power += face[i] * (temp[i + 1] - temp[i]);
            if (i + 1 == n) power += outer * (bc.T_outer - temp[i]);
            if (i == 0) power += bc.conductor_loss;
            dT[i] = power / (heat_capacity * volumes[i]);
        }
        return dT;
    };
    sys.input_ports.push_back(
        {"Q_E", PortKind::SourceTerm, PortDirection::In, n, Vector(n, 0.0)});
    sys.output_ports.push_back({"T", PortKind::MaterialParameter, PortDirection::Out, n, {}});
    sys.outputs = [](double, const Vector& temp, const Vector&, const PortValues&) {
        return temp;
    };
    return sys;
}

/// The stationary current problem wrapped as an all-algebraic subsystem:
/// z holds the interior node potentials, the residual is the per-node flux
/// imbalance scaled to be dimensionless. Input: cell temperatures; output:
/// the Joule source (switchable off for loss-free studies).
inline SemiExplicitSystem field_subsystem(const CableGeometry& geo, const MaterialLaw& law,
                                          std::function<double(double)> voltage,
                                          const CableBoundary& bc) {
    validate(geo);
    validate(law);
    const std::size_t n = geo.n_cells;
    const double u_scale = std::max(std::abs(voltage(0.0)), 1.0);

    auto assemble_phi = [n, voltage](double t, const Vector& z) {
        Vector phi(n + 1);
        phi[0] = voltage(t);
        for (std::size_t j = 0; j + 1 < n; ++j) phi[j + 1] = z[j];
        phi[n] = 0.0;
        return phi;
    };

    SemiExplicitSystem sys;
    sys.name = "field";
    sys.ny = 0;
    sys.nz = n - 1;
    sys.g = [geo, law, assemble_phi, u_scale, n](double t, const Vector&, const Vector& z,
                                                 const PortValues& u) {
        const Vector& temp = u.at("T");
        const Vector phi = assemble_phi(t, z);
        const Vector e = detail_cable::cell_fields_kv_mm(geo, phi);
        const Vector cond = detail_cable::cell_conductances(geo, temp, e, law);
        Vector r(n - 1);
        for (std::size_t j = 0; j + 1 < n; ++j) {
            const double in = cond[j] * (phi[j] - phi[j + 1]);
            const double out = cond[j + 1] * (phi[j + 1] - phi[j + 2]);
            r[j] = (in - out) / ((cond[j] + cond[j + 1]) * u_scale);
        }
        return r;
    };
    sys.input_ports.push_back({"T", PortKind::MaterialParameter, PortDirection::In, n,
                               Vector(n, bc.T_initial)});
    sys.output_ports.push_back({"Q_E", PortKind::SourceTerm, PortDirection::Out, n, {}});
    const bool with_joule = bc.include_insulation_joule;
    sys.outputs = [geo, law, assemble_phi, with_joule, n](double t, const Vector&,
                                                          const Vector& z,
                                                          const PortValues& u) {
        if (!with_joule) return Vector(n, 0.0);
        return joule_source(assemble_phi(t, z), u.at("T"), law, geo);
    };
    // consistent start: Picard solution at the initial temperature
    const ElectroThermalState st0 = solve_stationary_current(
        geo, Vector(n, bc.T_initial), law, voltage(0.0));
    sys.z0.assign(st0.phi.begin() + 1, st0.phi.end() - 1);
    return sys;
}

// ---------------------------------------------------------------------------
// Coupled scenario driver
// ---------------------------------------------------------------------------

enum class CableMode { OneWay, Weak, Monolithic, DynamicIteration };

struct CableRunConfig {
    CableGeometry geometry{};
    MaterialLaw law{};
    CableBoundary boundary{};
    double voltage = 150e3;  // V, held constant
    double t_end = 8000.0;   // s
    CableMode mode = CableMode::Monolithic;
    double sync_step = 1000.0;  // weak coupling
    DynamicIterationMode di{SweepKind::GaussSeidel, 1000.0, 20, 1e-3};
    IntegratorConfig integrator{Method::ImplicitEuler, 100.0, 1e-10, 25, 1e-7};
    std::vector<double> output_times{};
};

struct RadialProfile {
    double time = 0.0;
    Vector r;            // cell centers, m
    Vector phi;          // V at the centers
    Vector e_field;      // kV/mm
    Vector temperature;  // °C
    Vector joule;        // W/m^3
};

struct CableRunResult {
    CoupledTrajectory trajectory;  // sub[0] = field, sub[1] = heat
    std::vector<SweepReport> sweeps;
    ConvergenceReport report;
    std::vector<RadialProfile> profiles;
};

inline RadialProfile cable_profile(const CableRunConfig& cfg, double t, const Vector& z_field,
                                   const Vector& temperature) {
    RadialProfile p;
    p.time = t;
    p.r = cfg.geometry.centers();
    Vector phi(cfg.geometry.n_cells + 1);
    phi.front() = cfg.voltage;
    for (std::size_t j = 0; j + 1 < cfg.geometry.n_cells; ++j) phi[j + 1] = z_field[j];
    phi.back() = 0.0;
    p.e_field = detail_cable::cell_fields_kv_mm(cfg.geometry, phi);
    p.temperature = temperature;
    p.joule = joule_source(phi, temperature, cfg.law, cfg.geometry);
    p.phi.resize(cfg.geometry.n_cells);
    for (std::size_t i = 0; i < cfg.geometry.n_cells; ++i)
        p.phi[i] = 0.5 * (phi[i] + phi[i + 1]);  // exact at the log midpoint
    return p;
}

/// Wires the field and heat subsystems through the requested coupling mode.
/// One-way coupling severs the temperature feedback into the field problem
/// (held at the initial temperature), reproducing the post-processing
/// pattern where losses are computed once from a frozen field solution.
inline CableRunResult run_coupled_cable(const CableRunConfig& cfg) {
    const double u0 = cfg.voltage;
    auto field = field_subsystem(cfg.geometry, cfg.law, [u0](double) { return u0; },
                                 cfg.boundary);
    auto heat = heat_subsystem(cfg.geometry, cfg.law, cfg.boundary);
    std::vector<SemiExplicitSystem> subs{std::move(field), std::move(heat)};

    Wiring full;
    full.connections.push_back({"heat", "Q_E", "field", "Q_E"});
    full.connections.push_back({"field", "T", "heat", "T"});
    Wiring forward;  // one-way: field → heat only
    forward.connections.push_back({"heat", "Q_E", "field", "Q_E"});

    CableRunResult out;
    switch (cfg.mode) {
        case CableMode::Monolithic:
            out.trajectory = run_monolithic(subs, full, cfg.t_end, cfg.integrator);
            break;
        case CableMode::OneWay:
            out.trajectory =
                run_one_way(subs, forward, {"field", "heat"}, cfg.t_end, cfg.integrator);
            break;
        case CableMode::Weak:
            out.trajectory = run_weak(subs, full, {"field", "heat"}, cfg.t_end,
                                      cfg.sync_step, cfg.integrator);
            break;
        case CableMode::DynamicIteration: {
            auto res = run_dynamic_iteration(subs, full, {"field", "heat"}, cfg.di,
                                             cfg.t_end, cfg.integrator);
            out.trajectory = std::move(res.trajectory);
            out.sweeps = std::move(res.sweeps);
            out.report = std::move(res.report);
            break;
        }
    }
    for (double t : cfg.output_times) {
        // nearest grid node
        std::size_t best = 0;
        for (std::size_t s = 1; s < out.trajectory.t.size(); ++s)
            if (std::abs(out.trajectory.t[s] - t) < std::abs(out.trajectory.t[best] - t))
                best = s;
        out.profiles.push_back(cable_profile(cfg, out.trajectory.t[best],
                                             out.trajectory.sub[0].z[best],
                                             out.trajectory.sub[1].y[best]));
    }
    return out;
}

}  // namespace cosim::cable
