#pragma once

// Canonical coupled test systems shared by the coupler, scenario and
// acceptance suites.

#include <string>
#include <vector>

#include "cosim/coupler.hpp"
#include "cosim/dae.hpp"

namespace testsys {

using namespace cosim;

/// LIN2: the smallest pair exhibiting old/new algebraic coupling.
///   S1:  y1' = -y1 + z1,  0 = z1 + a·u1 - y1,  u1 = z2
///   S2:  y2' = -y2 + z2,  0 = z2 + b·u2 - y2,  u2 = z1
/// Monolithic elimination: z1 = (y1 - a·y2)/(1 - a·b).
inline SemiExplicitSystem lin2_half(const std::string& name, double coeff, double y0) {
    SemiExplicitSystem s;
    s.name = name;
    s.ny = 1;
    s.nz = 1;
    s.f = [](double, const Vector& y, const Vector& z, const PortValues&) {
        return Vector{-y[0] + z[0]};
    };
    s.g = [coeff](double, const Vector& y, const Vector& z, const PortValues& u) {
        return Vector{z[0] + coeff * u.at("u")[0] - y[0]};
    };
    s.y0 = {y0};
    s.z0 = {0.0};
    s.input_ports.push_back({"u", PortKind::SourceTerm, PortDirection::In, 1, {}});
    s.output_ports.push_back({"o", PortKind::SourceTerm, PortDirection::Out, 1, {}});
    s.outputs = [](double, const Vector&, const Vector& z, const PortValues&) { return z; };
    return s;
}

inline std::vector<SemiExplicitSystem> lin2(double a, double b, double y10 = 1.0,
                                            double y20 = -0.5) {
    return {lin2_half("s1", a, y10), lin2_half("s2", b, y20)};
}

inline Wiring lin2_wiring() {
    Wiring w;
    w.connections.push_back({"s1", "u", "s2", "o"});
    w.connections.push_back({"s2", "u", "s1", "o"});
    return w;
}

/// Triangular chain of three index-1 subsystems: g of each link reads the
/// previous link's algebraic variable, nothing feeds back.
///   Tk:  yk' = -yk + zk,  0 = zk + c·u - yk   (u of t1 unconnected)
inline std::vector<SemiExplicitSystem> triangular_chain(double c) {
    std::vector<SemiExplicitSystem> subs;
    const double y0s[3] = {1.0, 0.5, -0.8};
    for (int k = 0; k < 3; ++k)
        subs.push_back(lin2_half("t" + std::to_string(k + 1), c, y0s[k]));
    return subs;
}

inline Wiring triangular_wiring() {
    Wiring w;
    w.connections.push_back({"t2", "u", "t1", "o"});
    w.connections.push_back({"t3", "u", "t2", "o"});
    return w;
}

/// Two pure-ODE subsystems coupled through f only: no algebraic coupling
/// can occur, so the dynamic iteration can never diverge.
inline std::vector<SemiExplicitSystem> ode_pair(double c) {
    std::vector<SemiExplicitSystem> subs;
    const double y0s[2] = {1.0, -0.4};
    for (int k = 0; k < 2; ++k) {
        SemiExplicitSystem s;
        s.name = "o" + std::to_string(k + 1);
        s.ny = 1;
        s.f = [c](double, const Vector& y, const Vector&, const PortValues& u) {
            return Vector{-y[0] + c * u.at("u")[0]};
        };
        s.y0 = {y0s[k]};
        s.input_ports.push_back({"u", PortKind::SourceTerm, PortDirection::In, 1, {}});
        s.output_ports.push_back({"o", PortKind::SourceTerm, PortDirection::Out, 1, {}});
        s.outputs = [](double, const Vector& y, const Vector&, const PortValues&) {
            return y;
        };
        subs.push_back(std::move(s));
    }
    return subs;
}

inline Wiring ode_pair_wiring() {
    Wiring w;
    w.connections.push_back({"o1", "u", "o2", "o"});
    w.connections.push_back({"o2", "u", "o1", "o"});
    return w;
}

/// Direct Gauss-Seidel fixed point on the LIN2 algebraic part with frozen
/// y: the oracle for measured per-sweep δz ratios.
inline std::vector<double> lin2_frozen_gs_dz(double a, double b, double y1, double y2,
                                             int sweeps) {
    double z1 = 0.0, z2 = 0.0;
    std::vector<double> dz;
    for (int k = 0; k < sweeps; ++k) {
        const double z1n = y1 - a * z2;
        const double z2n = y2 - b * z1n;
        dz.push_back(std::max(std::abs(z1n - z1), std::abs(z2n - z2)));
        z1 = z1n;
        z2 = z2n;
    }
    return dz;
}

/// Absolute sup-norm distance between two aligned coupled runs.
inline double max_abs_deviation(const CoupledTrajectory& a, const CoupledTrajectory& b) {
    double dev = 0.0;
    for (std::size_t j = 0; j < a.sub.size(); ++j)
        for (std::size_t s = 0; s < a.t.size(); ++s) {
            for (std::size_t i = 0; i < a.sub[j].y[s].size(); ++i)
                dev = std::max(dev, std::abs(a.sub[j].y[s][i] - b.sub[j].y[s][i]));
            for (std::size_t i = 0; i < a.sub[j].z[s].size(); ++i)
                dev = std::max(dev, std::abs(a.sub[j].z[s][i] - b.sub[j].z[s][i]));
        }
    return dev;
}

}  // namespace testsys
