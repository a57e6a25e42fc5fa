#pragma once

#include <functional>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "cosim/errors.hpp"
#include "cosim/linalg.hpp"
#include "cosim/newton.hpp"
#include "cosim/waveform.hpp"

namespace cosim {

/// The three interface kinds a coupling quantity can take. Domain
/// deformation (moving subdomains) is deliberately not representable.
enum class PortKind { BoundaryCondition, SourceTerm, MaterialParameter };

enum class PortDirection { In, Out };

struct CouplingPort {
    std::string name;
    PortKind kind = PortKind::SourceTerm;
    PortDirection direction = PortDirection::In;
    std::size_t dimension = 1;
    Vector default_value;  // used for unconnected inputs; empty means zeros
};

/// Evaluator signature shared by f, g and the output map:
/// (t, y, z, sampled input ports) → vector.
using Evaluator =
    std::function<Vector(double, const Vector&, const Vector&, const PortValues&)>;

/// Semi-explicit index-1 system  y' = f(t,y,z,u),  0 = g(t,y,z,u)
/// plus its declared coupling ports. Values are immutable once built and
/// evaluators must be pure, so instances may be shared across threads.
struct SemiExplicitSystem {
    std::string name = "sys";
    std::size_t ny = 0;
    std::size_t nz = 0;
    Evaluator f;        // length ny; may be null when ny == 0
    Evaluator g;        // length nz; may be null when nz == 0
    Vector y0, z0;
    std::vector<CouplingPort> input_ports;
    std::vector<CouplingPort> output_ports;
    Evaluator outputs;  // concatenated output-port values, in declaration order

    std::size_t output_dimension() const {
        std::size_t d = 0;
        for (const auto& p : output_ports) d += p.dimension;
        return d;
    }
    const CouplingPort* find_input(const std::string& port) const {
        for (const auto& p : input_ports)
            if (p.name == port) return &p;
        return nullptr;
    }
    const CouplingPort* find_output(const std::string& port) const {
        for (const auto& p : output_ports)
            if (p.name == port) return &p;
        return nullptr;
    }
};

using Subsystem = SemiExplicitSystem;

inline void validate_ports(const SemiExplicitSystem& sys) {
    std::set<std::string> seen;
    for (const auto& list : {sys.input_ports, sys.output_ports})
        for (const auto& p : list)
            if (!seen.insert(p.name).second)
                throw WiringError("subsystem '" + sys.name + "': duplicate port name '" +
                                  p.name + "'");
}

/// Default values for all input ports (declared default or zeros).
inline PortValues default_inputs(const SemiExplicitSystem& sys) {
    PortValues u;
    for (const auto& p : sys.input_ports) {
        Vector v = p.default_value;
        if (v.empty()) v.assign(p.dimension, 0.0);
        u.emplace(p.name, std::move(v));
    }
    return u;
}

// ---------------------------------------------------------------------------
// verify_index1
// ---------------------------------------------------------------------------

struct RegularityReport {
    bool regular = true;
    double condition = 1.0;  // spectral condition estimate of ∂g/∂z
    std::size_t nz = 0;
};

inline DenseMatrix algebraic_jacobian(const SemiExplicitSystem& sys, double t, const Vector& y,
                                      const Vector& z, const PortValues& inputs,
                                      double fd_step = 1e-6) {
    const Vector r0 = sys.g(t, y, z, inputs);
    DenseMatrix jac(sys.nz, sys.nz);
    Vector zp = z;
    for (std::size_t j = 0; j < sys.nz; ++j) {
        const double dz = fd_step * (1.0 + std::abs(z[j]));
        zp[j] = z[j] + dz;
        const Vector rp = sys.g(t, y, zp, inputs);
        zp[j] = z[j];
        for (std::size_t i = 0; i < sys.nz; ++i) jac(i, j) = (rp[i] - r0[i]) / dz;
    }
    return jac;
}

/// Checks regularity of ∂g/∂z at the given point; a singular algebraic part
/// means the system is not index-1 in this formulation.
inline RegularityReport verify_index1(const SemiExplicitSystem& sys, double t, const Vector& y,
                                      const Vector& z, const PortValues& inputs) {
    RegularityReport rep;
    rep.nz = sys.nz;
    if (sys.nz == 0) return rep;  // no algebraic part, vacuously regular
    const DenseMatrix jac = algebraic_jacobian(sys, t, y, z, inputs);
    DenseMatrix inv;
    try {
        inv = lu_inverse(jac);
    } catch (const SingularMatrix&) {
        throw SingularAlgebraicPart("verify_index1: dg/dz singular for subsystem '" +
                                    sys.name + "'");
    }
    rep.condition = operator_norm(jac) * operator_norm(inv);
    return rep;
}

/// Newton-projects z so that g(t, y, z, inputs) = 0 starting from the given
/// guess; this is the consistent-initialization step.
inline Vector make_consistent(const SemiExplicitSystem& sys, double t, const Vector& y,
                              Vector z_guess, const PortValues& inputs, double tol = 1e-10) {
    if (sys.nz == 0) return z_guess;
    NewtonConfig cfg;
    cfg.tol = tol;
    return newton_solve(
        [&](const Vector& z) { return sys.g(t, y, z, inputs); }, std::move(z_guess), cfg);
}

// ---------------------------------------------------------------------------
// from_linear_implicit: M x' = F(t, x)  →  semi-explicit form
// ---------------------------------------------------------------------------

/// Right-hand side of an implicit linear-mass system.
using ImplicitRhs = std::function<Vector(double, const Vector&, const PortValues&)>;

struct ImplicitSplit {
    SemiExplicitSystem system;
    std::vector<std::size_t> differential_index;  // positions of y within x
    std::vector<std::size_t> algebraic_index;     // positions of z within x

    Vector assemble_state(const Vector& y, const Vector& z) const {
        Vector x(differential_index.size() + algebraic_index.size());
        for (std::size_t i = 0; i < differential_index.size(); ++i)
            x[differential_index[i]] = y[i];
        for (std::size_t i = 0; i < algebraic_index.size(); ++i) x[algebraic_index[i]] = z[i];
        return x;
    }
};

/// Splits unknowns by the zero rows of the mass matrix: rows with all
/// entries below 1e-14·max|M| become algebraic constraints. The remaining
/// principal block must be invertible and must not touch algebraic columns,
/// otherwise the automatic split fails with MixedRow. The explicit inverse
/// is affordable here because all systems are desk-scale.
inline ImplicitSplit from_linear_implicit(const DenseMatrix& mass, ImplicitRhs rhs, Vector x0,
                                          double t0 = 0.0) {
    if (mass.rows() != mass.cols())
        throw DimensionMismatch("from_linear_implicit: mass matrix not square");
    const std::size_t n = mass.rows();
    if (x0.size() != n) throw DimensionMismatch("from_linear_implicit: x0 length mismatch");
    const double threshold = 1e-14 * max_abs(mass);
    ImplicitSplit out;
    for (std::size_t i = 0; i < n; ++i) {
        double row_max = 0.0;
        for (std::size_t j = 0; j < n; ++j) row_max = std::max(row_max, std::abs(mass(i, j)));
        if (row_max < threshold || row_max == 0.0)
            out.algebraic_index.push_back(i);
        else
            out.differential_index.push_back(i);
    }
    const auto di = out.differential_index;
    const auto ai = out.algebraic_index;
    const std::size_t nd = di.size(), na = ai.size();
    // differential rows must not carry mass on algebraic columns
    for (std::size_t r : di)
        for (std::size_t c : ai)
            if (std::abs(mass(r, c)) >= threshold)
                throw MixedRow("from_linear_implicit: row " + std::to_string(r) +
                                   " couples d/dt of an algebraic unknown; supply an explicit "
                                   "permutation",
                               r);
    DenseMatrix mdd(nd, nd);
    for (std::size_t i = 0; i < nd; ++i)
        for (std::size_t j = 0; j < nd; ++j) mdd(i, j) = mass(di[i], di[j]);
    std::shared_ptr<const LuFactors> mdd_lu;
    if (nd > 0) {
        try {
            mdd_lu = std::make_shared<const LuFactors>(lu_factor(mdd));
        } catch (const SingularMatrix&) {
            throw MixedRow(
                "from_linear_implicit: nonzero mass rows do not form an invertible block",
                di.front());
        }
    }
    auto scatter = [di, ai](const Vector& y, const Vector& z) {
        Vector x(di.size() + ai.size());
        for (std::size_t i = 0; i < di.size(); ++i) x[di[i]] = y[i];
        for (std::size_t i = 0; i < ai.size(); ++i) x[ai[i]] = z[i];
        return x;
    };
    SemiExplicitSystem sys;
    sys.name = "implicit";
    sys.ny = nd;
    sys.nz = na;
    sys.f = [rhs, scatter, mdd_lu, di](double t, const Vector& y, const Vector& z,
                                       const PortValues& in) {
        const Vector fx = rhs(t, scatter(y, z), in);
        Vector fd(di.size());
        for (std::size_t i = 0; i < di.size(); ++i) fd[i] = fx[di[i]];
        return lu_solve_factored(*mdd_lu, fd);
    };
    sys.g = [rhs, scatter, ai](double t, const Vector& y, const Vector& z,
                               const PortValues& in) {
        const Vector fx = rhs(t, scatter(y, z), in);
        Vector ga(ai.size());
        for (std::size_t i = 0; i < ai.size(); ++i) ga[i] = fx[ai[i]];
        return ga;
    };
    sys.y0.resize(nd);
    for (std::size_t i = 0; i < nd; ++i) sys.y0[i] = x0[di[i]];
    Vector z_guess(na);
    for (std::size_t i = 0; i < na; ++i) z_guess[i] = x0[ai[i]];
    sys.z0 = make_consistent(sys, t0, sys.y0, std::move(z_guess), PortValues{});
    out.system = std::move(sys);
    return out;
}

// ---------------------------------------------------------------------------
// lower_second_order: M x'' = f(t, x)  →  first-order semi-explicit form
// ---------------------------------------------------------------------------

/// Doubles the state to (x, w) with x' = w, w' = M⁻¹ f(t, x).
inline SemiExplicitSystem lower_second_order(const DenseMatrix& mass, ImplicitRhs force,
                                             const Vector& x0, const Vector& v0) {
    if (mass.rows() != mass.cols())
        throw DimensionMismatch("lower_second_order: mass matrix not square");
    const std::size_t n = mass.rows();
    if (x0.size() != n || v0.size() != n)
        throw DimensionMismatch("lower_second_order: initial value length mismatch");
    std::shared_ptr<const LuFactors> lu;
    try {
        lu = std::make_shared<const LuFactors>(lu_factor(mass));
    } catch (const SingularMatrix&) {
        throw SingularMass("lower_second_order: singular mass matrix");
    }
    SemiExplicitSystem sys;
    sys.name = "second-order";
    sys.ny = 2 * n;
    sys.nz = 0;
    sys.f = [lu, force, n](double t, const Vector& y, const Vector&, const PortValues& in) {
        const Vector x(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n));
        Vector out(2 * n);
        for (std::size_t i = 0; i < n; ++i) out[i] = y[n + i];  // x' = w
        const Vector acc = lu_solve_factored(*lu, force(t, x, in));
        for (std::size_t i = 0; i < n; ++i) out[n + i] = acc[i];
        return out;
    };
    sys.y0.resize(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        sys.y0[i] = x0[i];
        sys.y0[n + i] = v0[i];
    }
    return sys;
}

}  // namespace cosim
