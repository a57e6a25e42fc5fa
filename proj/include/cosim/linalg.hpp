#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "cosim/errors.hpp"

namespace cosim {

using Vector = std::vector<double>;

/// Dense row-major matrix. Everything in this project is desk-scale, so
/// dense storage is the default; tridiagonal systems from the 1D models
/// get a dedicated fast path (solve_tridiagonal).
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), a_(rows * cols, fill) {}

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

    const std::vector<double>& data() const { return a_; }
    std::vector<double>& data() { return a_; }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> a_;
};

inline double norm_inf(const Vector& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline double norm_2(const Vector& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline double max_abs(const DenseMatrix& a) {
    double m = 0.0;
    for (double x : a.data()) m = std::max(m, std::abs(x));
    return m;
}

inline double norm_frobenius(const DenseMatrix& a) {
    double s = 0.0;
    for (double x : a.data()) s += x * x;
    return std::sqrt(s);
}

/// Row-sum norm, the natural companion of the residual bound in lu_solve.
inline double norm_inf_mat(const DenseMatrix& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += std::abs(a(i, j));
        m = std::max(m, s);
    }
    return m;
}

inline bool all_finite(const Vector& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline bool all_finite(const DenseMatrix& a) {
    return std::all_of(a.data().begin(), a.data().end(),
                       [](double x) { return std::isfinite(x); });
}

inline DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) throw DimensionMismatch("multiply: inner dimensions differ");
    DenseMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

inline Vector multiply(const DenseMatrix& a, const Vector& x) {
    if (a.cols() != x.size()) throw DimensionMismatch("multiply: size mismatch");
    Vector y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

// ---------------------------------------------------------------------------
// LU factorization with partial pivoting
// ---------------------------------------------------------------------------

struct LuFactors {
    DenseMatrix lu;          // packed L (unit diagonal) and U
    std::vector<std::size_t> perm;  // row permutation applied to the input
};

/// Pivot magnitudes are judged against the original scale of their row;
/// a pivot below 1e-14 of that scale reports the matrix as singular.
inline LuFactors lu_factor(DenseMatrix a) {
    if (a.rows() != a.cols()) throw DimensionMismatch("lu_factor: matrix not square");
    const std::size_t n = a.rows();
    std::vector<double> scale(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) scale[i] = std::max(scale[i], std::abs(a(i, j)));
        if (scale[i] == 0.0) throw SingularMatrix("lu_factor: zero row " + std::to_string(i));
    }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        double best = std::abs(a(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            const double v = std::abs(a(i, k));
            if (v > best) { best = v; p = i; }
        }
        if (p != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
            std::swap(perm[k], perm[p]);
            std::swap(scale[k], scale[p]);
        }
        if (std::abs(a(k, k)) < 1e-14 * scale[k])
            throw SingularMatrix("lu_factor: pivot " + std::to_string(k) +
                                 " below 1e-14 of row magnitude");
        const double inv = 1.0 / a(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double m = a(i, k) * inv;
            a(i, k) = m;
            if (m == 0.0) continue;
            for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= m * a(k, j);
        }
    }
    return LuFactors{std::move(a), std::move(perm)};
}

inline Vector lu_solve_factored(const LuFactors& f, const Vector& b) {
    const std::size_t n = f.lu.rows();
    if (b.size() != n) throw DimensionMismatch("lu_solve: rhs length mismatch");
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[f.perm[i]];
    for (std::size_t i = 1; i < n; ++i) {
        double s = x[i];
        for (std::size_t j = 0; j < i; ++j) s -= f.lu(i, j) * x[j];
        x[i] = s;
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = x[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= f.lu(i, j) * x[j];
        x[i] = s / f.lu(i, i);
    }
    return x;
}

inline Vector lu_solve(const DenseMatrix& a, const Vector& b) {
    return lu_solve_factored(lu_factor(a), b);
}

/// Columns of the inverse, used for condition estimates on small systems.
inline DenseMatrix lu_inverse(const DenseMatrix& a) {
    const std::size_t n = a.rows();
    const LuFactors f = lu_factor(a);
    DenseMatrix inv(n, n);
    Vector e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        e[j] = 1.0;
        const Vector col = lu_solve_factored(f, e);
        for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
        e[j] = 0.0;
    }
    return inv;
}

// ---------------------------------------------------------------------------
// Tridiagonal fast path (Thomas with partial pivoting, one fill diagonal)
// ---------------------------------------------------------------------------

/// Solves T x = rhs for a tridiagonal T given by its sub-, main and
/// super-diagonals (sizes n-1, n, n-1).
inline Vector solve_tridiagonal(Vector sub, Vector diag, Vector super, Vector rhs) {
    const std::size_t n = diag.size();
    if (sub.size() + 1 != n || super.size() + 1 != n || rhs.size() != n)
        throw DimensionMismatch("solve_tridiagonal: band sizes inconsistent");
    if (n == 0) return {};
    Vector fill(n > 2 ? n - 2 : 0, 0.0);  // second superdiagonal created by pivoting
    double scale = 0.0;
    for (double v : diag) scale = std::max(scale, std::abs(v));
    for (double v : sub) scale = std::max(scale, std::abs(v));
    for (double v : super) scale = std::max(scale, std::abs(v));
    for (std::size_t k = 0; k + 1 < n; ++k) {
        if (std::abs(sub[k]) > std::abs(diag[k])) {
            std::swap(diag[k], sub[k]);
            std::swap(super[k], diag[k + 1]);
            if (k + 2 < n) std::swap(fill[k], super[k + 1]);
            std::swap(rhs[k], rhs[k + 1]);
        }
        if (std::abs(diag[k]) < 1e-14 * scale)
            throw SingularMatrix("solve_tridiagonal: negligible pivot");
        const double m = sub[k] / diag[k];
        diag[k + 1] -= m * super[k];
        if (k + 2 < n) super[k + 1] -= m * fill[k];
        rhs[k + 1] -= m * rhs[k];
    }
    if (std::abs(diag[n - 1]) < 1e-14 * scale)
        throw SingularMatrix("solve_tridiagonal: negligible pivot");
    Vector x(n);
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    if (n >= 2) {
        const std::size_t i = n - 2;
        x[i] = (rhs[i] - super[i] * x[i + 1]) / diag[i];
    }
    for (std::size_t ii = n >= 3 ? n - 2 : 0; ii-- > 0;) {
        x[ii] = (rhs[ii] - super[ii] * x[ii + 1] - fill[ii] * x[ii + 2]) / diag[ii];
    }
    return x;
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition (cyclic Jacobi) and thin SVD
// ---------------------------------------------------------------------------

struct SymmetricEig {
    Vector values;        // descending
    DenseMatrix vectors;  // columns match values
};

/// Cyclic Jacobi for small symmetric matrices (the Gram matrices of the
/// method of snapshots are m×m with m = snapshot count).
inline SymmetricEig symmetric_eig(DenseMatrix a) {
    if (a.rows() != a.cols()) throw DimensionMismatch("symmetric_eig: not square");
    const std::size_t n = a.rows();
    DenseMatrix v = DenseMatrix::identity(n);
    const double scale = max_abs(a);
    if (scale > 0.0) {
        for (int sweep = 0; sweep < 100; ++sweep) {
            double off = 0.0;
            for (std::size_t p = 0; p < n; ++p)
                for (std::size_t q = p + 1; q < n; ++q) off = std::max(off, std::abs(a(p, q)));
            if (off <= 1e-15 * scale) break;
            for (std::size_t p = 0; p < n; ++p) {
                for (std::size_t q = p + 1; q < n; ++q) {
                    const double apq = a(p, q);
                    if (std::abs(apq) <= 1e-18 * scale) continue;
                    const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                    const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                     (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                    const double c = 1.0 / std::sqrt(t * t + 1.0);
                    const double s = t * c;
                    for (std::size_t k = 0; k < n; ++k) {
                        const double akp = a(k, p), akq = a(k, q);
                        a(k, p) = c * akp - s * akq;
                        a(k, q) = s * akp + c * akq;
                    }
                    for (std::size_t k = 0; k < n; ++k) {
                        const double apk = a(p, k), aqk = a(q, k);
                        a(p, k) = c * apk - s * aqk;
                        a(q, k) = s * apk + c * aqk;
                    }
                    for (std::size_t k = 0; k < n; ++k) {
                        const double vkp = v(k, p), vkq = v(k, q);
                        v(k, p) = c * vkp - s * vkq;
                        v(k, q) = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
    SymmetricEig out;
    out.values.resize(n);
    out.vectors = DenseMatrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = a(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
    }
    return out;
}

struct ThinSvd {
    DenseMatrix u;  // n×m, orthonormal columns
    Vector sigma;   // m, non-negative, descending
};

namespace detail {

/// Appends orthonormal columns drawn from the canonical basis to fill the
/// columns of u starting at `from`, Gram-Schmidt against what is there.
inline void complete_orthonormal(DenseMatrix& u, std::size_t from) {
    const std::size_t n = u.rows(), m = u.cols();
    std::size_t next_axis = 0;
    for (std::size_t col = from; col < m; ++col) {
        for (; next_axis < n; ++next_axis) {
            Vector cand(n, 0.0);
            cand[next_axis] = 1.0;
            for (std::size_t j = 0; j < col; ++j) {
                double dot = 0.0;
                for (std::size_t i = 0; i < n; ++i) dot += u(i, j) * cand[i];
                for (std::size_t i = 0; i < n; ++i) cand[i] -= dot * u(i, j);
            }
            const double nrm = norm_2(cand);
            if (nrm > 0.5) {  // canonical vector mostly outside the current span
                for (std::size_t i = 0; i < n; ++i) u(i, col) = cand[i] / nrm;
                ++next_axis;
                break;
            }
        }
    }
}

}  // namespace detail

/// Thin SVD by the method of snapshots: eigendecomposition of SᵀS.
/// Chosen because the MOR use case has snapshot count m far below n.
inline ThinSvd thin_svd(const DenseMatrix& s) {
    const std::size_t n = s.rows(), m = s.cols();
    if (m > n) throw DimensionMismatch("thin_svd: needs rows >= cols");
    DenseMatrix gram(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i; j < m; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < n; ++k) dot += s(k, i) * s(k, j);
            gram(i, j) = dot;
            gram(j, i) = dot;
        }
    const SymmetricEig eig = symmetric_eig(gram);
    ThinSvd out;
    out.sigma.resize(m);
    out.u = DenseMatrix(n, m);
    const double lam_max = m > 0 ? std::max(eig.values[0], 0.0) : 0.0;
    std::size_t rank = 0;
    for (std::size_t j = 0; j < m; ++j) {
        const double lam = std::max(eig.values[j], 0.0);
        out.sigma[j] = std::sqrt(lam);
        if (lam > 1e-26 * lam_max && lam > 0.0) rank = j + 1;
    }
    for (std::size_t j = 0; j < rank; ++j) {
        Vector col(n, 0.0);
        for (std::size_t k = 0; k < m; ++k) {
            const double vkj = eig.vectors(k, j);
            if (vkj == 0.0) continue;
            for (std::size_t i = 0; i < n; ++i) col[i] += s(i, k) * vkj;
        }
        // re-orthonormalize against previous columns; the Gram route loses
        // orthogonality for clustered small singular values
        for (std::size_t jj = 0; jj < j; ++jj) {
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i) dot += out.u(i, jj) * col[i];
            for (std::size_t i = 0; i < n; ++i) col[i] -= dot * out.u(i, jj);
        }
        const double nrm = norm_2(col);
        if (nrm == 0.0) { rank = j; break; }
        for (std::size_t i = 0; i < n; ++i) out.u(i, j) = col[i] / nrm;
    }
    detail::complete_orthonormal(out.u, rank);
    for (std::size_t j = rank; j < m; ++j) out.sigma[j] = std::max(out.sigma[j], 0.0);
    return out;
}

// ---------------------------------------------------------------------------
// Spectral norm via power iteration on AᵀA
// ---------------------------------------------------------------------------

struct NormEstimate {
    double value = 0.0;
    bool converged = true;
    int iterations = 0;
};

inline NormEstimate operator_norm_estimate(const DenseMatrix& a, double rel_tol = 1e-8,
                                           int max_iterations = 500) {
    NormEstimate est;
    if (a.rows() == 0 || a.cols() == 0 || norm_frobenius(a) == 0.0) return est;
    const std::size_t n = a.cols();
    Vector x(n);
    // deterministic quasi-random start; avoids symmetry traps of all-ones
    unsigned long long state = 0x243f6a8885a308d3ull;
    for (std::size_t i = 0; i < n; ++i) {
        state = state * 6364136223846793005ull + 1442695040888963407ull;
        x[i] = 0.5 + static_cast<double>(state >> 11) / 9.0e18;
    }
    double nx = norm_2(x);
    for (double& v : x) v /= nx;
    double prev = 0.0;
    for (int it = 1; it <= max_iterations; ++it) {
        Vector ax = multiply(a, x);
        double s = norm_2(ax);
        if (s == 0.0) {
            // start vector happened to lie in the kernel: restart on an axis
            bool restarted = false;
            for (std::size_t j = 0; j < n && !restarted; ++j) {
                std::fill(x.begin(), x.end(), 0.0);
                x[j] = 1.0;
                ax = multiply(a, x);
                s = norm_2(ax);
                restarted = s > 0.0;
            }
            if (!restarted) return est;  // zero matrix, handled above anyway
        }
        est.value = s;
        est.iterations = it;
        if (it > 1 && std::abs(s - prev) <= rel_tol * s) return est;
        prev = s;
        Vector y(n, 0.0);  // y = Aᵀ(Ax)
        for (std::size_t i = 0; i < a.rows(); ++i) {
            const double axi = ax[i];
            if (axi == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) y[j] += a(i, j) * axi;
        }
        const double ny = norm_2(y);
        if (ny == 0.0) return est;
        for (std::size_t j = 0; j < n; ++j) x[j] = y[j] / ny;
    }
    est.converged = false;  // stalled: best estimate with flag
    return est;
}

inline double operator_norm(const DenseMatrix& a) { return operator_norm_estimate(a).value; }

}  // namespace cosim
