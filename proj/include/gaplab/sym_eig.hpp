#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "gaplab/vec.hpp"

namespace gaplab {

// Dense symmetric k x k matrix. Writes mirror across the diagonal so
// the stored data is symmetric by construction.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(int n) : n_(n), a_(static_cast<std::size_t>(n) * n, 0.0) {}

    int size() const { return n_; }

    double operator()(int i, int j) const { return a_[idx(i, j)]; }

    void set(int i, int j, double v) {
        a_[idx(i, j)] = v;
        a_[idx(j, i)] = v;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (double v : a_) s += v * v;
        return std::sqrt(s);
    }

    bool all_finite() const {
        for (double v : a_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i) * n_ + j; }

    int n_ = 0;
    std::vector<double> a_;
};

// Full spectrum of a symmetric matrix: eigenvalues descending,
// eigenvectors orthonormal columns, signs canonicalized so the
// largest-magnitude entry of each vector is positive.
struct EigenPairs {
    std::vector<double> eigenvalues;
    std::vector<Vec> eigenvectors;

    int count() const { return static_cast<int>(eigenvalues.size()); }
};

inline void canonicalize_sign(Vec& v) {
    std::size_t imax = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (std::fabs(v[i]) > std::fabs(v[imax])) imax = i;
    if (!v.empty() && v[imax] < 0.0)
        for (double& x : v) x = -x;
}

// Cyclic Jacobi eigensolver. Intended for small matrices (Gram
// matrices, Lanczos tridiagonals, dense test matrices), k <= 256.
inline EigenPairs sym_eig(const SymMatrix& A) {
    if (!A.all_finite()) throw std::invalid_argument("sym_eig: non-finite entry in input matrix");
    const int n = A.size();
    if (n > 256) throw std::invalid_argument("sym_eig: matrix larger than supported 256");

    EigenPairs out;
    if (n == 0) return out;

    // Work on a mutable copy; accumulate rotations in V.
    std::vector<double> a(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a[static_cast<std::size_t>(i) * n + j] = A(i, j);
    std::vector<double> V(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) V[static_cast<std::size_t>(i) * n + i] = 1.0;

    auto at = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i) * n + j]; };
    auto vat = [&](int i, int j) -> double& { return V[static_cast<std::size_t>(i) * n + j]; };

    double diag_sq = 0.0;
    for (int i = 0; i < n; ++i) diag_sq += at(i, i) * at(i, i);
    const double fro = A.frobenius_norm();
    const double stop = 1e-30 * std::max(1.0, fro * fro);

    const int max_sweeps = 64;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += at(p, q) * at(p, q);
        if (off <= stop) break;

        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = at(p, q);
                if (std::fabs(apq) <= 1e-300) continue;
                const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const double tau = s / (1.0 + c);

                const double app = at(p, p), aqq = at(q, q);
                at(p, p) = app - t * apq;
                at(q, q) = aqq + t * apq;
                at(p, q) = 0.0;
                at(q, p) = 0.0;
                for (int r = 0; r < n; ++r) {
                    if (r != p && r != q) {
                        const double arp = at(r, p), arq = at(r, q);
                        at(r, p) = at(p, r) = arp - s * (arq + tau * arp);
                        at(r, q) = at(q, r) = arq + s * (arp - tau * arq);
                    }
                    const double vrp = vat(r, p), vrq = vat(r, q);
                    vat(r, p) = vrp - s * (vrq + tau * vrp);
                    vat(r, q) = vrq + s * (vrp - tau * vrq);
                }
            }
        }
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) { return at(i, i) > at(j, j); });

    out.eigenvalues.resize(n);
    out.eigenvectors.resize(n);
    for (int k = 0; k < n; ++k) {
        const int src = order[k];
        out.eigenvalues[k] = at(src, src);
        Vec v(n);
        for (int r = 0; r < n; ++r) v[r] = vat(r, src);
        canonicalize_sign(v);
        out.eigenvectors[k] = std::move(v);
    }
    return out;
}

}  // namespace gaplab
