#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "gaplab/sym_eig.hpp"
#include "gaplab/vec.hpp"

namespace gaplab {

// Column-orthonormal basis of a k-dimensional subspace of R^D.
// An empty column list is a valid rank-0 basis.
struct OrthonormalBasis {
    std::vector<Vec> columns;

    int rank() const { return static_cast<int>(columns.size()); }
    bool empty() const { return columns.empty(); }
};

// Gram matrix G_ij = <z_i, z_j>. An empty list yields a 0x0 matrix.
inline SymMatrix gram(const std::vector<Vec>& Z) {
    const int k = static_cast<int>(Z.size());
    SymMatrix G(k);
    for (int i = 0; i < k; ++i)
        for (int j = i; j < k; ++j) G.set(i, j, dot(Z[i], Z[j]));
    return G;
}

// Orthonormal basis for the span of Z via the Gram route:
// Q = Z V Omega^{-1/2}, keeping eigenpairs with omega >= rel_threshold * omega_max.
// A final Gram-Schmidt polish enforces the orthonormality invariant
// even for badly conditioned buffers; the span is unchanged.
inline OrthonormalBasis orthonormalize_buffer(const std::vector<Vec>& Z, double rel_threshold) {
    if (!(rel_threshold > 0.0 && rel_threshold < 1.0))
        throw std::invalid_argument("orthonormalize_buffer: rel_threshold must be in (0,1)");

    OrthonormalBasis basis;
    if (Z.empty()) return basis;

    const EigenPairs ep = sym_eig(gram(Z));
    const double omega_max = ep.eigenvalues.empty() ? 0.0 : ep.eigenvalues.front();
    if (!(omega_max > 0.0)) return basis;  // all-zero buffer: rank 0

    const std::size_t D = Z.front().size();
    for (int r = 0; r < ep.count(); ++r) {
        const double omega = ep.eigenvalues[r];
        if (omega < rel_threshold * omega_max || omega <= 0.0) break;
        Vec q(D, 0.0);
        const double inv_sqrt = 1.0 / std::sqrt(omega);
        for (std::size_t j = 0; j < Z.size(); ++j)
            axpy(ep.eigenvectors[r][j] * inv_sqrt, Z[j], q);

        // polish against the columns accepted so far
        for (const Vec& prev : basis.columns) axpy(-dot(prev, q), prev, q);
        const double nq = norm(q);
        if (nq <= 0.0) continue;
        scale(q, 1.0 / nq);
        basis.columns.push_back(std::move(q));
    }
    return basis;
}

// Orthogonal projection Q Q^T v. Empty basis projects to zero.
inline Vec project(const OrthonormalBasis& Q, const Vec& v) {
    Vec p(v.size(), 0.0);
    for (const Vec& q : Q.columns) {
        if (q.size() != v.size())
            throw std::invalid_argument("project: dimension mismatch between basis and vector");
        axpy(dot(q, v), q, p);
    }
    return p;
}

// (I - Q Q^T) v
inline Vec project_complement(const OrthonormalBasis& Q, const Vec& v) {
    return sub(v, project(Q, v));
}

}  // namespace gaplab
