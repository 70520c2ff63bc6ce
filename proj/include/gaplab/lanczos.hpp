#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "gaplab/rng.hpp"
#include "gaplab/sym_eig.hpp"
#include "gaplab/vec.hpp"

namespace gaplab {

using LinearOperator = std::function<Vec(const Vec&)>;

struct LanczosResult {
    EigenPairs pairs;                // top-k Ritz pairs, eigenvalues descending
    std::vector<double> residuals;   // ||H v - lambda v|| per pair
    bool converged = true;
};

namespace detail {

inline Vec random_unit_vector(int dim, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec v(dim);
    for (double& x : v) x = gauss(rng);
    const double n = norm(v);
    for (double& x : v) x /= n;
    return v;
}

inline void orthogonalize_against(const std::vector<Vec>& basis, Vec& w) {
    for (const Vec& q : basis) axpy(-dot(q, w), q, w);
}

}  // namespace detail

// Lanczos iteration with full reorthogonalization over a matrix-free
// symmetric operator. On breakdown (invariant subspace found) the
// iteration restarts with a fresh random direction, leaving a zero
// coupling in the tridiagonal matrix.
inline LanczosResult lanczos_top_k(const LinearOperator& hvp, int dim, int k, int max_iters,
                                   std::uint64_t seed) {
    if (k < 1 || k > max_iters || max_iters > dim)
        throw std::invalid_argument("lanczos_top_k: require 1 <= k <= max_iters <= dim");

    auto rng = make_rng(seed, 0x1a2cULL);
    std::vector<Vec> basis;  // Krylov vectors, kept for full reorthogonalization
    std::vector<double> alpha, beta;  // tridiagonal entries; beta[j] couples v_j and v_{j+1}

    Vec v = detail::random_unit_vector(dim, rng);
    basis.push_back(v);

    const double breakdown_tol = 1e-12;
    for (int j = 0; j < max_iters; ++j) {
        Vec w = hvp(basis[j]);
        if (static_cast<int>(w.size()) != dim)
            throw std::invalid_argument("lanczos_top_k: operator changed dimension");
        if (!all_finite(w))
            throw std::runtime_error("lanczos_top_k: operator returned non-finite values at iteration " +
                                     std::to_string(j));
        const double a = dot(w, basis[j]);
        alpha.push_back(a);
        if (j + 1 == max_iters) break;

        // full reorthogonalization, twice for safety
        detail::orthogonalize_against(basis, w);
        detail::orthogonalize_against(basis, w);
        double b = norm(w);
        if (b <= breakdown_tol * std::max(1.0, std::fabs(a))) {
            if (static_cast<int>(basis.size()) >= dim) break;
            // exact invariant subspace: restart in its complement
            Vec fresh = detail::random_unit_vector(dim, rng);
            detail::orthogonalize_against(basis, fresh);
            const double nf = norm(fresh);
            if (nf <= breakdown_tol) break;
            scale(fresh, 1.0 / nf);
            beta.push_back(0.0);
            basis.push_back(std::move(fresh));
            continue;
        }
        scale(w, 1.0 / b);
        beta.push_back(b);
        basis.push_back(std::move(w));
    }

    const int m = static_cast<int>(alpha.size());
    SymMatrix T(m);
    for (int i = 0; i < m; ++i) T.set(i, i, alpha[i]);
    for (int i = 0; i + 1 < m; ++i) T.set(i, i + 1, beta[i]);
    const EigenPairs tp = sym_eig(T);

    LanczosResult out;
    const int keep = std::min(k, m);
    const double lam1 = tp.eigenvalues.empty() ? 0.0 : std::fabs(tp.eigenvalues.front());
    for (int r = 0; r < keep; ++r) {
        Vec y(dim, 0.0);
        for (int j = 0; j < m; ++j) axpy(tp.eigenvectors[r][j], basis[j], y);
        const double ny = norm(y);
        if (ny > 0) scale(y, 1.0 / ny);
        canonicalize_sign(y);

        Vec hy = hvp(y);
        Vec resid = hy;
        axpy(-tp.eigenvalues[r], y, resid);
        const double res = norm(resid);

        out.pairs.eigenvalues.push_back(tp.eigenvalues[r]);
        out.pairs.eigenvectors.push_back(std::move(y));
        out.residuals.push_back(res);
        if (res > 1e-6 * std::max(1.0, lam1)) out.converged = false;
    }
    if (keep < k) out.converged = false;
    return out;
}

}  // namespace gaplab
