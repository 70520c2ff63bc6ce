#include <doctest.h>

#include <cmath>
#include <random>

#include "gaplab/basis.hpp"
#include "gaplab/lanczos.hpp"
#include "gaplab/sym_eig.hpp"

using namespace gaplab;

namespace {

SymMatrix random_symmetric(int n, std::uint64_t seed) {
    auto rng = make_rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    SymMatrix A(n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) A.set(i, j, gauss(rng));
    return A;
}

Vec matvec(const SymMatrix& A, const Vec& v) {
    Vec out(A.size(), 0.0);
    for (int i = 0; i < A.size(); ++i)
        for (int j = 0; j < A.size(); ++j) out[i] += A(i, j) * v[j];
    return out;
}

// Independent eigenvalue oracle: unshifted QR iteration with
// Gram-Schmidt factorization. Eigenvalues only; slow but simple.
std::vector<double> qr_eigenvalue_oracle(const SymMatrix& A, int iters = 20000) {
    const int n = A.size();
    std::vector<Vec> M(n, Vec(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) M[i][j] = A(i, j);

    for (int it = 0; it < iters; ++it) {
        // columns of M
        std::vector<Vec> cols(n, Vec(n));
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) cols[j][i] = M[i][j];
        std::vector<Vec> q(n);
        std::vector<std::vector<double>> R(n, std::vector<double>(n, 0.0));
        for (int j = 0; j < n; ++j) {
            Vec v = cols[j];
            for (int i = 0; i < j; ++i) {
                R[i][j] = dot(q[i], cols[j]);
                axpy(-R[i][j], q[i], v);
            }
            R[j][j] = norm(v);
            scale(v, 1.0 / R[j][j]);
            q[j] = v;
        }
        // M <- R Q
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double s = 0.0;
                for (int k = i; k < n; ++k) s += R[i][k] * q[j][k];
                M[i][j] = s;
            }
    }
    std::vector<double> ev(n);
    for (int i = 0; i < n; ++i) ev[i] = M[i][i];
    std::sort(ev.begin(), ev.end(), std::greater<>());
    return ev;
}

}  // namespace

TEST_CASE("sym_eig identity matrix") {
    SymMatrix I(3);
    for (int i = 0; i < 3; ++i) I.set(i, i, 1.0);
    const auto ep = sym_eig(I);
    for (double lam : ep.eigenvalues) CHECK(lam == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("sym_eig 2x2 closed form") {
    SymMatrix A(2);
    A.set(0, 0, 2.0);
    A.set(1, 1, 2.0);
    A.set(0, 1, 1.0);
    const auto ep = sym_eig(A);
    CHECK(ep.eigenvalues[0] == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(ep.eigenvalues[1] == doctest::Approx(1.0).epsilon(1e-14));
    const double s = 1.0 / std::sqrt(2.0);
    CHECK(ep.eigenvectors[0][0] == doctest::Approx(s).epsilon(1e-12));
    CHECK(ep.eigenvectors[0][1] == doctest::Approx(s).epsilon(1e-12));
    CHECK(ep.eigenvectors[1][0] == doctest::Approx(s).epsilon(1e-12));
    CHECK(ep.eigenvectors[1][1] == doctest::Approx(-s).epsilon(1e-12));
}

TEST_CASE("sym_eig matches QR iteration oracle on random 8x8") {
    const SymMatrix A = random_symmetric(8, 42);
    const auto ep = sym_eig(A);
    const auto oracle = qr_eigenvalue_oracle(A);
    for (int i = 0; i < 8; ++i)
        CHECK(ep.eigenvalues[i] == doctest::Approx(oracle[i]).epsilon(1e-8));
}

TEST_CASE("sym_eig reconstruction and orthonormality") {
    const SymMatrix A = random_symmetric(12, 7);
    const auto ep = sym_eig(A);
    // || A - V Omega V^T ||_F <= 1e-9 ||A||_F
    double err = 0.0;
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 12; ++j) {
            double rec = 0.0;
            for (int r = 0; r < 12; ++r)
                rec += ep.eigenvalues[r] * ep.eigenvectors[r][i] * ep.eigenvectors[r][j];
            err += (A(i, j) - rec) * (A(i, j) - rec);
        }
    CHECK(std::sqrt(err) <= 1e-9 * A.frobenius_norm());
    for (int r = 0; r < 12; ++r)
        for (int s = 0; s < 12; ++s)
            CHECK(std::fabs(dot(ep.eigenvectors[r], ep.eigenvectors[s]) - (r == s ? 1.0 : 0.0)) <=
                  1e-10);
}

TEST_CASE("sym_eig rejects non-finite input") {
    SymMatrix A(2);
    A.set(0, 1, std::nan(""));
    CHECK_THROWS_AS(sym_eig(A), std::invalid_argument);
}

TEST_CASE("sym_eig sign canonicalization is deterministic") {
    const SymMatrix A = random_symmetric(6, 11);
    const auto a = sym_eig(A);
    const auto b = sym_eig(A);
    for (int r = 0; r < 6; ++r) {
        double m = 0.0;
        int im = 0;
        for (int i = 0; i < 6; ++i)
            if (std::fabs(a.eigenvectors[r][i]) > m) m = std::fabs(a.eigenvectors[r][i]), im = i;
        CHECK(a.eigenvectors[r][im] > 0.0);
        for (int i = 0; i < 6; ++i) CHECK(a.eigenvectors[r][i] == b.eigenvectors[r][i]);
    }
}

TEST_CASE("gram matrix basics") {
    SUBCASE("orthonormal inputs give identity") {
        const auto G = gram({unit(3, 0), unit(3, 1)});
        CHECK(G(0, 0) == 1.0);
        CHECK(G(1, 1) == 1.0);
        CHECK(G(0, 1) == 0.0);
    }
    SUBCASE("rank-1 scaling") {
        Vec v = {1.0, 2.0, 2.0};  // ||v||^2 = 9
        const auto G = gram({v, scaled(v, 2.0)});
        CHECK(G(0, 0) == doctest::Approx(9.0));
        CHECK(G(0, 1) == doctest::Approx(18.0));
        CHECK(G(1, 1) == doctest::Approx(36.0));
    }
    SUBCASE("empty list gives 0x0") { CHECK(gram({}).size() == 0); }
    SUBCASE("entrywise dot-product oracle") {
        auto rng = make_rng(3);
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::vector<Vec> Z(5, Vec(20));
        for (auto& z : Z)
            for (double& x : z) x = gauss(rng);
        const auto G = gram(Z);
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) {
                double s = 0.0;
                for (int d = 0; d < 20; ++d) s += Z[i][d] * Z[j][d];
                CHECK(std::fabs(G(i, j) - s) <= 1e-12);
            }
    }
}

TEST_CASE("orthonormalize_buffer") {
    SUBCASE("single vector normalizes") {
        const auto Q = orthonormalize_buffer({scaled(unit(4, 0), 3.0)}, 1e-8);
        REQUIRE(Q.rank() == 1);
        CHECK(norm(sub(Q.columns[0], unit(4, 0))) <= 1e-12);
    }
    SUBCASE("exact duplicate collapses to rank 1") {
        Vec v = {1.0, -2.0, 0.5};
        const auto Q = orthonormalize_buffer({v, v}, 1e-8);
        REQUIRE(Q.rank() == 1);
        const Vec r = project_complement(Q, v);
        CHECK(norm(r) <= 1e-10 * norm(v));
    }
    SUBCASE("all-zero buffer gives empty basis") {
        CHECK(orthonormalize_buffer({zeros(5), zeros(5)}, 1e-8).rank() == 0);
    }
    SUBCASE("random buffer: orthonormality and reconstruction") {
        auto rng = make_rng(9);
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::vector<Vec> Z(6, Vec(50));
        for (auto& z : Z)
            for (double& x : z) x = gauss(rng);
        const auto Q = orthonormalize_buffer(Z, 1e-8);
        REQUIRE(Q.rank() == 6);
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j)
                CHECK(std::fabs(dot(Q.columns[i], Q.columns[j]) - (i == j ? 1.0 : 0.0)) <= 1e-8);
        for (const auto& z : Z) CHECK(norm(sub(project(Q, z), z)) <= 1e-6 * norm(z));
    }
    SUBCASE("ill conditioned buffer still yields orthonormal columns") {
        auto rng = make_rng(10);
        std::normal_distribution<double> gauss(0.0, 1.0);
        Vec v(30);
        for (double& x : v) x = gauss(rng);
        Vec w = v;
        for (double& x : w) x += 1e-7 * gauss(rng);  // near-duplicate
        const auto Q = orthonormalize_buffer({v, w}, 1e-12);
        for (int i = 0; i < Q.rank(); ++i)
            for (int j = 0; j < Q.rank(); ++j)
                CHECK(std::fabs(dot(Q.columns[i], Q.columns[j]) - (i == j ? 1.0 : 0.0)) <= 1e-8);
    }
    SUBCASE("rejects threshold outside (0,1)") {
        CHECK_THROWS_AS(orthonormalize_buffer({unit(2, 0)}, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(orthonormalize_buffer({unit(2, 0)}, 1.0), std::invalid_argument);
    }
}

TEST_CASE("project") {
    SUBCASE("axis projection") {
        OrthonormalBasis Q{{unit(2, 0)}};
        const Vec p = project(Q, {3.0, 4.0});
        CHECK(p[0] == 3.0);
        CHECK(p[1] == 0.0);
    }
    SUBCASE("empty basis projects to zero") {
        OrthonormalBasis Q;
        CHECK(norm(project(Q, {1.0, 2.0, 3.0})) == 0.0);
    }
    SUBCASE("idempotence, symmetry and contraction") {
        auto rng = make_rng(13);
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::vector<Vec> Z(4, Vec(30));
        for (auto& z : Z)
            for (double& x : z) x = gauss(rng);
        const auto Q = orthonormalize_buffer(Z, 1e-8);
        for (int trial = 0; trial < 10; ++trial) {
            Vec v(30), w(30);
            for (double& x : v) x = gauss(rng);
            for (double& x : w) x = gauss(rng);
            const Vec pv = project(Q, v);
            CHECK(norm(sub(project(Q, pv), pv)) <= 1e-12 * std::max(1.0, norm(pv)));
            CHECK(norm(pv) <= norm(v) * (1.0 + 1e-12));
            CHECK(std::fabs(dot(project(Q, v), w) - dot(v, project(Q, w))) <= 1e-10);
        }
    }
    SUBCASE("dimension mismatch rejected") {
        OrthonormalBasis Q{{unit(3, 0)}};
        CHECK_THROWS_AS(project(Q, {1.0, 2.0}), std::invalid_argument);
    }
}

TEST_CASE("lanczos on diagonal operator") {
    const int D = 20;
    std::vector<double> diag(D);
    diag[0] = 10.0;
    diag[1] = 5.0;
    for (int i = 2; i < D; ++i) diag[i] = 1.0 / (i + 1);
    auto op = [&](const Vec& v) {
        Vec out(D);
        for (int i = 0; i < D; ++i) out[i] = diag[i] * v[i];
        return out;
    };
    const auto res = lanczos_top_k(op, D, 2, D, 123);
    CHECK(res.converged);
    CHECK(res.pairs.eigenvalues[0] == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(res.pairs.eigenvalues[1] == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(std::fabs(res.pairs.eigenvectors[0][0]) == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(std::fabs(res.pairs.eigenvectors[1][1]) == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("lanczos agrees with dense eigensolver on D=64") {
    const SymMatrix A = random_symmetric(64, 99);
    const auto dense = sym_eig(A);
    const auto res = lanczos_top_k([&](const Vec& v) { return matvec(A, v); }, 64, 10, 64, 5);
    for (int r = 0; r < 10; ++r) {
        const double scale_ref = std::max(1.0, std::fabs(dense.eigenvalues[0]));
        CHECK(std::fabs(res.pairs.eigenvalues[r] - dense.eigenvalues[r]) <= 1e-6 * scale_ref);
    }
}

TEST_CASE("lanczos rank-1 outer product") {
    const int D = 12;
    Vec v(D, 0.0);
    v[2] = 2.0;  // ||v|| = 2, H = v v^T has top eigenvalue 4
    auto op = [&](const Vec& x) { return scaled(v, dot(v, x)); };
    const auto res = lanczos_top_k(op, D, 1, 4, 77);
    CHECK(res.pairs.eigenvalues[0] == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("lanczos rejects non-finite operator output") {
    auto op = [](const Vec& v) {
        Vec out = v;
        out[0] = std::nan("");
        return out;
    };
    CHECK_THROWS_AS(lanczos_top_k(op, 4, 1, 4, 1), std::runtime_error);
}

TEST_CASE("lanczos parameter validation") {
    auto op = [](const Vec& v) { return v; };
    CHECK_THROWS_AS(lanczos_top_k(op, 4, 0, 4, 1), std::invalid_argument);
    CHECK_THROWS_AS(lanczos_top_k(op, 4, 5, 4, 1), std::invalid_argument);
    CHECK_THROWS_AS(lanczos_top_k(op, 4, 2, 5, 1), std::invalid_argument);
}
