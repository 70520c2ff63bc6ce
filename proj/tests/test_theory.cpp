#include <doctest.h>

#include <cmath>
#include <vector>

#include "gaplab/quadratic.hpp"
#include "gaplab/theory.hpp"

using namespace gaplab;

namespace {

using Mat = std::vector<Vec>;  // row-major dense

Mat matmul(const Mat& A, const Mat& B) {
    const int n = static_cast<int>(A.size());
    Mat C(n, zeros(n));
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k)
            for (int j = 0; j < n; ++j) C[i][j] += A[i][k] * B[k][j];
    return C;
}

Mat identity(int n) {
    Mat I(n, zeros(n));
    for (int i = 0; i < n; ++i) I[i][i] = 1.0;
    return I;
}

Mat transpose(const Mat& A) {
    const int n = static_cast<int>(A.size());
    Mat T(n, zeros(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) T[j][i] = A[i][j];
    return T;
}

// Independent oracle: eta^2 (1 - 1/M) sum_{q<tau} (I - eta H)^q Sigma (I - eta H)^q
// built from explicit dense matrix powers.
Mat covariance_by_matrix_powers(const std::vector<double>& lambda, const std::vector<Vec>& U,
                                const std::vector<double>& sigma_sq, double eta, int tau, int M) {
    const int D = static_cast<int>(lambda.size());
    // H = sum_r lambda_r u_r u_r^T ; Sigma = sum_r sigma_r^2 u_r u_r^T
    Mat H(D, zeros(D)), Sigma(D, zeros(D));
    for (int r = 0; r < D; ++r)
        for (int i = 0; i < D; ++i)
            for (int j = 0; j < D; ++j) {
                H[i][j] += lambda[r] * U[r][i] * U[r][j];
                Sigma[i][j] += sigma_sq[r] * U[r][i] * U[r][j];
            }
    Mat A = identity(D);  // I - eta H
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) A[i][j] -= eta * H[i][j];

    Mat total(D, zeros(D));
    Mat Aq = identity(D);
    for (int q = 0; q < tau; ++q) {
        const Mat term = matmul(matmul(Aq, Sigma), transpose(Aq));
        for (int i = 0; i < D; ++i)
            for (int j = 0; j < D; ++j) total[i][j] += term[i][j];
        Aq = matmul(Aq, A);
    }
    const double pref = eta * eta * (1.0 - 1.0 / M);
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) total[i][j] *= pref;
    return total;
}

}  // namespace

TEST_CASE("psi closed form") {
    CHECK(psi(1, 0.7) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(psi(5, 0.0) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(psi(2, 0.5) == doctest::Approx(1.25).epsilon(1e-15));
    // a = 2 makes (1-a)^2 = 1 again: psi = tau exactly
    CHECK(psi(7, 2.0) == doctest::Approx(7.0).epsilon(1e-15));
    // generic point against the definition
    double s = 0.0;
    for (int q = 0; q < 6; ++q) s += std::pow((1.0 - 0.3) * (1.0 - 0.3), q);
    CHECK(psi(6, 0.3) == doctest::Approx(s).epsilon(1e-14));
    CHECK_THROWS_AS(psi(0, 0.5), std::invalid_argument);
}

TEST_CASE("tau=1 prediction is the scaled noise covariance") {
    const int D = 4;
    QuadraticModel m(logspace_spectrum(D, 0.2, 1.0), 21, zeros(D), 0.3, 1.5);
    std::vector<double> sigma_sq(D);
    for (int r = 0; r < D; ++r) sigma_sq[r] = m.noise_variance(r);
    const double eta = 0.1;
    const auto pred = predicted_gap_covariance(*m.exact_hessian_eigenpairs(), sigma_sq, eta, 1, 4);

    // eta^2 * (1 - 1/4) * Sigma
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) {
            double sij = 0.0;
            for (int r = 0; r < D; ++r)
                sij += sigma_sq[r] * m.eigenbasis()[r][i] * m.eigenbasis()[r][j];
            CHECK(pred.matrix(i, j) ==
                  doctest::Approx(eta * eta * 0.75 * sij).epsilon(1e-12));
        }
}

TEST_CASE("prediction matches the explicit matrix-power sum") {
    const int D = 3;
    const std::vector<double> lambda{2.0, 1.0, 0.25};
    QuadraticModel m(lambda, 31, zeros(D), 0.2, 1.0);
    std::vector<double> sigma_sq(D);
    for (int r = 0; r < D; ++r) sigma_sq[r] = m.noise_variance(r);
    const double eta = 0.3;
    const int tau = 6, M = 4;

    const auto pred = predicted_gap_covariance(*m.exact_hessian_eigenpairs(), sigma_sq, eta, tau, M);
    const Mat oracle =
        covariance_by_matrix_powers(lambda, m.eigenbasis(), sigma_sq, eta, tau, M);
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j)
            CHECK(pred.matrix(i, j) == doctest::Approx(oracle[i][j]).epsilon(1e-10));
}

TEST_CASE("prediction is PSD and grows with tau in the stable regime") {
    const int D = 5;
    QuadraticModel m(logspace_spectrum(D, 0.1, 1.0), 8, zeros(D), 0.5, 2.0);
    std::vector<double> sigma_sq(D);
    for (int r = 0; r < D; ++r) sigma_sq[r] = m.noise_variance(r);
    const double eta = 0.4;  // eta * lambda_1 = 0.4 < 2

    const auto p2 = predicted_gap_covariance(*m.exact_hessian_eigenpairs(), sigma_sq, eta, 2, 4);
    const auto p8 = predicted_gap_covariance(*m.exact_hessian_eigenpairs(), sigma_sq, eta, 8, 4);
    CHECK_FALSE(p2.divergent_dynamics);

    const auto ep = sym_eig(p8.matrix);
    for (double w : ep.eigenvalues) CHECK(w >= -1e-12);
    for (int r = 0; r < D; ++r) CHECK(p8.direction_variances[r] >= p2.direction_variances[r]);
}

TEST_CASE("divergent dynamics flag") {
    QuadraticModel m({3.0, 1.0}, QuadraticModel::identity_basis(2), zeros(2), 0.1, 2.0);
    std::vector<double> sigma_sq{m.noise_variance(0), m.noise_variance(1)};
    const auto p = predicted_gap_covariance(*m.exact_hessian_eigenpairs(), sigma_sq, 0.7, 3, 4);
    CHECK(p.divergent_dynamics);  // 0.7 * 3 = 2.1 >= 2
}

TEST_CASE("eta scaling at tau=1") {
    const int D = 4;
    QuadraticModel m(logspace_spectrum(D, 0.2, 1.0), 12, zeros(D), 0.4, 1.5);
    std::vector<double> sigma_sq(D);
    for (int r = 0; r < D; ++r) sigma_sq[r] = m.noise_variance(r);
    const auto p1 = predicted_gap_covariance(*m.exact_hessian_eigenpairs(), sigma_sq, 0.1, 1, 4);
    const auto p2 = predicted_gap_covariance(*m.exact_hessian_eigenpairs(), sigma_sq, 0.2, 1, 4);
    for (int r = 0; r < D; ++r)
        CHECK(p2.direction_variances[r] == doctest::Approx(4.0 * p1.direction_variances[r]));
}

TEST_CASE("monte carlo covariance") {
    LocalSgdConfig cfg;
    cfg.workers = 4;
    cfg.tau = 5;
    cfg.eta = 0.2;
    cfg.batch_size = 1;
    cfg.seed = 123;

    SUBCASE("noiseless model gives an exactly zero matrix") {
        const int D = 4;
        QuadraticModel m(logspace_spectrum(D, 0.2, 1.0), 5, zeros(D), 0.0, 2.0);
        const auto mc = monte_carlo_gap_covariance(m, cfg, 50, Vec(D, 1.0));
        for (int i = 0; i < D; ++i)
            for (int j = 0; j < D; ++j) CHECK(mc.matrix(i, j) == 0.0);
    }
    SUBCASE("empirical direction variances approach the prediction") {
        const int D = 8;
        QuadraticModel m(logspace_spectrum(D, 0.1, 1.0), 5, zeros(D), 1.0, 2.0);
        cfg.eta = 0.5;  // eta * lambda_1 = 0.5
        std::vector<double> sigma_sq(D);
        for (int r = 0; r < D; ++r) sigma_sq[r] = m.noise_variance(r);
        const auto pred =
            predicted_gap_covariance(*m.exact_hessian_eigenpairs(), sigma_sq, cfg.eta, cfg.tau, 4);
        const auto mc = monte_carlo_gap_covariance(m, cfg, 40000, zeros(D));
        for (int r = 0; r < D; ++r)
            CHECK(mc.direction_variances[r] ==
                  doctest::Approx(pred.direction_variances[r]).epsilon(0.05));
    }
}

TEST_CASE("fit_noise_exponent") {
    const int D = 10;
    const auto lambda = logspace_spectrum(D, 0.05, 1.0);
    const double eta = 0.3, kappa = 0.7;
    const int tau = 5, M = 4;
    const double pref = eta * eta * (1.0 - 1.0 / M);

    SUBCASE("recovers an exact synthetic exponent") {
        for (double gamma : {1.0, 1.5, 2.0}) {
            std::vector<double> vars(D);
            for (int r = 0; r < D; ++r)
                vars[r] = pref * kappa * std::pow(lambda[r], gamma) * psi(tau, eta * lambda[r]);
            CHECK(fit_noise_exponent(lambda, vars, eta, tau, M) ==
                  doctest::Approx(gamma).epsilon(1e-9));
        }
    }
    SUBCASE("slope is invariant to the noise scale") {
        std::vector<double> v1(D), v2(D);
        for (int r = 0; r < D; ++r) {
            v1[r] = pref * 0.1 * std::pow(lambda[r], 1.5) * psi(tau, eta * lambda[r]);
            v2[r] = v1[r] * 100.0;
        }
        CHECK(fit_noise_exponent(lambda, v1, eta, tau, M) ==
              doctest::Approx(fit_noise_exponent(lambda, v2, eta, tau, M)).epsilon(1e-12));
    }
    SUBCASE("too few usable points is rejected") {
        CHECK_THROWS_AS(fit_noise_exponent({1.0, 0.5}, {0.1, 0.05}, eta, tau, M),
                        std::invalid_argument);
        // zeros are dropped, leaving only two usable points
        CHECK_THROWS_AS(
            fit_noise_exponent({1.0, 0.5, 0.25, 0.125}, {0.1, 0.05, 0.0, 0.0}, eta, tau, M),
            std::invalid_argument);
    }
}
