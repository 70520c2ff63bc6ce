#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "gaplab/engine.hpp"
#include "gaplab/quadratic.hpp"
#include "gaplab/sym_eig.hpp"
#include "gaplab/vec.hpp"

namespace gaplab {

// psi_tau(a) = sum_{q=0}^{tau-1} (1-a)^(2q). Closed geometric form when
// the ratio is safely away from 1, exact term-by-term sum otherwise.
inline double psi(int tau, double a) {
    if (tau < 1) throw std::invalid_argument("psi: tau must be >= 1");
    const double r = (1.0 - a) * (1.0 - a);
    if (std::fabs(1.0 - r) > 1e-12)
        return (1.0 - std::pow(r, tau)) / (1.0 - r);
    double s = 0.0, term = 1.0;
    for (int q = 0; q < tau; ++q) {
        s += term;
        term *= r;
    }
    return s;
}

// Predicted (or measured) gap covariance together with its
// per-eigendirection variances v_r = u_r^T Cov u_r.
struct CovariancePrediction {
    SymMatrix matrix;                      // D x D, PSD
    std::vector<double> direction_variances;
    bool divergent_dynamics = false;       // eta * lambda_1 >= 2
};

// Per-direction variance eta^2 (1 - 1/M) sigma_r^2 psi_tau(eta lambda_r),
// assembled into U diag(v) U^T.
inline CovariancePrediction predicted_gap_covariance(const EigenPairs& hessian_eigs,
                                                     const std::vector<double>& sigma_sq,
                                                     double eta, int tau, int M) {
    const int D = hessian_eigs.count();
    if (static_cast<int>(sigma_sq.size()) != D)
        throw std::invalid_argument("predicted_gap_covariance: sigma_sq size mismatch");
    if (M < 2) throw std::invalid_argument("predicted_gap_covariance: M must be >= 2");

    CovariancePrediction out;
    out.direction_variances.resize(D);
    const double prefactor = eta * eta * (1.0 - 1.0 / M);
    for (int r = 0; r < D; ++r)
        out.direction_variances[r] =
            prefactor * sigma_sq[r] * psi(tau, eta * hessian_eigs.eigenvalues[r]);

    if (!hessian_eigs.eigenvalues.empty() && eta * hessian_eigs.eigenvalues.front() >= 2.0)
        out.divergent_dynamics = true;

    out.matrix = SymMatrix(D);
    for (int i = 0; i < D; ++i) {
        for (int j = i; j < D; ++j) {
            double s = 0.0;
            for (int r = 0; r < D; ++r)
                s += out.direction_variances[r] * hessian_eigs.eigenvectors[r][i] *
                     hessian_eigs.eigenvectors[r][j];
            out.matrix.set(i, j, s);
        }
    }
    return out;
}

// Empirical covariance of worker 1's gap over independent rounds, each
// restarted from the same center so the Hessian is frozen. Direction
// variances are read out in the model's exact eigenbasis.
inline CovariancePrediction monte_carlo_gap_covariance(const QuadraticModel& model,
                                                       const LocalSgdConfig& cfg, int n_rounds,
                                                       const Vec& center) {
    const int D = model.dim();
    std::vector<double> acc(static_cast<std::size_t>(D) * D, 0.0);

    LocalSgdConfig round_cfg = cfg;
    round_cfg.rounds = 1;
    for (int r = 0; r < n_rounds; ++r) {
        const RoundResult rr = run_round(model, center, round_cfg, r);
        const Vec& gap = rr.gaps[0];
        for (int i = 0; i < D; ++i)
            for (int j = i; j < D; ++j) acc[static_cast<std::size_t>(i) * D + j] += gap[i] * gap[j];
    }

    CovariancePrediction out;
    out.matrix = SymMatrix(D);
    for (int i = 0; i < D; ++i)
        for (int j = i; j < D; ++j)
            out.matrix.set(i, j, acc[static_cast<std::size_t>(i) * D + j] / n_rounds);

    const auto& U = model.eigenbasis();
    out.direction_variances.resize(D);
    for (int r = 0; r < D; ++r) {
        // u_r^T Cov u_r
        double s = 0.0;
        for (int i = 0; i < D; ++i) {
            double row = 0.0;
            for (int j = 0; j < D; ++j) row += out.matrix(i, j) * U[r][j];
            s += U[r][i] * row;
        }
        out.direction_variances[r] = s;
    }
    return out;
}

// Covariance of worker 1's gap projected onto an arbitrary pair of
// eigendirections, for off-diagonal checks.
inline double eigenbasis_entry(const CovariancePrediction& cov, const std::vector<Vec>& U, int r,
                               int s) {
    const int D = static_cast<int>(U.size());
    double out = 0.0;
    for (int i = 0; i < D; ++i) {
        double row = 0.0;
        for (int j = 0; j < D; ++j) row += cov.matrix(i, j) * U[s][j];
        out += U[r][i] * row;
    }
    return out;
}

// Least-squares slope of log(var / (eta^2 (1-1/M) psi_tau(eta lambda)))
// against log lambda; recovers the noise--curvature exponent.
inline double fit_noise_exponent(const std::vector<double>& lambdas,
                                 const std::vector<double>& empirical_vars, double eta, int tau,
                                 int M) {
    if (lambdas.size() != empirical_vars.size())
        throw std::invalid_argument("fit_noise_exponent: size mismatch");
    const double prefactor = eta * eta * (1.0 - 1.0 / M);

    std::vector<double> xs, ys;
    for (std::size_t r = 0; r < lambdas.size(); ++r) {
        if (!(lambdas[r] > 0.0) || !(empirical_vars[r] > 0.0)) continue;
        xs.push_back(std::log(lambdas[r]));
        ys.push_back(std::log(empirical_vars[r] / (prefactor * psi(tau, eta * lambdas[r]))));
    }
    const std::size_t n = xs.size();
    if (n < 3) throw std::invalid_argument("fit_noise_exponent: need >= 3 usable directions");

    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (xs[i] - mx) * (ys[i] - my);
        den += (xs[i] - mx) * (xs[i] - mx);
    }
    if (den == 0.0) throw std::invalid_argument("fit_noise_exponent: degenerate eigenvalues");
    return num / den;
}

}  // namespace gaplab
