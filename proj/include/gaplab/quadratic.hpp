#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "gaplab/basis.hpp"
#include "gaplab/model.hpp"
#include "gaplab/rng.hpp"

namespace gaplab {

// f(theta) = 1/2 (theta - theta*)^T H (theta - theta*), H = U diag(lambda) U^T,
// with Gaussian gradient noise diagonal in U: var along u_r is
// noise_scale * lambda_r^noise_exponent.
class QuadraticModel : public LossModel {
public:
    QuadraticModel(std::vector<double> eigenvalues, std::uint64_t basis_seed, Vec minimizer,
                   double noise_scale, double noise_exponent)
        : lambda_(std::move(eigenvalues)),
          minimizer_(std::move(minimizer)),
          noise_scale_(noise_scale),
          noise_exponent_(noise_exponent) {
        const int D = static_cast<int>(lambda_.size());
        if (D == 0) throw std::invalid_argument("QuadraticModel: empty spectrum");
        if (static_cast<int>(minimizer_.size()) != D)
            throw std::invalid_argument("QuadraticModel: minimizer dimension mismatch");
        for (std::size_t i = 0; i + 1 < lambda_.size(); ++i)
            if (lambda_[i] < lambda_[i + 1])
                throw std::invalid_argument("QuadraticModel: eigenvalues must be descending");
        if (lambda_.back() < 0.0)
            throw std::invalid_argument("QuadraticModel: eigenvalues must be nonnegative");
        if (noise_scale_ < 0.0) throw std::invalid_argument("QuadraticModel: noise_scale < 0");

        basis_ = random_orthonormal(D, basis_seed);
        init_noise();
    }

    // Same model with an explicitly supplied eigenbasis (e.g. identity).
    QuadraticModel(std::vector<double> eigenvalues, std::vector<Vec> basis, Vec minimizer,
                   double noise_scale, double noise_exponent)
        : lambda_(std::move(eigenvalues)),
          basis_(std::move(basis)),
          minimizer_(std::move(minimizer)),
          noise_scale_(noise_scale),
          noise_exponent_(noise_exponent) {
        if (basis_.size() != lambda_.size())
            throw std::invalid_argument("QuadraticModel: basis size mismatch");
        init_noise();
    }

    static std::vector<Vec> identity_basis(int D) {
        std::vector<Vec> cols;
        for (int i = 0; i < D; ++i) cols.push_back(unit(D, i));
        return cols;
    }

    int dim() const override { return static_cast<int>(lambda_.size()); }

    const std::vector<double>& spectrum() const { return lambda_; }
    const std::vector<Vec>& eigenbasis() const { return basis_; }
    const Vec& minimizer() const { return minimizer_; }
    double noise_scale() const { return noise_scale_; }
    double noise_exponent() const { return noise_exponent_; }

    // Noise variance along eigendirection r.
    double noise_variance(int r) const { return noise_std_[r] * noise_std_[r]; }

    double loss(const Vec& theta) const override {
        const Vec d = sub(theta, minimizer_);
        double s = 0.0;
        for (int r = 0; r < dim(); ++r) {
            const double c = dot(basis_[r], d);
            s += lambda_[r] * c * c;
        }
        return 0.5 * s;
    }

    Vec full_gradient(const Vec& theta) const override {
        return apply_hessian(sub(theta, minimizer_));
    }

    Vec stochastic_gradient(const Vec& theta, NoiseStream& stream) const override {
        Vec g = full_gradient(theta);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (int r = 0; r < dim(); ++r) {
            if (noise_std_[r] == 0.0) continue;
            axpy(noise_std_[r] * gauss(stream.rng), basis_[r], g);
        }
        return g;
    }

    Vec hvp(const Vec&, const Vec& v) const override { return apply_hessian(v); }

    std::optional<EigenPairs> exact_hessian_eigenpairs() const override {
        EigenPairs ep;
        ep.eigenvalues = lambda_;
        ep.eigenvectors = basis_;
        return ep;
    }

private:
    void init_noise() {
        noise_std_.resize(lambda_.size());
        for (std::size_t r = 0; r < lambda_.size(); ++r)
            noise_std_[r] = std::sqrt(noise_scale_ * std::pow(lambda_[r], noise_exponent_));
    }

    Vec apply_hessian(const Vec& v) const {
        if (v.size() != lambda_.size())
            throw std::invalid_argument("QuadraticModel: dimension mismatch");
        Vec out(v.size(), 0.0);
        for (int r = 0; r < dim(); ++r)
            axpy(lambda_[r] * dot(basis_[r], v), basis_[r], out);
        return out;
    }

    static std::vector<Vec> random_orthonormal(int D, std::uint64_t seed) {
        auto rng = make_rng(seed, 0x0b51ULL);
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::vector<Vec> cols;
        cols.reserve(D);
        while (static_cast<int>(cols.size()) < D) {
            Vec v(D);
            for (double& x : v) x = gauss(rng);
            for (const Vec& q : cols) axpy(-dot(q, v), q, v);
            for (const Vec& q : cols) axpy(-dot(q, v), q, v);
            const double n = norm(v);
            if (n < 1e-8) continue;
            scale(v, 1.0 / n);
            cols.push_back(std::move(v));
        }
        return cols;
    }

    std::vector<double> lambda_;   // descending
    std::vector<Vec> basis_;       // eigenbasis columns u_r
    Vec minimizer_;
    double noise_scale_;
    double noise_exponent_;
    std::vector<double> noise_std_;
};

inline std::vector<double> logspace_spectrum(int D, double lo, double hi) {
    if (D < 0 || lo <= 0.0 || hi < lo)
        throw std::invalid_argument("logspace_spectrum: bad parameters");
    if (D == 0) return {};
    std::vector<double> lam(D);
    for (int i = 0; i < D; ++i) {
        const double t = (D == 1) ? 0.0 : static_cast<double>(i) / (D - 1);
        lam[i] = hi * std::pow(lo / hi, t);  // descending from hi to lo
    }
    return lam;
}

// Spectrum with a well-separated dominant block on top of a flat-ish bulk.
inline std::vector<double> two_block_spectrum(int D, int dom_count, double dom_lo, double dom_hi,
                                              double bulk_lo, double bulk_hi) {
    if (dom_count < 0 || dom_count > D)
        throw std::invalid_argument("two_block_spectrum: bad dominant count");
    std::vector<double> lam = logspace_spectrum(dom_count, dom_lo, dom_hi);
    std::vector<double> bulk = logspace_spectrum(D - dom_count, bulk_lo, bulk_hi);
    lam.insert(lam.end(), bulk.begin(), bulk.end());
    return lam;
}

}  // namespace gaplab
