#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "gaplab/sym_eig.hpp"
#include "gaplab/vec.hpp"

namespace gaplab {

// Per-(worker, step) randomness handed to a stochastic gradient call.
// The rng is already keyed on (seed, round, worker, step); the index
// fields let data-driven models derive minibatches statelessly.
struct NoiseStream {
    std::mt19937_64 rng;
    std::uint64_t run_seed = 0;
    int worker = 0;
    long long global_step = 0;
    int batch_size = 0;
};

// Anything exposing loss, full gradient, stochastic gradient and a
// Hessian-vector product over a flat parameter vector.
class LossModel {
public:
    virtual ~LossModel() = default;

    virtual int dim() const = 0;
    virtual double loss(const Vec& theta) const = 0;
    virtual Vec full_gradient(const Vec& theta) const = 0;
    virtual Vec stochastic_gradient(const Vec& theta, NoiseStream& stream) const = 0;
    virtual Vec hvp(const Vec& theta, const Vec& v) const = 0;

    // Exact spectrum when the model has one in closed form.
    virtual std::optional<EigenPairs> exact_hessian_eigenpairs() const { return std::nullopt; }
};

}  // namespace gaplab
