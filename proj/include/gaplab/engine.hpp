#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gaplab/basis.hpp"
#include "gaplab/lanczos.hpp"
#include "gaplab/model.hpp"
#include "gaplab/rng.hpp"
#include "gaplab/subspace.hpp"
#include "gaplab/vec.hpp"

namespace gaplab {

struct LocalSgdConfig {
    int workers = 4;       // M
    int tau = 5;           // local steps per round
    double eta = 0.05;     // step size
    int rounds = 0;
    int batch_size = 50;
    std::uint64_t seed = 1;

    void validate() const {
        if (workers < 2) throw std::invalid_argument("LocalSgdConfig: workers must be >= 2");
        if (tau < 1) throw std::invalid_argument("LocalSgdConfig: tau must be >= 1");
        if (!(eta > 0.0)) throw std::invalid_argument("LocalSgdConfig: eta must be > 0");
        if (rounds < 0) throw std::invalid_argument("LocalSgdConfig: rounds must be >= 0");
        if (batch_size < 1) throw std::invalid_argument("LocalSgdConfig: batch_size must be >= 1");
    }
};

// One synchronization round: final worker parameters, their average,
// the zero-sum gaps, and the average outer step.
struct RoundResult {
    std::vector<Vec> worker_params;  // theta_i after tau local steps
    Vec average;                     // mean of worker_params
    std::vector<Vec> gaps;           // worker_params[i] - average
    Vec outer_step;                  // average - starting point
};

enum class SyncVariant { standard, dom_projected, bulk_projected, filtered };

inline std::string to_string(SyncVariant v) {
    switch (v) {
        case SyncVariant::standard: return "standard";
        case SyncVariant::dom_projected: return "dom";
        case SyncVariant::bulk_projected: return "bulk";
        case SyncVariant::filtered: return "filtered";
    }
    return "?";
}

struct SyncPolicy {
    SyncVariant variant = SyncVariant::standard;
    const OrthonormalBasis* basis = nullptr;  // required unless standard
    double dom_gain = 1.0;
    double bulk_gain = 1.0;
};

// tau local SGD steps on each worker starting from the shared average.
// Streams are keyed on (seed, round, worker, step), so execution order
// cannot change results.
inline RoundResult run_round(const LossModel& model, const Vec& start,
                             const LocalSgdConfig& cfg, int round) {
    cfg.validate();
    const int M = cfg.workers;

    RoundResult rr;
    rr.worker_params.reserve(M);
    for (int i = 0; i < M; ++i) {
        Vec theta = start;
        for (int t = 0; t < cfg.tau; ++t) {
            NoiseStream stream;
            stream.rng = make_rng(cfg.seed, static_cast<std::uint64_t>(round) + 1, i + 1, t + 1);
            stream.run_seed = cfg.seed;
            stream.worker = i;
            stream.global_step = static_cast<long long>(round) * cfg.tau + t;
            stream.batch_size = cfg.batch_size;
            const Vec g = model.stochastic_gradient(theta, stream);
            axpy(-cfg.eta, g, theta);
            if (!all_finite(theta))
                throw std::runtime_error("run_round: non-finite parameters at worker " +
                                         std::to_string(i) + ", local step " + std::to_string(t));
        }
        rr.worker_params.push_back(std::move(theta));
    }

    rr.average = zeros(start.size());
    for (const Vec& w : rr.worker_params) axpy(1.0 / M, w, rr.average);
    rr.gaps.reserve(M);
    for (const Vec& w : rr.worker_params) rr.gaps.push_back(sub(w, rr.average));
    rr.outer_step = sub(rr.average, start);
    return rr;
}

// theta + dom_gain * P p + bulk_gain * (I - P) p, with the projector
// from the policy basis. Standard sync (and any equal-gain filter) adds
// the raw outer step so it stays bit-identical to theta + p.
inline Vec apply_sync(const Vec& theta, const Vec& outer_step, const SyncPolicy& policy) {
    double a = policy.dom_gain, g = policy.bulk_gain;
    switch (policy.variant) {
        case SyncVariant::standard: a = 1.0; g = 1.0; break;
        case SyncVariant::dom_projected: a = 1.0; g = 0.0; break;
        case SyncVariant::bulk_projected: a = 0.0; g = 1.0; break;
        case SyncVariant::filtered: break;
    }
    if (a == g) {
        Vec next = theta;
        axpy(a, outer_step, next);
        return next;
    }
    if (policy.basis == nullptr)
        throw std::invalid_argument("apply_sync: projection policy requires a basis");
    const Vec p_dom = project(*policy.basis, outer_step);
    Vec next = theta;
    axpy(a, p_dom, next);
    axpy(g, outer_step, next);
    axpy(-g, p_dom, next);
    return next;
}

// --- training loop with probes ---------------------------------------

struct PolicySchedule {
    SyncVariant variant = SyncVariant::standard;
    int switch_round = 0;  // rounds before this index run standard sync
    double dom_gain = 1.0;
    double bulk_gain = 1.0;
    enum class BasisSource { true_dominant, gap_proxy } basis_source = BasisSource::true_dominant;
    int proxy_capacity = 24;
};

struct ProbeSpec {
    int cadence = 5;
    int n_eigs = 0;            // top eigenvalues to record (0 = none)
    bool track_chi = false;
    bool track_rho = false;
    bool track_accuracy = false;
    int dominant_dim = 10;     // C
    int lanczos_iters = 60;
    std::vector<int> capacities;  // gap buffers to maintain for rho
    double rel_threshold = 1e-8;
};

struct RoundRecord {
    long long round = 0;       // 1-based synchronized round count
    long long local_step = 0;  // round * tau
    double loss = 0.0;
    std::optional<double> accuracy;
    std::vector<double> eigenvalues;
    std::optional<double> chi_value;
    std::vector<std::optional<double>> rho_values;  // one per buffer capacity
    std::vector<int> retained_ranks;                // one per buffer capacity
    double gap_norm_mean = 0.0;
    double gap_norm_max = 0.0;
    std::string policy;
};

// Top-k eigenpairs of the model Hessian at theta: exact when the model
// has a closed-form spectrum, Lanczos on the hvp otherwise.
inline EigenPairs top_eigenpairs(const LossModel& model, const Vec& theta, int k,
                                 int lanczos_iters, std::uint64_t seed) {
    if (auto exact = model.exact_hessian_eigenpairs()) {
        EigenPairs top;
        const int keep = std::min<int>(k, exact->count());
        top.eigenvalues.assign(exact->eigenvalues.begin(), exact->eigenvalues.begin() + keep);
        top.eigenvectors.assign(exact->eigenvectors.begin(), exact->eigenvectors.begin() + keep);
        return top;
    }
    const int D = model.dim();
    const int iters = std::min(D, std::max(lanczos_iters, k + 10));
    const auto res = lanczos_top_k([&](const Vec& v) { return model.hvp(theta, v); }, D,
                                   std::min(k, iters), iters, seed);
    return res.pairs;
}

inline std::vector<RoundRecord> run_training(const LossModel& model, const LocalSgdConfig& cfg,
                                             const PolicySchedule& schedule,
                                             const ProbeSpec& probe, const Vec& theta0,
                                             const std::function<double(const Vec&)>* accuracy_fn
                                             = nullptr) {
    cfg.validate();
    std::vector<RoundRecord> records;
    Vec theta = theta0;

    std::vector<GapBuffer> buffers;
    for (int cap : probe.capacities) buffers.emplace_back(cap, probe.rel_threshold);
    GapBuffer policy_buffer(std::max(1, schedule.proxy_capacity), probe.rel_threshold);

    const bool needs_policy_basis = schedule.variant != SyncVariant::standard;

    for (int c = 0; c < cfg.rounds; ++c) {
        try {
            const RoundResult rr = run_round(model, theta, cfg, c);
            for (auto& buf : buffers) buf.push_round_gaps(rr.gaps);
            if (needs_policy_basis &&
                schedule.basis_source == PolicySchedule::BasisSource::gap_proxy)
                policy_buffer.push_round_gaps(rr.gaps);

            const bool active = needs_policy_basis && c >= schedule.switch_round;
            SyncPolicy policy;
            OrthonormalBasis policy_basis;
            if (active) {
                policy.variant = schedule.variant;
                policy.dom_gain = schedule.dom_gain;
                policy.bulk_gain = schedule.bulk_gain;
                if (schedule.basis_source == PolicySchedule::BasisSource::gap_proxy) {
                    policy_basis = policy_buffer.build_basis();
                } else {
                    const EigenPairs top = top_eigenpairs(model, theta, probe.dominant_dim,
                                                          probe.lanczos_iters,
                                                          stream_key(cfg.seed, 0xba515ULL, c));
                    policy_basis.columns = top.eigenvectors;
                }
                policy.basis = &policy_basis;
            }
            theta = apply_sync(theta, rr.outer_step, policy);

            if ((c + 1) % probe.cadence != 0) continue;

            RoundRecord rec;
            rec.round = c + 1;
            rec.local_step = static_cast<long long>(c + 1) * cfg.tau;
            rec.loss = model.loss(theta);
            if (probe.track_accuracy && accuracy_fn) rec.accuracy = (*accuracy_fn)(theta);
            rec.policy = active ? to_string(schedule.variant) : "standard";

            double sum_norm = 0.0, max_norm = 0.0;
            for (const Vec& gap : rr.gaps) {
                const double n = norm(gap);
                sum_norm += n;
                max_norm = std::max(max_norm, n);
            }
            rec.gap_norm_mean = sum_norm / rr.gaps.size();
            rec.gap_norm_max = max_norm;

            const bool needs_spectrum = probe.n_eigs > 0 || probe.track_chi || probe.track_rho;
            if (needs_spectrum) {
                const int k = std::max(probe.n_eigs,
                                       (probe.track_chi || probe.track_rho) ? probe.dominant_dim : 0);
                const EigenPairs top = top_eigenpairs(model, theta, k, probe.lanczos_iters,
                                                      stream_key(cfg.seed, 0x9e1eULL, c));
                rec.eigenvalues.assign(top.eigenvalues.begin(),
                                       top.eigenvalues.begin() +
                                           std::min<std::size_t>(probe.n_eigs,
                                                                 top.eigenvalues.size()));
                if (probe.track_chi || probe.track_rho) {
                    OrthonormalBasis dominant;
                    const int C = std::min<int>(probe.dominant_dim, top.count());
                    dominant.columns.assign(top.eigenvectors.begin(),
                                            top.eigenvectors.begin() + C);
                    const Vec grad = model.full_gradient(theta);
                    const double gn = norm(grad);
                    if (probe.track_chi && gn > 0.0) rec.chi_value = chi(dominant, grad);
                    if (probe.track_rho) {
                        for (const auto& buf : buffers) {
                            const OrthonormalBasis Q = buf.build_basis();
                            rec.retained_ranks.push_back(Q.rank());
                            rec.rho_values.push_back(gn > 0.0 ? rho(dominant, Q, grad)
                                                              : std::nullopt);
                        }
                    }
                }
            }
            records.push_back(std::move(rec));
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception& e) {
            throw std::runtime_error("run_training: round " + std::to_string(c) + ": " + e.what());
        }
    }
    return records;
}

}  // namespace gaplab
