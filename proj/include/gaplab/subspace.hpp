#pragma once

#include <algorithm>
#include <deque>
#include <optional>
#include <stdexcept>
#include <vector>

#include "gaplab/basis.hpp"
#include "gaplab/vec.hpp"

namespace gaplab {

// FIFO buffer of worker--average gaps. The span of its entries is the
// proxy for the dominant curvature subspace.
class GapBuffer {
public:
    explicit GapBuffer(int capacity, double rel_threshold = 1e-8)
        : capacity_(capacity), rel_threshold_(rel_threshold) {
        if (capacity < 1) throw std::invalid_argument("GapBuffer: capacity must be >= 1");
    }

    int capacity() const { return capacity_; }
    int size() const { return static_cast<int>(entries_.size()); }
    double rel_threshold() const { return rel_threshold_; }
    const std::deque<Vec>& entries() const { return entries_; }

    // Insert the gaps of one synchronization round. Only the first M-1
    // are stored: the gaps are zero-sum, so the last is redundant.
    void push_round_gaps(const std::vector<Vec>& gaps) {
        if (gaps.empty()) throw std::invalid_argument("GapBuffer: no gaps supplied");
        for (std::size_t i = 0; i + 1 < gaps.size(); ++i) {
            if (!entries_.empty() && gaps[i].size() != entries_.front().size())
                throw std::invalid_argument("GapBuffer: gap dimension mismatch");
            entries_.push_back(gaps[i]);
            if (static_cast<int>(entries_.size()) > capacity_) entries_.pop_front();
        }
    }

    OrthonormalBasis build_basis() const {
        return orthonormalize_buffer({entries_.begin(), entries_.end()}, rel_threshold_);
    }

private:
    int capacity_;
    double rel_threshold_;
    std::deque<Vec> entries_;
};

// Fraction of v's norm inside span(U): ||P_U v|| / ||v||, in [0,1].
inline double chi(const OrthonormalBasis& U, const Vec& v) {
    const double nv = norm(v);
    if (nv <= 0.0) throw std::invalid_argument("chi: zero vector has no alignment");
    return norm(project(U, v)) / nv;
}

// Fraction of the true dominant component of v suppressed by
// projecting out span(Q): 1 - ||P_U (I - P_Q) v|| / ||P_U v||.
// Undefined (nullopt) when the dominant component of v vanishes.
// Can be negative when P_U P_Q v anti-aligns; reported as-is.
inline std::optional<double> rho(const OrthonormalBasis& U, const OrthonormalBasis& Q,
                                 const Vec& v) {
    const double denom = norm(project(U, v));
    if (denom <= 1e-14 * std::max(1.0, norm(v))) return std::nullopt;
    const double numer = norm(project(U, project_complement(Q, v)));
    return 1.0 - numer / denom;
}

}  // namespace gaplab
