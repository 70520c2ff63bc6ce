#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "gaplab/dataset.hpp"
#include "gaplab/model.hpp"
#include "gaplab/rng.hpp"

namespace gaplab {

// Fully connected tanh network with a linear output layer and MSE loss
// against one-hot targets: loss is averaged over samples and summed
// over output coordinates. Hessian-vector products are central finite
// differences of exact backprop gradients.
class MlpModel : public LossModel {
public:
    MlpModel(std::vector<int> widths, Dataset dataset)
        : widths_(std::move(widths)), data_(std::move(dataset)) {
        if (widths_.size() < 2) throw std::invalid_argument("MlpModel: need at least two layers");
        if (data_.size() == 0) throw std::invalid_argument("MlpModel: empty dataset");
        if (data_.input_dim() != widths_.front() || data_.classes() != widths_.back())
            throw std::invalid_argument("MlpModel: dataset dims do not match layer widths");
        offsets_w_.resize(n_layers());
        offsets_b_.resize(n_layers());
        int off = 0;
        for (int l = 0; l < n_layers(); ++l) {
            offsets_w_[l] = off;
            off += widths_[l] * widths_[l + 1];
            offsets_b_[l] = off;
            off += widths_[l + 1];
        }
        dim_ = off;
    }

    int dim() const override { return dim_; }
    int n_layers() const { return static_cast<int>(widths_.size()) - 1; }
    const Dataset& dataset() const { return data_; }

    Vec init_parameters(std::uint64_t seed, double scale = 1.0) const {
        auto rng = make_rng(seed, 0x1417ULL);
        std::normal_distribution<double> gauss(0.0, 1.0);
        Vec theta(dim_, 0.0);
        for (int l = 0; l < n_layers(); ++l) {
            const double std_w = scale / std::sqrt(static_cast<double>(widths_[l]));
            double* W = theta.data() + offsets_w_[l];
            for (int i = 0; i < widths_[l] * widths_[l + 1]; ++i) W[i] = std_w * gauss(rng);
            // biases start at zero
        }
        return theta;
    }

    double loss(const Vec& theta) const override {
        return loss_grad(theta, all_indices(), nullptr);
    }

    Vec full_gradient(const Vec& theta) const override {
        Vec g(dim_, 0.0);
        loss_grad(theta, all_indices(), &g);
        return g;
    }

    // Loss and exact gradient over an explicit batch of sample indices.
    double loss_grad(const Vec& theta, const std::vector<int>& batch, Vec* grad) const {
        if (static_cast<int>(theta.size()) != dim_)
            throw std::invalid_argument("MlpModel: parameter dimension mismatch");
        if (batch.empty()) throw std::invalid_argument("MlpModel: empty batch");
        if (grad) std::fill(grad->begin(), grad->end(), 0.0);

        const int L = n_layers();
        std::vector<Vec> act(L + 1);    // act[0] = input, act[l] = layer output
        std::vector<Vec> delta(L + 1);

        double total = 0.0;
        for (int idx : batch) {
            const Vec& x = data_.inputs[idx];
            const Vec& y = data_.targets[idx];

            act[0] = x;
            for (int l = 0; l < L; ++l) {
                const int in = widths_[l], out = widths_[l + 1];
                const double* W = theta.data() + offsets_w_[l];
                const double* b = theta.data() + offsets_b_[l];
                Vec z(out);
                for (int j = 0; j < out; ++j) z[j] = b[j];
                for (int i = 0; i < in; ++i) {
                    const double a = act[l][i];
                    const double* row = W + static_cast<std::size_t>(i) * out;
                    for (int j = 0; j < out; ++j) z[j] += a * row[j];
                }
                if (l + 1 < L)
                    for (double& v : z) v = std::tanh(v);
                if (!all_finite(z))
                    throw std::runtime_error("MlpModel: non-finite activation in layer " +
                                             std::to_string(l + 1));
                act[l + 1] = std::move(z);
            }

            const Vec& o = act[L];
            for (int k = 0; k < widths_[L]; ++k) {
                const double e = o[k] - y[k];
                total += e * e;
            }
            if (!grad) continue;

            // delta at the linear output: d(sum_k (o_k-y_k)^2)/do = 2(o-y)
            delta[L].assign(widths_[L], 0.0);
            for (int k = 0; k < widths_[L]; ++k) delta[L][k] = 2.0 * (o[k] - y[k]);

            for (int l = L - 1; l >= 0; --l) {
                const int in = widths_[l], out = widths_[l + 1];
                const double* W = theta.data() + offsets_w_[l];
                double* gW = grad->data() + offsets_w_[l];
                double* gb = grad->data() + offsets_b_[l];
                for (int j = 0; j < out; ++j) gb[j] += delta[l + 1][j];
                for (int i = 0; i < in; ++i) {
                    const double a = act[l][i];
                    double* grow = gW + static_cast<std::size_t>(i) * out;
                    const double* row = W + static_cast<std::size_t>(i) * out;
                    for (int j = 0; j < out; ++j) grow[j] += a * delta[l + 1][j];
                }
                if (l > 0) {
                    delta[l].assign(in, 0.0);
                    for (int i = 0; i < in; ++i) {
                        const double* row = W + static_cast<std::size_t>(i) * out;
                        double s = 0.0;
                        for (int j = 0; j < out; ++j) s += row[j] * delta[l + 1][j];
                        const double a = act[l][i];
                        delta[l][i] = s * (1.0 - a * a);  // tanh'
                    }
                }
            }
        }

        const double inv_n = 1.0 / batch.size();
        if (grad)
            for (double& v : *grad) v *= inv_n;
        return total * inv_n;
    }

    // Minibatch gradient with without-replacement epochs per worker:
    // the shard permutation is re-drawn per (worker, epoch), and the
    // batch position follows the global step counter statelessly.
    Vec stochastic_gradient(const Vec& theta, NoiseStream& stream) const override {
        const std::vector<int> batch = select_batch(stream);
        Vec g(dim_, 0.0);
        loss_grad(theta, batch, &g);
        return g;
    }

    Vec hvp(const Vec& theta, const Vec& v) const override {
        return hvp_fd(theta, v, all_indices(), 1e-4 * (1.0 + norm(theta)));
    }

    // Central finite difference of gradients along v.
    Vec hvp_fd(const Vec& theta, const Vec& v, const std::vector<int>& batch,
               double fd_step) const {
        const double nv = norm(v);
        if (nv <= 0.0) throw std::invalid_argument("MlpModel::hvp_fd: zero direction");
        Vec vhat = scaled(v, 1.0 / nv);

        Vec plus = theta, minus = theta;
        axpy(fd_step, vhat, plus);
        axpy(-fd_step, vhat, minus);
        Vec gp(dim_, 0.0), gm(dim_, 0.0);
        loss_grad(plus, batch, &gp);
        loss_grad(minus, batch, &gm);

        Vec h = sub(gp, gm);
        scale(h, nv / (2.0 * fd_step));
        return h;
    }

    double accuracy(const Vec& theta) const {
        int correct = 0;
        for (int i = 0; i < data_.size(); ++i) {
            const Vec o = forward(theta, data_.inputs[i]);
            const auto pred = std::max_element(o.begin(), o.end()) - o.begin();
            const auto truth =
                std::max_element(data_.targets[i].begin(), data_.targets[i].end()) -
                data_.targets[i].begin();
            if (pred == truth) ++correct;
        }
        return static_cast<double>(correct) / data_.size();
    }

    Vec forward(const Vec& theta, const Vec& x) const {
        Vec a = x;
        const int L = n_layers();
        for (int l = 0; l < L; ++l) {
            const int in = widths_[l], out = widths_[l + 1];
            const double* W = theta.data() + offsets_w_[l];
            const double* b = theta.data() + offsets_b_[l];
            Vec z(out);
            for (int j = 0; j < out; ++j) z[j] = b[j];
            for (int i = 0; i < in; ++i)
                for (int j = 0; j < out; ++j) z[j] += a[i] * W[static_cast<std::size_t>(i) * out + j];
            if (l + 1 < L)
                for (double& v : z) v = std::tanh(v);
            a = std::move(z);
        }
        return a;
    }

    std::vector<int> select_batch(const NoiseStream& stream) const {
        if (data_.shards.empty())
            throw std::runtime_error("MlpModel: dataset has no worker partition");
        const auto& shard = data_.shards.at(stream.worker);
        const int bs = std::min<int>(std::max(stream.batch_size, 1), static_cast<int>(shard.size()));
        const long long steps_per_epoch = std::max<long long>(1, shard.size() / bs);
        const long long epoch = stream.global_step / steps_per_epoch;
        const long long pos = (stream.global_step % steps_per_epoch) * bs;

        std::vector<int> order(shard);
        auto rng = make_rng(stream.run_seed, 0xe90cULL + stream.worker, epoch);
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<int> batch(order.begin() + pos, order.begin() + pos + bs);
        // fixed accumulation order; makes batch == full dataset reproduce
        // the full gradient bit for bit
        std::sort(batch.begin(), batch.end());
        return batch;
    }

    std::vector<int> all_indices() const {
        std::vector<int> idx(data_.size());
        std::iota(idx.begin(), idx.end(), 0);
        return idx;
    }

private:
    std::vector<int> widths_;
    Dataset data_;
    std::vector<int> offsets_w_, offsets_b_;
    int dim_ = 0;
};

}  // namespace gaplab
