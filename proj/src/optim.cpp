#include "hcrnet/optim.hpp"

#include <cmath>

namespace hcr {

template <typename T>
CrossEntropy<T> cross_entropy(const BasicTensor<T>& probs, std::span<const int> labels) {
    if (probs.rank() != 2) throw ShapeError("cross_entropy expects [N,K] probabilities");
    const std::size_t n = probs.dim(0), k = probs.dim(1);
    if (labels.size() != n) {
        throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) +
                         " rows");
    }
    CrossEntropy<T> out;
    out.grad_logits = probs;
    double total = 0.0;
    const T inv_n = static_cast<T>(1.0 / static_cast<double>(n));
    for (std::size_t r = 0; r < n; ++r) {
        const int label = labels[r];
        if (label < 0 || static_cast<std::size_t>(label) >= k) {
            throw DataError("label " + std::to_string(label) + " out of range [0," + std::to_string(k) + ")");
        }
        const double p = std::max(static_cast<double>(probs[r * k + label]), kProbabilityFloor);
        total -= std::log(p);
        out.grad_logits[r * k + label] -= T{1};
        for (std::size_t j = 0; j < k; ++j) out.grad_logits[r * k + j] *= inv_n;
    }
    out.loss = total / static_cast<double>(n);
    if (!std::isfinite(out.loss)) throw NumericError("cross_entropy: non-finite loss");
    return out;
}

template CrossEntropy<float> cross_entropy(const BasicTensor<float>&, std::span<const int>);
template CrossEntropy<double> cross_entropy(const BasicTensor<double>&, std::span<const int>);

void rmsprop_step(std::span<const ParamUpdate> updates, RmspropState& state, double lr) {
    const double rho = state.config.rho;
    const double eps = state.config.epsilon;
    for (const auto& u : updates) {
        if (!u.trainable) continue;
        if (u.param->shape() != u.grad->shape()) {
            throw ShapeError("rmsprop_step: " + u.name + " parameter " + shape_str(u.param->shape()) +
                             " vs gradient " + shape_str(u.grad->shape()));
        }
        auto it = state.accumulators.find(u.name);
        if (it == state.accumulators.end()) {
            it = state.accumulators.emplace(u.name, Tensor(u.param->shape())).first;
        } else if (it->second.shape() != u.param->shape()) {
            throw ShapeError("rmsprop_step: accumulator shape mismatch for " + u.name);
        }
        auto& acc = it->second;
        auto& p = *u.param;
        const auto& g = *u.grad;
        const float rho_f = static_cast<float>(rho);
        const float one_minus_rho = static_cast<float>(1.0 - rho);
        const float lr_f = static_cast<float>(lr);
        const float eps_f = static_cast<float>(eps);
        for (std::size_t i = 0; i < p.size(); ++i) {
            acc[i] = rho_f * acc[i] + one_minus_rho * g[i] * g[i];
            p[i] -= lr_f * g[i] / (std::sqrt(acc[i]) + eps_f);
        }
        require_finite(p, u.name.c_str());
    }
}

StaircaseSchedule::StaircaseSchedule(std::vector<Breakpoint> breakpoints, int total_epochs)
    : breakpoints_(std::move(breakpoints)), total_epochs_(total_epochs) {
    if (total_epochs_ < 1) throw ConfigError("schedule needs at least one epoch");
    if (breakpoints_.empty() || breakpoints_.front().start_epoch != 0) {
        throw ConfigError("schedule must start with a breakpoint at epoch 0");
    }
    for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
        if (!(breakpoints_[i].learning_rate > 0.0)) throw ConfigError("learning rates must be positive");
        if (i > 0 && breakpoints_[i].start_epoch <= breakpoints_[i - 1].start_epoch) {
            throw ConfigError("schedule breakpoints must be strictly increasing");
        }
    }
}

double StaircaseSchedule::lr_at(int epoch) const {
    if (epoch < 0 || epoch >= total_epochs_) {
        throw ConfigError("epoch " + std::to_string(epoch) + " outside schedule of " + std::to_string(total_epochs_) +
                          " epochs");
    }
    double lr = breakpoints_.front().learning_rate;
    for (const auto& b : breakpoints_) {
        if (b.start_epoch > epoch) break;
        lr = b.learning_rate;
    }
    return lr;
}

StaircaseSchedule default_schedule(Phase phase, int total_epochs) {
    if (phase == Phase::phase1) {
        if (total_epochs <= 5) return StaircaseSchedule({{0, 1e-4}}, total_epochs);
        return StaircaseSchedule({{0, 1e-4}, {5, 5e-5}}, total_epochs);
    }
    if (total_epochs < 11) {
        throw ConfigError("phase2 schedule needs at least 11 epochs (5 warmup, 1 middle, 5 final), got " +
                          std::to_string(total_epochs));
    }
    return StaircaseSchedule({{0, 1e-7}, {5, 5e-6}, {total_epochs - 5, 1e-6}}, total_epochs);
}

}  // namespace hcr
