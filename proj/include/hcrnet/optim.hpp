#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "hcrnet/network.hpp"
#include "hcrnet/tensor.hpp"

namespace hcr {

inline constexpr double kProbabilityFloor = 1e-12;

template <typename T>
struct CrossEntropy {
    double loss = 0.0;
    BasicTensor<T> grad_logits;  // (probs - onehot) / N
};

/// Mean categorical cross-entropy of softmax outputs, with the gradient taken
/// directly w.r.t. the pre-softmax logits.
template <typename T>
CrossEntropy<T> cross_entropy(const BasicTensor<T>& probs, std::span<const int> labels);

struct RmspropConfig {
    double rho = 0.9;
    double epsilon = 1e-7;
};

// One accumulator per parameter name, created lazily at zero.
struct RmspropState {
    RmspropConfig config;
    std::map<std::string, Tensor, std::less<>> accumulators;
};

struct ParamUpdate {
    std::string name;
    Tensor* param;
    const Tensor* grad;
    bool trainable;
};

/// acc <- rho*acc + (1-rho)*g^2 ; param <- param - lr*g/(sqrt(acc)+eps).
/// Entries with trainable == false are skipped entirely.
void rmsprop_step(std::span<const ParamUpdate> updates, RmspropState& state, double lr);

/// Piecewise-constant, epoch-indexed learning rate.
class StaircaseSchedule {
public:
    struct Breakpoint {
        int start_epoch;
        double learning_rate;
    };

    StaircaseSchedule(std::vector<Breakpoint> breakpoints, int total_epochs);

    double lr_at(int epoch) const;

    const std::vector<Breakpoint>& breakpoints() const noexcept { return breakpoints_; }
    int total_epochs() const noexcept { return total_epochs_; }

private:
    std::vector<Breakpoint> breakpoints_;
    int total_epochs_;
};

/// phase1: 1e-4 for epochs [0,5), then 5e-5.
/// phase2: 1e-7 for [0,5), 5e-6 until the last five epochs, 1e-6 for those.
StaircaseSchedule default_schedule(Phase phase, int total_epochs);

}  // namespace hcr
