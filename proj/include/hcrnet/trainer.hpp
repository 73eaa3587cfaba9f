#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "hcrnet/augment.hpp"
#include "hcrnet/data_io.hpp"
#include "hcrnet/metrics.hpp"
#include "hcrnet/network.hpp"
#include "hcrnet/optim.hpp"

namespace hcr {

struct PhasePlan {
    int epochs_phase1 = 30;
    int epochs_phase2 = 20;
    AugmentConfig augmentation;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    // Replace the default staircase schedules when set.
    std::optional<StaircaseSchedule> schedule_phase1;
    std::optional<StaircaseSchedule> schedule_phase2;
    RmspropConfig rmsprop;
    // Threads used for test-set evaluation; training steps are serial.
    std::size_t eval_workers = 1;

    // 30/20 epochs without augmentation, 10/50 with it.
    static PhasePlan defaults(bool augment);
    void validate() const;
};

struct EpochRecord {
    int epoch = 0;  // 1-based across both phases
    Phase phase = Phase::phase1;
    double lr = 0.0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double test_acc = 0.0;
};

struct MetricsReport {
    // Headline figure: test accuracy after the final epoch.
    double accuracy_last = 0.0;
    // Highest per-epoch test accuracy; reported alongside, never instead.
    double accuracy_best = 0.0;
    Metrics final_metrics;
    std::vector<EpochRecord> history;
};

struct StepResult {
    double loss = 0.0;
    std::size_t correct = 0;
};

/// Owns the optimizer state for one graph. Each step is forward (train mode),
/// fused softmax/cross-entropy gradient, backward, and one RMSprop update of
/// the trainable tensors.
class TrainingSession {
public:
    explicit TrainingSession(NetworkGraph& g, RmspropConfig config = {});

    StepResult step(const Tensor& batch, std::span<const int> labels, double lr, std::uint64_t seed);
    void reset_optimizer();
    const RmspropState& optimizer_state() const noexcept { return state_; }

private:
    NetworkGraph& graph_;
    RmspropState state_;
};

struct Predictions {
    std::vector<int> labels;
    std::vector<float> confidence;  // probability of the predicted class
};

Predictions predict_dataset(const NetworkGraph& g, const LabeledDataset& d, std::size_t workers = 1,
                            std::size_t chunk = 64);

Metrics evaluate(const NetworkGraph& g, const LabeledDataset& test, std::size_t workers = 1);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Phase 1 (backbone frozen) then phase 2 (everything trainable), each with
/// its staircase schedule and a fresh optimizer. Training data is reshuffled
/// every epoch and the test set is evaluated after every epoch. The graph is
/// left at its final-epoch weights.
MetricsReport train(NetworkGraph& g, const LabeledDataset& train_set, const LabeledDataset& test_set,
                    const PhasePlan& plan, const EpochCallback& on_epoch = {});

struct ScalarStats {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation; 0 for one run
};

struct ExperimentReport {
    std::vector<MetricsReport> runs;
    std::vector<std::uint64_t> seeds;
    ScalarStats accuracy_last;
    ScalarStats accuracy_best;
    ScalarStats macro_precision;
    ScalarStats macro_recall;
    ScalarStats macro_f1;
    // Per-epoch spread of test accuracy and train loss across runs.
    std::vector<ScalarStats> test_acc_curve;
    std::vector<ScalarStats> train_loss_curve;
};

struct ExperimentOptions {
    int runs = 5;
    std::uint64_t master_seed = 0;
    // When false every run reuses master_seed.
    bool derive_seeds = true;
};

using GraphFactory = std::function<NetworkGraph(std::uint64_t seed)>;

ExperimentReport run_experiment(const GraphFactory& make_graph, const LabeledDataset& train_set,
                                const LabeledDataset& test_set, const PhasePlan& plan,
                                const ExperimentOptions& options = {});

ScalarStats mean_std(std::span<const double> values);

struct MisclassificationReport {
    Metrics metrics;
    std::size_t misclassified = 0;
};

/// Writes <out>/confusion.csv, <out>/per_class.csv and, for each error,
/// <out>/misclassified/<true>_as_<pred>_<index>.pgm plus an index.csv row
/// (index, true, predicted, probability of the predicted class).
MisclassificationReport misclassification_report(const NetworkGraph& g, const LabeledDataset& test,
                                                 const std::filesystem::path& out_dir, std::size_t workers = 1);

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

}  // namespace hcr
