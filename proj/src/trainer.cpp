#include "hcrnet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <thread>

#include "hcrnet/image.hpp"
#include "hcrnet/random.hpp"

namespace hcr {

namespace fs = std::filesystem;

namespace {

// Stream tags keep shuffling, dropout and augmentation draws independent.
constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;
constexpr std::uint64_t kDropoutStream = 0x44524F50ULL;
constexpr std::uint64_t kAugmentStream = 0x4155474DULL;

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

void check_compatible(const NetworkGraph& g, const LabeledDataset& d, const char* which) {
    if (d.size() == 0) throw DataError(std::string(which) + " set is empty");
    if (d.num_classes() != g.num_classes) {
        throw DataError(std::string(which) + " set has " + std::to_string(d.num_classes()) +
                        " classes but the network has " + std::to_string(g.num_classes));
    }
}

}  // namespace

PhasePlan PhasePlan::defaults(bool augment) {
    PhasePlan p;
    p.augmentation.enabled = augment;
    p.epochs_phase1 = augment ? 10 : 30;
    p.epochs_phase2 = augment ? 50 : 20;
    return p;
}

void PhasePlan::validate() const {
    if (epochs_phase1 < 0 || epochs_phase2 < 0) throw ConfigError("epoch counts must be non-negative");
    if (batch_size < 1) throw ConfigError("batch size must be at least 1");
    augmentation.validate();
    if (schedule_phase1 && schedule_phase1->total_epochs() != epochs_phase1) {
        throw ConfigError("phase1 schedule length does not match epochs_phase1");
    }
    if (schedule_phase2 && schedule_phase2->total_epochs() != epochs_phase2) {
        throw ConfigError("phase2 schedule length does not match epochs_phase2");
    }
    if (!schedule_phase2 && epochs_phase2 > 0) default_schedule(Phase::phase2, epochs_phase2);
}

TrainingSession::TrainingSession(NetworkGraph& g, RmspropConfig config) : graph_(g) { state_.config = config; }

void TrainingSession::reset_optimizer() { state_.accumulators.clear(); }

StepResult TrainingSession::step(const Tensor& batch, std::span<const int> labels, double lr, std::uint64_t seed) {
    auto pass = forward(graph_, batch, Mode::train, seed);
    auto ce = cross_entropy(pass.probs, labels);
    const auto predicted = argmax_rows(pass.probs);
    StepResult r;
    r.loss = ce.loss;
    for (std::size_t i = 0; i < labels.size(); ++i) r.correct += predicted[i] == labels[i];

    auto grads = backward(graph_, pass, ce.grad_logits);
    auto params = gradient_params(graph_);
    std::vector<ParamUpdate> updates;
    updates.reserve(grads.size());
    for (const auto& [name, grad] : grads) {
        const auto it = std::find_if(params.begin(), params.end(), [&](const ParamRef& p) { return p.name == name; });
        updates.push_back({name, it->value, &grad, it->trainable});
    }
    rmsprop_step(updates, state_, lr);
    return r;
}

Predictions predict_dataset(const NetworkGraph& g, const LabeledDataset& d, std::size_t workers, std::size_t chunk) {
    Predictions out;
    out.labels.resize(d.size());
    out.confidence.resize(d.size());
    const std::size_t n_chunks = (d.size() + chunk - 1) / chunk;
    auto run_chunk = [&](std::size_t c) {
        const std::size_t first = c * chunk, last = std::min(d.size(), first + chunk);
        std::vector<std::size_t> idx(last - first);
        std::iota(idx.begin(), idx.end(), first);
        const Tensor probs = infer(g, make_batch(d, idx));
        const auto pred = argmax_rows(probs);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            out.labels[first + i] = pred[i];
            out.confidence[first + i] = probs[i * probs.dim(1) + static_cast<std::size_t>(pred[i])];
        }
    };
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n_chunks, 1));
    if (workers == 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) run_chunk(c);
        return out;
    }
    std::vector<std::jthread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t c = w; c < n_chunks; c += workers) run_chunk(c);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    pool.clear();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

Metrics evaluate(const NetworkGraph& g, const LabeledDataset& test, std::size_t workers) {
    check_compatible(g, test, "test");
    const auto pred = predict_dataset(g, test, workers);
    return compute_metrics(test.labels, pred.labels, g.num_classes);
}

MetricsReport train(NetworkGraph& g, const LabeledDataset& train_set, const LabeledDataset& test_set,
                    const PhasePlan& plan, const EpochCallback& on_epoch) {
    plan.validate();
    check_compatible(g, train_set, "training");
    check_compatible(g, test_set, "test");

    MetricsReport report;
    TrainingSession session(g, plan.rmsprop);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<int> labels;
    std::uint64_t global_step = 0;
    int global_epoch = 0;

    for (const Phase phase : {Phase::phase1, Phase::phase2}) {
        const int epochs = phase == Phase::phase1 ? plan.epochs_phase1 : plan.epochs_phase2;
        if (epochs == 0) continue;
        const auto& custom = phase == Phase::phase1 ? plan.schedule_phase1 : plan.schedule_phase2;
        const StaircaseSchedule schedule = custom ? *custom : default_schedule(phase, epochs);
        set_phase(g, phase);
        session.reset_optimizer();

        for (int e = 0; e < epochs; ++e, ++global_epoch) {
            const double lr = schedule.lr_at(e);
            Rng shuffle_rng(mix_seed(plan.seed ^ kShuffleStream, static_cast<std::uint64_t>(global_epoch)));
            shuffle_rng.shuffle(order.begin(), order.end());
            double loss_sum = 0.0;
            std::size_t correct = 0;
            for (std::size_t first = 0, b = 0; first < order.size(); first += plan.batch_size, ++b) {
                const std::size_t last = std::min(order.size(), first + plan.batch_size);
                const std::span<const std::size_t> idx(order.data() + first, last - first);
                Tensor batch = make_batch(train_set, idx);
                if (plan.augmentation.enabled) {
                    const auto aug_seed = mix_seed(plan.seed ^ kAugmentStream, global_step);
                    batch = augment_batch(batch, plan.augmentation, aug_seed);
                }
                labels.resize(idx.size());
                for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = train_set.labels[idx[i]];
                const auto r = session.step(batch, labels, lr, mix_seed(plan.seed ^ kDropoutStream, global_step));
                loss_sum += r.loss * static_cast<double>(idx.size());
                correct += r.correct;
                ++global_step;
            }
            EpochRecord rec;
            rec.epoch = global_epoch + 1;
            rec.phase = phase;
            rec.lr = lr;
            rec.train_loss = loss_sum / static_cast<double>(train_set.size());
            rec.train_acc = static_cast<double>(correct) / static_cast<double>(train_set.size());
            rec.test_acc = evaluate(g, test_set, plan.eval_workers).accuracy;
            report.history.push_back(rec);
            if (on_epoch) on_epoch(rec);
        }
    }

    report.final_metrics = evaluate(g, test_set, plan.eval_workers);
    report.accuracy_last = report.final_metrics.accuracy;
    report.accuracy_best = report.accuracy_last;
    for (const auto& rec : report.history) report.accuracy_best = std::max(report.accuracy_best, rec.test_acc);
    return report;
}

ScalarStats mean_std(std::span<const double> values) {
    ScalarStats s;
    if (values.empty()) return s;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

ExperimentReport run_experiment(const GraphFactory& make_graph, const LabeledDataset& train_set,
                                const LabeledDataset& test_set, const PhasePlan& plan,
                                const ExperimentOptions& options) {
    if (options.runs < 1) throw ConfigError("an experiment needs at least one run");
    ExperimentReport rep;
    for (int r = 0; r < options.runs; ++r) {
        const std::uint64_t seed =
            options.derive_seeds ? mix_seed(options.master_seed, static_cast<std::uint64_t>(r)) : options.master_seed;
        PhasePlan run_plan = plan;
        run_plan.seed = seed;
        NetworkGraph g = make_graph(seed);
        rep.runs.push_back(train(g, train_set, test_set, run_plan));
        rep.seeds.push_back(seed);
    }
    auto collect = [&](auto field) {
        std::vector<double> v;
        for (const auto& run : rep.runs) v.push_back(field(run));
        return mean_std(v);
    };
    rep.accuracy_last = collect([](const MetricsReport& m) { return m.accuracy_last; });
    rep.accuracy_best = collect([](const MetricsReport& m) { return m.accuracy_best; });
    rep.macro_precision = collect([](const MetricsReport& m) { return m.final_metrics.macro_precision; });
    rep.macro_recall = collect([](const MetricsReport& m) { return m.final_metrics.macro_recall; });
    rep.macro_f1 = collect([](const MetricsReport& m) { return m.final_metrics.macro_f1; });
    const std::size_t epochs = rep.runs.front().history.size();
    for (std::size_t e = 0; e < epochs; ++e) {
        rep.test_acc_curve.push_back(collect([&](const MetricsReport& m) { return m.history[e].test_acc; }));
        rep.train_loss_curve.push_back(collect([&](const MetricsReport& m) { return m.history[e].train_loss; }));
    }
    return rep;
}

MisclassificationReport misclassification_report(const NetworkGraph& g, const LabeledDataset& test,
                                                 const fs::path& out_dir, std::size_t workers) {
    check_compatible(g, test, "test");
    std::error_code ec;
    fs::create_directories(out_dir / "misclassified", ec);
    if (ec) throw DataError("cannot create " + (out_dir / "misclassified").string() + ": " + ec.message());

    const auto pred = predict_dataset(g, test, workers);
    MisclassificationReport rep;
    rep.metrics = compute_metrics(test.labels, pred.labels, g.num_classes);
    write_confusion_csv(out_dir / "confusion.csv", rep.metrics, test.class_names);
    write_per_class_csv(out_dir / "per_class.csv", rep.metrics, test.class_names);

    std::ofstream index(out_dir / "misclassified" / "index.csv", std::ios::trunc);
    if (!index) throw DataError("cannot write misclassification index in " + out_dir.string());
    index << "index,true,predicted,true_name,predicted_name,probability,file\n";
    for (std::size_t i = 0; i < test.size(); ++i) {
        const int t = test.labels[i], p = pred.labels[i];
        if (t == p) continue;
        const std::string file = std::to_string(t) + "_as_" + std::to_string(p) + "_" + std::to_string(i) + ".pgm";
        write_pgm(out_dir / "misclassified" / file, to_gray_image(test.images[i]));
        index << i << ',' << t << ',' << p << ',' << test.class_names[static_cast<std::size_t>(t)] << ','
              << test.class_names[static_cast<std::size_t>(p)] << ',' << fmt_double(pred.confidence[i]) << ',' << file
              << '\n';
        ++rep.misclassified;
    }
    return rep;
}

void write_history_csv(const fs::path& path, const std::vector<EpochRecord>& history) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << "epoch,phase,lr,train_loss,train_acc,test_acc\n";
    for (const auto& r : history) {
        out << r.epoch << ',' << to_string(r.phase) << ',' << fmt_double(r.lr) << ',' << fmt_double(r.train_loss)
            << ',' << fmt_double(r.train_acc) << ',' << fmt_double(r.test_acc) << '\n';
    }
}

}  // namespace hcr
