#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <utility>

#include "hcrnet/trainer.hpp"
#include "toy_data.hpp"

using namespace hcr;
namespace fs = std::filesystem;

namespace {

std::vector<Tensor> backbone_snapshot(const NetworkGraph& g) {
    std::vector<Tensor> out;
    for (const auto& name : backbone_layer_names()) {
        out.push_back(*g.layer(name).params.weights);
        out.push_back(*g.layer(name).params.bias);
    }
    return out;
}

bool same_tensors(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!bit_identical(a[i], b[i])) return false;
    return true;
}

PhasePlan quick_plan(int e1, int e2, std::uint64_t seed) {
    PhasePlan p;
    p.epochs_phase1 = e1;
    p.epochs_phase2 = e2;
    p.batch_size = 8;
    p.seed = seed;
    if (e1 > 0) p.schedule_phase1 = StaircaseSchedule({{0, 1e-4}}, e1);
    if (e2 > 0) p.schedule_phase2 = StaircaseSchedule({{0, 1e-5}}, e2);
    return p;
}

std::vector<std::string> read_lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("hcrnet_trainer_" + name);
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("metrics on the two-class fixture") {
    const std::vector<int> truth{0, 0, 1, 1}, pred{0, 1, 1, 1};
    const auto m = compute_metrics(truth, pred, 2);
    CHECK(m.accuracy == doctest::Approx(0.75));
    CHECK(m.per_class[0].precision == doctest::Approx(1.0));
    CHECK(m.per_class[0].recall == doctest::Approx(0.5));
    CHECK(m.per_class[1].precision == doctest::Approx(2.0 / 3));
    CHECK(m.per_class[1].recall == doctest::Approx(1.0));
    CHECK(m.macro_f1 == doctest::Approx((2.0 / 3 + 4.0 / 5) / 2));
    CHECK(m.confusion == std::vector<std::vector<std::size_t>>{{1, 1}, {0, 2}});
    CHECK(m.total == 4);

    const auto perfect = compute_metrics(truth, truth, 2);
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.macro_f1 == 1.0);
    CHECK(perfect.confusion == std::vector<std::vector<std::size_t>>{{2, 0}, {0, 2}});
}

TEST_CASE("confusion counts agree with a counting oracle") {
    Rng rng(12);
    std::vector<int> truth(300), pred(300);
    for (std::size_t i = 0; i < 300; ++i) {
        truth[i] = static_cast<int>(rng.below(6));
        pred[i] = rng.uniform() < 0.6 ? truth[i] : static_cast<int>(rng.below(6));
    }
    const auto m = compute_metrics(truth, pred, 6);
    std::size_t total = 0, correct = 0;
    for (int t = 0; t < 6; ++t) {
        std::size_t row = 0;
        for (int p = 0; p < 6; ++p) {
            std::size_t count = 0;
            for (std::size_t i = 0; i < 300; ++i) count += truth[i] == t && pred[i] == p;
            CHECK(m.confusion[t][p] == count);
            row += m.confusion[t][p];
        }
        CHECK(row == m.per_class[t].support);
        total += row;
        correct += m.confusion[t][t];
    }
    CHECK(total == 300);
    CHECK(m.accuracy == doctest::Approx(correct / 300.0));
    CHECK_THROWS_AS(compute_metrics(truth, std::vector<int>{1}, 6), DataError);
}

TEST_CASE("phase-one-only training keeps the backbone frozen") {
    const auto data = toy::bars(8, 1);
    auto g = build_hcrnet(2, 3);
    const auto before = backbone_snapshot(g);
    std::vector<EpochRecord> seen;
    const auto report = train(g, data, data, quick_plan(3, 0, 9), [&](const EpochRecord& r) { seen.push_back(r); });
    CHECK(report.history.size() == 3);
    CHECK(seen.size() == 3);
    CHECK(same_tensors(before, backbone_snapshot(g)));
    CHECK(g.phase == Phase::phase1);
    CHECK(report.accuracy_best >= report.accuracy_last);
    CHECK(report.accuracy_last == report.history.back().test_acc);
    for (int i = 0; i < 3; ++i) CHECK(report.history[i].epoch == i + 1);
}

TEST_CASE("two-phase training switches schedules and unfreezes") {
    const auto data = toy::bars(4, 2);
    auto g = build_hcrnet(2, 3);
    const auto before = backbone_snapshot(g);
    const auto report = train(g, data, data, quick_plan(1, 2, 4));
    REQUIRE(report.history.size() == 3);
    CHECK(report.history[0].phase == Phase::phase1);
    CHECK(report.history[0].lr == 1e-4);
    CHECK(report.history[1].phase == Phase::phase2);
    CHECK(report.history[2].lr == 1e-5);
    CHECK(g.phase == Phase::phase2);
    CHECK_FALSE(same_tensors(before, backbone_snapshot(g)));
}

TEST_CASE("training is reproducible for a fixed seed") {
    const auto data = toy::bars(4, 5);
    auto a = build_hcrnet(2, 6);
    auto b = build_hcrnet(2, 6);
    auto plan = quick_plan(2, 0, 8);
    plan.augmentation.enabled = true;
    const auto ra = train(a, data, data, plan);
    const auto rb = train(b, data, data, plan);
    for (std::size_t i = 0; i < ra.history.size(); ++i) {
        CHECK(ra.history[i].train_loss == rb.history[i].train_loss);
        CHECK(ra.history[i].test_acc == rb.history[i].test_acc);
    }
    const auto ta = all_tensors(std::as_const(a));
    const auto tb = all_tensors(std::as_const(b));
    for (std::size_t i = 0; i < ta.size(); ++i) CHECK(bit_identical(*ta[i].second, *tb[i].second));
}

TEST_CASE("training rejects inconsistent inputs") {
    const auto data = toy::bars(2, 1);
    auto g = build_hcrnet(3, 1);
    CHECK_THROWS_AS(train(g, data, data, quick_plan(1, 0, 1)), DataError);
    auto g2 = build_hcrnet(2, 1);
    LabeledDataset empty;
    empty.class_names = data.class_names;
    CHECK_THROWS_AS(train(g2, empty, data, quick_plan(1, 0, 1)), DataError);
    CHECK_THROWS_AS(evaluate(g2, empty), DataError);
    PhasePlan bad = quick_plan(1, 0, 1);
    bad.batch_size = 0;
    CHECK_THROWS_AS(train(g2, data, data, bad), ConfigError);
}

TEST_CASE("plan defaults depend on augmentation") {
    CHECK(PhasePlan::defaults(false).epochs_phase1 == 30);
    CHECK(PhasePlan::defaults(false).epochs_phase2 == 20);
    CHECK(PhasePlan::defaults(true).epochs_phase1 == 10);
    CHECK(PhasePlan::defaults(true).epochs_phase2 == 50);
    CHECK(PhasePlan::defaults(true).augmentation.enabled);
}

TEST_CASE("repeated runs report mean and spread") {
    const auto data = toy::bars(4, 3);
    const GraphFactory factory = [](std::uint64_t seed) { return build_hcrnet(2, seed); };
    const auto plan = quick_plan(1, 0, 0);

    const auto single = run_experiment(factory, data, data, plan, {.runs = 1, .master_seed = 5});
    CHECK(single.runs.size() == 1);
    CHECK(single.accuracy_last.stddev == 0.0);
    CHECK(single.accuracy_last.mean == single.runs[0].accuracy_last);

    const auto same = run_experiment(factory, data, data, plan, {.runs = 3, .master_seed = 5, .derive_seeds = false});
    CHECK(same.accuracy_last.stddev == 0.0);
    CHECK(same.macro_f1.stddev == 0.0);
    CHECK(same.train_loss_curve.size() == 1);
    CHECK(same.train_loss_curve[0].stddev == 0.0);

    const auto spread = run_experiment(factory, data, data, plan, {.runs = 3, .master_seed = 5});
    CHECK(spread.seeds.size() == 3);
    CHECK(spread.seeds[0] != spread.seeds[1]);
    CHECK(std::isfinite(spread.accuracy_last.stddev));
    CHECK(spread.train_loss_curve[0].stddev > 0.0);

    const std::vector<double> v{1, 2, 3, 4};
    CHECK(mean_std(v).mean == doctest::Approx(2.5));
    CHECK(mean_std(v).stddev == doctest::Approx(std::sqrt(5.0 / 3)));
}

TEST_CASE("misclassification report exports each error") {
    const auto data = toy::bars(8, 7);
    auto g = build_hcrnet(2, 11);
    PhasePlan plan = quick_plan(6, 0, 3);
    const auto report = train(g, data, data, plan);
    REQUIRE(report.accuracy_last == 1.0);

    const auto clean = scratch("clean");
    const auto perfect = misclassification_report(g, data, clean);
    CHECK(perfect.misclassified == 0);
    CHECK(read_lines(clean / "misclassified" / "index.csv").size() == 1);
    const auto diagonal = read_lines(clean / "confusion.csv");
    REQUIRE(diagonal.size() == 3);
    CHECK(diagonal[1] == "vertical,8,0");
    CHECK(diagonal[2] == "horizontal,0,8");

    // Truth [0,0,1,1] against predictions [0,1,1,1]: one horizontal bar labelled vertical.
    LabeledDataset fixture;
    fixture.class_names = data.class_names;
    fixture.images = {data.images[0], data.images[1], data.images[3], data.images[5]};
    fixture.labels = {0, 0, 1, 1};
    const auto dir = scratch("fixture");
    const auto r = misclassification_report(g, fixture, dir);
    CHECK(r.misclassified == 1);
    CHECK(r.metrics.accuracy == doctest::Approx(0.75));
    std::vector<std::string> exported;
    for (const auto& e : fs::directory_iterator(dir / "misclassified"))
        if (e.path().extension() == ".pgm") exported.push_back(e.path().filename().string());
    REQUIRE(exported.size() == 1);
    CHECK(exported[0].rfind("0_as_1_", 0) == 0);

    const auto rows = read_lines(dir / "confusion.csv");
    REQUIRE(rows.size() == 3);
    CHECK(rows[1] == "vertical,1,1");
    CHECK(rows[2] == "horizontal,0,2");
    CHECK(read_lines(dir / "misclassified" / "index.csv").size() == 2);
}

TEST_CASE("history csv layout") {
    const auto dir = scratch("history");
    fs::create_directories(dir);
    write_history_csv(dir / "h.csv", {{1, Phase::phase1, 1e-4, 0.5, 0.25, 0.125}, {2, Phase::phase2, 1e-7, 0.25, 0.5, 0.75}});
    const auto lines = read_lines(dir / "h.csv");
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "epoch,phase,lr,train_loss,train_acc,test_acc");
    CHECK(lines[1] == "1,phase1,0.0001,0.5,0.25,0.125");
    CHECK(lines[2] == "2,phase2,1e-07,0.25,0.5,0.75");
}
