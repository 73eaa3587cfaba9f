#include "hcrnet/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "hcrnet/augment.hpp"
#include "hcrnet/data_io.hpp"
#include "hcrnet/image.hpp"
#include "hcrnet/random.hpp"
#include "hcrnet/trainer.hpp"
#include "hcrnet/weights_io.hpp"

namespace hcr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kCheckpointFile = "checkpoint.hcrw";

struct SourceOptions {
    std::string idx_images;
    std::string idx_labels;
    std::string images_dir;
    std::string strokes_dir;
    bool no_auto_invert = false;

    bool given() const { return !idx_images.empty() || !idx_labels.empty() || !images_dir.empty() || !strokes_dir.empty(); }

    void check(const std::string& what) const {
        const int n = (!idx_images.empty() || !idx_labels.empty()) + !images_dir.empty() + !strokes_dir.empty();
        if (n != 1) throw CLI::ValidationError(what + ": give exactly one dataset source");
        if (!idx_images.empty() != !idx_labels.empty()) {
            throw CLI::ValidationError(what + ": IDX input needs both images and labels files");
        }
    }

    LabeledDataset load() const {
        if (!idx_images.empty()) return load_idx(idx_images, idx_labels);
        if (!images_dir.empty()) return load_image_dir(images_dir, {.auto_invert = !no_auto_invert});
        return load_stroke_dir(strokes_dir);
    }

    json describe() const {
        if (!idx_images.empty()) return {{"kind", "idx"}, {"images", idx_images}, {"labels", idx_labels}};
        if (!images_dir.empty()) return {{"kind", "image-dir"}, {"root", images_dir}, {"auto_invert", !no_auto_invert}};
        return {{"kind", "stroke-dir"}, {"root", strokes_dir}};
    }
};

void add_source_flags(CLI::App* cmd, SourceOptions& s, const std::string& prefix = "") {
    const std::string what = prefix.empty() ? "" : "test ";
    cmd->add_option("--" + prefix + "idx-images", s.idx_images, "IDX image file for the " + what + "data");
    cmd->add_option("--" + prefix + "idx-labels", s.idx_labels, "IDX label file for the " + what + "data");
    cmd->add_option("--" + prefix + "images-dir", s.images_dir, "Class-per-directory PGM tree for the " + what + "data");
    cmd->add_option("--" + prefix + "strokes-dir", s.strokes_dir, "Directory of JSON stroke logs for the " + what + "data");
}

struct AugmentFlags {
    double rotation = 10.0;
    double shift = 0.05;
    double shear = 0.05;
    double zoom = 0.05;

    void add(CLI::App* cmd) {
        cmd->add_option("--rotation", rotation, "Max rotation in degrees")->capture_default_str();
        cmd->add_option("--shift", shift, "Max shift as a fraction of the image side")->capture_default_str();
        cmd->add_option("--shear", shear, "Max shear intensity")->capture_default_str();
        cmd->add_option("--zoom", zoom, "Max zoom deviation from 1")->capture_default_str();
    }

    AugmentConfig config(bool enabled) const {
        AugmentConfig c{rotation, shift, shear, zoom, enabled};
        c.validate();
        return c;
    }
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory " + dir.string());
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

// Brings `d` onto `names` (extending numeric class lists when needed) so train
// and test share one label space.
void align_classes(LabeledDataset& d, const std::vector<std::string>& names) {
    if (d.class_names == names) return;
    std::vector<int> remap(d.class_names.size());
    for (std::size_t c = 0; c < d.class_names.size(); ++c) {
        const auto it = std::find(names.begin(), names.end(), d.class_names[c]);
        if (it == names.end()) throw DataError("class \"" + d.class_names[c] + "\" is absent from the training classes");
        remap[c] = static_cast<int>(it - names.begin());
    }
    for (auto& l : d.labels) l = remap[static_cast<std::size_t>(l)];
    d.class_names = names;
}

void apply_class_count(LabeledDataset& d, std::size_t classes) {
    if (classes == 0 || classes == d.num_classes()) return;
    if (classes < d.num_classes()) {
        throw DataError("dataset has " + std::to_string(d.num_classes()) + " classes but --classes is " +
                        std::to_string(classes));
    }
    for (std::size_t c = d.num_classes(); c < classes; ++c) d.class_names.push_back(std::to_string(c));
}

json metrics_json(const Metrics& m) {
    return {{"accuracy", m.accuracy},
            {"macro_precision", m.macro_precision},
            {"macro_recall", m.macro_recall},
            {"macro_f1", m.macro_f1},
            {"total", m.total}};
}

void print_metrics(std::ostream& out, const Metrics& m, const std::vector<std::string>& names) {
    out << "accuracy        " << fmt(m.accuracy) << '\n'
        << "macro-precision " << fmt(m.macro_precision) << '\n'
        << "macro-recall    " << fmt(m.macro_recall) << '\n'
        << "macro-f1        " << fmt(m.macro_f1) << '\n'
        << "samples         " << m.total << '\n';
    out << "class      precision  recall     f1         support\n";
    for (std::size_t c = 0; c < m.per_class.size(); ++c) {
        const auto& pc = m.per_class[c];
        out << std::left << std::setw(10) << names[c] << ' ' << fmt(pc.precision) << "   " << fmt(pc.recall) << "   "
            << fmt(pc.f1) << "   " << pc.support << '\n';
    }
}

json schedule_json(const StaircaseSchedule& s) {
    json a = json::array();
    for (const auto& b : s.breakpoints()) a.push_back({{"start_epoch", b.start_epoch}, {"lr", b.learning_rate}});
    return a;
}

NetworkGraph load_graph_from_checkpoint(const std::string& path) {
    if (path.empty()) throw CLI::ValidationError("--checkpoint is required");
    if (!fs::exists(path)) throw DataError("checkpoint " + path + " does not exist");
    const auto archive = read_archive(path);
    NetworkGraph g = build_hcrnet(checkpoint_num_classes(archive), 0);
    load_checkpoint(g, archive);
    return g;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    SourceOptions data;
    SourceOptions test;
    double split = 0.8;
    std::optional<std::uint64_t> split_seed;
    std::size_t classes = 0;
    std::optional<int> epochs1;
    std::optional<int> epochs2;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    bool augment = false;
    AugmentFlags aug;
    std::string pretrained;
    std::string out_dir;
    std::size_t workers = 1;
    int runs = 1;
};

void save_run(const fs::path& dir, const NetworkGraph& g, const MetricsReport& r,
              const std::vector<std::string>& names) {
    ensure_dir(dir);
    write_archive(save_checkpoint(g), dir / kCheckpointFile);
    write_history_csv(dir / "history.csv", r.history);
    write_confusion_csv(dir / "confusion.csv", r.final_metrics, names);
    write_per_class_csv(dir / "per_class.csv", r.final_metrics, names);
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
    a.data.check("training data");
    if (a.test.given()) a.test.check("test data");
    if (a.runs < 1) throw CLI::ValidationError("--runs must be at least 1");
    ensure_dir(a.out_dir);

    LabeledDataset full = a.data.load();
    apply_class_count(full, a.classes);
    LabeledDataset train_set, test_set;
    const std::uint64_t split_seed = a.split_seed.value_or(a.seed);
    if (a.test.given()) {
        train_set = std::move(full);
        test_set = a.test.load();
        align_classes(test_set, train_set.class_names);
    } else {
        std::tie(train_set, test_set) = split_dataset(full, a.split, split_seed);
    }
    train_set.validate();
    test_set.validate();

    PhasePlan plan = PhasePlan::defaults(a.augment);
    if (a.epochs1) plan.epochs_phase1 = *a.epochs1;
    if (a.epochs2) plan.epochs_phase2 = *a.epochs2;
    plan.batch_size = a.batch_size;
    plan.seed = a.seed;
    plan.augmentation = a.aug.config(a.augment);
    plan.eval_workers = a.workers;
    plan.validate();

    std::optional<WeightArchive> pretrained;
    if (!a.pretrained.empty()) pretrained = read_archive(a.pretrained);
    const std::size_t classes = train_set.num_classes();
    auto make_graph = [&](std::uint64_t seed) {
        NetworkGraph g = build_hcrnet(classes, seed);
        if (pretrained) init_from_pretrained(g, *pretrained);
        return g;
    };

    const fs::path out_dir(a.out_dir);
    json summary;
    summary["format_version"] = kSummaryFormatVersion;
    summary["command"] = "train";
    summary["data"] = a.data.describe();
    summary["test_data"] = a.test.given() ? a.test.describe() : json(nullptr);
    summary["split"] = a.test.given() ? json(nullptr) : json{{"ratio", a.split}, {"seed", split_seed}, {"stratified", true}};
    summary["class_names"] = train_set.class_names;
    summary["train_size"] = train_set.size();
    summary["test_size"] = test_set.size();
    summary["pretrained"] = a.pretrained.empty() ? json(nullptr) : json(a.pretrained);
    summary["plan"] = {
        {"epochs_phase1", plan.epochs_phase1},
        {"epochs_phase2", plan.epochs_phase2},
        {"batch_size", plan.batch_size},
        {"seed", plan.seed},
        {"schedule_phase1", plan.epochs_phase1 ? schedule_json(default_schedule(Phase::phase1, plan.epochs_phase1)) : json::array()},
        {"schedule_phase2", plan.epochs_phase2 ? schedule_json(default_schedule(Phase::phase2, plan.epochs_phase2)) : json::array()},
        {"augmentation",
         {{"enabled", plan.augmentation.enabled},
          {"rotation_deg", plan.augmentation.rotation_deg},
          {"shift_frac", plan.augmentation.shift_frac},
          {"shear", plan.augmentation.shear},
          {"zoom_frac", plan.augmentation.zoom_frac}}},
        {"optimizer", {{"name", "rmsprop"}, {"rho", plan.rmsprop.rho}, {"epsilon", plan.rmsprop.epsilon}}},
        {"loss", {{"name", "categorical_crossentropy"}, {"probability_floor", kProbabilityFloor}}},
        {"batchnorm", {{"momentum", kBatchNormMomentum}, {"epsilon", kBatchNormEpsilon}}},
        {"dropout", kHeadDropout},
        {"weight_init", "glorot_uniform"},
    };
    summary["runs"] = a.runs;
    summary["workers"] = a.workers;

    auto progress = [&](const EpochRecord& r) {
        err << "epoch " << r.epoch << " [" << to_string(r.phase) << "] lr=" << r.lr << " loss=" << fmt(r.train_loss)
            << " train_acc=" << fmt(r.train_acc) << " test_acc=" << fmt(r.test_acc) << '\n';
    };

    if (a.runs == 1) {
        NetworkGraph g = make_graph(plan.seed);
        const auto report = train(g, train_set, test_set, plan, progress);
        save_run(out_dir, g, report, train_set.class_names);
        summary["results"] = metrics_json(report.final_metrics);
        summary["results"]["accuracy_last"] = report.accuracy_last;
        summary["results"]["accuracy_best"] = report.accuracy_best;
        write_json(out_dir / "summary.json", summary);
        out << "test accuracy (last epoch) " << fmt(report.accuracy_last) << '\n'
            << "test accuracy (best epoch) " << fmt(report.accuracy_best) << '\n';
        print_metrics(out, report.final_metrics, train_set.class_names);
        return kOk;
    }

    // Same seed derivation as run_experiment(); runs are driven here so each
    // checkpoint can be written.
    ExperimentReport rep;
    for (int r = 0; r < a.runs; ++r) {
        const std::uint64_t seed = mix_seed(plan.seed, static_cast<std::uint64_t>(r));
        PhasePlan run_plan = plan;
        run_plan.seed = seed;
        NetworkGraph g = make_graph(seed);
        err << "run " << (r + 1) << "/" << a.runs << " seed " << seed << '\n';
        auto report = train(g, train_set, test_set, run_plan, progress);
        save_run(out_dir / ("run_" + std::to_string(r + 1)), g, report, train_set.class_names);
        rep.runs.push_back(std::move(report));
        rep.seeds.push_back(seed);
    }
    auto stats = [&](auto field) {
        std::vector<double> v;
        for (const auto& run : rep.runs) v.push_back(field(run));
        const auto s = mean_std(v);
        return json{{"mean", s.mean}, {"std", s.stddev}, {"values", v}};
    };
    summary["run_seeds"] = rep.seeds;
    summary["results"] = {
        {"accuracy_last", stats([](const MetricsReport& m) { return m.accuracy_last; })},
        {"accuracy_best", stats([](const MetricsReport& m) { return m.accuracy_best; })},
        {"macro_precision", stats([](const MetricsReport& m) { return m.final_metrics.macro_precision; })},
        {"macro_recall", stats([](const MetricsReport& m) { return m.final_metrics.macro_recall; })},
        {"macro_f1", stats([](const MetricsReport& m) { return m.final_metrics.macro_f1; })},
    };
    {
        std::ofstream curve(out_dir / "curve.csv", std::ios::trunc);
        curve << "epoch,test_acc_mean,test_acc_std,train_loss_mean,train_loss_std\n";
        for (std::size_t e = 0; e < rep.runs.front().history.size(); ++e) {
            std::vector<double> acc, loss;
            for (const auto& run : rep.runs) {
                acc.push_back(run.history[e].test_acc);
                loss.push_back(run.history[e].train_loss);
            }
            const auto sa = mean_std(acc), sl = mean_std(loss);
            curve << (e + 1) << ',' << fmt(sa.mean) << ',' << fmt(sa.stddev) << ',' << fmt(sl.mean) << ','
                  << fmt(sl.stddev) << '\n';
        }
    }
    write_json(out_dir / "summary.json", summary);
    const auto& last = summary["results"]["accuracy_last"];
    out << "test accuracy (last epoch) mean " << fmt(last["mean"].get<double>()) << " std "
        << fmt(last["std"].get<double>()) << " over " << a.runs << " runs\n";
    return kOk;
}

// ---------------------------------------------------------------- evaluate / analyze

struct EvalArgs {
    SourceOptions data;
    std::string checkpoint;
    std::string out_dir;
    std::size_t workers = 1;
};

LabeledDataset load_eval_data(const EvalArgs& a, const NetworkGraph& g) {
    a.data.check("evaluation data");
    LabeledDataset d = a.data.load();
    apply_class_count(d, g.num_classes);
    d.validate();
    return d;
}

int cmd_evaluate(const EvalArgs& a, std::ostream& out) {
    NetworkGraph g = load_graph_from_checkpoint(a.checkpoint);
    const auto d = load_eval_data(a, g);
    const auto m = evaluate(g, d, a.workers);
    print_metrics(out, m, d.class_names);
    if (!a.out_dir.empty()) {
        const fs::path dir(a.out_dir);
        ensure_dir(dir);
        write_confusion_csv(dir / "confusion.csv", m, d.class_names);
        write_per_class_csv(dir / "per_class.csv", m, d.class_names);
        json summary = {{"format_version", kSummaryFormatVersion},
                        {"command", "evaluate"},
                        {"checkpoint", a.checkpoint},
                        {"data", a.data.describe()},
                        {"class_names", d.class_names},
                        {"results", metrics_json(m)}};
        write_json(dir / "summary.json", summary);
    }
    return kOk;
}

int cmd_analyze(const EvalArgs& a, std::ostream& out) {
    if (a.out_dir.empty()) throw CLI::ValidationError("--out-dir is required");
    NetworkGraph g = load_graph_from_checkpoint(a.checkpoint);
    const auto d = load_eval_data(a, g);
    const auto rep = misclassification_report(g, d, a.out_dir, a.workers);
    json summary = {{"format_version", kSummaryFormatVersion},
                    {"command", "analyze"},
                    {"checkpoint", a.checkpoint},
                    {"data", a.data.describe()},
                    {"class_names", d.class_names},
                    {"misclassified", rep.misclassified},
                    {"results", metrics_json(rep.metrics)}};
    write_json(fs::path(a.out_dir) / "summary.json", summary);
    out << "misclassified " << rep.misclassified << " of " << rep.metrics.total << '\n';
    print_metrics(out, rep.metrics, d.class_names);
    return kOk;
}

// ---------------------------------------------------------------- preview-augment

struct PreviewArgs {
    std::string image;
    std::string idx_images;
    std::size_t index = 0;
    std::size_t variants = 8;
    std::uint64_t seed = 0;
    AugmentFlags aug;
    std::string out_dir;
};

int cmd_preview(const PreviewArgs& a, std::ostream& out) {
    if (a.image.empty() == a.idx_images.empty()) {
        throw CLI::ValidationError("give exactly one of --image or --idx-images");
    }
    if (a.variants < 1) throw CLI::ValidationError("--variants must be at least 1");
    Tensor source;
    if (!a.image.empty()) {
        const GrayImage img = read_pgm(a.image);
        std::vector<float> plane(img.pixels.size());
        for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = img.pixels[i] / 255.0f;
        source = gray_to_input(resize_bilinear(plane, img.height, img.width, 32, 32));
    } else {
        const auto images = load_idx_images(a.idx_images);
        if (a.index >= images.size()) throw DataError("--index beyond the IDX image count");
        source = images[a.index];
    }
    const AugmentConfig cfg = a.aug.config(true);
    const fs::path dir(a.out_dir);
    ensure_dir(dir);
    write_pgm(dir / "source.pgm", to_gray_image(source));

    // Contact sheet: source first, then the variants, 1-pixel gray gutters.
    const std::size_t tiles = a.variants + 1;
    const std::size_t cols = std::min<std::size_t>(tiles, 8);
    const std::size_t rows = (tiles + cols - 1) / cols;
    GrayImage sheet;
    sheet.width = cols * 33 + 1;
    sheet.height = rows * 33 + 1;
    sheet.pixels.assign(sheet.width * sheet.height, 128);
    auto place = [&](std::size_t tile, const GrayImage& g) {
        const std::size_t top = (tile / cols) * 33 + 1, left = (tile % cols) * 33 + 1;
        for (std::size_t r = 0; r < 32; ++r) {
            for (std::size_t c = 0; c < 32; ++c) sheet.pixels[(top + r) * sheet.width + left + c] = g.at(r, c);
        }
    };
    place(0, to_gray_image(source));
    for (std::size_t v = 0; v < a.variants; ++v) {
        const auto t = sample_affine(cfg, mix_seed(a.seed, v));
        const GrayImage g = to_gray_image(apply_affine(source, t));
        write_pgm(dir / ("variant_" + std::to_string(v + 1) + ".pgm"), g);
        place(v + 1, g);
    }
    write_pgm(dir / "augment_preview.pgm", sheet);
    json summary = {{"format_version", kSummaryFormatVersion},
                    {"command", "preview-augment"},
                    {"source", a.image.empty() ? a.idx_images : a.image},
                    {"index", a.index},
                    {"variants", a.variants},
                    {"seed", a.seed},
                    {"augmentation",
                     {{"rotation_deg", cfg.rotation_deg},
                      {"shift_frac", cfg.shift_frac},
                      {"shear", cfg.shear},
                      {"zoom_frac", cfg.zoom_frac}}}};
    write_json(dir / "summary.json", summary);
    out << "wrote " << a.variants << " variants to " << dir.string() << '\n';
    return kOk;
}

// ---------------------------------------------------------------- export-info

int cmd_export_info(std::size_t classes, std::ostream& out) {
    NetworkGraph g = build_hcrnet(classes, 0);
    auto print_counts = [&](const char* label) {
        const auto c = param_count(g);
        out << label << ": total " << c.total << ", trainable " << c.trainable << ", non-trainable "
            << c.non_trainable << '\n';
    };
    out << std::left << std::setw(44) << "Layer (type)" << std::setw(22) << "Output Shape" << "#Params\n";
    out << std::setw(44) << "input_layer (InputLayer)" << std::setw(22) << "(None, 32, 32, 3)" << 0 << '\n';
    for (const auto& l : g.layers) {
        std::string shape = "(None";
        for (auto d : l.output_shape) shape += ", " + std::to_string(d);
        shape += ")";
        out << std::setw(44) << (l.name + " (" + std::string(to_string(l.params.kind)) + ")") << std::setw(22) << shape
            << layer_param_count(l) << '\n';
    }
    print_counts("phase1");
    set_phase(g, Phase::phase2);
    print_counts("phase2");
    return kOk;
}

int run_impl(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"HCR-Net handwritten character recognition: training, evaluation and analysis", "hcrnet"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "Two-phase training run");
    add_source_flags(train_cmd, train_args.data);
    add_source_flags(train_cmd, train_args.test, "test-");
    train_cmd->add_flag("--no-auto-invert", train_args.data.no_auto_invert, "Keep white-background images as-is");
    train_cmd->add_option("--split", train_args.split, "Train fraction when no test source is given")->capture_default_str();
    train_cmd->add_option("--split-seed", train_args.split_seed, "Seed of the stratified split (defaults to --seed)");
    train_cmd->add_option("--classes", train_args.classes, "Number of classes (inferred when omitted)");
    train_cmd->add_option("--epochs1", train_args.epochs1, "Phase 1 epochs (default 30, or 10 with --augment)");
    train_cmd->add_option("--epochs2", train_args.epochs2, "Phase 2 epochs (default 20, or 50 with --augment)");
    train_cmd->add_option("--batch-size", train_args.batch_size, "Mini-batch size")->capture_default_str();
    train_cmd->add_option("--seed", train_args.seed, "Master seed")->capture_default_str();
    train_cmd->add_flag("--augment", train_args.augment, "Enable on-the-fly affine augmentation");
    train_args.aug.add(train_cmd);
    train_cmd->add_option("--pretrained", train_args.pretrained, "Weight archive for block1_conv1..block4_conv2");
    train_cmd->add_option("--out-dir", train_args.out_dir, "Output directory")->required();
    train_cmd->add_option("--workers", train_args.workers, "Evaluation threads (1 is bit-reproducible)")->capture_default_str();
    train_cmd->add_option("--runs", train_args.runs, "Independent runs to average")->capture_default_str();

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("evaluate", "Score a checkpoint on a dataset");
    add_source_flags(eval_cmd, eval_args.data);
    eval_cmd->add_flag("--no-auto-invert", eval_args.data.no_auto_invert, "Keep white-background images as-is");
    eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint archive")->required();
    eval_cmd->add_option("--out-dir", eval_args.out_dir, "Directory for metric CSVs");
    eval_cmd->add_option("--workers", eval_args.workers, "Evaluation threads")->capture_default_str();

    EvalArgs analyze_args;
    auto* analyze_cmd = app.add_subcommand("analyze", "Export the confusion matrix and misclassified samples");
    add_source_flags(analyze_cmd, analyze_args.data);
    analyze_cmd->add_flag("--no-auto-invert", analyze_args.data.no_auto_invert, "Keep white-background images as-is");
    analyze_cmd->add_option("--checkpoint", analyze_args.checkpoint, "Checkpoint archive")->required();
    analyze_cmd->add_option("--out-dir", analyze_args.out_dir, "Report directory")->required();
    analyze_cmd->add_option("--workers", analyze_args.workers, "Evaluation threads")->capture_default_str();

    PreviewArgs preview_args;
    auto* preview_cmd = app.add_subcommand("preview-augment", "Write augmented variants of one image");
    preview_cmd->add_option("--image", preview_args.image, "Source PGM image");
    preview_cmd->add_option("--idx-images", preview_args.idx_images, "IDX image file to take the source from");
    preview_cmd->add_option("--index", preview_args.index, "Image index within --idx-images")->capture_default_str();
    preview_cmd->add_option("--variants", preview_args.variants, "Number of variants")->capture_default_str();
    preview_cmd->add_option("--seed", preview_args.seed, "Seed")->capture_default_str();
    preview_args.aug.add(preview_cmd);
    preview_cmd->add_option("--out-dir", preview_args.out_dir, "Output directory")->required();

    std::size_t info_classes = 10;
    auto* info_cmd = app.add_subcommand("export-info", "Print the layer and parameter listing");
    info_cmd->add_option("--classes", info_classes, "Number of classes")->capture_default_str();

    std::vector<const char*> argv{"hcrnet"};
    for (const auto& s : args) argv.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
        if (train_cmd->parsed()) return cmd_train(train_args, out, err);
        if (eval_cmd->parsed()) return cmd_evaluate(eval_args, out);
        if (analyze_cmd->parsed()) return cmd_analyze(analyze_args, out);
        if (preview_cmd->parsed()) return cmd_preview(preview_args, out);
        if (info_cmd->parsed()) return cmd_export_info(info_classes, out);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
        return kUsage;
    }
    return kUsage;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    try {
        return run_impl(args, out, err);
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << '\n';
        return kNumericFailure;
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << '\n';
        return kUsage;
    } catch (const Error& e) {
        err << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    }
}

}  // namespace hcr::cli
