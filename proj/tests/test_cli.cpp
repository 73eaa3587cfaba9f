#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "hcrnet/cli.hpp"
#include "hcrnet/image.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kTiny = std::string(HCRNET_TEST_FIXTURE_DIR) + "/tiny";

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = hcr::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("hcrnet_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

std::size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) ++n;
    return n;
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// A checkpoint that classifies the tiny fixture perfectly, trained once.
const fs::path& trained_dir() {
    static const fs::path dir = [] {
        const auto d = scratch("trained");
        const auto r = run({"train", "--images-dir", kTiny, "--classes", "2", "--epochs1", "8", "--epochs2", "0",
                            "--batch-size", "4", "--seed", "3", "--out-dir", d.string()});
        REQUIRE_MESSAGE(r.code == 0, r.err);
        return d;
    }();
    return dir;
}

}  // namespace

TEST_CASE("train on the tiny fixture") {
    const auto dir = scratch("train");
    const auto r = run({"train", "--images-dir", kTiny, "--classes", "2", "--epochs1", "3", "--epochs2", "0", "--seed",
                        "1", "--out-dir", dir.string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "checkpoint.hcrw"));
    CHECK(line_count(dir / "history.csv") == 4);
    CHECK(fs::exists(dir / "confusion.csv"));
    CHECK(fs::exists(dir / "per_class.csv"));

    const auto s = read_json(dir / "summary.json");
    CHECK(s["format_version"] == hcr::cli::kSummaryFormatVersion);
    CHECK(s["plan"]["epochs_phase1"] == 3);
    CHECK(s["plan"]["epochs_phase2"] == 0);
    CHECK(s["plan"]["batch_size"] == 32);
    CHECK(s["plan"]["seed"] == 1);
    CHECK(s["plan"]["dropout"] == 0.35);
    CHECK(s["split"]["ratio"] == 0.8);
    CHECK(s["class_names"] == json{"horizontal", "vertical"});
    CHECK(s["train_size"].get<int>() + s["test_size"].get<int>() == 16);
}

TEST_CASE("identical runs write identical files") {
    const auto a = scratch("det_a"), b = scratch("det_b");
    for (const auto& d : {a, b}) {
        const auto r = run({"train", "--images-dir", kTiny, "--epochs1", "2", "--epochs2", "0", "--seed", "9",
                            "--augment", "--out-dir", d.string()});
        REQUIRE(r.code == 0);
    }
    CHECK(slurp(a / "history.csv") == slurp(b / "history.csv"));
    CHECK(slurp(a / "confusion.csv") == slurp(b / "confusion.csv"));
    CHECK(slurp(a / "checkpoint.hcrw") == slurp(b / "checkpoint.hcrw"));
}

TEST_CASE("augment switches the epoch defaults") {
    const auto dir = scratch("augment");
    const auto r = run({"train", "--images-dir", kTiny, "--augment", "--batch-size", "16", "--seed", "2", "--out-dir",
                        dir.string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
    const auto s = read_json(dir / "summary.json");
    CHECK(s["plan"]["epochs_phase1"] == 10);
    CHECK(s["plan"]["epochs_phase2"] == 50);
    CHECK(s["plan"]["augmentation"]["enabled"] == true);
    CHECK(line_count(dir / "history.csv") == 61);
}

TEST_CASE("usage and data errors map to exit codes") {
    CHECK(run({}).code == hcr::cli::kUsage);
    CHECK(run({"bogus"}).code == hcr::cli::kUsage);
    const auto none = run({"train", "--out-dir", scratch("none").string()});
    CHECK(none.code == hcr::cli::kUsage);
    CHECK_FALSE(none.err.empty());
    CHECK(run({"train", "--images-dir", kTiny, "--strokes-dir", kTiny, "--out-dir", scratch("two").string()}).code ==
          hcr::cli::kUsage);
    const auto missing = run({"train", "--images-dir", "/nonexistent/tree", "--out-dir", scratch("missing").string()});
    CHECK(missing.code == hcr::cli::kDataError);
    CHECK_FALSE(missing.err.empty());
    CHECK(run({"evaluate", "--checkpoint", "/nonexistent.hcrw", "--images-dir", kTiny}).code == hcr::cli::kDataError);
    CHECK(run({"train", "--images-dir", kTiny, "--epochs2", "4", "--out-dir", scratch("short").string()}).code ==
          hcr::cli::kUsage);
}

TEST_CASE("evaluate the trained checkpoint on its own fixture") {
    const auto out = scratch("evaluate");
    const auto r = run({"evaluate", "--checkpoint", (trained_dir() / "checkpoint.hcrw").string(), "--images-dir", kTiny,
                        "--out-dir", out.string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("accuracy        1.000000") != std::string::npos);
    CHECK(read_json(out / "summary.json")["results"]["accuracy"] == 1.0);
}

TEST_CASE("analyze a perfect classifier") {
    const auto out = scratch("analyze");
    const auto r = run({"analyze", "--checkpoint", (trained_dir() / "checkpoint.hcrw").string(), "--images-dir", kTiny,
                        "--out-dir", out.string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("misclassified 0 of 16") != std::string::npos);
    std::size_t pgm = 0;
    for (const auto& e : fs::directory_iterator(out / "misclassified")) pgm += e.path().extension() == ".pgm";
    CHECK(pgm == 0);
    CHECK(line_count(out / "confusion.csv") == 3);
}

TEST_CASE("preview with zero magnitudes reproduces the source") {
    const auto out = scratch("preview");
    const auto src = kTiny + "/vertical/0.pgm";
    const auto r = run({"preview-augment", "--image", src, "--variants", "4", "--rotation", "0", "--shift", "0",
                        "--shear", "0", "--zoom", "0", "--out-dir", out.string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
    const auto source = hcr::read_pgm(out / "source.pgm");
    CHECK(source.pixels == hcr::read_pgm(src).pixels);
    for (int v = 1; v <= 4; ++v) CHECK(hcr::read_pgm(out / ("variant_" + std::to_string(v) + ".pgm")).pixels == source.pixels);
    const auto sheet = hcr::read_pgm(out / "augment_preview.pgm");
    CHECK(sheet.width == 5 * 33 + 1);

    const auto moved = scratch("preview_moved");
    REQUIRE(run({"preview-augment", "--image", src, "--variants", "3", "--seed", "4", "--out-dir", moved.string()}).code == 0);
    CHECK(hcr::read_pgm(moved / "variant_1.pgm").pixels != source.pixels);
    CHECK(read_json(moved / "summary.json")["augmentation"]["rotation_deg"] == 10.0);
}

TEST_CASE("export-info lists the layers") {
    const auto r = run({"export-info"});
    REQUIRE(r.code == 0);
    for (const char* s : {"block1_conv1", "dense_2", "total 9744202", "trainable 4465674", "trainable 9741130", "non-trainable 3072", "2359808"}) {
        INFO(s);
        CHECK(r.out.find(s) != std::string::npos);
    }
    CHECK(run({"export-info", "--classes", "2"}).out.find("1026") != std::string::npos);
}

TEST_CASE("the executable reports exit codes") {
    const std::string cli = HCRNET_CLI_PATH;
    CHECK(std::system((cli + " export-info > /dev/null").c_str()) == 0);
    const int status = std::system((cli + " train --out-dir /tmp/hcrnet_cli_exe > /dev/null 2>&1").c_str());
    CHECK(WEXITSTATUS(status) == 1);
}
