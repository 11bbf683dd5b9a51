// Integration tests driving the installed CLI binary (path in RPPG_BIN).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rppg/cnn/model.hpp"
#include "rppg/featex.hpp"
#include "rppg/ingest.hpp"
#include "rppg/synth.hpp"

using namespace rppg;
namespace fs = std::filesystem;

namespace {

fs::path cli() {
    const char* p = std::getenv("RPPG_BIN");
    REQUIRE_MESSAGE(p != nullptr, "RPPG_BIN must point at the rppg binary");
    return p;
}

int run(const std::string& args) {
    const std::string cmd = cli().string() + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "rppg_cli_test" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_manifest(const fs::path& path, const std::vector<ingest::ManifestEntry>& entries) {
    std::ofstream f(path);
    for (const auto& e : entries)
        f << e.frames_dir.string() << '\t' << e.landmarks_path.string() << '\t'
          << e.gt_path.string() << '\t' << e.fps << '\t' << e.gt_rate << '\n';
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::ifstream f(p);
    REQUIRE(f.good());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<std::string> row;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) row.push_back(field);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

TEST_CASE("extract on a 99-frame 25fps entry writes 3 feature images") {
    const auto dir = fresh_dir("extract99");
    synth::SynthSpec spec;
    spec.duration_s = 99.0 / 25.0;
    spec.frame_w = 64;
    spec.frame_h = 48;
    spec.float_mode = false;
    spec.seed = 31;
    const auto entry = synth::generate(spec, dir / "clip");
    write_manifest(dir / "manifest.tsv", {entry});

    REQUIRE(run("extract --manifest " + (dir / "manifest.tsv").string() + " --out " +
                (dir / "feats").string()) == 0);

    std::size_t fims = 0;
    for (const auto& e : fs::directory_iterator(dir / "feats"))
        if (e.path().extension() == ".fim") ++fims;
    CHECK(fims == 3);
    CHECK(read_csv(dir / "feats" / "features.csv").size() == 3);
}

TEST_CASE("eval of identical prediction and truth series reports zero error") {
    const auto dir = fresh_dir("eval_identity");
    fs::create_directories(dir / "preds");
    std::ofstream f(dir / "preds" / "pred_0000.csv");
    f << "second,pred_bpm,gt_bpm\n";
    for (int s = 0; s < 12; ++s) {
        const double v = 70.0 + 2.0 * s;
        f << s << ',' << v << ',' << v << '\n';
    }
    f.close();

    REQUIRE(run("eval --pred " + (dir / "preds").string() + " --out " + (dir / "out").string()) == 0);
    const auto rows = read_csv(dir / "out" / "report.csv");
    REQUIRE(rows.size() >= 2);
    // header: protocol,n,me,sde,rmse,me_rate,rho
    const auto& avg = rows[1];
    CHECK(avg[0] == "average");
    CHECK(std::stod(avg[2]) == doctest::Approx(0.0));
    CHECK(std::stod(avg[4]) == doctest::Approx(0.0));
}

TEST_CASE("CLI predictions equal library predictions on the same windows") {
    const auto dir = fresh_dir("compose");
    synth::SynthSpec spec;
    spec.duration_s = 4.0;
    spec.seed = 77;
    spec.noise_sigma = 0.5;
    const auto entry = synth::generate(spec, dir / "clip");
    write_manifest(dir / "manifest.tsv", {entry});

    const auto model = cnn::make_hr_model<float>(99);
    cnn::save_model(model, dir / "model.bin");

    REQUIRE(run("predict --manifest " + (dir / "manifest.tsv").string() + " --model " +
                (dir / "model.bin").string() + " --out " + (dir / "preds").string()) == 0);

    const auto rows = read_csv(dir / "preds" / "pred_0000.csv");
    REQUIRE(rows.size() == 5);  // header + 4 seconds

    const auto windows = ingest::windows(entry, {}, true);
    REQUIRE(windows.size() == 4);
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const auto fim = featex::extract(windows[i].roi_window);
        const double want = cnn::predict_hr(model, fim);
        CHECK(std::stod(rows[i + 1][1]) == doctest::Approx(want).epsilon(1e-8));
        CHECK(std::stoi(rows[i + 1][0]) == windows[i].window_index);
    }
}

TEST_CASE("exit codes: usage 1, data error 2") {
    CHECK(run("extract --bogus-flag") == 1);
    CHECK(run("frobnicate") == 1);
    const auto dir = fresh_dir("exit_codes");
    CHECK(run("extract --manifest " + (dir / "missing.tsv").string() + " --out " +
              (dir / "out").string()) == 2);
}

TEST_CASE("short-time eval window flag accepts unusual sizes with a warning") {
    const auto dir = fresh_dir("eval_window");
    fs::create_directories(dir / "preds");
    std::ofstream f(dir / "preds" / "pred_0000.csv");
    f << "second,pred_bpm,gt_bpm\n";
    for (int s = 0; s < 15; ++s) f << s << ',' << 80.0 + s << ',' << 81.0 + s << '\n';
    f.close();
    CHECK(run("eval --pred " + (dir / "preds").string() + " --out " + (dir / "out").string() +
              " --window 5") == 0);
    const auto rows = read_csv(dir / "out" / "report.csv");
    bool found = false;
    for (const auto& r : rows)
        if (r[0] == "short-time 5s") found = true;
    CHECK(found);
}
