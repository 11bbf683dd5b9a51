// rppg: contactless heart-rate estimation pipeline.
//
// Subcommands: synth, extract, train, predict, eval, bench.
// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

#include <CLI11.hpp>
#include <Eigen/Core>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rppg/cnn/model.hpp"
#include "rppg/cnn/train.hpp"
#include "rppg/errors.hpp"
#include "rppg/featex.hpp"
#include "rppg/ingest.hpp"
#include "rppg/metrics.hpp"
#include "rppg/synth.hpp"

namespace fs = std::filesystem;
using namespace rppg;

namespace {

void set_threads(int n) {
    Eigen::setNbThreads(n);
#ifdef _OPENMP
    omp_set_num_threads(n);
#endif
}

std::string fim_name(std::size_t clip, int second) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "c%04zu_w%04d.fim", clip, second);
    return buf;
}

std::string csv_rho(const std::optional<double>& rho) {
    if (!rho) return "undefined";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", *rho);
    return buf;
}

void write_report_row(std::ostream& os, const std::string& name, const metrics::EvalReport& r) {
    os << name << ',' << r.n << ',' << std::fixed << std::setprecision(6) << r.me << ',' << r.sde
       << ',' << r.rmse << ',' << r.me_rate << ',' << csv_rho(r.rho) << '\n';
}

void print_report_table(const std::vector<std::pair<std::string, metrics::EvalReport>>& rows) {
    std::cout << std::left << std::setw(18) << "Protocol" << std::setw(16) << "Me(SDe)"
              << std::setw(10) << "RMSE" << std::setw(10) << "MeRate" << std::setw(8) << "rho"
              << "N\n";
    for (const auto& [name, r] : rows) {
        char me_sde[48], me_rate[16];
        std::snprintf(me_sde, sizeof(me_sde), "%.2f(%.2f)", r.me, r.sde);
        std::snprintf(me_rate, sizeof(me_rate), "%.2f%%", 100.0 * r.me_rate);
        std::cout << std::left << std::setw(18) << name << std::setw(16) << me_sde << std::setw(10)
                  << std::fixed << std::setprecision(2) << r.rmse << std::setw(10) << me_rate
                  << std::setw(8) << (r.rho ? (std::to_string(*r.rho).substr(0, 6)) : "n/a")
                  << r.n << '\n';
    }
}

struct FeatureFlags {
    int fps = 25;
    int pyramid_level = 4;
    double f_low = 0.75;
    double f_high = 4.0;

    featex::FeatureConfig config() const {
        featex::FeatureConfig cfg;
        cfg.fps = fps;
        cfg.pyramid_level = pyramid_level;
        cfg.f_low = f_low;
        cfg.f_high = f_high;
        // The reshaped column must have fps rows: factor fps as close to
        // square as possible and scale by 2^level (80x80 at the defaults).
        const int side = 1 << pyramid_level;
        int a = static_cast<int>(std::sqrt(static_cast<double>(cfg.fps)));
        while (a > 1 && cfg.fps % a != 0) --a;
        cfg.pre_resize_h = a * side;
        cfg.pre_resize_w = (cfg.fps / a) * side;
        cfg.validate();
        return cfg;
    }

    void add_flags(CLI::App* cmd) {
        cmd->add_option("--fps", fps, "feature image width (temporal samples per second)");
        cmd->add_option("--pyramid-level", pyramid_level, "Gaussian pyramid level");
        cmd->add_option("--f-low", f_low, "bandpass low cut-off in Hz");
        cmd->add_option("--f-high", f_high, "bandpass high cut-off in Hz");
    }
};

// --- synth -------------------------------------------------------------------

struct SynthArgs {
    std::string out;
    int clips = 10;
    double duration = 30.0;
    double hr_lo = 60.0, hr_hi = 120.0;
    int fps = 25, gt_rate = 25;
    int frame_w = 128, frame_h = 96;
    double noise = 1.0;
    double amp = 3.0;
    double drift_x = 0.0, drift_y = 0.0;
    std::string mode = "float";
    std::uint64_t seed = 1;
};

int cmd_synth(const SynthArgs& a) {
    synth::SynthSpec tmpl;
    tmpl.duration_s = a.duration;
    tmpl.fps = a.fps;
    tmpl.gt_rate = a.gt_rate;
    tmpl.frame_w = a.frame_w;
    tmpl.frame_h = a.frame_h;
    tmpl.noise_sigma = a.noise;
    tmpl.amplitude = {a.amp / 2.0, a.amp, a.amp / 2.0};
    tmpl.drift_x = a.drift_x;
    tmpl.drift_y = a.drift_y;
    tmpl.float_mode = a.mode == "float";
    tmpl.seed = a.seed;

    const auto corpus = synth::make_training_corpus(a.clips, a.hr_lo, a.hr_hi, tmpl, a.out);
    std::cout << "wrote " << a.clips << " clips under " << a.out << "\n"
              << "manifest: " << corpus.manifest_path.string() << "\n";
    return 0;
}

// --- extract -----------------------------------------------------------------

int cmd_extract(const std::string& manifest_path, const std::string& out_dir,
                const FeatureFlags& ff) {
    const auto cfg = ff.config();
    const auto manifest = ingest::load_manifest(manifest_path);
    fs::create_directories(out_dir);

    std::ofstream labels(fs::path(out_dir) / "features.csv");
    if (!labels) throw data_error("extract: cannot write features.csv");
    labels << std::setprecision(10);

    std::size_t total = 0;
    for (std::size_t e = 0; e < manifest.entries.size(); ++e) {
        const auto windows = ingest::windows(manifest.entries[e]);
        for (const auto& w : windows) {
            const auto fim = featex::extract(w.roi_window, cfg);
            const std::string name = fim_name(e, w.window_index);
            featex::write_fim(fs::path(out_dir) / name, fim);
            labels << name << ',' << w.label_bpm << '\n';
            ++total;
        }
    }
    std::cout << "extracted " << total << " feature images from " << manifest.entries.size()
              << " clips into " << out_dir << "\n";
    return 0;
}

// --- train -------------------------------------------------------------------

cnn::Dataset<float> load_feature_dataset(const fs::path& csv) {
    std::ifstream f(csv);
    if (!f) throw data_error("train: cannot open " + csv.string());
    const fs::path base = csv.has_parent_path() ? csv.parent_path() : fs::path(".");

    cnn::Dataset<float> ds;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto comma = line.rfind(',');
        if (comma == std::string::npos)
            throw data_error("train: " + csv.string() + " line " + std::to_string(line_no) +
                             ": expected fim_path,label_bpm");
        fs::path p(line.substr(0, comma));
        if (!p.is_absolute()) p = base / p;
        const double label = std::stod(line.substr(comma + 1));
        const auto fim = featex::read_fim(p);
        if (ds.images.empty())
            ds.shape = {static_cast<int>(fim.rows()), static_cast<int>(fim.cols()), 3};
        ds.images.push_back(cnn::sample_from_feature<float>(fim));
        ds.labels_bpm.push_back(label);
    }
    if (ds.images.empty()) throw data_error("train: no samples in " + csv.string());
    return ds;
}

struct TrainArgs {
    std::string features;
    std::string out;
    std::string log;
    int batch_size = 20;
    int iters = 15000;
    double lr = 0.01;
    double momentum = 0.9;
    int lr_step = 5000;
    double lr_gamma = 0.1;
    double test_fraction = 0.125;
    double val_fraction = 0.1;
    double dropout_keep = 0.4;
    std::uint64_t seed = 1;
    bool verbose = false;
};

int cmd_train(const TrainArgs& a) {
    const auto all = load_feature_dataset(a.features);
    if (!(all.shape == cnn::Shape{25, 25, 3}))
        throw data_error("train: feature images must be 25x25x3, got " + all.shape.str());

    // Seeded test split over feature images, held out from training entirely.
    std::vector<std::size_t> order(all.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng split_rng = Rng::derive(a.seed, 0x7E57);
    split_rng.shuffle(order);
    const auto n_test = static_cast<std::size_t>(a.test_fraction * static_cast<double>(all.size()));
    if (n_test >= all.size()) throw data_error("train: test fraction leaves no training data");

    cnn::Dataset<float> ds;
    ds.shape = all.shape;
    for (std::size_t i = n_test; i < order.size(); ++i) {
        ds.images.push_back(all.images[order[i]]);
        ds.labels_bpm.push_back(all.labels_bpm[order[i]]);
    }

    cnn::TrainConfig cfg;
    cfg.batch_size = a.batch_size;
    cfg.max_iterations = a.iters;
    cfg.base_lr = a.lr;
    cfg.momentum = a.momentum;
    cfg.lr_step = a.lr_step;
    cfg.lr_gamma = a.lr_gamma;
    cfg.val_fraction = a.val_fraction;
    cfg.dropout_keep = a.dropout_keep;
    cfg.seed = a.seed;
    cfg.verbose = a.verbose;

    auto model = cnn::make_hr_model<float>(a.seed);
    const auto result = cnn::train(model, ds, cfg);
    cnn::save_model(model, a.out);

    if (!a.log.empty()) {
        std::ofstream log(a.log);
        if (!log) throw data_error("train: cannot write " + a.log);
        log << "iteration,train_loss,val_loss\n" << std::setprecision(9);
        for (const auto& row : result.log) {
            log << row.iteration << ',' << row.train_loss << ',';
            if (row.val_loss) log << *row.val_loss;
            log << '\n';
        }
    }
    std::cout << "trained on " << ds.size() << " samples; final train loss "
              << result.final_train_loss;
    if (result.best_val_iteration >= 0)
        std::cout << "; best val loss " << result.best_val_loss << " at iteration "
                  << result.best_val_iteration;
    std::cout << "\nmodel: " << a.out << "\n";

    // Held-out evaluation over the test split.
    if (n_test > 0) {
        metrics::HrPairSeries series;
        std::ofstream test_csv(fs::path(a.out).string() + ".test.csv");
        test_csv << "label_bpm,pred_bpm\n" << std::setprecision(10);
        for (std::size_t i = 0; i < n_test; ++i) {
            cnn::Batch<float> x(1, {25, 25, 3});
            x.data = all.images[order[i]];
            Rng r(0);
            const auto y = model.forward_batch(x, cnn::Mode::Infer, r);
            const double bpm =
                std::clamp(cnn::denormalize_label(static_cast<double>(y.data(0, 0))), 45.0, 240.0);
            series.pairs.push_back({bpm, all.labels_bpm[order[i]]});
            test_csv << all.labels_bpm[order[i]] << ',' << bpm << '\n';
        }
        const auto r = metrics::evaluate(series);
        std::cout << "held-out test (" << n_test << " images): Me(SDe) " << std::fixed
                  << std::setprecision(2) << r.me << "(" << r.sde << "), RMSE " << r.rmse
                  << ", MeRate " << 100.0 * r.me_rate << "%, rho "
                  << (r.rho ? std::to_string(*r.rho).substr(0, 6) : "n/a") << "\n";
    }
    return 0;
}

// --- predict -----------------------------------------------------------------

int cmd_predict(const std::string& manifest_path, const std::string& model_path,
                const std::string& out_dir, const FeatureFlags& ff) {
    const auto cfg = ff.config();
    const auto manifest = ingest::load_manifest(manifest_path);
    const auto model = cnn::load_model<float>(model_path);
    fs::create_directories(out_dir);

    std::size_t total = 0;
    for (std::size_t e = 0; e < manifest.entries.size(); ++e) {
        const auto& entry = manifest.entries[e];
        const auto gt = ingest::load_ground_truth(entry.gt_path, entry.gt_rate);
        const auto windows = ingest::windows(entry);

        char name[32];
        std::snprintf(name, sizeof(name), "pred_%04zu.csv", e);
        std::ofstream out(fs::path(out_dir) / name);
        if (!out) throw data_error("predict: cannot write prediction CSV");
        out << "second,pred_bpm,gt_bpm\n" << std::setprecision(10);
        for (const auto& w : windows) {
            const auto fim = featex::extract(w.roi_window, cfg);
            const double bpm = cnn::predict_hr(model, fim);
            out << w.window_index << ',' << bpm << ',' << w.label_bpm << '\n';
            ++total;
        }
    }
    std::cout << "predicted " << total << " seconds across " << manifest.entries.size()
              << " clips into " << out_dir << "\n";
    return 0;
}

// --- eval --------------------------------------------------------------------

struct VideoSeries {
    std::string id;
    std::vector<double> pred, gt;
};

std::vector<VideoSeries> load_predictions(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename().string().rfind("pred_", 0) == 0 &&
            e.path().extension() == ".csv")
            files.push_back(e.path());
    std::sort(files.begin(), files.end());

    std::vector<VideoSeries> out;
    for (const auto& p : files) {
        std::ifstream f(p);
        if (!f) throw data_error("eval: cannot open " + p.string());
        VideoSeries v;
        v.id = p.stem().string();
        std::string line;
        std::getline(f, line);  // header
        while (std::getline(f, line)) {
            if (line.empty()) continue;
            std::stringstream ss(line);
            std::string second, pred, gt;
            if (!std::getline(ss, second, ',') || !std::getline(ss, pred, ',') ||
                !std::getline(ss, gt, ','))
                throw data_error("eval: malformed row in " + p.string());
            v.pred.push_back(std::stod(pred));
            v.gt.push_back(std::stod(gt));
        }
        if (!v.pred.empty()) out.push_back(std::move(v));
    }
    return out;
}

double population_sd(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double s2 = 0.0;
    for (double x : v) s2 += (x - mean) * (x - mean);
    return std::sqrt(s2 / static_cast<double>(v.size()));
}

int cmd_eval(const std::string& pred_dir, const std::string& out_dir, int window,
             double top_variation) {
    const auto videos = load_predictions(pred_dir);
    if (videos.empty()) throw data_error("eval: no prediction CSVs in " + pred_dir);
    fs::create_directories(out_dir);

    std::vector<std::pair<std::string, metrics::EvalReport>> rows;

    // Average-HR protocol: one pair per video.
    metrics::HrPairSeries avg_series;
    avg_series.group = "average";
    for (const auto& v : videos)
        avg_series.pairs.push_back(
            {metrics::average_hr_protocol(v.pred), metrics::average_hr_protocol(v.gt)});
    rows.emplace_back("average", metrics::evaluate(avg_series));

    // Short-time protocol on the top-variation share of videos (ranked by
    // ground-truth standard deviation).
    std::vector<std::size_t> order(videos.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return population_sd(videos[a].gt) > population_sd(videos[b].gt);
    });
    const std::size_t n_sel =
        std::max<std::size_t>(1, static_cast<std::size_t>(top_variation * videos.size()));
    std::vector<std::size_t> selected(order.begin(), order.begin() + n_sel);

    std::vector<int> window_sizes;
    if (window > 0) {
        if (window != 4 && window != 6 && window != 8)
            warn("eval: window size " + std::to_string(window) + "s is outside the usual {4, 6, 8}");
        window_sizes = {window};
    } else {
        window_sizes = {4, 6, 8};
    }
    for (int w : window_sizes) {
        metrics::HrPairSeries pooled;
        pooled.group = "window=" + std::to_string(w) + "s";
        for (std::size_t vi : selected) {
            const auto& v = videos[vi];
            if (v.pred.size() < static_cast<std::size_t>(w)) continue;
            const auto series = metrics::short_time_protocol(v.pred, v.gt, w);
            pooled.pairs.insert(pooled.pairs.end(), series.pairs.begin(), series.pairs.end());
        }
        if (!pooled.pairs.empty())
            rows.emplace_back("short-time " + std::to_string(w) + "s", metrics::evaluate(pooled));
    }

    std::ofstream report(fs::path(out_dir) / "report.csv");
    if (!report) throw data_error("eval: cannot write report.csv");
    report << "protocol,n,me,sde,rmse,me_rate,rho\n";
    for (const auto& [name, r] : rows) write_report_row(report, name, r);

    // Per-video supplement over per-second pairs.
    std::ofstream videos_report(fs::path(out_dir) / "report_videos.csv");
    videos_report << "video,n,me,sde,rmse,me_rate,rho\n";
    for (const auto& v : videos) {
        metrics::HrPairSeries s;
        for (std::size_t i = 0; i < v.pred.size(); ++i) s.pairs.push_back({v.pred[i], v.gt[i]});
        write_report_row(videos_report, v.id, metrics::evaluate(s));
    }

    print_report_table(rows);
    std::cout << "reports written to " << out_dir << "\n";
    return 0;
}

// --- bench -------------------------------------------------------------------

int cmd_bench(const std::string& manifest_path, const std::string& model_path, int threads,
              const FeatureFlags& ff) {
    using Clock = std::chrono::steady_clock;
    const auto cfg = ff.config();
    const auto manifest = ingest::load_manifest(manifest_path);
    const auto model = cnn::load_model<float>(model_path);

    // Stage 1: ingest + ROI + feature extraction, from files.
    std::vector<featex::FeatureImage> features;
    std::size_t frames = 0;
    const auto t0 = Clock::now();
    for (const auto& entry : manifest.entries) {
        const auto windows = ingest::windows(entry, {}, true);
        for (const auto& w : windows) {
            features.push_back(featex::extract(w.roi_window, cfg));
            frames += w.roi_window.crops.size();
        }
    }
    const double stage1_s = std::chrono::duration<double>(Clock::now() - t0).count();

    if (features.empty()) {
        std::cout << "stage1_fps,stage2_pps,threads\n";
        std::cout << "no windows in manifest; nothing to measure\n";
        return 0;
    }

    const double stage1_fps = static_cast<double>(frames) / stage1_s;

    // Stage 2: single-sample inference throughput.
    auto bench_stage2 = [&]() {
        std::size_t preds = 0;
        const auto s0 = Clock::now();
        double elapsed = 0.0;
        while (elapsed < 2.0) {
            for (const auto& fim : features) {
                cnn::predict_hr(model, fim);
                ++preds;
            }
            elapsed = std::chrono::duration<double>(Clock::now() - s0).count();
        }
        return static_cast<double>(preds) / elapsed;
    };

    set_threads(1);
    const double stage2_single = bench_stage2();
    double stage2_multi = stage2_single;
    if (threads > 1) {
        set_threads(threads);
        stage2_multi = bench_stage2();
        set_threads(1);
    }

    std::cout << std::fixed << std::setprecision(1);
    std::cout << "stage 1 (ingest+roi+featex): " << stage1_fps << " frames/s over " << frames
              << " frames\n";
    std::cout << "stage 2 (cnn inference), 1 thread: " << stage2_single << " predictions/s\n";
    if (threads > 1)
        std::cout << "stage 2 (cnn inference), " << threads << " threads: " << stage2_multi
                  << " predictions/s\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"contactless heart-rate estimation from facial video"};
    app.require_subcommand(1);
    app.fallthrough();

    int threads = 1;
    app.add_option("--threads", threads, "math thread count (default 1, deterministic)");

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic labelled corpus");
    synth_cmd->add_option("--out", synth_args.out, "output directory")->required();
    synth_cmd->add_option("--clips", synth_args.clips, "number of clips");
    synth_cmd->add_option("--duration", synth_args.duration, "seconds per clip");
    synth_cmd->add_option("--hr-lo", synth_args.hr_lo, "lowest heart rate (bpm)");
    synth_cmd->add_option("--hr-hi", synth_args.hr_hi, "highest heart rate (bpm)");
    synth_cmd->add_option("--fps", synth_args.fps, "frames per second");
    synth_cmd->add_option("--gt-rate", synth_args.gt_rate, "ground-truth samples per second");
    synth_cmd->add_option("--frame-w", synth_args.frame_w, "frame width in px");
    synth_cmd->add_option("--frame-h", synth_args.frame_h, "frame height in px");
    synth_cmd->add_option("--noise", synth_args.noise, "Gaussian pixel noise sigma");
    synth_cmd->add_option("--amp", synth_args.amp, "green-channel pulse amplitude");
    synth_cmd->add_option("--drift-x", synth_args.drift_x, "horizontal drift px/s");
    synth_cmd->add_option("--drift-y", synth_args.drift_y, "vertical drift px/s");
    synth_cmd->add_option("--mode", synth_args.mode, "frame mode: float or 8bit")
        ->check(CLI::IsMember({"float", "8bit"}));
    synth_cmd->add_option("--seed", synth_args.seed, "corpus seed");

    FeatureFlags extract_ff;
    std::string extract_manifest, extract_out;
    auto* extract_cmd = app.add_subcommand("extract", "turn manifest windows into feature images");
    extract_cmd->add_option("--manifest", extract_manifest, "dataset manifest")->required();
    extract_cmd->add_option("--out", extract_out, "output directory")->required();
    extract_ff.add_flags(extract_cmd);

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train the HR regressor on feature images");
    train_cmd->add_option("--features", train_args.features, "features.csv from extract")->required();
    train_cmd->add_option("--out", train_args.out, "output model path")->required();
    train_cmd->add_option("--log", train_args.log, "training log CSV path");
    train_cmd->add_option("--batch-size", train_args.batch_size, "mini-batch size");
    train_cmd->add_option("--iters", train_args.iters, "training iterations");
    train_cmd->add_option("--lr", train_args.lr, "base learning rate");
    train_cmd->add_option("--momentum", train_args.momentum, "SGD momentum");
    train_cmd->add_option("--lr-step", train_args.lr_step, "iterations between LR decays");
    train_cmd->add_option("--lr-gamma", train_args.lr_gamma, "LR decay factor");
    train_cmd->add_option("--test-fraction", train_args.test_fraction,
                          "seeded held-out test split over feature images");
    train_cmd->add_option("--val-fraction", train_args.val_fraction, "validation split fraction");
    train_cmd->add_option("--dropout-keep", train_args.dropout_keep, "dropout keep probability");
    train_cmd->add_option("--seed", train_args.seed, "training seed");
    train_cmd->add_flag("--verbose", train_args.verbose, "log validation to stderr");

    FeatureFlags predict_ff;
    std::string predict_manifest, predict_model, predict_out;
    auto* predict_cmd = app.add_subcommand("predict", "per-second HR predictions for a manifest");
    predict_cmd->add_option("--manifest", predict_manifest, "dataset manifest")->required();
    predict_cmd->add_option("--model", predict_model, "trained model")->required();
    predict_cmd->add_option("--out", predict_out, "output directory")->required();
    predict_ff.add_flags(predict_cmd);

    std::string eval_pred, eval_out;
    int eval_window = 0;
    double eval_top = 0.2;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate predictions (average + short-time)");
    eval_cmd->add_option("--pred", eval_pred, "directory of pred_*.csv files")->required();
    eval_cmd->add_option("--out", eval_out, "output directory")->required();
    eval_cmd->add_option("--window", eval_window,
                         "short-time window in seconds (default: 4, 6 and 8)");
    eval_cmd->add_option("--top-variation", eval_top,
                         "fraction of videos (by ground-truth SD) in the short-time protocol");

    FeatureFlags bench_ff;
    std::string bench_manifest, bench_model;
    auto* bench_cmd = app.add_subcommand("bench", "throughput benchmark");
    bench_cmd->add_option("--manifest", bench_manifest, "dataset manifest")->required();
    bench_cmd->add_option("--model", bench_model, "trained model")->required();
    bench_ff.add_flags(bench_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        set_threads(threads);
        if (synth_cmd->parsed()) return cmd_synth(synth_args);
        if (extract_cmd->parsed()) return cmd_extract(extract_manifest, extract_out, extract_ff);
        if (train_cmd->parsed()) return cmd_train(train_args);
        if (predict_cmd->parsed())
            return cmd_predict(predict_manifest, predict_model, predict_out, predict_ff);
        if (eval_cmd->parsed()) return cmd_eval(eval_pred, eval_out, eval_window, eval_top);
        if (bench_cmd->parsed()) return cmd_bench(bench_manifest, bench_model, threads, bench_ff);
    } catch (const data_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const numeric_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
