#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <vector>

#include "rppg/errors.hpp"
#include "rppg/image.hpp"
#include "rppg/image_io.hpp"
#include "rppg/ingest.hpp"
#include "rppg/rng.hpp"
#include "rppg/roi.hpp"

namespace rppg::synth {

struct HrKnot {
    double t_s = 0.0;
    double bpm = 75.0;
};

// A synthetic clip: a static background with a "cheek" patch whose color
// oscillates at the programmed heart rate. Landmarks are laid out so the
// cheek rectangle construction lands inside the patch with margin.
struct SynthSpec {
    double duration_s = 30.0;
    int fps = 25;
    int gt_rate = 25;
    int frame_w = 128;
    int frame_h = 96;
    std::array<double, 3> base_rgb = {150.0, 120.0, 110.0};   // 0..255 scale
    std::array<double, 3> amplitude = {1.5, 3.0, 1.5};        // green strongest
    std::vector<HrKnot> hr_timeline = {{0.0, 75.0}};          // piecewise linear
    double noise_sigma = 0.0;       // Gaussian pixel noise inside the patch
    double drift_x = 0.0;           // px/s
    double drift_y = 0.0;
    double phase0 = 0.0;            // radians
    std::uint64_t seed = 1;
    bool float_mode = true;         // .rawf frames; false writes 8-bit .ppm

    void validate() const {
        if (fps <= 0 || gt_rate <= 0) throw data_error("synth: rates must be positive");
        if (duration_s <= 0) throw data_error("synth: duration must be positive");
        if (hr_timeline.empty()) throw data_error("synth: empty HR timeline");
        for (const auto& k : hr_timeline)
            if (k.bpm < 45.0 || k.bpm > 240.0)
                throw data_error("synth: HR timeline must stay within [45, 240] bpm");
        for (double a : amplitude)
            if (a < 0.0) throw data_error("synth: amplitude must be >= 0");
    }
};

// Programmed bpm at time t: linear between knots, clamped at the ends.
inline double bpm_at(const SynthSpec& spec, double t) {
    const auto& tl = spec.hr_timeline;
    if (t <= tl.front().t_s) return tl.front().bpm;
    if (t >= tl.back().t_s) return tl.back().bpm;
    for (std::size_t i = 0; i + 1 < tl.size(); ++i) {
        if (t <= tl[i + 1].t_s) {
            const double f = (t - tl[i].t_s) / (tl[i + 1].t_s - tl[i].t_s);
            return tl[i].bpm + f * (tl[i + 1].bpm - tl[i].bpm);
        }
    }
    return tl.back().bpm;
}

// Accumulated pulse phase 2*pi * integral of bpm(tau)/60 dtau, closed form
// over the piecewise-linear timeline.
inline double phase_at(const SynthSpec& spec, double t) {
    const auto& tl = spec.hr_timeline;
    double beats = 0.0;  // integral of f = bpm/60
    double prev_t = 0.0, prev_bpm = tl.front().bpm;
    for (const auto& k : tl) {
        if (k.t_s >= t) {
            const double bpm_t = bpm_at(spec, t);
            beats += (prev_bpm + bpm_t) / 2.0 / 60.0 * (t - prev_t);
            return spec.phase0 + 2.0 * std::numbers::pi * beats;
        }
        if (k.t_s > prev_t) beats += (prev_bpm + k.bpm) / 2.0 / 60.0 * (k.t_s - prev_t);
        prev_t = k.t_s;
        prev_bpm = k.bpm;
    }
    beats += prev_bpm / 60.0 * (t - prev_t);
    return spec.phase0 + 2.0 * std::numbers::pi * beats;
}

// Geometry of the rendered face. The modulated patch carries the pulse; the
// eight rectangle-defining landmarks keep a 4 px margin inside it.
struct FaceLayout {
    int patch_x0, patch_y0, patch_x1, patch_y1;  // half-open pixel bounds
    static constexpr int kMargin = 4;

    static FaceLayout from_spec(const SynthSpec& spec) {
        FaceLayout l{};
        l.patch_x0 = static_cast<int>(std::lround(0.19 * spec.frame_w));
        l.patch_x1 = static_cast<int>(std::lround(0.81 * spec.frame_w));
        l.patch_y0 = static_cast<int>(std::lround(0.29 * spec.frame_h));
        l.patch_y1 = static_cast<int>(std::lround(0.71 * spec.frame_h));
        return l;
    }

    RoiRect expected_roi() const {
        return {patch_x0 + kMargin, patch_y0 + kMargin,
                (patch_x1 - kMargin) - (patch_x0 + kMargin),
                (patch_y1 - kMargin) - (patch_y0 + kMargin)};
    }
};

// Landmarks for frame time t (drift applied). Only the eight indices used by
// the rectangle construction are load-bearing; the rest sketch a face.
inline LandmarkSet landmarks_at(const SynthSpec& spec, const FaceLayout& l, double t) {
    const double dx = spec.drift_x * t, dy = spec.drift_y * t;
    const double cx = (spec.frame_w - 1) / 2.0 + dx;
    const double cy = (spec.frame_h - 1) / 2.0 + dy;

    LandmarkSet lm;
    // Jaw outline 1..17 on a half ellipse.
    for (int i = 1; i <= 17; ++i) {
        const double a = std::numbers::pi * (static_cast<double>(i - 1) / 16.0);
        lm.points(i - 1, 0) = cx - 0.45 * spec.frame_w * std::cos(a);
        lm.points(i - 1, 1) = cy + 0.42 * spec.frame_h * std::sin(a);
    }
    // Brows 18..27, nose 28..36, eyes 37..48, mouth 49..68: coarse grid rows.
    auto put_row = [&](int lo, int hi, double fy, double half_w) {
        for (int i = lo; i <= hi; ++i) {
            const double f = (hi == lo) ? 0.5 : static_cast<double>(i - lo) / (hi - lo);
            lm.points(i - 1, 0) = cx + half_w * (2.0 * f - 1.0);
            lm.points(i - 1, 1) = cy + fy * spec.frame_h;
        }
    };
    put_row(18, 27, -0.30, 0.30 * spec.frame_w);
    put_row(28, 36, -0.05, 0.05 * spec.frame_w);
    put_row(37, 48, -0.18, 0.32 * spec.frame_w);
    put_row(49, 68, 0.28, 0.22 * spec.frame_w);

    // The eight rectangle-defining points, relative to the (drifting) patch.
    const double px0 = l.patch_x0 + dx, px1 = l.patch_x1 + dx;
    const double py0 = l.patch_y0 + dy, py1 = l.patch_y1 + dy;
    const double m = FaceLayout::kMargin;
    auto set = [&](int idx1, double x, double y) {
        lm.points(idx1 - 1, 0) = x;
        lm.points(idx1 - 1, 1) = y;
    };
    set(13, px0 + m, cy + 0.1 * spec.frame_h);  // left edge
    set(16, px1 - m, cy + 0.1 * spec.frame_h);  // right edge
    set(40, cx - 0.2 * spec.frame_w, py0 + m);      // eye bottoms: max y = py0 + m
    set(41, cx - 0.15 * spec.frame_w, py0 + m - 1);
    set(46, cx + 0.15 * spec.frame_w, py0 + m);
    set(47, cx + 0.2 * spec.frame_w, py0 + m - 1);
    set(50, cx - 0.05 * spec.frame_w, py1 - m);     // lip tops: min y = py1 - m
    set(52, cx + 0.05 * spec.frame_w, py1 - m + 1);

    // Drift can push sketch points past the frame origin; landmarks must be
    // non-negative.
    for (int i = 0; i < 68; ++i) {
        lm.points(i, 0) = std::max(lm.points(i, 0), 0.0);
        lm.points(i, 1) = std::max(lm.points(i, 1), 0.0);
    }
    return lm;
}

// Render frame j. Background is static; the patch color follows the
// programmed sinusoid with optional per-pixel Gaussian noise, both drifting
// by whole pixels.
inline Image<double> render_frame(const SynthSpec& spec, const FaceLayout& l, int j) {
    const double t = static_cast<double>(j) / spec.fps;
    Image<double> img = Image<double>::constant(spec.frame_h, spec.frame_w,
                                                spec.base_rgb[0] * 0.5, spec.base_rgb[1] * 0.5,
                                                spec.base_rgb[2] * 0.5);
    const double s = std::sin(phase_at(spec, t));
    const int dx = static_cast<int>(std::lround(spec.drift_x * t));
    const int dy = static_cast<int>(std::lround(spec.drift_y * t));
    const int x0 = std::clamp(l.patch_x0 + dx, 0, spec.frame_w);
    const int x1 = std::clamp(l.patch_x1 + dx, 0, spec.frame_w);
    const int y0 = std::clamp(l.patch_y0 + dy, 0, spec.frame_h);
    const int y1 = std::clamp(l.patch_y1 + dy, 0, spec.frame_h);

    Rng noise = Rng::derive(spec.seed, 0xF0A8 + static_cast<std::uint64_t>(j));
    for (int c = 0; c < 3; ++c) {
        const double v = spec.base_rgb[c] + spec.amplitude[c] * s;
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x)
                img.ch[c](y, x) =
                    spec.noise_sigma > 0.0 ? v + noise.normal(0.0, spec.noise_sigma) : v;
    }
    return img;
}

inline int frame_count(const SynthSpec& spec) {
    return static_cast<int>(std::lround(spec.duration_s * spec.fps));
}

// Ground truth samples the programmed bpm at interval midpoints, so the
// per-second sample mean equals the programmed per-second mean for any
// timeline that is linear within the second.
inline ingest::GroundTruthSeries ground_truth(const SynthSpec& spec) {
    ingest::GroundTruthSeries gt;
    gt.rate = spec.gt_rate;
    const int n = static_cast<int>(std::lround(spec.duration_s * spec.gt_rate));
    gt.samples.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k)
        gt.samples.push_back(bpm_at(spec, (k + 0.5) / static_cast<double>(spec.gt_rate)));
    return gt;
}

// In-memory clip, the exact content generate() writes to disk.
struct ClipRender {
    SynthSpec spec;
    FaceLayout layout;
    std::map<int, LandmarkSet> landmarks;
    ingest::GroundTruthSeries gt;

    Image<double> frame(int j) const { return render_frame(spec, layout, j); }
};

inline ClipRender render_clip(const SynthSpec& spec) {
    spec.validate();
    ClipRender clip;
    clip.spec = spec;
    clip.layout = FaceLayout::from_spec(spec);
    const int n = frame_count(spec);
    for (int j = 0; j < n; ++j)
        clip.landmarks[j] = landmarks_at(spec, clip.layout, static_cast<double>(j) / spec.fps);
    clip.gt = ground_truth(spec);
    return clip;
}

// Labeled windows straight from an in-memory clip (no files involved).
inline std::vector<ingest::LabeledWindow<double>> windows_from_clip(const ClipRender& clip,
                                                                    bool quiet = true) {
    ingest::ClipSource src;
    src.frame = [&clip](int j) { return clip.frame(j); };
    src.frame_count = frame_count(clip.spec);
    src.fps = clip.spec.fps;
    src.landmarks = &clip.landmarks;
    src.gt = &clip.gt;
    return ingest::windows_from_source(src, {}, quiet);
}

// Write one clip to disk and return its manifest entry.
inline ingest::ManifestEntry generate(const SynthSpec& spec, const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    const ClipRender clip = render_clip(spec);

    std::error_code ec;
    fs::create_directories(out_dir / "frames", ec);
    if (ec) throw data_error("synth: cannot create " + (out_dir / "frames").string());

    const int n = frame_count(spec);
    char name[32];
    for (int j = 0; j < n; ++j) {
        const Image<double> frame = clip.frame(j);
        std::snprintf(name, sizeof(name), "frame_%06d.%s", j, spec.float_mode ? "rawf" : "ppm");
        const fs::path p = out_dir / "frames" / name;
        if (spec.float_mode)
            write_rawf(p, frame);
        else
            write_ppm(p, frame);
    }

    {
        std::ofstream f(out_dir / "landmarks.txt");
        if (!f) throw data_error("synth: cannot write landmarks");
        f.precision(4);
        f << std::fixed;
        for (const auto& [j, lm] : clip.landmarks) {
            f << j;
            for (int i = 0; i < 68; ++i) f << ' ' << lm.points(i, 0) << ' ' << lm.points(i, 1);
            f << '\n';
        }
    }
    {
        std::ofstream f(out_dir / "gt.txt");
        if (!f) throw data_error("synth: cannot write ground truth");
        f.precision(8);
        for (double v : clip.gt.samples) f << v << '\n';
    }

    ingest::ManifestEntry entry;
    entry.frames_dir = out_dir / "frames";
    entry.landmarks_path = out_dir / "landmarks.txt";
    entry.gt_path = out_dir / "gt.txt";
    entry.fps = spec.fps;
    entry.gt_rate = spec.gt_rate;
    return entry;
}

// Per-clip spec for a training corpus: HR, phase and skin tone drawn from a
// stream derived from (seed, clip index).
inline SynthSpec derive_clip_spec(const SynthSpec& tmpl, std::uint64_t clip_index,
                                  double hr_lo, double hr_hi) {
    if (hr_lo > hr_hi) throw data_error("synth: degenerate HR range");
    SynthSpec spec = tmpl;
    Rng rng = Rng::derive(tmpl.seed, 0xC11F + clip_index);
    const double hr = hr_lo == hr_hi ? hr_lo : rng.uniform(hr_lo, hr_hi);
    spec.hr_timeline = {{0.0, hr}};
    spec.phase0 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (int c = 0; c < 3; ++c) spec.base_rgb[c] = tmpl.base_rgb[c] + rng.uniform(-15.0, 15.0);
    spec.seed = Rng::derive(tmpl.seed, 0x5EED + clip_index).next();
    return spec;
}

struct CorpusResult {
    std::filesystem::path manifest_path;
    std::vector<double> clip_hr;
};

// n_clips clips with HR uniform in [hr_lo, hr_hi], plus a manifest and a
// coverage histogram of the drawn rates.
inline CorpusResult make_training_corpus(int n_clips, double hr_lo, double hr_hi,
                                         const SynthSpec& tmpl,
                                         const std::filesystem::path& out_root) {
    namespace fs = std::filesystem;
    if (n_clips < 1) throw data_error("synth: need at least one clip");
    if (hr_lo > hr_hi) throw data_error("synth: degenerate HR range");
    fs::create_directories(out_root);

    CorpusResult result;
    std::ofstream manifest(out_root / "manifest.tsv");
    if (!manifest) throw data_error("synth: cannot write manifest");
    char name[32];
    for (int i = 0; i < n_clips; ++i) {
        const SynthSpec spec = derive_clip_spec(tmpl, static_cast<std::uint64_t>(i), hr_lo, hr_hi);
        result.clip_hr.push_back(spec.hr_timeline.front().bpm);
        std::snprintf(name, sizeof(name), "clip_%04d", i);
        generate(spec, out_root / name);
        manifest << name << "/frames\t" << name << "/landmarks.txt\t" << name << "/gt.txt\t"
                 << spec.fps << '\t' << spec.gt_rate << '\n';
    }
    manifest.close();

    // Coverage histogram over ten equal bins of the requested range.
    std::ofstream cov(out_root / "coverage.txt");
    const double span = std::max(hr_hi - hr_lo, 1e-9);
    std::array<int, 10> bins{};
    for (double hr : result.clip_hr) {
        int b = static_cast<int>((hr - hr_lo) / span * 10.0);
        bins[static_cast<std::size_t>(std::clamp(b, 0, 9))]++;
    }
    for (int b = 0; b < 10; ++b)
        cov << hr_lo + b * span / 10.0 << "-" << hr_lo + (b + 1) * span / 10.0 << "\t" << bins[b]
            << '\n';

    result.manifest_path = out_root / "manifest.tsv";
    return result;
}

}  // namespace rppg::synth
