#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rppg/errors.hpp"
#include "rppg/image.hpp"
#include "rppg/image_io.hpp"
#include "rppg/roi.hpp"

namespace rppg::ingest {

constexpr double kHrSanityLo = 30.0;   // bpm, hard envelope on ground truth
constexpr double kHrSanityHi = 300.0;
constexpr double kLabelLo = 45.0;      // bpm, label normalization range
constexpr double kLabelHi = 240.0;

struct ManifestEntry {
    std::filesystem::path frames_dir;
    std::filesystem::path landmarks_path;
    std::filesystem::path gt_path;
    int fps = 0;       // frames per second
    int gt_rate = 0;   // ground-truth samples per second
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
};

struct GroundTruthSeries {
    std::vector<double> samples;  // bpm
    int rate = 0;                 // samples per second
};

template <typename Scalar>
struct LabeledWindow {
    int window_index = 0;          // second offset within the clip
    RoiWindow<Scalar> roi_window;
    double label_bpm = 0.0;        // mean HR over the second, clamped to [45, 240]
};

// --- manifest ----------------------------------------------------------------
// UTF-8 text, one entry per line:
//   frames_dir <TAB> landmarks_file <TAB> gt_file <TAB> fps <TAB> gt_rate
// '#' starts a comment. Relative paths resolve against the manifest location.

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
    namespace fs = std::filesystem;
    std::ifstream f(path);
    if (!f) throw data_error("ingest: cannot open manifest: " + path.string());
    const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");

    DatasetManifest manifest;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;

        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, '\t')) fields.push_back(field);
        const std::string where =
            "ingest: manifest " + path.string() + " entry " + std::to_string(manifest.entries.size()) +
            " (line " + std::to_string(line_no) + "): ";
        if (fields.size() != 5) throw data_error(where + "expected 5 tab-separated fields");

        ManifestEntry e;
        auto resolve = [&](const std::string& s) {
            fs::path p(s);
            return p.is_absolute() ? p : base / p;
        };
        e.frames_dir = resolve(fields[0]);
        e.landmarks_path = resolve(fields[1]);
        e.gt_path = resolve(fields[2]);
        try {
            e.fps = std::stoi(fields[3]);
            e.gt_rate = std::stoi(fields[4]);
        } catch (const std::exception&) {
            throw data_error(where + "fps/gt_rate must be integers");
        }
        if (e.fps <= 0) throw data_error(where + "fps must be > 0");
        if (e.gt_rate <= 0) throw data_error(where + "gt_rate must be > 0");
        if (!fs::is_directory(e.frames_dir))
            throw data_error(where + "frames dir missing: " + e.frames_dir.string());
        if (!fs::is_regular_file(e.landmarks_path))
            throw data_error(where + "landmarks file missing: " + e.landmarks_path.string());
        if (!fs::is_regular_file(e.gt_path))
            throw data_error(where + "ground-truth file missing: " + e.gt_path.string());
        const auto frames = list_frames(e.frames_dir);
        if (static_cast<int>(frames.size()) < e.fps)
            throw data_error(where + "fewer frames than one full second");
        manifest.entries.push_back(std::move(e));
    }
    return manifest;
}

// --- ground truth ------------------------------------------------------------
// One bpm value per line at `rate` samples per second.

inline GroundTruthSeries load_ground_truth(const std::filesystem::path& path, int rate) {
    std::ifstream f(path);
    if (!f) throw data_error("ingest: cannot open ground truth: " + path.string());
    GroundTruthSeries gt;
    gt.rate = rate;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        double v = 0.0;
        try {
            v = std::stod(line);
        } catch (const std::exception&) {
            throw data_error("ingest: " + path.string() + " line " + std::to_string(line_no) +
                             ": not a number");
        }
        if (!(v >= kHrSanityLo && v <= kHrSanityHi))
            throw data_error("ingest: " + path.string() + " line " + std::to_string(line_no) +
                             ": HR sample " + std::to_string(v) + " outside [30, 300] bpm");
        gt.samples.push_back(v);
    }
    if (gt.samples.empty()) throw data_error("ingest: empty ground truth: " + path.string());
    return gt;
}

// Mean of the rate samples covering [second, second+1).
inline double label_for_second(const GroundTruthSeries& gt, int second) {
    if (second < 0) throw data_error("ingest: negative second index");
    const std::size_t begin = static_cast<std::size_t>(second) * static_cast<std::size_t>(gt.rate);
    const std::size_t end = begin + static_cast<std::size_t>(gt.rate);
    if (end > gt.samples.size())
        throw data_error("ingest: second " + std::to_string(second) +
                         " extends past the ground-truth series");
    double sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) sum += gt.samples[i];
    return sum / static_cast<double>(gt.rate);
}

// --- landmarks ---------------------------------------------------------------
// Per line: frame_index x1 y1 x2 y2 ... x68 y68 (pixel coordinates).
// Frames without a line are "missing landmarks" and skip their window.

inline std::map<int, LandmarkSet> load_landmarks(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw data_error("ingest: cannot open landmarks: " + path.string());
    std::map<int, LandmarkSet> out;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::stringstream ss(line);
        const std::string where =
            "ingest: " + path.string() + " line " + std::to_string(line_no) + ": ";
        int frame = -1;
        if (!(ss >> frame) || frame < 0) throw data_error(where + "bad frame index");
        LandmarkSet lm;
        for (int i = 0; i < 68; ++i) {
            double x = 0.0, y = 0.0;
            if (!(ss >> x >> y)) throw data_error(where + "expected 68 x/y pairs");
            lm.points(i, 0) = x;
            lm.points(i, 1) = y;
        }
        if (!lm.valid()) throw data_error(where + "coordinates must be finite and >= 0");
        out[frame] = lm;
    }
    return out;
}

// --- windowing ---------------------------------------------------------------

// In-memory clip: frames arrive through a loader so whole clips never need
// to be resident at once.
struct ClipSource {
    std::function<Image<double>(int)> frame;  // frame index -> image
    int frame_count = 0;
    int fps = 0;
    const std::map<int, LandmarkSet>* landmarks = nullptr;
    const GroundTruthSeries* gt = nullptr;
};

// Split a clip into non-overlapping one-second windows. The trailing partial
// second is discarded. A window is skipped (with a warning) when any frame
// lacks landmarks, the rectangle is degenerate or leaves the frame, or no
// ground-truth label covers the second. Labels are clamped to [45, 240].
inline std::vector<LabeledWindow<double>> windows_from_source(const ClipSource& clip,
                                                              const RoiIndices& idx = {},
                                                              bool quiet = false) {
    if (clip.fps <= 0) throw data_error("ingest: fps must be > 0");
    for (const auto& [frame, lm] : *clip.landmarks)
        if (frame >= clip.frame_count)
            throw data_error("ingest: landmark entry for frame " + std::to_string(frame) +
                             " but clip has only " + std::to_string(clip.frame_count) + " frames");

    const int n_windows = clip.frame_count / clip.fps;
    std::vector<LabeledWindow<double>> out;
    out.reserve(static_cast<std::size_t>(n_windows));
    for (int s = 0; s < n_windows; ++s) {
        auto skip = [&](const std::string& why) {
            if (!quiet) warn("ingest: skipping window " + std::to_string(s) + ": " + why);
        };

        std::vector<LandmarkSet> lms;
        lms.reserve(static_cast<std::size_t>(clip.fps));
        bool missing = false;
        for (int j = 0; j < clip.fps; ++j) {
            auto it = clip.landmarks->find(s * clip.fps + j);
            if (it == clip.landmarks->end()) {
                skip("missing landmarks for frame " + std::to_string(s * clip.fps + j));
                missing = true;
                break;
            }
            lms.push_back(it->second);
        }
        if (missing) continue;

        const std::size_t need = (static_cast<std::size_t>(s) + 1) * static_cast<std::size_t>(clip.gt->rate);
        if (need > clip.gt->samples.size()) {
            skip("ground truth shorter than the video");
            continue;
        }

        std::vector<Image<double>> frames;
        frames.reserve(static_cast<std::size_t>(clip.fps));
        for (int j = 0; j < clip.fps; ++j) frames.push_back(clip.frame(s * clip.fps + j));

        std::string reason;
        auto win = freeze_window<double>(frames, lms, s, idx, &reason);
        if (!win) {
            skip(reason);
            continue;
        }

        double label = label_for_second(*clip.gt, s);
        if (label < kLabelLo || label > kLabelHi) {
            if (!quiet)
                warn("ingest: window " + std::to_string(s) + " label " + std::to_string(label) +
                     " bpm clamped to [45, 240]");
            label = std::clamp(label, kLabelLo, kLabelHi);
        }
        out.push_back({s, std::move(*win), label});
    }
    return out;
}

// File-backed variant for one manifest entry.
inline std::vector<LabeledWindow<double>> windows(const ManifestEntry& entry,
                                                  const RoiIndices& idx = {},
                                                  bool quiet = false) {
    const auto frames = list_frames(entry.frames_dir);
    const auto lms = load_landmarks(entry.landmarks_path);
    const auto gt = load_ground_truth(entry.gt_path, entry.gt_rate);

    ClipSource clip;
    clip.frame = [&frames](int i) { return read_frame(frames.at(static_cast<std::size_t>(i))); };
    clip.frame_count = static_cast<int>(frames.size());
    clip.fps = entry.fps;
    clip.landmarks = &lms;
    clip.gt = &gt;
    return windows_from_source(clip, idx, quiet);
}

}  // namespace rppg::ingest
