#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <vector>

#include "rppg/bandpass.hpp"
#include "rppg/errors.hpp"
#include "rppg/image.hpp"
#include "rppg/image_io.hpp"
#include "rppg/pyramid.hpp"
#include "rppg/roi.hpp"

namespace rppg::featex {

// Pipeline configuration. Crops are first resized to pre_resize so that
// pyramid_level halvings land exactly on fps pixels per channel (the
// feature image must be square: fps columns, fps rows).
struct FeatureConfig {
    int pyramid_level = 4;
    int fps = 25;          // feature image width = temporal samples per second
    double f_low = 0.75;   // Hz
    double f_high = 4.0;   // Hz
    int pre_resize_h = 80;
    int pre_resize_w = 80;

    int column_rows() const {
        return (pre_resize_h >> pyramid_level) * (pre_resize_w >> pyramid_level);
    }

    void validate() const {
        if (fps <= 0) throw numeric_error("featex: fps must be positive");
        if (!(0.0 < f_low && f_low < f_high && f_high <= fps / 2.0))
            throw numeric_error("featex: band must satisfy 0 < f_low < f_high <= fps/2");
        if (pyramid_level < 0) throw numeric_error("featex: pyramid level must be >= 0");
        const int step = 1 << pyramid_level;
        if (pre_resize_h % step != 0 || pre_resize_w % step != 0)
            throw numeric_error("featex: pre-resize dims must be divisible by 2^level");
        if (column_rows() != fps)
            throw numeric_error("featex: (H>>level)*(W>>level) must equal fps");
    }
};

// rows x cols x 3 real-valued feature image; column t is frame t's reshaped
// lowest pyramid level, rows are bandpassed per-pixel time series.
struct FeatureImage {
    std::array<Mat<double>, 3> ch;

    Eigen::Index rows() const { return ch[0].rows(); }
    Eigen::Index cols() const { return ch[0].cols(); }

    bool all_finite() const {
        return ch[0].allFinite() && ch[1].allFinite() && ch[2].allFinite();
    }
};

// Row-major scan of one plane into a column: entry y*W + x is pixel (y, x).
template <typename Scalar>
Eigen::Vector<Scalar, Eigen::Dynamic> to_column_plane(const Mat<Scalar>& plane) {
    Eigen::Vector<Scalar, Eigen::Dynamic> col(plane.size());
    Eigen::Index i = 0;
    for (Eigen::Index y = 0; y < plane.rows(); ++y)
        for (Eigen::Index x = 0; x < plane.cols(); ++x) col(i++) = plane(y, x);
    return col;
}

// Inverse of to_column_plane.
template <typename Scalar>
Mat<Scalar> column_to_plane(const Eigen::Vector<Scalar, Eigen::Dynamic>& col,
                            Eigen::Index h, Eigen::Index w) {
    if (col.size() != h * w) throw numeric_error("featex: column length does not match shape");
    Mat<Scalar> plane(h, w);
    Eigen::Index i = 0;
    for (Eigen::Index y = 0; y < h; ++y)
        for (Eigen::Index x = 0; x < w; ++x) plane(y, x) = col(i++);
    return plane;
}

// One column per channel of an image.
template <typename Scalar>
std::array<Eigen::Vector<Scalar, Eigen::Dynamic>, 3> to_column(const Image<Scalar>& img) {
    return {to_column_plane(img.ch[0]), to_column_plane(img.ch[1]), to_column_plane(img.ch[2])};
}

// Concatenate per-frame columns into the raw (pre-filter) image M; column i
// comes from frame i. Exactly `expected_cols` equal-length columns required.
template <typename Scalar>
std::array<Mat<Scalar>, 3> concat_columns(
    const std::vector<std::array<Eigen::Vector<Scalar, Eigen::Dynamic>, 3>>& cols,
    Eigen::Index expected_cols) {
    if (static_cast<Eigen::Index>(cols.size()) != expected_cols)
        throw numeric_error("featex: expected " + std::to_string(expected_cols) + " columns, got " +
                            std::to_string(cols.size()));
    const Eigen::Index rows = cols[0][0].size();
    for (const auto& c : cols)
        for (int ch = 0; ch < 3; ++ch)
            if (c[ch].size() != rows) throw numeric_error("featex: ragged column lengths");

    std::array<Mat<Scalar>, 3> m;
    for (int ch = 0; ch < 3; ++ch) {
        m[ch].resize(rows, expected_cols);
        for (Eigen::Index i = 0; i < expected_cols; ++i) m[ch].col(i) = cols[i][ch];
    }
    return m;
}

// Ideal bandpass over the rows of every channel. Input must have cfg.fps
// columns (resample beforehand if the source rate differs).
inline FeatureImage bandpass_rows(const std::array<Mat<double>, 3>& m, const FeatureConfig& cfg) {
    cfg.validate();
    TemporalBandpass<double> filter(cfg.fps, cfg.fps, cfg.f_low, cfg.f_high);
    FeatureImage out;
    for (int c = 0; c < 3; ++c) {
        double residue = 0.0;
        out.ch[c] = filter.apply(m[c], &residue);
        // Conjugate-symmetric masking keeps the result real up to rounding.
        const double scale = std::max(1.0, m[c].cwiseAbs().maxCoeff());
        if (residue > 1e-9 * scale)
            throw numeric_error("featex: unexpected imaginary residue " + std::to_string(residue));
    }
    return out;
}

// Full pipeline for one window: resize crops, run the pyramid, reshape and
// concatenate columns, resample to cfg.fps samples if the source rate
// differs, then bandpass the rows.
template <typename Scalar>
FeatureImage extract(const RoiWindow<Scalar>& window, const FeatureConfig& cfg = {}) {
    cfg.validate();
    if (window.crops.empty()) throw numeric_error("featex: empty window");

    std::vector<std::array<Eigen::Vector<double, Eigen::Dynamic>, 3>> cols;
    cols.reserve(window.crops.size());
    for (const auto& c : window.crops) {
        Image<double> img = bilinear_resize(c.template cast<double>(), cfg.pre_resize_h, cfg.pre_resize_w);
        for (int l = 0; l < cfg.pyramid_level; ++l) img = gaussian_downsample(img);
        cols.push_back(to_column(img));
    }

    auto m = concat_columns(cols, static_cast<Eigen::Index>(window.crops.size()));
    if (static_cast<int>(window.crops.size()) != cfg.fps)
        for (int c = 0; c < 3; ++c) m[c] = resample_rows(m[c], cfg.fps);
    return bandpass_rows(m, cfg);
}

// --- .fim container ----------------------------------------------------------
// magic "FIM1", u32 rows, u32 cols, u32 channels, then rows*cols*channels
// little-endian 32-bit floats, channel-major planes, row-major within a plane.

inline void write_fim(const std::filesystem::path& path, const FeatureImage& fim) {
    auto f = detail::open_out(path);
    f.write("FIM1", 4);
    detail::write_pod(f, static_cast<std::uint32_t>(fim.rows()));
    detail::write_pod(f, static_cast<std::uint32_t>(fim.cols()));
    detail::write_pod(f, static_cast<std::uint32_t>(3));
    for (int c = 0; c < 3; ++c)
        for (Eigen::Index y = 0; y < fim.rows(); ++y)
            for (Eigen::Index x = 0; x < fim.cols(); ++x)
                detail::write_pod(f, static_cast<float>(fim.ch[c](y, x)));
    if (!f) throw data_error("featex: short write: " + path.string());
}

inline FeatureImage read_fim(const std::filesystem::path& path) {
    auto f = detail::open_in(path);
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, "FIM1", 4) != 0)
        throw data_error("featex: not a feature image file: " + path.string());
    const auto rows = detail::read_pod<std::uint32_t>(f, "rows");
    const auto cols = detail::read_pod<std::uint32_t>(f, "cols");
    const auto nc = detail::read_pod<std::uint32_t>(f, "channels");
    if (rows == 0 || cols == 0 || nc != 3)
        throw data_error("featex: bad feature image header: " + path.string());

    FeatureImage fim;
    for (int c = 0; c < 3; ++c) {
        fim.ch[c].resize(rows, cols);
        for (std::uint32_t y = 0; y < rows; ++y)
            for (std::uint32_t x = 0; x < cols; ++x)
                fim.ch[c](y, x) = static_cast<double>(detail::read_pod<float>(f, "pixel data"));
    }
    return fim;
}

}  // namespace rppg::featex
