#pragma once

#include <Eigen/Dense>

#include "rppg/errors.hpp"
#include "rppg/image.hpp"

namespace rppg {

namespace detail {

// Reflect-101 border indexing: -1 -> 1, n -> n-2 (no edge duplication).
inline Eigen::Index reflect101(Eigen::Index i, Eigen::Index n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * (n - 1) - i;
    }
    return i;
}

}  // namespace detail

// One Gaussian-pyramid step on a single plane: separable 5-tap binomial
// blur (1,4,6,4,1)/16 with reflect-101 borders, then keep every second
// pixel starting at index 0. Requires even input dimensions.
template <typename Scalar>
Mat<Scalar> gaussian_downsample_plane(const Mat<Scalar>& src) {
    const Eigen::Index h = src.rows(), w = src.cols();
    if (h % 2 != 0 || w % 2 != 0)
        throw data_error("pyramid: gaussian_downsample requires even dimensions");

    static constexpr double kTap[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

    // Horizontal pass.
    Mat<Scalar> tmp(h, w);
    for (Eigen::Index y = 0; y < h; ++y) {
        for (Eigen::Index x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int t = -2; t <= 2; ++t)
                acc += kTap[t + 2] * static_cast<double>(src(y, detail::reflect101(x + t, w)));
            tmp(y, x) = static_cast<Scalar>(acc);
        }
    }
    // Vertical pass + decimation.
    Mat<Scalar> out(h / 2, w / 2);
    for (Eigen::Index y = 0; y < h; y += 2) {
        for (Eigen::Index x = 0; x < w; x += 2) {
            double acc = 0.0;
            for (int t = -2; t <= 2; ++t)
                acc += kTap[t + 2] * static_cast<double>(tmp(detail::reflect101(y + t, h), x));
            out(y / 2, x / 2) = static_cast<Scalar>(acc);
        }
    }
    return out;
}

template <typename Scalar>
Image<Scalar> gaussian_downsample(const Image<Scalar>& img) {
    Image<Scalar> out;
    for (int c = 0; c < 3; ++c) out.ch[c] = gaussian_downsample_plane(img.ch[c]);
    return out;
}

}  // namespace rppg
