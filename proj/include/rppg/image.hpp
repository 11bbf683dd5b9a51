#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>

#include "rppg/errors.hpp"

namespace rppg {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Dense RGB image, one Eigen plane per channel. Values carry whatever range
// the source had (8-bit sources load as 0..255).
template <typename Scalar>
struct Image {
    std::array<Mat<Scalar>, 3> ch;

    Image() = default;
    Image(Eigen::Index h, Eigen::Index w) {
        for (auto& c : ch) c.setZero(h, w);
    }

    Eigen::Index height() const { return ch[0].rows(); }
    Eigen::Index width() const { return ch[0].cols(); }

    static Image constant(Eigen::Index h, Eigen::Index w, Scalar r, Scalar g, Scalar b) {
        Image img;
        img.ch[0] = Mat<Scalar>::Constant(h, w, r);
        img.ch[1] = Mat<Scalar>::Constant(h, w, g);
        img.ch[2] = Mat<Scalar>::Constant(h, w, b);
        return img;
    }

    template <typename Other>
    Image<Other> cast() const {
        Image<Other> out;
        for (int c = 0; c < 3; ++c) out.ch[c] = ch[c].template cast<Other>();
        return out;
    }

    bool all_finite() const {
        for (const auto& c : ch)
            if (!c.allFinite()) return false;
        return true;
    }
};

// Axis-aligned crop; the rectangle must lie fully inside the image.
template <typename Scalar>
Image<Scalar> crop(const Image<Scalar>& img, Eigen::Index x, Eigen::Index y,
                   Eigen::Index w, Eigen::Index h) {
    if (x < 0 || y < 0 || w <= 0 || h <= 0 || x + w > img.width() || y + h > img.height())
        throw data_error("image: crop rectangle out of bounds");
    Image<Scalar> out;
    for (int c = 0; c < 3; ++c) out.ch[c] = img.ch[c].block(y, x, h, w);
    return out;
}

// Bilinear resize with half-pixel-center alignment (src = (dst+0.5)*scale-0.5).
// Constant images are preserved exactly.
template <typename Scalar>
Image<Scalar> bilinear_resize(const Image<Scalar>& img, Eigen::Index out_h, Eigen::Index out_w) {
    if (out_h <= 0 || out_w <= 0) throw data_error("image: resize target must be positive");
    const Eigen::Index ih = img.height(), iw = img.width();
    if (ih == out_h && iw == out_w) return img;

    const double sy = static_cast<double>(ih) / static_cast<double>(out_h);
    const double sx = static_cast<double>(iw) / static_cast<double>(out_w);

    Eigen::ArrayXd fy(out_h), fx(out_w);
    Eigen::ArrayXi y0(out_h), x0(out_w);
    for (Eigen::Index y = 0; y < out_h; ++y) {
        double v = (static_cast<double>(y) + 0.5) * sy - 0.5;
        v = std::clamp(v, 0.0, static_cast<double>(ih - 1));
        y0(y) = static_cast<int>(std::min<Eigen::Index>(static_cast<Eigen::Index>(v), ih - 2 >= 0 ? ih - 2 : 0));
        fy(y) = v - y0(y);
    }
    for (Eigen::Index x = 0; x < out_w; ++x) {
        double v = (static_cast<double>(x) + 0.5) * sx - 0.5;
        v = std::clamp(v, 0.0, static_cast<double>(iw - 1));
        x0(x) = static_cast<int>(std::min<Eigen::Index>(static_cast<Eigen::Index>(v), iw - 2 >= 0 ? iw - 2 : 0));
        fx(x) = v - x0(x);
    }

    Image<Scalar> out(out_h, out_w);
    for (int c = 0; c < 3; ++c) {
        const auto& src = img.ch[c];
        auto& dst = out.ch[c];
        for (Eigen::Index y = 0; y < out_h; ++y) {
            const Eigen::Index ya = y0(y), yb = std::min<Eigen::Index>(ya + 1, ih - 1);
            const double wy = fy(y);
            for (Eigen::Index x = 0; x < out_w; ++x) {
                const Eigen::Index xa = x0(x), xb = std::min<Eigen::Index>(xa + 1, iw - 1);
                const double wx = fx(x);
                const double top = (1.0 - wx) * static_cast<double>(src(ya, xa)) +
                                   wx * static_cast<double>(src(ya, xb));
                const double bot = (1.0 - wx) * static_cast<double>(src(yb, xa)) +
                                   wx * static_cast<double>(src(yb, xb));
                dst(y, x) = static_cast<Scalar>((1.0 - wy) * top + wy * bot);
            }
        }
    }
    return out;
}

}  // namespace rppg
