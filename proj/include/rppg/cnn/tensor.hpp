#pragma once

#include <Eigen/Dense>

#include <string>

#include "rppg/errors.hpp"
#include "rppg/image.hpp"

namespace rppg::cnn {

enum class Mode { Train, Infer };

// Per-sample activation shape. Fully connected activations use h = w = 1.
struct Shape {
    int h = 1;
    int w = 1;
    int c = 1;

    int rows() const { return h * w; }
    int features() const { return h * w * c; }
    bool operator==(const Shape&) const = default;

    std::string str() const {
        return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
    }
};

// A batch of activations. Sample i occupies rows [i*h*w, (i+1)*h*w) of
// `data`; within a sample, row y*w + x is pixel (y, x); channels are the
// columns. Pointwise convolutions and batch normalization act directly on
// this layout.
template <typename Scalar>
struct Batch {
    int n = 0;
    Shape shape;
    Mat<Scalar> data;

    Batch() = default;
    Batch(int n_, Shape s) : n(n_), shape(s) { data.setZero(n_ * s.rows(), s.c); }

    auto sample(int i) { return data.middleRows(i * shape.rows(), shape.rows()); }
    auto sample(int i) const { return data.middleRows(i * shape.rows(), shape.rows()); }
};

// Flatten to one row per sample, feature index (y*w + x)*c + channel.
template <typename Scalar>
Mat<Scalar> flatten_batch(const Batch<Scalar>& x) {
    const int hw = x.shape.rows(), c = x.shape.c;
    if (hw == 1) return x.data;
    Mat<Scalar> out(x.n, hw * c);
    for (int i = 0; i < x.n; ++i)
        for (int r = 0; r < hw; ++r)
            for (int ch = 0; ch < c; ++ch) out(i, r * c + ch) = x.data(i * hw + r, ch);
    return out;
}

template <typename Scalar>
Batch<Scalar> unflatten_batch(const Mat<Scalar>& rows, int n, Shape shape) {
    Batch<Scalar> out(n, shape);
    const int hw = shape.rows(), c = shape.c;
    if (hw == 1) {
        out.data = rows;
        return out;
    }
    for (int i = 0; i < n; ++i)
        for (int r = 0; r < hw; ++r)
            for (int ch = 0; ch < c; ++ch) out.data(i * hw + r, ch) = rows(i, r * c + ch);
    return out;
}

}  // namespace rppg::cnn
