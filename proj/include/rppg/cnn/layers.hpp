#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <vector>

#include "rppg/cnn/tensor.hpp"
#include "rppg/errors.hpp"
#include "rppg/rng.hpp"

namespace rppg::cnn {

enum class LayerKind : std::uint32_t {
    Conv = 1,       // full convolution
    DwConv = 2,     // depthwise convolution (depth multiplier 1)
    PwConv = 3,     // 1x1 pointwise convolution
    BatchNorm = 4,  // per-channel spatial batch normalization
    ReLU = 5,
    AvgPool = 6,
    FC = 7,
    Dropout = 8,    // inverted dropout
};

// Per-call scratch written by forward in train mode and consumed by
// backward. Keeping it outside the layer keeps inference const and
// shareable across threads.
template <typename Scalar>
struct Cache {
    Mat<Scalar> input;  // layer input (im2col patches for full conv)
    Mat<Scalar> aux;    // xhat / dropout mask / relu mask
    Eigen::Vector<Scalar, Eigen::Dynamic> v1, v2, v3;  // BN mu, var, inv_std
    Shape in_shape;
    int n = 0;
};

template <typename Scalar>
using Grads = std::vector<Mat<Scalar>>;  // one entry per trainable parameter blob

template <typename Scalar>
class Layer {
public:
    virtual ~Layer() = default;

    virtual LayerKind kind() const = 0;
    virtual Shape out_shape(const Shape& in) const = 0;

    // Train mode fills `cache`; infer mode may receive cache == nullptr and
    // must not mutate the layer.
    virtual Batch<Scalar> forward(const Batch<Scalar>& x, Mode mode, Rng& rng,
                                  Cache<Scalar>* cache) const = 0;

    // Returns dL/dinput and assigns dL/dparam for each entry of params().
    virtual Batch<Scalar> backward(const Batch<Scalar>& dy, const Cache<Scalar>& cache,
                                   Grads<Scalar>& grads) const = 0;

    virtual std::vector<Mat<Scalar>*> params() = 0;

    // Everything serialized with the model: trainable parameters plus
    // running statistics.
    virtual std::vector<Mat<Scalar>*> blobs() { return params(); }

    // Hook for updates that depend on the batch just seen (BN running stats).
    virtual void post_batch_update(const Cache<Scalar>&) {}

    // Geometry descriptor for serialization: integers then floats.
    virtual std::vector<std::int32_t> desc_ints() const { return {}; }
    virtual std::vector<float> desc_floats() const { return {}; }

    bool ends_row = false;  // closes one row of the architecture table
};

namespace detail {

template <typename Scalar>
void init_uniform(Mat<Scalar>& m, int fan_in, Rng& rng) {
    const double a = std::sqrt(3.0 / static_cast<double>(fan_in));
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = static_cast<Scalar>(rng.uniform(-a, a));
}

inline int conv_out(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

// Output-column range [lo, hi) whose input index o*stride - pad + k stays
// inside [0, extent).
inline std::pair<int, int> valid_range(int out_extent, int in_extent, int k, int stride, int pad) {
    const int lo_num = pad - k;
    const int lo = lo_num <= 0 ? 0 : (lo_num + stride - 1) / stride;
    const int hi_num = in_extent - 1 + pad - k;
    if (hi_num < 0) return {0, 0};
    const int hi = std::min(out_extent, hi_num / stride + 1);
    return {lo, std::max(lo, hi)};
}

}  // namespace detail

// --- full convolution ---------------------------------------------------------
// Weights are stored im2col-compatible: row (ky*kw + kx)*cin + c, one column
// per output channel. No bias term; each convolution is followed by batch
// normalization, whose shift makes a bias redundant.
template <typename Scalar>
class ConvLayer final : public Layer<Scalar> {
public:
    ConvLayer(int kh, int kw, int cin, int cout, int stride, int pad)
        : kh_(kh), kw_(kw), cin_(cin), cout_(cout), stride_(stride), pad_(pad) {
        weight_.setZero(kh * kw * cin, cout);
    }

    void init(Rng& rng) { detail::init_uniform(weight_, kh_ * kw_ * cin_, rng); }

    LayerKind kind() const override { return LayerKind::Conv; }

    Shape out_shape(const Shape& in) const override {
        if (in.c != cin_) throw numeric_error("conv: expected " + std::to_string(cin_) + " channels");
        return {detail::conv_out(in.h, kh_, stride_, pad_), detail::conv_out(in.w, kw_, stride_, pad_), cout_};
    }

    Batch<Scalar> forward(const Batch<Scalar>& x, Mode mode, Rng&, Cache<Scalar>* cache) const override {
        const Shape out = out_shape(x.shape);
        Mat<Scalar> patches = im2col(x, out);
        Batch<Scalar> y;
        y.n = x.n;
        y.shape = out;
        y.data.noalias() = patches * weight_;
        if (mode == Mode::Train && cache) {
            cache->input = std::move(patches);
            cache->in_shape = x.shape;
            cache->n = x.n;
        }
        return y;
    }

    Batch<Scalar> backward(const Batch<Scalar>& dy, const Cache<Scalar>& cache,
                           Grads<Scalar>& grads) const override {
        grads.resize(1);
        grads[0].noalias() = cache.input.transpose() * dy.data;
        Mat<Scalar> dpatches;
        dpatches.noalias() = dy.data * weight_.transpose();
        return col2im(dpatches, dy.shape, cache.in_shape, cache.n);
    }

    std::vector<Mat<Scalar>*> params() override { return {&weight_}; }

    std::vector<std::int32_t> desc_ints() const override {
        return {kh_, kw_, cin_, cout_, stride_, pad_};
    }

private:
    // Patch matrix filled column by column so both sides of every copy are
    // contiguous in memory (activations are column-major, one channel per
    // column).
    Mat<Scalar> im2col(const Batch<Scalar>& x, const Shape& out) const {
        const Shape& in = x.shape;
        const Eigen::Index ohw = out.rows(), ihw = in.rows();
        const int ncols = kh_ * kw_ * cin_;
        Mat<Scalar> patches = Mat<Scalar>::Zero(static_cast<Eigen::Index>(x.n) * ohw, ncols);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int q = 0; q < ncols; ++q) {
            const int c = q % cin_;
            const int kx = (q / cin_) % kw_;
            const int ky = q / (cin_ * kw_);
            const auto [ox_lo, ox_hi] = detail::valid_range(out.w, in.w, kx, stride_, pad_);
            Scalar* pcol = patches.data() + static_cast<Eigen::Index>(q) * patches.rows();
            const Scalar* xcol = x.data.data() + static_cast<Eigen::Index>(c) * x.data.rows();
            for (int i = 0; i < x.n; ++i) {
                for (int oy = 0; oy < out.h; ++oy) {
                    const int iy = oy * stride_ - pad_ + ky;
                    if (iy < 0 || iy >= in.h) continue;
                    Scalar* __restrict__ dst = pcol + i * ohw + oy * out.w;
                    const Scalar* __restrict__ src = xcol + i * ihw + iy * in.w - pad_ + kx;
                    if (stride_ == 1) {
                        for (int ox = ox_lo; ox < ox_hi; ++ox) dst[ox] = src[ox];
                    } else {
                        for (int ox = ox_lo; ox < ox_hi; ++ox) dst[ox] = src[ox * stride_];
                    }
                }
            }
        }
        return patches;
    }

    // Scatter-add transpose of im2col; channels are partitioned so every
    // destination column has a single writer.
    Batch<Scalar> col2im(const Mat<Scalar>& dpatches, const Shape& out, const Shape& in, int n) const {
        const Eigen::Index ohw = out.rows(), ihw = in.rows();
        Batch<Scalar> dx(n, in);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int c = 0; c < cin_; ++c) {
            Scalar* xcol = dx.data.data() + static_cast<Eigen::Index>(c) * dx.data.rows();
            for (int ky = 0; ky < kh_; ++ky) {
                for (int kx = 0; kx < kw_; ++kx) {
                    const Eigen::Index q = (static_cast<Eigen::Index>(ky) * kw_ + kx) * cin_ + c;
                    const Scalar* pcol = dpatches.data() + q * dpatches.rows();
                    const auto [ox_lo, ox_hi] = detail::valid_range(out.w, in.w, kx, stride_, pad_);
                    for (int i = 0; i < n; ++i) {
                        for (int oy = 0; oy < out.h; ++oy) {
                            const int iy = oy * stride_ - pad_ + ky;
                            if (iy < 0 || iy >= in.h) continue;
                            const Scalar* __restrict__ src = pcol + i * ohw + oy * out.w;
                            Scalar* __restrict__ dst = xcol + i * ihw + iy * in.w - pad_ + kx;
                            if (stride_ == 1) {
                                for (int ox = ox_lo; ox < ox_hi; ++ox) dst[ox] += src[ox];
                            } else {
                                for (int ox = ox_lo; ox < ox_hi; ++ox) dst[ox * stride_] += src[ox];
                            }
                        }
                    }
                }
            }
        }
        return dx;
    }

    int kh_, kw_, cin_, cout_, stride_, pad_;
    Mat<Scalar> weight_;
};

// --- depthwise convolution -----------------------------------------------------
// One k x k filter per channel (depth multiplier 1). Weights: row ky*kw + kx,
// one column per channel.
template <typename Scalar>
class DwConvLayer final : public Layer<Scalar> {
public:
    DwConvLayer(int kh, int kw, int channels, int stride, int pad)
        : kh_(kh), kw_(kw), c_(channels), stride_(stride), pad_(pad) {
        weight_.setZero(kh * kw, channels);
    }

    void init(Rng& rng) { detail::init_uniform(weight_, kh_ * kw_, rng); }

    LayerKind kind() const override { return LayerKind::DwConv; }

    Shape out_shape(const Shape& in) const override {
        if (in.c != c_) throw numeric_error("dwconv: expected " + std::to_string(c_) + " channels");
        return {detail::conv_out(in.h, kh_, stride_, pad_), detail::conv_out(in.w, kw_, stride_, pad_), c_};
    }

    Batch<Scalar> forward(const Batch<Scalar>& x, Mode mode, Rng&, Cache<Scalar>* cache) const override {
        const Shape out = out_shape(x.shape);
        const Shape& in = x.shape;
        const Eigen::Index ohw = out.rows(), ihw = in.rows();
        Batch<Scalar> y(x.n, out);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int c = 0; c < c_; ++c) {
            const Scalar* xcol = x.data.data() + c * x.data.rows();
            Scalar* ycol = y.data.data() + c * y.data.rows();
            for (int ky = 0; ky < kh_; ++ky) {
                for (int kx = 0; kx < kw_; ++kx) {
                    const Scalar wv = weight_(ky * kw_ + kx, c);
                    const auto [ox_lo, ox_hi] = detail::valid_range(out.w, in.w, kx, stride_, pad_);
                    for (int i = 0; i < x.n; ++i) {
                        for (int oy = 0; oy < out.h; ++oy) {
                            const int iy = oy * stride_ - pad_ + ky;
                            if (iy < 0 || iy >= in.h) continue;
                            Scalar* __restrict__ dst = ycol + i * ohw + oy * out.w;
                            const Scalar* __restrict__ src = xcol + i * ihw + iy * in.w - pad_ + kx;
                            if (stride_ == 1) {
                                for (int ox = ox_lo; ox < ox_hi; ++ox) dst[ox] += wv * src[ox];
                            } else {
                                for (int ox = ox_lo; ox < ox_hi; ++ox)
                                    dst[ox] += wv * src[ox * stride_];
                            }
                        }
                    }
                }
            }
        }
        if (mode == Mode::Train && cache) {
            cache->input = x.data;
            cache->in_shape = in;
            cache->n = x.n;
        }
        return y;
    }

    Batch<Scalar> backward(const Batch<Scalar>& dy, const Cache<Scalar>& cache,
                           Grads<Scalar>& grads) const override {
        const Shape& in = cache.in_shape;
        const Shape& out = dy.shape;
        const Eigen::Index ohw = out.rows(), ihw = in.rows();
        grads.resize(1);
        grads[0] = Mat<Scalar>::Zero(kh_ * kw_, c_);
        Batch<Scalar> dx(cache.n, in);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int c = 0; c < c_; ++c) {
            const Scalar* xcol = cache.input.data() + c * cache.input.rows();
            const Scalar* gcol = dy.data.data() + c * dy.data.rows();
            Scalar* dxcol = dx.data.data() + c * dx.data.rows();
            for (int ky = 0; ky < kh_; ++ky) {
                for (int kx = 0; kx < kw_; ++kx) {
                    const Scalar wv = weight_(ky * kw_ + kx, c);
                    const auto [ox_lo, ox_hi] = detail::valid_range(out.w, in.w, kx, stride_, pad_);
                    // Weight gradient: Eigen's dot gives a fixed-order SIMD
                    // reduction on the contiguous stride-1 rows.
                    Scalar wgrad = 0;
                    const int len = ox_hi - ox_lo;
                    for (int i = 0; i < cache.n; ++i) {
                        for (int oy = 0; oy < out.h; ++oy) {
                            const int iy = oy * stride_ - pad_ + ky;
                            if (iy < 0 || iy >= in.h) continue;
                            const Scalar* g = gcol + i * ohw + oy * out.w;
                            const Scalar* src = xcol + i * ihw + iy * in.w - pad_ + kx;
                            if (stride_ == 1 && len > 0) {
                                Eigen::Map<const Eigen::Vector<Scalar, Eigen::Dynamic>> gv(g + ox_lo, len);
                                Eigen::Map<const Eigen::Vector<Scalar, Eigen::Dynamic>> xv(src + ox_lo, len);
                                wgrad += gv.dot(xv);
                            } else {
                                for (int ox = ox_lo; ox < ox_hi; ++ox)
                                    wgrad += g[ox] * src[ox * stride_];
                            }
                        }
                    }
                    grads[0](ky * kw_ + kx, c) = wgrad;

                    // Input gradient: independent elements, vectorizes.
                    for (int i = 0; i < cache.n; ++i) {
                        for (int oy = 0; oy < out.h; ++oy) {
                            const int iy = oy * stride_ - pad_ + ky;
                            if (iy < 0 || iy >= in.h) continue;
                            const Scalar* __restrict__ g = gcol + i * ohw + oy * out.w;
                            Scalar* __restrict__ dst = dxcol + i * ihw + iy * in.w - pad_ + kx;
                            if (stride_ == 1) {
                                for (int ox = ox_lo; ox < ox_hi; ++ox) dst[ox] += wv * g[ox];
                            } else {
                                for (int ox = ox_lo; ox < ox_hi; ++ox)
                                    dst[ox * stride_] += wv * g[ox];
                            }
                        }
                    }
                }
            }
        }
        return dx;
    }

    std::vector<Mat<Scalar>*> params() override { return {&weight_}; }

    std::vector<std::int32_t> desc_ints() const override { return {kh_, kw_, c_, stride_, pad_}; }

private:
    int kh_, kw_, c_, stride_, pad_;
    Mat<Scalar> weight_;
};

// --- pointwise (1x1) convolution ------------------------------------------------
template <typename Scalar>
class PwConvLayer final : public Layer<Scalar> {
public:
    PwConvLayer(int cin, int cout) : cin_(cin), cout_(cout) { weight_.setZero(cin, cout); }

    void init(Rng& rng) { detail::init_uniform(weight_, cin_, rng); }

    LayerKind kind() const override { return LayerKind::PwConv; }

    Shape out_shape(const Shape& in) const override {
        if (in.c != cin_) throw numeric_error("pwconv: expected " + std::to_string(cin_) + " channels");
        return {in.h, in.w, cout_};
    }

    Batch<Scalar> forward(const Batch<Scalar>& x, Mode mode, Rng&, Cache<Scalar>* cache) const override {
        Batch<Scalar> y;
        y.n = x.n;
        y.shape = out_shape(x.shape);
        y.data.noalias() = x.data * weight_;
        if (mode == Mode::Train && cache) {
            cache->input = x.data;
            cache->in_shape = x.shape;
            cache->n = x.n;
        }
        return y;
    }

    Batch<Scalar> backward(const Batch<Scalar>& dy, const Cache<Scalar>& cache,
                           Grads<Scalar>& grads) const override {
        grads.resize(1);
        grads[0].noalias() = cache.input.transpose() * dy.data;
        Batch<Scalar> dx;
        dx.n = cache.n;
        dx.shape = cache.in_shape;
        dx.data.noalias() = dy.data * weight_.transpose();
        return dx;
    }

    std::vector<Mat<Scalar>*> params() override { return {&weight_}; }

    std::vector<std::int32_t> desc_ints() const override { return {cin_, cout_}; }

private:
    int cin_, cout_;
    Mat<Scalar> weight_;
};

// --- batch normalization --------------------------------------------------------
// Per-channel statistics over every sample and spatial position. Train mode
// uses batch statistics (cached for backward); infer mode uses running
// statistics, updated after each training batch by post_batch_update.
template <typename Scalar>
class BatchNormLayer final : public Layer<Scalar> {
public:
    explicit BatchNormLayer(int channels, double eps = 1e-5, double momentum = 0.9)
        : c_(channels), eps_(static_cast<Scalar>(eps)), momentum_(static_cast<Scalar>(momentum)) {
        gamma_ = Mat<Scalar>::Ones(channels, 1);
        beta_ = Mat<Scalar>::Zero(channels, 1);
        running_mean_ = Mat<Scalar>::Zero(channels, 1);
        running_var_ = Mat<Scalar>::Ones(channels, 1);
    }

    LayerKind kind() const override { return LayerKind::BatchNorm; }

    Shape out_shape(const Shape& in) const override {
        if (in.c != c_) throw numeric_error("batchnorm: expected " + std::to_string(c_) + " channels");
        return in;
    }

    Batch<Scalar> forward(const Batch<Scalar>& x, Mode mode, Rng&, Cache<Scalar>* cache) const override {
        Batch<Scalar> y;
        y.n = x.n;
        y.shape = x.shape;
        const auto m = static_cast<Scalar>(x.data.rows());

        if (mode == Mode::Infer) {
            y.data.resize(x.data.rows(), x.data.cols());
            for (int c = 0; c < c_; ++c) {
                const Scalar inv = Scalar(1) / std::sqrt(running_var_(c, 0) + eps_);
                y.data.col(c) =
                    ((x.data.col(c).array() - running_mean_(c, 0)) * inv * gamma_(c, 0) + beta_(c, 0))
                        .matrix();
            }
            return y;
        }

        Eigen::Vector<Scalar, Eigen::Dynamic> mu(c_), var(c_), inv_std(c_);
        Mat<Scalar> xhat(x.data.rows(), c_);
        y.data.resize(x.data.rows(), c_);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int c = 0; c < c_; ++c) {
            const Scalar sum = x.data.col(c).sum();
            const Scalar sumsq = x.data.col(c).squaredNorm();
            mu(c) = sum / m;
            var(c) = std::max(sumsq / m - mu(c) * mu(c), Scalar(0));
            inv_std(c) = Scalar(1) / std::sqrt(var(c) + eps_);
            xhat.col(c) = ((x.data.col(c).array() - mu(c)) * inv_std(c)).matrix();
            y.data.col(c) = (xhat.col(c).array() * gamma_(c, 0) + beta_(c, 0)).matrix();
        }
        if (cache) {
            cache->aux = std::move(xhat);
            cache->v1 = mu;
            cache->v2 = var;
            cache->v3 = inv_std;
            cache->in_shape = x.shape;
            cache->n = x.n;
        }
        return y;
    }

    Batch<Scalar> backward(const Batch<Scalar>& dy, const Cache<Scalar>& cache,
                           Grads<Scalar>& grads) const override {
        const auto m = static_cast<Scalar>(dy.data.rows());
        grads.resize(2);
        grads[0].resize(c_, 1);  // dgamma
        grads[1].resize(c_, 1);  // dbeta

        Batch<Scalar> dx;
        dx.n = cache.n;
        dx.shape = cache.in_shape;
        dx.data.resize(dy.data.rows(), c_);
        for (int c = 0; c < c_; ++c) {
            const auto dyc = dy.data.col(c);
            const auto xh = cache.aux.col(c);
            const Scalar dgamma = dyc.cwiseProduct(xh).sum();
            const Scalar dbeta = dyc.sum();
            grads[0](c, 0) = dgamma;
            grads[1](c, 0) = dbeta;
            // dx = gamma*inv_std/m * (m*dy - sum(dy) - xhat * sum(dy .* xhat))
            dx.data.col(c) = ((gamma_(c, 0) * cache.v3(c) / m) *
                              (m * dyc.array() - dbeta - xh.array() * dgamma))
                                 .matrix();
        }
        return dx;
    }

    void post_batch_update(const Cache<Scalar>& cache) override {
        for (int c = 0; c < c_; ++c) {
            running_mean_(c, 0) = momentum_ * running_mean_(c, 0) + (Scalar(1) - momentum_) * cache.v1(c);
            running_var_(c, 0) = momentum_ * running_var_(c, 0) + (Scalar(1) - momentum_) * cache.v2(c);
        }
    }

    std::vector<Mat<Scalar>*> params() override { return {&gamma_, &beta_}; }
    std::vector<Mat<Scalar>*> blobs() override {
        return {&gamma_, &beta_, &running_mean_, &running_var_};
    }

    std::vector<std::int32_t> desc_ints() const override { return {c_}; }
    std::vector<float> desc_floats() const override {
        return {static_cast<float>(eps_), static_cast<float>(momentum_)};
    }

private:
    int c_;
    Scalar eps_, momentum_;
    Mat<Scalar> gamma_, beta_, running_mean_, running_var_;
};

// --- ReLU ------------------------------------------------------------------------
template <typename Scalar>
class ReluLayer final : public Layer<Scalar> {
public:
    LayerKind kind() const override { return LayerKind::ReLU; }
    Shape out_shape(const Shape& in) const override { return in; }

    Batch<Scalar> forward(const Batch<Scalar>& x, Mode mode, Rng&, Cache<Scalar>* cache) const override {
        Batch<Scalar> y;
        y.n = x.n;
        y.shape = x.shape;
        y.data = x.data.cwiseMax(Scalar(0));
        if (mode == Mode::Train && cache) {
            cache->aux = y.data;  // backward gates on output > 0
            cache->in_shape = x.shape;
            cache->n = x.n;
        }
        return y;
    }

    Batch<Scalar> backward(const Batch<Scalar>& dy, const Cache<Scalar>& cache,
                           Grads<Scalar>& grads) const override {
        grads.clear();
        Batch<Scalar> dx;
        dx.n = cache.n;
        dx.shape = cache.in_shape;
        dx.data = (cache.aux.array() > Scalar(0)).select(dy.data, Scalar(0));
        return dx;
    }

    std::vector<Mat<Scalar>*> params() override { return {}; }
};

// --- average pooling ---------------------------------------------------------------
template <typename Scalar>
class AvgPoolLayer final : public Layer<Scalar> {
public:
    AvgPoolLayer(int kh, int kw, int stride) : kh_(kh), kw_(kw), stride_(stride) {}

    LayerKind kind() const override { return LayerKind::AvgPool; }

    Shape out_shape(const Shape& in) const override {
        if (in.h < kh_ || in.w < kw_) throw numeric_error("avgpool: window larger than input");
        return {(in.h - kh_) / stride_ + 1, (in.w - kw_) / stride_ + 1, in.c};
    }

    Batch<Scalar> forward(const Batch<Scalar>& x, Mode mode, Rng&, Cache<Scalar>* cache) const override {
        const Shape out = out_shape(x.shape);
        const Shape& in = x.shape;
        Batch<Scalar> y(x.n, out);
        const Scalar inv = Scalar(1) / static_cast<Scalar>(kh_ * kw_);
        for (int i = 0; i < x.n; ++i)
            for (int oy = 0; oy < out.h; ++oy)
                for (int ox = 0; ox < out.w; ++ox) {
                    auto row = y.data.row(static_cast<Eigen::Index>(i) * out.rows() + oy * out.w + ox);
                    for (int ky = 0; ky < kh_; ++ky)
                        for (int kx = 0; kx < kw_; ++kx)
                            row += x.data.row(static_cast<Eigen::Index>(i) * in.rows() +
                                              (oy * stride_ + ky) * in.w + (ox * stride_ + kx));
                    row *= inv;
                }
        if (mode == Mode::Train && cache) {
            cache->in_shape = in;
            cache->n = x.n;
        }
        return y;
    }

    Batch<Scalar> backward(const Batch<Scalar>& dy, const Cache<Scalar>& cache,
                           Grads<Scalar>& grads) const override {
        grads.clear();
        const Shape& in = cache.in_shape;
        const Shape& out = dy.shape;
        Batch<Scalar> dx(cache.n, in);
        const Scalar inv = Scalar(1) / static_cast<Scalar>(kh_ * kw_);
        for (int i = 0; i < cache.n; ++i)
            for (int oy = 0; oy < out.h; ++oy)
                for (int ox = 0; ox < out.w; ++ox) {
                    const auto g =
                        dy.data.row(static_cast<Eigen::Index>(i) * out.rows() + oy * out.w + ox) * inv;
                    for (int ky = 0; ky < kh_; ++ky)
                        for (int kx = 0; kx < kw_; ++kx)
                            dx.data.row(static_cast<Eigen::Index>(i) * in.rows() +
                                        (oy * stride_ + ky) * in.w + (ox * stride_ + kx)) += g;
                }
        return dx;
    }

    std::vector<Mat<Scalar>*> params() override { return {}; }

    std::vector<std::int32_t> desc_ints() const override { return {kh_, kw_, stride_}; }

private:
    int kh_, kw_, stride_;
};

// --- fully connected ----------------------------------------------------------------
template <typename Scalar>
class FcLayer final : public Layer<Scalar> {
public:
    FcLayer(int in, int out) : in_(in), out_(out) {
        weight_.setZero(in, out);
        bias_.setZero(out, 1);
    }

    void init(Rng& rng) { detail::init_uniform(weight_, in_, rng); }

    LayerKind kind() const override { return LayerKind::FC; }

    Shape out_shape(const Shape& in) const override {
        if (in.features() != in_)
            throw numeric_error("fc: expected " + std::to_string(in_) + " input features, got " +
                                in.str());
        return {1, 1, out_};
    }

    Batch<Scalar> forward(const Batch<Scalar>& x, Mode mode, Rng&, Cache<Scalar>* cache) const override {
        Mat<Scalar> flat = flatten_batch(x);
        Batch<Scalar> y;
        y.n = x.n;
        y.shape = {1, 1, out_};
        y.data.noalias() = flat * weight_;
        y.data.rowwise() += bias_.col(0).transpose();
        if (mode == Mode::Train && cache) {
            cache->input = std::move(flat);
            cache->in_shape = x.shape;
            cache->n = x.n;
        }
        return y;
    }

    Batch<Scalar> backward(const Batch<Scalar>& dy, const Cache<Scalar>& cache,
                           Grads<Scalar>& grads) const override {
        grads.resize(2);
        grads[0].noalias() = cache.input.transpose() * dy.data;
        grads[1] = dy.data.colwise().sum().transpose();
        Mat<Scalar> dflat;
        dflat.noalias() = dy.data * weight_.transpose();
        return unflatten_batch(dflat, cache.n, cache.in_shape);
    }

    std::vector<Mat<Scalar>*> params() override { return {&weight_, &bias_}; }

    std::vector<std::int32_t> desc_ints() const override { return {in_, out_}; }

private:
    int in_, out_;
    Mat<Scalar> weight_, bias_;
};

// --- inverted dropout ---------------------------------------------------------------
// Surviving activations are scaled by 1/keep during training so inference is
// the identity.
template <typename Scalar>
class DropoutLayer final : public Layer<Scalar> {
public:
    explicit DropoutLayer(double keep) { set_keep(keep); }

    void set_keep(double keep) {
        if (!(keep > 0.0 && keep <= 1.0)) throw numeric_error("dropout: keep must be in (0, 1]");
        keep_ = keep;
    }
    double keep() const { return keep_; }

    LayerKind kind() const override { return LayerKind::Dropout; }
    Shape out_shape(const Shape& in) const override { return in; }

    Batch<Scalar> forward(const Batch<Scalar>& x, Mode mode, Rng& rng, Cache<Scalar>* cache) const override {
        Batch<Scalar> y;
        y.n = x.n;
        y.shape = x.shape;
        if (mode == Mode::Infer) {
            y.data = x.data;
            return y;
        }
        Mat<Scalar> mask(x.data.rows(), x.data.cols());
        const auto scale = static_cast<Scalar>(1.0 / keep_);
        for (Eigen::Index c = 0; c < mask.cols(); ++c)
            for (Eigen::Index r = 0; r < mask.rows(); ++r)
                mask(r, c) = rng.uniform() < keep_ ? scale : Scalar(0);
        y.data = x.data.cwiseProduct(mask);
        if (cache) {
            cache->aux = std::move(mask);
            cache->in_shape = x.shape;
            cache->n = x.n;
        }
        return y;
    }

    Batch<Scalar> backward(const Batch<Scalar>& dy, const Cache<Scalar>& cache,
                           Grads<Scalar>& grads) const override {
        grads.clear();
        Batch<Scalar> dx;
        dx.n = cache.n;
        dx.shape = cache.in_shape;
        dx.data = dy.data.cwiseProduct(cache.aux);
        return dx;
    }

    std::vector<Mat<Scalar>*> params() override { return {}; }

    std::vector<float> desc_floats() const override { return {static_cast<float>(keep_)}; }

private:
    double keep_ = 0.4;
};

}  // namespace rppg::cnn
