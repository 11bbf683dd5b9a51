#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

#include "rppg/cnn/layers.hpp"
#include "rppg/cnn/tensor.hpp"
#include "rppg/crc32.hpp"
#include "rppg/errors.hpp"
#include "rppg/featex.hpp"

namespace rppg::cnn {

// Label normalization: 45 bpm -> 0, 240 bpm -> 1.
constexpr double kHrMin = 45.0;
constexpr double kHrMax = 240.0;

inline double normalize_label(double hr_bpm) { return (hr_bpm - kHrMin) / (kHrMax - kHrMin); }
inline double denormalize_label(double v) { return kHrMin + v * (kHrMax - kHrMin); }

template <typename Scalar>
struct Model {
    std::vector<std::unique_ptr<Layer<Scalar>>> layers;
    Shape input_shape{25, 25, 3};
    // Per-channel affine input preprocessing, fit on the training set.
    Eigen::Vector3d input_mean = Eigen::Vector3d::Zero();
    Eigen::Vector3d input_std = Eigen::Vector3d::Ones();

    Batch<Scalar> normalize_input(const Batch<Scalar>& x) const {
        Batch<Scalar> out;
        out.n = x.n;
        out.shape = x.shape;
        out.data.resize(x.data.rows(), x.data.cols());
        for (int c = 0; c < 3; ++c)
            out.data.col(c) = (x.data.col(c).array() - static_cast<Scalar>(input_mean(c))) /
                              static_cast<Scalar>(input_std(c));
        return out;
    }

    // Forward pass over a batch. Train mode fills `caches` (one per layer);
    // infer mode is const-safe and needs no caches.
    Batch<Scalar> forward_batch(const Batch<Scalar>& x, Mode mode, Rng& rng,
                                std::vector<Cache<Scalar>>* caches = nullptr) const {
        if (!(x.shape == input_shape))
            throw numeric_error("cnn: input shape " + x.shape.str() + ", expected " +
                                input_shape.str());
        if (caches) caches->resize(layers.size());
        Batch<Scalar> a = normalize_input(x);
        for (std::size_t i = 0; i < layers.size(); ++i)
            a = layers[i]->forward(a, mode, rng, caches ? &(*caches)[i] : nullptr);
        return a;
    }

    // Backward pass; returns one gradient list per layer (empty for
    // parameter-free layers).
    std::vector<Grads<Scalar>> backward_batch(const Batch<Scalar>& dy,
                                              const std::vector<Cache<Scalar>>& caches) const {
        if (caches.size() != layers.size()) throw numeric_error("cnn: stale or missing cache");
        std::vector<Grads<Scalar>> grads(layers.size());
        Batch<Scalar> d = dy;
        for (std::size_t i = layers.size(); i-- > 0;)
            d = layers[i]->backward(d, caches[i], grads[i]);
        return grads;
    }

    void post_batch_update(const std::vector<Cache<Scalar>>& caches) {
        for (std::size_t i = 0; i < layers.size(); ++i) layers[i]->post_batch_update(caches[i]);
    }

    // Shape after every layer.
    std::vector<Shape> shape_trace() const {
        std::vector<Shape> trace;
        Shape s = input_shape;
        for (const auto& l : layers) {
            s = l->out_shape(s);
            trace.push_back(s);
        }
        return trace;
    }

    // Architecture-table trace: the input shape plus the shape after each
    // table row (convolutions report after their BN+ReLU).
    std::vector<Shape> table_trace() const {
        std::vector<Shape> trace{input_shape};
        Shape s = input_shape;
        for (const auto& l : layers) {
            s = l->out_shape(s);
            if (l->ends_row) trace.push_back(s);
        }
        return trace;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers)
            for (const auto* p : l->params()) n += static_cast<std::size_t>(p->size());
        return n;
    }

    std::vector<std::vector<Mat<Scalar>>> snapshot_blobs() const {
        std::vector<std::vector<Mat<Scalar>>> snap;
        for (const auto& l : layers) {
            std::vector<Mat<Scalar>> entry;
            for (auto* b : l->blobs()) entry.push_back(*b);
            snap.push_back(std::move(entry));
        }
        return snap;
    }

    void restore_blobs(const std::vector<std::vector<Mat<Scalar>>>& snap) {
        if (snap.size() != layers.size()) throw numeric_error("cnn: snapshot does not match model");
        for (std::size_t i = 0; i < layers.size(); ++i) {
            auto blobs = layers[i]->blobs();
            if (blobs.size() != snap[i].size()) throw numeric_error("cnn: snapshot does not match model");
            for (std::size_t j = 0; j < blobs.size(); ++j) *blobs[j] = snap[i][j];
        }
    }
};

// Canonical 25x25x3 -> 1 regressor. Every convolution is followed by batch
// normalization and ReLU; downsampling happens through stride-2 depthwise
// steps. Padding is chosen so the activation trace reproduces the shape
// table: 23x23x96, 21x21x96, 21x21x96, 11x11x96, 11x11x96, 6x6x96, 6x6x128,
// 3x3x128, 3x3x128, 2x2x128, 2x2x128, 1x1x128, 192, 192, 1.
template <typename Scalar>
Model<Scalar> make_hr_model(std::uint64_t seed, double dropout_keep = 0.4) {
    Model<Scalar> m;
    m.input_shape = {25, 25, 3};
    Rng rng(seed);

    auto conv_block = [&](auto layer, int channels) {
        layer->init(rng);
        m.layers.push_back(std::move(layer));
        m.layers.push_back(std::make_unique<BatchNormLayer<Scalar>>(channels));
        auto relu = std::make_unique<ReluLayer<Scalar>>();
        relu->ends_row = true;
        m.layers.push_back(std::move(relu));
    };

    conv_block(std::make_unique<ConvLayer<Scalar>>(5, 5, 3, 96, 1, 1), 96);
    conv_block(std::make_unique<DwConvLayer<Scalar>>(3, 3, 96, 1, 0), 96);
    conv_block(std::make_unique<PwConvLayer<Scalar>>(96, 96), 96);
    conv_block(std::make_unique<DwConvLayer<Scalar>>(3, 3, 96, 2, 1), 96);
    conv_block(std::make_unique<PwConvLayer<Scalar>>(96, 96), 96);
    conv_block(std::make_unique<DwConvLayer<Scalar>>(3, 3, 96, 2, 1), 96);
    conv_block(std::make_unique<PwConvLayer<Scalar>>(96, 128), 128);
    conv_block(std::make_unique<DwConvLayer<Scalar>>(3, 3, 128, 2, 1), 128);
    conv_block(std::make_unique<PwConvLayer<Scalar>>(128, 128), 128);
    conv_block(std::make_unique<DwConvLayer<Scalar>>(3, 3, 128, 2, 1), 128);
    conv_block(std::make_unique<PwConvLayer<Scalar>>(128, 128), 128);

    auto pool = std::make_unique<AvgPoolLayer<Scalar>>(2, 2, 1);
    pool->ends_row = true;
    m.layers.push_back(std::move(pool));

    auto fc1 = std::make_unique<FcLayer<Scalar>>(128, 192);
    fc1->init(rng);
    fc1->ends_row = true;
    m.layers.push_back(std::move(fc1));

    auto drop = std::make_unique<DropoutLayer<Scalar>>(dropout_keep);
    drop->ends_row = true;
    m.layers.push_back(std::move(drop));

    auto fc2 = std::make_unique<FcLayer<Scalar>>(192, 1);
    fc2->init(rng);
    fc2->ends_row = true;
    m.layers.push_back(std::move(fc2));

    return m;
}

// Feature image -> network input sample ((h*w) x 3, row y*W + x).
template <typename Scalar>
Mat<Scalar> sample_from_feature(const featex::FeatureImage& fim) {
    const Eigen::Index h = fim.rows(), w = fim.cols();
    Mat<Scalar> out(h * w, 3);
    for (int c = 0; c < 3; ++c)
        for (Eigen::Index y = 0; y < h; ++y)
            for (Eigen::Index x = 0; x < w; ++x)
                out(y * w + x, c) = static_cast<Scalar>(fim.ch[c](y, x));
    return out;
}

// Predicted heart rate in bpm, clamped to the label range.
template <typename Scalar>
double predict_hr(const Model<Scalar>& model, const featex::FeatureImage& fim) {
    Batch<Scalar> x;
    x.n = 1;
    x.shape = {static_cast<int>(fim.rows()), static_cast<int>(fim.cols()), 3};
    x.data = sample_from_feature<Scalar>(fim);
    Rng rng(0);  // unused in infer mode
    const Batch<Scalar> y = model.forward_batch(x, Mode::Infer, rng);
    const double bpm = denormalize_label(static_cast<double>(y.data(0, 0)));
    return std::clamp(bpm, kHrMin, kHrMax);
}

// --- model container ----------------------------------------------------------
// magic "EVMC", u32 version, architecture descriptor block, 32-bit float
// blobs in layer order, trailing CRC-32 over everything before it.

namespace detail_io {

constexpr std::uint32_t kModelVersion = 1;

template <typename T>
void put(std::string& buf, const T& v) {
    buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(const std::string& buf, std::size_t& off, const char* what) {
    if (off + sizeof(T) > buf.size())
        throw data_error(std::string("cnn: truncated model file while reading ") + what);
    T v;
    std::memcpy(&v, buf.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

}  // namespace detail_io

template <typename Scalar>
void save_model(const Model<Scalar>& model, const std::filesystem::path& path) {
    using detail_io::put;
    std::string buf;
    buf.append("EVMC", 4);
    put(buf, detail_io::kModelVersion);

    put(buf, static_cast<std::uint32_t>(model.layers.size()));
    for (const auto& l : model.layers) {
        put(buf, static_cast<std::uint32_t>(l->kind()));
        const auto ints = l->desc_ints();
        put(buf, static_cast<std::uint32_t>(ints.size()));
        for (auto v : ints) put(buf, v);
        const auto floats = l->desc_floats();
        put(buf, static_cast<std::uint32_t>(floats.size()));
        for (auto v : floats) put(buf, v);
    }

    put(buf, static_cast<float>(kHrMin));
    put(buf, static_cast<float>(kHrMax));
    for (int c = 0; c < 3; ++c) put(buf, static_cast<float>(model.input_mean(c)));
    for (int c = 0; c < 3; ++c) put(buf, static_cast<float>(model.input_std(c)));

    for (const auto& l : model.layers) {
        for (const auto* blob : l->blobs()) {
            put(buf, static_cast<std::uint32_t>(blob->rows()));
            put(buf, static_cast<std::uint32_t>(blob->cols()));
            for (Eigen::Index c = 0; c < blob->cols(); ++c)
                for (Eigen::Index r = 0; r < blob->rows(); ++r)
                    put(buf, static_cast<float>((*blob)(r, c)));
        }
    }

    put(buf, crc32(buf.data(), buf.size()));

    std::ofstream f(path, std::ios::binary);
    if (!f) throw data_error("cnn: cannot open for writing: " + path.string());
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw data_error("cnn: short write: " + path.string());
}

template <typename Scalar = float>
Model<Scalar> load_model(const std::filesystem::path& path) {
    using detail_io::take;
    std::ifstream f(path, std::ios::binary);
    if (!f) throw data_error("cnn: cannot open model: " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    const std::string buf = ss.str();

    if (buf.size() < 12 || std::memcmp(buf.data(), "EVMC", 4) != 0)
        throw data_error("cnn: bad magic, not a model file: " + path.string());
    if (buf.size() < 4 + 4 + 4) throw data_error("cnn: truncated model file: " + path.string());
    const std::uint32_t stored_crc = [&] {
        std::uint32_t v;
        std::memcpy(&v, buf.data() + buf.size() - 4, 4);
        return v;
    }();
    if (crc32(buf.data(), buf.size() - 4) != stored_crc)
        throw data_error("cnn: model file CRC mismatch: " + path.string());

    std::size_t off = 4;
    const auto version = take<std::uint32_t>(buf, off, "version");
    if (version != detail_io::kModelVersion)
        throw data_error("cnn: unsupported model version " + std::to_string(version));

    Model<Scalar> model;
    const auto n_layers = take<std::uint32_t>(buf, off, "layer count");
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        const auto kind = static_cast<LayerKind>(take<std::uint32_t>(buf, off, "layer kind"));
        std::vector<std::int32_t> ints(take<std::uint32_t>(buf, off, "descriptor"));
        for (auto& v : ints) v = take<std::int32_t>(buf, off, "descriptor");
        std::vector<float> floats(take<std::uint32_t>(buf, off, "descriptor"));
        for (auto& v : floats) v = take<float>(buf, off, "descriptor");

        auto require = [&](bool ok) {
            if (!ok) throw data_error("cnn: malformed layer descriptor in " + path.string());
        };
        std::unique_ptr<Layer<Scalar>> layer;
        switch (kind) {
            case LayerKind::Conv:
                require(ints.size() == 6);
                layer = std::make_unique<ConvLayer<Scalar>>(ints[0], ints[1], ints[2], ints[3],
                                                            ints[4], ints[5]);
                break;
            case LayerKind::DwConv:
                require(ints.size() == 5);
                layer = std::make_unique<DwConvLayer<Scalar>>(ints[0], ints[1], ints[2], ints[3],
                                                              ints[4]);
                break;
            case LayerKind::PwConv:
                require(ints.size() == 2);
                layer = std::make_unique<PwConvLayer<Scalar>>(ints[0], ints[1]);
                break;
            case LayerKind::BatchNorm:
                require(ints.size() == 1 && floats.size() == 2);
                layer = std::make_unique<BatchNormLayer<Scalar>>(ints[0], floats[0], floats[1]);
                break;
            case LayerKind::ReLU:
                layer = std::make_unique<ReluLayer<Scalar>>();
                break;
            case LayerKind::AvgPool:
                require(ints.size() == 3);
                layer = std::make_unique<AvgPoolLayer<Scalar>>(ints[0], ints[1], ints[2]);
                break;
            case LayerKind::FC:
                require(ints.size() == 2);
                layer = std::make_unique<FcLayer<Scalar>>(ints[0], ints[1]);
                break;
            case LayerKind::Dropout:
                require(floats.size() == 1);
                layer = std::make_unique<DropoutLayer<Scalar>>(floats[0]);
                break;
            default:
                throw data_error("cnn: unknown layer kind in " + path.string());
        }
        // Row boundaries: ReLU closes a convolution row; pool/fc/dropout are
        // rows of their own.
        layer->ends_row = kind == LayerKind::ReLU || kind == LayerKind::AvgPool ||
                          kind == LayerKind::FC || kind == LayerKind::Dropout;
        model.layers.push_back(std::move(layer));
    }

    take<float>(buf, off, "label range");  // kHrMin, fixed by construction
    take<float>(buf, off, "label range");  // kHrMax
    for (int c = 0; c < 3; ++c) model.input_mean(c) = take<float>(buf, off, "input mean");
    for (int c = 0; c < 3; ++c) model.input_std(c) = take<float>(buf, off, "input std");

    for (auto& l : model.layers) {
        for (auto* blob : l->blobs()) {
            const auto rows = take<std::uint32_t>(buf, off, "blob shape");
            const auto cols = take<std::uint32_t>(buf, off, "blob shape");
            if (rows != static_cast<std::uint32_t>(blob->rows()) ||
                cols != static_cast<std::uint32_t>(blob->cols()))
                throw data_error("cnn: blob shape mismatch in " + path.string());
            for (std::uint32_t c = 0; c < cols; ++c)
                for (std::uint32_t r = 0; r < rows; ++r)
                    (*blob)(r, c) = static_cast<Scalar>(take<float>(buf, off, "blob data"));
        }
    }
    if (off != buf.size() - 4) throw data_error("cnn: trailing bytes in model file: " + path.string());
    return model;
}

}  // namespace rppg::cnn
