#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rppg/cnn/model.hpp"
#include "rppg/cnn/train.hpp"
#include "rppg/rng.hpp"

using namespace rppg;
using namespace rppg::cnn;

namespace {

constexpr double kEps = 1e-3;
constexpr double kTol = 1e-4;

double rel_err(double a, double b) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / denom;
}

Batch<double> random_batch(int n, Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Batch<double> b(n, s);
    for (Eigen::Index r = 0; r < b.data.rows(); ++r)
        for (Eigen::Index c = 0; c < b.data.cols(); ++c)
            b.data(r, c) = rng.uniform(lo, hi);
    return b;
}

// Scalar objective over a single layer: L = (1/2N) sum (y - t)^2 summed over
// all outputs, with a fixed random target. Checks every parameter and a
// sample of input entries against central differences.
void check_layer(Layer<double>& layer, Shape in_shape, int n, std::uint64_t seed,
                 int max_params_per_blob = 64) {
    Rng rng(seed);
    const Batch<double> x = random_batch(n, in_shape, rng);
    const Shape out_shape = layer.out_shape(in_shape);
    Mat<double> target(n * out_shape.rows(), out_shape.c);
    for (Eigen::Index r = 0; r < target.rows(); ++r)
        for (Eigen::Index c = 0; c < target.cols(); ++c) target(r, c) = rng.uniform(-1.0, 1.0);

    const auto objective = [&](const Batch<double>& input) {
        Rng fwd_rng(42);  // fixed so dropout masks repeat exactly
        const Batch<double> y = layer.forward(input, Mode::Train, fwd_rng, nullptr);
        return (y.data - target).squaredNorm() / (2.0 * y.data.rows());
    };

    // Analytic gradients.
    Cache<double> cache;
    Rng fwd_rng(42);
    const Batch<double> y = layer.forward(x, Mode::Train, fwd_rng, &cache);
    Batch<double> dy;
    dy.n = y.n;
    dy.shape = y.shape;
    dy.data = (y.data - target) / static_cast<double>(y.data.rows());
    Grads<double> grads;
    const Batch<double> dx = layer.backward(dy, cache, grads);

    // Parameters.
    auto params = layer.params();
    REQUIRE(grads.size() == params.size());
    Rng pick(seed ^ 0xBEEF);
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Mat<double>& w = *params[pi];
        const Eigen::Index total = w.size();
        const Eigen::Index n_check = std::min<Eigen::Index>(total, max_params_per_blob);
        for (Eigen::Index k = 0; k < n_check; ++k) {
            const Eigen::Index flat = (total <= max_params_per_blob)
                                          ? k
                                          : static_cast<Eigen::Index>(pick.below(total));
            double* entry = w.data() + flat;
            const double orig = *entry;
            *entry = orig + kEps;
            const double lp = objective(x);
            *entry = orig - kEps;
            const double lm = objective(x);
            *entry = orig;
            const double numeric = (lp - lm) / (2.0 * kEps);
            const double analytic = grads[pi].data()[flat];
            INFO("param blob ", pi, " flat index ", flat, " analytic ", analytic, " numeric ",
                 numeric);
            CHECK(rel_err(analytic, numeric) < kTol);
        }
    }

    // A sample of input entries.
    Rng ipick(seed ^ 0xF00D);
    Batch<double> xp = x;
    for (int k = 0; k < 32; ++k) {
        const Eigen::Index flat = static_cast<Eigen::Index>(ipick.below(x.data.size()));
        double* entry = xp.data.data() + flat;
        const double orig = *entry;
        *entry = orig + kEps;
        const double lp = objective(xp);
        *entry = orig - kEps;
        const double lm = objective(xp);
        *entry = orig;
        const double numeric = (lp - lm) / (2.0 * kEps);
        const double analytic = dx.data.data()[flat];
        INFO("input flat index ", flat);
        CHECK(rel_err(analytic, numeric) < kTol);
    }
}

}  // namespace

TEST_CASE("full convolution gradients") {
    ConvLayer<double> conv(5, 5, 3, 8, 1, 1);
    Rng rng(1);
    conv.init(rng);
    check_layer(conv, {9, 9, 3}, 2, 11);
}

TEST_CASE("depthwise convolution gradients, stride 1 and 2") {
    {
        DwConvLayer<double> dw(3, 3, 6, 1, 0);
        Rng rng(2);
        dw.init(rng);
        check_layer(dw, {7, 7, 6}, 2, 12);
    }
    {
        DwConvLayer<double> dw(3, 3, 6, 2, 1);
        Rng rng(3);
        dw.init(rng);
        check_layer(dw, {7, 7, 6}, 2, 13);
    }
}

TEST_CASE("pointwise convolution gradients") {
    PwConvLayer<double> pw(6, 10);
    Rng rng(4);
    pw.init(rng);
    check_layer(pw, {5, 5, 6}, 2, 14);
}

TEST_CASE("batch normalization gradients") {
    BatchNormLayer<double> bn(6);
    // Non-trivial gamma/beta so their gradients interact.
    Rng rng(5);
    for (auto* p : bn.params())
        for (Eigen::Index i = 0; i < p->size(); ++i) p->data()[i] = rng.uniform(0.5, 1.5);
    check_layer(bn, {4, 4, 6}, 3, 15);
}

TEST_CASE("ReLU gradients") {
    ReluLayer<double> relu;
    check_layer(relu, {5, 5, 4}, 2, 16);
}

TEST_CASE("average pool gradients and exact mean") {
    AvgPoolLayer<double> pool(2, 2, 1);
    check_layer(pool, {2, 2, 5}, 3, 17);

    // Output = arithmetic mean of the window, exactly.
    Batch<double> x(1, {2, 2, 2});
    x.data << 1.0, 10.0, 2.0, 20.0, 3.0, 30.0, 4.0, 40.0;
    Rng rng(0);
    const auto y = pool.forward(x, Mode::Infer, rng, nullptr);
    CHECK(y.data(0, 0) == 2.5);
    CHECK(y.data(0, 1) == 25.0);
}

TEST_CASE("fully connected gradients") {
    FcLayer<double> fc(12, 7);
    Rng rng(6);
    fc.init(rng);
    check_layer(fc, {1, 1, 12}, 2, 18);
    // Also from a spatial input (flatten path).
    FcLayer<double> fc2(2 * 2 * 3, 5);
    fc2.init(rng);
    check_layer(fc2, {2, 2, 3}, 2, 19);
}

TEST_CASE("dropout gradients with a fixed mask") {
    DropoutLayer<double> drop(0.4);
    check_layer(drop, {1, 1, 40}, 3, 20);
}

TEST_CASE("full network gradients against central differences") {
    // Through eleven ReLU stages a 1e-3 parameter bump flips gates, which
    // corrupts the difference quotient (the analytic value is the limit the
    // quotient converges to). A 1e-6 step stays on one linear piece. At that
    // step size the quotient's noise floor is ~1e-9, so gradients that many
    // orders below the layer's dominant scale are compared against the floor.
    constexpr double kDeepEps = 1e-6;
    const auto deep_rel_err = [](double a, double b) {
        return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-5});
    };

    auto model = make_hr_model<double>(123);
    Rng rng(21);
    const Batch<double> x = random_batch(2, {25, 25, 3}, rng, -0.8, 0.8);
    Mat<double> target(2, 1);
    target << 0.3, 0.7;

    const auto objective = [&]() {
        Rng fwd(99);
        std::vector<Cache<double>> caches;
        const auto y = model.forward_batch(x, Mode::Train, fwd, &caches);
        return euclidean_loss<double>(y.data, target);
    };

    Rng fwd(99);
    std::vector<Cache<double>> caches;
    const auto y = model.forward_batch(x, Mode::Train, fwd, &caches);
    Batch<double> dy;
    dy.n = y.n;
    dy.shape = y.shape;
    dy.data = (y.data - target) / 2.0;
    const auto grads = model.backward_batch(dy, caches);

    Rng pick(31337);
    int checked = 0;
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        auto params = model.layers[li]->params();
        for (std::size_t pi = 0; pi < params.size(); ++pi) {
            Mat<double>& w = *params[pi];
            for (int k = 0; k < 4; ++k) {
                const auto flat = static_cast<Eigen::Index>(pick.below(w.size()));
                double* entry = w.data() + flat;
                const double orig = *entry;
                *entry = orig + kDeepEps;
                const double lp = objective();
                *entry = orig - kDeepEps;
                const double lm = objective();
                *entry = orig;
                const double numeric = (lp - lm) / (2.0 * kDeepEps);
                const double analytic = grads[li][pi].data()[flat];
                INFO("layer ", li, " blob ", pi, " flat ", flat, " analytic ", analytic,
                     " numeric ", numeric);
                CHECK(deep_rel_err(analytic, numeric) < kTol);
                ++checked;
            }
        }
    }
    CHECK(checked >= 4 * 37);  // every parameter blob visited
}

TEST_CASE("zero upstream gradient zeroes every parameter gradient") {
    auto model = make_hr_model<double>(5);
    Rng rng(8);
    const Batch<double> x = random_batch(2, {25, 25, 3}, rng);
    Rng fwd(7);
    std::vector<Cache<double>> caches;
    const auto y = model.forward_batch(x, Mode::Train, fwd, &caches);
    Batch<double> dy;
    dy.n = y.n;
    dy.shape = y.shape;
    dy.data = Mat<double>::Zero(y.data.rows(), y.data.cols());
    const auto grads = model.backward_batch(dy, caches);
    for (const auto& layer_grads : grads)
        for (const auto& g : layer_grads) CHECK(g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("duplicating a sample doubles its gradient contribution") {
    // With sum-scaled upstream gradients (no 1/N), a batch {s, s} produces
    // exactly twice the parameter gradient of {s}. Dropout is disabled so the
    // duplicate sees the same mask.
    auto model = make_hr_model<double>(9, /*dropout_keep=*/1.0);
    Rng rng(10);
    const Batch<double> one = random_batch(1, {25, 25, 3}, rng);
    Batch<double> two(2, {25, 25, 3});
    two.data.topRows(one.data.rows()) = one.data;
    two.data.bottomRows(one.data.rows()) = one.data;

    const double target = 0.4;
    auto grads_for = [&](const Batch<double>& x) {
        Rng fwd(55);
        std::vector<Cache<double>> caches;
        const auto y = model.forward_batch(x, Mode::Train, fwd, &caches);
        Batch<double> dy;
        dy.n = y.n;
        dy.shape = y.shape;
        dy.data = y.data.array() - target;  // sum scaling
        return model.backward_batch(dy, caches);
    };

    const auto g1 = grads_for(one);
    const auto g2 = grads_for(two);
    for (std::size_t li = 0; li < g1.size(); ++li)
        for (std::size_t pi = 0; pi < g1[li].size(); ++pi) {
            const double scale = (g2[li][pi] - 2.0 * g1[li][pi]).cwiseAbs().maxCoeff();
            const double ref = 1.0 + g1[li][pi].cwiseAbs().maxCoeff();
            CHECK(scale / ref < 1e-9);
        }
}
