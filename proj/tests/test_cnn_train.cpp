#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>

#include "oracles.hpp"
#include "rppg/cnn/model.hpp"
#include "rppg/cnn/train.hpp"
#include "rppg/rng.hpp"

using namespace rppg;
using namespace rppg::cnn;

namespace {

// Feature-image-like samples: every row of the green channel carries a
// sinusoid whose frequency encodes the label; red/blue carry noise.
Dataset<float> synthetic_regression_set(std::size_t n, Rng& rng) {
    Dataset<float> ds;
    ds.shape = {25, 25, 3};
    for (std::size_t k = 0; k < n; ++k) {
        const double label = rng.uniform(60.0, 120.0);
        const double freq = label / 60.0;
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        Mat<float> img(625, 3);
        for (int r = 0; r < 25; ++r)
            for (int t = 0; t < 25; ++t) {
                const double v = std::sin(2.0 * std::numbers::pi * freq * t / 25.0 + phase);
                img(r * 25 + t, 0) = static_cast<float>(0.1 * rng.normal());
                img(r * 25 + t, 1) = static_cast<float>(3.0 * v + 0.05 * rng.normal());
                img(r * 25 + t, 2) = static_cast<float>(0.1 * rng.normal());
            }
        ds.images.push_back(std::move(img));
        ds.labels_bpm.push_back(label);
    }
    return ds;
}

}  // namespace

TEST_CASE("euclidean loss examples") {
    Mat<float> pred(3, 1), target(3, 1);
    pred << 0.2f, 0.5f, 0.9f;
    target = pred;
    CHECK(euclidean_loss<float>(pred, target) == doctest::Approx(0.0));

    Mat<float> p1(1, 1), q1(1, 1);
    p1 << 0.0f;
    q1 << 1.0f;
    CHECK(euclidean_loss<float>(p1, q1) == doctest::Approx(0.5));
}

TEST_CASE("euclidean loss matches independent accumulation on a random batch") {
    Rng rng(88);
    Mat<double> pred(20, 1), target(20, 1);
    double acc = 0.0;
    for (int i = 0; i < 20; ++i) {
        pred(i, 0) = rng.uniform(0.0, 1.0);
        target(i, 0) = rng.uniform(0.0, 1.0);
        acc += (target(i, 0) - pred(i, 0)) * (target(i, 0) - pred(i, 0));
    }
    acc /= 2.0 * 20.0;
    CHECK(euclidean_loss<double>(pred, target) == doctest::Approx(acc).epsilon(1e-12));
}

TEST_CASE("empty batches and datasets are rejected") {
    Mat<float> empty(0, 1);
    CHECK_THROWS_AS(euclidean_loss<float>(empty, empty), numeric_error);

    auto model = make_hr_model<float>(1);
    Dataset<float> ds;
    TrainConfig cfg;
    cfg.max_iterations = 1;
    CHECK_THROWS_AS(train(model, ds, cfg), numeric_error);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
    auto model = make_hr_model<float>(3);
    const auto before = model.snapshot_blobs();

    Rng rng(4);
    Dataset<float> ds = synthetic_regression_set(24, rng);
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.max_iterations = 5;
    cfg.base_lr = 0.0;
    cfg.val_fraction = 0.0;
    cfg.seed = 9;
    train(model, ds, cfg);

    const auto after = model.snapshot_blobs();
    for (std::size_t li = 0; li < before.size(); ++li) {
        // Running BN statistics do update; trainable parameters must not.
        auto params = model.layers[li]->params();
        for (std::size_t pi = 0; pi < params.size(); ++pi)
            CHECK((before[li][pi] - after[li][pi]).cwiseAbs().maxCoeff() == 0.0f);
    }
}

TEST_CASE("identical seeds give identical loss curves") {
    Rng rng(5);
    Dataset<float> ds = synthetic_regression_set(40, rng);
    TrainConfig cfg;
    cfg.batch_size = 10;
    cfg.max_iterations = 12;
    cfg.val_fraction = 0.2;
    cfg.val_interval = 4;
    cfg.seed = 31;

    auto m1 = make_hr_model<float>(7);
    auto m2 = make_hr_model<float>(7);
    const auto r1 = train(m1, ds, cfg);
    const auto r2 = train(m2, ds, cfg);
    REQUIRE(r1.log.size() == r2.log.size());
    for (std::size_t i = 0; i < r1.log.size(); ++i) {
        CHECK(r1.log[i].train_loss == r2.log[i].train_loss);
        CHECK(r1.log[i].val_loss.has_value() == r2.log[i].val_loss.has_value());
        if (r1.log[i].val_loss) CHECK(*r1.log[i].val_loss == *r2.log[i].val_loss);
    }
    const auto b1 = m1.snapshot_blobs(), b2 = m2.snapshot_blobs();
    for (std::size_t li = 0; li < b1.size(); ++li)
        for (std::size_t pi = 0; pi < b1[li].size(); ++pi)
            CHECK((b1[li][pi] - b2[li][pi]).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("training reduces the loss on an easy synthetic set") {
    Rng rng(6);
    Dataset<float> ds = synthetic_regression_set(160, rng);
    TrainConfig cfg;
    cfg.batch_size = 20;
    cfg.max_iterations = 250;
    cfg.val_fraction = 0.0;
    cfg.seed = 17;

    auto model = make_hr_model<float>(11);
    const auto result = train(model, ds, cfg);
    const double initial = result.log.front().train_loss;
    const double final_loss = result.log.back().train_loss;
    INFO("initial ", initial, " final ", final_loss);
    CHECK(final_loss < initial / 2.0);
    CHECK(std::isfinite(final_loss));
}

TEST_CASE("input normalization statistics come from the given samples") {
    Dataset<float> ds;
    ds.shape = {1, 2, 3};
    Mat<float> a(2, 3), b(2, 3);
    a << 1, 10, 100, 3, 30, 300;
    b << 5, 50, 500, 7, 70, 700;
    ds.images = {a, b};
    ds.labels_bpm = {60, 70};

    auto model = make_hr_model<float>(1);
    fit_input_normalization(model, ds, {0, 1});
    CHECK(model.input_mean(0) == doctest::Approx(4.0));
    CHECK(model.input_mean(1) == doctest::Approx(40.0));
    CHECK(model.input_mean(2) == doctest::Approx(400.0));
    const double var0 = ((1 - 4.) * (1 - 4.) + (3 - 4.) * (3 - 4.) + (5 - 4.) * (5 - 4.) + (7 - 4.) * (7 - 4.)) / 4.0;
    CHECK(model.input_std(0) == doctest::Approx(std::sqrt(var0)));
}

TEST_CASE("batch normalization contract in train and infer modes") {
    BatchNormLayer<float> bn(8);
    Rng rng(12);
    Batch<float> x(4, {6, 6, 8});
    for (Eigen::Index r = 0; r < x.data.rows(); ++r)
        for (Eigen::Index c = 0; c < x.data.cols(); ++c)
            x.data(r, c) = static_cast<float>(rng.normal(2.0 + c, 1.5));

    // Train mode: per-channel batch statistics; gamma=1, beta=0 exposes xhat.
    Cache<float> cache;
    Rng r0(0);
    const auto y = bn.forward(x, Mode::Train, r0, &cache);
    for (int c = 0; c < 8; ++c) {
        const double mean = y.data.col(c).cast<double>().mean();
        const double var =
            (y.data.col(c).cast<double>().array() - mean).square().sum() / y.data.rows();
        CHECK(std::abs(mean) < 1e-6);
        CHECK(std::abs(var - 1.0) < 1e-4);
    }

    // Infer mode depends only on running statistics.
    bn.post_batch_update(cache);
    Batch<float> probe(1, {6, 6, 8});
    for (Eigen::Index r = 0; r < probe.data.rows(); ++r)
        for (Eigen::Index c = 0; c < probe.data.cols(); ++c)
            probe.data(r, c) = static_cast<float>(rng.normal(0.0, 1.0));
    const auto y1 = bn.forward(probe, Mode::Infer, r0, nullptr);
    const auto y2 = bn.forward(probe, Mode::Infer, r0, nullptr);
    CHECK((y1.data - y2.data).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("inverted dropout: train-mode expectation matches infer mode") {
    DropoutLayer<double> drop(0.4);
    Batch<double> x(1, {1, 1, 64});
    Rng rng(13);
    for (int c = 0; c < 64; ++c) x.data(0, c) = rng.uniform(0.5, 2.0);

    Rng r0(0);
    const auto infer = drop.forward(x, Mode::Infer, r0, nullptr);
    CHECK((infer.data - x.data).cwiseAbs().maxCoeff() == 0.0);

    const int draws = 10000;
    Mat<double> sum = Mat<double>::Zero(1, 64);
    Rng mask_rng(14);
    for (int d = 0; d < draws; ++d) {
        const auto y = drop.forward(x, Mode::Train, mask_rng, nullptr);
        sum += y.data;
    }
    sum /= static_cast<double>(draws);
    // Var of the inverted mask is (1-keep)/keep per unit.
    const double keep = 0.4;
    for (int c = 0; c < 64; ++c) {
        const double se = x.data(0, c) * std::sqrt((1.0 - keep) / (keep * draws));
        CHECK(std::abs(sum(0, c) - x.data(0, c)) < 3.0 * se + 1e-12);
    }
}

TEST_CASE("non-finite loss aborts with diagnostics") {
    auto model = make_hr_model<float>(200);
    // Poison the final bias so every prediction is NaN.
    model.layers.back()->params()[1]->setConstant(std::numeric_limits<float>::quiet_NaN());
    Rng rng(15);
    Dataset<float> ds = synthetic_regression_set(20, rng);
    TrainConfig cfg;
    cfg.batch_size = 10;
    cfg.max_iterations = 3;
    cfg.val_fraction = 0.0;
    CHECK_THROWS_AS(train(model, ds, cfg), numeric_error);
}
