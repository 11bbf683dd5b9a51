#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rppg/cnn/model.hpp"
#include "rppg/rng.hpp"

using namespace rppg;
using namespace rppg::cnn;

namespace {

// The architecture table's activation trace: input plus the shape after
// each row (convolution rows report after their BN+ReLU).
const std::vector<Shape> kExpectedTrace = {
    {25, 25, 3},  {23, 23, 96}, {21, 21, 96}, {21, 21, 96}, {11, 11, 96}, {11, 11, 96},
    {6, 6, 96},   {6, 6, 128},  {3, 3, 128},  {3, 3, 128},  {2, 2, 128},  {2, 2, 128},
    {1, 1, 128},  {1, 1, 192},  {1, 1, 192},  {1, 1, 1},
};

Batch<float> random_input(int n, Rng& rng) {
    Batch<float> b(n, {25, 25, 3});
    for (Eigen::Index r = 0; r < b.data.rows(); ++r)
        for (int c = 0; c < 3; ++c) b.data(r, c) = static_cast<float>(rng.uniform(-2.0, 2.0));
    return b;
}

}  // namespace

TEST_CASE("table trace matches row for row") {
    const auto model = make_hr_model<float>(1);
    const auto trace = model.table_trace();
    REQUIRE(trace.size() == kExpectedTrace.size());
    for (std::size_t i = 0; i < trace.size(); ++i) {
        INFO("row ", i, ": got ", trace[i].str(), " want ", kExpectedTrace[i].str());
        CHECK(trace[i] == kExpectedTrace[i]);
    }
}

TEST_CASE("forward pass reproduces the trace with live activations") {
    const auto model = make_hr_model<float>(2);
    Rng rng(3);
    Batch<float> a = random_input(2, rng);
    a = model.normalize_input(a);
    std::size_t row = 1;
    for (const auto& layer : model.layers) {
        Rng lr(0);
        a = layer->forward(a, Mode::Infer, lr, nullptr);
        if (layer->ends_row) {
            INFO("row ", row);
            CHECK(a.shape == kExpectedTrace[row]);
            CHECK(static_cast<Eigen::Index>(a.shape.rows()) * 2 == a.data.rows());
            ++row;
        }
    }
    CHECK(row == kExpectedTrace.size());
}

TEST_CASE("parameter count is the fixed architecture constant") {
    const auto model = make_hr_model<float>(7);
    CHECK(model.parameter_count() == 102977);
}

TEST_CASE("fresh model with zero FC biases maps zero input to zero") {
    const auto model = make_hr_model<float>(11);
    Batch<float> x(3, {25, 25, 3});  // all zeros
    Rng rng(0);
    const auto y = model.forward_batch(x, Mode::Infer, rng);
    REQUIRE(y.data.rows() == 3);
    for (int i = 0; i < 3; ++i) CHECK(y.data(i, 0) == 0.0f);
}

TEST_CASE("inference is bit-deterministic across repeated runs") {
    const auto model = make_hr_model<float>(13);
    Rng rng(5);
    const Batch<float> x = random_input(4, rng);
    Rng r1(0), r2(0);
    const auto y1 = model.forward_batch(x, Mode::Infer, r1);
    const auto y2 = model.forward_batch(x, Mode::Infer, r2);
    CHECK((y1.data - y2.data).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("wrong input shape is rejected") {
    const auto model = make_hr_model<float>(17);
    Batch<float> x(1, {24, 25, 3});
    Rng rng(0);
    CHECK_THROWS_AS(model.forward_batch(x, Mode::Infer, rng), numeric_error);
}

TEST_CASE("label normalization endpoints and midpoint") {
    CHECK(normalize_label(45.0) == doctest::Approx(0.0));
    CHECK(normalize_label(240.0) == doctest::Approx(1.0));
    CHECK(normalize_label(142.5) == doctest::Approx(0.5));
    CHECK(denormalize_label(normalize_label(97.25)) == doctest::Approx(97.25).epsilon(1e-12));
}

TEST_CASE("predict_hr denormalizes and clamps") {
    // A model whose output is forced via the final FC bias: zero everything
    // else so the prediction equals that bias.
    auto model = make_hr_model<float>(19);
    for (auto& l : model.layers)
        for (auto* p : l->params()) p->setZero();
    auto* fc2 = dynamic_cast<FcLayer<float>*>(model.layers.back().get());
    REQUIRE(fc2 != nullptr);
    fc2->params()[1]->setConstant(0.5f);  // raw output 0.5

    featex::FeatureImage fim;
    for (int c = 0; c < 3; ++c) fim.ch[c] = Mat<double>::Zero(25, 25);
    CHECK(predict_hr(model, fim) == doctest::Approx(142.5));

    fc2->params()[1]->setConstant(1.3f);  // raw 1.3 -> clamped to 240
    CHECK(predict_hr(model, fim) == doctest::Approx(240.0));
    fc2->params()[1]->setConstant(-0.2f);  // raw -0.2 -> clamped to 45
    CHECK(predict_hr(model, fim) == doctest::Approx(45.0));
}
