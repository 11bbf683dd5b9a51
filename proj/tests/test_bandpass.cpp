#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>

#include "oracles.hpp"
#include "rppg/bandpass.hpp"
#include "rppg/rng.hpp"

using namespace rppg;

namespace {

Mat<double> cosine_row(double freq_hz, double fs, int n, double amp = 1.0, double phase = 0.0) {
    Mat<double> row(1, n);
    for (int t = 0; t < n; ++t)
        row(0, t) = amp * std::cos(2.0 * std::numbers::pi * freq_hz * t / fs + phase);
    return row;
}

}  // namespace

TEST_CASE("in-band cosine passes unchanged") {
    TemporalBandpass<double> bp(25, 25.0, 0.75, 4.0);
    const Mat<double> row = cosine_row(2.0, 25.0, 25);
    double residue = 0.0;
    const Mat<double> out = bp.apply(row, &residue);
    CHECK((out - row).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(residue < 1e-9);
}

TEST_CASE("DC row is zeroed") {
    TemporalBandpass<double> bp(25, 25.0, 0.75, 4.0);
    const Mat<double> row = Mat<double>::Constant(1, 25, 123.25);
    const Mat<double> out = bp.apply(row);
    CHECK(out.cwiseAbs().maxCoeff() < 1e-9 * 123.25);
}

TEST_CASE("mixed row keeps exactly the in-band component") {
    TemporalBandpass<double> bp(25, 25.0, 0.75, 4.0);
    const Mat<double> keep = cosine_row(2.0, 25.0, 25, 3.0, 0.7);
    const Mat<double> row =
        keep + Mat<double>::Constant(1, 25, 80.0) + cosine_row(6.0, 25.0, 25, 5.0, 0.1);
    const Mat<double> out = bp.apply(row);
    CHECK((out - keep).cwiseAbs().maxCoeff() < 1e-9 * 80.0);
}

TEST_CASE("matches the reference DFT oracle on random rows") {
    TemporalBandpass<double> bp(25, 25.0, 0.75, 4.0);
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x(25);
        Mat<double> row(1, 25);
        for (int t = 0; t < 25; ++t) {
            x[t] = rng.uniform(-100.0, 100.0);
            row(0, t) = x[t];
        }
        const auto want = oracle::reference_bandpass(x, 25.0, 0.75, 4.0);
        const Mat<double> got = bp.apply(row);
        for (int t = 0; t < 25; ++t) CHECK(got(0, t) == doctest::Approx(want[t]).epsilon(1e-10));
    }
}

TEST_CASE("frequency selectivity sweep over integer-Hz bins") {
    TemporalBandpass<double> bp(25, 25.0, 0.75, 4.0);
    for (int f = 0; f <= 12; ++f) {
        const Mat<double> row = cosine_row(static_cast<double>(f), 25.0, 25, 2.5, 0.3);
        const Mat<double> out = bp.apply(row);
        const double in_energy = row.squaredNorm();
        if (f >= 1 && f <= 4) {
            CHECK((out - row).cwiseAbs().maxCoeff() / row.cwiseAbs().maxCoeff() < 1e-9);
        } else {
            CHECK(out.squaredNorm() < 1e-9 * in_energy);
        }
    }
}

TEST_CASE("Parseval identity: output energy equals retained bin energy") {
    TemporalBandpass<double> bp(25, 25.0, 0.75, 4.0);
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x(25);
        Mat<double> row(1, 25);
        for (int t = 0; t < 25; ++t) {
            x[t] = rng.uniform(-50.0, 50.0);
            row(0, t) = x[t];
        }
        const auto spec = oracle::reference_dft(x);
        double kept = 0.0;
        for (int k = 0; k < 25; ++k)
            if (bp.keep_bin(k)) kept += std::norm(spec[static_cast<std::size_t>(k)]);
        kept /= 25.0;
        const double out_energy = bp.apply(row).squaredNorm();
        CHECK(out_energy == doctest::Approx(kept).epsilon(1e-9));
    }
}

TEST_CASE("idempotence: filtering twice equals filtering once") {
    TemporalBandpass<double> bp(25, 25.0, 0.75, 4.0);
    Rng rng(17);
    Mat<double> rows(8, 25);
    for (Eigen::Index r = 0; r < 8; ++r)
        for (int t = 0; t < 25; ++t) rows(r, t) = rng.uniform(-10.0, 10.0);
    const Mat<double> once = bp.apply(rows);
    const Mat<double> twice = bp.apply(once);
    CHECK((twice - once).cwiseAbs().maxCoeff() < 1e-9 * 10.0);
}

TEST_CASE("kept bins at the defaults are exactly +-1..4 Hz") {
    TemporalBandpass<double> bp(25, 25.0, 0.75, 4.0);
    for (int k = 0; k < 25; ++k) {
        const bool want = (k >= 1 && k <= 4) || (k >= 21 && k <= 24);
        CHECK(bp.keep_bin(k) == want);
    }
}

TEST_CASE("non-finite input is rejected") {
    TemporalBandpass<double> bp(25, 25.0, 0.75, 4.0);
    Mat<double> row = Mat<double>::Zero(1, 25);
    row(0, 3) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(bp.apply(row), numeric_error);
}

TEST_CASE("band limits are validated") {
    CHECK_THROWS_AS(TemporalBandpass<double>(25, 25.0, 0.0, 4.0), numeric_error);
    CHECK_THROWS_AS(TemporalBandpass<double>(25, 25.0, 4.0, 0.75), numeric_error);
    CHECK_THROWS_AS(TemporalBandpass<double>(25, 25.0, 0.75, 13.0), numeric_error);
}

TEST_CASE("row resampling: identity at matching rate, linear interpolation otherwise") {
    Mat<double> rows(1, 30);
    for (int t = 0; t < 30; ++t) rows(0, t) = 2.0 * t;  // linear in t
    const Mat<double> same = resample_rows(rows, 30);
    CHECK((same - rows).cwiseAbs().maxCoeff() == 0.0);

    const Mat<double> down = resample_rows(rows, 25);
    CHECK(down.cols() == 25);
    // A linear signal stays linear under linear interpolation: sample i of
    // the output sits at t = i*30/25 in source index units.
    for (int i = 0; i < 25; ++i) {
        const double src_pos = std::min(static_cast<double>(i) * 30.0 / 25.0, 29.0);
        CHECK(down(0, i) == doctest::Approx(2.0 * src_pos).epsilon(1e-12));
    }
}
