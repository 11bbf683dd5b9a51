#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>

#include "rppg/errors.hpp"
#include "rppg/image.hpp"

namespace rppg {

// Ideal temporal bandpass over the rows of a matrix: per row, take the
// length-N discrete Fourier transform, zero every bin whose center frequency
// lies outside the closed interval [f_low, f_high], and transform back.
// Conjugate-symmetric partner bins share one mask value, so the inverse
// transform of real input is real up to rounding; the imaginary residue is
// checked against a budget before being discarded.
template <typename Scalar>
class TemporalBandpass {
public:
    using Complex = std::complex<Scalar>;
    using CMat = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;

    TemporalBandpass(Eigen::Index n, double sample_rate_hz, double f_low, double f_high)
        : n_(n), fs_(sample_rate_hz), fl_(f_low), fh_(f_high) {
        if (n <= 0) throw numeric_error("bandpass: need at least one sample");
        if (!(0.0 < fl_ && fl_ < fh_ && fh_ <= fs_ / 2.0))
            throw numeric_error("bandpass: band must satisfy 0 < f_low < f_high <= rate/2");

        forward_.resize(n, n);
        inverse_.resize(n, n);
        const double w = 2.0 * std::numbers::pi / static_cast<double>(n);
        for (Eigen::Index k = 0; k < n; ++k) {
            for (Eigen::Index t = 0; t < n; ++t) {
                const double a = w * static_cast<double>(k) * static_cast<double>(t);
                forward_(k, t) = Complex(static_cast<Scalar>(std::cos(a)), static_cast<Scalar>(-std::sin(a)));
                inverse_(t, k) = Complex(static_cast<Scalar>(std::cos(a) / n), static_cast<Scalar>(std::sin(a) / n));
            }
        }

        mask_.resize(n);
        for (Eigen::Index k = 0; k < n; ++k) mask_(k) = keep_bin(k) ? Scalar(1) : Scalar(0);
    }

    Eigen::Index size() const { return n_; }

    // Signed-bin center frequency in Hz: k <= N/2 maps to k*fs/N, the upper
    // half to (k-N)*fs/N.
    double bin_frequency(Eigen::Index k) const {
        const double kk = (2 * k <= n_) ? static_cast<double>(k) : static_cast<double>(k - n_);
        return kk * fs_ / static_cast<double>(n_);
    }

    bool keep_bin(Eigen::Index k) const {
        const double f = std::abs(bin_frequency(k));
        return fl_ <= f && f <= fh_;
    }

    const Eigen::Vector<Scalar, Eigen::Dynamic>& mask() const { return mask_; }

    // Filter every row of `rows` (shape R x N). Returns the real part and
    // reports the largest imaginary residue seen via `imag_residue` when
    // non-null.
    Mat<Scalar> apply(const Mat<Scalar>& rows, Scalar* imag_residue = nullptr) const {
        if (rows.cols() != n_) throw numeric_error("bandpass: row length does not match transform size");
        if (!rows.allFinite()) throw numeric_error("bandpass: non-finite input");

        CMat spectrum = rows.template cast<Complex>() * forward_.transpose();
        spectrum = spectrum * mask_.template cast<Complex>().asDiagonal();
        CMat filtered = spectrum * inverse_.transpose();

        if (imag_residue) *imag_residue = filtered.imag().cwiseAbs().maxCoeff();
        return filtered.real();
    }

private:
    Eigen::Index n_;
    double fs_, fl_, fh_;
    CMat forward_, inverse_;
    Eigen::Vector<Scalar, Eigen::Dynamic> mask_;
};

// Linear-interpolation resample of each row from `src.cols()` samples
// covering one second to `n_out` samples covering the same second.
// Sample j of a K-sample row sits at t = j/K; target sample i at t = i/n_out.
template <typename Scalar>
Mat<Scalar> resample_rows(const Mat<Scalar>& src, Eigen::Index n_out) {
    const Eigen::Index k = src.cols();
    if (k == n_out) return src;
    if (k < 2) throw numeric_error("bandpass: cannot resample a row of fewer than 2 samples");

    Mat<Scalar> out(src.rows(), n_out);
    for (Eigen::Index i = 0; i < n_out; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(n_out);
        double pos = t * static_cast<double>(k);
        if (pos >= static_cast<double>(k - 1)) {
            out.col(i) = src.col(k - 1);
            continue;
        }
        const auto j = static_cast<Eigen::Index>(pos);
        const Scalar frac = static_cast<Scalar>(pos - static_cast<double>(j));
        out.col(i) = (Scalar(1) - frac) * src.col(j) + frac * src.col(j + 1);
    }
    return out;
}

}  // namespace rppg
