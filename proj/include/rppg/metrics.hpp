#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "rppg/errors.hpp"

namespace rppg::metrics {

struct HrPair {
    double predicted = 0.0;     // H_p, bpm
    double ground_truth = 0.0;  // H_gt, bpm
};

struct HrPairSeries {
    std::vector<HrPair> pairs;
    std::string group;  // e.g. video id or "window=4s"
};

// The five error metrics over a pair series. Pearson's rho is undefined
// (nullopt) for fewer than two pairs or when either side has zero variance.
struct EvalReport {
    double me = 0.0;       // mean error
    double sde = 0.0;      // population standard deviation of the error
    double rmse = 0.0;
    double me_rate = 0.0;  // mean |error| / ground truth
    std::optional<double> rho;
    std::size_t n = 0;
};

inline EvalReport evaluate(const HrPairSeries& series) {
    const std::size_t n = series.pairs.size();
    if (n == 0) throw data_error("metrics: empty pair series");

    double sum_e = 0.0, sum_rate = 0.0;
    for (const auto& p : series.pairs) {
        if (!(p.ground_truth > 0.0)) throw data_error("metrics: ground truth must be positive");
        const double e = p.predicted - p.ground_truth;
        sum_e += e;
        sum_rate += std::abs(e) / p.ground_truth;
    }

    EvalReport r;
    r.n = n;
    r.me = sum_e / static_cast<double>(n);
    r.me_rate = sum_rate / static_cast<double>(n);

    double sum_dev2 = 0.0, sum_e2 = 0.0;
    for (const auto& p : series.pairs) {
        const double e = p.predicted - p.ground_truth;
        sum_dev2 += (e - r.me) * (e - r.me);
        sum_e2 += e * e;
    }
    r.sde = std::sqrt(sum_dev2 / static_cast<double>(n));  // population SD (1/N)
    r.rmse = std::sqrt(sum_e2 / static_cast<double>(n));

    if (n >= 2) {
        double mean_p = 0.0, mean_g = 0.0;
        for (const auto& p : series.pairs) {
            mean_p += p.predicted;
            mean_g += p.ground_truth;
        }
        mean_p /= static_cast<double>(n);
        mean_g /= static_cast<double>(n);
        double cov = 0.0, var_p = 0.0, var_g = 0.0;
        for (const auto& p : series.pairs) {
            cov += (p.ground_truth - mean_g) * (p.predicted - mean_p);
            var_p += (p.predicted - mean_p) * (p.predicted - mean_p);
            var_g += (p.ground_truth - mean_g) * (p.ground_truth - mean_g);
        }
        if (var_p > 0.0 && var_g > 0.0) r.rho = cov / (std::sqrt(var_g) * std::sqrt(var_p));
    }
    return r;
}

// Average-HR protocol: one value per video, the mean of its per-second
// predictions.
inline double average_hr_protocol(const std::vector<double>& per_second) {
    if (per_second.empty()) throw data_error("metrics: no per-second predictions");
    double sum = 0.0;
    for (double v : per_second) sum += v;
    return sum / static_cast<double>(per_second.size());
}

// Short-time protocol: split a per-second series into non-overlapping
// windows of `window_s` seconds (trailing partial window dropped) and pair
// the window means.
inline HrPairSeries short_time_protocol(const std::vector<double>& predictions,
                                        const std::vector<double>& ground_truth,
                                        int window_s) {
    if (window_s <= 0) throw data_error("metrics: window size must be positive");
    if (predictions.size() != ground_truth.size())
        throw data_error("metrics: prediction/ground-truth length mismatch");
    if (predictions.size() < static_cast<std::size_t>(window_s))
        throw data_error("metrics: series shorter than one window");

    HrPairSeries out;
    out.group = "window=" + std::to_string(window_s) + "s";
    const std::size_t n_windows = predictions.size() / static_cast<std::size_t>(window_s);
    for (std::size_t w = 0; w < n_windows; ++w) {
        double sp = 0.0, sg = 0.0;
        for (int j = 0; j < window_s; ++j) {
            sp += predictions[w * window_s + j];
            sg += ground_truth[w * window_s + j];
        }
        out.pairs.push_back({sp / window_s, sg / window_s});
    }
    return out;
}

}  // namespace rppg::metrics
