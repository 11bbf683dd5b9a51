#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>

#include "rppg/errors.hpp"
#include "rppg/image.hpp"

namespace rppg {

// 68 facial landmarks, 1-based indexing in the accessors.
struct LandmarkSet {
    Eigen::Matrix<double, 68, 2> points;  // row i-1 = (x, y) of landmark i

    double x(int idx1) const { return points(idx1 - 1, 0); }
    double y(int idx1) const { return points(idx1 - 1, 1); }

    bool valid() const {
        return points.allFinite() && (points.array() >= 0.0).all();
    }
};

// The eight landmark indices that define the cheek rectangle. Published
// 68-point schemes differ in numbering, so these are configurable.
struct RoiIndices {
    int left = 13;                                // X_LT and width reference
    int right = 16;                               // width reference
    std::array<int, 4> eye_bottom = {40, 41, 46, 47};  // Y_LT = max of their y
    std::array<int, 2> lip_top = {50, 52};             // bottom edge = min of their y
};

struct RoiRect {
    int x_lt = 0;
    int y_lt = 0;
    int width = 0;
    int height = 0;

    bool operator==(const RoiRect&) const = default;
};

// One second of crops sharing a frozen rectangle.
template <typename Scalar>
struct RoiWindow {
    std::vector<Image<Scalar>> crops;
    RoiRect rect;
    int second = 0;  // source second index within the clip
};

namespace detail {
inline int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }
}  // namespace detail

// Cheek rectangle from one landmark set:
//   X_LT = x(left);  Y_LT = max eye-bottom y;
//   W = x(right) - x(left);  H = min lip-top y - Y_LT.
// Coordinates are rounded half-up before the arithmetic. A non-positive
// width or height (degenerate pose) yields nullopt.
inline std::optional<RoiRect> roi_from_landmarks(const LandmarkSet& lm,
                                                 const RoiIndices& idx = {}) {
    using detail::round_half_up;
    RoiRect r;
    r.x_lt = round_half_up(lm.x(idx.left));
    int y_lt = round_half_up(lm.y(idx.eye_bottom[0]));
    for (int i : idx.eye_bottom) y_lt = std::max(y_lt, round_half_up(lm.y(i)));
    r.y_lt = y_lt;
    r.width = round_half_up(lm.x(idx.right)) - r.x_lt;
    int bottom = round_half_up(lm.y(idx.lip_top[0]));
    for (int i : idx.lip_top) bottom = std::min(bottom, round_half_up(lm.y(i)));
    r.height = bottom - r.y_lt;
    if (r.width <= 0 || r.height <= 0) return std::nullopt;
    return r;
}

// Fix the rectangle from the first frame's landmarks and crop it from every
// frame of the window. Returns nullopt (with a reason) when the pose is
// degenerate or the rectangle leaves any frame; clipping that would change
// the crop size counts as leaving the frame.
template <typename Scalar>
std::optional<RoiWindow<Scalar>> freeze_window(std::span<const Image<Scalar>> frames,
                                               std::span<const LandmarkSet> landmarks,
                                               int second,
                                               const RoiIndices& idx = {},
                                               std::string* reject_reason = nullptr) {
    auto reject = [&](const std::string& why) -> std::optional<RoiWindow<Scalar>> {
        if (reject_reason) *reject_reason = why;
        return std::nullopt;
    };
    if (frames.empty()) return reject("empty window");
    if (frames.size() != landmarks.size()) return reject("frame/landmark count mismatch");

    const auto rect = roi_from_landmarks(landmarks[0], idx);
    if (!rect) return reject("degenerate ROI rectangle from first-frame landmarks");

    RoiWindow<Scalar> win;
    win.rect = *rect;
    win.second = second;
    win.crops.reserve(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto& f = frames[i];
        if (rect->x_lt < 0 || rect->y_lt < 0 || rect->x_lt + rect->width > f.width() ||
            rect->y_lt + rect->height > f.height())
            return reject("ROI rectangle out of bounds on frame " + std::to_string(i));
        win.crops.push_back(crop(f, rect->x_lt, rect->y_lt, rect->width, rect->height));
    }
    return win;
}

}  // namespace rppg
