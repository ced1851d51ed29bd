#pragma once

#include <stdexcept>
#include <vector>

namespace omnitrack {

/// Axis-aligned rectangle in conventional left/top form. Never wraps.
struct Fragment {
    double left = 0.0;
    double top = 0.0;
    double width = 0.0;
    double height = 0.0;

    double area() const { return width * height; }
};

/// Wraps an x coordinate onto [0, W). Throws std::invalid_argument if W <= 0.
double wrap_x(double x, double image_width);

/// Signed minimal horizontal displacement from x1 to x2 on a cylinder of
/// circumference W. Result lies in [-W/2, W/2); the half-turn maps to -W/2.
double angular_delta(double x1, double x2, double image_width);

/// Axis-aligned box on a cylindrical image, stored center-based. The
/// x-extent may cross the seam at x = 0 / x = W; y is planar.
class PanoBox {
public:
    PanoBox(double cx, double cy, double w, double h, double image_width)
        : cx_(0.0), cy_(cy), w_(w), h_(h), image_width_(image_width) {
        if (image_width <= 0.0)
            throw std::invalid_argument("PanoBox: image width must be positive");
        if (w <= 0.0 || h <= 0.0)
            throw std::invalid_argument("PanoBox: box extent must be positive");
        if (w > image_width)
            throw std::invalid_argument("PanoBox: box wider than the cylinder");
        cx_ = wrap_x(cx, image_width);
    }

    /// Builds from MOT-style (left, top, width, height).
    static PanoBox from_ltwh(double left, double top, double w, double h,
                             double image_width) {
        return PanoBox(left + w / 2.0, top + h / 2.0, w, h, image_width);
    }

    double cx() const { return cx_; }
    double cy() const { return cy_; }
    double w() const { return w_; }
    double h() const { return h_; }
    double image_width() const { return image_width_; }

    double top() const { return cy_ - h_ / 2.0; }
    double bottom() const { return cy_ + h_ / 2.0; }
    /// Left edge wrapped onto [0, W).
    double left_wrapped() const { return wrap_x(cx_ - w_ / 2.0, image_width_); }

    bool crosses_seam() const {
        return cx_ - w_ / 2.0 < 0.0 || cx_ + w_ / 2.0 > image_width_;
    }

    /// Returns the box shifted horizontally by s (mod W).
    PanoBox shifted(double s) const {
        return PanoBox(cx_ + s, cy_, w_, h_, image_width_);
    }

private:
    double cx_, cy_, w_, h_, image_width_;
};

/// Splits a box into 1 or 2 non-wrapping fragments that partition its pixels.
std::vector<Fragment> to_fragments(const PanoBox& b);

/// IoU of two non-wrapping rectangles.
double rect_iou(const Fragment& a, const Fragment& b);

/// Intersection-over-union on the cylinder. Both boxes must share W.
double pano_iou(const PanoBox& a, const PanoBox& b);

}  // namespace omnitrack
