#include "omnitrack/pano_geom.hpp"

#include <algorithm>
#include <cmath>

namespace omnitrack {

double wrap_x(double x, double image_width) {
    if (image_width <= 0.0)
        throw std::invalid_argument("wrap_x: image width must be positive");
    double r = std::fmod(x, image_width);
    if (r < 0.0) r += image_width;
    // fmod of a negative value can land exactly on W after the correction
    if (r >= image_width) r = 0.0;
    return r;
}

double angular_delta(double x1, double x2, double image_width) {
    if (image_width <= 0.0)
        throw std::invalid_argument("angular_delta: image width must be positive");
    double half = image_width / 2.0;
    return wrap_x(x2 - x1 + half, image_width) - half;
}

std::vector<Fragment> to_fragments(const PanoBox& b) {
    const double W = b.image_width();
    const double left = b.cx() - b.w() / 2.0;
    const double right = b.cx() + b.w() / 2.0;
    const double top = b.top();
    const double h = b.h();

    if (left >= 0.0 && right <= W) {
        return {Fragment{left, top, b.w(), h}};
    }
    if (left < 0.0) {
        // wraps past the seam on the left: [left+W, W) and [0, right)
        return {Fragment{left + W, top, -left, h}, Fragment{0.0, top, right, h}};
    }
    // right > W: [left, W) and [0, right-W)
    return {Fragment{left, top, W - left, h}, Fragment{0.0, top, right - W, h}};
}

double rect_iou(const Fragment& a, const Fragment& b) {
    const double ix = std::min(a.left + a.width, b.left + b.width) -
                      std::max(a.left, b.left);
    const double iy = std::min(a.top + a.height, b.top + b.height) -
                      std::max(a.top, b.top);
    if (ix <= 0.0 || iy <= 0.0) return 0.0;
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

double pano_iou(const PanoBox& a, const PanoBox& b) {
    if (a.image_width() != b.image_width())
        throw std::invalid_argument("pano_iou: mismatched image widths");

    const double iy = std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
    if (iy <= 0.0) return 0.0;

    double ix = 0.0;
    for (const Fragment& fa : to_fragments(a)) {
        for (const Fragment& fb : to_fragments(b)) {
            const double o = std::min(fa.left + fa.width, fb.left + fb.width) -
                             std::max(fa.left, fb.left);
            if (o > 0.0) ix += o;
        }
    }
    if (ix <= 0.0) return 0.0;

    const double inter = ix * iy;
    const double uni = a.w() * a.h() + b.w() * b.h() - inter;
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace omnitrack
