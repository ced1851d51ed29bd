#include "omnitrack/motion_model.hpp"

#include <algorithm>
#include <cmath>

namespace omnitrack {

namespace {

using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat8 = Eigen::Matrix<double, 8, 8>;
using Vec4 = Eigen::Matrix<double, 4, 1>;
using Mat4 = Eigen::Matrix<double, 4, 4>;
using Mat48 = Eigen::Matrix<double, 4, 8>;

Mat8 transition_matrix() {
    Mat8 F = Mat8::Identity();
    for (int i = 0; i < 4; ++i) F(i, i + 4) = 1.0;
    return F;
}

Mat48 observation_matrix() {
    Mat48 H = Mat48::Zero();
    for (int i = 0; i < 4; ++i) H(i, i) = 1.0;
    return H;
}

Vec4 position_stds(double h, const MotionConfig& cfg) {
    const double p = cfg.std_weight_position * h;
    return Vec4(p, p, p, p);
}

Vec4 velocity_stds(double h, const MotionConfig& cfg) {
    const double v = cfg.std_weight_velocity * h;
    return Vec4(v, v, v, v);
}

void enforce_extent_floor(Vec8& mean) {
    mean(2) = std::max(mean(2), 1.0);
    mean(3) = std::max(mean(3), 1.0);
}

}  // namespace

KalmanState init_state(const PanoBox& box, const MotionConfig& cfg) {
    KalmanState s;
    s.image_width = box.image_width();
    s.mean << box.cx(), box.cy(), box.w(), box.h(), 0, 0, 0, 0;

    const Vec4 ps = cfg.init_position_factor * position_stds(box.h(), cfg);
    const Vec4 vs = cfg.init_velocity_factor * velocity_stds(box.h(), cfg);
    Vec8 diag;
    diag << ps.cwiseProduct(ps), vs.cwiseProduct(vs);
    s.covariance = diag.asDiagonal();
    return s;
}

KalmanState predict(const KalmanState& s, const MotionConfig& cfg) {
    static const Mat8 F = transition_matrix();

    const double h = s.mean(3);
    const Vec4 ps = position_stds(h, cfg);
    const Vec4 vs = velocity_stds(h, cfg);
    Vec8 qdiag;
    qdiag << ps.cwiseProduct(ps), vs.cwiseProduct(vs);

    KalmanState out = s;
    out.mean = F * s.mean;
    out.mean(0) = wrap_x(out.mean(0), s.image_width);
    enforce_extent_floor(out.mean);
    out.covariance = F * s.covariance * F.transpose();
    out.covariance += Mat8(qdiag.asDiagonal());
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose().eval());
    return out;
}

KalmanState update(const KalmanState& s, const PanoBox& obs, const MotionConfig& cfg) {
    if (obs.image_width() != s.image_width)
        throw std::invalid_argument("update: observation image width mismatch");

    static const Mat48 H = observation_matrix();

    const Vec4 rs = position_stds(s.mean(3), cfg);
    const Mat4 R = Mat4(rs.cwiseProduct(rs).asDiagonal());

    const Mat4 S = H * s.covariance * H.transpose() + R;
    Eigen::LDLT<Mat4> ldlt(S);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw NumericalError("update: innovation covariance not positive definite");

    const Eigen::Matrix<double, 8, 4> K =
        ldlt.solve(H * s.covariance).transpose();

    // innovation; the x component is the minimal cylinder displacement
    Vec4 innovation;
    innovation << angular_delta(s.mean(0), obs.cx(), s.image_width),
        obs.cy() - s.mean(1), obs.w() - s.mean(2), obs.h() - s.mean(3);

    KalmanState out = s;
    out.mean = s.mean + K * innovation;
    out.mean(0) = wrap_x(out.mean(0), s.image_width);
    enforce_extent_floor(out.mean);

    // Joseph form keeps the posterior symmetric positive definite
    const Mat8 IKH = Mat8::Identity() - K * H;
    out.covariance = IKH * s.covariance * IKH.transpose() + K * R * K.transpose();
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose().eval());
    return out;
}

}  // namespace omnitrack
