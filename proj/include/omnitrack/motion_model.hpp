#pragma once

#include <Eigen/Dense>

#include "omnitrack/pano_geom.hpp"

namespace omnitrack {

/// Noise configuration for the constant-velocity box filter. Standard
/// deviations scale with box height, SORT-family convention.
struct MotionConfig {
    double std_weight_position = 1.0 / 20.0;
    double std_weight_velocity = 1.0 / 160.0;
    // init covariance multipliers (on top of the position/velocity stds)
    double init_position_factor = 2.0;
    double init_velocity_factor = 10.0;
};

/// Raised when the innovation covariance is not invertible.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// State mean layout: (cx, cy, w, h, vcx, vcy, vw, vh).
struct KalmanState {
    Eigen::Matrix<double, 8, 1> mean;
    Eigen::Matrix<double, 8, 8> covariance;
    double image_width = 0.0;

    PanoBox box() const {
        return PanoBox(mean(0), mean(1), mean(2), mean(3), image_width);
    }
};

KalmanState init_state(const PanoBox& box, const MotionConfig& cfg = {});

/// One constant-velocity step; cx is re-wrapped onto [0, W).
KalmanState predict(const KalmanState& s, const MotionConfig& cfg = {});

/// Kalman correction. The cx innovation goes through angular_delta so a
/// track and an observation on opposite sides of the seam pull together
/// across it rather than across the whole panorama.
KalmanState update(const KalmanState& s, const PanoBox& obs,
                   const MotionConfig& cfg = {});

}  // namespace omnitrack
