#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "omnitrack/motion_model.hpp"

using namespace omnitrack;

namespace {

bool is_symmetric_pd(const Eigen::Matrix<double, 8, 8>& m) {
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9) return false;
    Eigen::LLT<Eigen::Matrix<double, 8, 8>> llt(m);
    return llt.info() == Eigen::Success;
}

}  // namespace

TEST_CASE("init_state") {
    const MotionConfig cfg;
    const PanoBox box(100, 50, 20, 40, 2048);
    const KalmanState s = init_state(box, cfg);
    CHECK(s.mean(0) == doctest::Approx(100));
    CHECK(s.mean(1) == doctest::Approx(50));
    CHECK(s.mean(2) == doctest::Approx(20));
    CHECK(s.mean(3) == doctest::Approx(40));
    for (int i = 4; i < 8; ++i) CHECK(s.mean(i) == 0.0);

    // diagonal equals the configured priors exactly
    const double ps = cfg.init_position_factor * cfg.std_weight_position * 40.0;
    const double vs = cfg.init_velocity_factor * cfg.std_weight_velocity * 40.0;
    for (int i = 0; i < 4; ++i) CHECK(s.covariance(i, i) == doctest::Approx(ps * ps));
    for (int i = 4; i < 8; ++i) CHECK(s.covariance(i, i) == doctest::Approx(vs * vs));
    CHECK(s.covariance.determinant() > 0.0);
    CHECK(is_symmetric_pd(s.covariance));
}

TEST_CASE("predict wraps and inflates") {
    KalmanState s = init_state(PanoBox(2040, 50, 20, 40, 2048));
    s.mean(4) = 20.0;  // vcx
    const KalmanState p = predict(s);
    CHECK(p.mean(0) == doctest::Approx(12));

    // zero velocity: position fixed, trace strictly grows
    const KalmanState s0 = init_state(PanoBox(100, 50, 20, 40, 2048));
    const KalmanState p0 = predict(s0);
    CHECK(p0.mean(0) == doctest::Approx(100));
    CHECK(p0.covariance.trace() > s0.covariance.trace());
    CHECK(is_symmetric_pd(p0.covariance));
}

TEST_CASE("two predicts equal one double-length step for the mean") {
    // closed-form oracle: x_{k+2} = F^2 x_k for the linear CV system
    KalmanState s = init_state(PanoBox(100, 50, 20, 40, 2048));
    s.mean(4) = 3.0;
    s.mean(5) = -2.0;
    s.mean(6) = 0.5;
    Eigen::Matrix<double, 8, 8> F = Eigen::Matrix<double, 8, 8>::Identity();
    for (int i = 0; i < 4; ++i) F(i, i + 4) = 2.0;  // double-length step
    const Eigen::Matrix<double, 8, 1> oracle = F * s.mean;

    const KalmanState p2 = predict(predict(s));
    for (int i = 0; i < 8; ++i) CHECK(p2.mean(i) == doctest::Approx(oracle(i)));
}

TEST_CASE("update: exact observation shrinks covariance, keeps mean") {
    const KalmanState s = predict(init_state(PanoBox(100, 50, 20, 40, 2048)));
    const KalmanState u = update(s, PanoBox(100, 50, 20, 40, 2048));
    for (int i = 0; i < 4; ++i) CHECK(u.mean(i) == doctest::Approx(s.mean(i)));
    CHECK(u.covariance.trace() < s.covariance.trace());
    CHECK(is_symmetric_pd(u.covariance));
}

TEST_CASE("update matches a hand-run KF recursion") {
    // independent dense recursion with the same noise configuration
    const MotionConfig cfg;
    const double W = 2048.0;
    auto run_oracle = [&](const std::vector<double>& xs) {
        Eigen::VectorXd mean(8);
        mean << xs[0], 50, 20, 40, 0, 0, 0, 0;
        const double h = 40.0;
        const double ps = cfg.std_weight_position * h, vs = cfg.std_weight_velocity * h;
        Eigen::MatrixXd P = Eigen::MatrixXd::Zero(8, 8);
        for (int i = 0; i < 4; ++i)
            P(i, i) = std::pow(cfg.init_position_factor * ps, 2);
        for (int i = 4; i < 8; ++i)
            P(i, i) = std::pow(cfg.init_velocity_factor * vs, 2);
        Eigen::MatrixXd F = Eigen::MatrixXd::Identity(8, 8);
        for (int i = 0; i < 4; ++i) F(i, i + 4) = 1.0;
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(4, 8);
        for (int i = 0; i < 4; ++i) H(i, i) = 1.0;

        for (std::size_t k = 1; k < xs.size(); ++k) {
            const double hh = mean(3);
            const double pss = cfg.std_weight_position * hh,
                         vss = cfg.std_weight_velocity * hh;
            Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(8, 8);
            for (int i = 0; i < 4; ++i) Q(i, i) = pss * pss;
            for (int i = 4; i < 8; ++i) Q(i, i) = vss * vss;
            mean = F * mean;
            P = F * P * F.transpose() + Q;

            Eigen::MatrixXd R = Eigen::MatrixXd::Zero(4, 4);
            const double rs = cfg.std_weight_position * mean(3);
            for (int i = 0; i < 4; ++i) R(i, i) = rs * rs;
            Eigen::MatrixXd S = H * P * H.transpose() + R;
            Eigen::MatrixXd K = P * H.transpose() * S.inverse();
            Eigen::VectorXd z(4);
            z << xs[k], 50, 20, 40;
            Eigen::VectorXd innov = z - H * mean;
            mean = mean + K * innov;
            Eigen::MatrixXd IKH = Eigen::MatrixXd::Identity(8, 8) - K * H;
            P = IKH * P * IKH.transpose() + K * R * K.transpose();
        }
        mean = F * mean;  // one more predict
        return mean;
    };

    // observations x = 0 then x = 10; compare the next predicted cx
    KalmanState s = init_state(PanoBox(0, 50, 20, 40, W), cfg);
    s = predict(s, cfg);
    s = update(s, PanoBox(10, 50, 20, 40, W), cfg);
    s = predict(s, cfg);
    const Eigen::VectorXd oracle = run_oracle({0.0, 10.0});
    CHECK(s.mean(0) == doctest::Approx(oracle(0)).epsilon(1e-9));
    CHECK(s.mean(4) == doctest::Approx(oracle(4)).epsilon(1e-9));
}

TEST_CASE("seam innovation stays local to the seam") {
    KalmanState s = init_state(PanoBox(2046, 50, 20, 40, 2048));
    s = predict(s);
    s = update(s, PanoBox(2, 50, 20, 40, 2048));
    const double cx = s.mean(0);
    const bool near_seam = cx >= 2046.0 || cx <= 2.0;
    CHECK(near_seam);
    CHECK(std::abs(angular_delta(cx, 1024.0, 2048)) > 500.0);  // never near the far side
}

TEST_CASE("covariance stays symmetric PD under random predict/update") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    KalmanState s = init_state(PanoBox(100, 50, 20, 40, 2048));
    for (int i = 0; i < 200; ++i) {
        s = predict(s);
        if (i % 2 == 0) {
            const PanoBox obs(wrap_x(s.mean(0) + u(rng), 2048), s.mean(1) + u(rng),
                              std::max(2.0, s.mean(2) + u(rng)),
                              std::max(2.0, s.mean(3) + u(rng)), 2048);
            s = update(s, obs);
        }
        CHECK(is_symmetric_pd(s.covariance));
        CHECK(s.mean(2) > 0.0);
        CHECK(s.mean(3) > 0.0);
    }
}

TEST_CASE("noiseless CV track converges after burn-in") {
    MotionConfig tight;
    tight.std_weight_position = 1e-9;  // measurement noise -> 0
    const double W = 2048.0;
    const double v = 7.0;
    KalmanState s = init_state(PanoBox(10, 50, 20, 40, W), tight);
    for (int frame = 1; frame <= 10; ++frame) {
        s = predict(s, tight);
        const double gt_cx = wrap_x(10 + v * frame, W);
        s = update(s, PanoBox(gt_cx, 50, 20, 40, W), tight);
        if (frame >= 3) {
            const KalmanState pred = predict(s, tight);
            const double expect = wrap_x(10 + v * (frame + 1), W);
            CHECK(pred.mean(0) == doctest::Approx(expect).epsilon(1e-6));
        }
    }
}

TEST_CASE("seam equivariance") {
    const double W = 2048.0;
    const double shift = 700.0;
    KalmanState a = init_state(PanoBox(2000, 50, 20, 40, W));
    KalmanState b = init_state(PanoBox(wrap_x(2000 + shift, W), 50, 20, 40, W));
    for (int i = 1; i <= 5; ++i) {
        a = predict(a);
        b = predict(b);
        const double obs = wrap_x(2000 + 11.0 * i, W);
        a = update(a, PanoBox(obs, 50, 20, 40, W));
        b = update(b, PanoBox(wrap_x(obs + shift, W), 50, 20, 40, W));
        CHECK(wrap_x(a.mean(0) + shift, W) == doctest::Approx(b.mean(0)).epsilon(1e-9));
        CHECK((a.covariance - b.covariance).cwiseAbs().maxCoeff() < 1e-9);
    }
}
