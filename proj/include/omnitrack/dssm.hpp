#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace omnitrack {

/// Dense 4-axis tensor, axes (batch, channel, width, height).
struct FeatureMap {
    int b = 0, c = 0, w = 0, h = 0;
    std::vector<double> data;

    FeatureMap() = default;
    FeatureMap(int b_, int c_, int w_, int h_)
        : b(b_), c(c_), w(w_), h(h_),
          data(static_cast<std::size_t>(b_) * c_ * w_ * h_, 0.0) {}

    double& at(int bi, int ci, int xi, int yi) {
        return data[((static_cast<std::size_t>(bi) * c + ci) * w + xi) * h + yi];
    }
    double at(int bi, int ci, int xi, int yi) const {
        return data[((static_cast<std::size_t>(bi) * c + ci) * w + xi) * h + yi];
    }
    bool same_shape(const FeatureMap& o) const {
        return b == o.b && c == o.c && w == o.w && h == o.h;
    }
};

/// Per-channel scalar coefficients of the simplified S6 recurrence
/// h_t = a h_{t-1} + b u_t, y_t = c h_t.
struct SsmCoeffs {
    double a = 0.5, b = 1.0, c = 1.0;
};

/// Parameters of the toy DynamicSSM block. Depthwise 3x3 kernels for the
/// distortion and scale branches, a bank of mixing kernels for the dynamic
/// convolution, per-channel SSM coefficients, and 1x1 channel-mixing
/// matrices for the residual and fusion transforms.
struct DssmParams {
    int channels = 0;
    std::vector<double> distortion_kernel;  // channels x 9, depthwise 3x3
    std::vector<double> scale_kernel;       // channels x 9
    std::vector<double> dyn_kernels;        // n_candidates x 9, shared across channels
    std::vector<double> dyn_gates;          // n_candidates mixing logits
    std::vector<SsmCoeffs> ssm;             // per channel
    std::vector<double> residual_mix;       // channels x channels, residual transform
    std::vector<double> fusion_mix;         // channels x channels (F)
    std::vector<double> s3_mix, s5_mix;     // 1x1 mixes for the side scales
    int s3_channels = 0, s5_channels = 0;
    int n_scans = 4;       // 1, 2 or 4 scan directions
    int dssm_target = 4;   // which scale gets the DynamicSSM path (3, 4 or 5)

    int n_candidates() const { return static_cast<int>(dyn_gates.size()); }
    void validate() const;

    /// Identity configuration: the whole block reduces to a pass-through.
    static DssmParams identity(int channels, int s3_channels, int s5_channels);
    /// Seeded random initialization (stable |a| < 1).
    static DssmParams random(int channels, int s3_channels, int s5_channels,
                             std::uint64_t seed);

    std::string to_text() const;
    static DssmParams from_text(const std::string& text);
};

/// Distortion and scale estimates: d = depthwise conv, s = sigmoid
/// of a second depthwise conv. Both keep the input shape.
std::pair<FeatureMap, FeatureMap> distortion_scale(const FeatureMap& s4,
                                                   const DssmParams& p);

/// Dynamic convolution conditioned on the modulation m = d (Hadamard) s:
/// pooled per (batch, channel) modulation selects softmax mixing weights
/// over the candidate kernel bank.
FeatureMap mitigate_distortion(const FeatureMap& d, const FeatureMap& s,
                               const FeatureMap& s4, const DssmParams& p);

/// Multi-directional linear scan: each direction linearizes the spatial
/// grid, runs the per-channel recurrence from h_0 = 0, restores order; the
/// output is the arithmetic mean over the configured directions.
FeatureMap ssm_scan(const FeatureMap& d, const DssmParams& p);

/// F = fusion_mix * (residual_mix * s4 + d_star), both mixes 1x1 over channels.
FeatureMap fuse(const FeatureMap& s4, const FeatureMap& d_star, const DssmParams& p);

/// Full block on one map: distortion_scale -> mitigate -> scan -> fuse.
FeatureMap dssm_forward(const FeatureMap& s4, const DssmParams& p);

struct CsemOutput {
    FeatureMap s3, s4, s5;
};

/// Multi-scale forward: the DynamicSSM path on the configured target scale
/// (default S4), plain 1x1 mixes on the others.
CsemOutput csem_forward(const FeatureMap& s3, const FeatureMap& s4,
                        const FeatureMap& s5, const DssmParams& p);

}  // namespace omnitrack
