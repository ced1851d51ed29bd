#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "omnitrack/pano_geom.hpp"

namespace omnitrack {

inline constexpr int kInstanceDim = 128;

/// Lightweight view of a live track, enough to build a feedback prior.
struct TrackPrior {
    int track_id = 0;
    PanoBox box;
    double score = 0.0;
    int class_id = 0;
};

/// Feedback prior record: a 128-d feature vector plus a 128-d anchor.
/// Anchor dims 0-3 hold the normalized box (cx/W, cy/H, w/W, h/H); the
/// remaining dims are zero before noise.
struct FlexiTrackInstance {
    int track_id = 0;
    std::array<double, kInstanceDim> feature{};
    std::array<double, kInstanceDim> anchor{};
    double score = 0.0;
    int class_id = 0;
    double image_width = 0.0;
    double image_height = 0.0;

    /// Box decoded from anchor dims 0-3. Extents are clamped to stay valid
    /// under noise.
    PanoBox anchor_box() const;
};

std::vector<FlexiTrackInstance> make_instances(const std::vector<TrackPrior>& tracks,
                                               double noise_scale, std::uint64_t rng_seed,
                                               double image_width, double image_height);

struct Detection {
    PanoBox box;
    double score = 0.0;
    int class_id = 0;
    int track_id = -1;  // bound identity; -1 while free
};

struct DecodeResult {
    std::vector<Detection> bound;  // D_F, carrying instance track ids
    std::vector<Detection> free;   // D_L, track_id -1
};

/// Decoder stand-in: globally matches instances to detections over a gated
/// 1 - pano_iou cost (admissible when the centers are within gate_radius on
/// the cylinder). Claimed detections become D_F with the instance identity;
/// everything else is D_L.
DecodeResult decode_with_priors(const std::vector<FlexiTrackInstance>& instances,
                                const std::vector<Detection>& dets,
                                double gate_radius);

/// Per-frame candidate distributions, one probability vector per target.
using FrameDists = std::vector<std::vector<double>>;

struct EntropyReport {
    std::vector<double> per_frame_h;  // nats
    double h_independent = 0.0;
    double h_feedback = 0.0;
    int n_frames = 0;
};

/// Shannon entropy in nats; 0*log 0 := 0. Throws ValidationError-style
/// std::invalid_argument when the vector is not normalized within 1e-9.
double shannon_entropy(const std::vector<double>& p);

/// Per-frame detection entropies and the independent cumulative entropy.
/// When a joint association distribution is supplied its entropy is added;
/// otherwise the association term is the entropy of the deterministic
/// gating-free matching, which is zero (reported surrogate).
std::pair<std::vector<double>, double> entropy_independent(
    const std::vector<FrameDists>& frames,
    const std::vector<double>* joint = nullptr);

/// Sum of supplied conditional entropies across frames and targets.
double entropy_feedback(const std::vector<FrameDists>& conditionals);

/// Conditional entropy of p given the gate indicator: the mixture
/// P(in)*H(p|in) + P(out)*H(p|out). Never exceeds shannon_entropy(p) and
/// equals it when the gate admits everything.
double gated_conditional_entropy(const std::vector<double>& p,
                                 const std::vector<std::uint8_t>& gate);

}  // namespace omnitrack
