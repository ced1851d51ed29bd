#include "omnitrack/feedback.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "omnitrack/association.hpp"

namespace omnitrack {

namespace {

// Portable Box-Muller gaussians: std::normal_distribution is not
// reproducible across standard libraries, and seeded determinism is part
// of the contract.
class GaussianSource {
public:
    explicit GaussianSource(std::uint64_t seed) : rng_(seed) {}

    double next(double sigma) {
        if (have_spare_) {
            have_spare_ = false;
            return spare_ * sigma;
        }
        double u1 = 0.0;
        do {
            u1 = uniform01();
        } while (u1 <= 0.0);
        const double u2 = uniform01();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        spare_ = mag * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return mag * std::cos(2.0 * M_PI * u2) * sigma;
    }

private:
    double uniform01() {
        return (rng_() >> 11) * (1.0 / 9007199254740992.0);  // 53-bit mantissa
    }
    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace

PanoBox FlexiTrackInstance::anchor_box() const {
    const double W = image_width, H = image_height;
    const double w = std::clamp(anchor[2] * W, 1.0, W);
    const double h = std::max(anchor[3] * H, 1.0);
    return PanoBox(wrap_x(anchor[0] * W, W), anchor[1] * H, w, h, W);
}

std::vector<FlexiTrackInstance> make_instances(const std::vector<TrackPrior>& tracks,
                                               double noise_scale, std::uint64_t rng_seed,
                                               double image_width, double image_height) {
    if (noise_scale < 0.0)
        throw std::invalid_argument("make_instances: noise scale must be non-negative");
    if (image_width <= 0.0 || image_height <= 0.0)
        throw std::invalid_argument("make_instances: image dims must be positive");

    GaussianSource noise(rng_seed);
    std::vector<FlexiTrackInstance> out;
    out.reserve(tracks.size());
    for (const TrackPrior& t : tracks) {
        FlexiTrackInstance inst;
        inst.track_id = t.track_id;
        inst.score = t.score;
        inst.class_id = t.class_id;
        inst.image_width = image_width;
        inst.image_height = image_height;

        // feature base is zero; the anchor carries the normalized box
        inst.anchor[0] = t.box.cx() / image_width;
        inst.anchor[1] = t.box.cy() / image_height;
        inst.anchor[2] = t.box.w() / image_width;
        inst.anchor[3] = t.box.h() / image_height;

        if (noise_scale > 0.0) {
            for (int i = 0; i < kInstanceDim; ++i)
                inst.feature[i] += noise.next(noise_scale);
            for (int i = 0; i < kInstanceDim; ++i)
                inst.anchor[i] += noise.next(noise_scale);
        }
        out.push_back(inst);
    }
    return out;
}

DecodeResult decode_with_priors(const std::vector<FlexiTrackInstance>& instances,
                                const std::vector<Detection>& dets,
                                double gate_radius) {
    if (gate_radius <= 0.0)
        throw std::invalid_argument("decode_with_priors: gate radius must be positive");

    DecodeResult res;
    if (instances.empty() || dets.empty()) {
        res.free = dets;
        for (auto& d : res.free) d.track_id = -1;
        return res;
    }

    const int R = static_cast<int>(instances.size());
    const int C = static_cast<int>(dets.size());
    CostMatrix m(R, C);
    std::vector<PanoBox> prior_boxes;
    prior_boxes.reserve(instances.size());
    for (const auto& inst : instances) prior_boxes.push_back(inst.anchor_box());

    for (int i = 0; i < R; ++i) {
        for (int j = 0; j < C; ++j) {
            const PanoBox& pb = prior_boxes[i];
            const PanoBox& db = dets[j].box;
            const double dx = angular_delta(pb.cx(), db.cx(), pb.image_width());
            const double dy = db.cy() - pb.cy();
            const bool in_gate = std::hypot(dx, dy) <= gate_radius &&
                                 instances[i].class_id == dets[j].class_id;
            m.at(i, j) = 1.0 - pano_iou(pb, db);
            m.set_gate(i, j, in_gate);
        }
    }

    std::vector<char> claimed(C, 0);
    for (const auto& [i, j] : hungarian(m)) {
        Detection d = dets[j];
        d.track_id = instances[i].track_id;
        res.bound.push_back(d);
        claimed[j] = 1;
    }
    for (int j = 0; j < C; ++j) {
        if (!claimed[j]) {
            Detection d = dets[j];
            d.track_id = -1;
            res.free.push_back(d);
        }
    }
    return res;
}

double shannon_entropy(const std::vector<double>& p) {
    double sum = 0.0;
    for (double v : p) {
        if (v < 0.0)
            throw std::invalid_argument("shannon_entropy: negative probability");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("shannon_entropy: vector not normalized");
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return std::max(h, 0.0);
}

std::pair<std::vector<double>, double> entropy_independent(
    const std::vector<FrameDists>& frames, const std::vector<double>* joint) {
    std::vector<double> per_frame;
    per_frame.reserve(frames.size());
    double total = 0.0;
    for (const FrameDists& frame : frames) {
        double h = 0.0;
        for (const auto& p : frame) h += shannon_entropy(p);
        per_frame.push_back(h);
        total += h;
    }
    if (joint != nullptr) total += shannon_entropy(*joint);
    // without a joint, the association term is the entropy of the
    // deterministic matching: zero
    return {per_frame, total};
}

double entropy_feedback(const std::vector<FrameDists>& conditionals) {
    double total = 0.0;
    for (const FrameDists& frame : conditionals)
        for (const auto& p : frame) total += shannon_entropy(p);
    return total;
}

double gated_conditional_entropy(const std::vector<double>& p,
                                 const std::vector<std::uint8_t>& gate) {
    if (gate.size() != p.size())
        throw std::invalid_argument("gated_conditional_entropy: size mismatch");
    (void)shannon_entropy(p);  // validates normalization

    double mass_in = 0.0, mass_out = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        (gate[i] ? mass_in : mass_out) += p[i];

    auto branch_entropy = [&](bool in, double mass) {
        if (mass <= 0.0) return 0.0;
        double h = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if ((gate[i] != 0) != in || p[i] <= 0.0) continue;
            const double q = p[i] / mass;
            h -= q * std::log(q);
        }
        return h;
    };
    return mass_in * branch_entropy(true, mass_in) +
           mass_out * branch_entropy(false, mass_out);
}

}  // namespace omnitrack
