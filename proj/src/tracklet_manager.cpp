#include "omnitrack/tracklet_manager.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "omnitrack/association.hpp"

namespace omnitrack {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t frame) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (frame + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

void TrackerConfig::validate() const {
    if (tau_init < 0.0 || tau_init > 1.0)
        throw std::invalid_argument("tau_init must be in [0,1]");
    if (tau_update < 0.0 || tau_update > 1.0)
        throw std::invalid_argument("tau_update must be in [0,1]");
    if (conf_split < 0.0 || conf_split > 1.0)
        throw std::invalid_argument("conf_split must be in [0,1]");
    if (noise_scale < 0.0)
        throw std::invalid_argument("noise_scale must be non-negative");
    if (max_age < 1) throw std::invalid_argument("max_age must be >= 1");
    if (min_hits < 1) throw std::invalid_argument("min_hits must be >= 1");
    if (gate_radius <= 0.0)
        throw std::invalid_argument("gate_radius must be positive");
}

Tracker::Tracker(const TrackerConfig& cfg, double image_width, double image_height)
    : cfg_(cfg), image_width_(image_width), image_height_(image_height) {
    cfg_.validate();
    if (image_width <= 0.0 || image_height <= 0.0)
        throw std::invalid_argument("Tracker: image dims must be positive");
}

std::vector<TrackPrior> Tracker::live_priors() const {
    std::vector<TrackPrior> priors;
    for (const Track& t : tracks_) {
        if (t.status == TrackStatus::removed) continue;
        priors.push_back(TrackPrior{t.track_id, t.kstate.box(), t.score, t.class_id});
    }
    return priors;
}

Track& Tracker::track_by_id(int id) {
    for (Track& t : tracks_)
        if (t.track_id == id && t.status != TrackStatus::removed) return t;
    throw ValidationError("bound detection references unknown or removed track id " +
                          std::to_string(id));
}

int Tracker::new_track(const Detection& d) {
    Track t;
    t.track_id = next_id_++;
    t.kstate = init_state(d.box, cfg_.motion);
    t.score = d.score;
    t.class_id = d.class_id;
    t.age = 1;
    t.hits = 1;
    t.time_since_update = 0;
    t.status = t.hits >= cfg_.min_hits ? TrackStatus::active : TrackStatus::tentative;
    tracks_.push_back(t);
    return t.track_id;
}

void Tracker::update_track(Track& t, const Detection& d) {
    t.kstate = update(t.kstate, d.box, cfg_.motion);
    t.score = d.score;
    t.hits += 1;
    t.time_since_update = 0;
    if (t.hits >= cfg_.min_hits) t.status = TrackStatus::active;
}

namespace {

Tracker::ObsMap::mapped_type obs_ltwh(const PanoBox& b) {
    return {wrap_x(b.cx() - b.w() / 2.0, b.image_width()), b.top(), b.w(), b.h()};
}

}  // namespace

void Tracker::finish_frame(std::vector<int>& updated_ids, const ObsMap& obs,
                           std::vector<AnnotationRecord>& out) {
    std::sort(updated_ids.begin(), updated_ids.end());
    auto was_updated = [&](int id) {
        return std::binary_search(updated_ids.begin(), updated_ids.end(), id);
    };

    for (Track& t : tracks_) {
        if (t.status == TrackStatus::removed) continue;
        if (was_updated(t.track_id)) continue;
        t.time_since_update += 1;
        if (t.time_since_update >= cfg_.max_age) {
            t.status = TrackStatus::removed;
        } else if (t.status == TrackStatus::active) {
            t.status = TrackStatus::lost;
        }
    }

    for (const Track& t : tracks_) {
        if (t.hits < cfg_.min_hits) continue;
        if (t.status == TrackStatus::active && t.time_since_update == 0) {
            const auto it = obs.find(t.track_id);
            AnnotationRecord r;
            r.frame_id = frame_;
            r.track_id = t.track_id;
            if (it != obs.end()) {
                r.left = it->second[0];
                r.top = it->second[1];
                r.width = it->second[2];
                r.height = it->second[3];
            } else {
                const PanoBox b = t.kstate.box();
                r.left = wrap_x(b.cx() - b.w() / 2.0, b.image_width());
                r.top = b.top();
                r.width = b.w();
                r.height = b.h();
            }
            r.confidence = t.score;
            r.class_id = t.class_id;
            r.visibility = 1.0;
            out.push_back(r);
        } else if (cfg_.emit_coasted && t.status == TrackStatus::lost) {
            const PanoBox b = t.kstate.box();
            AnnotationRecord r;
            r.frame_id = frame_;
            r.track_id = t.track_id;
            r.left = wrap_x(b.cx() - b.w() / 2.0, b.image_width());
            r.top = b.top();
            r.width = b.w();
            r.height = b.h();
            r.confidence = t.score;
            r.class_id = t.class_id;
            r.visibility = 1.0;
            out.push_back(r);
        }
    }
    std::sort(out.begin(), out.end(),
              [](const AnnotationRecord& a, const AnnotationRecord& b) {
                  return a.track_id < b.track_id;
              });

    tracks_.erase(std::remove_if(tracks_.begin(), tracks_.end(),
                                 [](const Track& t) {
                                     return t.status == TrackStatus::removed;
                                 }),
                  tracks_.end());
}

std::vector<AnnotationRecord> Tracker::step_e2e(const std::vector<Detection>& bound,
                                                const std::vector<Detection>& free) {
    frame_ += 1;
    for (Track& t : tracks_) {
        t.age += 1;
        t.kstate = predict(t.kstate, cfg_.motion);
    }

    ObsMap obs;
    std::vector<int> updated_ids;
    for (const Detection& d : bound) {
        if (d.score > cfg_.tau_update) {
            Track& t = track_by_id(d.track_id);
            update_track(t, d);
            updated_ids.push_back(t.track_id);
            obs[t.track_id] = obs_ltwh(d.box);
        }
        // score <= tau_update: Delete path, the track ages out below
    }
    for (const Detection& d : free) {
        if (d.score > cfg_.tau_init) {
            const int id = new_track(d);
            updated_ids.push_back(id);
            obs[id] = obs_ltwh(d.box);
        }
    }

    std::vector<AnnotationRecord> out;
    finish_frame(updated_ids, obs, out);
    return out;
}

std::vector<AnnotationRecord> Tracker::step_da(const std::vector<Detection>& bound,
                                               const std::vector<Detection>& free) {
    frame_ += 1;
    for (Track& t : tracks_) {
        t.age += 1;
        t.kstate = predict(t.kstate, cfg_.motion);
    }

    ObsMap obs;
    std::vector<int> updated_ids;
    std::vector<Detection> pool = free;
    if (cfg_.da_rebind) {
        for (Detection d : bound) {
            d.track_id = -1;
            pool.push_back(d);
        }
    } else {
        for (const Detection& d : bound) {
            Track& t = track_by_id(d.track_id);
            update_track(t, d);
            updated_ids.push_back(t.track_id);
            obs[t.track_id] = obs_ltwh(d.box);
        }
    }
    std::sort(updated_ids.begin(), updated_ids.end());

    // global assignment per class: cross-class matches are inadmissible
    std::map<int, std::vector<std::size_t>> track_by_class, det_by_class;
    for (std::size_t i = 0; i < tracks_.size(); ++i) {
        const Track& t = tracks_[i];
        if (t.status == TrackStatus::removed) continue;
        if (std::binary_search(updated_ids.begin(), updated_ids.end(), t.track_id))
            continue;
        track_by_class[t.class_id].push_back(i);
    }
    for (std::size_t j = 0; j < pool.size(); ++j)
        det_by_class[pool[j].class_id].push_back(j);

    std::vector<char> det_used(pool.size(), 0);
    for (auto& [cls, tidx] : track_by_class) {
        auto dit = det_by_class.find(cls);
        if (dit == det_by_class.end()) continue;
        const auto& didx = dit->second;

        std::vector<PanoBox> tboxes;
        std::vector<DetectionBox> dboxes;
        for (std::size_t i : tidx) tboxes.push_back(tracks_[i].kstate.box());
        for (std::size_t j : didx)
            dboxes.push_back(DetectionBox{pool[j].box, pool[j].score});

        const CascadeResult cr =
            cascade_match(tboxes, dboxes, cfg_.conf_split, cfg_.gate_threshold);
        for (const auto& [ti, dj] : cr.matched) {
            Track& t = tracks_[tidx[ti]];
            const Detection& d = pool[didx[dj]];
            update_track(t, d);
            updated_ids.push_back(t.track_id);
            det_used[didx[dj]] = 1;
            obs[t.track_id] = obs_ltwh(d.box);
        }
    }

    for (std::size_t j = 0; j < pool.size(); ++j) {
        if (det_used[j]) continue;
        const Detection& d = pool[j];
        if (d.score > cfg_.tau_init) {
            const int id = new_track(d);
            updated_ids.push_back(id);
            obs[id] = obs_ltwh(d.box);
        }
    }

    std::vector<AnnotationRecord> out;
    finish_frame(updated_ids, obs, out);
    return out;
}

std::vector<AnnotationRecord> Tracker::step(const std::vector<Detection>& dets) {
    // priors reflect the coming frame: advance each box by its velocity
    std::vector<TrackPrior> priors;
    for (const Track& t : tracks_) {
        if (t.status == TrackStatus::removed) continue;
        const KalmanState pred = predict(t.kstate, cfg_.motion);
        priors.push_back(TrackPrior{t.track_id, pred.box(), t.score, t.class_id});
    }

    const auto instances =
        make_instances(priors, cfg_.noise_scale,
                       mix_seed(cfg_.rng_seed, static_cast<std::uint64_t>(frame_ + 1)),
                       image_width_, image_height_);
    const DecodeResult dec = decode_with_priors(
        instances.empty() ? std::vector<FlexiTrackInstance>{} : instances,
        dets, cfg_.gate_radius);

    if (cfg_.mode == TrackerMode::e2e) return step_e2e(dec.bound, dec.free);
    return step_da(dec.bound, dec.free);
}

FrameMap run_sequence(const FrameMap& det_stream, const SequenceMeta& meta,
                      const TrackerConfig& cfg) {
    int last_frame = 0;
    for (const auto& [frame, recs] : det_stream) {
        if (frame <= last_frame)
            throw ValidationError("run_sequence: frames must be strictly increasing");
        last_frame = frame;
    }
    const int n_frames = meta.n_frames > 0 ? std::max(meta.n_frames, last_frame)
                                           : last_frame;

    // planar sequences run on a cylinder too wide to ever wrap
    const double eff_width = meta.panoramic
                                 ? static_cast<double>(meta.image_width)
                                 : static_cast<double>(meta.image_width) * 64.0;

    Tracker tracker(cfg, eff_width, std::max(1, meta.image_height));
    FrameMap out;
    for (int f = 1; f <= n_frames; ++f) {
        std::vector<Detection> dets;
        const auto it = det_stream.find(f);
        if (it != det_stream.end()) {
            for (const AnnotationRecord& r : it->second)
                dets.push_back(Detection{
                    PanoBox::from_ltwh(r.left, r.top, r.width, r.height, eff_width),
                    r.confidence, r.class_id, -1});
        }
        std::vector<AnnotationRecord> recs = tracker.step(dets);
        if (!recs.empty()) out[f] = std::move(recs);
    }
    return out;
}

EntropyReport entropy_for_sequence(const FrameMap& det_stream,
                                   const SequenceMeta& meta,
                                   const TrackerConfig& cfg) {
    int last_frame = 0;
    for (const auto& [frame, recs] : det_stream) last_frame = frame;
    const int n_frames = meta.n_frames > 0 ? std::max(meta.n_frames, last_frame)
                                           : last_frame;
    const double eff_width = meta.panoramic
                                 ? static_cast<double>(meta.image_width)
                                 : static_cast<double>(meta.image_width) * 64.0;

    Tracker tracker(cfg, eff_width, std::max(1, meta.image_height));
    EntropyReport rep;
    rep.n_frames = n_frames;

    for (int f = 1; f <= n_frames; ++f) {
        std::vector<Detection> dets;
        if (const auto it = det_stream.find(f); it != det_stream.end()) {
            for (const AnnotationRecord& r : it->second)
                dets.push_back(Detection{
                    PanoBox::from_ltwh(r.left, r.top, r.width, r.height, eff_width),
                    r.confidence, r.class_id, -1});
        }

        double h_ind = 0.0, h_fb = 0.0;
        if (!dets.empty()) {
            for (const Track& t : tracker.tracks()) {
                if (t.status == TrackStatus::removed) continue;
                const KalmanState pred = predict(t.kstate, cfg.motion);
                const PanoBox pb = pred.box();

                std::vector<double> p(dets.size());
                std::vector<std::uint8_t> gate(dets.size());
                double maxlogit = -1e300;
                std::vector<double> logits(dets.size());
                for (std::size_t j = 0; j < dets.size(); ++j) {
                    logits[j] = -(1.0 - pano_iou(pb, dets[j].box));
                    maxlogit = std::max(maxlogit, logits[j]);
                    const double dx = angular_delta(pb.cx(), dets[j].box.cx(), eff_width);
                    const double dy = dets[j].box.cy() - pb.cy();
                    gate[j] = (std::hypot(dx, dy) <= cfg.gate_radius &&
                               t.class_id == dets[j].class_id)
                                  ? 1
                                  : 0;
                }
                double norm = 0.0;
                for (std::size_t j = 0; j < dets.size(); ++j) {
                    p[j] = std::exp(logits[j] - maxlogit);
                    norm += p[j];
                }
                for (double& v : p) v /= norm;
                h_ind += shannon_entropy(p);
                h_fb += gated_conditional_entropy(p, gate);
            }
        }
        rep.per_frame_h.push_back(h_ind);
        rep.h_independent += h_ind;
        rep.h_feedback += h_fb;

        tracker.step(dets);
    }
    return rep;
}

}  // namespace omnitrack
