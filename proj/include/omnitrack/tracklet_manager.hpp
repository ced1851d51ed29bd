#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "omnitrack/feedback.hpp"
#include "omnitrack/motion_model.hpp"
#include "omnitrack/mot_io.hpp"
#include "omnitrack/pano_geom.hpp"

namespace omnitrack {

enum class TrackStatus { tentative, active, lost, removed };

enum class TrackerMode { e2e, da };

struct Track {
    int track_id = 0;
    KalmanState kstate;
    double score = 0.0;
    int class_id = 0;
    int age = 0;                // frames since initialization
    int hits = 0;               // updates received, init included
    int time_since_update = 0;
    TrackStatus status = TrackStatus::tentative;
};

struct TrackerConfig {
    double tau_init = 0.55;
    double tau_update = 0.45;
    TrackerMode mode = TrackerMode::da;
    double gate_radius = 200.0;      // pixels, decoder prior gate
    double gate_threshold = 0.7;     // association cost gate (1 - IoU units)
    double noise_scale = 0.5;        // FlexiTrack anchor/feature noise
    int max_age = 1;                 // frames a track may coast before removal
    int min_hits = 1;
    double conf_split = 0.5;         // cascade stage split (DA mode)
    bool da_rebind = false;          // re-run D_F through global assignment
    bool emit_coasted = false;       // emit predicted boxes for lost tracks
    std::uint64_t rng_seed = 0;
    MotionConfig motion;

    void validate() const;
};

/// Per-sequence tracker state. Mutated single-threaded in frame order.
class Tracker {
public:
    explicit Tracker(const TrackerConfig& cfg, double image_width, double image_height);

    /// End-to-end branch: threshold lifecycle over bound / free detections.
    std::vector<AnnotationRecord> step_e2e(const std::vector<Detection>& bound,
                                           const std::vector<Detection>& free);

    /// Data-association branch: gated cost matrix plus Hungarian.
    std::vector<AnnotationRecord> step_da(const std::vector<Detection>& bound,
                                          const std::vector<Detection>& free);

    /// Feeds one frame through make_instances -> decode_with_priors ->
    /// the configured branch.
    std::vector<AnnotationRecord> step(const std::vector<Detection>& dets);

    const std::vector<Track>& tracks() const { return tracks_; }
    int frame_index() const { return frame_; }

    // last observed (left, top, w, h) per track id, emitted on update frames
    using ObsMap = std::map<int, std::array<double, 4>>;

private:
    std::vector<TrackPrior> live_priors() const;
    Track& track_by_id(int id);
    int new_track(const Detection& d);
    void update_track(Track& t, const Detection& d);
    void finish_frame(std::vector<int>& updated_ids, const ObsMap& obs,
                      std::vector<AnnotationRecord>& out);

    TrackerConfig cfg_;
    double image_width_, image_height_;
    std::vector<Track> tracks_;
    int next_id_ = 1;
    int frame_ = 0;
};

/// Runs a whole detection stream (frame -> detections) through the tracker.
/// Frames must be strictly increasing. Deterministic for fixed
/// (input, config, seed).
FrameMap run_sequence(const FrameMap& det_stream, const SequenceMeta& meta,
                      const TrackerConfig& cfg);

/// Entropy diagnostics for one sequence. Candidate distributions are
/// softmax over negative association costs (temperature 1); the feedback
/// term conditions each distribution on its gate indicator, so it never
/// exceeds the independent term.
EntropyReport entropy_for_sequence(const FrameMap& det_stream,
                                   const SequenceMeta& meta,
                                   const TrackerConfig& cfg);

}  // namespace omnitrack
