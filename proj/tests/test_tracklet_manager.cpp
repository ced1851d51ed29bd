#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "omnitrack/tracklet_manager.hpp"

using namespace omnitrack;

namespace {

const double W = 2048.0, H = 480.0;

Detection det(double cx, double cy, double score, int track_id = -1,
              int cls = 1, double w = 40, double h = 60) {
    return Detection{PanoBox(cx, cy, w, h, W), score, cls, track_id};
}

TrackerConfig clean_cfg(TrackerMode mode) {
    TrackerConfig cfg;
    cfg.mode = mode;
    cfg.noise_scale = 0.0;
    return cfg;
}

AnnotationRecord det_record(int frame, double cx, double cy, double score,
                            int cls = 1, double w = 40, double h = 60) {
    AnnotationRecord r;
    r.frame_id = frame;
    r.track_id = -1;
    r.left = wrap_x(cx - w / 2.0, W);
    r.top = cy - h / 2.0;
    r.width = w;
    r.height = h;
    r.confidence = score;
    r.class_id = cls;
    r.visibility = 1.0;
    return r;
}

}  // namespace

TEST_CASE("config validation") {
    TrackerConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.tau_init = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = TrackerConfig{};
    cfg.max_age = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = TrackerConfig{};
    cfg.noise_scale = -0.1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    CHECK_THROWS_AS(Tracker(TrackerConfig{}, 0.0, 480.0), std::invalid_argument);
}

TEST_CASE("e2e lifecycle thresholds") {
    // defaults: tau_init 0.55, tau_update 0.45, max_age 1
    Tracker tr(clean_cfg(TrackerMode::e2e), W, H);

    SUBCASE("free detection above tau_init starts a track") {
        const auto out = tr.step_e2e({}, {det(100, 100, 0.56)});
        REQUIRE(out.size() == 1);
        CHECK(out[0].track_id == 1);
        CHECK(out[0].frame_id == 1);
        CHECK(tr.tracks().size() == 1);
        CHECK(tr.tracks()[0].status == TrackStatus::active);
    }
    SUBCASE("free detection at or below tau_init is dropped") {
        CHECK(tr.step_e2e({}, {det(100, 100, 0.55)}).empty());
        CHECK(tr.step_e2e({}, {det(100, 100, 0.2)}).empty());
        CHECK(tr.tracks().empty());
    }
    SUBCASE("bound detection above tau_update keeps the identity") {
        tr.step_e2e({}, {det(100, 100, 0.9)});
        const auto out = tr.step_e2e({det(104, 100, 0.46, 1)}, {});
        REQUIRE(out.size() == 1);
        CHECK(out[0].track_id == 1);
        CHECK(out[0].frame_id == 2);
        CHECK(tr.tracks()[0].hits == 2);
    }
    SUBCASE("bound detection at or below tau_update takes the delete path") {
        tr.step_e2e({}, {det(100, 100, 0.9)});
        const auto out = tr.step_e2e({det(104, 100, 0.45, 1)}, {});
        CHECK(out.empty());
        // max_age 1: the unrefreshed track is removed this frame
        CHECK(tr.tracks().empty());
    }
    SUBCASE("unknown bound id is rejected") {
        CHECK_THROWS_AS(tr.step_e2e({det(100, 100, 0.9, 42)}, {}),
                        ValidationError);
    }
}

TEST_CASE("e2e decision table over the score grid") {
    const double scores[] = {0.0, 0.2, 0.44, 0.45, 0.46, 0.54, 0.55, 0.56, 0.9};
    for (const double s : scores) {
        // free branch
        {
            Tracker tr(clean_cfg(TrackerMode::e2e), W, H);
            tr.step_e2e({}, {det(100, 100, s)});
            CHECK(tr.tracks().size() == (s > 0.55 ? 1u : 0u));
        }
        // bound branch
        {
            Tracker tr(clean_cfg(TrackerMode::e2e), W, H);
            tr.step_e2e({}, {det(100, 100, 0.9)});
            tr.step_e2e({det(103, 100, s, 1)}, {});
            const bool kept = s > 0.45;
            CHECK(tr.tracks().size() == (kept ? 1u : 0u));
            if (kept) CHECK(tr.tracks()[0].track_id == 1);
        }
    }
}

TEST_CASE("da association keeps identities without bound ids") {
    Tracker tr(clean_cfg(TrackerMode::da), W, H);
    tr.step_da({}, {det(100, 100, 0.9), det(600, 200, 0.9)});
    REQUIRE(tr.tracks().size() == 2);

    SUBCASE("overlapping free detections rebind to the same ids") {
        const auto out = tr.step_da({}, {det(604, 200, 0.9), det(103, 100, 0.9)});
        REQUIRE(out.size() == 2);
        CHECK(out[0].track_id == 1);
        CHECK(out[1].track_id == 2);
        // emitted boxes are the matched detections
        CHECK(out[0].left == doctest::Approx(103.0 - 20.0));
        CHECK(out[1].left == doctest::Approx(604.0 - 20.0));
    }
    SUBCASE("a distant high-score detection starts a fresh id") {
        const auto out = tr.step_da(
            {}, {det(103, 100, 0.9), det(604, 200, 0.9), det(1500, 300, 0.9)});
        REQUIRE(out.size() == 3);
        CHECK(out[2].track_id == 3);
    }
    SUBCASE("a distant low-score detection neither matches nor initializes") {
        const auto out =
            tr.step_da({}, {det(103, 100, 0.9), det(604, 200, 0.9),
                            det(1500, 300, 0.4)});
        CHECK(out.size() == 2);
        CHECK(tr.tracks().size() == 2);
    }
    SUBCASE("class identity is respected") {
        const auto out =
            tr.step_da({}, {det(604, 200, 0.9),
                            det(103, 100, 0.9, -1, /*cls=*/2)});
        // the class-2 detection cannot match the class-1 track; it starts
        // id 3 while track 1 is removed (max_age 1)
        std::set<int> ids;
        for (const auto& r : out) ids.insert(r.track_id);
        CHECK(ids.count(2) == 1);
        CHECK(ids.count(3) == 1);
        CHECK(ids.count(1) == 0);
    }
}

TEST_CASE("missed tracks are removed once time_since_update reaches max_age") {
    auto cfg = clean_cfg(TrackerMode::da);
    SUBCASE("default max_age 1 removes immediately") {
        Tracker tr(cfg, W, H);
        tr.step_da({}, {det(100, 100, 0.9)});
        tr.step_da({}, {});
        CHECK(tr.tracks().empty());
        // a later detection at the same spot becomes a new identity
        const auto out = tr.step_da({}, {det(104, 100, 0.9)});
        REQUIRE(out.size() == 1);
        CHECK(out[0].track_id == 2);
    }
    SUBCASE("max_age 3 lets a track coast through two misses") {
        cfg.max_age = 3;
        Tracker tr(cfg, W, H);
        tr.step_da({}, {det(100, 105, 0.9)});
        CHECK(tr.step_da({}, {}).empty());  // lost, not emitted
        REQUIRE(tr.tracks().size() == 1);
        CHECK(tr.tracks()[0].status == TrackStatus::lost);
        const auto out = tr.step_da({}, {det(100, 105, 0.9)});
        REQUIRE(out.size() == 1);
        CHECK(out[0].track_id == 1);  // identity survived the gap
        tr.step_da({}, {});
        tr.step_da({}, {});
        tr.step_da({}, {});
        CHECK(tr.tracks().empty());
    }
    SUBCASE("emit_coasted publishes the prediction while lost") {
        cfg.max_age = 3;
        cfg.emit_coasted = true;
        Tracker tr(cfg, W, H);
        tr.step_da({}, {det(100, 105, 0.9)});
        const auto out = tr.step_da({}, {});
        REQUIRE(out.size() == 1);
        CHECK(out[0].track_id == 1);
        CHECK(out[0].top == doctest::Approx(105.0 - 30.0));
    }
}

TEST_CASE("min_hits gates emission, not identity") {
    auto cfg = clean_cfg(TrackerMode::da);
    cfg.min_hits = 2;
    cfg.max_age = 3;
    Tracker tr(cfg, W, H);
    CHECK(tr.step_da({}, {det(100, 100, 0.9)}).empty());
    CHECK(tr.tracks()[0].status == TrackStatus::tentative);
    const auto out = tr.step_da({}, {det(103, 100, 0.9)});
    REQUIRE(out.size() == 1);
    CHECK(out[0].track_id == 1);
}

TEST_CASE("track ids are unique and monotone") {
    Tracker tr(clean_cfg(TrackerMode::da), W, H);
    std::set<int> seen;
    int last = 0;
    for (int f = 0; f < 10; ++f) {
        // alternate detection placement so tracks die and respawn
        const double cx = (f % 2 == 0) ? 100.0 + 400.0 * (f % 3) : 1700.0;
        for (const auto& r : tr.step({det(cx, 100, 0.9)})) {
            const bool known_or_monotone = r.track_id >= last || seen.count(r.track_id) > 0;
            CHECK(known_or_monotone);
            seen.insert(r.track_id);
            last = std::max(last, r.track_id);
        }
    }
    CHECK(last >= 2);
}

TEST_CASE("seam-crossing synthetic keeps identities in both modes") {
    // three constant-velocity objects, one wrapping through the seam
    struct Obj {
        double cx0, cy, vx;
    };
    const std::vector<Obj> objs{{1990.0, 100.0, 8.0},
                                {300.0, 220.0, 5.0},
                                {1200.0, 350.0, -6.0}};
    const int n_frames = 20;

    FrameMap stream;
    for (int f = 1; f <= n_frames; ++f)
        for (const Obj& o : objs)
            stream[f].push_back(
                det_record(f, wrap_x(o.cx0 + o.vx * (f - 1), W), o.cy, 0.9));

    SequenceMeta meta;
    meta.name = "synthetic";
    meta.image_width = 2048;
    meta.image_height = 480;
    meta.frame_rate = 10.0;
    meta.n_frames = n_frames;
    meta.panoramic = true;

    for (const TrackerMode mode : {TrackerMode::da, TrackerMode::e2e}) {
        const FrameMap out = run_sequence(stream, meta, clean_cfg(mode));
        REQUIRE(out.size() == static_cast<std::size_t>(n_frames));

        // map objects (recognized by their exact emitted box) to ids;
        // identities must never change, even across the seam
        std::map<std::size_t, int> id_of_obj;
        int switches = 0;
        for (int f = 1; f <= n_frames; ++f) {
            const auto& recs = out.at(f);
            REQUIRE(recs.size() == objs.size());
            for (const auto& r : recs) {
                std::size_t which = objs.size();
                for (std::size_t k = 0; k < objs.size(); ++k) {
                    const double cx = wrap_x(objs[k].cx0 + objs[k].vx * (f - 1), W);
                    if (std::abs(angular_delta(r.left + r.width / 2.0, cx, W)) < 1e-6 &&
                        std::abs(r.top + r.height / 2.0 - objs[k].cy) < 1e-6)
                        which = k;
                }
                REQUIRE(which < objs.size());
                auto it = id_of_obj.find(which);
                if (it == id_of_obj.end())
                    id_of_obj[which] = r.track_id;
                else if (it->second != r.track_id)
                    ++switches;
            }
        }
        CHECK(switches == 0);
        CHECK(id_of_obj.size() == objs.size());
    }
}

TEST_CASE("run_sequence edge cases") {
    SequenceMeta meta;
    meta.name = "edge";
    meta.image_width = 2048;
    meta.image_height = 480;
    meta.n_frames = 5;
    meta.panoramic = true;

    SUBCASE("empty stream yields empty output") {
        CHECK(run_sequence({}, meta, clean_cfg(TrackerMode::da)).empty());
    }
    SUBCASE("single detection yields a single one-frame track on frame 1") {
        FrameMap stream;
        stream[1].push_back(det_record(1, 500, 100, 0.9));
        const FrameMap out = run_sequence(stream, meta, clean_cfg(TrackerMode::da));
        REQUIRE(out.size() == 1);
        CHECK(out.count(1) == 1);
        CHECK(out.at(1)[0].track_id == 1);
    }
    SUBCASE("non-positive frame indices are rejected") {
        FrameMap stream;
        stream[0].push_back(det_record(0, 500, 100, 0.9));
        CHECK_THROWS_AS(run_sequence(stream, meta, clean_cfg(TrackerMode::da)),
                        ValidationError);
    }
    SUBCASE("planar sequences never wrap") {
        meta.panoramic = false;
        meta.image_width = 640;
        // a box at the right edge and one at the left edge must not match
        FrameMap stream;
        stream[1].push_back(det_record(1, 620, 100, 0.9));
        stream[2].push_back(det_record(2, 20, 100, 0.9));
        // det_record wraps against W=2048; rebuild lefts for width 640
        stream[1][0].left = 600;
        stream[2][0].left = 0;
        const FrameMap out = run_sequence(stream, meta, clean_cfg(TrackerMode::da));
        CHECK(out.at(1)[0].track_id == 1);
        CHECK(out.at(2)[0].track_id == 2);
    }
}

TEST_CASE("determinism of full runs") {
    FrameMap stream;
    for (int f = 1; f <= 15; ++f) {
        stream[f].push_back(det_record(f, wrap_x(2030.0 + 7.0 * f, W), 100, 0.9));
        stream[f].push_back(det_record(f, 800.0 + 3.0 * f, 300, 0.8));
    }
    SequenceMeta meta;
    meta.name = "det";
    meta.image_width = 2048;
    meta.image_height = 480;
    meta.n_frames = 15;
    meta.panoramic = true;

    TrackerConfig cfg;  // default noise 0.5, seeded
    cfg.rng_seed = 7;
    const FrameMap a = run_sequence(stream, meta, cfg);
    const FrameMap b = run_sequence(stream, meta, cfg);
    REQUIRE(a.size() == b.size());
    for (const auto& [f, recs] : a) {
        REQUIRE(b.count(f) == 1);
        const auto& other = b.at(f);
        REQUIRE(recs.size() == other.size());
        for (std::size_t i = 0; i < recs.size(); ++i) CHECK(recs[i] == other[i]);
    }
}

TEST_CASE("entropy diagnostics honor the feedback bound") {
    FrameMap stream;
    for (int f = 1; f <= 12; ++f) {
        stream[f].push_back(det_record(f, 200.0 + 5.0 * f, 100, 0.9));
        stream[f].push_back(det_record(f, 230.0 + 5.0 * f, 140, 0.9));
        stream[f].push_back(det_record(f, 1400.0, 300, 0.9));
    }
    SequenceMeta meta;
    meta.name = "ent";
    meta.image_width = 2048;
    meta.image_height = 480;
    meta.n_frames = 12;
    meta.panoramic = true;

    const EntropyReport rep =
        entropy_for_sequence(stream, meta, clean_cfg(TrackerMode::da));
    CHECK(rep.n_frames == 12);
    CHECK(static_cast<int>(rep.per_frame_h.size()) == 12);
    CHECK(rep.h_independent > 0.0);
    CHECK(rep.h_feedback <= rep.h_independent + 1e-12);
    CHECK(rep.h_feedback >= 0.0);
    double sum = 0.0;
    for (double h : rep.per_frame_h) sum += h;
    CHECK(sum == doctest::Approx(rep.h_independent));
}
