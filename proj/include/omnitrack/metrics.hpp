#pragma once

#include <array>
#include <string>
#include <vector>

#include "omnitrack/mot_io.hpp"
#include "omnitrack/pano_geom.hpp"

namespace omnitrack {

inline constexpr int kHotaLevels = 19;  // alpha in {0.05, ..., 0.95}

struct EvalOptions {
    double clear_iou = 0.5;   // CLEAR/IDF1 matching threshold
    double ospa_cutoff = 1.0; // c
    double ospa_order = 1.0;  // p
    double min_box_area = 0.0; // 0 disables area filtering
};

struct EvalResult {
    std::string name;
    double hota = 0.0, deta = 0.0, assa = 0.0;
    double mota = 0.0, idf1 = 0.0, ospa = 0.0;
    long long tp = 0, fp = 0, fn = 0, idsw = 0;
    long long gt_total = 0, pred_total = 0;

    // pooled-aggregation accumulators
    struct AlphaCounts {
        double tp = 0, fn = 0, fp = 0, ass_sum = 0;
    };
    std::array<AlphaCounts, kHotaLevels> alpha{};
    long long idtp = 0, idfp = 0, idfn = 0;
    double ospa_sum = 0.0;
    long long ospa_frames = 0;
};

struct FramePair {
    int gt_index;
    int pred_index;
    double iou;
};

/// Maximum-similarity bipartite matching between two box sets; pairs with
/// IoU below the threshold are discarded.
std::vector<FramePair> match_frame(const std::vector<PanoBox>& gt_boxes,
                                   const std::vector<PanoBox>& pred_boxes,
                                   double iou_threshold);

/// Full evaluation of one sequence. GT records flagged ignore are removed
/// from all denominators; predictions covering them are discounted.
EvalResult evaluate(const FrameMap& gt_stream, const FrameMap& pred_stream,
                    const SequenceMeta& meta, const EvalOptions& options = {});

/// Pools per-sequence results HOTA-style: counts are summed before any
/// ratio is taken. Never averages ratios.
EvalResult pool_results(const std::vector<EvalResult>& results);

enum class ReportFormat { text, csv };

/// One row per sequence plus the pooled aggregate. Columns: HOTA, DetA,
/// AssA, MOTA, IDF1, OSPA, TP, FP, FN, IDSW; percentages at 2 decimals.
std::string report(const std::vector<EvalResult>& results, ReportFormat format);

}  // namespace omnitrack
