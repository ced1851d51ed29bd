#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "omnitrack/pano_geom.hpp"

namespace omnitrack {

/// Rectangular cost matrix with a per-cell admissibility mask.
struct CostMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;  // row-major, lower = better
    std::vector<std::uint8_t> gate;

    CostMatrix() = default;
    CostMatrix(int r, int c)
        : rows(r), cols(c),
          values(static_cast<std::size_t>(r) * c, 0.0),
          gate(static_cast<std::size_t>(r) * c, 1) {}

    double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
    bool admissible(int r, int c) const { return gate[static_cast<std::size_t>(r) * cols + c] != 0; }
    void set_gate(int r, int c, bool ok) { gate[static_cast<std::size_t>(r) * cols + c] = ok ? 1 : 0; }
};

/// cost(i,j) = 1 - pano_iou(track_i, det_j); a cell is admissible when the
/// cost does not exceed gate_threshold.
CostMatrix build_cost_matrix(const std::vector<PanoBox>& tracks,
                             const std::vector<PanoBox>& dets,
                             double gate_threshold = 0.7);

using Assignment = std::vector<std::pair<int, int>>;

/// Minimum-cost maximum-cardinality matching over admissible cells.
/// Among equal-cost optima, returns the lexicographically smallest
/// (row, col) sequence. Rows left unmatched when no admissible column
/// can be assigned. Sorted by row.
Assignment hungarian(const CostMatrix& c);

struct DetectionBox {
    PanoBox box;
    double confidence;
};

struct CascadeResult {
    Assignment matched;                // (track index, det index)
    std::vector<int> unmatched_tracks;
    std::vector<int> unmatched_dets;
};

/// Two-stage association: high-confidence detections (conf >= conf_split)
/// first, leftover tracks against the rest second.
CascadeResult cascade_match(const std::vector<PanoBox>& tracks,
                            const std::vector<DetectionBox>& dets,
                            double conf_split, double gate_threshold = 0.7);

}  // namespace omnitrack
