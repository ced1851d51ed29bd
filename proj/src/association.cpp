#include "omnitrack/association.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace omnitrack {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct SolveResult {
    double real_cost = 0.0;  // sum over admissible matched cells only
    int matches = 0;
    Assignment pairs;
};

// Hungarian algorithm with row/column potentials on an implicitly padded
// square matrix. Inadmissible and padded cells carry the same large cost,
// so the solver maximizes the number of admissible matches first and
// minimizes their total cost second.
SolveResult solve_subproblem(const CostMatrix& m, const std::vector<int>& row_ids,
                             const std::vector<int>& col_ids, double big) {
    const int R = static_cast<int>(row_ids.size());
    const int C = static_cast<int>(col_ids.size());
    const int n = std::max(R, C);
    SolveResult res;
    if (n == 0) return res;

    auto cell = [&](int i, int j) -> double {
        if (i >= R || j >= C) return big;
        const int r = row_ids[i], c = col_ids[j];
        return m.admissible(r, c) ? m.at(r, c) : big;
    };

    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = -1;
            double delta = kInf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cell(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    for (int j = 1; j <= n; ++j) {
        const int i = p[j] - 1;
        if (i < R && j - 1 < C) {
            const int r = row_ids[i], c = col_ids[j - 1];
            if (m.admissible(r, c)) {
                res.pairs.emplace_back(r, c);
                res.real_cost += m.at(r, c);
                ++res.matches;
            }
        }
    }
    std::sort(res.pairs.begin(), res.pairs.end());
    return res;
}

double padding_cost(const CostMatrix& m) {
    double maxabs = 0.0;
    for (std::size_t i = 0; i < m.values.size(); ++i)
        if (m.gate[i] && std::isfinite(m.values[i]))
            maxabs = std::max(maxabs, std::abs(m.values[i]));
    const int n = std::max(m.rows, m.cols);
    return 2.0 * (1.0 + maxabs) * (n + 1);
}

}  // namespace

CostMatrix build_cost_matrix(const std::vector<PanoBox>& tracks,
                             const std::vector<PanoBox>& dets,
                             double gate_threshold) {
    for (const auto& t : tracks)
        for (const auto& d : dets)
            if (t.image_width() != d.image_width())
                throw std::invalid_argument("build_cost_matrix: mixed image widths");

    CostMatrix m(static_cast<int>(tracks.size()), static_cast<int>(dets.size()));
    for (int i = 0; i < m.rows; ++i) {
        for (int j = 0; j < m.cols; ++j) {
            const double cost = 1.0 - pano_iou(tracks[i], dets[j]);
            m.at(i, j) = cost;
            m.set_gate(i, j, cost <= gate_threshold);
        }
    }
    return m;
}

Assignment hungarian(const CostMatrix& m) {
    if (m.rows == 0 || m.cols == 0) return {};
    const double big = padding_cost(m);
    const double eps = 1e-9 * (1.0 + big);

    std::vector<int> all_rows(m.rows), all_cols(m.cols);
    for (int i = 0; i < m.rows; ++i) all_rows[i] = i;
    for (int j = 0; j < m.cols; ++j) all_cols[j] = j;
    const SolveResult full = solve_subproblem(m, all_rows, all_cols, big);

    // Among equal-cost optima pick the lexicographically smallest (row, col)
    // sequence: forward-fix each row to the smallest column that still
    // completes to the optimal cardinality and total.
    Assignment result;
    std::vector<char> col_used(m.cols, 0);
    double forced_cost = 0.0;
    int forced_matches = 0;
    for (int r = 0; r < m.rows; ++r) {
        std::vector<int> rest_rows;
        for (int i = r + 1; i < m.rows; ++i) rest_rows.push_back(i);

        bool matched = false;
        for (int c = 0; c < m.cols && !matched; ++c) {
            if (col_used[c] || !m.admissible(r, c)) continue;
            std::vector<int> rest_cols;
            for (int j = 0; j < m.cols; ++j)
                if (!col_used[j] && j != c) rest_cols.push_back(j);
            const SolveResult sub = solve_subproblem(m, rest_rows, rest_cols, big);
            if (forced_matches + 1 + sub.matches == full.matches &&
                forced_cost + m.at(r, c) + sub.real_cost <= full.real_cost + eps) {
                result.emplace_back(r, c);
                col_used[c] = 1;
                forced_cost += m.at(r, c);
                ++forced_matches;
                matched = true;
            }
        }
        // no admissible column keeps the optimum: row stays unmatched
    }
    return result;
}

CascadeResult cascade_match(const std::vector<PanoBox>& tracks,
                            const std::vector<DetectionBox>& dets,
                            double conf_split, double gate_threshold) {
    std::vector<int> high, low;
    for (int j = 0; j < static_cast<int>(dets.size()); ++j)
        (dets[j].confidence >= conf_split ? high : low).push_back(j);

    CascadeResult out;
    std::vector<char> track_matched(tracks.size(), 0);
    std::vector<char> det_matched(dets.size(), 0);

    auto run_stage = [&](const std::vector<int>& det_ids) {
        std::vector<int> track_ids;
        for (int i = 0; i < static_cast<int>(tracks.size()); ++i)
            if (!track_matched[i]) track_ids.push_back(i);
        if (track_ids.empty() || det_ids.empty()) return;

        std::vector<PanoBox> tboxes, dboxes;
        for (int i : track_ids) tboxes.push_back(tracks[i]);
        for (int j : det_ids) dboxes.push_back(dets[j].box);
        const CostMatrix m = build_cost_matrix(tboxes, dboxes, gate_threshold);
        for (const auto& [ri, ci] : hungarian(m)) {
            const int t = track_ids[ri], d = det_ids[ci];
            out.matched.emplace_back(t, d);
            track_matched[t] = 1;
            det_matched[d] = 1;
        }
    };

    run_stage(high);
    run_stage(low);

    std::sort(out.matched.begin(), out.matched.end());
    for (int i = 0; i < static_cast<int>(tracks.size()); ++i)
        if (!track_matched[i]) out.unmatched_tracks.push_back(i);
    for (int j = 0; j < static_cast<int>(dets.size()); ++j)
        if (!det_matched[j]) out.unmatched_dets.push_back(j);
    return out;
}

}  // namespace omnitrack
