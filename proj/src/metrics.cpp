#include "omnitrack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "omnitrack/association.hpp"

namespace omnitrack {

namespace {

struct EvalBox {
    int id;
    PanoBox box;
};

struct EvalFrame {
    std::vector<EvalBox> gt;
    std::vector<EvalBox> pred;
};

double effective_width(const SequenceMeta& meta) {
    // planar sequences live on a cylinder too wide to ever wrap
    const double w = std::max(1, meta.image_width);
    return meta.panoramic ? w : w * 64.0;
}

// Assembles per-frame gt/pred box lists over the union of frame ids.
// Ignored gt is dropped; predictions covering an ignored gt box at IoU
// >= 0.5 are dropped with it.
std::vector<EvalFrame> build_frames(const FrameMap& gt_stream,
                                    const FrameMap& pred_stream,
                                    const SequenceMeta& meta,
                                    const EvalOptions& opt) {
    const double W = effective_width(meta);
    std::set<int> frames;
    for (const auto& [f, _] : gt_stream) frames.insert(f);
    for (const auto& [f, _] : pred_stream) frames.insert(f);

    std::vector<EvalFrame> out;
    for (int f : frames) {
        EvalFrame ef;
        std::vector<PanoBox> ignored;
        if (auto it = gt_stream.find(f); it != gt_stream.end()) {
            for (const AnnotationRecord& r : it->second) {
                if (opt.min_box_area > 0.0 && r.area() < opt.min_box_area) continue;
                PanoBox b = PanoBox::from_ltwh(r.left, r.top, r.width, r.height, W);
                if (r.ignored)
                    ignored.push_back(b);
                else
                    ef.gt.push_back(EvalBox{r.track_id, b});
            }
        }
        if (auto it = pred_stream.find(f); it != pred_stream.end()) {
            for (const AnnotationRecord& r : it->second) {
                PanoBox b = PanoBox::from_ltwh(r.left, r.top, r.width, r.height, W);
                bool on_ignored = false;
                for (const PanoBox& ig : ignored)
                    if (pano_iou(b, ig) >= 0.5) {
                        on_ignored = true;
                        break;
                    }
                if (!on_ignored) ef.pred.push_back(EvalBox{r.track_id, b});
            }
        }
        out.push_back(std::move(ef));
    }
    return out;
}

}  // namespace

std::vector<FramePair> match_frame(const std::vector<PanoBox>& gt_boxes,
                                   const std::vector<PanoBox>& pred_boxes,
                                   double iou_threshold) {
    if (gt_boxes.empty() || pred_boxes.empty()) return {};
    CostMatrix m(static_cast<int>(gt_boxes.size()),
                 static_cast<int>(pred_boxes.size()));
    for (int i = 0; i < m.rows; ++i) {
        for (int j = 0; j < m.cols; ++j) {
            const double iou = pano_iou(gt_boxes[i], pred_boxes[j]);
            m.at(i, j) = 1.0 - iou;
            m.set_gate(i, j, iou >= iou_threshold);
        }
    }
    std::vector<FramePair> out;
    for (const auto& [i, j] : hungarian(m))
        out.push_back(FramePair{i, j, pano_iou(gt_boxes[i], pred_boxes[j])});
    return out;
}

EvalResult evaluate(const FrameMap& gt_stream, const FrameMap& pred_stream,
                    const SequenceMeta& meta, const EvalOptions& opt) {
    EvalResult r;
    r.name = meta.name;
    const std::vector<EvalFrame> frames = build_frames(gt_stream, pred_stream, meta, opt);

    for (const EvalFrame& f : frames) {
        r.gt_total += static_cast<long long>(f.gt.size());
        r.pred_total += static_cast<long long>(f.pred.size());
    }

    // ---- CLEAR (MOTA, IDSW) at opt.clear_iou with continuity carry-over
    {
        std::map<int, int> carry;      // gt id -> pred id matched last frame
        std::map<int, int> last_match; // gt id -> last pred id ever matched
        for (const EvalFrame& f : frames) {
            std::vector<char> gt_done(f.gt.size(), 0), pred_done(f.pred.size(), 0);
            std::map<int, int> new_carry;

            // continuity: keep still-valid previous correspondences first
            for (std::size_t i = 0; i < f.gt.size(); ++i) {
                const auto it = carry.find(f.gt[i].id);
                if (it == carry.end()) continue;
                for (std::size_t j = 0; j < f.pred.size(); ++j) {
                    if (pred_done[j] || f.pred[j].id != it->second) continue;
                    if (pano_iou(f.gt[i].box, f.pred[j].box) >= opt.clear_iou) {
                        gt_done[i] = 1;
                        pred_done[j] = 1;
                        new_carry[f.gt[i].id] = f.pred[j].id;
                        r.tp += 1;
                    }
                    break;
                }
            }

            std::vector<PanoBox> gtb, prb;
            std::vector<int> gidx, pidx;
            for (std::size_t i = 0; i < f.gt.size(); ++i)
                if (!gt_done[i]) {
                    gtb.push_back(f.gt[i].box);
                    gidx.push_back(static_cast<int>(i));
                }
            for (std::size_t j = 0; j < f.pred.size(); ++j)
                if (!pred_done[j]) {
                    prb.push_back(f.pred[j].box);
                    pidx.push_back(static_cast<int>(j));
                }
            for (const FramePair& mpair : match_frame(gtb, prb, opt.clear_iou)) {
                const int gi = gidx[mpair.gt_index], pj = pidx[mpair.pred_index];
                gt_done[gi] = 1;
                pred_done[pj] = 1;
                r.tp += 1;
                const int g = f.gt[gi].id, p = f.pred[pj].id;
                const auto lm = last_match.find(g);
                if (lm != last_match.end() && lm->second != p) r.idsw += 1;
                new_carry[g] = p;
            }
            for (const auto& [g, p] : new_carry) last_match[g] = p;
            carry = std::move(new_carry);

            for (char d : gt_done)
                if (!d) r.fn += 1;
            for (char d : pred_done)
                if (!d) r.fp += 1;
        }
    }

    // ---- HOTA over 19 alpha levels
    {
        std::map<int, long long> gt_count, pred_count;
        for (const EvalFrame& f : frames) {
            for (const EvalBox& b : f.gt) gt_count[b.id] += 1;
            for (const EvalBox& b : f.pred) pred_count[b.id] += 1;
        }
        for (int a = 0; a < kHotaLevels; ++a) {
            const double alpha = 0.05 * (a + 1);
            std::map<std::pair<int, int>, long long> pair_matches;
            long long tp = 0;
            for (const EvalFrame& f : frames) {
                std::vector<PanoBox> gtb, prb;
                for (const EvalBox& b : f.gt) gtb.push_back(b.box);
                for (const EvalBox& b : f.pred) prb.push_back(b.box);
                for (const FramePair& mpair : match_frame(gtb, prb, alpha)) {
                    tp += 1;
                    pair_matches[{f.gt[mpair.gt_index].id,
                                  f.pred[mpair.pred_index].id}] += 1;
                }
            }
            auto& ac = r.alpha[a];
            ac.tp = static_cast<double>(tp);
            ac.fn = static_cast<double>(r.gt_total - tp);
            ac.fp = static_cast<double>(r.pred_total - tp);
            for (const auto& [ids, m] : pair_matches) {
                const double uni = static_cast<double>(gt_count[ids.first]) +
                                   static_cast<double>(pred_count[ids.second]) -
                                   static_cast<double>(m);
                ac.ass_sum += static_cast<double>(m) * (static_cast<double>(m) / uni);
            }
        }
    }

    // ---- IDF1: global id-level assignment maximizing covered frames
    {
        std::map<std::pair<int, int>, long long> overlap;
        std::set<int> gt_ids, pred_ids;
        for (const EvalFrame& f : frames) {
            for (const EvalBox& g : f.gt) gt_ids.insert(g.id);
            for (const EvalBox& p : f.pred) pred_ids.insert(p.id);
            for (const EvalBox& g : f.gt)
                for (const EvalBox& p : f.pred)
                    if (pano_iou(g.box, p.box) >= opt.clear_iou)
                        overlap[{g.id, p.id}] += 1;
        }
        std::vector<int> gl(gt_ids.begin(), gt_ids.end());
        std::vector<int> pl(pred_ids.begin(), pred_ids.end());
        long long idtp = 0;
        if (!gl.empty() && !pl.empty()) {
            CostMatrix m(static_cast<int>(gl.size()), static_cast<int>(pl.size()));
            for (int i = 0; i < m.rows; ++i)
                for (int j = 0; j < m.cols; ++j) {
                    const auto it = overlap.find({gl[i], pl[j]});
                    const long long o = it == overlap.end() ? 0 : it->second;
                    m.at(i, j) = -static_cast<double>(o);
                    m.set_gate(i, j, o > 0);
                }
            for (const auto& [i, j] : hungarian(m))
                idtp += overlap[{gl[i], pl[j]}];
        }
        r.idtp = idtp;
        r.idfn = r.gt_total - idtp;
        r.idfp = r.pred_total - idtp;
    }

    // ---- OSPA, cutoff c over base distance 1 - IoU, averaged over frames
    {
        for (const EvalFrame& f : frames) {
            const std::size_t m = f.gt.size(), n = f.pred.size();
            r.ospa_frames += 1;
            if (m == 0 && n == 0) continue;
            if (m == 0 || n == 0) {
                r.ospa_sum += opt.ospa_cutoff;
                continue;
            }
            std::vector<PanoBox> gtb, prb;
            for (const EvalBox& b : f.gt) gtb.push_back(b.box);
            for (const EvalBox& b : f.pred) prb.push_back(b.box);
            CostMatrix cm(static_cast<int>(m), static_cast<int>(n));
            for (int i = 0; i < cm.rows; ++i)
                for (int j = 0; j < cm.cols; ++j)
                    cm.at(i, j) = std::pow(
                        std::min(opt.ospa_cutoff, 1.0 - pano_iou(gtb[i], prb[j])),
                        opt.ospa_order);
            double loc = 0.0;
            for (const auto& [i, j] : hungarian(cm)) loc += cm.at(i, j);
            const double card = std::pow(opt.ospa_cutoff, opt.ospa_order) *
                                static_cast<double>(std::max(m, n) - std::min(m, n));
            r.ospa_sum += std::pow((loc + card) / static_cast<double>(std::max(m, n)),
                                   1.0 / opt.ospa_order);
        }
    }

    // finalize ratios from the accumulators
    std::vector<EvalResult> self{r};
    EvalResult pooled = pool_results(self);
    pooled.name = meta.name;
    return pooled;
}

EvalResult pool_results(const std::vector<EvalResult>& results) {
    EvalResult agg;
    agg.name = "COMBINED";
    for (const EvalResult& r : results) {
        agg.tp += r.tp;
        agg.fp += r.fp;
        agg.fn += r.fn;
        agg.idsw += r.idsw;
        agg.gt_total += r.gt_total;
        agg.pred_total += r.pred_total;
        agg.idtp += r.idtp;
        agg.idfp += r.idfp;
        agg.idfn += r.idfn;
        agg.ospa_sum += r.ospa_sum;
        agg.ospa_frames += r.ospa_frames;
        for (int a = 0; a < kHotaLevels; ++a) {
            agg.alpha[a].tp += r.alpha[a].tp;
            agg.alpha[a].fn += r.alpha[a].fn;
            agg.alpha[a].fp += r.alpha[a].fp;
            agg.alpha[a].ass_sum += r.alpha[a].ass_sum;
        }
    }

    double hota_sum = 0.0, deta_sum = 0.0, assa_sum = 0.0;
    for (int a = 0; a < kHotaLevels; ++a) {
        const auto& ac = agg.alpha[a];
        const double den = ac.tp + ac.fn + ac.fp;
        const double deta = den > 0.0 ? ac.tp / den : 1.0;
        const double assa = ac.tp > 0.0 ? ac.ass_sum / ac.tp : (den > 0.0 ? 0.0 : 1.0);
        deta_sum += deta;
        assa_sum += assa;
        hota_sum += std::sqrt(deta * assa);
    }
    agg.hota = hota_sum / kHotaLevels;
    agg.deta = deta_sum / kHotaLevels;
    agg.assa = assa_sum / kHotaLevels;

    // empty-gt convention: 1 when predictions are empty too, else -FP
    if (agg.gt_total == 0)
        agg.mota = agg.fp == 0 ? 1.0 : -static_cast<double>(agg.fp);
    else
        agg.mota = 1.0 - static_cast<double>(agg.fn + agg.fp + agg.idsw) / agg.gt_total;

    const long long idden = 2 * agg.idtp + agg.idfp + agg.idfn;
    agg.idf1 = idden > 0 ? 2.0 * static_cast<double>(agg.idtp) / idden : 1.0;
    agg.ospa = agg.ospa_frames > 0 ? agg.ospa_sum / agg.ospa_frames : 0.0;
    return agg;
}

std::string report(const std::vector<EvalResult>& results, ReportFormat format) {
    std::vector<EvalResult> rows = results;
    rows.push_back(pool_results(results));

    std::ostringstream out;
    char buf[256];
    if (format == ReportFormat::csv) {
        out << "sequence,HOTA,DetA,AssA,MOTA,IDF1,OSPA,TP,FP,FN,IDSW\n";
        for (const EvalResult& r : rows) {
            std::snprintf(buf, sizeof(buf),
                          "%s,%.2f,%.2f,%.2f,%.2f,%.2f,%.2f,%lld,%lld,%lld,%lld\n",
                          r.name.c_str(), 100.0 * r.hota, 100.0 * r.deta,
                          100.0 * r.assa, 100.0 * r.mota, 100.0 * r.idf1,
                          100.0 * r.ospa, r.tp, r.fp, r.fn, r.idsw);
            out << buf;
        }
    } else {
        std::snprintf(buf, sizeof(buf), "%-20s %7s %7s %7s %7s %7s %7s %8s %8s %8s %6s\n",
                      "sequence", "HOTA", "DetA", "AssA", "MOTA", "IDF1", "OSPA",
                      "TP", "FP", "FN", "IDSW");
        out << buf;
        for (const EvalResult& r : rows) {
            std::snprintf(buf, sizeof(buf),
                          "%-20s %7.2f %7.2f %7.2f %7.2f %7.2f %7.2f %8lld %8lld %8lld %6lld\n",
                          r.name.c_str(), 100.0 * r.hota, 100.0 * r.deta,
                          100.0 * r.assa, 100.0 * r.mota, 100.0 * r.idf1,
                          100.0 * r.ospa, r.tp, r.fp, r.fn, r.idsw);
            out << buf;
        }
    }
    return out.str();
}

}  // namespace omnitrack
