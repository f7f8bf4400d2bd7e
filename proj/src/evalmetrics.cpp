#include "lens/evalmetrics.hpp"

#include "lens/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lens::eval {

namespace {

double box_iou(const BBox& a, const BBox& b) {
    const double iw = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
    const double ih = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) {
        return a.area() == 0.0 && b.area() == 0.0 ? 1.0 : 0.0;
    }
    return inter / uni;
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
    const int w = std::max(a.width(), b.width());
    const int h = std::max(a.height(), b.height());
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const bool pa = a.get(x, y);
            const bool pb = b.get(x, y);
            inter += (pa && pb) ? 1 : 0;
            uni += (pa || pb) ? 1 : 0;
        }
    }
    if (uni == 0) {
        return 1.0;
    }
    return static_cast<double>(inter) / static_cast<double>(uni);
}

// Stable order of prediction indices by descending score.
std::vector<std::size_t> score_order(const std::vector<ScoredRegion>& preds) {
    std::vector<std::size_t> order(preds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
    return order;
}

double interpolated_ap(const std::vector<PrPoint>& points) {
    double sum = 0.0;
    for (int i = 0; i <= 100; ++i) {
        const double r = i / 100.0;
        double best = 0.0;
        for (const PrPoint& p : points) {
            if (p.recall >= r) {
                best = std::max(best, p.precision);
            }
        }
        sum += best;
    }
    return sum / 101.0;
}

struct SweepEntry {
    double score;
    bool tp;
};

PrCurve sweep(std::vector<SweepEntry> entries, std::size_t total_gt) {
    PrCurve curve;
    if (total_gt == 0) {
        // Recall is 1 by convention; every prediction is a false positive.
        curve.ap = entries.empty() ? 1.0 : 0.0;
        curve.points.assign(entries.size(), PrPoint{1.0, 0.0});
        return curve;
    }
    std::stable_sort(entries.begin(), entries.end(),
                     [](const SweepEntry& a, const SweepEntry& b) { return a.score > b.score; });
    std::size_t tp = 0;
    for (std::size_t k = 0; k < entries.size(); ++k) {
        tp += entries[k].tp ? 1 : 0;
        curve.points.push_back({static_cast<double>(tp) / static_cast<double>(total_gt),
                                static_cast<double>(tp) / static_cast<double>(k + 1)});
    }
    curve.ap = interpolated_ap(curve.points);
    return curve;
}

void require_threshold(double t) {
    if (!(t > 0.0 && t <= 1.0)) {
        throw Error(ErrorCode::invalid_input, "IoU threshold must lie in (0, 1]");
    }
}

} // namespace

double iou(const Region& a, const Region& b) {
    if (a.index() != b.index()) {
        throw Error(ErrorCode::invalid_comparison, "cannot compare a box region with a mask region");
    }
    if (const auto* ba = std::get_if<BBox>(&a)) {
        return box_iou(*ba, std::get<BBox>(b));
    }
    return mask_iou(std::get<BinaryMask>(a), std::get<BinaryMask>(b));
}

MatchResult match_detections(const std::vector<ScoredRegion>& preds, const std::vector<Region>& gts, double threshold) {
    require_threshold(threshold);
    MatchResult result;
    result.is_tp.assign(preds.size(), false);
    result.matched_gt.assign(preds.size(), -1);
    std::vector<bool> taken(gts.size(), false);

    for (std::size_t pi : score_order(preds)) {
        int best = -1;
        double best_iou = -1.0;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (taken[g]) {
                continue;
            }
            const double v = iou(preds[pi].region, gts[g]);
            if (v >= threshold && v > best_iou) {
                best = static_cast<int>(g);
                best_iou = v;
            }
        }
        if (best >= 0) {
            taken[static_cast<std::size_t>(best)] = true;
            result.is_tp[pi] = true;
            result.matched_gt[pi] = best;
            ++result.counts.tp;
        } else {
            ++result.counts.fp;
        }
    }
    result.counts.fn = gts.size() - result.counts.tp;
    return result;
}

PrecisionRecall precision_recall(const MatchCounts& c) {
    PrecisionRecall pr;
    if (c.tp + c.fp == 0) {
        pr.precision = c.fn == 0 ? 1.0 : 0.0;
    } else {
        pr.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    }
    if (c.tp + c.fn == 0) {
        pr.recall = 1.0;
    } else {
        pr.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    }
    return pr;
}

PrCurve precision_recall_curve(const std::vector<ScoredRegion>& preds, const std::vector<Region>& gts, double threshold) {
    const MatchResult m = match_detections(preds, gts, threshold);
    std::vector<SweepEntry> entries;
    entries.reserve(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        entries.push_back({preds[i].score, m.is_tp[i]});
    }
    return sweep(std::move(entries), gts.size());
}

double average_precision(const std::vector<ScoredRegion>& preds, const std::vector<Region>& gts, double threshold) {
    return precision_recall_curve(preds, gts, threshold).ap;
}

double average_precision(const std::vector<EvalImage>& images, double threshold) {
    std::vector<SweepEntry> entries;
    std::size_t total_gt = 0;
    for (const EvalImage& img : images) {
        const MatchResult m = match_detections(img.preds, img.gts, threshold);
        for (std::size_t i = 0; i < img.preds.size(); ++i) {
            entries.push_back({img.preds[i].score, m.is_tp[i]});
        }
        total_gt += img.gts.size();
    }
    return sweep(std::move(entries), total_gt).ap;
}

std::array<double, 10> coco_thresholds() {
    std::array<double, 10> t{};
    for (int i = 0; i < 10; ++i) {
        t[static_cast<std::size_t>(i)] = (50 + 5 * i) / 100.0;
    }
    return t;
}

MapMetrics map_metrics(const std::vector<EvalImage>& images) {
    MapMetrics m;
    double sum = 0.0;
    for (double t : coco_thresholds()) {
        const double ap = mean_over_classes({average_precision(images, t)});
        if (t == 0.5) {
            m.map50 = ap;
        }
        sum += ap;
    }
    m.map50_95 = sum / 10.0;
    return m;
}

MapMetrics map_metrics(const std::vector<ScoredRegion>& preds, const std::vector<Region>& gts) {
    return map_metrics(std::vector<EvalImage>{EvalImage{preds, gts}});
}

double mean_over_classes(const std::vector<double>& per_class_ap) {
    if (per_class_ap.empty()) {
        throw Error(ErrorCode::invalid_input, "mean AP needs at least one class");
    }
    return std::accumulate(per_class_ap.begin(), per_class_ap.end(), 0.0) / static_cast<double>(per_class_ap.size());
}

// --- Heads -------------------------------------------------------------------

std::string head_name(Head head) {
    switch (head) {
    case Head::type: return "type";
    case Head::position: return "position";
    case Head::rotation: return "rotation";
    }
    return "unknown";
}

std::array<std::string, 2> head_classes(Head head) {
    switch (head) {
    case Head::type: return {"ENT", "FRAG"};
    case Head::position: return {"TOP", "BOTTOM"};
    case Head::rotation: return {"LEFT", "RIGHT"};
    }
    return {"", ""};
}

std::size_t HeadEval::samples() const {
    return confusion[0][0] + confusion[0][1] + confusion[1][0] + confusion[1][1];
}

HeadEval confusion(Head head, const std::vector<int>& predicted, const std::vector<int>& truth) {
    if (predicted.size() != truth.size()) {
        throw Error(ErrorCode::invalid_input, "prediction and truth label lists differ in length");
    }
    HeadEval ev;
    ev.head = head;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int t = truth[i];
        const int p = predicted[i];
        if ((t != 0 && t != 1) || (p != 0 && p != 1)) {
            throw Error(ErrorCode::invalid_input, "head labels must be 0 or 1");
        }
        ++ev.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    }
    const auto names = head_classes(head);
    for (std::size_t c = 0; c < 2; ++c) {
        const std::size_t o = 1 - c;
        MatchCounts counts;
        counts.tp = ev.confusion[c][c];
        counts.fp = ev.confusion[o][c];
        counts.fn = ev.confusion[c][o];
        const PrecisionRecall pr = precision_recall(counts);
        ev.per_class[c] = ClassMetrics{names[c], pr.precision, pr.recall};
    }
    return ev;
}

double bce(double p, int y) {
    if (y != 0 && y != 1) {
        throw Error(ErrorCode::invalid_input, "BCE target must be 0 or 1");
    }
    const double q = std::clamp(p, bce_epsilon, 1.0 - bce_epsilon);
    return y == 1 ? -std::log(q) : -std::log1p(-q);
}

double combined_loss(const std::array<HeadSample, 3>& heads) {
    return bce(heads[0].p, heads[0].y) + bce(heads[1].p, heads[1].y) + bce(heads[2].p, heads[2].y);
}

} // namespace lens::eval
