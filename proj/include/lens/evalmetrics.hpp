/**
 * @file evalmetrics.hpp
 * @brief Detection and classifier evaluation: IoU, greedy matching,
 *        precision/recall, COCO-style AP and mAP, confusion matrices, BCE.
 */
#pragma once

#include "lens/imagecore.hpp"

#include <array>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

namespace lens::eval {

/// Either a continuous box or a pixel mask. The two kinds are never compared with each other.
using Region = std::variant<BBox, BinaryMask>;

/// |A ∩ B| / |A ∪ B|; two empty regions give 1.0. Mixed kinds throw invalid_comparison.
double iou(const Region& a, const Region& b);

struct ScoredRegion {
    Region region;
    double score = 0.0;
};

struct MatchCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
};

struct MatchResult {
    MatchCounts counts;
    /// Indexed like the input predictions.
    std::vector<bool> is_tp;
    /// Ground-truth index per prediction, or -1 for false positives.
    std::vector<int> matched_gt;
};

/**
 * Greedy one-to-one matching. Predictions are visited by descending score
 * (ties keep input order); each takes the unmatched ground truth with the
 * highest IoU (ties: lowest index) provided that IoU >= threshold.
 */
MatchResult match_detections(const std::vector<ScoredRegion>& preds, const std::vector<Region>& gts, double threshold);

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
};

/// Zero-denominator conventions: no predictions gives precision 1 when FN = 0 else 0; no ground truth gives recall 1.
PrecisionRecall precision_recall(const MatchCounts& c);

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;
};

struct PrCurve {
    /// One operating point per prediction prefix, in descending-score order.
    std::vector<PrPoint> points;
    double ap = 0.0;
};

/// Sweeps predictions by descending score and interpolates AP at 101 recall levels 0.00..1.00.
PrCurve precision_recall_curve(const std::vector<ScoredRegion>& preds, const std::vector<Region>& gts, double threshold);

/// AP in [0,1]. No ground truth: 0 when there are predictions, 1 for an empty scene.
double average_precision(const std::vector<ScoredRegion>& preds, const std::vector<Region>& gts, double threshold);

/// One image (page) worth of predictions and ground truth.
struct EvalImage {
    std::vector<ScoredRegion> preds;
    std::vector<Region> gts;
};

/// AP over several images: matching is per image, the score sweep is global.
double average_precision(const std::vector<EvalImage>& images, double threshold);

/// The ten IoU thresholds 0.50, 0.55, ..., 0.95.
std::array<double, 10> coco_thresholds();

struct MapMetrics {
    double map50 = 0.0;
    double map50_95 = 0.0;
};

MapMetrics map_metrics(const std::vector<ScoredRegion>& preds, const std::vector<Region>& gts);
MapMetrics map_metrics(const std::vector<EvalImage>& images);

/// Mean of per-class APs (the single-class system always passes one value).
double mean_over_classes(const std::vector<double>& per_class_ap);

// --- Classifier heads --------------------------------------------------------

enum class Head { type, position, rotation };

std::string head_name(Head head);
/// Class names for a head; index 1 is the label the head's probability refers to (FRAG, BOTTOM, RIGHT).
std::array<std::string, 2> head_classes(Head head);

struct ClassMetrics {
    std::string name;
    double precision = 0.0;
    double recall = 0.0;
};

struct HeadEval {
    Head head = Head::type;
    /// confusion[truth][predicted], class order as head_classes().
    std::array<std::array<std::size_t, 2>, 2> confusion{};
    std::array<ClassMetrics, 2> per_class;
    std::size_t samples() const;
};

/// Labels are class indices (0 or 1). Throws invalid_input on length mismatch or labels outside {0,1}.
HeadEval confusion(Head head, const std::vector<int>& predicted, const std::vector<int>& truth);

// --- Losses ------------------------------------------------------------------

inline constexpr double bce_epsilon = 1e-7;

/// -[y ln p + (1-y) ln(1-p)] with p clipped to [eps, 1-eps].
double bce(double p, int y);

struct HeadSample {
    double p = 0.5;
    int y = 0;
};

/// Unweighted sum of the three head losses.
double combined_loss(const std::array<HeadSample, 3>& heads);

} // namespace lens::eval
