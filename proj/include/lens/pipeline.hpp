/**
 * @file pipeline.hpp
 * @brief Project-level workflow steps shared by the CLI and the HTTP service.
 *
 * Every state change the service performs goes through one of these calls, so
 * a CLI invocation with the same arguments leaves identical files on disk.
 */
#pragma once

#include "lens/cards.hpp"
#include "lens/detect.hpp"
#include "lens/evalmetrics.hpp"
#include "lens/ingest.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace lens::pipeline {

using Progress = std::function<void(double)>;

struct DetectOptions {
    /// "oracle:<file>" or "model:<file>".
    std::string backend;
    InferenceParams params;
    /// Pages to process; empty means all.
    std::vector<int> pages;
    int workers = 0;
    Progress progress;
};

struct DetectSummary {
    int pages = 0;
    std::size_t detections = 0;
    std::string backend_id;
};

/// Runs a backend over the selected pages and stores each page's result, keeping manual detections.
DetectSummary detect_project(const Project& project, const DetectionBackend& backend, const DetectOptions& options);
/// Builds the backend from options.backend first.
DetectSummary detect_project(const Project& project, const DetectOptions& options);

struct ReviewSelection {
    /// Explicit detection ids; when empty, every detection on the selected pages.
    std::vector<std::string> ids;
    std::vector<int> pages;
    /// Only detections scoring at least this much (bulk selections only).
    double min_score = 0.0;
    /// Leave detections that already carry a review decision untouched (bulk selections only).
    bool only_unreviewed = false;
};

/// Applies one accept or reject patch per selected detection in a single atomic batch.
PatchResult review(const std::filesystem::path& project_dir, ReviewPatch::Op op, const ReviewSelection& selection);

/// Extraction followed by canonicalization and a catalog sync, as run by the "extract" job.
std::vector<InstanceCard> extract_all(const Project& project, const ExtractOptions& options, bool canonicalize,
                                      double threshold = default_head_threshold);

enum class RegionMode { box, mask };
RegionMode parse_region_mode(const std::string& s);

struct DetectionEval {
    double map50 = 0;
    double map50_95 = 0;
    /// At IoU 0.5 over all pages.
    double precision = 0;
    double recall = 0;
    eval::MatchCounts counts;
};

/**
 * Compares two prediction files page by page (pages missing on one side count
 * as empty). Rejected detections are skipped on both sides and ground-truth
 * scores are ignored. Mask mode rasterizes polygons at the page size
 * recorded in either file, or at the extent of all polygons when unknown.
 */
DetectionEval evaluate_detections(const PredictionFile& pred, const PredictionFile& gt, RegionMode mode);

/// Metrics JSON with 6 decimals: {"map50", "map50_95", "precision", "recall", "tp", "fp", "fn"}.
std::string to_json(const DetectionEval& e);

/**
 * Head label table: header "id,type,position,rotation"; cells are class names
 * (ENT/FRAG, TOP/BOTTOM, LEFT/RIGHT) or probabilities of the second class,
 * thresholded at 0.5.
 */
struct HeadTable {
    std::vector<std::string> ids;
    /// labels[head][row] as class indices.
    std::array<std::vector<int>, 3> labels;
};

HeadTable parse_head_table(const std::string& csv);

/// Joins by id (every prediction id must exist in the truth table) and evaluates all three heads.
std::array<eval::HeadEval, 3> evaluate_heads(const HeadTable& pred, const HeadTable& truth);
std::string to_json(const std::array<eval::HeadEval, 3>& heads);

struct ProjectSummary {
    std::string id;
    int pages = 0;
    int dpi = 0;
    std::string created_at;
    std::size_t detections = 0;
    std::size_t accepted = 0;
    std::size_t cards = 0;
};

ProjectSummary summarize(const Project& project);

/// Projects under @p root with a readable manifest, sorted by id.
std::vector<ProjectSummary> list_projects(const std::filesystem::path& root);

} // namespace lens::pipeline
