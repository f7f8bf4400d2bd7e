/**
 * @file detect.hpp
 * @brief Detection records, backend contract, post-processing and persistence.
 */
#pragma once

#include "lens/error.hpp"
#include "lens/imagecore.hpp"
#include "lens/ingest.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace lens {

enum class Origin { model, manual, imported };
enum class Review { unreviewed, accepted, edited, rejected };

std::string to_string(Origin o);
std::string to_string(Review r);
Origin parse_origin(const std::string& s);
Review parse_review(const std::string& s);

/// Accepted and edited detections are the ones carried downstream.
inline bool is_accepted(Review r) { return r == Review::accepted || r == Review::edited; }

/// Probabilities of the positive label of each classification head.
struct HeadPrediction {
    enum class Source { model, human };
    /// P(FRAG)
    double type_p = 0.0;
    /// P(BOTTOM)
    double position_p = 0.0;
    /// P(RIGHT)
    double rotation_p = 0.0;
    Source source = Source::model;

    /// Throws invalid_input for probabilities outside [0,1] or non-binary human values.
    void validate() const;
    friend bool operator==(const HeadPrediction&, const HeadPrediction&) = default;
};

struct Detection {
    std::string id;
    int page_no = 0;
    Polygon polygon{{{0, 0}, {1, 0}, {0, 1}}};
    BBox bbox;
    double score = 0.0;
    Origin origin = Origin::model;
    Review review = Review::unreviewed;
    std::optional<HeadPrediction> heads;
};

struct InferenceParams {
    double conf_threshold = 0.25;
    int dilation_radius = 0;
    bool fill_holes = false;
    /// Unset means 64 px scaled by (dpi/300)^2.
    std::optional<int> min_area_px;

    int effective_min_area(int dpi) const;
    /// Throws invalid_input for out-of-range fields.
    void validate() const;
};

struct DetectionSet {
    int page_no = 0;
    /// Optimistic-concurrency token, bumped on every mutation of the page.
    int version = 0;
    /// Page size in pixels; 0 when unknown (e.g. hand-written oracle files).
    int width = 0;
    int height = 0;
    std::vector<Detection> detections;
    std::optional<InferenceParams> params;
    std::string backend_id;
};

/// Contents of a prediction JSON file.
struct PredictionFile {
    std::vector<DetectionSet> pages;

    const DetectionSet* find(int page_no) const;
    DetectionSet* find(int page_no);
    DetectionSet& get_or_add(int page_no);
    /// Locates a detection by id across pages.
    std::pair<DetectionSet*, Detection*> find_detection(const std::string& id);
};

/**
 * Parses the prediction JSON schema. Violations raise parse errors whose
 * message starts with the JSON pointer of the offending node, e.g.
 * "/pages/0/detections/1/polygon: need at least 3 vertices".
 */
PredictionFile parse_predictions(const std::string& text);
PredictionFile read_predictions(const std::filesystem::path& path);
std::string to_json(const PredictionFile& file);
void write_predictions(const std::filesystem::path& path, const PredictionFile& file);

/// One instance as produced by a backend, before filtering and post-processing.
struct RawInstance {
    BinaryMask mask;
    double score = 0.0;
};

/**
 * Data-only backend contract: page pixels in, instance masks and scores out.
 * infer() must be safe to call concurrently.
 */
class DetectionBackend {
public:
    virtual ~DetectionBackend() = default;
    virtual std::string id() const = 0;
    virtual std::vector<RawInstance> infer(const RasterImage& page, int page_no) const = 0;
};

/// Serves stored polygons and scores from a prediction JSON file.
class OracleBackend final : public DetectionBackend {
public:
    explicit OracleBackend(PredictionFile predictions, std::string source = "memory");
    std::string id() const override { return "oracle:" + source_; }
    std::vector<RawInstance> infer(const RasterImage& page, int page_no) const override;
    const PredictionFile& predictions() const { return predictions_; }

private:
    PredictionFile predictions_;
    std::string source_;
};

/// Loads an oracle backend; schema violations raise parse errors with a JSON pointer.
std::unique_ptr<DetectionBackend> load_oracle_predictions(const std::filesystem::path& path);

using ModelBackendFactory = std::unique_ptr<DetectionBackend> (*)(const std::filesystem::path& model_file);

/// Installs the loader used for "model:" specs (see lens/model_backend.hpp).
void set_model_backend_factory(ModelBackendFactory factory);

/**
 * "oracle:<file>" or "model:<file>". Without an installed model factory the
 * model form raises backend_unavailable.
 */
std::unique_ptr<DetectionBackend> make_backend(const std::string& spec);

/**
 * Filters raw instances by score, then per instance: fill holes (optional),
 * dilate, split into 8-connected components and drop those below the minimum
 * area. Each surviving component becomes one detection with a re-traced
 * polygon and ids p{page}_d{k} in order of appearance.
 */
DetectionSet postprocess(const std::vector<RawInstance>& raw, int page_no, int dpi, const InferenceParams& params);

/// Runs the backend on one page image and post-processes the result.
DetectionSet run_detection(const RasterImage& image, int page_no, int dpi, const DetectionBackend& backend,
                           const InferenceParams& params);
DetectionSet run_detection(const Project& project, int page_no, const DetectionBackend& backend,
                           const InferenceParams& params);

/// Review operation sent by the UI or the CLI.
struct ReviewPatch {
    enum class Op { accept, reject, replace_polygon, set_heads };
    std::string detection_id;
    Op op = Op::accept;
    std::optional<Polygon> polygon;
    std::optional<HeadPrediction> heads;
    /// Version of the page the client edited; unset skips the check.
    std::optional<int> version;
};

std::string to_string(ReviewPatch::Op op);

struct PatchIssue {
    std::size_t index = 0;
    std::string detection_id;
    std::string message;
};

/// Invalid patch batch (HTTP 422); nothing was applied.
class PatchRejected : public Error {
public:
    explicit PatchRejected(std::vector<PatchIssue> issues);
    const std::vector<PatchIssue>& issues() const { return issues_; }

private:
    std::vector<PatchIssue> issues_;
};

/// Stale version token (HTTP 409); nothing was applied.
class VersionConflict : public Error {
public:
    VersionConflict(int page_no, int current_version);
    int page_no() const { return page_no_; }
    int current_version() const { return current_version_; }

private:
    int page_no_;
    int current_version_;
};

/**
 * Parses a JSON array of patches (or {"patches": [...]}) of the form
 * {"detection_id", "op", "polygon"?, "heads"?, "version"?}. Malformed items
 * raise PatchRejected listing every bad item.
 */
std::vector<ReviewPatch> parse_review_patches(const std::string& text);

struct PatchResult {
    std::size_t applied = 0;
    /// New version per touched page.
    std::map<int, int> versions;
};

/**
 * Serialized access to a project's detections/predictions.json. All
 * instances opened on the same directory within a process share one lock, so
 * concurrent mutations are applied one at a time and each is written
 * atomically.
 */
class DetectionStore {
public:
    explicit DetectionStore(std::filesystem::path project_dir);

    PredictionFile snapshot() const;
    /// Empty set (version 0) for pages without detections.
    DetectionSet page(int page_no) const;

    /// Replaces the page's model detections with @p run, keeping manual ones. Returns the stored set.
    DetectionSet store_run(DetectionSet run);

    /**
     * Adds a manual detection (origin manual, score 1, review edited).
     * Throws invalid_geometry when the polygon leaves the page.
     */
    Detection upsert_manual(int page_no, int page_width, int page_height, const Polygon& polygon);

    /// Removes a detection. Throws not_found for an unknown id.
    void remove(const std::string& detection_id);

    /**
     * Validates every patch, then checks version tokens, then applies all of
     * them. Throws PatchRejected or VersionConflict without writing anything.
     */
    PatchResult apply(const std::vector<ReviewPatch>& patches);

private:
    std::filesystem::path dir_;
    std::shared_ptr<std::mutex> mutex_;
};

} // namespace lens
