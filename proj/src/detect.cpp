#include "lens/detect.hpp"

#include "lens/codec.hpp"
#include "lens/error.hpp"
#include "lens/workspace.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <set>

namespace lens {

namespace {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

[[noreturn]] void fail_at(const std::string& pointer, const std::string& what) {
    throw Error(ErrorCode::parse, (pointer.empty() ? std::string("/") : pointer) + ": " + what);
}

const json& require(const json& obj, const std::string& key, const std::string& ptr) {
    const auto it = obj.find(key);
    if (it == obj.end()) fail_at(ptr, "missing required key '" + key + "'");
    return *it;
}

double number_at(const json& v, const std::string& ptr) {
    if (!v.is_number()) fail_at(ptr, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail_at(ptr, "expected a finite number");
    return d;
}

int int_at(const json& v, const std::string& ptr) {
    if (!v.is_number_integer()) fail_at(ptr, "expected an integer");
    return v.get<int>();
}

Polygon polygon_at(const json& v, const std::string& ptr) {
    if (!v.is_array()) fail_at(ptr, "expected an array of [x, y] pairs");
    std::vector<Point> pts;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string p = ptr + "/" + std::to_string(i);
        if (!v[i].is_array() || v[i].size() != 2) fail_at(p, "expected an [x, y] pair");
        pts.push_back({number_at(v[i][0], p + "/0"), number_at(v[i][1], p + "/1")});
    }
    if (pts.size() < 3) fail_at(ptr, "need at least 3 vertices, got " + std::to_string(pts.size()));
    try {
        return Polygon(std::move(pts));
    } catch (const Error& e) {
        fail_at(ptr, e.what());
    }
}

HeadPrediction heads_at(const json& v, const std::string& ptr) {
    if (!v.is_object()) fail_at(ptr, "expected an object");
    HeadPrediction h;
    h.type_p = number_at(require(v, "type_p", ptr), ptr + "/type_p");
    h.position_p = number_at(require(v, "position_p", ptr), ptr + "/position_p");
    h.rotation_p = number_at(require(v, "rotation_p", ptr), ptr + "/rotation_p");
    const std::string source = v.value("source", "model");
    if (source != "model" && source != "human") fail_at(ptr + "/source", "expected 'model' or 'human'");
    h.source = source == "human" ? HeadPrediction::Source::human : HeadPrediction::Source::model;
    try {
        h.validate();
    } catch (const Error& e) {
        fail_at(ptr, e.what());
    }
    return h;
}

ojson heads_json(const HeadPrediction& h) {
    return {{"type_p", h.type_p},
            {"position_p", h.position_p},
            {"rotation_p", h.rotation_p},
            {"source", h.source == HeadPrediction::Source::human ? "human" : "model"}};
}

ojson polygon_json(const Polygon& poly) {
    ojson arr = ojson::array();
    for (const Point& p : poly.vertices()) arr.push_back({p.x, p.y});
    return arr;
}

InferenceParams params_at(const json& v, const std::string& ptr) {
    if (!v.is_object()) fail_at(ptr, "expected an object");
    InferenceParams p;
    if (v.contains("conf_threshold")) p.conf_threshold = number_at(v["conf_threshold"], ptr + "/conf_threshold");
    if (v.contains("dilation_radius")) p.dilation_radius = int_at(v["dilation_radius"], ptr + "/dilation_radius");
    if (v.contains("fill_holes")) {
        if (!v["fill_holes"].is_boolean()) fail_at(ptr + "/fill_holes", "expected a boolean");
        p.fill_holes = v["fill_holes"].get<bool>();
    }
    if (v.contains("min_area_px") && !v["min_area_px"].is_null()) p.min_area_px = int_at(v["min_area_px"], ptr + "/min_area_px");
    try {
        p.validate();
    } catch (const Error& e) {
        fail_at(ptr, e.what());
    }
    return p;
}

bool in_page(const Polygon& poly, int width, int height) {
    if (width <= 0 || height <= 0) return true;
    const BBox b = poly.bounds();
    return b.x_min >= 0 && b.y_min >= 0 && b.x_max <= width && b.y_max <= height;
}

std::string model_id(int page_no, std::size_t k) { return "p" + std::to_string(page_no) + "_d" + std::to_string(k); }

ModelBackendFactory g_model_factory = nullptr;

} // namespace

std::string to_string(Origin o) {
    switch (o) {
    case Origin::model: return "model";
    case Origin::manual: return "manual";
    case Origin::imported: return "imported";
    }
    return "model";
}

std::string to_string(Review r) {
    switch (r) {
    case Review::unreviewed: return "unreviewed";
    case Review::accepted: return "accepted";
    case Review::edited: return "edited";
    case Review::rejected: return "rejected";
    }
    return "unreviewed";
}

Origin parse_origin(const std::string& s) {
    if (s == "model") return Origin::model;
    if (s == "manual") return Origin::manual;
    if (s == "imported") return Origin::imported;
    throw Error(ErrorCode::invalid_input, "unknown origin '" + s + "'");
}

Review parse_review(const std::string& s) {
    if (s == "unreviewed") return Review::unreviewed;
    if (s == "accepted") return Review::accepted;
    if (s == "edited") return Review::edited;
    if (s == "rejected") return Review::rejected;
    throw Error(ErrorCode::invalid_input, "unknown review state '" + s + "'");
}

std::string to_string(ReviewPatch::Op op) {
    switch (op) {
    case ReviewPatch::Op::accept: return "accept";
    case ReviewPatch::Op::reject: return "reject";
    case ReviewPatch::Op::replace_polygon: return "replace_polygon";
    case ReviewPatch::Op::set_heads: return "set_heads";
    }
    return "accept";
}

void HeadPrediction::validate() const {
    for (double p : {type_p, position_p, rotation_p}) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw Error(ErrorCode::invalid_input, "head probability outside [0,1]");
        }
        if (source == Source::human && p != 0.0 && p != 1.0) {
            throw Error(ErrorCode::invalid_input, "human head labels must be 0 or 1");
        }
    }
}

int InferenceParams::effective_min_area(int dpi) const {
    if (min_area_px) return *min_area_px;
    const double s = static_cast<double>(dpi) / 300.0;
    return static_cast<int>(std::lround(64.0 * s * s));
}

void InferenceParams::validate() const {
    if (!(conf_threshold >= 0.0 && conf_threshold <= 1.0)) {
        throw Error(ErrorCode::invalid_input, "conf_threshold must lie in [0,1]");
    }
    if (dilation_radius < 0) throw Error(ErrorCode::invalid_input, "dilation_radius must be >= 0");
    if (min_area_px && *min_area_px < 0) throw Error(ErrorCode::invalid_input, "min_area_px must be >= 0");
}

const DetectionSet* PredictionFile::find(int page_no) const {
    for (const DetectionSet& s : pages) {
        if (s.page_no == page_no) return &s;
    }
    return nullptr;
}

DetectionSet* PredictionFile::find(int page_no) {
    for (DetectionSet& s : pages) {
        if (s.page_no == page_no) return &s;
    }
    return nullptr;
}

DetectionSet& PredictionFile::get_or_add(int page_no) {
    if (DetectionSet* s = find(page_no)) return *s;
    const auto at = std::lower_bound(pages.begin(), pages.end(), page_no,
                                     [](const DetectionSet& s, int n) { return s.page_no < n; });
    DetectionSet fresh;
    fresh.page_no = page_no;
    return *pages.insert(at, std::move(fresh));
}

std::pair<DetectionSet*, Detection*> PredictionFile::find_detection(const std::string& id) {
    for (DetectionSet& s : pages) {
        for (Detection& d : s.detections) {
            if (d.id == id) return {&s, &d};
        }
    }
    return {nullptr, nullptr};
}

PredictionFile parse_predictions(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::parse, std::string("/: invalid JSON: ") + e.what());
    }
    if (!root.is_object()) fail_at("", "expected an object");
    if (int_at(require(root, "schema", ""), "/schema") != 1) fail_at("/schema", "unsupported schema version");
    const json& pages = require(root, "pages", "");
    if (!pages.is_array()) fail_at("/pages", "expected an array");

    PredictionFile file;
    std::set<std::string> ids;
    std::set<int> page_numbers;
    for (std::size_t pi = 0; pi < pages.size(); ++pi) {
        const std::string pp = "/pages/" + std::to_string(pi);
        const json& jp = pages[pi];
        if (!jp.is_object()) fail_at(pp, "expected an object");
        DetectionSet set;
        set.page_no = int_at(require(jp, "page_no", pp), pp + "/page_no");
        if (set.page_no < 1) fail_at(pp + "/page_no", "page numbers start at 1");
        if (!page_numbers.insert(set.page_no).second) fail_at(pp + "/page_no", "duplicate page");
        if (jp.contains("version")) set.version = int_at(jp["version"], pp + "/version");
        if (jp.contains("width")) set.width = int_at(jp["width"], pp + "/width");
        if (jp.contains("height")) set.height = int_at(jp["height"], pp + "/height");
        if (jp.contains("params")) set.params = params_at(jp["params"], pp + "/params");
        if (jp.contains("backend_id")) {
            if (!jp["backend_id"].is_string()) fail_at(pp + "/backend_id", "expected a string");
            set.backend_id = jp["backend_id"].get<std::string>();
        }
        const json& dets = require(jp, "detections", pp);
        if (!dets.is_array()) fail_at(pp + "/detections", "expected an array");
        for (std::size_t di = 0; di < dets.size(); ++di) {
            const std::string dp = pp + "/detections/" + std::to_string(di);
            const json& jd = dets[di];
            if (!jd.is_object()) fail_at(dp, "expected an object");
            Detection d;
            d.page_no = set.page_no;
            d.polygon = polygon_at(require(jd, "polygon", dp), dp + "/polygon");
            d.bbox = tight_bbox(d.polygon);
            d.score = number_at(require(jd, "score", dp), dp + "/score");
            if (d.score < 0.0 || d.score > 1.0) fail_at(dp + "/score", "score must lie in [0,1]");
            if (jd.contains("id")) {
                if (!jd["id"].is_string() || jd["id"].get<std::string>().empty()) fail_at(dp + "/id", "expected a non-empty string");
                d.id = jd["id"].get<std::string>();
            } else {
                d.id = model_id(set.page_no, di + 1);
            }
            if (!ids.insert(d.id).second) fail_at(dp + "/id", "duplicate detection id '" + d.id + "'");
            try {
                if (jd.contains("origin")) d.origin = parse_origin(jd["origin"].get<std::string>());
            } catch (const std::exception& e) {
                fail_at(dp + "/origin", e.what());
            }
            try {
                if (jd.contains("review")) d.review = parse_review(jd["review"].get<std::string>());
            } catch (const std::exception& e) {
                fail_at(dp + "/review", e.what());
            }
            if (d.origin == Origin::manual && d.score != 1.0) fail_at(dp + "/score", "manual detections must have score 1");
            if (jd.contains("heads") && !jd["heads"].is_null()) d.heads = heads_at(jd["heads"], dp + "/heads");
            set.detections.push_back(std::move(d));
        }
        file.pages.push_back(std::move(set));
    }
    std::sort(file.pages.begin(), file.pages.end(), [](const DetectionSet& a, const DetectionSet& b) {
        return a.page_no < b.page_no;
    });
    return file;
}

PredictionFile read_predictions(const std::filesystem::path& path) {
    try {
        return parse_predictions(read_text(path));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::parse) throw Error(ErrorCode::parse, path.string() + ": " + e.what());
        throw;
    }
}

std::string to_json(const PredictionFile& file) {
    ojson root;
    root["schema"] = 1;
    ojson pages = ojson::array();
    for (const DetectionSet& s : file.pages) {
        ojson jp;
        jp["page_no"] = s.page_no;
        jp["version"] = s.version;
        if (s.width > 0) jp["width"] = s.width;
        if (s.height > 0) jp["height"] = s.height;
        if (!s.backend_id.empty()) jp["backend_id"] = s.backend_id;
        if (s.params) {
            ojson p;
            p["conf_threshold"] = s.params->conf_threshold;
            p["dilation_radius"] = s.params->dilation_radius;
            p["fill_holes"] = s.params->fill_holes;
            if (s.params->min_area_px) p["min_area_px"] = *s.params->min_area_px;
            else p["min_area_px"] = nullptr;
            jp["params"] = std::move(p);
        }
        ojson dets = ojson::array();
        for (const Detection& d : s.detections) {
            ojson jd;
            jd["id"] = d.id;
            jd["score"] = d.score;
            jd["polygon"] = polygon_json(d.polygon);
            jd["bbox"] = {d.bbox.x_min, d.bbox.y_min, d.bbox.x_max, d.bbox.y_max};
            jd["origin"] = to_string(d.origin);
            jd["review"] = to_string(d.review);
            if (d.heads) jd["heads"] = heads_json(*d.heads);
            dets.push_back(std::move(jd));
        }
        jp["detections"] = std::move(dets);
        pages.push_back(std::move(jp));
    }
    root["pages"] = std::move(pages);
    return root.dump(2) + "\n";
}

void write_predictions(const std::filesystem::path& path, const PredictionFile& file) {
    write_file_atomic(path, to_json(file));
}

OracleBackend::OracleBackend(PredictionFile predictions, std::string source)
    : predictions_(std::move(predictions)), source_(std::move(source)) {}

std::vector<RawInstance> OracleBackend::infer(const RasterImage& page, int page_no) const {
    std::vector<RawInstance> out;
    const DetectionSet* set = predictions_.find(page_no);
    if (set == nullptr) return out;
    for (const Detection& d : set->detections) {
        out.push_back({rasterize_polygon(d.polygon, page.width(), page.height()), d.score});
    }
    return out;
}

std::unique_ptr<DetectionBackend> load_oracle_predictions(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw Error(ErrorCode::backend_unavailable, "oracle file " + path.string() + " does not exist");
    }
    return std::make_unique<OracleBackend>(read_predictions(path), path.filename().string());
}

void set_model_backend_factory(ModelBackendFactory factory) { g_model_factory = factory; }

std::unique_ptr<DetectionBackend> make_backend(const std::string& spec) {
    if (spec.rfind("oracle:", 0) == 0) return load_oracle_predictions(spec.substr(7));
    if (spec.rfind("model:", 0) == 0) {
        if (g_model_factory == nullptr) {
            throw Error(ErrorCode::backend_unavailable, "this build has no model runtime");
        }
        return g_model_factory(spec.substr(6));
    }
    throw Error(ErrorCode::invalid_input, "unknown backend '" + spec + "' (expected oracle:<file> or model:<file>)");
}

DetectionSet postprocess(const std::vector<RawInstance>& raw, int page_no, int dpi, const InferenceParams& params) {
    params.validate();
    DetectionSet set;
    set.page_no = page_no;
    set.params = params;
    const auto min_area = static_cast<std::size_t>(params.effective_min_area(dpi));
    for (const RawInstance& inst : raw) {
        if (!(inst.score >= params.conf_threshold)) continue;
        if (!(inst.score <= 1.0)) {
            throw Error(ErrorCode::detection, "page " + std::to_string(page_no) + ": backend score outside [0,1]");
        }
        set.width = inst.mask.width();
        set.height = inst.mask.height();
        BinaryMask mask = params.fill_holes ? fill_holes(inst.mask) : inst.mask;
        mask = dilate(mask, params.dilation_radius);
        for (const BinaryMask& comp : connected_components(mask, Connectivity::eight)) {
            if (comp.count() < min_area || comp.count() == 0) continue;
            Detection d;
            d.page_no = page_no;
            d.polygon = trace_contour(comp);
            d.bbox = tight_bbox(d.polygon);
            d.score = inst.score;
            d.id = model_id(page_no, set.detections.size() + 1);
            set.detections.push_back(std::move(d));
        }
    }
    return set;
}

DetectionSet run_detection(const RasterImage& image, int page_no, int dpi, const DetectionBackend& backend,
                           const InferenceParams& params) {
    params.validate();
    std::vector<RawInstance> raw;
    try {
        raw = backend.infer(image, page_no);
    } catch (const std::exception& e) {
        throw Error(ErrorCode::detection,
                    "page " + std::to_string(page_no) + ": backend " + backend.id() + " failed: " + e.what());
    }
    for (const RawInstance& r : raw) {
        if (r.mask.width() != image.width() || r.mask.height() != image.height()) {
            throw Error(ErrorCode::detection, "page " + std::to_string(page_no) + ": backend " + backend.id() +
                                                  " returned a mask of the wrong size");
        }
    }
    DetectionSet set = postprocess(raw, page_no, dpi, params);
    set.width = image.width();
    set.height = image.height();
    set.backend_id = backend.id();
    return set;
}

DetectionSet run_detection(const Project& project, int page_no, const DetectionBackend& backend,
                           const InferenceParams& params) {
    const PageImage& page = project.page(page_no);
    RasterImage image;
    try {
        image = read_png(project.dir / page.file);
    } catch (const Error& e) {
        throw Error(ErrorCode::detection, "page " + std::to_string(page_no) + ": " + e.what());
    }
    return run_detection(image, page_no, page.dpi, backend, params);
}

std::vector<ReviewPatch> parse_review_patches(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw PatchRejected({{0, "", std::string("invalid JSON: ") + e.what()}});
    }
    if (root.is_object() && root.contains("patches")) root = root["patches"];
    if (!root.is_array()) throw PatchRejected({{0, "", "expected an array of patches"}});
    std::vector<ReviewPatch> out;
    std::vector<PatchIssue> issues;
    for (std::size_t i = 0; i < root.size(); ++i) {
        const json& jp = root[i];
        const std::string ptr = "/" + std::to_string(i);
        ReviewPatch p;
        try {
            if (!jp.is_object()) fail_at(ptr, "expected an object");
            const json& id = require(jp, "detection_id", ptr);
            if (!id.is_string()) fail_at(ptr + "/detection_id", "expected a string");
            p.detection_id = id.get<std::string>();
            const json& op = require(jp, "op", ptr);
            const std::string ops = op.is_string() ? op.get<std::string>() : "";
            if (ops == "accept") p.op = ReviewPatch::Op::accept;
            else if (ops == "reject") p.op = ReviewPatch::Op::reject;
            else if (ops == "replace_polygon") p.op = ReviewPatch::Op::replace_polygon;
            else if (ops == "set_heads") p.op = ReviewPatch::Op::set_heads;
            else fail_at(ptr + "/op", "expected accept, reject, replace_polygon or set_heads");
            if (p.op == ReviewPatch::Op::replace_polygon) p.polygon = polygon_at(require(jp, "polygon", ptr), ptr + "/polygon");
            if (p.op == ReviewPatch::Op::set_heads) p.heads = heads_at(require(jp, "heads", ptr), ptr + "/heads");
            if (jp.contains("version") && !jp["version"].is_null()) p.version = int_at(jp["version"], ptr + "/version");
            out.push_back(std::move(p));
        } catch (const Error& e) {
            issues.push_back({i, p.detection_id, e.what()});
        }
    }
    if (!issues.empty()) throw PatchRejected(std::move(issues));
    return out;
}

PatchRejected::PatchRejected(std::vector<PatchIssue> issues)
    : Error(ErrorCode::invalid_input,
            std::to_string(issues.size()) + " invalid patch(es)" + (issues.empty() ? "" : ": " + issues.front().message)),
      issues_(std::move(issues)) {}

VersionConflict::VersionConflict(int page_no, int current_version)
    : Error(ErrorCode::conflict, "page " + std::to_string(page_no) + " changed; current version " +
                                     std::to_string(current_version)),
      page_no_(page_no),
      current_version_(current_version) {}


DetectionStore::DetectionStore(std::filesystem::path project_dir)
    : dir_(std::move(project_dir)), mutex_(workspace::path_lock(dir_, "detections")) {}

PredictionFile DetectionStore::snapshot() const {
    std::lock_guard lock(*mutex_);
    const auto path = workspace::detections_path(dir_);
    if (!std::filesystem::exists(path)) return {};
    return read_predictions(path);
}

DetectionSet DetectionStore::page(int page_no) const {
    const PredictionFile file = snapshot();
    if (const DetectionSet* s = file.find(page_no)) return *s;
    DetectionSet empty;
    empty.page_no = page_no;
    return empty;
}

DetectionSet DetectionStore::store_run(DetectionSet run) {
    std::lock_guard lock(*mutex_);
    const auto path = workspace::detections_path(dir_);
    PredictionFile file = std::filesystem::exists(path) ? read_predictions(path) : PredictionFile{};
    DetectionSet& target = file.get_or_add(run.page_no);
    std::vector<Detection> kept;
    for (Detection& d : target.detections) {
        if (d.origin == Origin::manual) kept.push_back(std::move(d));
    }
    std::vector<Detection> merged;
    for (std::size_t k = 0; k < run.detections.size(); ++k) {
        Detection d = std::move(run.detections[k]);
        d.id = model_id(run.page_no, k + 1);
        d.page_no = run.page_no;
        merged.push_back(std::move(d));
    }
    for (Detection& d : kept) merged.push_back(std::move(d));
    run.detections = std::move(merged);
    run.version = target.version + 1;
    target = std::move(run);
    write_predictions(path, file);
    return target;
}

Detection DetectionStore::upsert_manual(int page_no, int page_width, int page_height, const Polygon& polygon) {
    if (!in_page(polygon, page_width, page_height)) {
        throw Error(ErrorCode::invalid_geometry, "manual polygon leaves page " + std::to_string(page_no));
    }
    std::lock_guard lock(*mutex_);
    const auto path = workspace::detections_path(dir_);
    PredictionFile file = std::filesystem::exists(path) ? read_predictions(path) : PredictionFile{};
    DetectionSet& set = file.get_or_add(page_no);
    if (set.width == 0) {
        set.width = page_width;
        set.height = page_height;
    }
    const std::string prefix = "p" + std::to_string(page_no) + "_m";
    int next = 1;
    for (const Detection& d : set.detections) {
        if (d.id.rfind(prefix, 0) == 0) {
            try {
                next = std::max(next, std::stoi(d.id.substr(prefix.size())) + 1);
            } catch (const std::exception&) {
            }
        }
    }
    Detection d;
    d.id = prefix + std::to_string(next);
    d.page_no = page_no;
    d.polygon = polygon;
    d.bbox = tight_bbox(polygon);
    d.score = 1.0;
    d.origin = Origin::manual;
    d.review = Review::edited;
    set.detections.push_back(d);
    ++set.version;
    write_predictions(path, file);
    return d;
}

void DetectionStore::remove(const std::string& detection_id) {
    std::lock_guard lock(*mutex_);
    const auto path = workspace::detections_path(dir_);
    PredictionFile file = std::filesystem::exists(path) ? read_predictions(path) : PredictionFile{};
    auto [set, det] = file.find_detection(detection_id);
    if (det == nullptr) throw Error(ErrorCode::not_found, "detection " + detection_id + " not found");
    auto& v = set->detections;
    v.erase(std::remove_if(v.begin(), v.end(), [&](const Detection& d) { return d.id == detection_id; }), v.end());
    ++set->version;
    write_predictions(path, file);
}

PatchResult DetectionStore::apply(const std::vector<ReviewPatch>& patches) {
    std::lock_guard lock(*mutex_);
    const auto path = workspace::detections_path(dir_);
    PredictionFile file = std::filesystem::exists(path) ? read_predictions(path) : PredictionFile{};

    std::vector<PatchIssue> issues;
    for (std::size_t i = 0; i < patches.size(); ++i) {
        const ReviewPatch& p = patches[i];
        auto [set, det] = file.find_detection(p.detection_id);
        if (det == nullptr) {
            issues.push_back({i, p.detection_id, "unknown detection"});
            continue;
        }
        if (p.op == ReviewPatch::Op::replace_polygon) {
            if (!p.polygon) issues.push_back({i, p.detection_id, "replace_polygon needs a polygon"});
            else if (!in_page(*p.polygon, set->width, set->height)) issues.push_back({i, p.detection_id, "polygon leaves the page"});
        }
        if (p.op == ReviewPatch::Op::set_heads) {
            if (!p.heads) {
                issues.push_back({i, p.detection_id, "set_heads needs heads"});
            } else {
                try {
                    p.heads->validate();
                } catch (const Error& e) {
                    issues.push_back({i, p.detection_id, e.what()});
                }
            }
        }
    }
    if (!issues.empty()) throw PatchRejected(std::move(issues));

    for (const ReviewPatch& p : patches) {
        auto [set, det] = file.find_detection(p.detection_id);
        if (p.version && *p.version != set->version) throw VersionConflict(set->page_no, set->version);
    }

    PatchResult result;
    std::set<int> touched;
    for (const ReviewPatch& p : patches) {
        auto [set, det] = file.find_detection(p.detection_id);
        switch (p.op) {
        case ReviewPatch::Op::accept: det->review = Review::accepted; break;
        case ReviewPatch::Op::reject: det->review = Review::rejected; break;
        case ReviewPatch::Op::replace_polygon:
            det->polygon = *p.polygon;
            det->bbox = tight_bbox(det->polygon);
            det->review = Review::edited;
            break;
        case ReviewPatch::Op::set_heads: det->heads = *p.heads; break;
        }
        touched.insert(set->page_no);
        ++result.applied;
    }
    for (int page_no : touched) {
        DetectionSet* set = file.find(page_no);
        ++set->version;
        result.versions[page_no] = set->version;
    }
    if (!touched.empty()) write_predictions(path, file);
    return result;
}

} // namespace lens
