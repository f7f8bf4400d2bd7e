#include "lens/pipeline.hpp"

#include "lens/codec.hpp"
#include "lens/error.hpp"
#include "lens/parallel.hpp"
#include "lens/workspace.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <set>

namespace lens::pipeline {

namespace {

std::vector<int> selected_pages(const Project& project, const std::vector<int>& pages) {
    if (pages.empty()) {
        std::vector<int> all;
        for (const PageImage& p : project.pages) all.push_back(p.page_no);
        return all;
    }
    std::vector<int> out(pages);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    for (int p : out) project.page(p);
    return out;
}

double round6(double v) { return std::round(v * 1e6) / 1e6; }

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        const auto b = cell.find_first_not_of(" \t");
        const auto e = cell.find_last_not_of(" \t");
        out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

int head_label(eval::Head head, const std::string& cell, const std::string& where) {
    const auto classes = eval::head_classes(head);
    std::string upper = cell;
    std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (upper == classes[0]) return 0;
    if (upper == classes[1]) return 1;
    char* end = nullptr;
    errno = 0;
    const double p = std::strtod(cell.c_str(), &end);
    if (cell.empty() || end != cell.c_str() + cell.size() || errno != 0 || !(p >= 0.0 && p <= 1.0)) {
        throw Error(ErrorCode::parse, where + ": '" + cell + "' is neither " + classes[0] + "/" + classes[1] +
                                          " nor a probability");
    }
    return p >= default_head_threshold ? 1 : 0;
}

} // namespace

DetectSummary detect_project(const Project& project, const DetectionBackend& backend, const DetectOptions& options) {
    options.params.validate();
    const std::vector<int> pages = selected_pages(project, options.pages);
    DetectionStore store(project.dir);
    std::atomic<std::size_t> total{0};
    std::atomic<std::size_t> done{0};
    std::mutex progress_mu;
    parallel_for(pages.size(), options.workers, [&](std::size_t i) {
        DetectionSet set = run_detection(project, pages[i], backend, options.params);
        total += set.detections.size();
        store.store_run(std::move(set));
        const std::size_t n = ++done;
        if (options.progress) {
            std::lock_guard lock(progress_mu);
            options.progress(static_cast<double>(n) / static_cast<double>(pages.size()));
        }
    });
    return {static_cast<int>(pages.size()), total.load(), backend.id()};
}

DetectSummary detect_project(const Project& project, const DetectOptions& options) {
    const auto backend = make_backend(options.backend);
    return detect_project(project, *backend, options);
}

PatchResult review(const std::filesystem::path& project_dir, ReviewPatch::Op op, const ReviewSelection& selection) {
    if (op != ReviewPatch::Op::accept && op != ReviewPatch::Op::reject) {
        throw Error(ErrorCode::invalid_input, "bulk review supports accept and reject only");
    }
    DetectionStore store(project_dir);
    std::vector<ReviewPatch> patches;
    if (!selection.ids.empty()) {
        for (const std::string& id : selection.ids) patches.push_back({id, op, std::nullopt, std::nullopt, std::nullopt});
    } else {
        const std::set<int> pages(selection.pages.begin(), selection.pages.end());
        const PredictionFile file = store.snapshot();
        for (const DetectionSet& set : file.pages) {
            if (!pages.empty() && pages.count(set.page_no) == 0) continue;
            for (const Detection& d : set.detections) {
                if (d.score < selection.min_score) continue;
                if (selection.only_unreviewed && d.review != Review::unreviewed) continue;
                // Pin each patch to the version we selected from so a concurrent edit is not overwritten.
                patches.push_back({d.id, op, std::nullopt, std::nullopt, set.version});
            }
        }
    }
    if (patches.empty()) return {};
    return store.apply(patches);
}

std::vector<InstanceCard> extract_all(const Project& project, const ExtractOptions& options, bool canonicalize,
                                      double threshold) {
    std::vector<InstanceCard> cards = extract_cards(project, options);
    if (canonicalize) cards = canonicalize_cards(project, threshold);
    sync_catalog(project.dir);
    return load_cards(project.dir);
}

RegionMode parse_region_mode(const std::string& s) {
    if (s == "box") return RegionMode::box;
    if (s == "mask") return RegionMode::mask;
    throw Error(ErrorCode::invalid_input, "mode must be box or mask, got '" + s + "'");
}

DetectionEval evaluate_detections(const PredictionFile& pred, const PredictionFile& gt, RegionMode mode) {
    std::set<int> page_numbers;
    for (const DetectionSet& s : pred.pages) page_numbers.insert(s.page_no);
    for (const DetectionSet& s : gt.pages) page_numbers.insert(s.page_no);

    std::vector<eval::EvalImage> images;
    for (int page_no : page_numbers) {
        const DetectionSet* ps = pred.find(page_no);
        const DetectionSet* gs = gt.find(page_no);
        std::vector<const Detection*> pd;
        std::vector<const Detection*> gd;
        if (ps != nullptr) {
            for (const Detection& d : ps->detections) {
                if (d.review != Review::rejected) pd.push_back(&d);
            }
        }
        if (gs != nullptr) {
            for (const Detection& d : gs->detections) {
                if (d.review != Review::rejected) gd.push_back(&d);
            }
        }
        int w = 0;
        int h = 0;
        if (mode == RegionMode::mask) {
            if (gs != nullptr && gs->width > 0) {
                w = gs->width;
                h = gs->height;
            } else if (ps != nullptr && ps->width > 0) {
                w = ps->width;
                h = ps->height;
            } else {
                for (const auto* list : {&pd, &gd}) {
                    for (const Detection* d : *list) {
                        const BBox b = d->polygon.bounds();
                        w = std::max(w, static_cast<int>(std::ceil(b.x_max)));
                        h = std::max(h, static_cast<int>(std::ceil(b.y_max)));
                    }
                }
            }
        }
        auto region = [&](const Detection* d) -> eval::Region {
            if (mode == RegionMode::box) return tight_bbox(d->polygon);
            return rasterize_polygon(d->polygon, w, h);
        };
        eval::EvalImage img;
        for (const Detection* d : pd) img.preds.push_back({region(d), d->score});
        for (const Detection* d : gd) img.gts.push_back(region(d));
        images.push_back(std::move(img));
    }

    DetectionEval out;
    const eval::MapMetrics m = eval::map_metrics(images);
    out.map50 = m.map50;
    out.map50_95 = m.map50_95;
    for (const eval::EvalImage& img : images) {
        const eval::MatchResult r = eval::match_detections(img.preds, img.gts, 0.5);
        out.counts.tp += r.counts.tp;
        out.counts.fp += r.counts.fp;
        out.counts.fn += r.counts.fn;
    }
    const eval::PrecisionRecall pr = eval::precision_recall(out.counts);
    out.precision = pr.precision;
    out.recall = pr.recall;
    return out;
}

std::string to_json(const DetectionEval& e) {
    nlohmann::ordered_json j;
    j["map50"] = round6(e.map50);
    j["map50_95"] = round6(e.map50_95);
    j["precision"] = round6(e.precision);
    j["recall"] = round6(e.recall);
    j["tp"] = e.counts.tp;
    j["fp"] = e.counts.fp;
    j["fn"] = e.counts.fn;
    return j.dump(2) + "\n";
}

HeadTable parse_head_table(const std::string& csv) {
    HeadTable t;
    std::size_t start = 0;
    std::size_t line_no = 0;
    std::set<std::string> seen;
    bool header = true;
    while (start < csv.size()) {
        std::size_t end = csv.find('\n', start);
        if (end == std::string::npos) end = csv.size();
        std::string line = csv.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_fields(line);
        const std::string where = "line " + std::to_string(line_no);
        if (header) {
            if (cells != std::vector<std::string>{"id", "type", "position", "rotation"}) {
                throw Error(ErrorCode::parse, where + ": header must be id,type,position,rotation");
            }
            header = false;
            continue;
        }
        if (cells.size() != 4) throw Error(ErrorCode::parse, where + ": expected 4 fields");
        if (!seen.insert(cells[0]).second) throw Error(ErrorCode::parse, where + ": duplicate id " + cells[0]);
        t.ids.push_back(cells[0]);
        t.labels[0].push_back(head_label(eval::Head::type, cells[1], where));
        t.labels[1].push_back(head_label(eval::Head::position, cells[2], where));
        t.labels[2].push_back(head_label(eval::Head::rotation, cells[3], where));
    }
    if (header) throw Error(ErrorCode::parse, "line 1: missing header");
    return t;
}

std::array<eval::HeadEval, 3> evaluate_heads(const HeadTable& pred, const HeadTable& truth) {
    std::map<std::string, std::size_t> truth_row;
    for (std::size_t i = 0; i < truth.ids.size(); ++i) truth_row[truth.ids[i]] = i;
    std::array<std::vector<int>, 3> p;
    std::array<std::vector<int>, 3> y;
    for (std::size_t i = 0; i < pred.ids.size(); ++i) {
        const auto it = truth_row.find(pred.ids[i]);
        if (it == truth_row.end()) throw Error(ErrorCode::invalid_input, "no ground truth for id " + pred.ids[i]);
        for (std::size_t h = 0; h < 3; ++h) {
            p[h].push_back(pred.labels[h][i]);
            y[h].push_back(truth.labels[h][it->second]);
        }
    }
    return {eval::confusion(eval::Head::type, p[0], y[0]), eval::confusion(eval::Head::position, p[1], y[1]),
            eval::confusion(eval::Head::rotation, p[2], y[2])};
}

std::string to_json(const std::array<eval::HeadEval, 3>& heads) {
    nlohmann::ordered_json root;
    for (const eval::HeadEval& h : heads) {
        const auto classes = eval::head_classes(h.head);
        nlohmann::ordered_json jh;
        jh["classes"] = {classes[0], classes[1]};
        jh["confusion"] = {{h.confusion[0][0], h.confusion[0][1]}, {h.confusion[1][0], h.confusion[1][1]}};
        jh["samples"] = h.samples();
        nlohmann::ordered_json per = nlohmann::ordered_json::object();
        for (const eval::ClassMetrics& c : h.per_class) {
            per[c.name] = {{"precision", round6(c.precision)}, {"recall", round6(c.recall)}};
        }
        jh["per_class"] = std::move(per);
        root[eval::head_name(h.head)] = std::move(jh);
    }
    return root.dump(2) + "\n";
}

ProjectSummary summarize(const Project& project) {
    ProjectSummary s;
    s.id = project.id;
    s.pages = static_cast<int>(project.pages.size());
    s.dpi = project.dpi;
    s.created_at = project.created_at;
    const PredictionFile file = DetectionStore(project.dir).snapshot();
    for (const DetectionSet& set : file.pages) {
        s.detections += set.detections.size();
        for (const Detection& d : set.detections) s.accepted += is_accepted(d.review) ? 1 : 0;
    }
    s.cards = load_cards(project.dir).size();
    return s;
}

std::vector<ProjectSummary> list_projects(const std::filesystem::path& root) {
    std::vector<ProjectSummary> out;
    if (!std::filesystem::is_directory(root)) return out;
    for (const auto& e : std::filesystem::directory_iterator(root)) {
        if (!e.is_directory() || !std::filesystem::exists(workspace::manifest_path(e.path()))) continue;
        try {
            out.push_back(summarize(load_project(e.path())));
        } catch (const Error&) {
            // Unreadable projects are left out of the listing; validate reports them individually.
        }
    }
    std::sort(out.begin(), out.end(), [](const ProjectSummary& a, const ProjectSummary& b) { return a.id < b.id; });
    return out;
}

} // namespace lens::pipeline
