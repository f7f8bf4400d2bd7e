#include "lens/service.hpp"

#include "lens/cards.hpp"
#include "lens/codec.hpp"
#include "lens/detect.hpp"
#include "lens/error.hpp"
#include "lens/ingest.hpp"
#include "lens/pipeline.hpp"
#include "lens/report.hpp"
#include "lens/selfannot.hpp"
#include "lens/workspace.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdio>

namespace lens::service {

using json = nlohmann::json;

namespace {

/// Failure with an explicit HTTP status and envelope code.
struct ApiError {
    int status;
    std::string code;
    std::string message;
    json details;
};

int status_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::not_found: return 404;
    case ErrorCode::conflict: return 409;
    case ErrorCode::parse: return 400;
    case ErrorCode::invalid_input:
    case ErrorCode::invalid_geometry:
    case ErrorCode::ambiguous_input:
    case ErrorCode::invalid_comparison:
    case ErrorCode::empty_dataset:
    case ErrorCode::empty_document: return 422;
    case ErrorCode::backend_unavailable: return 503;
    default: return 500;
    }
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                const json& details = nullptr) {
    json body{{"code", code}, {"message", message}};
    if (!details.is_null()) body["details"] = details;
    send_json(res, status, body);
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
    try {
        fn();
    } catch (const ApiError& e) {
        send_error(res, e.status, e.code, e.message, e.details);
    } catch (const PatchRejected& e) {
        json items = json::array();
        for (const PatchIssue& i : e.issues()) {
            items.push_back({{"index", i.index}, {"detection_id", i.detection_id}, {"message", i.message}});
        }
        send_error(res, 422, "invalid_patch", e.what(), items);
    } catch (const VersionConflict& e) {
        send_error(res, 409, "version_conflict", e.what(),
                   {{"page_no", e.page_no()}, {"current_version", e.current_version()}});
    } catch (const Error& e) {
        send_error(res, status_for(e.code()), std::string(to_string(e.code())), e.what());
    } catch (const json::exception& e) {
        send_error(res, 400, "bad_request", e.what());
    } catch (const std::exception& e) {
        send_error(res, 500, "internal_error", e.what());
    }
}

json parse_body(const httplib::Request& req) {
    try {
        return req.body.empty() ? json::object() : json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw ApiError{400, "bad_request", std::string("invalid JSON body: ") + e.what(), nullptr};
    }
}

int parse_int(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw ApiError{404, what + "_not_found", what + " '" + s + "' is not a number", nullptr};
}

template <typename T>
T param(const json& params, const char* name, T fallback) {
    if (!params.contains(name) || params[name].is_null()) return fallback;
    try {
        return params[name].get<T>();
    } catch (const json::exception&) {
        throw ApiError{422, "invalid_params", std::string("parameter '") + name + "' has the wrong type", nullptr};
    }
}

json page_json(const DetectionSet& set) {
    PredictionFile f;
    f.pages.push_back(set);
    return json::parse(to_json(f))["pages"][0];
}

json labels_json(const CardLabels& l) {
    return {{"type", to_string(l.type)}, {"position", to_string(l.position)}, {"rotation", to_string(l.rotation)}};
}

json card_json(const std::string& project, const InstanceCard& c) {
    json j{{"card_id", c.card_id},
           {"detection_id", c.detection_id},
           {"page_no", c.page_no},
           {"width", c.width},
           {"height", c.height},
           {"canonical", c.canonical},
           {"labels", labels_json(c.labels)},
           {"catalog_id", c.catalog_id ? json(*c.catalog_id) : json(nullptr)},
           {"image_url", "/api/projects/" + project + "/cards/" + c.card_id + "/image"}};
    if (c.original_labels) j["original_labels"] = labels_json(*c.original_labels);
    return j;
}

json catalog_json(const Catalog& cat) {
    json rows = json::array();
    for (const CatalogRecord& r : cat.records) {
        json fields = json::object();
        for (const auto& [k, v] : r.fields) fields[k] = v;
        rows.push_back({{"catalog_id", r.catalog_id}, {"card_id", r.card_id}, {"fields", fields}});
    }
    return {{"columns", cat.columns}, {"rows", rows}};
}

json summary_json(const pipeline::ProjectSummary& s) {
    return {{"id", s.id},         {"pages", s.pages},          {"dpi", s.dpi},
            {"created_at", s.created_at}, {"detections", s.detections}, {"accepted", s.accepted},
            {"cards", s.cards}};
}

InferenceParams inference_params(const json& p) {
    InferenceParams ip;
    ip.conf_threshold = param<double>(p, "conf", ip.conf_threshold);
    ip.dilation_radius = param<int>(p, "dilate", ip.dilation_radius);
    ip.fill_holes = param<bool>(p, "fill_holes", ip.fill_holes);
    if (p.contains("min_area") && !p["min_area"].is_null()) ip.min_area_px = param<int>(p, "min_area", 0);
    ip.validate();
    return ip;
}

} // namespace

std::string to_string(JobState s) {
    switch (s) {
    case JobState::queued: return "queued";
    case JobState::running: return "running";
    case JobState::done: return "done";
    case JobState::failed: return "failed";
    }
    return "unknown";
}

json Job::to_json() const {
    json j{{"job_id", job_id},     {"project", project}, {"kind", kind},
           {"state", to_string(state)}, {"progress", progress}, {"created_at", created_at}};
    j["error"] = error ? json{{"code", error_code}, {"message", *error}} : json(nullptr);
    j["result"] = result;
    if (!finished_at.empty()) j["finished_at"] = finished_at;
    return j;
}

JobManager::~JobManager() {
    std::vector<std::thread> threads;
    {
        std::lock_guard lock(mu_);
        threads.swap(threads_);
    }
    for (std::thread& t : threads) t.join();
}

Job JobManager::submit(const std::string& project, const std::string& kind, Body body) {
    std::lock_guard lock(mu_);
    if (const auto it = active_.find(project); it != active_.end()) {
        throw Error(ErrorCode::conflict, "project " + project + " already runs job " + it->second);
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "job-%06llu", static_cast<unsigned long long>(next_id_++));
    Job job;
    job.job_id = buf;
    job.project = project;
    job.kind = kind;
    job.created_at = workspace::utc_timestamp();
    jobs_[job.job_id] = job;
    active_[project] = job.job_id;
    threads_.emplace_back([this, id = job.job_id, body = std::move(body)] { run(id, body); });
    return job;
}

void JobManager::update(const std::string& job_id, const std::function<void(Job&)>& fn) {
    {
        std::lock_guard lock(mu_);
        Job& job = jobs_.at(job_id);
        if (job.terminal()) return;
        fn(job);
        if (job.terminal()) active_.erase(job.project);
    }
    cv_.notify_all();
}

void JobManager::run(const std::string& job_id, const Body& body) {
    update(job_id, [](Job& j) { j.state = JobState::running; });
    auto progress = [&](double p) {
        update(job_id, [p](Job& j) { j.progress = std::clamp(std::max(j.progress, p), 0.0, 1.0); });
    };
    try {
        // The body persists every artifact before returning, so "done" is only observable afterwards.
        json result = body(progress);
        update(job_id, [&](Job& j) {
            j.result = std::move(result);
            j.progress = 1.0;
            j.state = JobState::done;
            j.finished_at = workspace::utc_timestamp();
        });
    } catch (const Error& e) {
        update(job_id, [&](Job& j) {
            j.error = e.what();
            j.error_code = std::string(to_string(e.code()));
            j.state = JobState::failed;
            j.finished_at = workspace::utc_timestamp();
        });
    } catch (const std::exception& e) {
        update(job_id, [&](Job& j) {
            j.error = e.what();
            j.error_code = "internal_error";
            j.state = JobState::failed;
            j.finished_at = workspace::utc_timestamp();
        });
    }
}

std::optional<Job> JobManager::get(const std::string& job_id) const {
    std::lock_guard lock(mu_);
    const auto it = jobs_.find(job_id);
    if (it == jobs_.end()) return std::nullopt;
    return it->second;
}

std::optional<Job> JobManager::wait(const std::string& job_id) const {
    std::unique_lock lock(mu_);
    if (jobs_.count(job_id) == 0) return std::nullopt;
    cv_.wait(lock, [&] { return jobs_.at(job_id).terminal(); });
    return jobs_.at(job_id);
}

Service::Service(ServiceOptions options) : options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
    install_routes();
}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
    if (port == 0) return server_->bind_to_any_port(host);
    return server_->bind_to_port(host, port) ? port : -1;
}

bool Service::listen() { return server_->listen_after_bind(); }

void Service::stop() {
    if (server_) server_->stop();
}

void Service::wait_until_ready() const { server_->wait_until_ready(); }

void Service::install_routes() {
    httplib::Server& s = *server_;
    const std::filesystem::path root = options_.root;

    auto project_dir = [root](const std::string& id) {
        try {
            workspace::validate_project_id(id);
        } catch (const Error&) {
            throw ApiError{404, "project_not_found", "no project '" + id + "'", nullptr};
        }
        return workspace::project_dir(root, id);
    };
    auto open_project = [project_dir](const std::string& id) {
        const auto dir = project_dir(id);
        if (!std::filesystem::exists(workspace::manifest_path(dir))) {
            throw ApiError{404, "project_not_found", "no project '" + id + "'", nullptr};
        }
        return load_project(dir);
    };

    s.Get("/api/constants", [](const httplib::Request&, httplib::Response& res) {
        const PageSpec a4;
        const InferenceParams ip;
        send_json(res, 200,
                  {{"head_threshold", default_head_threshold},
                   {"positive_labels", {{"type", "FRAG"}, {"position", "BOTTOM"}, {"rotation", "RIGHT"}}},
                   {"flip_rule", {{"BOTTOM", "vertical"}, {"RIGHT", "horizontal"}}},
                   {"page", {{"width", a4.page_width}, {"height", a4.page_height}, {"margin", a4.margin},
                             {"gutter", a4.gutter}, {"caption_height", a4.caption_height}}},
                   {"inference_params", {{"conf", ip.conf_threshold}, {"dilate", ip.dilation_radius},
                                         {"fill_holes", ip.fill_holes}, {"min_area", nullptr},
                                         {"min_area_at_300dpi", 64}}}});
    });

    s.Get("/api/projects", [root](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] {
            json arr = json::array();
            for (const auto& p : pipeline::list_projects(root)) arr.push_back(summary_json(p));
            send_json(res, 200, arr);
        });
    });

    s.Get("/api/projects/:id", [open_project](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const Project p = open_project(req.path_params.at("id"));
            json j = summary_json(pipeline::summarize(p));
            json pages = json::array();
            for (const PageImage& pg : p.pages) {
                pages.push_back({{"page_no", pg.page_no}, {"width", pg.width}, {"height", pg.height}, {"dpi", pg.dpi}});
            }
            j["page_list"] = pages;
            send_json(res, 200, j);
        });
    });

    s.Post("/api/projects/:id/jobs", [this, project_dir, open_project](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const std::string id = req.path_params.at("id");
            const json body = parse_body(req);
            const std::string kind = param<std::string>(body, "kind", "");
            const json params = body.contains("params") ? body["params"] : json::object();
            if (!params.is_object()) throw ApiError{422, "invalid_params", "params must be an object", nullptr};
            JobManager::Body run;
            if (kind == "ingest") {
                const std::filesystem::path dir = project_dir(id);
                const std::string source = param<std::string>(params, "source", "");
                if (source.empty()) throw ApiError{422, "invalid_params", "ingest needs params.source", nullptr};
                IngestOptions opt;
                opt.dpi = param<int>(params, "dpi", default_dpi);
                opt.overwrite = param<bool>(params, "overwrite", false);
                const std::string renderer = param<std::string>(params, "renderer", "builtin");
                auto r = std::shared_ptr<PageRenderer>(make_renderer(renderer));
                run = [=](const std::function<void(double)>& progress) {
                    IngestOptions o = opt;
                    o.renderer = r.get();
                    o.progress = progress;
                    const Project p = ingest_source(source, dir, id, o);
                    return json{{"pages", p.pages.size()}, {"dpi", p.dpi}};
                };
            } else {
                const Project project = open_project(id);
                if (kind == "detect") {
                    pipeline::DetectOptions opt;
                    opt.backend = param<std::string>(params, "backend", "");
                    if (opt.backend.empty()) throw ApiError{422, "invalid_params", "detect needs params.backend", nullptr};
                    opt.params = inference_params(params);
                    opt.pages = param<std::vector<int>>(params, "pages", {});
                    // Loading the backend up front reports unavailable runtimes on the request itself.
                    std::shared_ptr<DetectionBackend> backend = make_backend(opt.backend);
                    run = [=](const std::function<void(double)>& progress) {
                        pipeline::DetectOptions o = opt;
                        o.progress = progress;
                        const auto sum = pipeline::detect_project(project, *backend, o);
                        return json{{"pages", sum.pages}, {"detections", sum.detections}, {"backend_id", sum.backend_id}};
                    };
                } else if (kind == "extract") {
                    ExtractOptions opt;
                    opt.padding = param<int>(params, "padding", 0);
                    opt.pages = param<std::vector<int>>(params, "pages", {});
                    const bool canonical = param<bool>(params, "canonicalize", true);
                    const double threshold = param<double>(params, "threshold", default_head_threshold);
                    run = [=](const std::function<void(double)>& progress) {
                        ExtractOptions o = opt;
                        o.progress = [progress](double f) { progress(0.9 * f); };
                        const auto cards = pipeline::extract_all(project, o, canonical, threshold);
                        return json{{"cards", cards.size()}};
                    };
                } else if (kind == "report") {
                    PageSpec spec = page_spec_for(param<std::string>(params, "page", "a4"));
                    spec.margin = param<double>(params, "margin", spec.margin);
                    spec.gutter = param<double>(params, "gutter", spec.gutter);
                    spec.caption_height = param<double>(params, "caption_height", spec.caption_height);
                    spec.validate();
                    ReportOptions opt;
                    opt.scale = param<double>(params, "scale", 1.0);
                    opt.title = param<std::string>(params, "title", opt.title);
                    run = [=](const std::function<void(double)>&) {
                        const ReportResult r = build_report(project, spec, opt);
                        return json{{"layout_pages", r.layout.page_count}, {"pdf_pages", r.pdf_pages},
                                    {"placements", r.layout.placements.size()}};
                    };
                } else if (kind == "export") {
                    ExportOptions opt;
                    opt.ratio = param<double>(params, "ratio", opt.ratio);
                    opt.seed = param<std::uint64_t>(params, "seed", opt.seed);
                    run = [=](const std::function<void(double)>&) {
                        const auto out = workspace::exports_dir(project.dir) / "yolo";
                        const ExportResult r = export_yolo(project, out, opt);
                        return json{{"train_pages", r.split.train_pages}, {"val_pages", r.split.val_pages},
                                    {"instances", r.instances}};
                    };
                } else {
                    throw ApiError{422, "invalid_params", "kind must be ingest, detect, extract, report or export", nullptr};
                }
            }
            try {
                send_json(res, 202, jobs_.submit(id, kind, std::move(run)).to_json());
            } catch (const Error& e) {
                if (e.code() != ErrorCode::conflict) throw;
                throw ApiError{409, "job_conflict", e.what(), nullptr};
            }
        });
    });

    s.Get("/api/jobs/:job", [this](const httplib::Request& req, httplib::Response& res) {
        const auto job = jobs_.get(req.path_params.at("job"));
        if (!job) return send_error(res, 404, "job_not_found", "no job '" + req.path_params.at("job") + "'");
        send_json(res, 200, job->to_json());
    });

    s.Get("/api/projects/:id/pages/:n", [open_project](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const std::string id = req.path_params.at("id");
            const Project p = open_project(id);
            const int n = parse_int(req.path_params.at("n"), "page");
            const auto it = std::find_if(p.pages.begin(), p.pages.end(), [n](const PageImage& pg) { return pg.page_no == n; });
            if (it == p.pages.end()) throw ApiError{404, "page_not_found", "no page " + std::to_string(n), nullptr};
            DetectionSet set = DetectionStore(p.dir).page(n);
            send_json(res, 200,
                      {{"page_no", n},
                       {"width", it->width},
                       {"height", it->height},
                       {"dpi", it->dpi},
                       {"image_url", "/api/projects/" + id + "/pages/" + std::to_string(n) + "/image"},
                       {"detection_set", page_json(set)}});
        });
    });

    s.Get("/api/projects/:id/pages/:n/image", [open_project](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const Project p = open_project(req.path_params.at("id"));
            const int n = parse_int(req.path_params.at("n"), "page");
            const auto it = std::find_if(p.pages.begin(), p.pages.end(), [n](const PageImage& pg) { return pg.page_no == n; });
            if (it == p.pages.end()) throw ApiError{404, "page_not_found", "no page " + std::to_string(n), nullptr};
            const Bytes bytes = read_file(p.dir / it->file);
            res.set_content(reinterpret_cast<const char*>(bytes.data()), bytes.size(), "image/png");
        });
    });

    s.Patch("/api/projects/:id/detections", [open_project](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const Project p = open_project(req.path_params.at("id"));
            const PatchResult r = DetectionStore(p.dir).apply(parse_review_patches(req.body));
            json versions = json::object();
            for (const auto& [page, v] : r.versions) versions[std::to_string(page)] = v;
            send_json(res, 200, {{"applied", r.applied}, {"versions", versions}});
        });
    });

    s.Post("/api/projects/:id/pages/:n/detections", [open_project](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const Project p = open_project(req.path_params.at("id"));
            const int n = parse_int(req.path_params.at("n"), "page");
            const auto it = std::find_if(p.pages.begin(), p.pages.end(), [n](const PageImage& pg) { return pg.page_no == n; });
            if (it == p.pages.end()) throw ApiError{404, "page_not_found", "no page " + std::to_string(n), nullptr};
            const json body = parse_body(req);
            if (!body.contains("polygon") || !body["polygon"].is_array()) {
                throw ApiError{422, "invalid_params", "body needs a polygon [[x,y],...]", nullptr};
            }
            std::vector<Point> pts;
            for (const json& v : body["polygon"]) {
                if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
                    throw ApiError{422, "invalid_params", "polygon vertices must be [x,y] number pairs", nullptr};
                }
                pts.push_back({v[0].get<double>(), v[1].get<double>()});
            }
            const Detection d = DetectionStore(p.dir).upsert_manual(n, it->width, it->height, Polygon(std::move(pts)));
            DetectionSet one;
            one.page_no = n;
            one.detections.push_back(d);
            send_json(res, 201, page_json(one)["detections"][0]);
        });
    });

    s.Delete("/api/projects/:id/detections/:det", [open_project](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const Project p = open_project(req.path_params.at("id"));
            try {
                DetectionStore(p.dir).remove(req.path_params.at("det"));
            } catch (const Error& e) {
                if (e.code() != ErrorCode::not_found) throw;
                throw ApiError{404, "detection_not_found", e.what(), nullptr};
            }
            res.status = 204;
        });
    });

    s.Get("/api/projects/:id/catalog", [open_project](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const Project p = open_project(req.path_params.at("id"));
            const Catalog cat = load_catalog(p.dir);
            if (req.get_param_value("format") == "csv") {
                res.set_content(to_csv(cat), "text/csv; charset=utf-8");
                return;
            }
            send_json(res, 200, catalog_json(cat));
        });
    });

    s.Put("/api/projects/:id/catalog", [open_project](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const Project p = open_project(req.path_params.at("id"));
            const json body = parse_body(req);
            const json rows = body.is_array() ? body : body.value("rows", json::array());
            std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> updates;
            const auto cards = load_cards(p.dir);
            for (const json& row : rows) {
                const std::string card = param<std::string>(row, "card_id", "");
                if (std::none_of(cards.begin(), cards.end(), [&](const InstanceCard& c) { return c.card_id == card; })) {
                    throw ApiError{404, "card_not_found", "no card '" + card + "'", nullptr};
                }
                std::vector<std::pair<std::string, std::string>> fields;
                if (row.contains("fields")) {
                    for (const auto& [k, v] : row["fields"].items()) {
                        if (!v.is_string()) throw ApiError{422, "invalid_params", "catalog values must be strings", nullptr};
                        fields.emplace_back(k, v.get<std::string>());
                    }
                }
                updates.emplace_back(card, std::move(fields));
            }
            for (const auto& [card, fields] : updates) upsert_record(p.dir, card, fields);
            send_json(res, 200, catalog_json(load_catalog(p.dir)));
        });
    });

    s.Get("/api/projects/:id/cards", [open_project](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const std::string id = req.path_params.at("id");
            const Project p = open_project(id);
            const bool canonical_only = req.get_param_value("canonical") == "true";
            json arr = json::array();
            for (const InstanceCard& c : load_cards(p.dir)) {
                if (canonical_only && !c.canonical) continue;
                arr.push_back(card_json(id, c));
            }
            send_json(res, 200, arr);
        });
    });

    s.Get("/api/projects/:id/cards/:card/image", [open_project](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const Project p = open_project(req.path_params.at("id"));
            const std::string card = req.path_params.at("card");
            const auto cards = load_cards(p.dir);
            const auto it = std::find_if(cards.begin(), cards.end(), [&](const InstanceCard& c) { return c.card_id == card; });
            if (it == cards.end()) throw ApiError{404, "card_not_found", "no card '" + card + "'", nullptr};
            const std::string file = req.get_param_value("variant") == "source" ? it->source_file : it->file;
            const Bytes bytes = read_file(p.dir / file);
            res.set_content(reinterpret_cast<const char*>(bytes.data()), bytes.size(), "image/png");
        });
    });

    s.Get("/api/projects/:id/report/layout", [open_project](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const Project p = open_project(req.path_params.at("id"));
            const auto path = workspace::exports_dir(p.dir) / "report" / "layout.json";
            if (!std::filesystem::exists(path)) throw ApiError{404, "report_not_found", "no report has been built", nullptr};
            res.set_content(read_text(path), "application/json");
        });
    });

    s.Get("/api/projects/:id/report/pdf", [open_project](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const Project p = open_project(req.path_params.at("id"));
            const auto path = workspace::exports_dir(p.dir) / "report" / "report.pdf";
            if (!std::filesystem::exists(path)) throw ApiError{404, "report_not_found", "no report has been built", nullptr};
            const Bytes bytes = read_file(path);
            res.set_content(reinterpret_cast<const char*>(bytes.data()), bytes.size(), "application/pdf");
        });
    });

    if (!options_.static_dir.empty()) s.set_mount_point("/", options_.static_dir.string());
}

std::pair<std::string, int> parse_listen(const std::string& listen) {
    const auto colon = listen.rfind(':');
    if (colon == std::string::npos || colon + 1 == listen.size()) {
        throw Error(ErrorCode::invalid_input, "listen address must be host:port, got '" + listen + "'");
    }
    std::string host = listen.substr(0, colon);
    if (host.empty()) host = "127.0.0.1";
    int port = -1;
    try {
        std::size_t used = 0;
        port = std::stoi(listen.substr(colon + 1), &used);
        if (used != listen.size() - colon - 1) port = -1;
    } catch (const std::exception&) {
    }
    if (port < 0 || port > 65535) throw Error(ErrorCode::invalid_input, "invalid port in '" + listen + "'");
    return {host, port};
}

} // namespace lens::service
