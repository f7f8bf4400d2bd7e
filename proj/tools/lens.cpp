// lens: command-line front end for the pottery-plate digitization workflow.

#include "lens/analysis.hpp"
#include "lens/cards.hpp"
#include "lens/codec.hpp"
#include "lens/detect.hpp"
#include "lens/error.hpp"
#include "lens/ingest.hpp"
#include "lens/pipeline.hpp"
#include "lens/report.hpp"
#include "lens/selfannot.hpp"
#include "lens/service.hpp"
#include "lens/workspace.hpp"
#ifdef LENS_HAVE_MODEL_BACKEND
#include "lens/model_backend.hpp"
#endif

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace lens;

namespace {

struct Context {
    std::string root = ".";
    std::string project;

    fs::path dir() const { return workspace::project_dir(root, project); }
    Project load() const { return load_project(dir()); }
};

std::vector<Point> parse_points(const std::string& text) {
    std::vector<Point> pts;
    std::istringstream in(text);
    std::string pair;
    while (in >> pair) {
        const auto comma = pair.find(',');
        if (comma == std::string::npos) throw Error(ErrorCode::invalid_input, "vertex '" + pair + "' must be x,y");
        try {
            pts.push_back({std::stod(pair.substr(0, comma)), std::stod(pair.substr(comma + 1))});
        } catch (const std::exception&) {
            throw Error(ErrorCode::invalid_input, "vertex '" + pair + "' must be x,y");
        }
    }
    return pts;
}

std::vector<std::vector<double>> matrix(const json& j, const char* name) {
    if (!j.contains(name)) throw Error(ErrorCode::invalid_input, std::string("batch lacks '") + name + "'");
    return j[name].get<std::vector<std::vector<double>>>();
}

void print_progress(double f) {
    std::fprintf(stderr, "\r%3d%%", static_cast<int>(f * 100.0 + 0.5));
    if (f >= 1.0) std::fputc('\n', stderr);
}

service::Service* g_service = nullptr;

void on_signal(int) {
    if (g_service != nullptr) g_service->stop();
}

} // namespace

int main(int argc, char** argv) {
#ifdef LENS_HAVE_MODEL_BACKEND
    register_model_backend();
#endif
    CLI::App app{"Digitize archaeological pottery plates: ingest, detect, review, extract, catalog, report"};
    app.require_subcommand(1);
    Context ctx;
    if (const char* env = std::getenv("LENS_ROOT")) ctx.root = env;
    app.add_option("--root", ctx.root, "Directory holding project workspaces (env LENS_ROOT)");
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "No progress output");
    auto progress = [&]() -> std::function<void(double)> {
        if (quiet) return {};
        return print_progress;
    };

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Rasterize a PDF or import a directory of page images");
    std::string source;
    IngestOptions ingest_opt;
    std::string renderer_spec = "builtin";
    ingest->add_option("source", source, "PDF file or image directory")->required();
    ingest->add_option("--project", ctx.project, "Project id")->required();
    ingest->add_option("--dpi", ingest_opt.dpi, "Rasterization resolution")->capture_default_str();
    ingest->add_option("--renderer", renderer_spec, "builtin or command:<template using {input} {dpi} {page} {stem} {output}>")
        ->capture_default_str();
    ingest->add_option("--workers", ingest_opt.workers, "Rendering threads (0 = all cores)");
    ingest->add_flag("--overwrite", ingest_opt.overwrite, "Replace an existing project");
    ingest->callback([&] {
        const auto renderer = make_renderer(renderer_spec);
        ingest_opt.renderer = renderer.get();
        ingest_opt.progress = progress();
        ingest_opt.warn = [](const std::string& m) { std::cerr << "warning: " << m << "\n"; };
        const Project p = ingest_source(source, ctx.dir(), ctx.project, ingest_opt);
        std::cout << "ingested " << p.pages.size() << " pages into " << p.dir.string() << "\n";
    });

    // detect
    auto* detect = app.add_subcommand("detect", "Run a detection backend over the project pages");
    pipeline::DetectOptions det_opt;
    int min_area = -1;
    detect->add_option("--project", ctx.project, "Project id")->required();
    detect->add_option("--backend", det_opt.backend, "oracle:<predictions.json> or model:<file.onnx>")->required();
    detect->add_option("--conf", det_opt.params.conf_threshold, "Confidence threshold")->capture_default_str();
    detect->add_option("--dilate", det_opt.params.dilation_radius, "Dilation radius in pixels")->capture_default_str();
    detect->add_flag("--fill-holes", det_opt.params.fill_holes, "Fill mask holes before dilation");
    detect->add_option("--min-area", min_area, "Minimum component area in pixels (default 64 at 300 dpi)");
    detect->add_option("--pages", det_opt.pages, "Restrict to these pages")->delimiter(',');
    detect->add_option("--workers", det_opt.workers, "Worker threads (0 = all cores)");
    detect->callback([&] {
        if (min_area >= 0) det_opt.params.min_area_px = min_area;
        det_opt.progress = progress();
        const auto s = pipeline::detect_project(ctx.load(), det_opt);
        std::cout << "detected " << s.detections << " instances on " << s.pages << " pages with " << s.backend_id << "\n";
    });

    // review
    auto* review = app.add_subcommand("review", "Accept, reject, add or delete detections");
    review->require_subcommand(1);
    pipeline::ReviewSelection sel;
    auto add_selection = [&](CLI::App* cmd) {
        cmd->add_option("--project", ctx.project, "Project id")->required();
        cmd->add_option("--ids", sel.ids, "Detection ids")->delimiter(',');
        cmd->add_option("--pages", sel.pages, "Pages (bulk selection)")->delimiter(',');
        cmd->add_option("--min-score", sel.min_score, "Minimum score (bulk selection)");
        cmd->add_flag("--unreviewed", sel.only_unreviewed, "Only detections without a review decision");
    };
    auto* accept = review->add_subcommand("accept", "Mark detections accepted");
    add_selection(accept);
    accept->callback([&] {
        const auto r = pipeline::review(ctx.dir(), ReviewPatch::Op::accept, sel);
        std::cout << "accepted " << r.applied << " detections\n";
    });
    auto* reject = review->add_subcommand("reject", "Mark detections rejected");
    add_selection(reject);
    reject->callback([&] {
        const auto r = pipeline::review(ctx.dir(), ReviewPatch::Op::reject, sel);
        std::cout << "rejected " << r.applied << " detections\n";
    });
    auto* apply = review->add_subcommand("apply", "Apply a JSON array of review patches atomically");
    std::string patch_file;
    apply->add_option("--project", ctx.project, "Project id")->required();
    apply->add_option("--patches", patch_file, "Patch JSON file")->required()->check(CLI::ExistingFile);
    apply->callback([&] {
        const auto r = DetectionStore(ctx.dir()).apply(parse_review_patches(read_text(patch_file)));
        std::cout << "applied " << r.applied << " patches\n";
    });
    auto* add = review->add_subcommand("add", "Add a manual detection");
    int add_page = 0;
    std::string add_polygon;
    add->add_option("--project", ctx.project, "Project id")->required();
    add->add_option("--page", add_page, "Page number")->required();
    add->add_option("--polygon", add_polygon, "Vertices as \"x,y x,y x,y ...\"")->required();
    add->callback([&] {
        const Project p = ctx.load();
        const PageImage& page = p.page(add_page);
        const Detection d = DetectionStore(p.dir).upsert_manual(add_page, page.width, page.height, Polygon(parse_points(add_polygon)));
        std::cout << d.id << "\n";
    });
    auto* del = review->add_subcommand("delete", "Delete a detection");
    std::string del_id;
    del->add_option("--project", ctx.project, "Project id")->required();
    del->add_option("--id", del_id, "Detection id")->required();
    del->callback([&] {
        DetectionStore(ctx.dir()).remove(del_id);
        std::cout << "deleted " << del_id << "\n";
    });

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Detection metrics of predictions against ground truth");
    std::string pred_file, gt_file, mode = "mask";
    eval_cmd->add_option("--pred", pred_file, "Prediction JSON")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--gt", gt_file, "Ground-truth JSON")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--mode", mode, "mask or box")->capture_default_str();
    eval_cmd->callback([&] {
        const auto e = pipeline::evaluate_detections(read_predictions(pred_file), read_predictions(gt_file),
                                                     pipeline::parse_region_mode(mode));
        std::cout << pipeline::to_json(e);
    });

    // eval-heads
    auto* eval_heads = app.add_subcommand("eval-heads", "Per-head confusion matrices of classifier labels");
    std::string head_pred, head_gt;
    eval_heads->add_option("--pred", head_pred, "CSV id,type,position,rotation")->required()->check(CLI::ExistingFile);
    eval_heads->add_option("--gt", head_gt, "CSV id,type,position,rotation")->required()->check(CLI::ExistingFile);
    eval_heads->callback([&] {
        const auto heads = pipeline::evaluate_heads(pipeline::parse_head_table(read_text(head_pred)),
                                                    pipeline::parse_head_table(read_text(head_gt)));
        std::cout << pipeline::to_json(heads);
    });

    // cards
    auto* cards = app.add_subcommand("cards", "Instance cards and the catalog");
    cards->require_subcommand(1);
    auto* extract = cards->add_subcommand("extract", "Cut one RGBA card per accepted detection");
    ExtractOptions ext_opt;
    extract->add_option("--project", ctx.project, "Project id")->required();
    extract->add_option("--padding", ext_opt.padding, "Padding in pixels around each mask")->capture_default_str();
    extract->add_option("--pages", ext_opt.pages, "Restrict to these pages")->delimiter(',');
    extract->add_option("--workers", ext_opt.workers, "Worker threads (0 = all cores)");
    extract->callback([&] {
        ext_opt.progress = progress();
        const auto c = extract_cards(ctx.load(), ext_opt);
        std::cout << "extracted " << c.size() << " cards\n";
    });
    auto* canon = cards->add_subcommand("canonicalize", "Flip cards to mouth-up, section-left orientation");
    double threshold = default_head_threshold;
    canon->add_option("--project", ctx.project, "Project id")->required();
    canon->add_option("--threshold", threshold, "Head decision threshold")->capture_default_str();
    canon->callback([&] {
        const auto c = canonicalize_cards(ctx.load(), threshold);
        std::cout << "canonicalized " << c.size() << " cards\n";
    });
    auto* augment = cards->add_subcommand("augment", "Write the orientation variants of every card");
    std::string aug_out;
    bool flips_only = false;
    augment->add_option("--project", ctx.project, "Project id")->required();
    augment->add_option("--out", aug_out, "Output directory (default exports/augment)");
    augment->add_flag("--flips-only", flips_only, "Only the 4 flip variants instead of all 8");
    augment->callback([&] {
        const Project p = ctx.load();
        const fs::path out = aug_out.empty() ? workspace::exports_dir(p.dir) / "augment" : fs::path(aug_out);
        const auto n = export_augmentations(p, out, flips_only);
        std::cout << "wrote " << n << " images to " << out.string() << "\n";
    });
    auto* catalog = cards->add_subcommand("catalog", "Synchronize catalog.csv with the cards and edit fields");
    std::vector<std::string> sets;
    catalog->add_option("--project", ctx.project, "Project id")->required();
    catalog->add_option("--set", sets, "card_id:column=value (repeatable)");
    catalog->callback([&] {
        const fs::path dir = ctx.dir();
        sync_catalog(dir);
        for (const std::string& s : sets) {
            const auto colon = s.find(':');
            const auto eq = s.find('=', colon == std::string::npos ? 0 : colon);
            if (colon == std::string::npos || eq == std::string::npos || eq == colon + 1) {
                throw Error(ErrorCode::invalid_input, "--set expects card_id:column=value, got '" + s + "'");
            }
            upsert_record(dir, s.substr(0, colon), {{s.substr(colon + 1, eq - colon - 1), s.substr(eq + 1)}});
        }
        std::cout << "catalog has " << load_catalog(dir).records.size() << " rows\n";
    });

    // report
    auto* report = app.add_subcommand("report", "Pack cards at print scale into a PDF report");
    std::string page_name = "a4";
    ReportOptions rep_opt;
    double margin = -1, gutter = -1, caption = -1;
    report->add_option("--project", ctx.project, "Project id")->required();
    report->add_option("--page", page_name, "a3, a4, a5, letter or legal")->capture_default_str();
    report->add_option("--scale", rep_opt.scale, "Global print scale factor")->capture_default_str();
    report->add_option("--margin", margin, "Page margin in mm");
    report->add_option("--gutter", gutter, "Gap between cards in mm");
    report->add_option("--caption", caption, "Caption strip height in mm");
    report->add_option("--title", rep_opt.title, "PDF title");
    report->callback([&] {
        PageSpec spec = page_spec_for(page_name);
        if (margin >= 0) spec.margin = margin;
        if (gutter >= 0) spec.gutter = gutter;
        if (caption >= 0) spec.caption_height = caption;
        const ReportResult r = build_report(ctx.load(), spec, rep_opt);
        std::cout << "report: " << r.layout.placements.size() << " cards on " << r.layout.page_count
                  << " pages + " << (r.pdf_pages - r.layout.page_count) << " index -> " << r.pdf.string() << "\n";
    });

    // export-yolo
    auto* yolo = app.add_subcommand("export-yolo", "Export reviewed detections as a YOLO segmentation dataset");
    ExportOptions exp_opt;
    std::string yolo_out;
    yolo->add_option("--project", ctx.project, "Project id")->required();
    yolo->add_option("--ratio", exp_opt.ratio, "Training fraction of pages")->capture_default_str();
    yolo->add_option("--seed", exp_opt.seed, "Split seed")->capture_default_str();
    yolo->add_option("--out", yolo_out, "Output directory (default exports/yolo)");
    yolo->add_option("--class-name", exp_opt.class_name, "Class name in data.yaml")->capture_default_str();
    yolo->callback([&] {
        const Project p = ctx.load();
        const fs::path out = yolo_out.empty() ? workspace::exports_dir(p.dir) / "yolo" : fs::path(yolo_out);
        const ExportResult r = export_yolo(p, out, exp_opt);
        std::cout << "exported " << r.instances << " instances: " << r.split.train_pages.size() << " train pages, "
                  << r.split.val_pages.size() << " val pages -> " << out.string() << "\n";
    });

    // knn
    auto* knn = app.add_subcommand("knn", "Nearest neighbours of a card in an embedding table");
    std::string emb_file, query;
    std::size_t k = 5;
    knn->add_option("--embeddings", emb_file, "CSV id,v0,...")->required()->check(CLI::ExistingFile);
    knn->add_option("--id", query, "Query id")->required();
    knn->add_option("--k", k, "Neighbour count")->capture_default_str();
    knn->callback([&] {
        json arr = json::array();
        for (const auto& n : analysis::knn(analysis::load_embeddings(emb_file), query, k)) {
            arr.push_back({{"id", n.id}, {"distance", n.distance}});
        }
        std::cout << arr.dump(2) << "\n";
    });

    // vae-loss
    auto* vae = app.add_subcommand("vae-loss", "Evaluate the VAE objective on a stored batch");
    std::string batch_file;
    double beta = analysis::default_beta;
    vae->add_option("--batch", batch_file, "JSON with x, x_hat, mu, logvar")->required()->check(CLI::ExistingFile);
    vae->add_option("--beta", beta, "KL weight")->capture_default_str();
    vae->callback([&] {
        const json j = json::parse(read_text(batch_file));
        analysis::VaeBatch b{matrix(j, "x"), matrix(j, "x_hat"), matrix(j, "mu"), matrix(j, "logvar"), beta};
        const auto l = analysis::vae_loss(b);
        std::cout << json{{"recon", l.recon}, {"kl", l.kl}, {"total", l.total}}.dump(2) << "\n";
    });

    // serve
    auto* serve = app.add_subcommand("serve", "Serve the HTTP API (and the review UI bundle)");
    std::string listen = "127.0.0.1:8080";
    std::string static_dir;
    serve->add_option("--listen", listen, "host:port")->capture_default_str();
    serve->add_option("--static", static_dir, "Directory served at /");
    serve->callback([&] {
        const auto [host, port] = service::parse_listen(listen);
        service::Service svc({ctx.root, static_dir});
        const int bound = svc.bind(host, port);
        if (bound < 0) throw Error(ErrorCode::io, "cannot bind " + listen);
        g_service = &svc;
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        std::cerr << "serving " << fs::absolute(ctx.root).string() << " on http://" << host << ":" << bound << "\n";
        svc.listen();
        g_service = nullptr;
    });

    // validate
    auto* validate = app.add_subcommand("validate", "Check page files against the manifest");
    validate->add_option("--project", ctx.project, "Project id")->required();
    int exit_code = 0;
    validate->callback([&] {
        const auto issues = validate_project(ctx.load());
        for (const auto& i : issues) {
            std::cout << to_string(i.kind) << " page " << i.page_no << ": " << i.detail << "\n";
        }
        if (issues.empty()) std::cout << "ok\n";
        else exit_code = 1;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const PatchRejected& e) {
        std::cerr << "error[invalid_patch]: " << e.what() << "\n";
        for (const auto& i : e.issues()) std::cerr << "  #" << i.index << " " << i.detection_id << ": " << i.message << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error[" << to_string(e.code()) << "]: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return exit_code;
}
