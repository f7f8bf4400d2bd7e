#include "lens/ingest.hpp"

#include "lens/codec.hpp"
#include "lens/error.hpp"
#include "lens/parallel.hpp"
#include "lens/workspace.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>

namespace lens {

namespace {

using ojson = nlohmann::ordered_json;

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

void check_dpi(int dpi) {
    if (dpi < min_dpi || dpi > max_dpi) {
        throw Error(ErrorCode::invalid_input,
                    "dpi " + std::to_string(dpi) + " outside [" + std::to_string(min_dpi) + ", " + std::to_string(max_dpi) + "]");
    }
}

void prepare_dir(const fs::path& dir, bool overwrite) {
    if (fs::exists(workspace::manifest_path(dir))) {
        if (!overwrite) {
            throw Error(ErrorCode::conflict, "project already exists at " + dir.string());
        }
        fs::remove_all(dir);
    }
    fs::create_directories(workspace::pages_dir(dir));
    fs::create_directories(dir / "detections");
    fs::create_directories(workspace::cards_dir(dir));
    fs::create_directories(workspace::exports_dir(dir));
}

/// Drops the alpha channel by compositing over white; pages are always RGB.
RasterImage flatten(RasterImage img) {
    if (!img.has_alpha()) return img;
    RasterImage rgb(img.width(), img.height(), 3, 255);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const std::uint8_t* s = img.pixel(x, y);
            std::uint8_t* d = rgb.pixel(x, y);
            for (int c = 0; c < 3; ++c) {
                d[c] = static_cast<std::uint8_t>((s[c] * s[3] + 255 * (255 - s[3]) + 127) / 255);
            }
        }
    }
    return rgb;
}

PageImage store_page(const fs::path& dir, int page_no, int dpi, const RasterImage& image) {
    PageImage page;
    page.page_no = page_no;
    page.width = image.width();
    page.height = image.height();
    page.dpi = dpi;
    page.file = workspace::page_file_name(page_no);
    const Bytes png = encode_png(image);
    page.checksum = sha256_hex(png);
    write_file_atomic(dir / page.file, png);
    return page;
}

Project finish(Project project, const IngestOptions& options) {
    project.created_at = options.created_at.empty() ? workspace::utc_timestamp() : options.created_at;
    save_manifest(project);
    return project;
}

} // namespace

const PageImage& Project::page(int page_no) const {
    for (const PageImage& p : pages) {
        if (p.page_no == page_no) return p;
    }
    throw Error(ErrorCode::not_found, "page " + std::to_string(page_no) + " not in project " + id);
}

Project ingest_pdf(const fs::path& pdf, const fs::path& project_dir, const std::string& id, const IngestOptions& options) {
    workspace::validate_project_id(id);
    check_dpi(options.dpi);
    BuiltinPdfRenderer builtin;
    const PageRenderer& renderer = options.renderer != nullptr ? *options.renderer : builtin;
    const std::unique_ptr<RenderSession> session = renderer.open(pdf);
    const std::size_t n = session->page_count();
    if (n == 0) {
        throw Error(ErrorCode::empty_document, pdf.string() + " has no pages");
    }
    prepare_dir(project_dir, options.overwrite);

    Project project;
    project.id = id;
    project.source_path = fs::absolute(pdf);
    project.source_kind = SourceKind::pdf;
    project.dpi = options.dpi;
    project.dir = project_dir;
    project.pages.resize(n);
    std::atomic<std::size_t> done{0};
    parallel_for(n, options.workers, [&](std::size_t i) {
        RasterImage image = session->render(i, options.dpi);
        project.pages[i] = store_page(project_dir, static_cast<int>(i) + 1, options.dpi, flatten(std::move(image)));
        if (options.progress) options.progress(static_cast<double>(++done) / static_cast<double>(n));
    });
    return finish(std::move(project), options);
}

Project ingest_images(const fs::path& dir, const fs::path& project_dir, const std::string& id, const IngestOptions& options) {
    workspace::validate_project_id(id);
    check_dpi(options.dpi);
    if (!fs::is_directory(dir)) {
        throw Error(ErrorCode::ingest, dir.string() + " is not a directory");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
        return a.filename().string() < b.filename().string();
    });
    std::vector<fs::path> usable;
    for (const fs::path& f : files) {
        const std::string ext = lower(f.extension().string());
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") {
            usable.push_back(f);
        } else if (options.warn) {
            options.warn("skipping " + f.filename().string() + ": unsupported format");
        }
    }
    if (usable.empty()) {
        throw Error(ErrorCode::empty_document, dir.string() + " contains no PNG or JPEG images");
    }
    prepare_dir(project_dir, options.overwrite);

    Project project;
    project.id = id;
    project.source_path = fs::absolute(dir);
    project.source_kind = SourceKind::image_dir;
    project.dpi = options.dpi;
    project.dir = project_dir;
    project.pages.resize(usable.size());
    std::atomic<std::size_t> done{0};
    parallel_for(usable.size(), options.workers, [&](std::size_t i) {
        const Bytes bytes = read_file(usable[i]);
        RasterImage image;
        try {
            const std::string ext = lower(usable[i].extension().string());
            image = ext == ".png" ? decode_png(bytes) : decode_jpeg(bytes);
        } catch (const Error& e) {
            throw Error(ErrorCode::ingest, "page " + std::to_string(i + 1) + " (" + usable[i].filename().string() + "): " + e.what());
        }
        project.pages[i] = store_page(project_dir, static_cast<int>(i) + 1, options.dpi, flatten(std::move(image)));
        if (options.progress) options.progress(static_cast<double>(++done) / static_cast<double>(usable.size()));
    });
    return finish(std::move(project), options);
}

Project ingest_source(const fs::path& source, const fs::path& project_dir, const std::string& id, const IngestOptions& options) {
    if (fs::is_directory(source)) return ingest_images(source, project_dir, id, options);
    if (!fs::exists(source)) throw Error(ErrorCode::ingest, source.string() + " does not exist");
    return ingest_pdf(source, project_dir, id, options);
}

void save_manifest(const Project& project) {
    ojson j;
    j["schema"] = 1;
    j["id"] = project.id;
    j["source"] = {{"path", project.source_path.string()},
                   {"kind", project.source_kind == SourceKind::pdf ? "pdf" : "image-dir"}};
    j["dpi"] = project.dpi;
    j["created_at"] = project.created_at;
    ojson pages = ojson::array();
    for (const PageImage& p : project.pages) {
        pages.push_back({{"page_no", p.page_no},
                         {"width", p.width},
                         {"height", p.height},
                         {"dpi", p.dpi},
                         {"file", p.file},
                         {"checksum", "sha256:" + p.checksum}});
    }
    j["pages"] = std::move(pages);
    write_file_atomic(workspace::manifest_path(project.dir), j.dump(2) + "\n");
}

Project load_project(const fs::path& project_dir) {
    const fs::path path = workspace::manifest_path(project_dir);
    if (!fs::exists(path)) {
        throw Error(ErrorCode::not_found, "no project at " + project_dir.string());
    }
    try {
        const nlohmann::json j = nlohmann::json::parse(read_text(path));
        Project p;
        p.id = j.at("id").get<std::string>();
        p.source_path = j.at("source").at("path").get<std::string>();
        const std::string kind = j.at("source").at("kind").get<std::string>();
        p.source_kind = kind == "pdf" ? SourceKind::pdf : SourceKind::image_dir;
        p.dpi = j.at("dpi").get<int>();
        p.created_at = j.value("created_at", "");
        p.dir = project_dir;
        for (const auto& jp : j.at("pages")) {
            PageImage page;
            page.page_no = jp.at("page_no").get<int>();
            page.width = jp.at("width").get<int>();
            page.height = jp.at("height").get<int>();
            page.dpi = jp.at("dpi").get<int>();
            page.file = jp.at("file").get<std::string>();
            std::string sum = jp.at("checksum").get<std::string>();
            if (sum.rfind("sha256:", 0) == 0) sum = sum.substr(7);
            page.checksum = sum;
            p.pages.push_back(std::move(page));
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::parse, "malformed manifest " + path.string() + ": " + e.what());
    }
}

std::string to_string(ValidationIssue::Kind kind) {
    switch (kind) {
    case ValidationIssue::Kind::missing_file: return "missing_file";
    case ValidationIssue::Kind::checksum_mismatch: return "checksum_mismatch";
    case ValidationIssue::Kind::dimension_mismatch: return "dimension_mismatch";
    case ValidationIssue::Kind::numbering_gap: return "numbering_gap";
    }
    return "unknown";
}

std::vector<ValidationIssue> validate_project(const Project& project) {
    std::vector<ValidationIssue> issues;
    for (std::size_t i = 0; i < project.pages.size(); ++i) {
        const PageImage& p = project.pages[i];
        const int expected = static_cast<int>(i) + 1;
        if (p.page_no != expected) {
            issues.push_back({ValidationIssue::Kind::numbering_gap, p.page_no,
                              "expected page " + std::to_string(expected) + ", found " + std::to_string(p.page_no)});
        }
        const fs::path file = project.dir / p.file;
        if (!fs::exists(file)) {
            issues.push_back({ValidationIssue::Kind::missing_file, p.page_no, p.file});
            continue;
        }
        const Bytes bytes = read_file(file);
        if (sha256_hex(bytes) != p.checksum) {
            issues.push_back({ValidationIssue::Kind::checksum_mismatch, p.page_no, p.file});
        }
        const auto header = probe_image(bytes);
        if (!header || header->width != p.width || header->height != p.height) {
            issues.push_back({ValidationIssue::Kind::dimension_mismatch, p.page_no, p.file});
        }
    }
    return issues;
}

} // namespace lens
