#include "lens/selfannot.hpp"

#include "lens/codec.hpp"
#include "lens/detect.hpp"
#include "lens/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <sstream>

namespace lens {

namespace {

std::string stem_for(int page_no) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d", page_no);
    return buf;
}

std::string fixed6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

} // namespace

DatasetSplit split_pages(std::vector<int> pages, double ratio, std::uint64_t seed) {
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw Error(ErrorCode::invalid_input, "split ratio must lie in [0,1]");
    std::sort(pages.begin(), pages.end());
    std::mt19937_64 rng(seed);
    for (std::size_t i = pages.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(pages[i - 1], pages[j]);
    }
    const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(pages.size())));
    DatasetSplit split;
    split.train_pages.assign(pages.begin(), pages.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.val_pages.assign(pages.begin() + static_cast<std::ptrdiff_t>(n_train), pages.end());
    std::sort(split.train_pages.begin(), split.train_pages.end());
    std::sort(split.val_pages.begin(), split.val_pages.end());
    return split;
}

std::string yolo_line(const std::vector<Point>& polygon, int width, int height) {
    std::string line = "0";
    for (const Point& p : polygon) {
        line += " " + fixed6(std::clamp(p.x / width, 0.0, 1.0));
        line += " " + fixed6(std::clamp(p.y / height, 0.0, 1.0));
    }
    return line;
}

ExportResult export_yolo(const Project& project, const std::filesystem::path& out_dir, const ExportOptions& options) {
    const PredictionFile predictions = DetectionStore(project.dir).snapshot();
    std::vector<int> pages;
    for (const DetectionSet& set : predictions.pages) {
        const bool any = std::any_of(set.detections.begin(), set.detections.end(),
                                     [](const Detection& d) { return is_accepted(d.review); });
        if (any) pages.push_back(set.page_no);
    }
    if (pages.empty()) throw Error(ErrorCode::empty_dataset, "no accepted detections to export");

    ExportResult result;
    result.dir = out_dir;
    result.split = split_pages(pages, options.ratio, options.seed);
    // Remove artifacts of a previous export so the split is exactly what data.yaml describes.
    std::filesystem::remove(out_dir / "data.yaml");
    std::filesystem::remove_all(out_dir / "images");
    std::filesystem::remove_all(out_dir / "labels");

    nlohmann::ordered_json provenance = nlohmann::ordered_json::array();
    auto write_side = [&](const std::vector<int>& side, const std::string& name) {
        for (int page_no : side) {
            const PageImage& page = project.page(page_no);
            const DetectionSet* set = predictions.find(page_no);
            std::string text;
            for (const Detection& d : set->detections) {
                if (!is_accepted(d.review)) continue;
                text += yolo_line(d.polygon.vertices(), page.width, page.height) + "\n";
                ++result.instances;
                provenance.push_back({{"split", name},
                                      {"page_no", page_no},
                                      {"detection_id", d.id},
                                      {"origin", to_string(d.origin)},
                                      {"review", to_string(d.review)}});
            }
            const std::string stem = stem_for(page_no);
            write_file_atomic(out_dir / "labels" / name / (stem + ".txt"), text);
            write_file_atomic(out_dir / "images" / name / (stem + ".png"), read_file(project.dir / page.file));
        }
    };
    write_side(result.split.train_pages, "train");
    write_side(result.split.val_pages, "val");
    if (options.provenance) {
        write_file_atomic(out_dir / "provenance.json", provenance.dump(2) + "\n");
    }
    // data.yaml is the commit marker and is written last.
    const std::string yaml = "path: " + std::filesystem::absolute(out_dir).string() +
                             "\ntrain: images/train\nval: images/val\nnc: 1\nnames: ['" + options.class_name + "']\n";
    write_file_atomic(out_dir / "data.yaml", yaml);
    return result;
}

std::vector<Point> parse_yolo_line(const std::string& line, const std::string& where) {
    std::istringstream in(line);
    std::vector<std::string> tokens;
    for (std::string tok; in >> tok;) tokens.push_back(tok);
    if (tokens.empty()) throw Error(ErrorCode::parse, where + ": empty line");
    if (tokens[0].find_first_not_of("0123456789") != std::string::npos) {
        throw Error(ErrorCode::parse, where + ": class id '" + tokens[0] + "' is not a non-negative integer");
    }
    const std::size_t n = tokens.size() - 1;
    if (n % 2 != 0) throw Error(ErrorCode::parse, where + ": odd coordinate count " + std::to_string(n));
    if (n < 6) throw Error(ErrorCode::parse, where + ": need at least 3 points, got " + std::to_string(n / 2));
    std::vector<double> values;
    for (std::size_t i = 1; i < tokens.size(); ++i) {
        char* end = nullptr;
        errno = 0;
        const double v = std::strtod(tokens[i].c_str(), &end);
        if (end == tokens[i].c_str() || *end != '\0' || errno != 0 || !std::isfinite(v)) {
            throw Error(ErrorCode::parse, where + ": '" + tokens[i] + "' is not a number");
        }
        if (v < 0.0 || v > 1.0) throw Error(ErrorCode::parse, where + ": value " + tokens[i] + " outside [0,1]");
        values.push_back(v);
    }
    std::vector<Point> pts;
    for (std::size_t i = 0; i < values.size(); i += 2) pts.push_back({values[i], values[i + 1]});
    return pts;
}

std::vector<YoloLabelFile> parse_yolo_labels(const std::filesystem::path& dataset_dir) {
    std::vector<YoloLabelFile> out;
    for (const std::string split : {"train", "val"}) {
        const auto label_dir = dataset_dir / "labels" / split;
        if (!std::filesystem::is_directory(label_dir)) continue;
        std::vector<std::filesystem::path> files;
        for (const auto& e : std::filesystem::directory_iterator(label_dir)) {
            if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            YoloLabelFile lf;
            lf.split = split;
            lf.stem = f.stem().string();
            std::filesystem::path image;
            for (const char* ext : {".png", ".jpg", ".jpeg"}) {
                const auto candidate = dataset_dir / "images" / split / (lf.stem + ext);
                if (std::filesystem::exists(candidate)) {
                    image = candidate;
                    break;
                }
            }
            if (image.empty()) throw Error(ErrorCode::parse, f.string() + ": no matching image");
            const auto header = probe_image(read_file(image));
            if (!header) throw Error(ErrorCode::parse, image.string() + ": unreadable image header");
            lf.width = header->width;
            lf.height = header->height;
            const std::string text = read_text(f);
            std::size_t line_no = 0;
            std::size_t start = 0;
            while (start < text.size()) {
                std::size_t end = text.find('\n', start);
                if (end == std::string::npos) end = text.size();
                std::string line = text.substr(start, end - start);
                start = end + 1;
                ++line_no;
                if (!line.empty() && line.back() == '\r') line.pop_back();
                if (line.find_first_not_of(" \t") == std::string::npos) continue;
                std::vector<Point> pts = parse_yolo_line(line, f.string() + ":" + std::to_string(line_no));
                for (Point& p : pts) {
                    p.x *= lf.width;
                    p.y *= lf.height;
                }
                lf.polygons.push_back(std::move(pts));
            }
            out.push_back(std::move(lf));
        }
    }
    return out;
}

} // namespace lens
