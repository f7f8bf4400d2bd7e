// Fixtures shared by unit and acceptance tests: temp directories, random
// masks and blobs, synthetic pages and projects.
#pragma once

#include "lens/codec.hpp"
#include "lens/detect.hpp"
#include "lens/imagecore.hpp"
#include "lens/ingest.hpp"
#include "lens/workspace.hpp"

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace testkit {

namespace fs = std::filesystem;

class TempDir {
public:
    explicit TempDir(const std::string& tag = "lens") {
        std::string templ = (fs::temp_directory_path() / (tag + "-XXXXXX")).string();
        if (mkdtemp(templ.data()) == nullptr) std::abort();
        path_ = templ;
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    fs::path path_;
};

inline lens::BinaryMask random_mask(int w, int h, double density, std::mt19937_64& rng) {
    std::bernoulli_distribution bit(density);
    lens::BinaryMask m(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (bit(rng)) m.set(x, y);
        }
    }
    return m;
}

/// 4-connected blob of exactly @p pixels pixels grown by random frontier expansion.
inline lens::BinaryMask random_blob(int w, int h, int pixels, std::mt19937_64& rng) {
    lens::BinaryMask m(w, h);
    std::vector<std::pair<int, int>> cells;
    std::uniform_int_distribution<int> sx(w / 4, 3 * w / 4), sy(h / 4, 3 * h / 4);
    cells.push_back({sx(rng), sy(rng)});
    m.set(cells[0].first, cells[0].second);
    const int dx[] = {1, -1, 0, 0};
    const int dy[] = {0, 0, 1, -1};
    while (static_cast<int>(cells.size()) < pixels) {
        std::uniform_int_distribution<std::size_t> pick(0, cells.size() - 1);
        const auto [cx, cy] = cells[pick(rng)];
        const int d = std::uniform_int_distribution<int>(0, 3)(rng);
        const int nx = cx + dx[d];
        const int ny = cy + dy[d];
        if (nx < 0 || ny < 0 || nx >= w || ny >= h || m.get(nx, ny)) continue;
        m.set(nx, ny);
        cells.push_back({nx, ny});
    }
    return m;
}

/// RGB image with random content; with alpha when @p channels is 4.
inline lens::RasterImage random_image(int w, int h, int channels, std::mt19937_64& rng) {
    lens::RasterImage img(w, h, channels);
    std::uniform_int_distribution<int> byte(0, 255);
    for (auto& v : img.data()) v = static_cast<std::uint8_t>(byte(rng));
    return img;
}

/// Star-shaped polygon around (cx, cy) with radii in [rmin, rmax].
inline std::vector<lens::Point> random_star(double cx, double cy, double rmin, double rmax, int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> rad(rmin, rmax);
    std::vector<lens::Point> pts;
    for (int i = 0; i < n; ++i) {
        const double a = 2.0 * M_PI * i / n;
        const double r = rad(rng);
        pts.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
    }
    return pts;
}

/// Fills the pixels whose centers fall inside @p poly (even-odd) with a gray level.
inline void paint_polygon(lens::RasterImage& img, const std::vector<lens::Point>& poly, std::uint8_t level) {
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const double px = x + 0.5;
            const double py = y + 0.5;
            bool inside = false;
            for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
                const auto& a = poly[i];
                const auto& b = poly[j];
                if ((a.y > py) != (b.y > py) && px < (b.x - a.x) * (py - a.y) / (b.y - a.y) + a.x) inside = !inside;
            }
            if (inside) {
                std::uint8_t* p = img.pixel(x, y);
                for (int c = 0; c < 3; ++c) p[c] = level;
            }
        }
    }
}

/// Random RGBA card with a corner marker; no flip or rotation maps it onto itself.
inline lens::RasterImage asymmetric_card(int w, int h, std::mt19937_64& rng) {
    lens::RasterImage img = random_image(w, h, 4, rng);
    for (int y = 0; y < std::min(h, 3); ++y) {
        for (int x = 0; x < std::min(w, 2); ++x) {
            std::uint8_t* p = img.pixel(x, y);
            p[0] = 255;
            p[1] = 0;
            p[2] = 7;
            p[3] = 255;
        }
    }
    return img;
}

/**
 * Writes a project with @p pages random pages of @p w x @p h pixels and three
 * rectangular detections per page: accepted, unreviewed and rejected. The
 * accepted one on page p covers [10+p, 40+p) x [8, 30).
 */
inline lens::Project make_project(const fs::path& dir, int pages, std::mt19937_64& rng, int w = 120, int h = 90) {
    lens::Project project;
    project.id = dir.filename().string();
    project.dir = dir;
    project.dpi = 150;
    project.source_kind = lens::SourceKind::image_dir;
    project.created_at = "2024-01-01T00:00:00Z";
    fs::create_directories(lens::workspace::pages_dir(dir));
    lens::PredictionFile preds;
    for (int p = 1; p <= pages; ++p) {
        lens::PageImage page;
        page.page_no = p;
        page.width = w;
        page.height = h;
        page.dpi = project.dpi;
        page.file = lens::workspace::page_file_name(p);
        lens::write_png(dir / page.file, random_image(w, h, 3, rng));
        page.checksum = lens::sha256_hex(lens::read_file(dir / page.file));
        project.pages.push_back(page);
        lens::DetectionSet& set = preds.get_or_add(p);
        set.width = w;
        set.height = h;
        const lens::Review states[] = {lens::Review::accepted, lens::Review::unreviewed, lens::Review::rejected};
        for (int k = 0; k < 3; ++k) {
            lens::Detection d;
            d.id = "p" + std::to_string(p) + "_d" + std::to_string(k + 1);
            d.page_no = p;
            const double x0 = 10 + p + 35 * k;
            d.polygon = lens::Polygon({{x0, 8}, {x0 + 30, 8}, {x0 + 30, 30}, {x0, 30}});
            d.bbox = lens::tight_bbox(d.polygon);
            d.score = 0.9 - 0.2 * k;
            d.review = states[k];
            set.detections.push_back(d);
        }
    }
    lens::save_manifest(project);
    lens::write_predictions(lens::workspace::detections_path(dir), preds);
    return project;
}

} // namespace testkit
