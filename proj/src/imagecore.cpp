#include "lens/imagecore.hpp"

#include "lens/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

namespace lens {

BBox::BBox(double x0, double y0, double x1, double y1) : x_min(x0), y_min(y0), x_max(x1), y_max(y1) {
    if (!(x0 <= x1) || !(y0 <= y1)) {
        throw Error(ErrorCode::invalid_geometry, "bounding box has min greater than max");
    }
}

namespace {

double shoelace(const std::vector<Point>& v) {
    double twice = 0.0;
    for (std::size_t i = 0, n = v.size(); i < n; ++i) {
        const Point& a = v[i];
        const Point& b = v[(i + 1) % n];
        twice += a.x * b.y - b.x * a.y;
    }
    return twice / 2.0;
}

} // namespace

Polygon::Polygon(std::vector<Point> vertices) {
    for (const Point& p : vertices) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw Error(ErrorCode::invalid_geometry, "polygon vertex is not finite");
        }
        if (vertices_.empty() || !(vertices_.back() == p)) {
            vertices_.push_back(p);
        }
    }
    while (vertices_.size() > 1 && vertices_.back() == vertices_.front()) {
        vertices_.pop_back();
    }
    if (vertices_.size() < 3) {
        throw Error(ErrorCode::invalid_geometry,
                    "polygon needs at least 3 distinct vertices, got " + std::to_string(vertices_.size()));
    }
    if (shoelace(vertices_) < 0.0) {
        std::reverse(vertices_.begin() + 1, vertices_.end());
    }
}

double Polygon::signed_area() const { return shoelace(vertices_); }

BBox Polygon::bounds() const { return tight_bbox(*this); }

BBox tight_bbox(const Polygon& poly) {
    double x0 = std::numeric_limits<double>::infinity();
    double y0 = x0;
    double x1 = -x0;
    double y1 = -x0;
    for (const Point& p : poly.vertices()) {
        x0 = std::min(x0, p.x);
        y0 = std::min(y0, p.y);
        x1 = std::max(x1, p.x);
        y1 = std::max(y1, p.y);
    }
    return BBox(x0, y0, x1, y1);
}

// --- BinaryMask --------------------------------------------------------------

BinaryMask::BinaryMask(int width, int height) : width_(width), height_(height) {
    if (width < 0 || height < 0) {
        throw Error(ErrorCode::invalid_input, "mask dimensions must be non-negative");
    }
    bits_.assign(static_cast<std::size_t>(width) * height, 0);
}

void BinaryMask::set(int x, int y, bool value) {
    if (x < 0 || y < 0 || x >= width_ || y >= height_) {
        return;
    }
    bits_[static_cast<std::size_t>(y) * width_ + x] = value ? 1 : 0;
}

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

bool BinaryMask::any() const {
    return std::find(bits_.begin(), bits_.end(), std::uint8_t{1}) != bits_.end();
}

BBox BinaryMask::pixel_bounds() const {
    int x0 = width_, y0 = height_, x1 = -1, y1 = -1;
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) {
            if (get(x, y)) {
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
            }
        }
    }
    if (x1 < 0) {
        return {};
    }
    return BBox(x0, y0, x1 + 1, y1 + 1);
}

BinaryMask BinaryMask::complement() const {
    BinaryMask out = *this;
    for (auto& b : out.bits_) {
        b = b ? 0 : 1;
    }
    return out;
}

namespace {

void require_same_canvas(const BinaryMask& a, const BinaryMask& b) {
    if (a.width() != b.width() || a.height() != b.height()) {
        throw Error(ErrorCode::invalid_input, "mask canvas sizes differ");
    }
}

} // namespace

BinaryMask BinaryMask::operator|(const BinaryMask& other) const {
    require_same_canvas(*this, other);
    BinaryMask out = *this;
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        out.bits_[i] = bits_[i] | other.bits_[i];
    }
    return out;
}

BinaryMask BinaryMask::operator&(const BinaryMask& other) const {
    require_same_canvas(*this, other);
    BinaryMask out = *this;
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        out.bits_[i] = bits_[i] & other.bits_[i];
    }
    return out;
}

bool BinaryMask::subset_of(const BinaryMask& other) const {
    require_same_canvas(*this, other);
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        if (bits_[i] && !other.bits_[i]) {
            return false;
        }
    }
    return true;
}

// --- RasterImage -------------------------------------------------------------

RasterImage::RasterImage(int width, int height, int channels, std::uint8_t fill)
    : RasterImage(width, height, channels,
                  std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) *
                                                std::max(height, 0) * std::max(channels, 0),
                                            fill)) {}

RasterImage::RasterImage(int width, int height, int channels, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), channels_(channels), pixels_(std::move(pixels)) {
    if (channels != 3 && channels != 4) {
        throw Error(ErrorCode::invalid_input, "raster images must have 3 or 4 channels");
    }
    if (width < 1 || height < 1) {
        throw Error(ErrorCode::invalid_input, "raster dimensions must be at least 1");
    }
    if (pixels_.size() != static_cast<std::size_t>(width) * height * channels) {
        throw Error(ErrorCode::invalid_input, "raster buffer size does not match dimensions");
    }
}

// --- Rasterization -------------------------------------------------------------

namespace {

// Crossing abscissas of the horizontal line at y, using the half-open edge rule
// (a.y > y) != (b.y > y).
void crossings(const Polygon& poly, double y, std::vector<double>& xs) {
    xs.clear();
    const auto& v = poly.vertices();
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
        const Point& a = v[i];
        const Point& b = v[j];
        if ((a.y > y) != (b.y > y)) {
            xs.push_back((b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x);
        }
    }
}

} // namespace

bool contains(const Polygon& poly, Point p) {
    std::vector<double> xs;
    crossings(poly, p.y, xs);
    bool inside = false;
    for (double x : xs) {
        if (p.x < x) {
            inside = !inside;
        }
    }
    return inside;
}

BinaryMask rasterize_polygon(const Polygon& poly, int width, int height) {
    if (width < 1 || height < 1) {
        throw Error(ErrorCode::invalid_input, "raster canvas must be at least 1x1");
    }
    BinaryMask mask(width, height);
    std::vector<double> xs;
    for (int j = 0; j < height; ++j) {
        crossings(poly, j + 0.5, xs);
        std::sort(xs.begin(), xs.end());
        // A center cx is inside iff an odd number of crossings satisfy x <= cx,
        // i.e. cx lies in [xs[2k], xs[2k+1]).
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            const double lo = xs[k];
            const double hi = xs[k + 1];
            if (!(lo < hi)) {
                continue;
            }
            int i = static_cast<int>(std::max(-1.0, std::min(std::floor(lo) - 1.0, static_cast<double>(width))));
            while (i < width && i + 0.5 < lo) {
                ++i;
            }
            for (i = std::max(i, 0); i < width && i + 0.5 < hi; ++i) {
                mask.set(i, j);
            }
        }
    }
    return mask;
}

// --- Morphology ----------------------------------------------------------------

namespace {

enum class Reduce { any, all };

// One separable pass of a 1-D window of half-width r along rows (horizontal) or columns.
BinaryMask window_pass(const BinaryMask& in, int r, bool horizontal, Reduce mode) {
    const int w = in.width();
    const int h = in.height();
    BinaryMask out(w, h);
    const int lines = horizontal ? h : w;
    const int len = horizontal ? w : h;
    std::vector<int> prefix(static_cast<std::size_t>(len) + 1);
    for (int line = 0; line < lines; ++line) {
        prefix[0] = 0;
        for (int k = 0; k < len; ++k) {
            const bool v = horizontal ? in.get(k, line) : in.get(line, k);
            prefix[k + 1] = prefix[k] + (v ? 1 : 0);
        }
        for (int k = 0; k < len; ++k) {
            const int lo = k - r;
            const int hi = k + r;
            bool value = false;
            if (mode == Reduce::any) {
                value = prefix[std::min(hi, len - 1) + 1] - prefix[std::max(lo, 0)] > 0;
            } else {
                value = lo >= 0 && hi < len && prefix[hi + 1] - prefix[lo] == 2 * r + 1;
            }
            if (value) {
                if (horizontal) {
                    out.set(k, line);
                } else {
                    out.set(line, k);
                }
            }
        }
    }
    return out;
}

void require_radius(int radius) {
    if (radius < 0) {
        throw Error(ErrorCode::invalid_input, "morphology radius must be non-negative");
    }
}

} // namespace

BinaryMask dilate(const BinaryMask& mask, int radius) {
    require_radius(radius);
    if (radius == 0 || mask.empty_canvas()) {
        return mask;
    }
    return window_pass(window_pass(mask, radius, true, Reduce::any), radius, false, Reduce::any);
}

BinaryMask erode(const BinaryMask& mask, int radius) {
    require_radius(radius);
    if (radius == 0 || mask.empty_canvas()) {
        return mask;
    }
    return window_pass(window_pass(mask, radius, true, Reduce::all), radius, false, Reduce::all);
}

BinaryMask fill_holes(const BinaryMask& mask) {
    const int w = mask.width();
    const int h = mask.height();
    BinaryMask outside(w, h);
    std::deque<std::pair<int, int>> queue;
    auto seed = [&](int x, int y) {
        if (!mask.get(x, y) && !outside.get(x, y)) {
            outside.set(x, y);
            queue.emplace_back(x, y);
        }
    };
    for (int x = 0; x < w; ++x) {
        seed(x, 0);
        seed(x, h - 1);
    }
    for (int y = 0; y < h; ++y) {
        seed(0, y);
        seed(w - 1, y);
    }
    while (!queue.empty()) {
        auto [x, y] = queue.front();
        queue.pop_front();
        if (x > 0) seed(x - 1, y);
        if (x + 1 < w) seed(x + 1, y);
        if (y > 0) seed(x, y - 1);
        if (y + 1 < h) seed(x, y + 1);
    }
    return outside.complement();
}

std::vector<BinaryMask> connected_components(const BinaryMask& mask, Connectivity connectivity) {
    const int w = mask.width();
    const int h = mask.height();
    std::vector<int> label(static_cast<std::size_t>(w) * h, -1);
    std::vector<BinaryMask> comps;
    std::vector<std::size_t> sizes;
    std::vector<std::pair<int, int>> stack;
    const bool eight = connectivity == Connectivity::eight;

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask.get(x, y) || label[static_cast<std::size_t>(y) * w + x] >= 0) {
                continue;
            }
            const int id = static_cast<int>(comps.size());
            BinaryMask comp(w, h);
            std::size_t size = 0;
            stack.assign(1, {x, y});
            label[static_cast<std::size_t>(y) * w + x] = id;
            while (!stack.empty()) {
                auto [cx, cy] = stack.back();
                stack.pop_back();
                comp.set(cx, cy);
                ++size;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        if ((dx == 0 && dy == 0) || (!eight && dx != 0 && dy != 0)) {
                            continue;
                        }
                        const int nx = cx + dx;
                        const int ny = cy + dy;
                        if (!mask.get(nx, ny)) {
                            continue;
                        }
                        int& l = label[static_cast<std::size_t>(ny) * w + nx];
                        if (l < 0) {
                            l = id;
                            stack.emplace_back(nx, ny);
                        }
                    }
                }
            }
            comps.push_back(std::move(comp));
            sizes.push_back(size);
        }
    }

    // Discovery order is raster order of first pixels, so a stable sort on size
    // gives the required tie-break.
    std::vector<std::size_t> order(comps.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sizes[a] > sizes[b]; });
    std::vector<BinaryMask> sorted;
    sorted.reserve(comps.size());
    for (std::size_t i : order) {
        sorted.push_back(std::move(comps[i]));
    }
    return sorted;
}

// --- Contour tracing -----------------------------------------------------------

Polygon trace_contour(const BinaryMask& mask) {
    const int w = mask.width();
    const int h = mask.height();
    int sx = -1;
    int sy = -1;
    for (int y = 0; y < h && sx < 0; ++y) {
        for (int x = 0; x < w; ++x) {
            if (mask.get(x, y)) {
                sx = x;
                sy = y;
                break;
            }
        }
    }
    if (sx < 0) {
        throw Error(ErrorCode::invalid_geometry, "cannot trace an empty mask");
    }
    if (connected_components(mask, Connectivity::eight).size() > 1) {
        throw Error(ErrorCode::ambiguous_input, "mask has more than one 8-connected component");
    }

    // Directions: 0 east, 1 south, 2 west, 3 north. The set region stays on the
    // right-hand side of travel. At each lattice vertex a left turn takes
    // priority, which keeps diagonally touching pixels in one outline.
    static constexpr int step_x[4] = {1, 0, -1, 0};
    static constexpr int step_y[4] = {0, 1, 0, -1};

    auto ahead = [&](int vx, int vy, int dir, bool left) {
        switch (dir) {
        case 0: return left ? mask.get(vx, vy - 1) : mask.get(vx, vy);
        case 1: return left ? mask.get(vx, vy) : mask.get(vx - 1, vy);
        case 2: return left ? mask.get(vx - 1, vy) : mask.get(vx - 1, vy - 1);
        default: return left ? mask.get(vx - 1, vy - 1) : mask.get(vx, vy - 1);
        }
    };

    std::vector<Point> corners;
    corners.push_back({static_cast<double>(sx), static_cast<double>(sy)});
    int vx = sx;
    int vy = sy;
    int dir = 0;
    const std::size_t limit = 4 * (static_cast<std::size_t>(w) + 1) * (static_cast<std::size_t>(h) + 1) + 8;
    for (std::size_t steps = 0; steps < limit; ++steps) {
        vx += step_x[dir];
        vy += step_y[dir];
        int next = dir;
        if (ahead(vx, vy, dir, true)) {
            next = (dir + 3) % 4;
        } else if (!ahead(vx, vy, dir, false)) {
            next = (dir + 1) % 4;
        }
        if (vx == sx && vy == sy && next == 0) {
            return Polygon(std::move(corners));
        }
        if (next != dir) {
            corners.push_back({static_cast<double>(vx), static_cast<double>(vy)});
        }
        dir = next;
    }
    throw Error(ErrorCode::invalid_geometry, "contour tracing did not close");
}

// --- Flips and crops -----------------------------------------------------------

RasterImage flip(const RasterImage& image, bool vertical, bool horizontal) {
    RasterImage out = image;
    const int w = image.width();
    const int h = image.height();
    const int c = image.channels();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int tx = horizontal ? w - 1 - x : x;
            const int ty = vertical ? h - 1 - y : y;
            std::copy_n(image.pixel(x, y), c, out.pixel(tx, ty));
        }
    }
    return out;
}

BinaryMask flip(const BinaryMask& mask, bool vertical, bool horizontal) {
    const int w = mask.width();
    const int h = mask.height();
    BinaryMask out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (mask.get(x, y)) {
                out.set(horizontal ? w - 1 - x : x, vertical ? h - 1 - y : y);
            }
        }
    }
    return out;
}

RasterImage transpose(const RasterImage& image) {
    RasterImage out(image.height(), image.width(), image.channels());
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            std::copy_n(image.pixel(x, y), image.channels(), out.pixel(y, x));
        }
    }
    return out;
}

RasterImage crop_with_alpha(const RasterImage& page, const BinaryMask& mask, int padding) {
    if (mask.width() != page.width() || mask.height() != page.height()) {
        throw Error(ErrorCode::invalid_input, "mask and page dimensions differ");
    }
    if (padding < 0) {
        throw Error(ErrorCode::invalid_input, "padding must be non-negative");
    }
    if (!mask.any()) {
        throw Error(ErrorCode::invalid_geometry, "cannot crop an empty mask");
    }
    const BBox b = mask.pixel_bounds();
    const int x0 = std::max(0, static_cast<int>(b.x_min) - padding);
    const int y0 = std::max(0, static_cast<int>(b.y_min) - padding);
    const int x1 = std::min(page.width(), static_cast<int>(b.x_max) + padding);
    const int y1 = std::min(page.height(), static_cast<int>(b.y_max) + padding);
    RasterImage out(x1 - x0, y1 - y0, 4);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            const std::uint8_t* src = page.pixel(x, y);
            std::uint8_t* dst = out.pixel(x - x0, y - y0);
            dst[0] = src[0];
            dst[1] = src[1];
            dst[2] = src[2];
            dst[3] = mask.get(x, y) ? 255 : 0;
        }
    }
    return out;
}

} // namespace lens
