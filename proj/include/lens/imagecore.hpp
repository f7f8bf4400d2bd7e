/**
 * @file imagecore.hpp
 * @brief Raster and vector geometry primitives shared by every pipeline stage.
 *
 * Coordinates use the image frame: origin at the top-left corner, x to the
 * right, y downward. Pixel (i, j) covers the unit square [i, i+1) x [j, j+1)
 * and its center sits at (i + 0.5, j + 0.5).
 *
 * All functions are pure; they never mutate their inputs.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lens {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

/// Axis-aligned box in continuous pixel coordinates.
struct BBox {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    BBox() = default;
    /// Throws invalid_geometry when min > max on either axis.
    BBox(double x0, double y0, double x1, double y1);

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }

    friend bool operator==(const BBox&, const BBox&) = default;
};

/**
 * @brief Closed polygon with an implicit edge from the last vertex to the first.
 *
 * Construction drops consecutive duplicate vertices (including a repeated
 * closing vertex) and re-orders the ring to the canonical winding, which is a
 * positive shoelace area in image coordinates. The first vertex is kept in
 * place when the ring is reversed.
 */
class Polygon {
public:
    /// Throws invalid_geometry with fewer than three distinct vertices.
    explicit Polygon(std::vector<Point> vertices);

    const std::vector<Point>& vertices() const { return vertices_; }
    std::size_t size() const { return vertices_.size(); }

    /// Signed shoelace area; non-negative for stored polygons.
    double signed_area() const;
    BBox bounds() const;

    friend bool operator==(const Polygon&, const Polygon&) = default;

private:
    std::vector<Point> vertices_;
};

/// Bit-grid mask. Pixels outside the canvas are always unset.
class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int width, int height);

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty_canvas() const { return width_ == 0 || height_ == 0; }

    bool get(int x, int y) const {
        if (x < 0 || y < 0 || x >= width_ || y >= height_) {
            return false;
        }
        return bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
    }
    void set(int x, int y, bool value = true);

    std::size_t count() const;
    bool any() const;

    /// Pixel-grid bounds of the set region as half-open [x0,x1)x[y0,y1); empty mask gives a zero box.
    BBox pixel_bounds() const;

    BinaryMask complement() const;
    BinaryMask operator|(const BinaryMask& other) const;
    BinaryMask operator&(const BinaryMask& other) const;
    /// True when every set pixel of this mask is also set in @p other.
    bool subset_of(const BinaryMask& other) const;

    std::span<const std::uint8_t> data() const { return bits_; }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// 8-bit interleaved RGB or RGBA raster.
class RasterImage {
public:
    RasterImage() = default;
    /// Throws invalid_input unless channels is 3 or 4 and both dimensions are at least 1.
    RasterImage(int width, int height, int channels, std::uint8_t fill = 0);
    RasterImage(int width, int height, int channels, std::vector<std::uint8_t> pixels);

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    bool has_alpha() const { return channels_ == 4; }

    std::uint8_t* pixel(int x, int y) {
        return pixels_.data() + (static_cast<std::size_t>(y) * width_ + x) * channels_;
    }
    const std::uint8_t* pixel(int x, int y) const {
        return pixels_.data() + (static_cast<std::size_t>(y) * width_ + x) * channels_;
    }

    std::span<const std::uint8_t> data() const { return pixels_; }
    std::span<std::uint8_t> data() { return pixels_; }

    friend bool operator==(const RasterImage&, const RasterImage&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<std::uint8_t> pixels_;
};

/// Pixel (i,j) is set iff its center lies inside @p poly under the even-odd rule.
BinaryMask rasterize_polygon(const Polygon& poly, int width, int height);

/// Even-odd point containment using the same crossing rule as rasterize_polygon.
bool contains(const Polygon& poly, Point p);

/// Square (Chebyshev) structuring element of side 2r+1. Output is clipped to the canvas.
BinaryMask dilate(const BinaryMask& mask, int radius);

/// Dual of dilate with off-canvas pixels treated as unset.
BinaryMask erode(const BinaryMask& mask, int radius);

/// Sets every unset pixel that is not 4-connected to the canvas border through unset pixels.
BinaryMask fill_holes(const BinaryMask& mask);

enum class Connectivity { four = 4, eight = 8 };

/**
 * @brief Splits a mask into connected components.
 *
 * Components are ordered by descending pixel count; ties go to the component
 * whose first pixel in raster order (topmost, then leftmost) comes first.
 */
std::vector<BinaryMask> connected_components(const BinaryMask& mask, Connectivity connectivity);

/**
 * @brief Follows the outer boundary of a single 8-connected region along pixel edges.
 *
 * Holes are ignored (the outline is that of fill_holes(mask)). Collinear
 * lattice vertices are merged, so a solid rectangle yields four corners. The
 * ring starts at the top-left corner of the first set pixel in raster order.
 *
 * Throws invalid_geometry for an empty mask and ambiguous_input when the mask
 * has more than one 8-connected component.
 */
Polygon trace_contour(const BinaryMask& mask);

/// Pixel (x,y) maps to (W-1-x if horizontal, H-1-y if vertical).
RasterImage flip(const RasterImage& image, bool vertical, bool horizontal);
BinaryMask flip(const BinaryMask& mask, bool vertical, bool horizontal);

/// Swaps the axes: pixel (x,y) maps to (y,x). Output is H x W.
RasterImage transpose(const RasterImage& image);

/**
 * @brief Cuts the mask's bounding box (plus padding, clipped) out of the page as RGBA.
 *
 * RGB is copied from the page; alpha is 255 where the mask is set and 0
 * elsewhere. Throws invalid_geometry for an empty mask and invalid_input when
 * mask and page sizes differ.
 */
RasterImage crop_with_alpha(const RasterImage& page, const BinaryMask& mask, int padding);

/// Tight bounding box of the polygon's vertices.
BBox tight_bbox(const Polygon& poly);

} // namespace lens
