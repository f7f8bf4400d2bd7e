#pragma once

#include "lens/codec.hpp"
#include "lens/imagecore.hpp"

#include <string>
#include <vector>

namespace lens::pdf {

struct DocumentInfo {
    std::string title;
    std::string producer = "lens";
    /// PDF date string such as "D:20250101000000Z". Fixed by the caller for reproducible output.
    std::string creation_date = "D:19700101000000Z";
};

/**
 * @brief Streaming builder for simple PDF 1.7 files.
 *
 * Coordinates are PDF points with the origin at the bottom-left corner of
 * the page. Images are Flate-compressed; RGBA images get a soft mask. Text
 * uses the standard Helvetica font with WinAnsi encoding; characters outside
 * Latin-1 are written as '?'. Output is byte-for-byte reproducible.
 */
class Writer {
public:
    Writer();

    /// Registers an image XObject; returns a handle for draw_image().
    int add_image(const RasterImage& image);

    void begin_page(double width_pt, double height_pt);
    void draw_image(int image, double x, double y, double width, double height);
    void fill_rect(double x, double y, double width, double height, double r, double g, double b);
    void stroke_rect(double x, double y, double width, double height, double line_width);
    void text(double x, double y, double size, const std::string& utf8);
    /// Appends raw content-stream operators to the current page.
    void raw(const std::string& ops);
    void end_page();

    std::size_t page_count() const { return pages_.size(); }

    Bytes finish(const DocumentInfo& info);

private:
    struct Page {
        double width = 0;
        double height = 0;
        std::string content;
        std::vector<int> images;
    };
    struct Image {
        int width = 0;
        int height = 0;
        Bytes rgb;
        Bytes alpha;
    };

    std::vector<Image> images_;
    std::vector<Page> pages_;
    bool in_page_ = false;
};

/// Formats a number for content streams (up to 4 decimals, no exponent).
std::string format_number(double v);

} // namespace lens::pdf
