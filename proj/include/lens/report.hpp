/**
 * @file report.hpp
 * @brief Shelf bin packing of cards onto report pages and PDF rendering.
 *
 * Lengths are millimetres; positions use a top-left page origin with y down.
 */
#pragma once

#include "lens/cards.hpp"
#include "lens/codec.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace lens {

struct PackItem {
    std::string card_id;
    /// Printed card size; the caption strip is added below it.
    double width = 0;
    double height = 0;
    std::string caption;
};

struct PageSpec {
    double page_width = 210.0;
    double page_height = 297.0;
    double margin = 15.0;
    double gutter = 5.0;
    double caption_height = 6.0;

    double printable_width() const { return page_width - 2 * margin; }
    double printable_height() const { return page_height - 2 * margin; }
    /// Throws invalid_input when the printable area or any length is not positive.
    void validate() const;
};

/// Named page sizes: a3, a4, a5, letter, legal (portrait).
PageSpec page_spec_for(const std::string& name);

struct Placement {
    std::string card_id;
    int page_index = 0;
    /// Top-left corner of the card image.
    double x = 0;
    double y = 0;
    double width = 0;
    /// Card image height; the caption occupies the next caption_height mm.
    double height = 0;
};

struct PackedLayout {
    PageSpec spec;
    std::vector<Placement> placements;
    int page_count = 0;
};

/**
 * Shelf first-fit decreasing height. Items are sorted by (height + caption
 * desc, width desc, card_id asc). Each item goes onto the first existing shelf,
 * across all pages in order, with enough width left; otherwise a new shelf is
 * opened on the first page with enough height left, otherwise on a new page.
 * Items are never rotated. Adjacent items and shelves are separated by the
 * gutter. Throws pack errors naming any item that cannot fit a page.
 */
PackedLayout pack(const std::vector<PackItem>& items, const PageSpec& spec);

std::string layout_to_json(const PackedLayout& layout);

struct RenderItem {
    std::string card_id;
    std::filesystem::path image;
    std::string caption;
};

struct ReportOptions {
    std::string title = "Pottery catalogue";
    /// Fixed PDF date for reproducible output.
    std::string creation_date = "D:19700101000000Z";
    double scale = 1.0;
};

/**
 * Draws every placement at its size, the caption below it, then index pages
 * mapping card_id to report page. An empty layout yields one index page.
 * Throws render errors for missing card images. Returns the PDF bytes.
 */
Bytes render_pdf(const PackedLayout& layout, const std::vector<RenderItem>& items, const ReportOptions& options);

/// Index pages needed for @p n items.
int index_page_count(std::size_t n, const PageSpec& spec);

struct ReportResult {
    PackedLayout layout;
    std::filesystem::path pdf;
    std::filesystem::path sidecar;
    int pdf_pages = 0;
};

/**
 * Lays out the project's cards (canonical images when available) at true
 * print scale times @p options.scale, with captions from the catalog, and
 * writes exports/report/report.pdf plus layout.json.
 */
ReportResult build_report(const Project& project, const PageSpec& spec, const ReportOptions& options);

} // namespace lens
