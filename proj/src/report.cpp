#include "lens/report.hpp"

#include "lens/error.hpp"
#include "lens/pdf_writer.hpp"
#include "lens/workspace.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>

namespace lens {

namespace {

constexpr double eps = 1e-9;
constexpr double pt_per_mm = 72.0 / 25.4;
constexpr double index_row_mm = 5.0;
constexpr double index_header_mm = 12.0;

struct Shelf {
    int page = 0;
    double y = 0;
    double height = 0;
    /// Right edge of the last item, relative to the printable area.
    double used = 0;
    bool empty = true;
};

std::string fit_caption(const std::string& text, double width_mm, double font_pt) {
    // Helvetica averages roughly half an em per character.
    const double char_mm = font_pt * 0.5 / pt_per_mm;
    const auto max_chars = static_cast<std::size_t>(std::max(1.0, std::floor(width_mm / char_mm)));
    if (text.size() <= max_chars) return text;
    return max_chars > 3 ? text.substr(0, max_chars - 3) + "..." : text.substr(0, max_chars);
}

int rows_per_index_page(const PageSpec& spec) {
    return std::max(1, static_cast<int>(std::floor((spec.printable_height() - index_header_mm) / index_row_mm)));
}

} // namespace

void PageSpec::validate() const {
    if (!(page_width > 0 && page_height > 0 && margin >= 0 && gutter >= 0 && caption_height >= 0)) {
        throw Error(ErrorCode::invalid_input, "page lengths must be positive and margins, gutter, caption non-negative");
    }
    if (!(printable_width() > 0 && printable_height() > 0)) {
        throw Error(ErrorCode::invalid_input, "margins leave no printable area");
    }
}

PageSpec page_spec_for(const std::string& name) {
    PageSpec s;
    std::string n = name;
    std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (n == "a4") return s;
    if (n == "a3") {
        s.page_width = 297;
        s.page_height = 420;
    } else if (n == "a5") {
        s.page_width = 148;
        s.page_height = 210;
        s.margin = 10;
    } else if (n == "letter") {
        s.page_width = 215.9;
        s.page_height = 279.4;
    } else if (n == "legal") {
        s.page_width = 215.9;
        s.page_height = 355.6;
    } else {
        throw Error(ErrorCode::invalid_input, "unknown page size '" + name + "' (a3, a4, a5, letter, legal)");
    }
    return s;
}

PackedLayout pack(const std::vector<PackItem>& items, const PageSpec& spec) {
    spec.validate();
    const double pw = spec.printable_width();
    const double ph = spec.printable_height();
    for (const PackItem& it : items) {
        if (!(it.width > 0 && it.height > 0)) {
            throw Error(ErrorCode::pack, "card " + it.card_id + " has a non-positive size");
        }
        if (it.width > pw + eps || it.height + spec.caption_height > ph + eps) {
            throw Error(ErrorCode::pack, "card " + it.card_id + " does not fit the printable area");
        }
    }
    std::vector<const PackItem*> order;
    for (const PackItem& it : items) order.push_back(&it);
    std::stable_sort(order.begin(), order.end(), [](const PackItem* a, const PackItem* b) {
        if (a->height != b->height) return a->height > b->height;
        if (a->width != b->width) return a->width > b->width;
        return a->card_id < b->card_id;
    });

    PackedLayout layout;
    layout.spec = spec;
    std::vector<Shelf> shelves;
    std::vector<double> page_used;
    for (const PackItem* it : order) {
        const double fw = it->width;
        const double fh = it->height + spec.caption_height;
        Shelf* target = nullptr;
        double x = 0;
        for (Shelf& s : shelves) {
            const double at = s.empty ? 0.0 : s.used + spec.gutter;
            if (fh <= s.height + eps && at + fw <= pw + eps) {
                target = &s;
                x = at;
                break;
            }
        }
        if (target == nullptr) {
            int page = -1;
            double y = 0;
            for (std::size_t p = 0; p < page_used.size(); ++p) {
                const double at = page_used[p] + spec.gutter;
                if (at + fh <= ph + eps) {
                    page = static_cast<int>(p);
                    y = at;
                    break;
                }
            }
            if (page < 0) {
                page = static_cast<int>(page_used.size());
                page_used.push_back(0);
                y = 0;
            }
            page_used[static_cast<std::size_t>(page)] = y + fh;
            Shelf s;
            s.page = page;
            s.y = y;
            s.height = fh;
            // Keep shelves ordered by (page, y) so first-fit scans pages in order.
            const auto pos = std::upper_bound(shelves.begin(), shelves.end(), s, [](const Shelf& a, const Shelf& b) {
                return a.page != b.page ? a.page < b.page : a.y < b.y;
            });
            target = &*shelves.insert(pos, s);
            x = 0;
        }
        target->used = x + fw;
        target->empty = false;
        layout.placements.push_back(
            {it->card_id, target->page, spec.margin + x, spec.margin + target->y, it->width, it->height});
    }
    layout.page_count = static_cast<int>(page_used.size());
    return layout;
}

std::string layout_to_json(const PackedLayout& layout) {
    nlohmann::ordered_json j;
    j["schema"] = 1;
    j["unit"] = "mm";
    j["page"] = {{"width", layout.spec.page_width},
                 {"height", layout.spec.page_height},
                 {"margin", layout.spec.margin},
                 {"gutter", layout.spec.gutter},
                 {"caption_height", layout.spec.caption_height}};
    j["page_count"] = layout.page_count;
    j["index_pages"] = index_page_count(layout.placements.size(), layout.spec);
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const Placement& p : layout.placements) {
        arr.push_back({{"card_id", p.card_id},
                       {"page_index", p.page_index},
                       {"x", p.x},
                       {"y", p.y},
                       {"width", p.width},
                       {"height", p.height}});
    }
    j["placements"] = std::move(arr);
    return j.dump(2) + "\n";
}

int index_page_count(std::size_t n, const PageSpec& spec) {
    const auto rows = static_cast<std::size_t>(rows_per_index_page(spec));
    return std::max(1, static_cast<int>((n + rows - 1) / rows));
}

Bytes render_pdf(const PackedLayout& layout, const std::vector<RenderItem>& items, const ReportOptions& options) {
    const PageSpec& spec = layout.spec;
    std::map<std::string, const RenderItem*> by_id;
    for (const RenderItem& it : items) by_id[it.card_id] = &it;

    pdf::Writer w;
    const double page_w = spec.page_width * pt_per_mm;
    const double page_h = spec.page_height * pt_per_mm;
    auto to_pdf_y = [&](double y_mm) { return page_h - y_mm * pt_per_mm; };
    const double caption_pt = std::min(8.0, spec.caption_height * pt_per_mm * 0.6);

    std::vector<std::vector<const Placement*>> per_page(static_cast<std::size_t>(layout.page_count));
    for (const Placement& p : layout.placements) {
        if (p.page_index < 0 || p.page_index >= layout.page_count) {
            throw Error(ErrorCode::render, "placement of " + p.card_id + " refers to a missing page");
        }
        per_page[static_cast<std::size_t>(p.page_index)].push_back(&p);
    }
    for (const auto& page : per_page) {
        std::vector<int> handles;
        for (const Placement* p : page) {
            const auto found = by_id.find(p->card_id);
            if (found == by_id.end() || !std::filesystem::exists(found->second->image)) {
                throw Error(ErrorCode::render, "missing card image for " + p->card_id);
            }
            handles.push_back(w.add_image(read_png(found->second->image)));
        }
        w.begin_page(page_w, page_h);
        for (std::size_t i = 0; i < page.size(); ++i) {
            const Placement* p = page[i];
            w.draw_image(handles[i], p->x * pt_per_mm, to_pdf_y(p->y + p->height), p->width * pt_per_mm,
                         p->height * pt_per_mm);
            if (spec.caption_height > 0) {
                const std::string caption = fit_caption(by_id[p->card_id]->caption, p->width, caption_pt);
                w.text(p->x * pt_per_mm, to_pdf_y(p->y + p->height + spec.caption_height * 0.7), caption_pt, caption);
            }
        }
        w.end_page();
    }

    std::vector<const Placement*> sorted;
    for (const Placement& p : layout.placements) sorted.push_back(&p);
    std::stable_sort(sorted.begin(), sorted.end(), [](const Placement* a, const Placement* b) { return a->card_id < b->card_id; });
    const int rows = rows_per_index_page(spec);
    const int index_pages = index_page_count(sorted.size(), spec);
    char scale_buf[32];
    std::snprintf(scale_buf, sizeof(scale_buf), "%.2f", options.scale);
    for (int ip = 0; ip < index_pages; ++ip) {
        w.begin_page(page_w, page_h);
        const double left = spec.margin * pt_per_mm;
        std::string header = "Index - " + std::to_string(sorted.size()) + " items, print scale x" + scale_buf;
        if (index_pages > 1) header += " (" + std::to_string(ip + 1) + "/" + std::to_string(index_pages) + ")";
        w.text(left, to_pdf_y(spec.margin + 6.0), 12.0, header);
        for (int r = 0; r < rows; ++r) {
            const std::size_t k = static_cast<std::size_t>(ip) * static_cast<std::size_t>(rows) + static_cast<std::size_t>(r);
            if (k >= sorted.size()) break;
            const double y = spec.margin + index_header_mm + r * index_row_mm + index_row_mm * 0.7;
            w.text(left, to_pdf_y(y), 9.0, sorted[k]->card_id);
            w.text(left + spec.printable_width() * 0.6 * pt_per_mm, to_pdf_y(y), 9.0,
                   "page " + std::to_string(sorted[k]->page_index + 1));
        }
        w.end_page();
    }
    pdf::DocumentInfo info;
    info.title = options.title;
    info.creation_date = options.creation_date;
    return w.finish(info);
}

ReportResult build_report(const Project& project, const PageSpec& spec, const ReportOptions& options) {
    if (!(options.scale > 0)) throw Error(ErrorCode::invalid_input, "scale must be positive");
    const std::vector<InstanceCard> cards = load_cards(project.dir);
    const Catalog catalog = load_catalog(project.dir);
    std::vector<PackItem> items;
    std::vector<RenderItem> render_items;
    for (const InstanceCard& c : cards) {
        const int dpi = c.dpi > 0 ? c.dpi : project.dpi;
        const double mm_per_px = 25.4 / dpi * options.scale;
        std::string caption = c.card_id;
        if (const CatalogRecord* rec = catalog.find(c.card_id)) {
            caption = rec->catalog_id + " " + c.card_id;
            for (const auto& [k, v] : rec->fields) {
                if (!v.empty()) caption += "; " + k + " " + v;
            }
        }
        items.push_back({c.card_id, c.width * mm_per_px, c.height * mm_per_px, caption});
        render_items.push_back({c.card_id, project.dir / c.file, caption});
    }
    ReportResult result;
    result.layout = pack(items, spec);
    const Bytes pdf_bytes = render_pdf(result.layout, render_items, options);
    const auto out_dir = workspace::exports_dir(project.dir) / "report";
    result.pdf = out_dir / "report.pdf";
    result.sidecar = out_dir / "layout.json";
    write_file_atomic(result.pdf, pdf_bytes);
    write_file_atomic(result.sidecar, layout_to_json(result.layout));
    result.pdf_pages = result.layout.page_count + index_page_count(result.layout.placements.size(), spec);
    return result;
}

} // namespace lens
