#include "lens/pdf_writer.hpp"

#include "lens/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace lens::pdf {

std::string format_number(double v) {
    if (std::abs(v) < 5e-5) {
        return "0";
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    std::string s = buf;
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

namespace {

std::string escape_text(const std::string& utf8) {
    std::string out;
    for (std::size_t i = 0; i < utf8.size();) {
        const auto c = static_cast<unsigned char>(utf8[i]);
        std::uint32_t cp = '?';
        std::size_t len = 1;
        if (c < 0x80) {
            cp = c;
        } else if ((c & 0xE0) == 0xC0 && i + 1 < utf8.size()) {
            cp = ((c & 0x1Fu) << 6) | (static_cast<unsigned char>(utf8[i + 1]) & 0x3Fu);
            len = 2;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
        }
        i += len;
        if (cp > 0xFF || (cp < 0x20) || (cp >= 0x7F && cp < 0xA0)) {
            cp = '?';
        }
        if (cp == '(' || cp == ')' || cp == '\\') {
            out.push_back('\\');
            out.push_back(static_cast<char>(cp));
        } else if (cp >= 0x80) {
            char buf[8];
            std::snprintf(buf, sizeof(buf), "\\%03o", static_cast<unsigned>(cp));
            out += buf;
        } else {
            out.push_back(static_cast<char>(cp));
        }
    }
    return out;
}

std::string escape_literal(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '(' || c == ')' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

} // namespace

Writer::Writer() = default;

int Writer::add_image(const RasterImage& image) {
    Image img;
    img.width = image.width();
    img.height = image.height();
    const std::size_t n = static_cast<std::size_t>(image.width()) * image.height();
    img.rgb.resize(n * 3);
    bool has_alpha = false;
    if (image.has_alpha()) {
        img.alpha.resize(n);
    }
    const auto px = image.data();
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t* p = px.data() + i * image.channels();
        std::copy_n(p, 3, img.rgb.data() + i * 3);
        if (image.has_alpha()) {
            img.alpha[i] = p[3];
            has_alpha = has_alpha || p[3] != 255;
        }
    }
    if (!has_alpha) {
        img.alpha.clear();
    }
    images_.push_back(std::move(img));
    return static_cast<int>(images_.size()) - 1;
}

void Writer::begin_page(double width_pt, double height_pt) {
    if (in_page_) {
        throw Error(ErrorCode::render, "begin_page called twice without end_page");
    }
    pages_.push_back(Page{width_pt, height_pt, {}, {}});
    in_page_ = true;
}

void Writer::draw_image(int image, double x, double y, double width, double height) {
    Page& p = pages_.back();
    if (std::find(p.images.begin(), p.images.end(), image) == p.images.end()) {
        p.images.push_back(image);
    }
    p.content += "q " + format_number(width) + " 0 0 " + format_number(height) + " " + format_number(x) + " " +
                 format_number(y) + " cm /Im" + std::to_string(image) + " Do Q\n";
}

void Writer::fill_rect(double x, double y, double width, double height, double r, double g, double b) {
    pages_.back().content += format_number(r) + " " + format_number(g) + " " + format_number(b) + " rg " +
                             format_number(x) + " " + format_number(y) + " " + format_number(width) + " " +
                             format_number(height) + " re f\n";
}

void Writer::stroke_rect(double x, double y, double width, double height, double line_width) {
    pages_.back().content += format_number(line_width) + " w " + format_number(x) + " " + format_number(y) + " " +
                             format_number(width) + " " + format_number(height) + " re S\n";
}

void Writer::text(double x, double y, double size, const std::string& utf8) {
    pages_.back().content += "BT /F1 " + format_number(size) + " Tf " + format_number(x) + " " + format_number(y) +
                             " Td (" + escape_text(utf8) + ") Tj ET\n";
}

void Writer::raw(const std::string& ops) { pages_.back().content += ops; }

void Writer::end_page() {
    if (!in_page_) {
        throw Error(ErrorCode::render, "end_page without begin_page");
    }
    in_page_ = false;
}

Bytes Writer::finish(const DocumentInfo& info) {
    if (in_page_) {
        end_page();
    }
    // Object numbering: 1 catalog, 2 page tree, 3 font, 4 info, then images
    // (plus soft masks), then page/content pairs.
    std::vector<std::string> bodies;
    std::vector<Bytes> streams;
    std::vector<bool> has_stream;
    auto add = [&](std::string dict, Bytes stream = {}, bool is_stream = false) {
        bodies.push_back(std::move(dict));
        streams.push_back(std::move(stream));
        has_stream.push_back(is_stream);
        return static_cast<int>(bodies.size());
    };
    add("");  // catalog placeholder
    add("");  // pages placeholder
    add("<< /Type /Font /Subtype /Type1 /BaseFont /Helvetica /Encoding /WinAnsiEncoding >>");
    add("<< /Title (" + escape_literal(info.title) + ") /Producer (" + escape_literal(info.producer) +
        ") /CreationDate (" + escape_literal(info.creation_date) + ") /ModDate (" +
        escape_literal(info.creation_date) + ") >>");

    std::vector<int> image_obj(images_.size());
    for (std::size_t i = 0; i < images_.size(); ++i) {
        const Image& im = images_[i];
        int smask = 0;
        if (!im.alpha.empty()) {
            Bytes data = zlib_compress(im.alpha);
            const std::string dict = "<< /Type /XObject /Subtype /Image /Width " + std::to_string(im.width) +
                                     " /Height " + std::to_string(im.height) +
                                     " /ColorSpace /DeviceGray /BitsPerComponent 8 /Filter /FlateDecode /Length " +
                                     std::to_string(data.size()) + " >>";
            smask = add(dict, std::move(data), true);
        }
        Bytes data = zlib_compress(im.rgb);
        std::string dict = "<< /Type /XObject /Subtype /Image /Width " + std::to_string(im.width) + " /Height " +
                           std::to_string(im.height) +
                           " /ColorSpace /DeviceRGB /BitsPerComponent 8 /Filter /FlateDecode";
        if (smask != 0) {
            dict += " /SMask " + std::to_string(smask) + " 0 R";
        }
        dict += " /Length " + std::to_string(data.size()) + " >>";
        image_obj[i] = add(dict, std::move(data), true);
    }

    std::vector<int> page_obj;
    for (const Page& p : pages_) {
        Bytes content_bytes(p.content.begin(), p.content.end());
        Bytes data = zlib_compress(content_bytes);
        const int content = add("<< /Filter /FlateDecode /Length " + std::to_string(data.size()) + " >>",
                                std::move(data), true);
        std::string xobjects;
        for (int im : p.images) {
            xobjects += " /Im" + std::to_string(im) + " " + std::to_string(image_obj[static_cast<std::size_t>(im)]) + " 0 R";
        }
        std::string resources = "<< /Font << /F1 3 0 R >>";
        if (!xobjects.empty()) {
            resources += " /XObject <<" + xobjects + " >>";
        }
        resources += " >>";
        page_obj.push_back(add("<< /Type /Page /Parent 2 0 R /MediaBox [0 0 " + format_number(p.width) + " " +
                               format_number(p.height) + "] /Resources " + resources + " /Contents " +
                               std::to_string(content) + " 0 R >>"));
    }
    bodies[0] = "<< /Type /Catalog /Pages 2 0 R >>";
    std::string kids;
    for (int id : page_obj) {
        kids += (kids.empty() ? "" : " ") + std::to_string(id) + " 0 R";
    }
    bodies[1] = "<< /Type /Pages /Kids [" + kids + "] /Count " + std::to_string(page_obj.size()) + " >>";

    Bytes out;
    auto append = [&](const std::string& s) { out.insert(out.end(), s.begin(), s.end()); };
    append("%PDF-1.7\n%\xE2\xE3\xCF\xD3\n");
    std::vector<std::size_t> offsets;
    for (std::size_t i = 0; i < bodies.size(); ++i) {
        offsets.push_back(out.size());
        append(std::to_string(i + 1) + " 0 obj\n" + bodies[i] + "\n");
        if (has_stream[i]) {
            append("stream\n");
            out.insert(out.end(), streams[i].begin(), streams[i].end());
            append("\nendstream\n");
        }
        append("endobj\n");
    }
    const std::size_t xref_at = out.size();
    append("xref\n0 " + std::to_string(bodies.size() + 1) + "\n0000000000 65535 f \n");
    for (std::size_t off : offsets) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%010zu 00000 n \n", off);
        append(buf);
    }
    append("trailer\n<< /Size " + std::to_string(bodies.size() + 1) + " /Root 1 0 R /Info 4 0 R >>\nstartxref\n" +
           std::to_string(xref_at) + "\n%%EOF\n");
    return out;
}

} // namespace lens::pdf
