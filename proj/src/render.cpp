#include "lens/render.hpp"

#include "lens/codec.hpp"
#include "lens/error.hpp"
#include "lens/pdf.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <random>

namespace lens {

namespace {

using pdf::Array;
using pdf::ContentToken;
using pdf::Dict;
using pdf::Document;
using pdf::Object;
using pdf::Stream;

struct Matrix {
    double a = 1, b = 0, c = 0, d = 1, e = 0, f = 0;

    Point apply(double x, double y) const { return {a * x + c * y + e, b * x + d * y + f}; }

    /// this followed by m (PDF row-vector convention).
    Matrix then(const Matrix& m) const {
        return {a * m.a + b * m.c,         a * m.b + b * m.d,         c * m.a + d * m.c,
                c * m.b + d * m.d,         e * m.a + f * m.c + m.e,   e * m.b + f * m.d + m.f};
    }

    double det() const { return a * d - b * c; }

    Matrix inverse() const {
        const double k = det();
        if (k == 0.0) return {0, 0, 0, 0, 0, 0};
        return {d / k, -b / k, -c / k, a / k, (c * f - d * e) / k, (b * e - a * f) / k};
    }
};

struct Rgb {
    double r = 0, g = 0, b = 0;
};

struct GraphicsState {
    Matrix ctm;
    Rgb fill;
    Rgb stroke;
    double line_width = 1.0;
    int fill_components = 1;
    int stroke_components = 1;
};

Rgb from_components(const std::vector<double>& v) {
    auto cl = [](double x) { return std::clamp(x, 0.0, 1.0); };
    if (v.size() >= 4) {
        const double k = cl(v[3]);
        return {(1 - cl(v[0])) * (1 - k), (1 - cl(v[1])) * (1 - k), (1 - cl(v[2])) * (1 - k)};
    }
    if (v.size() == 3) return {cl(v[0]), cl(v[1]), cl(v[2])};
    if (v.size() == 1) return {cl(v[0]), cl(v[0]), cl(v[0])};
    return {};
}

using Path = std::vector<std::vector<Point>>;

/// Scanline fill at pixel centers with nonzero or even-odd winding.
void fill_path(RasterImage& canvas, const Path& path, bool even_odd, Rgb color) {
    double ymin = 1e300, ymax = -1e300;
    for (const auto& sub : path) {
        for (const Point& p : sub) {
            ymin = std::min(ymin, p.y);
            ymax = std::max(ymax, p.y);
        }
    }
    if (ymin > ymax) return;
    const int j0 = std::max(0, static_cast<int>(std::floor(ymin)));
    const int j1 = std::min(canvas.height() - 1, static_cast<int>(std::ceil(ymax)));
    const std::uint8_t rgb[3] = {static_cast<std::uint8_t>(std::lround(color.r * 255)),
                                 static_cast<std::uint8_t>(std::lround(color.g * 255)),
                                 static_cast<std::uint8_t>(std::lround(color.b * 255))};
    std::vector<std::pair<double, int>> xs;
    for (int j = j0; j <= j1; ++j) {
        const double y = j + 0.5;
        xs.clear();
        for (const auto& sub : path) {
            const std::size_t n = sub.size();
            if (n < 2) continue;
            for (std::size_t i = 0; i < n; ++i) {
                const Point& p = sub[i];
                const Point& q = sub[(i + 1) % n];
                if ((p.y > y) != (q.y > y)) {
                    const double x = (q.x - p.x) * (y - p.y) / (q.y - p.y) + p.x;
                    xs.emplace_back(x, q.y > p.y ? 1 : -1);
                }
            }
        }
        std::sort(xs.begin(), xs.end());
        int winding = 0;
        for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
            winding += xs[k].second;
            const bool inside = even_odd ? ((k + 1) % 2 == 1) : winding != 0;
            if (!inside) continue;
            const double lo = xs[k].first;
            const double hi = xs[k + 1].first;
            int i = std::max(0, static_cast<int>(std::ceil(lo - 0.5)));
            for (; i < canvas.width() && i + 0.5 < hi; ++i) {
                if (i + 0.5 < lo) continue;
                std::uint8_t* px = canvas.pixel(i, j);
                px[0] = rgb[0];
                px[1] = rgb[1];
                px[2] = rgb[2];
            }
        }
    }
}

void stroke_path(RasterImage& canvas, const Path& path, const std::vector<bool>& closed, double width, Rgb color) {
    const double hw = std::max(0.5, width / 2.0);
    for (std::size_t s = 0; s < path.size(); ++s) {
        const auto& sub = path[s];
        const std::size_t n = sub.size();
        const std::size_t segs = closed[s] ? n : (n > 0 ? n - 1 : 0);
        for (std::size_t i = 0; i < segs; ++i) {
            const Point p = sub[i];
            const Point q = sub[(i + 1) % n];
            double dx = q.x - p.x;
            double dy = q.y - p.y;
            const double len = std::hypot(dx, dy);
            if (len == 0.0) {
                fill_path(canvas, {{{p.x - hw, p.y - hw}, {p.x + hw, p.y - hw}, {p.x + hw, p.y + hw}, {p.x - hw, p.y + hw}}},
                          false, color);
                continue;
            }
            dx /= len;
            dy /= len;
            const double nx = -dy * hw;
            const double ny = dx * hw;
            const Point a{p.x - dx * hw, p.y - dy * hw};
            const Point b{q.x + dx * hw, q.y + dy * hw};
            fill_path(canvas, {{{a.x + nx, a.y + ny}, {b.x + nx, b.y + ny}, {b.x - nx, b.y - ny}, {a.x - nx, a.y - ny}}},
                      false, color);
        }
    }
}

/// Decoded image samples as RGBA, row-major, top row first.
struct ImageSamples {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgba;
};

class PageRasterizer {
public:
    PageRasterizer(const Document& doc, std::size_t page_index, RasterImage& canvas)
        : doc_(doc), page_index_(page_index), canvas_(canvas) {}

    void run(const Bytes& content, const Dict& resources, GraphicsState initial, int depth) {
        if (depth > 16) return;
        std::vector<GraphicsState> stack;
        GraphicsState gs = initial;
        Path path;
        std::vector<bool> closed;
        Point current{};
        Point start{};
        std::vector<Object> operands;

        auto num = [&](std::size_t i) {
            return i < operands.size() && operands[i].is_number() ? operands[i].number() : 0.0;
        };
        auto dev = [&](double x, double y) { return gs.ctm.apply(x, y); };
        auto flatten_curve = [&](Point p0, Point p1, Point p2, Point p3) {
            const double est = std::hypot(p1.x - p0.x, p1.y - p0.y) + std::hypot(p2.x - p1.x, p2.y - p1.y) +
                               std::hypot(p3.x - p2.x, p3.y - p2.y);
            const int steps = std::clamp(static_cast<int>(est / 2.0), 4, 256);
            for (int k = 1; k <= steps; ++k) {
                const double t = static_cast<double>(k) / steps;
                const double u = 1 - t;
                path.back().push_back({u * u * u * p0.x + 3 * u * u * t * p1.x + 3 * u * t * t * p2.x + t * t * t * p3.x,
                                       u * u * u * p0.y + 3 * u * u * t * p1.y + 3 * u * t * t * p2.y + t * t * t * p3.y});
            }
        };
        auto ensure_subpath = [&] {
            if (path.empty()) {
                path.push_back({dev(current.x, current.y)});
                closed.push_back(false);
            }
        };
        auto components = [&] {
            std::vector<double> v;
            for (const Object& o : operands) {
                if (o.is_number()) v.push_back(o.number());
            }
            return v;
        };
        auto paint = [&](bool fill, bool even_odd, bool stroke) {
            if (fill) fill_path(canvas_, path, even_odd, gs.fill);
            if (stroke) {
                const double scale = std::sqrt(std::abs(gs.ctm.det()));
                stroke_path(canvas_, path, closed, gs.line_width * scale, gs.stroke);
            }
            path.clear();
            closed.clear();
        };

        for (const ContentToken& tok : pdf::tokenize_content(content)) {
            if (!tok.is_operator) {
                operands.push_back(tok.operand);
                continue;
            }
            const std::string& op = tok.op;
            if (op == "q") {
                stack.push_back(gs);
            } else if (op == "Q") {
                if (!stack.empty()) {
                    gs = stack.back();
                    stack.pop_back();
                }
            } else if (op == "cm") {
                gs.ctm = Matrix{num(0), num(1), num(2), num(3), num(4), num(5)}.then(gs.ctm);
            } else if (op == "w") {
                gs.line_width = num(0);
            } else if (op == "g") {
                gs.fill = from_components({num(0)});
            } else if (op == "G") {
                gs.stroke = from_components({num(0)});
            } else if (op == "rg") {
                gs.fill = from_components({num(0), num(1), num(2)});
            } else if (op == "RG") {
                gs.stroke = from_components({num(0), num(1), num(2)});
            } else if (op == "k") {
                gs.fill = from_components({num(0), num(1), num(2), num(3)});
            } else if (op == "K") {
                gs.stroke = from_components({num(0), num(1), num(2), num(3)});
            } else if (op == "cs" || op == "CS") {
                int n = 1;
                if (!operands.empty() && operands[0].as_name() != nullptr) {
                    const std::string& cs = operands[0].as_name()->value;
                    n = colorspace_components(cs, resources);
                }
                if (op == "cs") {
                    gs.fill_components = n;
                    gs.fill = n == 4 ? from_components({0, 0, 0, 1}) : Rgb{};
                } else {
                    gs.stroke_components = n;
                    gs.stroke = n == 4 ? from_components({0, 0, 0, 1}) : Rgb{};
                }
            } else if (op == "sc" || op == "scn") {
                const auto v = components();
                if (!v.empty()) gs.fill = from_components(v);
            } else if (op == "SC" || op == "SCN") {
                const auto v = components();
                if (!v.empty()) gs.stroke = from_components(v);
            } else if (op == "m") {
                current = {num(0), num(1)};
                start = current;
                path.push_back({dev(current.x, current.y)});
                closed.push_back(false);
            } else if (op == "l") {
                ensure_subpath();
                current = {num(0), num(1)};
                path.back().push_back(dev(current.x, current.y));
            } else if (op == "c" || op == "v" || op == "y") {
                ensure_subpath();
                const Point p0 = dev(current.x, current.y);
                Point p1, p2, p3;
                if (op == "c") {
                    p1 = dev(num(0), num(1));
                    p2 = dev(num(2), num(3));
                    p3 = dev(num(4), num(5));
                    current = {num(4), num(5)};
                } else if (op == "v") {
                    p1 = p0;
                    p2 = dev(num(0), num(1));
                    p3 = dev(num(2), num(3));
                    current = {num(2), num(3)};
                } else {
                    p1 = dev(num(0), num(1));
                    p2 = dev(num(2), num(3));
                    p3 = p2;
                    current = {num(2), num(3)};
                }
                flatten_curve(p0, p1, p2, p3);
            } else if (op == "h") {
                if (!closed.empty()) closed.back() = true;
                current = start;
            } else if (op == "re") {
                const double x = num(0), y = num(1), w = num(2), h = num(3);
                path.push_back({dev(x, y), dev(x + w, y), dev(x + w, y + h), dev(x, y + h)});
                closed.push_back(true);
                current = start = {x, y};
            } else if (op == "f" || op == "F") {
                paint(true, false, false);
            } else if (op == "f*") {
                paint(true, true, false);
            } else if (op == "S") {
                paint(false, false, true);
            } else if (op == "s") {
                if (!closed.empty()) closed.back() = true;
                paint(false, false, true);
            } else if (op == "B" || op == "B*") {
                paint(true, op == "B*", true);
            } else if (op == "b" || op == "b*") {
                if (!closed.empty()) closed.back() = true;
                paint(true, op == "b*", true);
            } else if (op == "n") {
                path.clear();
                closed.clear();
            } else if (op == "Do") {
                if (!operands.empty() && operands[0].as_name() != nullptr) {
                    draw_xobject(operands[0].as_name()->value, resources, gs, depth);
                }
            } else if (op == "BI") {
                draw_inline_image(tok, resources, gs);
            }
            operands.clear();
        }
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw Error(ErrorCode::ingest, "page " + std::to_string(page_index_ + 1) + ": " + what);
    }

    const Dict* sub_dict(const Dict& resources, std::string_view category) const {
        const Object* o = resources.find(category);
        return o == nullptr ? nullptr : doc_.resolve(*o).as_dict();
    }

    int colorspace_components(const std::string& name, const Dict& resources) const {
        if (name == "DeviceGray" || name == "G" || name == "CalGray") return 1;
        if (name == "DeviceRGB" || name == "RGB" || name == "CalRGB") return 3;
        if (name == "DeviceCMYK" || name == "CMYK") return 4;
        if (const Dict* cs = sub_dict(resources, "ColorSpace")) {
            if (const Object* o = cs->find(name)) return components_of(doc_.resolve(*o));
        }
        return 1;
    }

    int components_of(const Object& cs) const {
        if (const pdf::Name* n = cs.as_name()) {
            const std::string& v = n->value;
            if (v == "DeviceRGB" || v == "CalRGB" || v == "RGB" || v == "Lab") return 3;
            if (v == "DeviceCMYK" || v == "CMYK") return 4;
            return 1;
        }
        if (const Array* a = cs.as_array(); a != nullptr && !a->empty()) {
            const pdf::Name* family = doc_.resolve((*a)[0]).as_name();
            if (family == nullptr) return 1;
            if (family->value == "ICCBased" && a->size() > 1) {
                const Dict* d = doc_.resolve((*a)[1]).as_dict();
                if (d != nullptr && d->find("N") != nullptr) return static_cast<int>(doc_.resolve(*d->find("N")).number());
            }
            if (family->value == "CalRGB" || family->value == "Lab") return 3;
            if (family->value == "CalGray" || family->value == "Indexed" || family->value == "I" ||
                family->value == "Separation") {
                return 1;
            }
            if (family->value == "DeviceN" && a->size() > 1) {
                const Array* names = doc_.resolve((*a)[1]).as_array();
                return names != nullptr ? static_cast<int>(names->size()) : 1;
            }
        }
        return 1;
    }

    /// Converts unpacked component values (already mapped through /Decode, in [0,1]) to RGB.
    struct ColorModel {
        enum class Kind { gray, rgb, cmyk, indexed, tint } kind = Kind::gray;
        int components = 1;
        int index_base_components = 3;
        Bytes lookup;
        int hival = 0;
    };

    ColorModel color_model(const Object& cs_obj, const Dict& resources) const {
        ColorModel m;
        const Object* cs = &doc_.resolve(cs_obj);
        if (const pdf::Name* n = cs->as_name()) {
            const std::string& v = n->value;
            if (v == "DeviceGray" || v == "G" || v == "CalGray") return m;
            if (v == "DeviceRGB" || v == "RGB" || v == "CalRGB") {
                m.kind = ColorModel::Kind::rgb;
                m.components = 3;
                return m;
            }
            if (v == "DeviceCMYK" || v == "CMYK") {
                m.kind = ColorModel::Kind::cmyk;
                m.components = 4;
                return m;
            }
            if (const Dict* named = sub_dict(resources, "ColorSpace")) {
                if (const Object* o = named->find(v)) return color_model(*o, resources);
            }
            return m;
        }
        const Array* a = cs->as_array();
        if (a == nullptr || a->empty()) return m;
        const pdf::Name* family = doc_.resolve((*a)[0]).as_name();
        if (family == nullptr) return m;
        const std::string& f = family->value;
        if (f == "Indexed" || f == "I") {
            if (a->size() < 4) fail("malformed indexed color space");
            m.kind = ColorModel::Kind::indexed;
            m.components = 1;
            m.index_base_components = components_of(doc_.resolve((*a)[1]));
            m.hival = static_cast<int>(doc_.resolve((*a)[2]).number());
            const Object& lookup = doc_.resolve((*a)[3]);
            if (const pdf::String* s = lookup.as_string()) {
                m.lookup.assign(s->value.begin(), s->value.end());
            } else if (const Stream* st = lookup.as_stream()) {
                m.lookup = doc_.decode(*st).data;
            }
            return m;
        }
        if (f == "Separation" || f == "DeviceN") {
            m.kind = ColorModel::Kind::tint;
            m.components = components_of(*cs);
            return m;
        }
        const int n = components_of(*cs);
        m.components = n;
        m.kind = n == 4 ? ColorModel::Kind::cmyk : (n == 3 ? ColorModel::Kind::rgb : ColorModel::Kind::gray);
        return m;
    }

    static int inline_int(const Dict& d, std::string_view a, std::string_view b, int fallback) {
        const Object* o = d.find(a);
        if (o == nullptr) o = d.find(b);
        return o != nullptr && o->is_number() ? static_cast<int>(o->number()) : fallback;
    }

    ImageSamples decode_image(const Dict& dict, const pdf::DecodedStream& decoded, const Dict& resources, const Rgb& fill,
                              bool is_inline) const {
        auto find = [&](std::string_view full, std::string_view abbrev) -> const Object* {
            const Object* o = dict.find(full);
            if (o == nullptr && is_inline) o = dict.find(abbrev);
            return o == nullptr ? nullptr : &doc_.resolve(*o);
        };
        ImageSamples img;
        const Object* w = find("Width", "W");
        const Object* h = find("Height", "H");
        if (w == nullptr || h == nullptr || !w->is_number() || !h->is_number()) fail("image without dimensions");
        img.width = static_cast<int>(w->number());
        img.height = static_cast<int>(h->number());
        if (img.width <= 0 || img.height <= 0 || static_cast<long long>(img.width) * img.height > 400'000'000LL) {
            fail("image dimensions out of range");
        }
        img.rgba.assign(static_cast<std::size_t>(img.width) * img.height * 4, 255);

        const Object* mask_flag = find("ImageMask", "IM");
        const bool stencil = mask_flag != nullptr && mask_flag->as_bool() != nullptr && *mask_flag->as_bool();

        if (!decoded.image_filter.empty()) {
            if (decoded.image_filter != "DCTDecode") {
                fail("unsupported image encoding " + decoded.image_filter + "; use an external renderer");
            }
            const RasterImage rgb = decode_jpeg(decoded.data);
            if (rgb.width() != img.width || rgb.height() != img.height) fail("JPEG size differs from image dictionary");
            for (std::size_t i = 0, n = static_cast<std::size_t>(img.width) * img.height; i < n; ++i) {
                std::copy_n(rgb.data().data() + i * 3, 3, img.rgba.data() + i * 4);
            }
            return img;
        }

        int bpc = 1;
        if (const Object* b = find("BitsPerComponent", "BPC"); b != nullptr && b->is_number()) bpc = static_cast<int>(b->number());
        if (stencil) bpc = 1;
        if (bpc != 1 && bpc != 2 && bpc != 4 && bpc != 8 && bpc != 16) fail("unsupported bits per component");

        ColorModel model;
        if (!stencil) {
            if (const Object* cs = find("ColorSpace", "CS")) model = color_model(*cs, resources);
        }
        const int ncomp = stencil ? 1 : model.components;
        const int maxv = (1 << std::min(bpc, 8)) - 1;
        std::vector<double> dmin(static_cast<std::size_t>(ncomp), 0.0);
        std::vector<double> dmax(static_cast<std::size_t>(ncomp), model.kind == ColorModel::Kind::indexed ? maxv : 1.0);
        if (const Object* dec = find("Decode", "D")) {
            if (const Array* da = dec->as_array(); da != nullptr && da->size() >= static_cast<std::size_t>(2 * ncomp)) {
                for (int c = 0; c < ncomp; ++c) {
                    dmin[static_cast<std::size_t>(c)] = doc_.resolve((*da)[static_cast<std::size_t>(2 * c)]).number();
                    dmax[static_cast<std::size_t>(c)] = doc_.resolve((*da)[static_cast<std::size_t>(2 * c + 1)]).number();
                }
            }
        }

        const std::size_t row_bits = static_cast<std::size_t>(img.width) * ncomp * bpc;
        const std::size_t row_bytes = (row_bits + 7) / 8;
        const Bytes& data = decoded.data;
        auto sample = [&](std::size_t row, std::size_t index) -> int {
            const std::size_t bit = index * static_cast<std::size_t>(bpc);
            const std::size_t byte = row * row_bytes + bit / 8;
            if (bpc == 16) {
                return byte < data.size() ? data[byte] : 0;
            }
            if (byte >= data.size()) return 0;
            if (bpc == 8) return data[byte];
            const int shift = 8 - bpc - static_cast<int>(bit % 8);
            return (data[byte] >> shift) & ((1 << bpc) - 1);
        };

        std::vector<double> comp(static_cast<std::size_t>(ncomp));
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                std::uint8_t* out = img.rgba.data() + (static_cast<std::size_t>(y) * img.width + x) * 4;
                for (int c = 0; c < ncomp; ++c) {
                    const int raw = sample(static_cast<std::size_t>(y), static_cast<std::size_t>(x) * ncomp + c);
                    const auto ci = static_cast<std::size_t>(c);
                    comp[ci] = dmin[ci] + raw * (dmax[ci] - dmin[ci]) / maxv;
                }
                if (stencil) {
                    // Sample value 0 paints with the fill color under the default decode.
                    if (comp[0] < 0.5) {
                        out[0] = static_cast<std::uint8_t>(std::lround(fill.r * 255));
                        out[1] = static_cast<std::uint8_t>(std::lround(fill.g * 255));
                        out[2] = static_cast<std::uint8_t>(std::lround(fill.b * 255));
                        out[3] = 255;
                    } else {
                        out[3] = 0;
                    }
                    continue;
                }
                Rgb rgb;
                switch (model.kind) {
                case ColorModel::Kind::gray: rgb = from_components({comp[0]}); break;
                case ColorModel::Kind::rgb: rgb = from_components({comp[0], comp[1], comp[2]}); break;
                case ColorModel::Kind::cmyk: rgb = from_components({comp[0], comp[1], comp[2], comp[3]}); break;
                case ColorModel::Kind::tint: rgb = from_components({1.0 - comp[0]}); break;
                case ColorModel::Kind::indexed: {
                    const int idx = std::clamp(static_cast<int>(std::lround(comp[0])), 0, model.hival);
                    const int bc = model.index_base_components;
                    std::vector<double> base(static_cast<std::size_t>(bc));
                    for (int c = 0; c < bc; ++c) {
                        const std::size_t at = static_cast<std::size_t>(idx) * bc + c;
                        base[static_cast<std::size_t>(c)] = at < model.lookup.size() ? model.lookup[at] / 255.0 : 0.0;
                    }
                    rgb = from_components(base);
                    break;
                }
                }
                out[0] = static_cast<std::uint8_t>(std::lround(rgb.r * 255));
                out[1] = static_cast<std::uint8_t>(std::lround(rgb.g * 255));
                out[2] = static_cast<std::uint8_t>(std::lround(rgb.b * 255));
            }
        }

        if (const Object* smask = find("SMask", "SMask"); smask != nullptr && smask->as_stream() != nullptr) {
            const Stream& ms = *smask->as_stream();
            const pdf::DecodedStream md = doc_.decode(ms);
            GraphicsState dummy;
            const ImageSamples alpha = decode_image(ms.dict, md, resources, dummy.fill, false);
            for (int y = 0; y < img.height; ++y) {
                for (int x = 0; x < img.width; ++x) {
                    const int ax = static_cast<int>(static_cast<long long>(x) * alpha.width / img.width);
                    const int ay = static_cast<int>(static_cast<long long>(y) * alpha.height / img.height);
                    img.rgba[(static_cast<std::size_t>(y) * img.width + x) * 4 + 3] =
                        alpha.rgba[(static_cast<std::size_t>(ay) * alpha.width + ax) * 4];
                }
            }
        }
        return img;
    }

    void composite(const ImageSamples& img, const Matrix& ctm) {
        const Point corners[4] = {ctm.apply(0, 0), ctm.apply(1, 0), ctm.apply(1, 1), ctm.apply(0, 1)};
        double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
        for (const Point& p : corners) {
            x0 = std::min(x0, p.x);
            y0 = std::min(y0, p.y);
            x1 = std::max(x1, p.x);
            y1 = std::max(y1, p.y);
        }
        const int px0 = std::max(0, static_cast<int>(std::floor(x0)));
        const int py0 = std::max(0, static_cast<int>(std::floor(y0)));
        const int px1 = std::min(canvas_.width(), static_cast<int>(std::ceil(x1)));
        const int py1 = std::min(canvas_.height(), static_cast<int>(std::ceil(y1)));
        if (px0 >= px1 || py0 >= py1) return;
        const Matrix inv = ctm.inverse();
        // Image pixels per device pixel decides the supersampling factor.
        const double dev_w = std::hypot(ctm.a, ctm.b);
        const double dev_h = std::hypot(ctm.c, ctm.d);
        const double density = std::max(img.width / std::max(dev_w, 1e-9), img.height / std::max(dev_h, 1e-9));
        const int ss = std::clamp(static_cast<int>(std::ceil(density)), 1, 4);
        for (int py = py0; py < py1; ++py) {
            for (int px = px0; px < px1; ++px) {
                double acc[4] = {0, 0, 0, 0};
                int hits = 0;
                for (int sy = 0; sy < ss; ++sy) {
                    for (int sx = 0; sx < ss; ++sx) {
                        const Point u = inv.apply(px + (sx + 0.5) / ss, py + (sy + 0.5) / ss);
                        if (u.x < 0 || u.x >= 1 || u.y < 0 || u.y >= 1) continue;
                        const int ix = std::min(img.width - 1, static_cast<int>(u.x * img.width));
                        const int iy = std::min(img.height - 1, static_cast<int>((1.0 - u.y) * img.height));
                        const std::uint8_t* s = img.rgba.data() + (static_cast<std::size_t>(iy) * img.width + ix) * 4;
                        const double a = s[3] / 255.0;
                        acc[0] += s[0] * a;
                        acc[1] += s[1] * a;
                        acc[2] += s[2] * a;
                        acc[3] += a;
                        ++hits;
                    }
                }
                if (hits == 0 || acc[3] == 0.0) continue;
                const double total = static_cast<double>(ss * ss);
                const double alpha = acc[3] / total;
                std::uint8_t* d = canvas_.pixel(px, py);
                for (int c = 0; c < 3; ++c) {
                    const double src = acc[c] / acc[3];
                    d[c] = static_cast<std::uint8_t>(std::lround(src * alpha + d[c] * (1.0 - alpha)));
                }
            }
        }
    }

    void draw_xobject(const std::string& name, const Dict& resources, const GraphicsState& gs, int depth) {
        const Dict* xobjects = sub_dict(resources, "XObject");
        if (xobjects == nullptr) return;
        const Object* ref = xobjects->find(name);
        if (ref == nullptr) return;
        const Object& obj = doc_.resolve(*ref);
        const Stream* s = obj.as_stream();
        if (s == nullptr) return;
        const Object* subtype = s->dict.find("Subtype");
        if (subtype != nullptr && doc_.resolve(*subtype).is_name("Image")) {
            composite(decode_image(s->dict, doc_.decode(*s), resources, gs.fill, false), gs.ctm);
        } else if (subtype != nullptr && doc_.resolve(*subtype).is_name("Form")) {
            GraphicsState inner = gs;
            if (const Object* m = s->dict.find("Matrix")) {
                if (const Array* a = doc_.resolve(*m).as_array(); a != nullptr && a->size() == 6) {
                    Matrix fm{doc_.resolve((*a)[0]).number(), doc_.resolve((*a)[1]).number(),
                              doc_.resolve((*a)[2]).number(), doc_.resolve((*a)[3]).number(),
                              doc_.resolve((*a)[4]).number(), doc_.resolve((*a)[5]).number()};
                    inner.ctm = fm.then(gs.ctm);
                }
            }
            const Dict* form_res = sub_dict(s->dict, "Resources");
            run(doc_.decode(*s).data, form_res != nullptr ? *form_res : resources, inner, depth + 1);
        }
    }

    void draw_inline_image(const ContentToken& tok, const Dict& resources, const GraphicsState& gs) {
        Stream st;
        st.dict = tok.inline_dict;
        st.raw = tok.inline_data;
        // Expand abbreviated filter names; decode() already accepts them.
        if (const Object* f = st.dict.find("F"); f != nullptr && st.dict.find("Filter") == nullptr) {
            st.dict.set("Filter", *f);
        }
        if (const Object* cs = st.dict.find("CS"); cs != nullptr && cs->as_name() != nullptr) {
            const std::string& v = cs->as_name()->value;
            if (v == "G") st.dict.set("CS", Object(pdf::Name{"DeviceGray"}));
            if (v == "RGB") st.dict.set("CS", Object(pdf::Name{"DeviceRGB"}));
            if (v == "CMYK") st.dict.set("CS", Object(pdf::Name{"DeviceCMYK"}));
        }
        composite(decode_image(st.dict, doc_.decode(st), resources, gs.fill, true), gs.ctm);
    }

    const Document& doc_;
    std::size_t page_index_;
    RasterImage& canvas_;
};

class BuiltinSession final : public RenderSession {
public:
    explicit BuiltinSession(Document doc) : doc_(std::move(doc)) {}

    std::size_t page_count() const override { return doc_.page_count(); }

    RasterImage render(std::size_t page_index, int dpi) const override {
        if (page_index >= doc_.page_count()) {
            throw Error(ErrorCode::ingest, "page " + std::to_string(page_index + 1) + " does not exist");
        }
        try {
            const pdf::PageInfo& page = doc_.page(page_index);
            const auto& box = page.media_box;
            const double s = dpi / 72.0;
            const double w = box[2] - box[0];
            const double h = box[3] - box[1];
            const bool swap = page.rotate == 90 || page.rotate == 270;
            const int cw = std::max(1, static_cast<int>(std::lround((swap ? h : w) * s)));
            const int ch = std::max(1, static_cast<int>(std::lround((swap ? w : h) * s)));
            RasterImage canvas(cw, ch, 3, 255);
            Matrix device;
            switch (page.rotate) {
            case 90: device = {0, s, s, 0, -box[1] * s, -box[0] * s}; break;
            case 180: device = {-s, 0, 0, s, box[2] * s, -box[1] * s}; break;
            case 270: device = {0, -s, -s, 0, box[3] * s, box[2] * s}; break;
            default: device = {s, 0, 0, -s, -box[0] * s, box[3] * s}; break;
            }
            GraphicsState gs;
            gs.ctm = device;
            PageRasterizer raster(doc_, page_index, canvas);
            raster.run(doc_.page_content(page_index), page.resources, gs, 0);
            return canvas;
        } catch (const Error& e) {
            if (e.code() == ErrorCode::ingest) throw;
            throw Error(ErrorCode::ingest, "page " + std::to_string(page_index + 1) + ": " + e.what());
        }
    }

private:
    Document doc_;
};

class CommandSession final : public RenderSession {
public:
    CommandSession(std::filesystem::path pdf, std::string tmpl, std::size_t pages)
        : pdf_(std::move(pdf)), template_(std::move(tmpl)), pages_(pages) {}

    std::size_t page_count() const override { return pages_; }

    RasterImage render(std::size_t page_index, int dpi) const override {
        static thread_local std::mt19937_64 rng{std::random_device{}()};
        const auto dir = std::filesystem::temp_directory_path() / ("lens-render-" + std::to_string(rng()));
        std::filesystem::create_directories(dir);
        const auto stem = dir / "page";
        auto quote = [](const std::string& s) {
            std::string q = "'";
            for (char c : s) {
                if (c == '\'') q += "'\\''";
                else q.push_back(c);
            }
            return q + "'";
        };
        std::string cmd = template_;
        auto replace = [&](const std::string& key, const std::string& value) {
            for (std::size_t at = cmd.find(key); at != std::string::npos; at = cmd.find(key, at + value.size())) {
                cmd.replace(at, key.size(), value);
            }
        };
        replace("{input}", quote(pdf_.string()));
        replace("{dpi}", std::to_string(dpi));
        replace("{page}", std::to_string(page_index + 1));
        replace("{stem}", quote(stem.string()));
        replace("{output}", quote(stem.string() + ".png"));
        const int rc = std::system(cmd.c_str());
        const auto out = std::filesystem::path(stem.string() + ".png");
        if (rc != 0 || !std::filesystem::exists(out)) {
            std::filesystem::remove_all(dir);
            throw Error(ErrorCode::ingest,
                        "page " + std::to_string(page_index + 1) + ": renderer command failed (exit " + std::to_string(rc) + ")");
        }
        RasterImage img = read_png(out);
        std::filesystem::remove_all(dir);
        if (img.has_alpha()) {
            RasterImage rgb(img.width(), img.height(), 3, 255);
            for (int y = 0; y < img.height(); ++y) {
                for (int x = 0; x < img.width(); ++x) {
                    const std::uint8_t* s = img.pixel(x, y);
                    std::uint8_t* d = rgb.pixel(x, y);
                    for (int c = 0; c < 3; ++c) d[c] = static_cast<std::uint8_t>((s[c] * s[3] + 255 * (255 - s[3]) + 127) / 255);
                }
            }
            return rgb;
        }
        return img;
    }

private:
    std::filesystem::path pdf_;
    std::string template_;
    std::size_t pages_;
};

} // namespace

std::unique_ptr<RenderSession> BuiltinPdfRenderer::open(const std::filesystem::path& pdf) const {
    return std::make_unique<BuiltinSession>(Document::open(pdf));
}

std::unique_ptr<RenderSession> CommandPdfRenderer::open(const std::filesystem::path& pdf) const {
    const Document doc = Document::open(pdf);
    return std::make_unique<CommandSession>(pdf, template_, doc.page_count());
}

std::unique_ptr<PageRenderer> make_renderer(const std::string& spec) {
    if (spec.empty() || spec == "builtin") {
        return std::make_unique<BuiltinPdfRenderer>();
    }
    if (spec.rfind("command:", 0) == 0 && spec.size() > 8) {
        return std::make_unique<CommandPdfRenderer>(spec.substr(8));
    }
    throw Error(ErrorCode::invalid_input, "unknown renderer '" + spec + "' (expected builtin or command:<template>)");
}

} // namespace lens
