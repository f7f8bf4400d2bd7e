#include "lens/pdf.hpp"

#include "lens/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <set>

namespace lens::pdf {

// --- Object model --------------------------------------------------------------

const Object* Dict::find(std::string_view key) const {
    for (const DictEntry& e : entries_) {
        if (e.key == key) {
            return &e.value;
        }
    }
    return nullptr;
}

void Dict::set(std::string key, Object value) {
    for (DictEntry& e : entries_) {
        if (e.key == key) {
            e.value = std::move(value);
            return;
        }
    }
    entries_.push_back(DictEntry{std::move(key), std::move(value)});
}

double Object::number() const {
    if (const auto* i = std::get_if<std::int64_t>(&value_)) {
        return static_cast<double>(*i);
    }
    if (const auto* d = std::get_if<double>(&value_)) {
        return *d;
    }
    throw Error(ErrorCode::parse, "PDF object is not a number");
}

const Dict* Object::as_dict() const {
    if (const auto* d = std::get_if<Dict>(&value_)) {
        return d;
    }
    if (const auto* s = std::get_if<Stream>(&value_)) {
        return &s->dict;
    }
    return nullptr;
}

// --- Lexer ---------------------------------------------------------------------

namespace {

bool is_ws(std::uint8_t c) { return c == 0 || c == 9 || c == 10 || c == 12 || c == 13 || c == 32; }

bool is_delim(std::uint8_t c) {
    return c == '(' || c == ')' || c == '<' || c == '>' || c == '[' || c == ']' || c == '{' || c == '}' ||
           c == '/' || c == '%';
}

int hex_value(std::uint8_t c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

struct Token {
    enum class Kind { object, keyword, array_end, dict_end, eof } kind = Kind::eof;
    Object obj;
    std::string keyword;
};

class Lexer {
public:
    explicit Lexer(std::span<const std::uint8_t> s, std::size_t pos = 0) : s_(s), pos_(pos) {}

    std::size_t pos() const { return pos_; }
    void seek(std::size_t p) { pos_ = p; }
    bool at_end() const { return pos_ >= s_.size(); }
    std::uint8_t peek() const { return pos_ < s_.size() ? s_[pos_] : 0; }

    void skip_ws() {
        while (pos_ < s_.size()) {
            const std::uint8_t c = s_[pos_];
            if (is_ws(c)) {
                ++pos_;
            } else if (c == '%') {
                while (pos_ < s_.size() && s_[pos_] != '\n' && s_[pos_] != '\r') {
                    ++pos_;
                }
            } else {
                break;
            }
        }
    }

    Token next(bool allow_refs) {
        skip_ws();
        Token t;
        if (at_end()) {
            return t;
        }
        const std::uint8_t c = s_[pos_];
        if (c == '/') {
            ++pos_;
            t.kind = Token::Kind::object;
            t.obj = Object(Name{read_name()});
        } else if (c == '(') {
            ++pos_;
            t.kind = Token::Kind::object;
            t.obj = Object(String{read_literal(), false});
        } else if (c == '<') {
            if (pos_ + 1 < s_.size() && s_[pos_ + 1] == '<') {
                pos_ += 2;
                t.kind = Token::Kind::object;
                t.obj = Object(read_dict(allow_refs));
            } else {
                ++pos_;
                t.kind = Token::Kind::object;
                t.obj = Object(String{read_hex(), true});
            }
        } else if (c == '>') {
            if (pos_ + 1 < s_.size() && s_[pos_ + 1] == '>') {
                pos_ += 2;
                t.kind = Token::Kind::dict_end;
            } else {
                ++pos_;
                return next(allow_refs);
            }
        } else if (c == '[') {
            ++pos_;
            t.kind = Token::Kind::object;
            t.obj = Object(read_array(allow_refs));
        } else if (c == ']') {
            ++pos_;
            t.kind = Token::Kind::array_end;
        } else if (c == '{' || c == '}' || c == ')') {
            ++pos_;
            t.kind = Token::Kind::keyword;
            t.keyword = std::string(1, static_cast<char>(c));
        } else if (c == '+' || c == '-' || c == '.' || (c >= '0' && c <= '9')) {
            t.kind = Token::Kind::object;
            t.obj = read_number(allow_refs);
        } else {
            std::string word;
            while (pos_ < s_.size() && !is_ws(s_[pos_]) && !is_delim(s_[pos_])) {
                word.push_back(static_cast<char>(s_[pos_++]));
            }
            if (word == "true" || word == "false") {
                t.kind = Token::Kind::object;
                t.obj = Object(word == "true");
            } else if (word == "null") {
                t.kind = Token::Kind::object;
            } else {
                t.kind = Token::Kind::keyword;
                t.keyword = std::move(word);
            }
        }
        return t;
    }

    Object parse_object(bool allow_refs = true) {
        Token t = next(allow_refs);
        if (t.kind != Token::Kind::object) {
            throw Error(ErrorCode::parse, "expected a PDF object at offset " + std::to_string(pos_));
        }
        return std::move(t.obj);
    }

    std::string read_keyword() {
        skip_ws();
        std::string word;
        while (pos_ < s_.size() && !is_ws(s_[pos_]) && !is_delim(s_[pos_])) {
            word.push_back(static_cast<char>(s_[pos_++]));
        }
        return word;
    }

private:
    std::string read_name() {
        std::string name;
        while (pos_ < s_.size() && !is_ws(s_[pos_]) && !is_delim(s_[pos_])) {
            const std::uint8_t c = s_[pos_++];
            if (c == '#' && pos_ + 1 < s_.size() && hex_value(s_[pos_]) >= 0 && hex_value(s_[pos_ + 1]) >= 0) {
                name.push_back(static_cast<char>(hex_value(s_[pos_]) * 16 + hex_value(s_[pos_ + 1])));
                pos_ += 2;
            } else {
                name.push_back(static_cast<char>(c));
            }
        }
        return name;
    }

    std::string read_literal() {
        std::string out;
        int depth = 1;
        while (pos_ < s_.size()) {
            const std::uint8_t c = s_[pos_++];
            if (c == '\\') {
                if (pos_ >= s_.size()) break;
                const std::uint8_t e = s_[pos_++];
                switch (e) {
                case 'n': out.push_back('\n'); break;
                case 'r': out.push_back('\r'); break;
                case 't': out.push_back('\t'); break;
                case 'b': out.push_back('\b'); break;
                case 'f': out.push_back('\f'); break;
                case '\r':
                    if (pos_ < s_.size() && s_[pos_] == '\n') ++pos_;
                    break;
                case '\n': break;
                default:
                    if (e >= '0' && e <= '7') {
                        int v = e - '0';
                        for (int k = 0; k < 2 && pos_ < s_.size() && s_[pos_] >= '0' && s_[pos_] <= '7'; ++k) {
                            v = v * 8 + (s_[pos_++] - '0');
                        }
                        out.push_back(static_cast<char>(v & 0xFF));
                    } else {
                        out.push_back(static_cast<char>(e));
                    }
                }
            } else if (c == '(') {
                ++depth;
                out.push_back('(');
            } else if (c == ')') {
                if (--depth == 0) break;
                out.push_back(')');
            } else {
                out.push_back(static_cast<char>(c));
            }
        }
        return out;
    }

    std::string read_hex() {
        std::string out;
        int hi = -1;
        while (pos_ < s_.size()) {
            const std::uint8_t c = s_[pos_++];
            if (c == '>') break;
            const int v = hex_value(c);
            if (v < 0) continue;
            if (hi < 0) {
                hi = v;
            } else {
                out.push_back(static_cast<char>(hi * 16 + v));
                hi = -1;
            }
        }
        if (hi >= 0) out.push_back(static_cast<char>(hi * 16));
        return out;
    }

    Dict read_dict(bool allow_refs) {
        Dict d;
        for (;;) {
            Token key = next(allow_refs);
            if (key.kind == Token::Kind::dict_end || key.kind == Token::Kind::eof) break;
            const Name* name = key.obj.as_name();
            if (key.kind != Token::Kind::object || name == nullptr) {
                continue;
            }
            Token value = next(allow_refs);
            if (value.kind == Token::Kind::dict_end || value.kind == Token::Kind::eof) {
                d.set(name->value, Object());
                break;
            }
            d.set(name->value, value.kind == Token::Kind::object ? std::move(value.obj) : Object());
        }
        return d;
    }

    Array read_array(bool allow_refs) {
        Array a;
        for (;;) {
            Token t = next(allow_refs);
            if (t.kind == Token::Kind::array_end || t.kind == Token::Kind::eof) break;
            if (t.kind == Token::Kind::object) a.push_back(std::move(t.obj));
        }
        return a;
    }

    Object read_number(bool allow_refs) {
        const std::size_t start = pos_;
        bool real = false;
        while (pos_ < s_.size()) {
            const std::uint8_t c = s_[pos_];
            if (c == '.') {
                real = true;
            } else if (!(c >= '0' && c <= '9') && !((c == '+' || c == '-') && pos_ == start)) {
                break;
            }
            ++pos_;
        }
        const std::string text(reinterpret_cast<const char*>(s_.data()) + start, pos_ - start);
        if (real) {
            try {
                return Object(std::stod(text));
            } catch (...) {
                return Object(0.0);
            }
        }
        std::int64_t v = 0;
        try {
            v = std::stoll(text);
        } catch (...) {
            return Object(std::int64_t{0});
        }
        if (allow_refs && v >= 0 && text[0] != '+' && text[0] != '-') {
            const std::size_t save = pos_;
            skip_ws();
            std::size_t p = pos_;
            while (p < s_.size() && s_[p] >= '0' && s_[p] <= '9') ++p;
            if (p > pos_ && p < s_.size()) {
                const int gen = std::atoi(std::string(reinterpret_cast<const char*>(s_.data()) + pos_, p - pos_).c_str());
                std::size_t q = p;
                while (q < s_.size() && is_ws(s_[q])) ++q;
                if (q < s_.size() && s_[q] == 'R' && (q + 1 >= s_.size() || is_ws(s_[q + 1]) || is_delim(s_[q + 1]))) {
                    pos_ = q + 1;
                    return Object(Ref{static_cast<int>(v), gen});
                }
            }
            pos_ = save;
        }
        return Object(v);
    }

    std::span<const std::uint8_t> s_;
    std::size_t pos_;
};

std::size_t find_bytes(std::span<const std::uint8_t> hay, std::string_view needle, std::size_t from) {
    if (needle.empty() || hay.size() < needle.size()) return std::string_view::npos;
    auto it = std::search(hay.begin() + static_cast<std::ptrdiff_t>(std::min(from, hay.size())), hay.end(),
                          needle.begin(), needle.end());
    return it == hay.end() ? std::string_view::npos : static_cast<std::size_t>(it - hay.begin());
}

std::size_t rfind_bytes(std::span<const std::uint8_t> hay, std::string_view needle) {
    if (hay.size() < needle.size()) return std::string_view::npos;
    for (std::size_t i = hay.size() - needle.size() + 1; i-- > 0;) {
        if (std::memcmp(hay.data() + i, needle.data(), needle.size()) == 0) return i;
    }
    return std::string_view::npos;
}

// --- Filters -------------------------------------------------------------------

int param_int(const Object* params, std::string_view key, int fallback) {
    if (params == nullptr) return fallback;
    const Dict* d = params->as_dict();
    if (d == nullptr) return fallback;
    const Object* v = d->find(key);
    return v != nullptr && v->is_number() ? static_cast<int>(v->number()) : fallback;
}

Bytes apply_predictor(Bytes data, const Object* params) {
    const int predictor = param_int(params, "Predictor", 1);
    if (predictor < 2) return data;
    const int colors = param_int(params, "Colors", 1);
    const int bpc = param_int(params, "BitsPerComponent", 8);
    const int columns = param_int(params, "Columns", 1);
    const std::size_t bpp = static_cast<std::size_t>(std::max(1, (colors * bpc + 7) / 8));
    const std::size_t row_len = static_cast<std::size_t>((colors * bpc * columns + 7) / 8);
    if (row_len == 0) return data;
    Bytes out;
    if (predictor == 2) {
        if (bpc != 8) return data;
        out = data;
        for (std::size_t r = 0; r + row_len <= out.size(); r += row_len) {
            for (std::size_t i = bpp; i < row_len; ++i) {
                out[r + i] = static_cast<std::uint8_t>(out[r + i] + out[r + i - bpp]);
            }
        }
        return out;
    }
    std::vector<std::uint8_t> prev(row_len, 0);
    std::vector<std::uint8_t> cur(row_len, 0);
    for (std::size_t pos = 0; pos + 1 <= data.size(); pos += row_len + 1) {
        const int type = data[pos];
        const std::size_t avail = std::min(row_len, data.size() - pos - 1);
        std::fill(cur.begin(), cur.end(), 0);
        std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(pos + 1), avail, cur.begin());
        for (std::size_t i = 0; i < row_len; ++i) {
            const int a = i >= bpp ? cur[i - bpp] : 0;
            const int b = prev[i];
            const int c = i >= bpp ? prev[i - bpp] : 0;
            int v = cur[i];
            switch (type) {
            case 1: v += a; break;
            case 2: v += b; break;
            case 3: v += (a + b) / 2; break;
            case 4: {
                const int p = a + b - c;
                const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
                v += (pa <= pb && pa <= pc) ? a : (pb <= pc ? b : c);
                break;
            }
            default: break;
            }
            cur[i] = static_cast<std::uint8_t>(v);
        }
        out.insert(out.end(), cur.begin(), cur.begin() + static_cast<std::ptrdiff_t>(avail));
        prev = cur;
    }
    return out;
}

Bytes ascii_hex_decode(std::span<const std::uint8_t> in) {
    Bytes out;
    int hi = -1;
    for (std::uint8_t c : in) {
        if (c == '>') break;
        const int v = hex_value(c);
        if (v < 0) continue;
        if (hi < 0) {
            hi = v;
        } else {
            out.push_back(static_cast<std::uint8_t>(hi * 16 + v));
            hi = -1;
        }
    }
    if (hi >= 0) out.push_back(static_cast<std::uint8_t>(hi * 16));
    return out;
}

Bytes ascii85_decode(std::span<const std::uint8_t> in) {
    Bytes out;
    std::uint32_t group = 0;
    int n = 0;
    for (std::size_t i = 0; i < in.size(); ++i) {
        const std::uint8_t c = in[i];
        if (c == '~') break;
        if (is_ws(c)) continue;
        if (c == 'z' && n == 0) {
            out.insert(out.end(), 4, 0);
            continue;
        }
        if (c < '!' || c > 'u') continue;
        group = group * 85 + (c - '!');
        if (++n == 5) {
            for (int k = 3; k >= 0; --k) out.push_back(static_cast<std::uint8_t>(group >> (8 * k)));
            group = 0;
            n = 0;
        }
    }
    if (n > 1) {
        for (int k = n; k < 5; ++k) group = group * 85 + 84;
        for (int k = 0; k < n - 1; ++k) out.push_back(static_cast<std::uint8_t>(group >> (8 * (3 - k))));
    }
    return out;
}

Bytes run_length_decode(std::span<const std::uint8_t> in) {
    Bytes out;
    std::size_t i = 0;
    while (i < in.size()) {
        const int len = in[i++];
        if (len == 128) break;
        if (len < 128) {
            const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(len) + 1, in.size() - i);
            out.insert(out.end(), in.begin() + static_cast<std::ptrdiff_t>(i), in.begin() + static_cast<std::ptrdiff_t>(i + n));
            i += n;
        } else if (i < in.size()) {
            out.insert(out.end(), static_cast<std::size_t>(257 - len), in[i++]);
        }
    }
    return out;
}

Bytes lzw_decode(std::span<const std::uint8_t> in, int early_change) {
    Bytes out;
    std::vector<Bytes> table;
    auto reset = [&] {
        table.assign(258, {});
        for (int i = 0; i < 256; ++i) table[static_cast<std::size_t>(i)] = Bytes{static_cast<std::uint8_t>(i)};
    };
    reset();
    int code_len = 9;
    std::uint32_t buffer = 0;
    int bits = 0;
    std::size_t pos = 0;
    Bytes prev;
    for (;;) {
        while (bits < code_len && pos < in.size()) {
            buffer = (buffer << 8) | in[pos++];
            bits += 8;
        }
        if (bits < code_len) break;
        const int code = static_cast<int>((buffer >> (bits - code_len)) & ((1u << code_len) - 1));
        bits -= code_len;
        if (code == 256) {
            reset();
            code_len = 9;
            prev.clear();
            continue;
        }
        if (code == 257) break;
        Bytes entry;
        if (code < static_cast<int>(table.size())) {
            entry = table[static_cast<std::size_t>(code)];
            if (!prev.empty()) {
                Bytes add = prev;
                add.push_back(entry[0]);
                table.push_back(std::move(add));
            }
        } else if (!prev.empty()) {
            entry = prev;
            entry.push_back(prev[0]);
            table.push_back(entry);
        } else {
            break;
        }
        out.insert(out.end(), entry.begin(), entry.end());
        prev = std::move(entry);
        const std::size_t next = table.size() + static_cast<std::size_t>(early_change);
        if (next >= 2048) {
            code_len = 12;
        } else if (next >= 1024) {
            code_len = 11;
        } else if (next >= 512) {
            code_len = 10;
        }
    }
    return out;
}

} // namespace

std::vector<ContentToken> tokenize_content(std::span<const std::uint8_t> content) {
    std::vector<ContentToken> out;
    Lexer lex(content);
    for (;;) {
        Token t = lex.next(false);
        if (t.kind == Token::Kind::eof) break;
        if (t.kind == Token::Kind::object) {
            ContentToken ct;
            ct.operand = std::move(t.obj);
            out.push_back(std::move(ct));
            continue;
        }
        if (t.kind != Token::Kind::keyword) continue;
        ContentToken ct;
        ct.is_operator = true;
        ct.op = t.keyword;
        if (ct.op == "BI") {
            for (;;) {
                Token key = lex.next(false);
                if (key.kind == Token::Kind::eof) break;
                if (key.kind == Token::Kind::keyword && key.keyword == "ID") break;
                if (key.kind != Token::Kind::object || key.obj.as_name() == nullptr) continue;
                Token val = lex.next(false);
                ct.inline_dict.set(key.obj.as_name()->value, val.kind == Token::Kind::object ? std::move(val.obj) : Object());
            }
            std::size_t p = lex.pos() + 1; // single whitespace after ID
            std::size_t end = p;
            for (; end + 2 <= content.size(); ++end) {
                if (content[end] == 'E' && content[end + 1] == 'I' && end > p && is_ws(content[end - 1]) &&
                    (end + 2 == content.size() || is_ws(content[end + 2]) || is_delim(content[end + 2]))) {
                    break;
                }
            }
            if (end + 2 > content.size()) end = content.size();
            std::size_t data_end = end > p ? end - 1 : p;
            ct.inline_data.assign(content.begin() + static_cast<std::ptrdiff_t>(std::min(p, content.size())),
                                  content.begin() + static_cast<std::ptrdiff_t>(std::min(data_end, content.size())));
            lex.seek(std::min(end + 2, content.size()));
        }
        out.push_back(std::move(ct));
    }
    return out;
}

// --- Document --------------------------------------------------------------------

Document Document::open(const std::filesystem::path& path) {
    Bytes bytes;
    try {
        bytes = read_file(path);
    } catch (const Error& e) {
        throw Error(ErrorCode::ingest, e.what());
    }
    return load(std::move(bytes));
}

Document Document::load(Bytes bytes) {
    Document doc;
    doc.bytes_ = std::make_shared<const Bytes>(std::move(bytes));
    const Bytes& b = *doc.bytes_;
    if (b.size() < 8 || std::memcmp(b.data(), "%PDF-", 5) != 0) {
        if (find_bytes(b, "%PDF-", 0) == std::string_view::npos) {
            throw Error(ErrorCode::ingest, "not a PDF file (missing %PDF header)");
        }
    }

    bool ok = false;
    try {
        const std::size_t sx = rfind_bytes(b, "startxref");
        if (sx != std::string_view::npos) {
            Lexer lex(b, sx + 9);
            const Object off = lex.parse_object(false);
            doc.read_xref_chain(static_cast<std::size_t>(off.number()));
            ok = doc.trailer_.find("Root") != nullptr;
        }
    } catch (const Error&) {
        ok = false;
    }
    if (!ok) {
        doc.xref_.clear();
        doc.trailer_ = Dict{};
        doc.scan_objects();
    } else {
        auto offset_ok = [&b](int num, std::size_t off) {
            try {
                Lexer lex(b, off);
                const Object n = lex.parse_object(false);
                lex.parse_object(false);
                return n.is_number() && static_cast<int>(n.number()) == num && lex.read_keyword() == "obj";
            } catch (const Error&) {
                return false;
            }
        };
        // A parsable table with stale offsets (edited files) is patched from a full scan.
        const bool stale = std::any_of(doc.xref_.begin(), doc.xref_.end(), [&](const auto& entry) {
            return entry.second.kind == XrefEntry::Kind::offset && !offset_ok(entry.first, entry.second.offset);
        });
        if (stale) doc.scan_objects();
    }
    if (doc.trailer_.find("Encrypt") != nullptr) {
        throw Error(ErrorCode::ingest, "encrypted PDF documents are not supported");
    }
    try {
        doc.collect_pages();
    } catch (const Error& e) {
        throw Error(ErrorCode::ingest, std::string("page tree: ") + e.what());
    }
    return doc;
}

void Document::read_xref_chain(std::size_t start) {
    const Bytes& b = *bytes_;
    std::set<std::size_t> seen;
    std::vector<std::size_t> pending{start};
    bool first = true;
    while (!pending.empty()) {
        const std::size_t at = pending.back();
        pending.pop_back();
        if (at >= b.size() || !seen.insert(at).second) continue;
        Lexer lex(b, at);
        lex.skip_ws();
        const std::size_t mark = lex.pos();
        Dict trailer;
        if (lex.read_keyword() == "xref") {
            for (;;) {
                lex.skip_ws();
                const std::size_t save = lex.pos();
                if (lex.read_keyword() == "trailer") break;
                lex.seek(save);
                const int first_num = static_cast<int>(lex.parse_object(false).number());
                const int count = static_cast<int>(lex.parse_object(false).number());
                for (int i = 0; i < count; ++i) {
                    const auto offset = static_cast<std::size_t>(lex.parse_object(false).number());
                    lex.parse_object(false);
                    const std::string kind = lex.read_keyword();
                    const int num = first_num + i;
                    if (xref_.count(num) == 0) {
                        XrefEntry e;
                        e.kind = kind == "n" ? XrefEntry::Kind::offset : XrefEntry::Kind::free;
                        e.offset = offset;
                        xref_[num] = e;
                    }
                }
            }
            const Object t = lex.parse_object(true);
            if (t.as_dict() == nullptr) throw Error(ErrorCode::parse, "bad trailer");
            trailer = *t.as_dict();
            if (const Object* xs = trailer.find("XRefStm"); xs != nullptr && xs->is_number()) {
                pending.push_back(static_cast<std::size_t>(xs->number()));
            }
        } else {
            lex.seek(mark);
            const Object obj = parse_at(mark, Ref{-1, 0});
            const Stream* s = obj.as_stream();
            if (s == nullptr || !obj.as_dict()->find("Type") || !obj.as_dict()->find("Type")->is_name("XRef")) {
                throw Error(ErrorCode::parse, "startxref does not point at a cross-reference section");
            }
            trailer = s->dict;
            const Array* w = s->dict.find("W") ? s->dict.find("W")->as_array() : nullptr;
            if (w == nullptr || w->size() != 3) throw Error(ErrorCode::parse, "xref stream without /W");
            const int w0 = static_cast<int>((*w)[0].number());
            const int w1 = static_cast<int>((*w)[1].number());
            const int w2 = static_cast<int>((*w)[2].number());
            std::vector<std::pair<int, int>> sections;
            if (const Object* idx = s->dict.find("Index"); idx != nullptr && idx->as_array() != nullptr) {
                const Array& a = *idx->as_array();
                for (std::size_t i = 0; i + 1 < a.size(); i += 2) {
                    sections.emplace_back(static_cast<int>(a[i].number()), static_cast<int>(a[i + 1].number()));
                }
            } else {
                sections.emplace_back(0, static_cast<int>(s->dict.find("Size")->number()));
            }
            const Bytes data = decode(*s).data;
            std::size_t p = 0;
            auto field = [&](int width, std::uint64_t fallback) {
                if (width == 0) return fallback;
                std::uint64_t v = 0;
                for (int k = 0; k < width && p < data.size(); ++k) v = (v << 8) | data[p++];
                return v;
            };
            for (auto [first_num, count] : sections) {
                for (int i = 0; i < count && p < data.size(); ++i) {
                    const std::uint64_t type = field(w0, 1);
                    const std::uint64_t f1 = field(w1, 0);
                    const std::uint64_t f2 = field(w2, 0);
                    const int num = first_num + i;
                    if (xref_.count(num)) continue;
                    XrefEntry e;
                    if (type == 1) {
                        e.kind = XrefEntry::Kind::offset;
                        e.offset = static_cast<std::size_t>(f1);
                    } else if (type == 2) {
                        e.kind = XrefEntry::Kind::compressed;
                        e.container = static_cast<int>(f1);
                        e.index = static_cast<int>(f2);
                    }
                    xref_[num] = e;
                }
            }
        }
        for (const DictEntry& e : trailer.entries()) {
            if (e.key == "Prev" || e.key == "XRefStm" || e.key == "W" || e.key == "Index" || e.key == "Length" ||
                e.key == "Filter" || e.key == "DecodeParms" || e.key == "Type") {
                continue;
            }
            if (first || trailer_.find(e.key) == nullptr) {
                if (trailer_.find(e.key) == nullptr) trailer_.set(e.key, e.value);
            }
        }
        first = false;
        if (const Object* prev = trailer.find("Prev"); prev != nullptr && prev->is_number()) {
            pending.push_back(static_cast<std::size_t>(prev->number()));
        }
    }
}

void Document::scan_objects() {
    const Bytes& b = *bytes_;
    for (std::size_t i = 0; i + 5 < b.size(); ++i) {
        if (b[i] != 'o' || b[i + 1] != 'b' || b[i + 2] != 'j') continue;
        if (i + 3 < b.size() && !is_ws(b[i + 3]) && !is_delim(b[i + 3])) continue;
        // Walk back over "<num> <gen> ".
        std::size_t j = i;
        while (j > 0 && is_ws(b[j - 1])) --j;
        std::size_t g = j;
        while (g > 0 && b[g - 1] >= '0' && b[g - 1] <= '9') --g;
        if (g == j) continue;
        std::size_t k = g;
        while (k > 0 && is_ws(b[k - 1])) --k;
        std::size_t n = k;
        while (n > 0 && b[n - 1] >= '0' && b[n - 1] <= '9') --n;
        if (n == k || k == g) continue;
        const int num = std::atoi(std::string(b.begin() + static_cast<std::ptrdiff_t>(n), b.begin() + static_cast<std::ptrdiff_t>(k)).c_str());
        XrefEntry e;
        e.kind = XrefEntry::Kind::offset;
        e.offset = n;
        xref_[num] = e;
    }
    const std::size_t t = rfind_bytes(b, "trailer");
    if (t != std::string_view::npos) {
        try {
            Lexer lex(b, t + 7);
            const Object obj = lex.parse_object(true);
            if (obj.as_dict() != nullptr) trailer_ = *obj.as_dict();
        } catch (const Error&) {
        }
    }
    if (trailer_.find("Root") == nullptr) {
        for (const auto& [num, e] : xref_) {
            try {
                const Object& obj = get(Ref{num, 0});
                const Dict* d = obj.as_dict();
                if (d != nullptr && d->find("Type") != nullptr && d->find("Type")->is_name("Catalog")) {
                    trailer_.set("Root", Object(Ref{num, 0}));
                    break;
                }
            } catch (const Error&) {
            }
        }
    }
    if (trailer_.find("Root") == nullptr) {
        throw Error(ErrorCode::ingest, "PDF has no document catalog");
    }
}

Object Document::parse_at(std::size_t offset, Ref expected) const {
    const Bytes& b = *bytes_;
    Lexer lex(b, offset);
    const Object num = lex.parse_object(false);
    const Object gen = lex.parse_object(false);
    if (lex.read_keyword() != "obj") {
        throw Error(ErrorCode::parse, "missing 'obj' keyword at offset " + std::to_string(offset));
    }
    if (expected.num >= 0 && static_cast<int>(num.number()) != expected.num) {
        throw Error(ErrorCode::parse, "xref offset points at the wrong object");
    }
    (void)gen;
    Object obj = lex.parse_object(true);
    const std::size_t after = lex.pos();
    lex.skip_ws();
    const std::size_t kw_at = lex.pos();
    if (lex.read_keyword() != "stream" || obj.as_dict() == nullptr) {
        lex.seek(after);
        return obj;
    }
    (void)kw_at;
    std::size_t data_start = lex.pos();
    if (data_start < b.size() && b[data_start] == '\r') ++data_start;
    if (data_start < b.size() && b[data_start] == '\n') ++data_start;
    Dict dict = *obj.as_dict();
    std::size_t length = std::string_view::npos;
    if (const Object* len = dict.find("Length")) {
        try {
            const Object& resolved = resolve(*len);
            if (resolved.is_number()) length = static_cast<std::size_t>(resolved.number());
        } catch (const Error&) {
        }
    }
    bool length_ok = false;
    if (length != std::string_view::npos && data_start + length <= b.size()) {
        Lexer check(b, data_start + length);
        check.skip_ws();
        length_ok = check.read_keyword() == "endstream";
    }
    if (!length_ok) {
        const std::size_t end = find_bytes(b, "endstream", data_start);
        if (end == std::string_view::npos) throw Error(ErrorCode::parse, "unterminated stream");
        std::size_t e = end;
        if (e > data_start && b[e - 1] == '\n') --e;
        if (e > data_start && b[e - 1] == '\r') --e;
        length = e - data_start;
    }
    Stream s;
    s.dict = std::move(dict);
    s.raw.assign(b.begin() + static_cast<std::ptrdiff_t>(data_start),
                 b.begin() + static_cast<std::ptrdiff_t>(data_start + length));
    return Object(std::move(s));
}

const Object& Document::get(Ref ref) const {
    static const Object null_object;
    std::lock_guard lock(*mutex_);
    if (auto it = cache_.find(ref.num); it != cache_.end()) {
        return it->second;
    }
    auto x = xref_.find(ref.num);
    if (x == xref_.end() || x->second.kind == XrefEntry::Kind::free) {
        return null_object;
    }
    if (x->second.kind == XrefEntry::Kind::compressed) {
        return load_compressed(x->second.container, x->second.index, ref);
    }
    // Insert a placeholder first so that self-referential /Length lookups terminate.
    cache_[ref.num] = Object();
    Object obj;
    try {
        obj = parse_at(x->second.offset, ref);
    } catch (const Error&) {
        cache_.erase(ref.num);
        throw;
    }
    auto& slot = cache_[ref.num];
    slot = std::move(obj);
    return slot;
}

const Object& Document::load_compressed(int container, int index, Ref ref) const {
    if (objstm_index_.count(container) == 0) {
        const Object& holder = get(Ref{container, 0});
        const Stream* s = holder.as_stream();
        if (s == nullptr) throw Error(ErrorCode::parse, "object stream " + std::to_string(container) + " missing");
        Bytes data = decode(*s).data;
        const int n = static_cast<int>(s->dict.find("N") ? s->dict.find("N")->number() : 0);
        const std::size_t first = static_cast<std::size_t>(s->dict.find("First") ? s->dict.find("First")->number() : 0);
        Lexer lex(data);
        std::vector<std::pair<int, std::size_t>> entries;
        for (int i = 0; i < n; ++i) {
            const int num = static_cast<int>(lex.parse_object(false).number());
            const auto off = static_cast<std::size_t>(lex.parse_object(false).number());
            entries.emplace_back(num, first + off);
        }
        objstm_index_[container] = std::move(entries);
        objstm_data_[container] = std::move(data);
    }
    const auto& entries = objstm_index_[container];
    const Bytes& data = objstm_data_[container];
    std::size_t offset = std::string_view::npos;
    if (index >= 0 && static_cast<std::size_t>(index) < entries.size() && entries[static_cast<std::size_t>(index)].first == ref.num) {
        offset = entries[static_cast<std::size_t>(index)].second;
    } else {
        for (const auto& [num, off] : entries) {
            if (num == ref.num) offset = off;
        }
    }
    if (offset == std::string_view::npos || offset >= data.size()) {
        throw Error(ErrorCode::parse, "object " + std::to_string(ref.num) + " not in its object stream");
    }
    Lexer lex(data, offset);
    auto& slot = cache_[ref.num];
    slot = lex.parse_object(true);
    return slot;
}

const Object& Document::resolve(const Object& obj) const {
    const Object* cur = &obj;
    for (int depth = 0; depth < 32; ++depth) {
        const Ref* r = cur->as_ref();
        if (r == nullptr) return *cur;
        cur = &get(*r);
    }
    throw Error(ErrorCode::parse, "reference chain too deep");
}

DecodedStream Document::decode(const Stream& stream) const {
    DecodedStream out;
    out.data = stream.raw;
    std::vector<Object> filters;
    std::vector<Object> params;
    if (const Object* f = stream.dict.find("Filter")) {
        const Object& rf = resolve(*f);
        if (const Array* a = rf.as_array()) {
            for (const Object& o : *a) filters.push_back(resolve(o));
        } else if (rf.as_name() != nullptr) {
            filters.push_back(rf);
        }
    }
    const Object* dp = stream.dict.find("DecodeParms");
    if (dp == nullptr) dp = stream.dict.find("DP");
    if (dp != nullptr) {
        const Object& rdp = resolve(*dp);
        if (const Array* a = rdp.as_array()) {
            for (const Object& o : *a) params.push_back(resolve(o));
        } else {
            params.push_back(rdp);
        }
    }
    for (std::size_t i = 0; i < filters.size(); ++i) {
        const Name* name = filters[i].as_name();
        if (name == nullptr) continue;
        const Object* param = i < params.size() ? &params[i] : nullptr;
        const std::string& f = name->value;
        if (f == "FlateDecode" || f == "Fl") {
            out.data = apply_predictor(zlib_decompress(out.data), param);
        } else if (f == "LZWDecode" || f == "LZW") {
            out.data = apply_predictor(lzw_decode(out.data, param_int(param, "EarlyChange", 1)), param);
        } else if (f == "ASCIIHexDecode" || f == "AHx") {
            out.data = ascii_hex_decode(out.data);
        } else if (f == "ASCII85Decode" || f == "A85") {
            out.data = ascii85_decode(out.data);
        } else if (f == "RunLengthDecode" || f == "RL") {
            out.data = run_length_decode(out.data);
        } else {
            out.image_filter = f == "DCT" ? "DCTDecode" : (f == "CCF" ? "CCITTFaxDecode" : f);
            if (param != nullptr) out.image_filter_params = *param;
            break;
        }
    }
    return out;
}

void Document::collect_pages() {
    const Object* root_ref = trailer_.find("Root");
    if (root_ref == nullptr) throw Error(ErrorCode::parse, "missing /Root");
    const Dict* root = resolve(*root_ref).as_dict();
    if (root == nullptr || root->find("Pages") == nullptr) throw Error(ErrorCode::parse, "catalog has no /Pages");

    struct Inherited {
        std::optional<std::array<double, 4>> media;
        std::optional<std::array<double, 4>> crop;
        std::optional<Dict> resources;
        int rotate = 0;
    };

    auto read_box = [&](const Dict& d, std::string_view key) -> std::optional<std::array<double, 4>> {
        const Object* o = d.find(key);
        if (o == nullptr) return std::nullopt;
        const Array* a = resolve(*o).as_array();
        if (a == nullptr || a->size() != 4) return std::nullopt;
        std::array<double, 4> box{};
        for (std::size_t i = 0; i < 4; ++i) box[i] = resolve((*a)[i]).number();
        return std::array<double, 4>{std::min(box[0], box[2]), std::min(box[1], box[3]), std::max(box[0], box[2]),
                                     std::max(box[1], box[3])};
    };

    std::set<int> visited;
    std::function<void(const Object&, Inherited, int)> walk = [&](const Object& node_obj, Inherited inh, int depth) {
        if (depth > 64) throw Error(ErrorCode::parse, "page tree too deep");
        Ref ref{-1, 0};
        if (const Ref* r = node_obj.as_ref()) {
            if (!visited.insert(r->num).second) return;
            ref = *r;
        }
        const Dict* node = resolve(node_obj).as_dict();
        if (node == nullptr) return;
        if (auto m = read_box(*node, "MediaBox")) inh.media = m;
        if (auto c = read_box(*node, "CropBox")) inh.crop = c;
        if (const Object* res = node->find("Resources")) {
            if (const Dict* rd = resolve(*res).as_dict()) inh.resources = *rd;
        }
        if (const Object* rot = node->find("Rotate")) {
            const Object& rr = resolve(*rot);
            if (rr.is_number()) inh.rotate = static_cast<int>(rr.number());
        }
        const Object* kids = node->find("Kids");
        const Object* type = node->find("Type");
        const bool is_tree = kids != nullptr && (type == nullptr || resolve(*type).is_name("Pages"));
        if (is_tree) {
            const Array* arr = resolve(*kids).as_array();
            if (arr == nullptr) return;
            for (const Object& kid : *arr) walk(kid, inh, depth + 1);
            return;
        }
        PageInfo info;
        info.ref = ref;
        info.dict = *node;
        if (inh.media) info.media_box = *inh.media;
        if (inh.crop) {
            const auto& c = *inh.crop;
            auto& m = info.media_box;
            const std::array<double, 4> clipped{std::max(c[0], m[0]), std::max(c[1], m[1]), std::min(c[2], m[2]),
                                                std::min(c[3], m[3])};
            if (clipped[2] > clipped[0] && clipped[3] > clipped[1]) m = clipped;
        }
        if (inh.resources) info.resources = *inh.resources;
        info.rotate = ((inh.rotate % 360) + 360) % 360;
        pages_.push_back(std::move(info));
    };
    walk(*root->find("Pages"), Inherited{}, 0);
}

Bytes Document::page_content(std::size_t index) const {
    const PageInfo& p = page(index);
    Bytes out;
    const Object* contents = p.dict.find("Contents");
    if (contents == nullptr) return out;
    const Object& resolved = resolve(*contents);
    std::vector<const Object*> parts;
    if (const Array* a = resolved.as_array()) {
        for (const Object& o : *a) parts.push_back(&resolve(o));
    } else {
        parts.push_back(&resolved);
    }
    for (const Object* part : parts) {
        const Stream* s = part->as_stream();
        if (s == nullptr) continue;
        const DecodedStream d = decode(*s);
        out.insert(out.end(), d.data.begin(), d.data.end());
        out.push_back('\n');
    }
    return out;
}

} // namespace lens::pdf
