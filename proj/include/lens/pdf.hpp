/**
 * @file pdf.hpp
 * @brief Minimal PDF object model and reader.
 *
 * Supports classic cross-reference tables, cross-reference streams, object
 * streams, incremental updates (/Prev chains) and a full-file scan fallback
 * for damaged tables. Encrypted documents are rejected.
 */
#pragma once

#include "lens/codec.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace lens::pdf {

class Object;
struct DictEntry;

using Array = std::vector<Object>;

struct Name {
    std::string value;
    friend bool operator==(const Name&, const Name&) = default;
};

struct String {
    std::string value;
    bool hex = false;
};

struct Ref {
    int num = 0;
    int gen = 0;
    friend bool operator==(const Ref&, const Ref&) = default;
};

class Dict {
public:
    const Object* find(std::string_view key) const;
    void set(std::string key, Object value);
    const std::vector<DictEntry>& entries() const { return entries_; }

private:
    std::vector<DictEntry> entries_;
};

struct Stream {
    Dict dict;
    Bytes raw;
};

class Object {
public:
    using Value = std::variant<std::monostate, bool, std::int64_t, double, String, Name, Array, Dict, Stream, Ref>;

    Object() = default;
    Object(Value v) : value_(std::move(v)) {}

    const Value& value() const { return value_; }

    bool is_null() const { return std::holds_alternative<std::monostate>(value_); }
    bool is_number() const { return std::holds_alternative<std::int64_t>(value_) || std::holds_alternative<double>(value_); }
    bool is_name(std::string_view n) const {
        const auto* p = std::get_if<Name>(&value_);
        return p != nullptr && p->value == n;
    }

    double number() const;
    const Name* as_name() const { return std::get_if<Name>(&value_); }
    const String* as_string() const { return std::get_if<String>(&value_); }
    const Array* as_array() const { return std::get_if<Array>(&value_); }
    const Dict* as_dict() const;
    const Stream* as_stream() const { return std::get_if<Stream>(&value_); }
    const Ref* as_ref() const { return std::get_if<Ref>(&value_); }
    const bool* as_bool() const { return std::get_if<bool>(&value_); }

private:
    Value value_;
};

struct DictEntry {
    std::string key;
    Object value;
};

/// Content-stream token: either an operand object or an operator keyword.
struct ContentToken {
    bool is_operator = false;
    std::string op;
    Object operand;
    /// Inline image payload for the BI ... ID ... EI sequence (op == "BI").
    Dict inline_dict;
    Bytes inline_data;
};

/// Tokenizes a page content stream into operands and operators.
std::vector<ContentToken> tokenize_content(std::span<const std::uint8_t> content);

/// Page attributes after inheritance through the page tree.
struct PageInfo {
    Ref ref;
    Dict dict;
    std::array<double, 4> media_box{0, 0, 612, 792};
    Dict resources;
    int rotate = 0;
};

/// Result of running the non-image filters of a stream.
struct DecodedStream {
    Bytes data;
    /// Name of a remaining image codec filter (DCTDecode, JPXDecode, ...) or empty.
    std::string image_filter;
    Object image_filter_params;
};

class Document {
public:
    /// Parses the document structure. Throws ingest errors for damaged or encrypted files.
    static Document load(Bytes bytes);
    static Document open(const std::filesystem::path& path);

    std::size_t page_count() const { return pages_.size(); }
    const PageInfo& page(std::size_t index) const { return pages_.at(index); }

    /// Follows indirect references until a direct object is reached.
    const Object& resolve(const Object& obj) const;
    const Object& get(Ref ref) const;

    DecodedStream decode(const Stream& stream) const;

    /// Concatenated, decoded content streams of a page.
    Bytes page_content(std::size_t index) const;

    const Dict& trailer() const { return trailer_; }

private:
    struct XrefEntry {
        enum class Kind { free, offset, compressed } kind = Kind::free;
        std::size_t offset = 0;
        int container = 0;
        int index = 0;
    };

    Object parse_at(std::size_t offset, Ref expected) const;
    void read_xref_chain(std::size_t start);
    void scan_objects();
    void collect_pages();
    const Object& load_compressed(int container, int index, Ref ref) const;

    std::shared_ptr<const Bytes> bytes_;
    std::map<int, XrefEntry> xref_;
    Dict trailer_;
    std::vector<PageInfo> pages_;
    mutable std::map<int, Object> cache_;
    mutable std::map<int, std::vector<std::pair<int, std::size_t>>> objstm_index_;
    mutable std::map<int, Bytes> objstm_data_;
    std::shared_ptr<std::recursive_mutex> mutex_ = std::make_shared<std::recursive_mutex>();
};

} // namespace lens::pdf
