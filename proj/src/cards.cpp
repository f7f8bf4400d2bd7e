#include "lens/cards.hpp"

#include "lens/codec.hpp"
#include "lens/error.hpp"
#include "lens/parallel.hpp"
#include "lens/workspace.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <map>
#include <set>

namespace lens {

namespace {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

TypeLabel parse_type(const std::string& s) {
    if (s == "ENT") return TypeLabel::ENT;
    if (s == "FRAG") return TypeLabel::FRAG;
    throw Error(ErrorCode::parse, "unknown type label '" + s + "'");
}

PositionLabel parse_position(const std::string& s) {
    if (s == "TOP") return PositionLabel::TOP;
    if (s == "BOTTOM") return PositionLabel::BOTTOM;
    throw Error(ErrorCode::parse, "unknown position label '" + s + "'");
}

RotationLabel parse_rotation(const std::string& s) {
    if (s == "LEFT") return RotationLabel::LEFT;
    if (s == "RIGHT") return RotationLabel::RIGHT;
    throw Error(ErrorCode::parse, "unknown rotation label '" + s + "'");
}

ojson labels_json(const CardLabels& l) {
    return {{"type", to_string(l.type)}, {"position", to_string(l.position)}, {"rotation", to_string(l.rotation)}};
}

CardLabels labels_from(const json& j) {
    return {parse_type(j.at("type").get<std::string>()), parse_position(j.at("position").get<std::string>()),
            parse_rotation(j.at("rotation").get<std::string>())};
}

std::string canonical_file(const std::string& card_id) { return "cards/canonical/" + card_id + ".png"; }

std::string next_catalog_id(const Catalog& catalog) {
    int max_n = 0;
    for (const CatalogRecord& r : catalog.records) {
        if (r.catalog_id.size() > 1 && r.catalog_id[0] == 'C') {
            try {
                max_n = std::max(max_n, std::stoi(r.catalog_id.substr(1)));
            } catch (const std::exception&) {
            }
        }
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "C%05d", max_n + 1);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    return out + "\"";
}

std::vector<std::vector<std::string>> parse_csv_rows(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    std::size_t line = 1;
    std::size_t quote_line = 0;
    std::size_t i = 0;
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
    };
    while (i < text.size()) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    i += 2;
                    continue;
                }
                quoted = false;
                ++i;
                if (i < text.size() && text[i] != ',' && text[i] != '\r' && text[i] != '\n') {
                    throw Error(ErrorCode::parse, "catalog line " + std::to_string(line) + ": text after closing quote");
                }
                continue;
            }
            if (c == '\n') ++line;
            field.push_back(c);
            ++i;
            continue;
        }
        if (c == '"') {
            if (field_started) {
                throw Error(ErrorCode::parse, "catalog line " + std::to_string(line) + ": stray quote");
            }
            quoted = true;
            field_started = true;
            quote_line = line;
            ++i;
        } else if (c == ',') {
            end_field();
            ++i;
        } else if (c == '\r' || c == '\n') {
            end_row();
            ++line;
            i += (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ? 2 : 1;
        } else {
            field.push_back(c);
            field_started = true;
            ++i;
        }
    }
    if (quoted) throw Error(ErrorCode::parse, "catalog line " + std::to_string(quote_line) + ": unterminated quote");
    if (field_started || !row.empty()) end_row();
    return rows;
}

} // namespace

std::string to_string(TypeLabel t) { return t == TypeLabel::ENT ? "ENT" : "FRAG"; }
std::string to_string(PositionLabel p) { return p == PositionLabel::TOP ? "TOP" : "BOTTOM"; }
std::string to_string(RotationLabel r) { return r == RotationLabel::LEFT ? "LEFT" : "RIGHT"; }
std::string to_string(const CardLabels& l) {
    return to_string(l.type) + "-" + to_string(l.position) + "-" + to_string(l.rotation);
}

CardLabels decide_labels(const HeadPrediction& pred, double threshold) {
    pred.validate();
    return {pred.type_p >= threshold ? TypeLabel::FRAG : TypeLabel::ENT,
            pred.position_p >= threshold ? PositionLabel::BOTTOM : PositionLabel::TOP,
            pred.rotation_p >= threshold ? RotationLabel::RIGHT : RotationLabel::LEFT};
}

CanonicalResult canonicalize(const RasterImage& card, const HeadPrediction& pred, double threshold) {
    CanonicalResult r;
    r.original = decide_labels(pred, threshold);
    r.flipped_vertical = r.original.position == PositionLabel::BOTTOM;
    r.flipped_horizontal = r.original.rotation == RotationLabel::RIGHT;
    r.image = flip(card, r.flipped_vertical, r.flipped_horizontal);
    r.labels = {r.original.type, PositionLabel::TOP, RotationLabel::LEFT};
    return r;
}

RasterImage rotate90(const RasterImage& image) { return flip(transpose(image), false, true); }

RasterImage apply_orientation(const RasterImage& image, bool rotated, bool vertical, bool horizontal) {
    return flip(rotated ? rotate90(image) : image, vertical, horizontal);
}

std::string OrientationVariant::name() const { return to_string(labels) + (rotated ? "-R90" : ""); }

std::vector<OrientationVariant> augment_orientations(const RasterImage& card, const CardLabels& labels, bool flips_only) {
    std::vector<OrientationVariant> out;
    for (int rotated = 0; rotated < (flips_only ? 1 : 2); ++rotated) {
        for (int v = 0; v < 2; ++v) {
            for (int h = 0; h < 2; ++h) {
                OrientationVariant var;
                var.rotated = rotated != 0;
                var.vertical = v != 0;
                var.horizontal = h != 0;
                var.image = apply_orientation(card, var.rotated, var.vertical, var.horizontal);
                var.labels = {labels.type, v != 0 ? PositionLabel::BOTTOM : PositionLabel::TOP,
                              h != 0 ? RotationLabel::RIGHT : RotationLabel::LEFT};
                out.push_back(std::move(var));
            }
        }
    }
    return out;
}

std::string card_id_for(int page_no, int index) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "page%04d_det%02d", page_no, index);
    return buf;
}

std::vector<InstanceCard> load_cards(const std::filesystem::path& project_dir) {
    const auto path = workspace::cards_registry_path(project_dir);
    if (!std::filesystem::exists(path)) return {};
    std::vector<InstanceCard> cards;
    try {
        const json j = json::parse(read_text(path));
        for (const json& jc : j.at("cards")) {
            InstanceCard c;
            c.card_id = jc.at("card_id").get<std::string>();
            c.detection_id = jc.at("detection_id").get<std::string>();
            c.page_no = jc.at("page_no").get<int>();
            c.dpi = jc.at("dpi").get<int>();
            c.source_file = jc.at("source_file").get<std::string>();
            c.file = jc.at("file").get<std::string>();
            c.labels = labels_from(jc.at("labels"));
            if (jc.contains("original_labels")) c.original_labels = labels_from(jc["original_labels"]);
            c.canonical = jc.at("canonical").get<bool>();
            if (jc.contains("catalog_id") && !jc["catalog_id"].is_null()) c.catalog_id = jc["catalog_id"].get<std::string>();
            c.checksum = jc.at("checksum").get<std::string>();
            c.width = jc.at("width").get<int>();
            c.height = jc.at("height").get<int>();
            cards.push_back(std::move(c));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parse, "malformed card registry " + path.string() + ": " + e.what());
    }
    return cards;
}

void save_cards(const std::filesystem::path& project_dir, const std::vector<InstanceCard>& cards) {
    ojson arr = ojson::array();
    for (const InstanceCard& c : cards) {
        ojson jc;
        jc["card_id"] = c.card_id;
        jc["detection_id"] = c.detection_id;
        jc["page_no"] = c.page_no;
        jc["dpi"] = c.dpi;
        jc["source_file"] = c.source_file;
        jc["file"] = c.file;
        jc["width"] = c.width;
        jc["height"] = c.height;
        jc["checksum"] = c.checksum;
        jc["labels"] = labels_json(c.labels);
        if (c.original_labels) jc["original_labels"] = labels_json(*c.original_labels);
        jc["canonical"] = c.canonical;
        jc["catalog_id"] = c.catalog_id ? ojson(*c.catalog_id) : ojson(nullptr);
        arr.push_back(std::move(jc));
    }
    ojson root;
    root["schema"] = 1;
    root["cards"] = std::move(arr);
    write_file_atomic(workspace::cards_registry_path(project_dir), root.dump(2) + "\n");
}

std::vector<InstanceCard> extract_cards(const Project& project, const ExtractOptions& options) {
    if (options.padding < 0) throw Error(ErrorCode::invalid_input, "padding must be >= 0");
    const auto lock = workspace::path_lock(project.dir, "cards");
    std::lock_guard guard(*lock);
    const PredictionFile predictions = DetectionStore(project.dir).snapshot();

    std::set<int> pages;
    if (options.pages.empty()) {
        for (const PageImage& p : project.pages) pages.insert(p.page_no);
    } else {
        for (int p : options.pages) {
            project.page(p);
            pages.insert(p);
        }
    }

    struct Job {
        const Detection* det;
        const PageImage* page;
        std::string card_id;
    };
    std::vector<Job> jobs;
    for (int page_no : pages) {
        const DetectionSet* set = predictions.find(page_no);
        if (set == nullptr) continue;
        int index = 0;
        for (const Detection& d : set->detections) {
            if (!is_accepted(d.review)) continue;
            jobs.push_back({&d, &project.page(page_no), card_id_for(page_no, ++index)});
        }
    }

    // Group jobs per page so each page is decoded once.
    std::map<int, std::vector<std::size_t>> by_page;
    for (std::size_t i = 0; i < jobs.size(); ++i) by_page[jobs[i].page->page_no].push_back(i);
    std::vector<int> page_order;
    for (const auto& [p, _] : by_page) page_order.push_back(p);

    std::vector<InstanceCard> made(jobs.size());
    std::atomic<std::size_t> done{0};
    parallel_for(page_order.size(), options.workers, [&](std::size_t pi) {
        const int page_no = page_order[pi];
        const PageImage& page = project.page(page_no);
        const auto page_path = project.dir / page.file;
        if (!std::filesystem::exists(page_path)) {
            throw Error(ErrorCode::extraction, "page " + std::to_string(page_no) + ": missing page file " + page.file);
        }
        RasterImage image;
        try {
            image = read_png(page_path);
        } catch (const Error& e) {
            throw Error(ErrorCode::extraction, "page " + std::to_string(page_no) + ": " + e.what());
        }
        for (std::size_t ji : by_page[page_no]) {
            const Job& job = jobs[ji];
            const BinaryMask mask = rasterize_polygon(job.det->polygon, image.width(), image.height());
            if (!mask.any()) {
                throw Error(ErrorCode::extraction,
                            "detection " + job.det->id + " covers no pixel centers on page " + std::to_string(page_no));
            }
            const RasterImage crop = crop_with_alpha(image, mask, options.padding);
            const Bytes png = encode_png(crop);
            InstanceCard card;
            card.card_id = job.card_id;
            card.detection_id = job.det->id;
            card.page_no = page_no;
            card.dpi = page.dpi;
            card.source_file = "cards/" + job.card_id + ".png";
            card.file = card.source_file;
            card.width = crop.width();
            card.height = crop.height();
            card.checksum = sha256_hex(png);
            write_file_atomic(project.dir / card.source_file, png);
            made[ji] = std::move(card);
            if (options.progress) options.progress(static_cast<double>(++done) / static_cast<double>(jobs.size()));
        }
    });

    // Replace registry entries (and stale files) of the extracted pages.
    std::vector<InstanceCard> registry = load_cards(project.dir);
    std::set<std::string> fresh_ids;
    for (const InstanceCard& c : made) fresh_ids.insert(c.card_id);
    std::vector<InstanceCard> merged;
    for (InstanceCard& c : registry) {
        if (pages.count(c.page_no) == 0) {
            merged.push_back(std::move(c));
            continue;
        }
        if (fresh_ids.count(c.card_id) == 0) {
            std::filesystem::remove(project.dir / c.source_file);
            std::filesystem::remove(project.dir / canonical_file(c.card_id));
        } else {
            std::filesystem::remove(project.dir / canonical_file(c.card_id));
        }
    }
    for (const InstanceCard& c : made) merged.push_back(c);
    std::sort(merged.begin(), merged.end(), [](const InstanceCard& a, const InstanceCard& b) { return a.card_id < b.card_id; });
    save_cards(project.dir, merged);
    return made;
}

std::vector<InstanceCard> canonicalize_cards(const Project& project, double threshold) {
    const auto lock = workspace::path_lock(project.dir, "cards");
    std::lock_guard guard(*lock);
    PredictionFile predictions = DetectionStore(project.dir).snapshot();
    std::vector<InstanceCard> cards = load_cards(project.dir);
    for (InstanceCard& c : cards) {
        HeadPrediction pred;
        auto [set, det] = predictions.find_detection(c.detection_id);
        if (det != nullptr && det->heads) pred = *det->heads;
        const RasterImage source = read_png(project.dir / c.source_file);
        CanonicalResult r = canonicalize(source, pred, threshold);
        c.file = canonical_file(c.card_id);
        write_png(project.dir / c.file, r.image);
        c.labels = r.labels;
        c.original_labels = r.original;
        c.canonical = true;
        c.width = r.image.width();
        c.height = r.image.height();
    }
    save_cards(project.dir, cards);
    return cards;
}

std::size_t export_augmentations(const Project& project, const std::filesystem::path& out_dir, bool flips_only) {
    const std::vector<InstanceCard> cards = load_cards(project.dir);
    std::string csv = "card_id,variant,type,position,rotation,rotated,file\n";
    std::size_t written = 0;
    for (const InstanceCard& c : cards) {
        const RasterImage image = read_png(project.dir / c.file);
        for (const OrientationVariant& v : augment_orientations(image, c.labels, flips_only)) {
            const std::string rel = c.card_id + "/" + v.name() + ".png";
            write_png(out_dir / rel, v.image);
            csv += c.card_id + "," + v.name() + "," + to_string(v.labels.type) + "," + to_string(v.labels.position) + "," +
                   to_string(v.labels.rotation) + "," + (v.rotated ? "1" : "0") + "," + rel + "\n";
            ++written;
        }
    }
    write_file_atomic(out_dir / "labels.csv", csv);
    return written;
}

const std::string* CatalogRecord::field(const std::string& column) const {
    for (const auto& [k, v] : fields) {
        if (k == column) return &v;
    }
    return nullptr;
}

const CatalogRecord* Catalog::find(const std::string& card_id) const {
    for (const CatalogRecord& r : records) {
        if (r.card_id == card_id) return &r;
    }
    return nullptr;
}

CatalogRecord& Catalog::upsert(const std::string& card_id, const std::vector<std::pair<std::string, std::string>>& fields) {
    for (const auto& [k, _] : fields) {
        if (k == "catalog_id" || k == "card_id" || k.empty()) {
            throw Error(ErrorCode::invalid_input, "column name '" + k + "' is reserved or empty");
        }
        if (std::find(columns.begin(), columns.end(), k) == columns.end()) {
            columns.push_back(k);
            for (CatalogRecord& r : records) r.fields.emplace_back(k, "");
        }
    }
    auto it = std::find_if(records.begin(), records.end(), [&](const CatalogRecord& r) { return r.card_id == card_id; });
    if (it == records.end()) {
        CatalogRecord rec;
        rec.catalog_id = next_catalog_id(*this);
        rec.card_id = card_id;
        for (const std::string& col : columns) rec.fields.emplace_back(col, "");
        const auto at = std::lower_bound(records.begin(), records.end(), card_id,
                                         [](const CatalogRecord& r, const std::string& id) { return r.card_id < id; });
        it = records.insert(at, std::move(rec));
    }
    for (const auto& [k, v] : fields) {
        for (auto& [col, value] : it->fields) {
            if (col == k) value = v;
        }
    }
    return *it;
}

std::string to_csv(const Catalog& catalog) {
    std::string out = "catalog_id,card_id";
    for (const std::string& c : catalog.columns) out += "," + csv_field(c);
    out += "\r\n";
    std::vector<const CatalogRecord*> rows;
    for (const CatalogRecord& r : catalog.records) rows.push_back(&r);
    std::stable_sort(rows.begin(), rows.end(), [](const CatalogRecord* a, const CatalogRecord* b) { return a->card_id < b->card_id; });
    for (const CatalogRecord* r : rows) {
        out += csv_field(r->catalog_id) + "," + csv_field(r->card_id);
        for (const std::string& c : catalog.columns) {
            const std::string* v = r->field(c);
            out += "," + csv_field(v != nullptr ? *v : std::string());
        }
        out += "\r\n";
    }
    return out;
}

Catalog parse_catalog_csv(const std::string& text) {
    std::string body = text;
    if (body.rfind("\xEF\xBB\xBF", 0) == 0) body = body.substr(3);
    const auto rows = parse_csv_rows(body);
    if (rows.empty()) throw Error(ErrorCode::parse, "catalog line 1: missing header row");
    const auto& header = rows[0];
    if (header.size() < 2 || header[0] != "catalog_id" || header[1] != "card_id") {
        throw Error(ErrorCode::parse, "catalog line 1: header must start with catalog_id,card_id");
    }
    Catalog cat;
    cat.columns.assign(header.begin() + 2, header.end());
    std::set<std::string> seen_cols(cat.columns.begin(), cat.columns.end());
    if (seen_cols.size() != cat.columns.size()) throw Error(ErrorCode::parse, "catalog line 1: duplicate column");
    std::set<std::string> seen_cards;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.size() != header.size()) {
            throw Error(ErrorCode::parse, "catalog row " + std::to_string(i + 1) + ": expected " +
                                              std::to_string(header.size()) + " fields, got " + std::to_string(row.size()));
        }
        CatalogRecord rec;
        rec.catalog_id = row[0];
        rec.card_id = row[1];
        if (!seen_cards.insert(rec.card_id).second) {
            throw Error(ErrorCode::parse, "catalog row " + std::to_string(i + 1) + ": duplicate card_id " + rec.card_id);
        }
        for (std::size_t c = 0; c < cat.columns.size(); ++c) rec.fields.emplace_back(cat.columns[c], row[c + 2]);
        cat.records.push_back(std::move(rec));
    }
    std::stable_sort(cat.records.begin(), cat.records.end(),
                     [](const CatalogRecord& a, const CatalogRecord& b) { return a.card_id < b.card_id; });
    return cat;
}

Catalog load_catalog(const std::filesystem::path& project_dir) {
    const auto path = workspace::catalog_path(project_dir);
    if (!std::filesystem::exists(path)) {
        Catalog cat;
        cat.columns = default_catalog_columns;
        return cat;
    }
    return parse_catalog_csv(read_text(path));
}

void save_catalog(const std::filesystem::path& project_dir, const Catalog& catalog) {
    write_file_atomic(workspace::catalog_path(project_dir), to_csv(catalog));
}

CatalogRecord upsert_record(const std::filesystem::path& project_dir, const std::string& card_id,
                            const std::vector<std::pair<std::string, std::string>>& fields) {
    const auto lock = workspace::path_lock(project_dir, "catalog");
    std::lock_guard guard(*lock);
    const std::vector<InstanceCard> cards = load_cards(project_dir);
    if (std::none_of(cards.begin(), cards.end(), [&](const InstanceCard& c) { return c.card_id == card_id; })) {
        throw Error(ErrorCode::not_found, "card " + card_id + " not found");
    }
    Catalog cat = load_catalog(project_dir);
    CatalogRecord rec = cat.upsert(card_id, fields);
    save_catalog(project_dir, cat);
    return rec;
}

Catalog sync_catalog(const std::filesystem::path& project_dir) {
    const auto lock = workspace::path_lock(project_dir, "catalog");
    std::lock_guard guard(*lock);
    const auto cards_lock = workspace::path_lock(project_dir, "cards");
    std::lock_guard cards_guard(*cards_lock);
    std::vector<InstanceCard> cards = load_cards(project_dir);
    Catalog cat = load_catalog(project_dir);
    std::set<std::string> ids;
    for (const InstanceCard& c : cards) ids.insert(c.card_id);
    cat.records.erase(std::remove_if(cat.records.begin(), cat.records.end(),
                                     [&](const CatalogRecord& r) { return ids.count(r.card_id) == 0; }),
                      cat.records.end());
    for (InstanceCard& c : cards) {
        if (cat.find(c.card_id) == nullptr) {
            const bool has_page = std::find(cat.columns.begin(), cat.columns.end(), "page") != cat.columns.end();
            cat.upsert(c.card_id, has_page ? std::vector<std::pair<std::string, std::string>>{{"page", std::to_string(c.page_no)}}
                                           : std::vector<std::pair<std::string, std::string>>{});
        }
        c.catalog_id = cat.find(c.card_id)->catalog_id;
    }
    save_catalog(project_dir, cat);
    save_cards(project_dir, cards);
    return cat;
}

} // namespace lens
