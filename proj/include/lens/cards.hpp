/**
 * @file cards.hpp
 * @brief Per-vessel card images, orientation canonicalization, augmentation and the catalog.
 */
#pragma once

#include "lens/detect.hpp"
#include "lens/imagecore.hpp"
#include "lens/ingest.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lens {

enum class TypeLabel { ENT, FRAG };
enum class PositionLabel { TOP, BOTTOM };
enum class RotationLabel { LEFT, RIGHT };

struct CardLabels {
    TypeLabel type = TypeLabel::ENT;
    PositionLabel position = PositionLabel::TOP;
    RotationLabel rotation = RotationLabel::LEFT;

    friend bool operator==(const CardLabels&, const CardLabels&) = default;
};

std::string to_string(TypeLabel t);
std::string to_string(PositionLabel p);
std::string to_string(RotationLabel r);
/// "ENT-TOP-LEFT" style name.
std::string to_string(const CardLabels& l);

inline constexpr double default_head_threshold = 0.5;

/// Scores at or above @p threshold map to FRAG, BOTTOM and RIGHT.
CardLabels decide_labels(const HeadPrediction& pred, double threshold = default_head_threshold);

struct CanonicalResult {
    RasterImage image;
    /// Always position TOP and rotation LEFT.
    CardLabels labels;
    /// Labels decided from the prediction before flipping.
    CardLabels original;
    bool flipped_vertical = false;
    bool flipped_horizontal = false;
};

/// Flips vertically for BOTTOM and horizontally for RIGHT; the type label has no geometric effect.
CanonicalResult canonicalize(const RasterImage& card, const HeadPrediction& pred,
                             double threshold = default_head_threshold);

/// Rotates 90 degrees clockwise: pixel (x,y) of a W x H image goes to (H-1-y, x).
RasterImage rotate90(const RasterImage& image);

/**
 * One orientation variant: rotate 90 degrees clockwise when @c rotated, then
 * flip. Labels follow the flips (vertical -> BOTTOM, horizontal -> RIGHT).
 */
struct OrientationVariant {
    bool rotated = false;
    bool vertical = false;
    bool horizontal = false;
    RasterImage image;
    CardLabels labels;

    /// e.g. "FRAG-TOP-RIGHT" or "FRAG-TOP-RIGHT-R90".
    std::string name() const;
};

/// Applies the variant's transform to an arbitrary image.
RasterImage apply_orientation(const RasterImage& image, bool rotated, bool vertical, bool horizontal);

/**
 * The 8 elements of the dihedral group D4 acting on a canonical card, identity
 * first; with @p flips_only only the 4 unrotated flip members are returned.
 */
std::vector<OrientationVariant> augment_orientations(const RasterImage& card, const CardLabels& labels,
                                                     bool flips_only = false);

struct InstanceCard {
    std::string card_id;
    std::string detection_id;
    int page_no = 0;
    /// Resolution of the source page, used for true-scale printing.
    int dpi = 0;
    /// Extracted image relative to the project directory.
    std::string source_file;
    /// Image to use downstream: the canonical one when canonical, else source_file.
    std::string file;
    CardLabels labels;
    std::optional<CardLabels> original_labels;
    bool canonical = false;
    std::optional<std::string> catalog_id;
    std::string checksum;
    int width = 0;
    int height = 0;
};

/// "page0003_det07"
std::string card_id_for(int page_no, int index);

std::vector<InstanceCard> load_cards(const std::filesystem::path& project_dir);
void save_cards(const std::filesystem::path& project_dir, const std::vector<InstanceCard>& cards);

struct ExtractOptions {
    int padding = 0;
    /// Restrict to these pages; empty means all.
    std::vector<int> pages;
    int workers = 0;
    std::function<void(double)> progress;
};

/**
 * Writes one RGBA card per accepted or edited detection to
 * cards/page{NNNN}_det{MM}.png, numbering accepted detections per page in
 * stored order, and replaces the registry for the extracted pages.
 * Throws extraction errors for missing or unreadable pages.
 */
std::vector<InstanceCard> extract_cards(const Project& project, const ExtractOptions& options = {});

/**
 * Canonicalizes every registered card from its extracted image using the
 * detection's head prediction (missing predictions count as all zeros) and
 * writes cards/canonical/<card_id>.png.
 */
std::vector<InstanceCard> canonicalize_cards(const Project& project, double threshold = default_head_threshold);

/// Writes all orientation variants of every card under @p out_dir plus labels.csv.
std::size_t export_augmentations(const Project& project, const std::filesystem::path& out_dir, bool flips_only = false);

struct CatalogRecord {
    std::string catalog_id;
    std::string card_id;
    /// Column -> value in catalog column order.
    std::vector<std::pair<std::string, std::string>> fields;

    const std::string* field(const std::string& column) const;
};

/// Ordered columns after catalog_id and card_id; rows ordered by card_id.
struct Catalog {
    std::vector<std::string> columns;
    std::vector<CatalogRecord> records;

    const CatalogRecord* find(const std::string& card_id) const;
    /// Merges @p fields into the row for @p card_id, adding new columns and back-filling empty strings.
    CatalogRecord& upsert(const std::string& card_id, const std::vector<std::pair<std::string, std::string>>& fields);
};

inline const std::vector<std::string> default_catalog_columns{"page", "grave", "plate", "inventory"};

/// RFC 4180 with CRLF record separators and a mandatory header row.
std::string to_csv(const Catalog& catalog);
/// Accepts CRLF or LF. Throws parse errors with the line number.
Catalog parse_catalog_csv(const std::string& text);

Catalog load_catalog(const std::filesystem::path& project_dir);
void save_catalog(const std::filesystem::path& project_dir, const Catalog& catalog);

/// Throws not_found when @p card_id is not a registered card.
CatalogRecord upsert_record(const std::filesystem::path& project_dir, const std::string& card_id,
                            const std::vector<std::pair<std::string, std::string>>& fields);

/**
 * Ensures exactly one row per registered card (new rows get the page number),
 * drops rows of cards that no longer exist, writes catalog.csv and links
 * catalog ids into the card registry.
 */
Catalog sync_catalog(const std::filesystem::path& project_dir);

} // namespace lens
