/**
 * @file ingest.hpp
 * @brief Source documents (PDF or page-image directories) to project workspaces.
 */
#pragma once

#include "lens/imagecore.hpp"
#include "lens/render.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace lens {

namespace fs = std::filesystem;

enum class SourceKind { pdf, image_dir };

struct PageImage {
    int page_no = 0;
    int width = 0;
    int height = 0;
    int dpi = 0;
    /// Path relative to the project directory.
    std::string file;
    /// Lowercase hex SHA-256 of the file bytes.
    std::string checksum;
};

struct Project {
    std::string id;
    fs::path source_path;
    SourceKind source_kind = SourceKind::pdf;
    int dpi = 300;
    std::vector<PageImage> pages;
    std::string created_at;
    /// Project directory; not serialized.
    fs::path dir;

    /// Throws not_found for an unknown page number.
    const PageImage& page(int page_no) const;
    fs::path page_path(int page_no) const { return dir / page(page_no).file; }
};

inline constexpr int default_dpi = 300;
inline constexpr int min_dpi = 72;
inline constexpr int max_dpi = 1200;

struct IngestOptions {
    int dpi = default_dpi;
    /// Manifest timestamp; empty means the current UTC time.
    std::string created_at;
    /// PDF renderer; null selects the builtin one.
    const PageRenderer* renderer = nullptr;
    /// Rendering threads; 0 picks the hardware concurrency.
    int workers = 0;
    /// Fraction of pages done, called from worker threads.
    std::function<void(double)> progress;
    /// Receives one message per skipped input file.
    std::function<void(const std::string&)> warn;
    /// Replace an existing project instead of failing with a conflict error.
    bool overwrite = false;
};

/**
 * Renders every page of @p pdf into @p project_dir/pages and writes the manifest.
 * Throws invalid_input for dpi outside [72, 1200], ingest errors naming the
 * failing page, and empty_document for a PDF without pages.
 */
Project ingest_pdf(const fs::path& pdf, const fs::path& project_dir, const std::string& id,
                   const IngestOptions& options = {});

/**
 * Imports PNG and JPEG files in lexicographic filename order; other files are
 * skipped with a warning. Pages are stored as PNG. Throws empty_document when
 * no usable image remains.
 */
Project ingest_images(const fs::path& dir, const fs::path& project_dir, const std::string& id,
                      const IngestOptions& options = {});

/// Dispatches on whether @p source is a directory or a file.
Project ingest_source(const fs::path& source, const fs::path& project_dir, const std::string& id,
                      const IngestOptions& options = {});

/// Reads manifest.json. Throws not_found when absent and parse errors for malformed manifests.
Project load_project(const fs::path& project_dir);

/// Writes manifest.json atomically with a stable key order.
void save_manifest(const Project& project);

struct ValidationIssue {
    enum class Kind { missing_file, checksum_mismatch, dimension_mismatch, numbering_gap };
    Kind kind = Kind::missing_file;
    int page_no = 0;
    std::string detail;
};

std::string to_string(ValidationIssue::Kind kind);

/// Empty iff every page file exists, matches its checksum and dimensions, and numbering is 1..N.
std::vector<ValidationIssue> validate_project(const Project& project);

} // namespace lens
