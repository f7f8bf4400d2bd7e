/**
 * @file workspace.hpp
 * @brief On-disk layout of a project directory.
 *
 * @code
 * <root>/<id>/manifest.json
 *            /pages/0001.png ...
 *            /detections/predictions.json
 *            /cards/page0001_det01.png ... cards.json, canonical/
 *            /catalog.csv
 *            /exports/
 * @endcode
 */
#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>

namespace lens::workspace {

namespace fs = std::filesystem;

/// Throws invalid_input unless @p id is a slug: [A-Za-z0-9][A-Za-z0-9._-]{0,63}.
void validate_project_id(const std::string& id);

/// root / id, after validating the id.
fs::path project_dir(const fs::path& root, const std::string& id);

inline fs::path manifest_path(const fs::path& dir) { return dir / "manifest.json"; }
inline fs::path pages_dir(const fs::path& dir) { return dir / "pages"; }
inline fs::path detections_path(const fs::path& dir) { return dir / "detections" / "predictions.json"; }
inline fs::path cards_dir(const fs::path& dir) { return dir / "cards"; }
inline fs::path cards_registry_path(const fs::path& dir) { return dir / "cards" / "cards.json"; }
inline fs::path catalog_path(const fs::path& dir) { return dir / "catalog.csv"; }
inline fs::path exports_dir(const fs::path& dir) { return dir / "exports"; }

/// Relative page file name, e.g. "pages/0007.png".
std::string page_file_name(int page_no);

/**
 * Process-wide mutex for a file or directory, shared by every caller that
 * names the same canonical path with the same @p purpose.
 */
std::shared_ptr<std::mutex> path_lock(const fs::path& path, const std::string& purpose);

/// Current UTC time as "YYYY-MM-DDTHH:MM:SSZ".
std::string utc_timestamp();

} // namespace lens::workspace
