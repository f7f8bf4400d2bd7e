#include "lens/workspace.hpp"

#include "lens/error.hpp"

#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <map>

namespace lens::workspace {

void validate_project_id(const std::string& id) {
    bool ok = !id.empty() && id.size() <= 64 && std::isalnum(static_cast<unsigned char>(id[0])) != 0;
    for (char c : id) {
        const auto u = static_cast<unsigned char>(c);
        ok = ok && (std::isalnum(u) != 0 || c == '.' || c == '_' || c == '-');
    }
    if (!ok) {
        throw Error(ErrorCode::invalid_input,
                    "invalid project id '" + id + "' (letters, digits, '.', '_', '-'; must start alphanumeric)");
    }
}

fs::path project_dir(const fs::path& root, const std::string& id) {
    validate_project_id(id);
    return root / id;
}

std::string page_file_name(int page_no) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "pages/%04d.png", page_no);
    return buf;
}

std::shared_ptr<std::mutex> path_lock(const fs::path& path, const std::string& purpose) {
    static std::mutex registry_mutex;
    static std::map<std::string, std::weak_ptr<std::mutex>> registry;
    const std::string key = purpose + "|" + fs::weakly_canonical(fs::absolute(path)).string();
    std::lock_guard lock(registry_mutex);
    if (auto existing = registry[key].lock()) return existing;
    auto fresh = std::make_shared<std::mutex>();
    registry[key] = fresh;
    return fresh;
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace lens::workspace
