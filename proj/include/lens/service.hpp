/**
 * @file service.hpp
 * @brief JSON-over-HTTP facade over the project workflow, with polled background jobs.
 */
#pragma once

#include <json.hpp>

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace lens::service {

enum class JobState { queued, running, done, failed };
std::string to_string(JobState s);

struct Job {
    std::string job_id;
    std::string project;
    /// ingest | detect | extract | report | export
    std::string kind;
    JobState state = JobState::queued;
    double progress = 0.0;
    std::optional<std::string> error;
    std::string error_code;
    nlohmann::json result;
    std::string created_at;
    std::string finished_at;

    bool terminal() const { return state == JobState::done || state == JobState::failed; }
    nlohmann::json to_json() const;
};

/**
 * Runs each job on its own thread. At most one job per project is active;
 * submitting another raises a conflict error. Progress reports are clamped to
 * be non-decreasing and terminal states are never changed again.
 */
class JobManager {
public:
    using Body = std::function<nlohmann::json(const std::function<void(double)>& progress)>;

    JobManager() = default;
    ~JobManager();
    JobManager(const JobManager&) = delete;
    JobManager& operator=(const JobManager&) = delete;

    Job submit(const std::string& project, const std::string& kind, Body body);
    std::optional<Job> get(const std::string& job_id) const;
    /// Blocks until the job is terminal; returns nullopt for an unknown id.
    std::optional<Job> wait(const std::string& job_id) const;

private:
    void run(const std::string& job_id, const Body& body);
    void update(const std::string& job_id, const std::function<void(Job&)>& fn);

    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    std::map<std::string, Job> jobs_;
    std::map<std::string, std::string> active_;
    std::vector<std::thread> threads_;
    std::uint64_t next_id_ = 1;
};

struct ServiceOptions {
    std::filesystem::path root;
    /// Directory served at "/" (the review UI bundle); empty disables it.
    std::filesystem::path static_dir;
};

/** The HTTP routes bound to one project root. */
class Service {
public:
    explicit Service(ServiceOptions options);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds @p host:@p port; port 0 picks a free port. Returns the bound port or -1.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind().
    bool listen();
    void stop();
    /// Blocks until the server accepts connections.
    void wait_until_ready() const;

    JobManager& jobs() { return jobs_; }

private:
    void install_routes();

    ServiceOptions options_;
    std::unique_ptr<httplib::Server> server_;
    JobManager jobs_;
};

/// Splits "host:port" (port required). Throws invalid_input on malformed input.
std::pair<std::string, int> parse_listen(const std::string& listen);

} // namespace lens::service
