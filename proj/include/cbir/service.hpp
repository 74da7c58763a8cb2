#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <json.hpp>

#include "cbir/corpus.hpp"
#include "cbir/evaluation.hpp"
#include "cbir/index.hpp"

namespace httplib {
class Server;
}

namespace cbir {

struct ServiceConfig {
    // Where freshly built indexes are saved; empty keeps them in memory only.
    std::filesystem::path index_path;
    // Directory the index was built from. When set, image files are looked up
    // as corpus_root/<id> instead of the path stored in the index.
    std::filesystem::path corpus_root;
    int thumbnail_size = 256;
    BuildOptions build;
};

// Query parameters shared by the JSON and multipart request forms.
struct QueryRequest {
    std::optional<std::string> image_id;
    std::optional<std::string> image_bytes;
    std::optional<CropRect> crop;
    TechniqueSet techniques = TechniqueSet::all();
    nlohmann::json threshold_overrides = nlohmann::json::object();
    std::optional<std::size_t> limit;
};

// HTTP facade over an immutable index snapshot. Queries run against whatever
// snapshot was installed when they started; builds swap in a new one.
class Service {
public:
    explicit Service(ServiceConfig config, std::shared_ptr<const FeatureIndex> index = nullptr);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    std::shared_ptr<const FeatureIndex> snapshot() const;
    void install(std::shared_ptr<const FeatureIndex> index);

    // Binds to host:port (port 0 picks a free port). Returns the bound port or -1.
    int bind(const std::string& host, int port);
    // Serves until stop(); returns false if the listener failed.
    bool run();
    void stop();

    // Endpoint logic, callable without a socket. Each returns (status, body).
    struct Reply {
        int status = 200;
        nlohmann::json body;
    };
    Reply techniques() const;
    Reply status() const;
    Reply images() const;
    Reply query(const QueryRequest& request) const;
    Reply evaluate(const nlohmann::json& request) const;
    Reply build(const nlohmann::json& request);

    // Waits for a running background build, if any.
    void wait_for_build();

private:
    void register_routes();
    std::filesystem::path resolve(const ImageRecord& rec) const;

    ServiceConfig config_;
    std::unique_ptr<httplib::Server> http_;

    mutable std::mutex index_mutex_;
    std::shared_ptr<const FeatureIndex> index_;

    mutable std::mutex build_mutex_;
    std::atomic<bool> building_{false};
    std::thread builder_;
    nlohmann::json last_build_;
    std::string build_error_;
};

}  // namespace cbir
