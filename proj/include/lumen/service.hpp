// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "lumen/relight.hpp"

namespace lumen::inline LUMEN_ABI {

struct ServiceOptions {
    int max_width = 512;
    int max_height = 512;
    /// Requests waiting for the render worker beyond this get 429.
    std::size_t queue_depth = 8;
    int render_threads = 0;
};

struct HttpResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
    std::map<std::string, std::string> headers;
};

/// A parsed POST /render body.
struct RenderRequest {
    Camera camera;
    RelightOverrides overrides;
    std::string buffer = "rgb";
};

/// Throws OverrideError (field-tagged, 422) for constraint violations and
/// std::invalid_argument (400) for malformed documents.
RenderRequest parse_render_request(const std::string& body, const ServiceOptions& options);

/// Relighting endpoint logic. Renders run on one worker thread against an
/// immutable scene snapshot; the HTTP layer is a thin wrapper around the
/// handle_* methods.
class RelightService {
public:
    RelightService(std::shared_ptr<const SceneModel> scene, ServiceOptions options = {});
    ~RelightService();
    RelightService(const RelightService&) = delete;
    RelightService& operator=(const RelightService&) = delete;

    HttpResponse handle_render(const std::string& body);
    HttpResponse handle_meta() const;
    HttpResponse handle_health() const;

    /// While a swap is in progress render requests get 503.
    void begin_swap();
    void complete_swap(std::shared_ptr<const SceneModel> scene);
    void swap_scene(std::shared_ptr<const SceneModel> scene);
    std::shared_ptr<const SceneModel> snapshot() const;

    /// Holds queued renders (for exercising the queue bound).
    void pause_worker(bool paused);
    std::size_t queued() const;

    /// Blocking HTTP server; port 0 picks a free port (see port()).
    void listen(const std::string& host, int port);
    /// Binds and serves on a background thread; returns the bound port.
    int start(const std::string& host, int port = 0);
    /// Blocks until the server stops.
    void wait();
    void stop();
    int port() const;

    const ServiceOptions& options() const { return options_; }

private:
    struct Worker;
    struct Http;
    ServiceOptions options_;
    mutable std::mutex scene_mutex_;
    std::shared_ptr<const SceneModel> scene_;
    std::atomic<bool> swapping_{false};
    std::unique_ptr<Worker> worker_;
    std::unique_ptr<Http> http_;
};

}  // namespace lumen::inline LUMEN_ABI
