// SPDX-License-Identifier: Apache-2.0
#include "lumen/service.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <functional>
#include <future>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "lumen/dataset.hpp"

namespace lumen::inline LUMEN_ABI {

using nlohmann::json;

namespace {

const json* member(const json& obj, const char* key) {
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw std::invalid_argument(where + " must be an object");
    for (const auto& [k, v] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || k == a;
        if (!ok) throw std::invalid_argument("unknown field " + (where.empty() ? k : where + "." + k));
    }
}

Real number(const json& v, const std::string& field) {
    if (!v.is_number()) throw std::invalid_argument(field + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw OverrideError(field, "must be finite");
    return Real(d);
}

int integer(const json& v, const std::string& field) {
    if (!v.is_number_integer()) throw std::invalid_argument(field + " must be an integer");
    return v.get<int>();
}

Vec3 vec3(const json& v, const std::string& field) {
    if (!v.is_array() || v.size() != 3) throw std::invalid_argument(field + " must be an array of 3 numbers");
    return Vec3(number(v[0], field), number(v[1], field), number(v[2], field));
}

HttpResponse json_response(int status, const json& body) {
    HttpResponse r;
    r.status = status;
    r.body = body.dump() + "\n";
    return r;
}

HttpResponse error_response(int status, const std::string& message, const std::string& field = "") {
    json j{{"error", message}};
    if (!field.empty()) j["field"] = field;
    return json_response(status, j);
}

}  // namespace

RenderRequest parse_render_request(const std::string& body, const ServiceOptions& options) {
    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed JSON: ") + e.what());
    }
    check_keys(doc, "", {"camera", "light", "material", "output"});
    RenderRequest req;

    int width = 256, height = 256;
    if (const json* out = member(doc, "output")) {
        check_keys(*out, "output", {"width", "height", "buffer"});
        if (const json* w = member(*out, "width")) width = integer(*w, "output.width");
        if (const json* h = member(*out, "height")) height = integer(*h, "output.height");
        if (const json* b = member(*out, "buffer")) {
            if (!b->is_string()) throw std::invalid_argument("output.buffer must be a string");
            req.buffer = b->get<std::string>();
        }
    }
    if (width < 16 || width > options.max_width)
        throw OverrideError("output.width", "must be in [16, " + std::to_string(options.max_width) + "]");
    if (height < 16 || height > options.max_height)
        throw OverrideError("output.height", "must be in [16, " + std::to_string(options.max_height) + "]");
    const auto& names = buffer_names();
    if (std::find(names.begin(), names.end(), req.buffer) == names.end())
        throw OverrideError("output.buffer", "unknown buffer '" + req.buffer + "'");

    const json* cam = member(doc, "camera");
    if (!cam) throw std::invalid_argument("missing field camera");
    check_keys(*cam, "camera", {"rotation", "translation", "fx", "fy", "cx", "cy", "fov_deg"});
    Camera& c = req.camera;
    c.width = width;
    c.height = height;
    const json* rot = member(*cam, "rotation");
    const json* tr = member(*cam, "translation");
    if (!rot) throw std::invalid_argument("missing field camera.rotation");
    if (!tr) throw std::invalid_argument("missing field camera.translation");
    if (!rot->is_array() || rot->size() != 9) throw std::invalid_argument("camera.rotation must have 9 numbers");
    for (int i = 0; i < 9; ++i) c.rotation(i / 3, i % 3) = number((*rot)[static_cast<std::size_t>(i)], "camera.rotation");
    c.translation = vec3(*tr, "camera.translation");
    Real fov = 100;
    if (const json* f = member(*cam, "fov_deg")) {
        fov = number(*f, "camera.fov_deg");
        if (!(fov > 0 && fov < 170)) throw OverrideError("camera.fov_deg", "must be in (0, 170)");
    }
    c.fx = c.fy = Real(0.5 * width / std::tan(0.5 * double(fov) * kPi / 180));
    c.cx = Real(0.5 * width);
    c.cy = Real(0.5 * height);
    if (!member(*cam, "fov_deg")) {
        if (const json* v = member(*cam, "fx")) c.fx = number(*v, "camera.fx");
        if (const json* v = member(*cam, "fy")) c.fy = number(*v, "camera.fy");
    }
    if (const json* v = member(*cam, "cx")) c.cx = number(*v, "camera.cx");
    if (const json* v = member(*cam, "cy")) c.cy = number(*v, "camera.cy");
    if (!(c.fx > 0)) throw OverrideError("camera.fx", "must be positive");
    if (!(c.fy > 0)) throw OverrideError("camera.fy", "must be positive");
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw OverrideError("camera", e.what());
    }

    RelightOverrides& o = req.overrides;
    if (const json* light = member(doc, "light")) {
        check_keys(*light, "light",
                   {"decouple", "direction", "offset", "intensity_scale", "spot_inner", "spot_outer", "atten_scale"});
        bool decouple = false;
        if (const json* d = member(*light, "decouple")) {
            if (!d->is_boolean()) throw std::invalid_argument("light.decouple must be a boolean");
            decouple = d->get<bool>();
        }
        if (decouple) {
            const json* dir = member(*light, "direction");
            if (!dir) throw OverrideError("light.direction", "required when light.decouple is true");
            o.light_direction = vec3(*dir, "light.direction");
        }
        if (const json* v = member(*light, "offset")) o.light_offset = vec3(*v, "light.offset");
        if (const json* v = member(*light, "intensity_scale")) o.intensity_scale = number(*v, "light.intensity_scale");
        if (const json* v = member(*light, "spot_inner")) o.spot_inner = number(*v, "light.spot_inner");
        if (const json* v = member(*light, "spot_outer")) o.spot_outer = number(*v, "light.spot_outer");
        if (const json* v = member(*light, "atten_scale")) o.atten_scale = number(*v, "light.atten_scale");
    }
    if (const json* mat = member(doc, "material")) {
        check_keys(*mat, "material", {"roughness_scale", "albedo_tint"});
        if (const json* v = member(*mat, "roughness_scale")) o.roughness_scale = number(*v, "material.roughness_scale");
        if (const json* v = member(*mat, "albedo_tint")) o.albedo_tint = vec3(*v, "material.albedo_tint");
    }
    try {
        o.validate();
    } catch (const OverrideError& e) {
        const std::string section =
            e.field == "roughness_scale" || e.field == "albedo_tint" ? "material." : "light.";
        throw OverrideError(section + e.field, e.detail);
    }
    return req;
}

struct RelightService::Worker {
    std::size_t depth;
    std::mutex mutex;
    std::condition_variable cv;
    std::deque<std::function<void()>> jobs;
    bool paused = false;
    bool stopping = false;
    std::thread thread;

    explicit Worker(std::size_t d) : depth(d), thread([this] { run(); }) {}

    ~Worker() {
        {
            std::lock_guard lock(mutex);
            stopping = true;
            paused = false;
        }
        cv.notify_all();
        thread.join();
    }

    bool submit(std::function<void()> job) {
        {
            std::lock_guard lock(mutex);
            if (jobs.size() >= depth) return false;
            jobs.push_back(std::move(job));
        }
        cv.notify_all();
        return true;
    }

    void run() {
        while (true) {
            std::function<void()> job;
            {
                std::unique_lock lock(mutex);
                cv.wait(lock, [&] { return stopping || (!paused && !jobs.empty()); });
                if (jobs.empty() && stopping) return;
                job = std::move(jobs.front());
                jobs.pop_front();
            }
            job();
        }
    }
};

struct RelightService::Http {
    httplib::Server server;
    std::thread thread;
    int port = 0;
};

RelightService::RelightService(std::shared_ptr<const SceneModel> scene, ServiceOptions options)
    : options_(options), scene_(std::move(scene)), worker_(std::make_unique<Worker>(options.queue_depth)) {
    if (!scene_) throw std::invalid_argument("service needs a scene");
    scene_->validate();
}

RelightService::~RelightService() {
    stop();
    worker_.reset();
}

std::shared_ptr<const SceneModel> RelightService::snapshot() const {
    std::lock_guard lock(scene_mutex_);
    return scene_;
}

void RelightService::begin_swap() { swapping_ = true; }

void RelightService::complete_swap(std::shared_ptr<const SceneModel> scene) {
    if (!scene) throw std::invalid_argument("swap needs a scene");
    scene->validate();
    {
        std::lock_guard lock(scene_mutex_);
        scene_ = std::move(scene);
    }
    swapping_ = false;
}

void RelightService::swap_scene(std::shared_ptr<const SceneModel> scene) {
    begin_swap();
    complete_swap(std::move(scene));
}

void RelightService::pause_worker(bool paused) {
    {
        std::lock_guard lock(worker_->mutex);
        worker_->paused = paused;
    }
    worker_->cv.notify_all();
}

std::size_t RelightService::queued() const {
    std::lock_guard lock(worker_->mutex);
    return worker_->jobs.size();
}

HttpResponse RelightService::handle_render(const std::string& body) {
    if (swapping_) return error_response(503, "scene swap in progress");
    RenderRequest req;
    try {
        req = parse_render_request(body, options_);
    } catch (const OverrideError& e) {
        return error_response(422, e.what(), e.field);
    } catch (const std::invalid_argument& e) {
        return error_response(400, e.what());
    }
    std::shared_ptr<const SceneModel> scene = snapshot();

    auto task = std::make_shared<std::packaged_task<HttpResponse()>>([this, scene, req]() {
        const auto t0 = std::chrono::steady_clock::now();
        RenderOptions options;
        options.raster.threads = options_.render_threads;
        options.decomposition = req.buffer == "albedo" || req.buffer == "diffuse" || req.buffer == "specular";
        HttpResponse r;
        try {
            const RelightSetup setup = apply_overrides(scene, req.overrides, options);
            const RenderOutput out = render_relit(setup, req.camera);
            const auto png = encode_png8(buffer_image(out, req.buffer));
            r.body.assign(png.begin(), png.end());
        } catch (const OverrideError& e) {
            return error_response(422, "light." + e.field + ": " + e.detail, "light." + e.field);
        }
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3f", ms);
        r.content_type = "image/png";
        r.headers["X-Render-Time-Ms"] = buf;
        r.headers["X-Buffer"] = req.buffer;
        return r;
    });
    std::future<HttpResponse> result = task->get_future();
    if (!worker_->submit([task] { (*task)(); })) return error_response(429, "render queue full");
    try {
        return result.get();
    } catch (const std::exception& e) {
        return error_response(500, e.what());
    }
}

HttpResponse RelightService::handle_meta() const {
    const auto scene = snapshot();
    const auto [lo, hi] = scene->bounding_box();
    json j;
    j["splats"] = scene->splats.size();
    j["bounding_box"] = {{"min", {lo.x(), lo.y(), lo.z()}}, {"max", {hi.x(), hi.y(), hi.z()}}};
    j["light"] = json::parse(light_to_json(scene->light));
    j["buffers"] = buffer_names();
    j["hash_grid"] = scene->hash.has_value();
    j["format_version"] = scene->format_version;
    j["max_size"] = {options_.max_width, options_.max_height};
    return json_response(200, j);
}

HttpResponse RelightService::handle_health() const {
    return json_response(200, json{{"status", swapping_ ? "swapping" : "ok"}});
}

namespace {

void send(httplib::Response& res, const HttpResponse& r) {
    res.status = r.status;
    for (const auto& [k, v] : r.headers) res.set_header(k, v);
    res.set_content(r.body, r.content_type);
}

}  // namespace

int RelightService::start(const std::string& host, int port) {
    if (http_) throw std::logic_error("service already started");
    http_ = std::make_unique<Http>();
    auto& srv = http_->server;
    // Enough connection threads for a full render queue plus the one in flight.
    const std::size_t pool = options_.queue_depth + 4;
    srv.new_task_queue = [pool] { return new httplib::ThreadPool(pool); };
    srv.set_payload_max_length(1 << 20);
    srv.Post("/render", [this](const httplib::Request& req, httplib::Response& res) { send(res, handle_render(req.body)); });
    srv.Get("/meta", [this](const httplib::Request&, httplib::Response& res) { send(res, handle_meta()); });
    srv.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) { send(res, handle_health()); });
    const int bound = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
    if (bound < 0) {
        http_.reset();
        throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    }
    http_->port = bound;
    http_->thread = std::thread([this] { http_->server.listen_after_bind(); });
    http_->server.wait_until_ready();
    return bound;
}

void RelightService::listen(const std::string& host, int port) {
    start(host, port);
    wait();
}

void RelightService::wait() {
    if (http_ && http_->thread.joinable()) http_->thread.join();
}

void RelightService::stop() {
    if (!http_) return;
    http_->server.stop();
    if (http_->thread.joinable()) http_->thread.join();
    http_.reset();
}

int RelightService::port() const { return http_ ? http_->port : 0; }

}  // namespace lumen::inline LUMEN_ABI
