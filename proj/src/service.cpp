#include "clarifier/service.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <thread>

#include "clarifier/assets.hpp"
#include "clarifier/serialize.hpp"
#include "clarifier/text.hpp"

namespace clarifier::service {

namespace fs = std::filesystem;

int http_status(const Error& e) {
    if (e.is_provider_fault()) {
        if (e.code() == ErrorCode::Timeout) return 504;
        if (e.code() == ErrorCode::RateLimited) return 503;
        return 502;
    }
    switch (e.code()) {
        case ErrorCode::NotFound: return 404;
        case ErrorCode::UserAbort: return 409;
        case ErrorCode::DegenerateFinger:
        case ErrorCode::EmptyMask:
        case ErrorCode::NotElongated:
        case ErrorCode::NoEntity: return 422;
        default: return 400;
    }
}

json error_body(const Error& e) {
    return json{{"code", to_string(e.code())}, {"message", e.what()}, {"stage", e.stage()}};
}

// ---------------------------------------------------------------------------
// Overlay

namespace {

std::vector<Point2> ray_polyline(const GroundingResult& g, const CameraIntrinsics& k, double t_end, int samples = 48) {
    std::vector<Point2> out;
    for (int i = 0; i <= samples; ++i) {
        const Point3 p = g.pointing.ray.at(t_end * i / samples);
        if (p.z <= 1e-6) continue;
        const Point2 q = project(p, k);
        // Stop once the ray leaves the frame by a wide margin.
        if (q.u < -k.width || q.v < -k.height || q.u > 2.0 * k.width || q.v > 2.0 * k.height) break;
        out.push_back(q);
    }
    return out;
}

double polyline_end(const GroundingResult& g, const CastConfig& cast) { return g.hit.hit() ? g.hit.t : cast.t_max; }

void plot(RgbImage& im, int x, int y, Rgb c) {
    for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
            if (im.contains(x + dx, y + dy)) im.at(x + dx, y + dy) = c;
        }
    }
}

void segment(RgbImage& im, Point2 a, Point2 b, Rgb c) {
    const double len = std::max(std::abs(b.u - a.u), std::abs(b.v - a.v));
    const int n = std::max(1, static_cast<int>(std::ceil(len)));
    for (int i = 0; i <= n; ++i) {
        const double s = static_cast<double>(i) / n;
        plot(im, static_cast<int>(std::lround(a.u + (b.u - a.u) * s)), static_cast<int>(std::lround(a.v + (b.v - a.v) * s)), c);
    }
}

void rectangle(RgbImage& im, const BBox& b, Rgb c) {
    const Point2 p00{b.x_min, b.y_min}, p10{b.x_max - 1, b.y_min}, p11{b.x_max - 1, b.y_max - 1}, p01{b.x_min, b.y_max - 1};
    segment(im, p00, p10, c);
    segment(im, p10, p11, c);
    segment(im, p11, p01, c);
    segment(im, p01, p00, c);
}

}  // namespace

RgbImage draw_ray_overlay(const RgbImage& image, const GroundingResult& g, const CameraIntrinsics& k) {
    RgbImage out = image;
    const auto line = ray_polyline(g, k, polyline_end(g, CastConfig{}));
    for (std::size_t i = 1; i < line.size(); ++i) segment(out, line[i - 1], line[i], {255, 0, 0});
    if (g.hit.hit()) {
        if (g.context.valid()) rectangle(out, g.context, {0, 128, 255});
        if (g.target.valid()) rectangle(out, g.target, {0, 255, 0});
        const Point2 p = g.hit.pixel;
        for (int r = 2; r <= 4; ++r) {
            rectangle(out, BBox{p.u - r, p.v - r, p.u + r + 1, p.v + r + 1}, {255, 255, 0});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Request decoding

namespace {

struct TempFile {
    fs::path path;
    ~TempFile() {
        std::error_code ec;
        if (!path.empty()) fs::remove(path, ec);
    }
};

fs::path temp_path(std::string_view ext) {
    static std::atomic<unsigned> counter{0};
    return fs::temp_directory_path() /
           ("clarifier-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + std::string(ext));
}

struct Decoder {
    fs::path asset_root;

    fs::path resolve(const std::string& p) const {
        fs::path path = p;
        return path.is_absolute() ? path : asset_root / path;
    }

    std::shared_ptr<const RgbImage> image(const json& body) const {
        if (auto it = body.find("image"); it != body.end() && it->is_string()) {
            return std::make_shared<const RgbImage>(assets::load_image(resolve(it->get<std::string>())));
        }
        if (auto it = body.find("image_b64"); it != body.end()) {
            return std::make_shared<const RgbImage>(assets::decode_image(assets::base64_decode(it->get<std::string>())));
        }
        return nullptr;
    }

    std::optional<HandMask> mask(const json& body) const {
        if (auto it = body.find("mask"); it != body.end() && it->is_string()) {
            return assets::load_mask(resolve(it->get<std::string>()));
        }
        if (auto it = body.find("mask_b64"); it != body.end()) {
            return assets::decode_mask(assets::base64_decode(it->get<std::string>()));
        }
        return std::nullopt;
    }

    std::optional<DepthMap> depth(const json& body) const {
        const DepthScale kind =
            body.value("depth_kind", std::string("metric")) == "relative" ? DepthScale::Relative : DepthScale::Metric;
        std::optional<assets::DepthSidecar> sidecar;
        if (body.contains("depth_scale") || body.contains("depth_offset")) {
            sidecar = assets::DepthSidecar{body.value("depth_scale", 0.001), body.value("depth_offset", 0.0), kind};
        }
        if (auto it = body.find("depth"); it != body.end() && it->is_string()) {
            return assets::load_depth(resolve(it->get<std::string>()), sidecar, kind);
        }
        if (auto it = body.find("depth_b64"); it != body.end()) {
            const auto bytes = assets::base64_decode(it->get<std::string>());
            const bool pfm = bytes.size() > 2 && bytes[0] == 'P' && (bytes[1] == 'f' || bytes[1] == 'F');
            if (!pfm && !sidecar) fail(ErrorCode::InvalidArgument, "16-bit depth uploads need depth_scale/depth_offset");
            TempFile tmp{temp_path(pfm ? ".pfm" : ".png")};
            std::ofstream(tmp.path, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                                             static_cast<std::streamsize>(bytes.size()));
            return assets::load_depth(tmp.path, sidecar, kind);
        }
        return std::nullopt;
    }

    QueryBundle bundle(const json& body) const {
        QueryBundle b;
        b.text = body.value("text", std::string{});
        b.image = image(body);
        if (b.image) {
            b.depth = depth(body);
            b.hand_mask = mask(body);
        }
        if (auto it = body.find("intrinsics"); it != body.end() && !it->is_null()) b.intrinsics = it->get<CameraIntrinsics>();
        b.script_id = body.value("script_id", std::string{});
        b.scene_id = body.value("scene_id", std::string{});
        return b;
    }
};

/// Multipart uploads become the same JSON body a path-based client would
/// send, with file parts inlined as base64.
json body_of(const httplib::Request& req) {
    if (!req.is_multipart_form_data()) {
        if (req.body.empty()) return json::object();
        json j = json::parse(req.body);
        require(j.is_object(), "request body must be a JSON object");
        return j;
    }
    json j = json::object();
    if (req.has_file("request")) {
        j = json::parse(req.get_file_value("request").content);
        require(j.is_object(), "multipart 'request' part must be a JSON object");
    }
    for (const auto& [name, part] : req.files) {
        if (name == "request") continue;
        if (name == "image" || name == "mask" || name == "depth") {
            j[name + "_b64"] = assets::base64_encode(std::vector<std::uint8_t>(part.content.begin(), part.content.end()));
        } else if (part.content_type.empty() || part.content_type.rfind("text/", 0) == 0) {
            try {
                j[name] = json::parse(part.content);
            } catch (const json::exception&) {
                j[name] = part.content;
            }
        }
    }
    return j;
}

std::string now_iso() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

long long now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

}  // namespace

// ---------------------------------------------------------------------------
// Sessions

namespace {

struct Session {
    std::string id;
    std::string created_at;
    std::string script_id;

    std::mutex mu;  // serializes mutation
    std::unique_ptr<PipelineRun> run;
    json finished_trace = json::array();
    json events = json::array();
    long long last_ts = 0;
    int queries = 0;

    // Published after each mutation; readers never take `mu`.
    std::shared_ptr<const json> snapshot = std::make_shared<const json>(json::object());

    json trace() const {
        json t = finished_trace;
        if (run) {
            for (const auto& r : run->outcome().trace) {
                json e = r;
                e["query"] = queries;
                t.push_back(std::move(e));
            }
        }
        return t;
    }

    void publish(const json& last) {
        auto s = std::make_shared<const json>(json{{"id", id},
                                                   {"created_at", created_at},
                                                   {"trace", trace()},
                                                   {"events", events},
                                                   {"awaiting_answer", run && run->awaiting_answer()},
                                                   {"last", last}});
        std::atomic_store(&snapshot, std::shared_ptr<const json>(std::move(s)));
    }

    std::shared_ptr<const json> read() const { return std::atomic_load(&snapshot); }
};

json outcome_json(const Session& s, const PipelineOutcome& o) {
    json j = o;
    j["session_id"] = s.id;
    j["query_index"] = s.queries;
    return j;
}

}  // namespace

struct SessionLogic {
    Providers providers;
    PipelineConfig pipeline;
    Decoder decoder;

    std::shared_ptr<Session> make(const json& body, std::string id) const {
        auto s = std::make_shared<Session>();
        s->id = std::move(id);
        s->created_at = now_iso();
        s->script_id = body.value("script_id", std::string{});
        return s;
    }

    void event(Session& s, std::string type, const json& body) const {
        s.last_ts = std::max(s.last_ts, now_ms());
        s.events.push_back({{"seq", s.events.size()}, {"ts_ms", s.last_ts}, {"type", std::move(type)}, {"body", body}});
    }

    json query(Session& s, const json& body) const {
        QueryBundle b = decoder.bundle(body);
        b.session = s.id;
        if (b.script_id.empty()) b.script_id = s.script_id;
        b.validate();
        event(s, "query", body);
        if (s.run) {
            for (const auto& r : s.run->outcome().trace) {
                json e = r;
                e["query"] = s.queries;
                s.finished_trace.push_back(std::move(e));
            }
        }
        ++s.queries;
        s.run = std::make_unique<PipelineRun>(std::move(b), providers, pipeline);
        const json out = outcome_json(s, s.run->start());
        s.publish(out);
        return out;
    }

    json answer(Session& s, const json& body) const {
        if (!s.run || !s.run->awaiting_answer()) {
            throw Error(ErrorCode::UserAbort, "session '" + s.id + "' has no pending question", "semantic");
        }
        const bool abort = body.value("abort", false);
        std::string text;
        if (!abort) {
            text = body.value("text", std::string{});
            require(!text::trim(text).empty(), "answer text must be non-empty");
        }
        event(s, abort ? "abort" : "answer", body);
        const json out = outcome_json(s, abort ? s.run->abort() : s.run->answer(std::move(text)));
        s.publish(out);
        return out;
    }
};

json replay_session(const json& events, const Providers& providers, const PipelineConfig& cfg,
                    const fs::path& asset_root) {
    SessionLogic logic{providers, cfg, Decoder{asset_root}};
    auto s = logic.make(json::object(), "replay");
    json last = json::object();
    for (const auto& e : events) {
        const std::string type = e.at("type").get<std::string>();
        if (type == "create") {
            s->script_id = e.at("body").value("script_id", std::string{});
        } else if (type == "query") {
            last = logic.query(*s, e.at("body"));
        } else if (type == "answer" || type == "abort") {
            last = logic.answer(*s, e.at("body"));
        }
    }
    return last;
}

// ---------------------------------------------------------------------------
// Server

namespace {

struct CachedResponse {
    std::mutex mu;
    bool done = false;
    int status = 200;
    std::string body;
};

std::string new_session_id() {
    static std::atomic<unsigned> counter{0};
    thread_local std::mt19937_64 rng{std::random_device{}()};
    char buf[40];
    std::snprintf(buf, sizeof buf, "s%04x%012llx", counter++ & 0xffffu,
                  static_cast<unsigned long long>(rng() & 0xffffffffffffULL));
    return buf;
}

}  // namespace

struct Service::Impl {
    ServiceConfig cfg;
    SessionLogic logic;
    httplib::Server server;
    std::thread thread;

    std::mutex sessions_mu;
    std::map<std::string, std::shared_ptr<Session>> sessions;

    std::mutex idem_mu;
    std::map<std::string, std::shared_ptr<CachedResponse>> idem;
    std::deque<std::string> idem_order;

    std::mutex log_mu;
    std::ofstream log;

    Impl(Providers p, ServiceConfig c)
        : cfg(std::move(c)), logic{std::move(p), cfg.pipeline, Decoder{cfg.asset_root}} {
        if (cfg.event_log) {
            log.open(*cfg.event_log, std::ios::app);
            if (!log) fail(ErrorCode::InvalidArgument, "cannot open event log " + cfg.event_log->string());
        }
        routes();
    }

    void write_log(const json& j) {
        if (!log.is_open()) return;
        std::lock_guard lock(log_mu);
        log << j.dump() << "\n";
        log.flush();
    }

    std::shared_ptr<Session> find(const std::string& id) {
        std::lock_guard lock(sessions_mu);
        auto it = sessions.find(id);
        if (it == sessions.end()) throw Error(ErrorCode::NotFound, "no session '" + id + "'");
        return it->second;
    }

    static void reply(httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    /// Runs `fn`, mapping exceptions to structured error bodies.
    template <typename F>
    void guarded(httplib::Response& res, F&& fn) {
        try {
            reply(res, 200, fn());
        } catch (const Error& e) {
            reply(res, http_status(e), error_body(e));
        } catch (const json::exception& e) {
            reply(res, 400, json{{"code", "invalid_argument"}, {"message", e.what()}, {"stage", ""}});
        } catch (const std::exception& e) {
            spdlog::error("unhandled error: {}", e.what());
            reply(res, 500, json{{"code", "internal"}, {"message", e.what()}, {"stage", ""}});
        }
    }

    /// Same-key requests are serialized and all but the first get the
    /// first one's response.
    template <typename F>
    void idempotent(const httplib::Request& req, httplib::Response& res, F&& fn) {
        const std::string key = req.get_header_value("Idempotency-Key");
        if (key.empty()) {
            guarded(res, fn);
            return;
        }
        const std::string slot = req.method + " " + req.path + " " + key;
        std::shared_ptr<CachedResponse> entry;
        {
            std::lock_guard lock(idem_mu);
            auto& e = idem[slot];
            if (!e) {
                e = std::make_shared<CachedResponse>();
                idem_order.push_back(slot);
                while (idem_order.size() > cfg.idempotency_capacity) {
                    idem.erase(idem_order.front());
                    idem_order.pop_front();
                }
            }
            entry = e;
        }
        std::lock_guard lock(entry->mu);
        if (entry->done) {
            res.status = entry->status;
            res.set_content(entry->body, "application/json");
            res.set_header("Idempotent-Replay", "true");
            return;
        }
        guarded(res, fn);
        // Provider faults are transient; let a retry run again.
        if (res.status < 500) {
            entry->status = res.status;
            entry->body = res.body;
            entry->done = true;
        }
    }

    json assess(const json& body) {
        const auto image = logic.decoder.image(body);
        require(image != nullptr, "assess needs an image");
        std::optional<BBox> box;
        std::optional<std::string> label;
        json detection = nullptr;
        if (auto it = body.find("box"); it != body.end() && !it->is_null()) {
            box = it->get<BBox>();
        } else {
            if (body.contains("label")) {
                label = body.at("label").get<std::string>();
            } else if (body.contains("text")) {
                label = extract_entity(*logic.providers.chat, body.at("text").get<std::string>());
            }
            require(label.has_value(), "assess needs a box, a label or a query text");
            const auto found = detect(*logic.providers.detector, *image, *label);
            if (!found.empty()) {
                box = clamp_to_image(found.front().bbox, {image->width, image->height});
                detection = found.front();
            }
        }
        const auto a = assess_target(*image, box, logic.pipeline.quality);
        return json{{"label", label ? json(*label) : json(nullptr)},
                    {"detection", detection},
                    {"box", box ? json(*box) : json(nullptr)},
                    {"assessment", a},
                    {"ok", a.ok()}};
    }

    json ground(const json& body) {
        QueryBundle b = logic.decoder.bundle(body);
        require(b.image != nullptr, "pointing needs an image");
        if (b.text.empty()) b.text = "pointing";
        std::vector<StageRecord> trace;
        const GroundingResult g = ground_pointing(b, logic.providers, logic.pipeline, &trace);
        const CameraIntrinsics k = resolve_intrinsics(b, logic.pipeline);
        json polyline = json::array();
        for (const auto& p : ray_polyline(g, k, polyline_end(g, logic.pipeline.cast))) polyline.push_back(p);
        json out{{"pointing", g.pointing},
                 {"intersection", g.hit},
                 {"target_box", g.hit.hit() ? json(g.target) : json(nullptr)},
                 {"context_box", g.hit.hit() ? json(g.context) : json(nullptr)},
                 {"hand_box", g.hand},
                 {"intrinsics", k},
                 {"overlay", {{"ray_polyline", polyline}, {"intersection_pixel", g.hit.hit() ? json(g.hit.pixel) : json(nullptr)}}},
                 {"trace", trace}};
        if (!g.hit.hit()) out["guidance"] = make_guidance(GuidanceCode::AimAtTarget);
        if (body.value("render_overlay", false)) {
            out["overlay"]["png_b64"] = assets::base64_encode(assets::encode_png(draw_ray_overlay(*b.image, g, k)));
        }
        return out;
    }

    void routes() {
        server.set_payload_max_length(cfg.max_body_bytes);
        if (!cfg.auth_token.empty()) {
            server.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
                if (req.path == "/healthz") return httplib::Server::HandlerResponse::Unhandled;
                if (req.get_header_value("Authorization") == "Bearer " + cfg.auth_token) {
                    return httplib::Server::HandlerResponse::Unhandled;
                }
                reply(res, 401, json{{"code", "auth_error"}, {"message", "missing or wrong bearer token"}, {"stage", ""}});
                return httplib::Server::HandlerResponse::Handled;
            });
        }

        server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { reply(res, 200, json{{"status", "ok"}}); });

        server.Post("/v1/sessions", [this](const httplib::Request& req, httplib::Response& res) {
            idempotent(req, res, [&] {
                const json body = body_of(req);
                auto s = logic.make(body, new_session_id());
                {
                    std::lock_guard lock(s->mu);
                    logic.event(*s, "create", body);
                    s->publish(json::object());
                }
                {
                    std::lock_guard lock(sessions_mu);
                    sessions[s->id] = s;
                }
                write_log({{"session", s->id}, {"event", "create"}, {"body", body}});
                return json{{"session_id", s->id}, {"created_at", s->created_at}};
            });
        });

        server.Post("/v1/sessions/:id/query", [this](const httplib::Request& req, httplib::Response& res) {
            idempotent(req, res, [&] {
                auto s = find(req.path_params.at("id"));
                const json body = body_of(req);
                std::lock_guard lock(s->mu);
                json out = logic.query(*s, body);
                write_log({{"session", s->id}, {"event", "query"}, {"body", body}, {"outcome", out}});
                return out;
            });
        });

        server.Post("/v1/sessions/:id/answer", [this](const httplib::Request& req, httplib::Response& res) {
            idempotent(req, res, [&] {
                auto s = find(req.path_params.at("id"));
                const json body = body_of(req);
                std::lock_guard lock(s->mu);
                json out = logic.answer(*s, body);
                write_log({{"session", s->id}, {"event", "answer"}, {"body", body}, {"outcome", out}});
                return out;
            });
        });

        server.Get("/v1/sessions/:id/trace", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto snap = find(req.path_params.at("id"))->read();
                return json{{"session_id", snap->at("id")}, {"trace", snap->at("trace")}};
            });
        });

        server.Get("/v1/sessions/:id", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { return *find(req.path_params.at("id"))->read(); });
        });

        server.Post("/v1/vision/assess", [this](const httplib::Request& req, httplib::Response& res) {
            idempotent(req, res, [&] { return assess(body_of(req)); });
        });

        server.Post("/v1/pointing/ground", [this](const httplib::Request& req, httplib::Response& res) {
            idempotent(req, res, [&] { return ground(body_of(req)); });
        });
    }
};

Service::Service(Providers providers, ServiceConfig cfg)
    : impl_(std::make_unique<Impl>(std::move(providers), std::move(cfg))) {}

Service::~Service() { stop(); }

int Service::start() {
    auto& s = impl_->server;
    int port = impl_->cfg.port;
    if (port == 0) {
        port = s.bind_to_any_port(impl_->cfg.host);
    } else if (!s.bind_to_port(impl_->cfg.host, port)) {
        port = -1;
    }
    if (port < 0) fail(ErrorCode::InvalidArgument, "cannot bind " + impl_->cfg.host + ":" + std::to_string(impl_->cfg.port));
    impl_->thread = std::thread([&s] { s.listen_after_bind(); });
    s.wait_until_ready();
    spdlog::info("serving on {}:{}", impl_->cfg.host, port);
    return port;
}

void Service::run() {
    spdlog::info("serving on {}:{}", impl_->cfg.host, impl_->cfg.port);
    if (!impl_->server.listen(impl_->cfg.host, impl_->cfg.port)) {
        fail(ErrorCode::InvalidArgument, "cannot listen on " + impl_->cfg.host + ":" + std::to_string(impl_->cfg.port));
    }
}

void Service::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace clarifier::service
