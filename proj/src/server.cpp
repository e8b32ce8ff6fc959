#include <chrono>
#include <condition_variable>
#include <thread>

#include "xmt/session.hpp"
#include "xmt/wav.hpp"

#include <nlohmann/json.hpp>

// After Eigen: httplib pulls in <resolv.h>, whose _res macro collides with Eigen identifiers.
#include <httplib.h>

namespace xmt {

using nlohmann::json;

struct SessionServer::Impl {
    Config config;
    ServeOptions options;
    Broadcaster broadcaster;
    std::unique_ptr<LiveSession> session;
    httplib::Server http;
    std::thread http_thread;
    std::thread tick_thread;
    std::atomic<bool> running{false};
    std::atomic<std::uint64_t> ticks{0};
    std::mutex scene_mutex;
    std::mutex done_mutex;
    std::condition_variable done_cv;
    bool done = false;
    bool stopped = false;

    void signal_done() {
        {
            std::lock_guard lock(done_mutex);
            done = true;
        }
        done_cv.notify_all();
    }
};

SessionServer::SessionServer(Config config, World world, ServeOptions options) : impl_(std::make_unique<Impl>()) {
    impl_->config = config;
    impl_->options = std::move(options);
    auto* broadcaster = &impl_->broadcaster;
    impl_->session = std::make_unique<LiveSession>(
        std::move(config), std::move(world),
        [broadcaster](Frame::Kind kind, std::string payload) { broadcaster->publish(kind, std::move(payload)); },
        !impl_->options.audio_path.empty());

    auto& http = impl_->http;
    Impl* impl = impl_.get();

    http.Get("/terrain.pgm", [impl](const httplib::Request&, httplib::Response& res) {
        try {
            res.set_content(impl->session->terrain_pgm(), "image/x-portable-graymap");
        } catch (const std::exception& e) {
            res.status = 404;
            res.set_content(json{{"error", e.what()}}.dump(), "application/json");
        }
    });

    http.Get("/config", [impl](const httplib::Request&, httplib::Response& res) {
        res.set_content(scene_config_to_json(impl->session->active_config()).dump(2), "application/json");
    });

    http.Post("/scene", [impl](const httplib::Request& req, httplib::Response& res) {
        std::lock_guard lock(impl->scene_mutex);
        try {
            json merged = scene_config_to_json(impl->session->active_config());
            merged.merge_patch(json::parse(req.body));
            const SceneConfig next = scene_config_from_json(merged, impl->session->active_config());
            World world = build_world(next, impl->config.base_dir);
            impl->session->swap_scene(next, std::move(world));
            res.set_content(scene_config_to_json(next).dump(2), "application/json");
        } catch (const std::exception& e) {
            res.status = 400;
            res.set_content(json{{"error", e.what()}}.dump(), "application/json");
        }
    });

    http.Post("/input", [this, impl](const httplib::Request& req, httplib::Response& res) {
        try {
            impl->session->submit(parse_pointer_input(req.body));
            res.set_content(R"({"ok":true})", "application/json");
        } catch (const std::exception& e) {
            ++malformed_inputs_;
            res.status = 400;
            res.set_content(json{{"warning", e.what()}, {"malformed_inputs", malformed_inputs_.load()}}.dump(),
                            "application/json");
        }
    });

    http.Get("/stats", [this, impl](const httplib::Request&, httplib::Response& res) {
        res.set_content(json{{"ticks", impl->ticks.load()},
                             {"malformed_inputs", malformed_inputs_.load()},
                             {"subscribers", impl->broadcaster.subscribers()},
                             {"last_seq", impl->broadcaster.last_seq()}}
                            .dump(),
                        "application/json");
    });

    http.Get("/session", [impl](const httplib::Request&, httplib::Response& res) {
        auto sub = impl->broadcaster.subscribe(impl->session->hello_message());
        res.set_chunked_content_provider(
            "application/octet-stream",
            [impl, sub](std::size_t, httplib::DataSink& sink) {
                if (!impl->running || sub->closed()) {
                    sink.done();
                    return true;
                }
                // Drain whatever is queued in one write.
                std::string batch;
                auto frame = sub->pop(std::chrono::milliseconds(50));
                while (frame) {
                    batch += encode_frame(*frame);
                    if (batch.size() > (1u << 16)) break;
                    frame = sub->pop(std::chrono::milliseconds(0));
                }
                if (!batch.empty() && !sink.write(batch.data(), batch.size())) return false;
                return true;
            },
            [impl, sub](bool) { impl->broadcaster.unsubscribe(sub); });
    });
}

SessionServer::~SessionServer() { stop(); }

int SessionServer::start() {
    auto& impl = *impl_;
    if (impl.options.port == 0) {
        port_ = impl.http.bind_to_any_port(impl.options.host);
    } else {
        port_ = impl.http.bind_to_port(impl.options.host, impl.options.port) ? impl.options.port : -1;
    }
    if (port_ <= 0) throw std::runtime_error("cannot bind " + impl.options.host + ":" + std::to_string(impl.options.port));

    impl.running = true;
    impl.http_thread = std::thread([&impl] { impl.http.listen_after_bind(); });
    impl.tick_thread = std::thread([&impl] {
        using clock = std::chrono::steady_clock;
        const auto period = std::chrono::duration_cast<clock::duration>(
            std::chrono::duration<double>(1.0 / impl.config.scene.tick_rate));
        const auto limit = static_cast<std::uint64_t>(impl.options.duration * impl.config.scene.tick_rate);
        auto next = clock::now();
        while (impl.running) {
            impl.session->tick();
            const auto done = ++impl.ticks;
            if (limit > 0 && done >= limit) {
                impl.signal_done();
                break;
            }
            next += period;
            const auto now = clock::now();
            if (now - next > std::chrono::milliseconds(200)) next = now;  // fell behind; resync
            std::this_thread::sleep_until(next);
        }
    });
    return port_;
}

void SessionServer::stop() {
    auto& impl = *impl_;
    if (impl.stopped) return;
    impl.stopped = true;
    impl.running = false;
    if (impl.tick_thread.joinable()) impl.tick_thread.join();
    impl.broadcaster.close_all();
    impl.http.stop();
    if (impl.http_thread.joinable()) impl.http_thread.join();
    impl.session->finish();
    if (!impl.options.record_path.empty())
        write_file_atomic(impl.options.record_path, traversal_jsonl(impl.session->record()));
    if (!impl.options.audio_path.empty())
        write_file_atomic(impl.options.audio_path,
                          encode_wav24(impl.session->audio(), static_cast<int>(impl.config.scene.sample_rate)));
    impl.signal_done();
}

void SessionServer::wait() {
    {
        std::unique_lock lock(impl_->done_mutex);
        impl_->done_cv.wait(lock, [&] { return impl_->done; });
    }
    stop();
}

bool SessionServer::wait_for(std::chrono::milliseconds timeout) {
    std::unique_lock lock(impl_->done_mutex);
    return impl_->done_cv.wait_for(lock, timeout, [&] { return impl_->done; });
}

std::uint64_t SessionServer::ticks() const { return impl_->ticks; }

}  // namespace xmt
