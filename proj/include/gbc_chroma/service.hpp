#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <string>
#include <thread>
#include <utility>

#include "httplib.h"
#include "json.hpp"

#include "gbc_chroma/data_model.hpp"
#include "gbc_chroma/error.hpp"
#include "gbc_chroma/pipeline.hpp"

namespace gbc_chroma {

// One uploaded dataset with its configuration. Mutations are serialized by
// the session mutex; artifact computation happens outside it.
class Session {
 public:
  Session(std::string id, std::shared_ptr<const DataTable> table) : id_(std::move(id)), cache_(std::move(table)) {}

  const std::string& id() const noexcept { return id_; }
  const DataTable& table() const noexcept { return *cache_.table(); }
  PipelineCache& cache() noexcept { return cache_; }

  std::pair<SessionConfig, std::uint64_t> config() const {
    std::lock_guard lock(mu_);
    return {config_, version_};
  }

  // Merges and validates the patch; the version advances on every accepted
  // mutation.
  std::pair<SessionConfig, std::uint64_t> patch(const json& patch) {
    std::lock_guard lock(mu_);
    config_ = merge_config(config_, patch);
    return {config_, ++version_};
  }

  // Runs fn(config) and returns its result with the config version it was
  // computed under. A result whose config was replaced mid-computation is
  // recomputed, so nothing stale is handed out after a change.
  template <typename Fn>
  auto current(Fn&& fn) -> std::pair<decltype(fn(std::declval<const SessionConfig&>())), std::uint64_t> {
    for (;;) {
      auto [cfg, version] = config();
      auto result = fn(cfg);
      std::lock_guard lock(mu_);
      if (version == version_) return {std::move(result), version};
    }
  }

 private:
  std::string id_;
  PipelineCache cache_;
  mutable std::mutex mu_;
  SessionConfig config_;
  std::uint64_t version_ = 1;
};

class SessionStore {
 public:
  std::shared_ptr<Session> create(std::shared_ptr<const DataTable> table) {
    std::unique_lock lock(mu_);
    std::string id;
    do id = new_id_locked();
    while (sessions_.contains(id));
    auto session = std::make_shared<Session>(id, std::move(table));
    sessions_.emplace(id, session);
    return session;
  }

  std::shared_ptr<Session> find(const std::string& id) const {
    std::shared_lock lock(mu_);
    const auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  bool erase(const std::string& id) {
    std::unique_lock lock(mu_);
    return sessions_.erase(id) > 0;
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return sessions_.size();
  }

 private:
  std::string new_id_locked() {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string id(16, '0');
    std::uint64_t bits = rng_();
    for (char& c : id) {
      c = kHex[bits & 0xF];
      bits >>= 4;
    }
    return id;
  }

  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mt19937_64 rng_{std::random_device{}()};
};

// JSON-over-HTTP facade; every route lives under /api/v1.
class Service {
 public:
  Service() { install_routes(); }

  // Serves files from `dir` at "/" (the UI bundle).
  bool mount_static(const std::string& dir) { return server_.set_mount_point("/", dir); }

  bool listen(const std::string& host, int port) { return server_.listen(host, port); }
  int bind_to_any_port(const std::string& host) { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  bool is_running() const { return server_.is_running(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

  SessionStore& sessions() noexcept { return store_; }

 private:
  static void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, const std::string& message) {
    send_json(res, status, json{{"error", message}, {"status", status}});
  }

  static void send_png(httplib::Response& res, const std::string& bytes, std::uint64_t version) {
    res.status = 200;
    res.set_header("X-Config-Version", std::to_string(version));
    res.set_header("Cache-Control", "no-store");
    res.set_content(bytes, "image/png");
  }

  // Maps library failures onto status codes: malformed input 400, invariant
  // violations 422.
  template <typename Fn>
  static void guarded(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const json::exception& e) {
      send_error(res, 400, e.what());
    } catch (const Error& e) {
      switch (e.code()) {
        case ErrorCode::MissingHeader:
        case ErrorCode::InvalidHeader:
        case ErrorCode::NonNumericCell:
        case ErrorCode::InconsistentArity:
        case ErrorCode::TooFewAttributes:
        case ErrorCode::EmptyTable: send_error(res, 400, e.what()); break;
        case ErrorCode::IoFailure: send_error(res, 500, e.what()); break;
        default: send_error(res, 422, e.what()); break;
      }
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  }

  std::shared_ptr<Session> session_or_404(const httplib::Request& req, httplib::Response& res) const {
    auto s = store_.find(req.matches[1]);
    if (!s) send_error(res, 404, "unknown session '" + std::string(req.matches[1]) + "'");
    return s;
  }

  static json config_body(const SessionConfig& cfg, std::uint64_t version) {
    json body = to_json(cfg);
    body["version"] = version;
    return body;
  }

  static unsigned render_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

  void install_routes() {
    const std::string base = "/api/v1/sessions";
    const std::string sid = base + "/([^/]+)";

    server_.Post(base, [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        std::string csv;
        if (req.is_multipart_form_data()) {
          if (req.files.empty()) return send_error(res, 400, "multipart body has no file part");
          csv = req.files.begin()->second.content;
        } else {
          csv = req.body;
        }
        if (csv.empty()) return send_error(res, 400, "empty request body");
        auto table = std::make_shared<const DataTable>(parse_table(csv));
        auto session = store_.create(table);
        const auto [cfg, version] = session->config();
        send_json(res, 201,
                  json{{"id", session->id()},
                       {"attributes", table->attribute_names},
                       {"m", table->sample_count()},
                       {"n", table->attribute_count()},
                       {"version", version},
                       {"config", config_body(cfg, version)}});
      });
    });

    server_.Get(sid + "/config", [this](const httplib::Request& req, httplib::Response& res) {
      auto s = session_or_404(req, res);
      if (!s) return;
      const auto [cfg, version] = s->config();
      send_json(res, 200, config_body(cfg, version));
    });

    server_.Patch(sid + "/config", [this](const httplib::Request& req, httplib::Response& res) {
      auto s = session_or_404(req, res);
      if (!s) return;
      guarded(res, [&] {
        const json patch = json::parse(req.body);
        const auto [cfg, version] = s->patch(patch);
        send_json(res, 200, config_body(cfg, version));
      });
    });

    server_.Get(sid + "/layout", [this](const httplib::Request& req, httplib::Response& res) {
      auto s = session_or_404(req, res);
      if (!s) return;
      guarded(res, [&] {
        auto [body, version] = s->current(
            [&](const SessionConfig& cfg) { return to_json(s->cache().layout(cfg)->layout, s->table().attribute_names); });
        body["version"] = version;
        send_json(res, 200, body);
      });
    });

    server_.Get(sid + "/legend", [this](const httplib::Request& req, httplib::Response& res) {
      auto s = session_or_404(req, res);
      if (!s) return;
      guarded(res, [&] {
        auto [body, version] = s->current([&](const SessionConfig& cfg) { return s->cache().legend(cfg); });
        body["version"] = version;
        send_json(res, 200, body);
      });
    });

    server_.Get(sid + "/render", [this](const httplib::Request& req, httplib::Response& res) {
      auto s = session_or_404(req, res);
      if (!s) return;
      guarded(res, [&] {
        const RenderOptions opts{render_threads()};
        const auto [png, version] = s->current([&](const SessionConfig& cfg) { return s->cache().map_png(cfg, opts); });
        send_png(res, *png, version);
      });
    });

    server_.Get(sid + "/render/attribute/([^/]+)", [this](const httplib::Request& req, httplib::Response& res) {
      auto s = session_or_404(req, res);
      if (!s) return;
      const std::string name = httplib::detail::decode_url(req.matches[2], false);
      const auto& names = s->table().attribute_names;
      const auto it = std::find(names.begin(), names.end(), name);
      if (it == names.end()) return send_error(res, 404, "unknown attribute '" + name + "'");
      const auto attr = static_cast<std::size_t>(it - names.begin());
      guarded(res, [&] {
        const RenderOptions opts{render_threads()};
        const auto [png, version] =
            s->current([&](const SessionConfig& cfg) { return s->cache().attribute_png(cfg, attr, opts); });
        send_png(res, *png, version);
      });
    });

    server_.Get(sid + "/samples/nearest", [this](const httplib::Request& req, httplib::Response& res) {
      auto s = session_or_404(req, res);
      if (!s) return;
      double x = 0.0, y = 0.0;
      if (!req.has_param("x") || !req.has_param("y") || !detail::parse_number(req.get_param_value("x"), x) ||
          !detail::parse_number(req.get_param_value("y"), y))
        return send_error(res, 400, "query needs numeric x and y");
      guarded(res, [&] {
        const std::size_t j = nearest_sample(s->table(), {x, y});
        auto [body, version] = s->current([&](const SessionConfig& cfg) { return s->cache().sample(cfg, j); });
        body["version"] = version;
        send_json(res, 200, body);
      });
    });

    server_.Get(sid + R"(/samples/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
      auto s = session_or_404(req, res);
      if (!s) return;
      const std::string raw = req.matches[2];
      std::size_t j = 0;
      const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), j);
      if (ec != std::errc() || j >= s->table().sample_count())
        return send_error(res, 404, "unknown sample '" + raw + "'");
      guarded(res, [&] {
        auto [body, version] = s->current([&](const SessionConfig& cfg) { return s->cache().sample(cfg, j); });
        body["version"] = version;
        send_json(res, 200, body);
      });
    });

    server_.Delete(sid, [this](const httplib::Request& req, httplib::Response& res) {
      if (!store_.erase(req.matches[1])) return send_error(res, 404, "unknown session");
      res.status = 204;
    });
  }

  SessionStore store_;
  httplib::Server server_;
};

}  // namespace gbc_chroma
