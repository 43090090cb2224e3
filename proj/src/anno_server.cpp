#include "prefalign/anno_server.hpp"

#include "httplib.h"
#include "json.hpp"

namespace prefalign {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const std::string& body) {
  res.status = status;
  res.set_content(body, "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& msg) {
  send_json(res, status, json{{"error", msg}}.dump());
}

template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const AnnoError& e) {
    send_error(res, static_cast<int>(e.code), e.what());
  } catch (const json::exception& e) {
    send_error(res, 400, std::string("malformed request: ") + e.what());
  } catch (const ContractViolation& e) {
    send_error(res, 422, e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, e.what());
  }
}

}  // namespace

AnnoServer::AnnoServer(AnnoStore& store, std::optional<std::filesystem::path> static_dir)
    : store_(store), server_(std::make_unique<httplib::Server>()) {
  auto& s = *server_;
  s.Get("/api/v1/session/new", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, json{{"session_id", store_.new_session()}}.dump()); });
  });

  s.Get("/api/v1/task", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (!req.has_param("session")) throw AnnoError(AnnoError::Code::BadRequest, "missing session parameter");
      const auto task = store_.next_task(req.get_param_value("session"));
      if (!task) {
        send_json(res, 200, json{{"done", true}}.dump());
        return;
      }
      send_json(res, 200, store_.task_json(*task));
    });
  });

  s.Post("/api/v1/submit", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = json::parse(req.body);
      const auto session = body.at("session").get<std::string>();
      const auto task = body.at("task_id").get<std::uint64_t>();
      Judgment j;
      try {
        j = judgment_from_string(body.at("judgment").get<std::string>());
      } catch (const ContractViolation& e) {
        throw AnnoError(AnnoError::Code::Unprocessable, e.what());
      }
      store_.submit(task, session, j);
      send_json(res, 200, json{{"ok", true}}.dump());
    });
  });

  s.Get(R"(/api/v1/aggregate/(reading|cmos|similarity))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto which = req.matches[1].str();
      if (which == "reading") send_json(res, 200, to_json(store_.reading()));
      else if (which == "cmos") send_json(res, 200, to_json(store_.cmos()));
      else send_json(res, 200, to_json(store_.similarity()));
    });
  });

  s.Get("/api/v1/export", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      res.status = 200;
      res.set_content(store_.export_journal(), "application/x-ndjson");
    });
  });

  s.Get("/api/v1/status", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      const auto snap = store_.snapshot();
      send_json(res, 200,
                json{{"pairs", snap.pairs->size()},
                     {"tasks", snap.tasks->size()},
                     {"records", snap.records->size()},
                     {"sessions", snap.sessions->size()},
                     {"under_replicated", store_.under_replicated().size()}}
                    .dump());
    });
  });

  if (static_dir) s.set_mount_point("/", static_dir->string());
}

AnnoServer::~AnnoServer() { stop(); }

int AnnoServer::bind_any(const std::string& host) { return server_->bind_to_any_port(host); }

bool AnnoServer::bind(const std::string& host, int port) { return server_->bind_to_port(host, port); }

bool AnnoServer::serve() { return server_->listen_after_bind(); }

void AnnoServer::stop() {
  if (server_) server_->stop();
}

void AnnoServer::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace prefalign
