#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "prefalign/annosvc.hpp"

namespace httplib {
class Server;
}

namespace prefalign {

/// JSON API under /api/v1/ over an AnnoStore; optionally serves a static UI bundle at /.
class AnnoServer {
 public:
  explicit AnnoServer(AnnoStore& store, std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~AnnoServer();

  /// Binds an ephemeral port and returns it (or -1).
  int bind_any(const std::string& host = "127.0.0.1");
  bool bind(const std::string& host, int port);
  /// Blocks until stop().
  bool serve();
  void stop();
  void wait_until_ready() const;

 private:
  AnnoStore& store_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace prefalign
