#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <utility>

#include "dssddi/errors.hpp"
#include "dssddi/medsupport.hpp"
#include "dssddi/pipeline.hpp"
#include "json.hpp"

namespace httplib {
class Server;
}

namespace dssddi::service {

/// Immutable state behind every request.
struct Snapshot {
  mdgcn::ModelBundle bundle;
  DdiGraph graph;  // signed edges only
  medsupport::TrussIndex truss;
  std::filesystem::path source;
};

std::shared_ptr<const Snapshot> load_snapshot(const std::filesystem::path& bundle_dir);

/// Request failure carrying the HTTP status and the offending field.
class HttpError : public Error {
 public:
  HttpError(int status, std::string field, const std::string& message)
      : Error(message), status_(status), field_(std::move(field)) {}
  int status() const { return status_; }
  const std::string& field() const { return field_; }

 private:
  int status_;
  std::string field_;
};

// Handlers. Each throws HttpError on a bad request.
nlohmann::json handle_suggest(const Snapshot& snap, const nlohmann::json& body);
nlohmann::json handle_explain(const Snapshot& snap, const nlohmann::json& body);
nlohmann::json handle_ss(const Snapshot& snap, const nlohmann::json& body);
nlohmann::json drugs_json(const Snapshot& snap);
nlohmann::json health_json(const Snapshot& snap);
nlohmann::json schema_json(const Snapshot& snap);

struct Reply {
  int status = 200;
  nlohmann::json body;
};

class Service {
 public:
  explicit Service(std::filesystem::path bundle_dir);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  std::shared_ptr<const Snapshot> snapshot() const;
  /// Loads `bundle_dir` (or the current source when empty) and swaps it in.
  /// The old snapshot stays valid for requests already holding it.
  void reload(const std::filesystem::path& bundle_dir = {});

  /// Routes one request without sockets.
  Reply dispatch(const std::string& method, const std::string& path, const std::string& body);

  /// Binds host:port (0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void listen();
  void stop();

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const Snapshot> snap_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace dssddi::service
