#include "dssddi/service.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "httplib.h"

namespace dssddi::service {

using nlohmann::json;

std::shared_ptr<const Snapshot> load_snapshot(const std::filesystem::path& bundle_dir) {
  auto loaded = pipeline::load_model(bundle_dir);
  auto snap = std::make_shared<Snapshot>();
  snap->bundle = std::move(loaded.bundle);
  snap->graph = std::move(loaded.graph);
  snap->truss = medsupport::truss_decomposition(snap->graph);
  snap->source = bundle_dir;
  return snap;
}

namespace {

const json& field(const json& body, const char* name) {
  if (!body.is_object()) throw HttpError(400, "", "request body must be a JSON object");
  auto it = body.find(name);
  if (it == body.end()) throw HttpError(400, name, std::string("missing field '") + name + "'");
  return *it;
}

std::vector<DrugId> drug_ids(const Snapshot& snap, const json& body) {
  const json& ids = field(body, "drug_ids");
  if (!ids.is_array() || ids.empty()) throw HttpError(400, "drug_ids", "drug_ids must be a non-empty array");
  std::vector<DrugId> out;
  std::set<DrugId> seen;
  for (const auto& v : ids) {
    if (!v.is_number_integer() || v.get<long long>() < 0)
      throw HttpError(400, "drug_ids", "drug_ids entries must be non-negative integers");
    const auto id = v.get<DrugId>();
    if (id >= snap.graph.num_drugs()) throw HttpError(404, "drug_ids", "unknown drug id " + std::to_string(id));
    if (!seen.insert(id).second) throw HttpError(400, "drug_ids", "duplicate drug id " + std::to_string(id));
    out.push_back(id);
  }
  return out;
}

double alpha_of(const json& body) {
  auto it = body.find("alpha");
  if (it == body.end() || it->is_null()) return medsupport::kDefaultAlpha;
  if (!it->is_number()) throw HttpError(400, "alpha", "alpha must be a number");
  const double a = it->get<double>();
  if (!(a > 0.0 && a < 1.0)) throw HttpError(400, "alpha", "alpha must lie in (0, 1)");
  return a;
}

}  // namespace

json handle_suggest(const Snapshot& snap, const json& body) {
  const json& features = field(body, "features");
  if (!features.is_array()) throw HttpError(400, "features", "features must be an array");
  if (features.size() != snap.bundle.feature_dim())
    throw HttpError(400, "features", "expected " + std::to_string(snap.bundle.feature_dim()) + " features, got " +
                                         std::to_string(features.size()));
  std::vector<double> raw;
  for (const auto& f : features) {
    if (f.is_null()) {
      raw.push_back(std::numeric_limits<double>::quiet_NaN());  // imputed
    } else if (f.is_number()) {
      raw.push_back(f.get<double>());
    } else {
      throw HttpError(400, "features", "features must be numbers or null");
    }
  }
  std::size_t k = std::min<std::size_t>(pipeline::kMaxReportK, snap.bundle.num_drugs());
  if (auto it = body.find("k"); it != body.end()) {
    if (!it->is_number_integer() || it->get<long long>() < 1 ||
        it->get<unsigned long long>() > snap.bundle.num_drugs())
      throw HttpError(400, "k", "k must be an integer in [1, " + std::to_string(snap.bundle.num_drugs()) + "]");
    k = it->get<std::size_t>();
  }
  json drugs = json::array();
  for (const auto& s : mdgcn::suggest_top_k(raw, k, snap.bundle))
    drugs.push_back({{"id", s.drug}, {"name", snap.graph.drug(s.drug).name}, {"score", s.score}});
  return {{"drugs", drugs}};
}

json handle_explain(const Snapshot& snap, const json& body) {
  auto ids = drug_ids(snap, body);
  const double alpha = alpha_of(body);
  auto sub = medsupport::explain(snap.graph, snap.truss, ids, alpha);
  return medsupport::explanation_to_json(sub, snap.graph);
}

json handle_ss(const Snapshot& snap, const json& body) {
  auto ids = drug_ids(snap, body);
  if (ids.size() < 2) throw HttpError(400, "drug_ids", "SS needs at least 2 drugs");
  const double alpha = alpha_of(body);
  auto sub = medsupport::explain(snap.graph, snap.truss, ids, alpha);
  return {{"ss", sub.ss}, {"nodes", sub.nodes.size()}, {"multi_component", sub.multi_component}};
}

json drugs_json(const Snapshot& snap) {
  json drugs = json::array();
  for (const auto& d : snap.graph.drugs()) drugs.push_back({{"id", d.id}, {"name", d.name}});
  return {{"drugs", drugs}};
}

json health_json(const Snapshot& snap) {
  return {{"status", "ok"},
          {"drugs", snap.bundle.num_drugs()},
          {"features", snap.bundle.feature_dim()},
          {"source", snap.source.string()}};
}

json schema_json(const Snapshot& snap) {
  return {{"features", snap.bundle.feature_names}, {"k_max", snap.bundle.num_drugs()}};
}

// ---- Service ----

Service::Service(std::filesystem::path bundle_dir)
    : snap_(load_snapshot(bundle_dir)), server_(std::make_unique<httplib::Server>()) {
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    Reply r = dispatch(req.method, req.path, req.body);
    res.status = r.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(r.body.dump(), "application/json");
  };
  server_->Get(".*", route);
  server_->Post(".*", route);
  server_->Options(".*", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.status = 204;
  });
}

Service::~Service() { stop(); }

std::shared_ptr<const Snapshot> Service::snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  return snap_;
}

void Service::reload(const std::filesystem::path& bundle_dir) {
  const auto dir = bundle_dir.empty() ? snapshot()->source : bundle_dir;
  auto fresh = load_snapshot(dir);  // outside the lock; a failure keeps the old one
  std::lock_guard<std::mutex> lock(mu_);
  snap_ = std::move(fresh);
}

Reply Service::dispatch(const std::string& method, const std::string& path, const std::string& body) {
  auto error = [](int status, const std::string& field, const std::string& msg) {
    json e = {{"error", msg}};
    if (!field.empty()) e["field"] = field;
    return Reply{status, e};
  };
  try {
    auto snap = snapshot();
    auto parsed = [&] {
      try {
        return body.empty() ? json::object() : json::parse(body);
      } catch (const json::parse_error& e) {
        throw HttpError(400, "", std::string("malformed JSON: ") + e.what());
      }
    };
    if (method == "GET") {
      if (path == "/health") return {200, health_json(*snap)};
      if (path == "/drugs") return {200, drugs_json(*snap)};
      if (path == "/schema") return {200, schema_json(*snap)};
    } else if (method == "POST") {
      if (path == "/suggest") return {200, handle_suggest(*snap, parsed())};
      if (path == "/explain") return {200, handle_explain(*snap, parsed())};
      if (path == "/ss") return {200, handle_ss(*snap, parsed())};
      if (path == "/admin/reload") {
        json b = parsed();
        std::filesystem::path dir;
        if (b.contains("bundle")) {
          if (!b["bundle"].is_string()) throw HttpError(400, "bundle", "bundle must be a path string");
          dir = b["bundle"].get<std::string>();
        }
        try {
          reload(dir);
        } catch (const Error& e) {
          throw HttpError(500, "bundle", std::string("reload failed: ") + e.what());
        }
        return {200, {{"status", "reloaded"}, {"source", snapshot()->source.string()}}};
      }
    }
    return error(404, "", "no route for " + method + " " + path);
  } catch (const HttpError& e) {
    return error(e.status(), e.field(), e.what());
  } catch (const QueryError& e) {
    return error(404, "drug_ids", e.what());
  } catch (const ShapeError& e) {
    return error(400, "", e.what());
  } catch (const ArgumentError& e) {
    return error(400, "", e.what());
  } catch (const std::exception& e) {
    return error(500, "", e.what());
  }
}

int Service::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  if (!server_->bind_to_port(host, port)) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void Service::listen() { server_->listen_after_bind(); }

void Service::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

}  // namespace dssddi::service
