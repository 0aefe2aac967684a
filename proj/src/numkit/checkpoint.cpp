#include "dssddi/numkit/checkpoint.hpp"

#include <fstream>

#include "dssddi/errors.hpp"

namespace dssddi::numkit {

namespace {
constexpr const char* kFormat = "dssddi.checkpoint";
}

const Tensor& Checkpoint::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw FormatError("checkpoint has no tensor '" + name + "'");
  return it->second;
}

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt) {
  nlohmann::json doc;
  doc["format"] = kFormat;
  doc["version"] = Checkpoint::kVersion;
  doc["metadata"] = ckpt.metadata;
  auto& list = doc["tensors"] = nlohmann::json::array();
  for (const auto& [name, t] : ckpt.tensors) {
    if (!t.all_finite()) throw FormatError("tensor '" + name + "' has non-finite entries");
    list.push_back({{"name", name}, {"shape", {t.rows(), t.cols()}}, {"data", t.data()}});
  }
  return doc;
}

Checkpoint checkpoint_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || doc.value("format", "") != kFormat) {
    throw FormatError("not a dssddi checkpoint");
  }
  const int version = doc.value("version", 0);
  if (version != Checkpoint::kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.metadata = doc.value("metadata", nlohmann::json::object());
  for (const auto& entry : doc.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2) throw FormatError("tensor '" + name + "' must have rank 2");
    auto data = entry.at("data").get<std::vector<double>>();
    try {
      ckpt.tensors.emplace(name, Tensor(shape[0], shape[1], std::move(data)));
    } catch (const ShapeError& e) {
      throw FormatError("tensor '" + name + "': " + e.what());
    }
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(ckpt).dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read checkpoint " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json(doc);
}

}  // namespace dssddi::numkit
