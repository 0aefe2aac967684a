#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "dssddi/numkit/tensor.hpp"
#include "json.hpp"

namespace dssddi::numkit {

/// Named tensors plus free-form metadata.
///
/// On disk a checkpoint is a JSON document:
///
///   {"format": "dssddi.checkpoint", "version": 1,
///    "metadata": {...},
///    "tensors": [{"name": "...", "shape": [rows, cols], "data": [...]}, ...]}
///
/// Tensors are written sorted by name with shortest round-trip decimal
/// doubles, so save/load is exact.
struct Checkpoint {
  static constexpr int kVersion = 1;

  std::map<std::string, Tensor> tensors;
  nlohmann::json metadata = nlohmann::json::object();

  const Tensor& at(const std::string& name) const;
};

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dssddi::numkit
