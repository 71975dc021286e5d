// dataset.hpp - manifest items to model-ready meshes.
#pragma once

#include <string>
#include <vector>

#include "wrapnet/model.hpp"
#include "wrapnet/synthetic.hpp"

namespace wrapnet {

inline PreparedMesh prepare_item(const DatasetManifest& manifest, const DatasetItem& item,
                                 const ModelConfig& config) {
  if (config.levels == 0)
    return PreparedMesh(item.id, item.label, load_dataset_mesh(manifest, item.plain_path));
  return PreparedMesh(item.id, item.label, load_dataset_mesh(manifest, item.base_path),
                      load_dataset_mesh(manifest, item.full_path), config.levels);
}

// Items in manifest order, optionally filtered (and ordered) by id list.
inline std::vector<PreparedMesh> prepare_dataset(const DatasetManifest& manifest,
                                                 const ModelConfig& config,
                                                 const std::vector<std::string>& ids = {}) {
  std::vector<PreparedMesh> out;
  if (ids.empty()) {
    for (const DatasetItem& item : manifest.items) out.push_back(prepare_item(manifest, item, config));
  } else {
    for (const std::string& id : ids) out.push_back(prepare_item(manifest, manifest.find(id), config));
  }
  if (out.empty()) throw std::runtime_error("dataset selection is empty");
  return out;
}

}  // namespace wrapnet
