#pragma once

#include <Eigen/Dense>

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace drface {

// Named-tensor container: a JSON manifest
//   {"tensors":[{"name":..., "shape":[r,c], "offset":<bytes>}], "config":{...}}
// next to a contiguous little-endian float32 blob. Used for trained models
// ("kind":"disentangle") and the bilinear core ("kind":"bilinear_core").

struct NamedTensor {
    std::string name;
    Eigen::MatrixXd value;
};

struct TensorFile {
    std::string kind;
    std::vector<NamedTensor> tensors;
    nlohmann::json config;

    const NamedTensor& find(const std::string& name) const;
    bool contains(const std::string& name) const;
};

// Writes `<json_path>` and the blob beside it (same stem, .bin extension),
// recording the blob's file name in the manifest.
void save_tensor_file(const std::string& json_path, const std::string& kind,
                      const std::vector<NamedTensor>& tensors, const nlohmann::json& config);

TensorFile load_tensor_file(const std::string& json_path);

} // namespace drface
