#include "drface/model_file.hpp"

#include "drface/mesh.hpp"

#include <filesystem>
#include <fstream>

namespace drface {

const NamedTensor& TensorFile::find(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) {
            return t;
        }
    }
    throw DataError("tensor file: missing tensor '" + name + "'");
}

bool TensorFile::contains(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) {
            return true;
        }
    }
    return false;
}

void save_tensor_file(const std::string& json_path, const std::string& kind,
                      const std::vector<NamedTensor>& tensors, const nlohmann::json& config) {
    const std::filesystem::path jp(json_path);
    std::filesystem::path bp = jp;
    bp.replace_extension(".bin");

    nlohmann::json manifest;
    manifest["kind"] = kind;
    manifest["blob"] = bp.filename().string();
    manifest["config"] = config;
    nlohmann::json tensor_list = nlohmann::json::array();

    std::ofstream blob(bp, std::ios::binary);
    if (!blob) {
        throw DataError("save_tensor_file: cannot open " + bp.string() + " for writing");
    }
    std::uint64_t offset = 0;
    std::vector<float> scratch;
    for (const auto& t : tensors) {
        nlohmann::json entry;
        entry["name"] = t.name;
        entry["shape"] = {t.value.rows(), t.value.cols()};
        entry["offset"] = offset;
        tensor_list.push_back(entry);
        scratch.resize(static_cast<std::size_t>(t.value.size()));
        std::size_t k = 0;
        for (int i = 0; i < t.value.rows(); ++i) {
            for (int j = 0; j < t.value.cols(); ++j) {
                scratch[k++] = static_cast<float>(t.value(i, j));
            }
        }
        blob.write(reinterpret_cast<const char*>(scratch.data()),
                   static_cast<std::streamsize>(scratch.size() * sizeof(float)));
        offset += scratch.size() * sizeof(float);
    }
    if (!blob) {
        throw DataError("save_tensor_file: write failed for " + bp.string());
    }
    manifest["tensors"] = tensor_list;

    std::ofstream out(jp);
    if (!out) {
        throw DataError("save_tensor_file: cannot open " + jp.string() + " for writing");
    }
    out << manifest.dump(2) << "\n";
    if (!out) {
        throw DataError("save_tensor_file: write failed for " + jp.string());
    }
}

TensorFile load_tensor_file(const std::string& json_path) {
    std::ifstream in(json_path);
    if (!in) {
        throw DataError("load_tensor_file: cannot open " + json_path);
    }
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("load_tensor_file: " + json_path + ": bad manifest: " + e.what());
    }
    TensorFile out;
    out.kind = manifest.value("kind", "");
    out.config = manifest.value("config", nlohmann::json::object());

    const std::filesystem::path jp(json_path);
    const std::string blob_name = manifest.value("blob", "");
    const std::filesystem::path bp = jp.parent_path() / blob_name;
    std::ifstream blob(bp, std::ios::binary);
    if (!blob) {
        throw DataError("load_tensor_file: cannot open blob " + bp.string());
    }
    for (const auto& entry : manifest.at("tensors")) {
        NamedTensor t;
        t.name = entry.at("name").get<std::string>();
        const auto shape = entry.at("shape");
        const auto rows = shape.at(0).get<long>();
        const auto cols = shape.at(1).get<long>();
        const auto offset = entry.at("offset").get<std::uint64_t>();
        blob.seekg(static_cast<std::streamoff>(offset));
        std::vector<float> scratch(static_cast<std::size_t>(rows * cols));
        blob.read(reinterpret_cast<char*>(scratch.data()),
                  static_cast<std::streamsize>(scratch.size() * sizeof(float)));
        if (!blob) {
            throw DataError("load_tensor_file: blob " + bp.string() + " truncated at tensor '" +
                            t.name + "'");
        }
        t.value.resize(rows, cols);
        std::size_t k = 0;
        for (long i = 0; i < rows; ++i) {
            for (long j = 0; j < cols; ++j) {
                t.value(i, j) = static_cast<double>(scratch[k++]);
            }
        }
        out.tensors.push_back(std::move(t));
    }
    return out;
}

} // namespace drface
