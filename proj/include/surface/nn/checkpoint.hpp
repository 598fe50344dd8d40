#pragma once

// Checkpoint layout:
//   8 bytes   magic "SBCKPT01"
//   8 bytes   header length L, unsigned little-endian
//   L bytes   UTF-8 JSON header
//             {"version":1, "model":<ModelSpec>, "metadata":{...},
//              "tensors":[{"name","shape","dtype","offset","nbytes"}, ...]}
//   blobs     raw little-endian tensor data in header order; offsets are
//             relative to the first blob byte.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "surface/error.hpp"
#include "surface/nn/model.hpp"

namespace surface::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'S', 'B', 'C', 'K', 'P', 'T', '0', '1'};
inline constexpr int kCheckpointVersion = 1;

template <class T>
constexpr const char* dtype_name() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? "f32" : "f64";
}

/// Serializes every parameter and buffer of `model`. Output bytes are a pure
/// function of the model state and metadata.
template <class T>
void save_checkpoint(Model<T>& model, const std::filesystem::path& path,
                     const nlohmann::ordered_json& metadata = nlohmann::ordered_json::object()) {
  nlohmann::ordered_json header;
  header["version"] = kCheckpointVersion;
  header["model"] = to_json(model.spec());
  header["metadata"] = metadata;
  auto entries = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  for (const auto& t : model.tensors()) {
    const std::uint64_t nbytes = t.value->size() * sizeof(T);
    entries.push_back({{"name", t.name},
                       {"shape", t.value->shape()},
                       {"dtype", dtype_name<T>()},
                       {"offset", offset},
                       {"nbytes", nbytes}});
    offset += nbytes;
  }
  header["tensors"] = std::move(entries);
  const std::string text = header.dump();
  const std::uint64_t len = text.size();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : model.tensors()) {
    out.write(reinterpret_cast<const char*>(t.value->data()), static_cast<std::streamsize>(t.value->size() * sizeof(T)));
  }
  if (!out) throw DataError("write failed for checkpoint " + path.string());
}

/// Parsed checkpoint file with tensors still in raw form.
struct CheckpointFile {
  nlohmann::json header;
  std::vector<char> blob;

  ModelSpec spec() const { return model_spec_from_json(header.at("model")); }
  const nlohmann::json& metadata() const { return header.at("metadata"); }
};

inline CheckpointFile read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = "checkpoint " + path.string() + ": ";
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    throw DataError(where + "bad magic (expected SBCKPT01)");
  }
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, sizeof len);
  if (len > bytes.size() - 16) throw DataError(where + "truncated header");
  CheckpointFile file;
  try {
    file.header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(where + "malformed header: " + e.what());
  }
  if (file.header.value("version", 0) != kCheckpointVersion) throw DataError(where + "unsupported version");
  file.blob.assign(bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len), bytes.end());
  std::uint64_t expected = 0;
  for (const auto& e : file.header.at("tensors")) expected += e.at("nbytes").get<std::uint64_t>();
  if (expected != file.blob.size()) {
    throw DataError(where + "tensor data is " + std::to_string(file.blob.size()) + " bytes, header lists " +
                    std::to_string(expected));
  }
  return file;
}

/// Copies checkpoint tensors into `model` after checking that names, shapes
/// and dtypes match its spec one-for-one. The model is untouched on error.
template <class T>
void load_checkpoint_into(Model<T>& model, const CheckpointFile& file) {
  const auto& entries = file.header.at("tensors");
  auto& tensors = model.tensors();
  if (entries.size() != tensors.size()) {
    throw DataError("checkpoint lists " + std::to_string(entries.size()) + " tensors, model has " +
                    std::to_string(tensors.size()));
  }
  std::vector<Tensor<T>> state;
  state.reserve(tensors.size());
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& e = entries[i];
    const std::string name = e.at("name");
    if (name != tensors[i].name) {
      throw DataError("checkpoint tensor " + std::to_string(i) + " is '" + name + "', model expects '" +
                      tensors[i].name + "'");
    }
    if (e.at("dtype").get<std::string>() != dtype_name<T>()) throw DataError("checkpoint dtype mismatch for " + name);
    const Shape shape = e.at("shape").get<Shape>();
    if (shape != tensors[i].value->shape()) throw DataError("checkpoint shape mismatch for " + name);
    const std::uint64_t offset = e.at("offset"), nbytes = e.at("nbytes");
    if (nbytes != shape_size(shape) * sizeof(T) || offset + nbytes > file.blob.size()) {
      throw DataError("checkpoint extent invalid for " + name);
    }
    std::vector<T> data(shape_size(shape));
    std::memcpy(data.data(), file.blob.data() + offset, nbytes);
    state.emplace_back(shape, std::move(data));
  }
  model.load_state(state);
}

template <class T>
void load_checkpoint_into(Model<T>& model, const std::filesystem::path& path) {
  load_checkpoint_into(model, read_checkpoint_file(path));
}

/// Rebuilds the model described by the checkpoint header and loads it.
template <class T>
std::unique_ptr<Model<T>> load_checkpoint(const std::filesystem::path& path, nlohmann::json* metadata = nullptr) {
  const CheckpointFile file = read_checkpoint_file(path);
  ModelSpec spec;
  try {
    spec = file.spec();
  } catch (const std::exception& e) {
    throw DataError("checkpoint " + path.string() + ": bad model spec: " + e.what());
  }
  auto model = std::make_unique<Model<T>>(spec);
  load_checkpoint_into(*model, file);
  if (metadata) *metadata = file.metadata();
  return model;
}

}  // namespace surface::nn
