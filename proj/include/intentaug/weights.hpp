#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "intentaug/tensor.hpp"

namespace intentaug {

// Binary tensor blob:
//   "IAWB" | u32 version | u64 count |
//   count x ( u32 name_len | name | u8 scalar_bytes (4|8) | u64 rows | u64 cols | row-major data )
// Little-endian, as written by the host.
inline constexpr char kWeightsMagic[4] = {'I', 'A', 'W', 'B'};
inline constexpr std::uint32_t kWeightsVersion = 1;

namespace detail {

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::filesystem::path& file) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw CheckpointError("corrupt weights file (truncated): " + file.string());
  return value;
}

}  // namespace detail

// `model` must provide visit(fn(name, Parameter<Scalar>&)).
template <typename Scalar, typename Model>
void save_weights(Model& model, const std::filesystem::path& file) {
  std::vector<std::pair<std::string, const Parameter<Scalar>*>> params;
  model.visit([&](const std::string& name, Parameter<Scalar>& p) { params.emplace_back(name, &p); });

  std::ofstream out(file, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + file.string());
  out.write(kWeightsMagic, 4);
  detail::write_pod(out, kWeightsVersion);
  detail::write_pod(out, static_cast<std::uint64_t>(params.size()));
  for (const auto& [name, p] : params) {
    detail::write_pod(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_pod(out, static_cast<std::uint8_t>(sizeof(Scalar)));
    detail::write_pod(out, static_cast<std::uint64_t>(p->value.rows()));
    detail::write_pod(out, static_cast<std::uint64_t>(p->value.cols()));
    for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) detail::write_pod(out, p->value(r, c));
    }
  }
  if (!out) throw CheckpointError("I/O failure writing " + file.string());
}

struct WeightsLoadOptions {
  bool require_all = true;      // every model parameter must be present
  bool ignore_unknown = false;  // tolerate tensors the model does not have
};

// Reads tensors into the matching parameters, converting precision when the
// file was written with a different scalar type.
template <typename Scalar, typename Model>
void load_weights(Model& model, const std::filesystem::path& file, WeightsLoadOptions options = {}) {
  std::map<std::string, Parameter<Scalar>*> params;
  model.visit([&](const std::string& name, Parameter<Scalar>& p) { params.emplace(name, &p); });

  std::ifstream in(file, std::ios::binary);
  if (!in) throw CheckpointError("missing weights file: " + file.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kWeightsMagic, 4) != 0) {
    throw CheckpointError("corrupt weights file (bad magic): " + file.string());
  }
  const auto version = detail::read_pod<std::uint32_t>(in, file);
  if (version != kWeightsVersion) {
    throw CheckpointError("weights format version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kWeightsVersion) + ")");
  }
  const auto count = detail::read_pod<std::uint64_t>(in, file);
  std::set<std::string> seen;
  for (std::uint64_t t = 0; t < count; ++t) {
    const auto name_len = detail::read_pod<std::uint32_t>(in, file);
    if (name_len > 4096) throw CheckpointError("corrupt weights file (name length): " + file.string());
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto bytes = detail::read_pod<std::uint8_t>(in, file);
    const auto rows = detail::read_pod<std::uint64_t>(in, file);
    const auto cols = detail::read_pod<std::uint64_t>(in, file);
    if (bytes != 4 && bytes != 8) throw CheckpointError("corrupt weights file (scalar size): " + file.string());
    if (rows > (1u << 24) || cols > (1u << 24) || rows * cols > (1ull << 32)) {
      throw CheckpointError("corrupt weights file (tensor shape): " + file.string());
    }

    auto it = params.find(name);
    Matrix<Scalar>* target = nullptr;
    if (it == params.end()) {
      if (!options.ignore_unknown) throw CheckpointError("unexpected tensor '" + name + "' in " + file.string());
    } else {
      target = &it->second->value;
      if (static_cast<std::uint64_t>(target->rows()) != rows || static_cast<std::uint64_t>(target->cols()) != cols) {
        throw CheckpointError("shape mismatch for '" + name + "': model expects " + std::to_string(target->rows()) +
                              "x" + std::to_string(target->cols()) + ", file has " + std::to_string(rows) + "x" +
                              std::to_string(cols));
      }
      seen.insert(name);
    }
    std::vector<char> buffer(rows * cols * bytes);
    in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    if (!in) throw CheckpointError("corrupt weights file (truncated): " + file.string());
    if (target) {
      for (std::uint64_t i = 0; i < rows * cols; ++i) {
        Scalar v;
        if (bytes == 4) {
          float f;
          std::memcpy(&f, buffer.data() + i * 4, 4);
          v = static_cast<Scalar>(f);
        } else {
          double d;
          std::memcpy(&d, buffer.data() + i * 8, 8);
          v = static_cast<Scalar>(d);
        }
        (*target)(static_cast<Eigen::Index>(i / cols), static_cast<Eigen::Index>(i % cols)) = v;
      }
    }
  }
  if (options.require_all) {
    for (const auto& [name, p] : params) {
      if (!seen.count(name)) throw CheckpointError("weights file lacks tensor '" + name + "'");
    }
  }
}

}  // namespace intentaug
