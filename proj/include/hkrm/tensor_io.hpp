#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hkrm/matrix.hpp"
#include "json.hpp"

namespace hkrm {

// Binary files used by this project share one framing:
//
//   <header JSON, compact, keys sorted> '\n' <payload>
//
// The payload is a sequence of IEEE-754 binary64 values in little-endian byte
// order. The header always carries "format", "version" and "payload_values";
// readers reject a different format string, an unknown version, or a payload
// whose byte length is not exactly 8 * payload_values.
std::string frame_payload(const nlohmann::json& header, std::span<const double> payload);

struct Framed {
  nlohmann::json header;
  std::vector<double> payload;
};
Framed unframe_payload(std::string_view bytes, std::string_view expected_format,
                       int supported_version);

struct NamedTensor {
  std::string name;
  Matrix value;
};

// Named tensors plus free-form metadata. Header of the "hkrm-tensors" format:
//   {"format":"hkrm-tensors","version":1,"meta":{...},"payload_values":N,
//    "tensors":[{"name":..., "shape":[rows, cols], "offset":k}, ...]}
// where offset counts float64 values from the start of the payload.
struct TensorArchive {
  static constexpr int kVersion = 1;
  static constexpr const char* kFormat = "hkrm-tensors";

  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const Matrix* find(std::string_view name) const;
  const Matrix& at(std::string_view name) const;
};

std::string encode_archive(const TensorArchive& archive);
TensorArchive decode_archive(std::string_view bytes);
void save_archive(const std::filesystem::path& path, const TensorArchive& archive);
TensorArchive load_archive(const std::filesystem::path& path);

// Whole-file helpers. write_file_atomic writes a sibling temp file and renames
// it over the destination.
std::string read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace hkrm
