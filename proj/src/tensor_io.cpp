#include "hkrm/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "hkrm/error.hpp"

namespace hkrm {

namespace {

void put_f64(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>(bits & 0xffu));
    bits >>= 8;
  }
}

double get_f64(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
  return std::bit_cast<double>(bits);
}

}  // namespace

std::string frame_payload(const nlohmann::json& header, std::span<const double> payload) {
  nlohmann::json h = header;
  h["payload_values"] = payload.size();
  std::string out = h.dump();
  out.push_back('\n');
  out.reserve(out.size() + payload.size() * 8);
  for (double v : payload) put_f64(out, v);
  return out;
}

Framed unframe_payload(std::string_view bytes, std::string_view expected_format,
                       int supported_version) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) throw FormatError("missing header line (truncated file?)");
  Framed f;
  try {
    f.header = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("unreadable header: ") + e.what());
  }
  if (!f.header.is_object() || !f.header.contains("format") || !f.header["format"].is_string())
    throw FormatError("header has no format field");
  if (f.header["format"].get<std::string>() != expected_format) {
    throw FormatError("expected format '" + std::string(expected_format) + "', found '" +
                      f.header["format"].get<std::string>() + "'");
  }
  if (!f.header.contains("version") || !f.header["version"].is_number_integer())
    throw FormatError("header has no version field");
  const int version = f.header["version"].get<int>();
  if (version != supported_version) {
    throw FormatError("unsupported " + std::string(expected_format) + " version " +
                      std::to_string(version) + " (this build reads version " +
                      std::to_string(supported_version) + ")");
  }
  if (!f.header.contains("payload_values") || !f.header["payload_values"].is_number_unsigned())
    throw FormatError("header has no payload_values field");
  const auto n = f.header["payload_values"].get<std::size_t>();
  const std::string_view payload = bytes.substr(nl + 1);
  if (payload.size() != n * 8) {
    throw FormatError("payload is " + std::to_string(payload.size()) + " bytes, header declares " +
                      std::to_string(n) + " float64 values (" + std::to_string(n * 8) +
                      " bytes)");
  }
  f.payload.resize(n);
  const auto* p = reinterpret_cast<const unsigned char*>(payload.data());
  for (std::size_t i = 0; i < n; ++i) f.payload[i] = get_f64(p + 8 * i);
  return f;
}

const Matrix* TensorArchive::find(std::string_view name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t.value;
  return nullptr;
}

const Matrix& TensorArchive::at(std::string_view name) const {
  if (const Matrix* m = find(name)) return *m;
  throw FormatError("archive has no tensor named '" + std::string(name) + "'");
}

std::string encode_archive(const TensorArchive& archive) {
  nlohmann::json header;
  header["format"] = TensorArchive::kFormat;
  header["version"] = TensorArchive::kVersion;
  header["meta"] = archive.meta;
  header["tensors"] = nlohmann::json::array();
  std::vector<double> payload;
  for (const auto& t : archive.tensors) {
    header["tensors"].push_back(
        {{"name", t.name}, {"shape", {t.value.rows(), t.value.cols()}}, {"offset", payload.size()}});
    payload.insert(payload.end(), t.value.values().begin(), t.value.values().end());
  }
  return frame_payload(header, payload);
}

TensorArchive decode_archive(std::string_view bytes) {
  Framed f = unframe_payload(bytes, TensorArchive::kFormat, TensorArchive::kVersion);
  TensorArchive archive;
  if (f.header.contains("meta")) archive.meta = f.header["meta"];
  if (!f.header.contains("tensors") || !f.header["tensors"].is_array())
    throw FormatError("archive header has no tensor table");
  try {
    for (const auto& entry : f.header["tensors"]) {
      const auto rows = entry.at("shape").at(0).get<std::size_t>();
      const auto cols = entry.at("shape").at(1).get<std::size_t>();
      const auto offset = entry.at("offset").get<std::size_t>();
      if (offset + rows * cols > f.payload.size())
        throw FormatError("tensor '" + entry.at("name").get<std::string>() + "' overruns payload");
      std::vector<double> data(f.payload.begin() + static_cast<std::ptrdiff_t>(offset),
                               f.payload.begin() + static_cast<std::ptrdiff_t>(offset + rows * cols));
      archive.tensors.push_back({entry.at("name").get<std::string>(), Matrix(rows, cols, std::move(data))});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed tensor table: ") + e.what());
  }
  return archive;
}

void save_archive(const std::filesystem::path& path, const TensorArchive& archive) {
  write_file_atomic(path, encode_archive(archive));
}

TensorArchive load_archive(const std::filesystem::path& path) {
  return decode_archive(read_file(path));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
  }
}

}  // namespace hkrm
