#include "hkrm/logger.hpp"

#include "hkrm/error.hpp"

namespace hkrm {

LogFormat log_format_from_string(std::string_view s) {
  if (s == "text") return LogFormat::text;
  if (s == "json") return LogFormat::json;
  throw DomainError("unknown log format '" + std::string(s) + "' (expected text|json)");
}

std::string to_string(LogLevel level) {
  switch (level) {
    case LogLevel::debug: return "debug";
    case LogLevel::info: return "info";
    case LogLevel::warn: return "warn";
    case LogLevel::error: return "error";
  }
  return "info";
}

void Logger::log(LogLevel level, std::string_view event, const nlohmann::json& fields) {
  if (level < min_level_) return;
  if (format_ == LogFormat::json) {
    nlohmann::json line = {{"level", to_string(level)}, {"event", event}};
    if (fields.is_object())
      for (const auto& [k, v] : fields.items()) line[k] = v;
    *out_ << line.dump() << '\n';
  } else {
    *out_ << '[' << to_string(level) << "] " << event;
    if (fields.is_object()) {
      for (const auto& [k, v] : fields.items())
        *out_ << ' ' << k << '=' << (v.is_string() ? v.get<std::string>() : v.dump());
    }
    *out_ << '\n';
  }
  out_->flush();
}

}  // namespace hkrm
