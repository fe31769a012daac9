#pragma once

#include <ostream>
#include <string>
#include <string_view>

#include "json.hpp"

namespace hkrm {

enum class LogFormat { text, json };
enum class LogLevel { debug, info, warn, error };

LogFormat log_format_from_string(std::string_view s);
std::string to_string(LogLevel level);

// Structured event logger. JSON mode writes one object per line:
//   {"level":"info","event":"epoch","epoch":3,...}
// Text mode writes "[info] epoch epoch=3 ...".
class Logger {
 public:
  Logger(std::ostream& out, LogFormat format, LogLevel min_level = LogLevel::info)
      : out_(&out), format_(format), min_level_(min_level) {}

  void log(LogLevel level, std::string_view event, const nlohmann::json& fields = nlohmann::json::object());
  void debug(std::string_view event, const nlohmann::json& fields = nlohmann::json::object()) {
    log(LogLevel::debug, event, fields);
  }
  void info(std::string_view event, const nlohmann::json& fields = nlohmann::json::object()) {
    log(LogLevel::info, event, fields);
  }
  void warn(std::string_view event, const nlohmann::json& fields = nlohmann::json::object()) {
    log(LogLevel::warn, event, fields);
  }
  void error(std::string_view event, const nlohmann::json& fields = nlohmann::json::object()) {
    log(LogLevel::error, event, fields);
  }

 private:
  std::ostream* out_;
  LogFormat format_;
  LogLevel min_level_;
};

}  // namespace hkrm
