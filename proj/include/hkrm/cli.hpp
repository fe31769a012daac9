#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace hkrm {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitNumeric = 3,
};

// Runs one CLI invocation. `args` excludes the program name. Regular output
// goes to `out`, usage text and log lines to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hkrm
