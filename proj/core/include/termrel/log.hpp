#pragma once

#include <string>

namespace termrel {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

// Level comes from the TERMREL_LOG environment variable (error|info|debug,
// default info) and is read once per process.
LogLevel log_level();

void log_error(const std::string& msg);
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace termrel
