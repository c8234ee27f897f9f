#pragma once

#include <string_view>

namespace ckrl {

enum class LogLevel { Info, Warning };

// Minimal stderr logger; quiet mode silences Info lines.
void log(LogLevel level, std::string_view message);
void set_quiet(bool quiet);

inline void log_info(std::string_view m) { log(LogLevel::Info, m); }
inline void log_warning(std::string_view m) { log(LogLevel::Warning, m); }

}  // namespace ckrl
