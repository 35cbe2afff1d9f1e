#include "detail/log.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace irwbc::log {

void configure_from_env() {
  auto logger = spdlog::get("irwbc");
  if (!logger) logger = spdlog::stderr_color_mt("irwbc");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("IRWBC_LOG");
  const std::string level = env ? env : "warn";
  if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else if (level == "info") {
    spdlog::set_level(spdlog::level::info);
  } else if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "off") {
    spdlog::set_level(spdlog::level::off);
  } else {
    spdlog::set_level(spdlog::level::warn);
  }
}

}  // namespace irwbc::log
