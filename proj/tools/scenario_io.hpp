#pragma once

#include <filesystem>
#include <string>

#include "irwbc/sim/scenario.hpp"

namespace irwbc::cli {

struct Outputs {
  std::string csv;
  std::string svg;
};

struct LoadedScenario {
  Scenario scenario;
  Outputs outputs;
  std::filesystem::path model_path;
};

/// Parses a scenario document. A relative model path is looked up in the
/// working directory first, then next to the scenario file (`base_dir`).
/// Throws ParseError / ValidationError.
LoadedScenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir);

/// Reads and parses a scenario file; ParseError names the path when it
/// cannot be opened.
LoadedScenario load_scenario(const std::filesystem::path& path);

}  // namespace irwbc::cli
