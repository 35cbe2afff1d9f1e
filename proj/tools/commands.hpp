#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "output.hpp"
#include "scenario_io.hpp"

namespace irwbc::cli {

enum ExitCode { kOk = 0, kConfigError = 2, kSimulationError = 3 };

struct RunOptions {
  std::string config;
  Variant variant = Variant::ImpactRobust;
  std::string csv;  ///< empty: outputs.csv from the config, else <stem>_<variant>.csv
  std::string svg;
};

struct CompareOptions {
  std::string config;
  std::string out = ".";
};

int run_command(const RunOptions& opts, std::ostream& out, std::ostream& err);
int compare_command(const CompareOptions& opts, std::ostream& out, std::ostream& err);

/// Runs both variants (concurrently) and writes nominal.csv, robust.csv,
/// compare.svg and report.json into `dir`. A variant that fails is
/// reported with its error message; the other one is still emitted.
ComparisonReport compare_variants(const Scenario& nominal, const Scenario& robust,
                                  const std::filesystem::path& dir);

/// Parses argv with the `run` / `compare` grammar and dispatches.
int cli_main(int argc, char** argv);

}  // namespace irwbc::cli
