#include "commands.hpp"

#include <fstream>
#include <future>
#include <iostream>

#include <CLI11.hpp>

#include "irwbc/errors.hpp"
#include "irwbc/log.hpp"

namespace irwbc::cli {

namespace fs = std::filesystem;

namespace {

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path.string() + "'");
  return f;
}

struct VariantRun {
  VariantReport report;
  RunResult result;
};

VariantRun run_variant(const Scenario& scenario, Variant variant, const fs::path& csv_path) {
  VariantRun run;
  try {
    std::ofstream csv = open_output(csv_path);
    CsvWriter writer(csv, *scenario.model);
    run.result = run_scenario(scenario, variant, [&](const StepRecord& r) { writer.write(r); });
    run.report.metrics = run.result.metrics;
    for (const auto& ev : run.result.log.events) run.report.impact_h.push_back(ev.h_at_impact);
    run.report.pre_push_errors = run.result.pre_push_errors;
  } catch (const std::exception& e) {
    run.report.status = e.what();
  }
  return run;
}

}  // namespace

int run_command(const RunOptions& opts, std::ostream& out, std::ostream& err) {
  LoadedScenario loaded;
  try {
    loaded = load_scenario(opts.config);
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  const std::string stem = fs::path(opts.config).stem().string() + "_" + std::string(to_string(opts.variant));
  const fs::path csv_path = !opts.csv.empty()             ? fs::path(opts.csv)
                            : !loaded.outputs.csv.empty() ? fs::path(loaded.outputs.csv)
                                                          : fs::path(stem + ".csv");
  const fs::path svg_path = !opts.svg.empty()             ? fs::path(opts.svg)
                            : !loaded.outputs.svg.empty() ? fs::path(loaded.outputs.svg)
                                                          : fs::path(stem + ".svg");
  try {
    std::ofstream csv = open_output(csv_path);
    CsvWriter writer(csv, *loaded.scenario.model);
    const RunResult result =
        run_scenario(loaded.scenario, opts.variant, [&](const StepRecord& r) { writer.write(r); });
    std::ofstream svg = open_output(svg_path);
    const auto& cfg = loaded.scenario.controller;
    write_svg(svg, {{std::string(to_string(opts.variant)), "#1f77b4", &result.log}}, cfg.u_lower, cfg.u_upper);
    out << metrics_json(result.metrics).dump() << '\n';
  } catch (const std::exception& e) {
    err << "simulation error: " << e.what() << '\n';
    return kSimulationError;
  }
  return kOk;
}

ComparisonReport compare_variants(const Scenario& nominal, const Scenario& robust, const fs::path& dir) {
  fs::create_directories(dir);
  auto nominal_job = std::async(std::launch::async, run_variant, std::cref(nominal), Variant::Nominal,
                                dir / "nominal.csv");
  VariantRun r = run_variant(robust, Variant::ImpactRobust, dir / "robust.csv");
  VariantRun n = nominal_job.get();

  std::vector<SvgSeries> series;
  if (n.report.ok()) series.push_back({"nominal", "#d62728", &n.result.log});
  if (r.report.ok()) series.push_back({"robust", "#1f77b4", &r.result.log});
  {
    std::ofstream svg = open_output(dir / "compare.svg");
    write_svg(svg, series, robust.controller.u_lower, robust.controller.u_upper);
  }
  ComparisonReport report = ComparisonReport::build(std::move(n.report), std::move(r.report));
  std::ofstream json_out = open_output(dir / "report.json");
  json_out << to_json(report).dump(2) << '\n';
  return report;
}

int compare_command(const CompareOptions& opts, std::ostream& out, std::ostream& err) {
  LoadedScenario loaded;
  try {
    loaded = load_scenario(opts.config);
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  ComparisonReport report;
  try {
    report = compare_variants(loaded.scenario, loaded.scenario, opts.out);
  } catch (const std::exception& e) {
    err << "simulation error: " << e.what() << '\n';
    return kSimulationError;
  }
  nlohmann::json summary{{"nominal", report.nominal.status}, {"robust", report.robust.status}};
  summary["reduction_percent"] =
      report.reduction_percent ? nlohmann::json(*report.reduction_percent) : nlohmann::json(nullptr);
  out << summary.dump() << '\n';
  if (!report.nominal.ok() || !report.robust.ok()) {
    err << "partial failure:";
    if (!report.nominal.ok()) err << " nominal: " << report.nominal.status << ';';
    if (!report.robust.ok()) err << " robust: " << report.robust.status << ';';
    err << '\n';
    return kSimulationError;
  }
  return kOk;
}

int cli_main(int argc, char** argv) {
  log::configure_from_env();
  CLI::App app{"Impact-robust whole-body control simulator"};
  app.require_subcommand(1);

  RunOptions run;
  std::string variant = "robust";
  auto* run_cmd = app.add_subcommand("run", "Simulate one controller variant");
  run_cmd->add_option("--config", run.config, "Scenario JSON")->required();
  run_cmd->add_option("--variant", variant, "nominal or robust")
      ->check(CLI::IsMember({"nominal", "robust"}));
  run_cmd->add_option("--csv", run.csv, "CSV log path");
  run_cmd->add_option("--svg", run.svg, "SVG plot path");

  CompareOptions compare;
  auto* cmp_cmd = app.add_subcommand("compare", "Run nominal and robust variants side by side");
  cmp_cmd->add_option("--config", compare.config, "Scenario JSON")->required();
  cmp_cmd->add_option("--out", compare.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  if (*run_cmd) {
    run.variant = variant == "nominal" ? Variant::Nominal : Variant::ImpactRobust;
    return run_command(run, std::cout, std::cerr);
  }
  return compare_command(compare, std::cout, std::cerr);
}

}  // namespace irwbc::cli
