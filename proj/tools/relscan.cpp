#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "relscan/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"relscan: related-domain attack surface scanner"};
  app.require_subcommand(1);

  auto* scan = app.add_subcommand("scan", "run a scan described by a config file");
  std::string config_path;
  bool offline = false;
  std::string format = "structured";
  std::optional<std::uint64_t> seed;
  std::string deny_list;
  std::string output;
  scan->add_option("--config", config_path, "config file (key = value lines)")->required();
  scan->add_flag("--offline", offline, "use fixture backends only");
  scan->add_option("--format", format, "report format")
      ->check(CLI::IsMember({"structured", "human"}));
  scan->add_option("--seed", seed, "overrides the config seed");
  scan->add_option("--deny-list", deny_list, "apexes to skip entirely");
  scan->add_option("-o,--output", output, "write the report here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  relscan::ScanOutcome outcome;
  try {
    relscan::ScanConfig config = relscan::load_config(config_path);
    if (offline) config.offline = true;
    if (seed) config.seed = *seed;
    if (!deny_list.empty()) config.deny_list_path = deny_list;
    outcome = relscan::run_scan(config);
  } catch (const relscan::ConfigError& e) {
    std::cerr << "relscan: config error: " << e.what() << "\n";
    return 1;
  }

  const auto fmt = format == "human" ? relscan::ReportFormat::kHuman
                                     : relscan::ReportFormat::kStructured;
  const std::string text = relscan::emit_report(outcome.report, fmt);
  if (output.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(output, std::ios::binary);
    out << text;
    if (!out) {
      std::cerr << "relscan: cannot write " << output << "\n";
      return 1;
    }
  }
  return outcome.exit_code;
}
