#include "caloricflow/cli.hpp"

#include "caloricflow/experiments.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>

namespace caloricflow::cli {

namespace {

/// Turns the unparsed tail (`--a.b=v`, or `--a.b v`) into `a.b=v` overrides.
std::vector<std::string> collect_overrides(const std::vector<std::string>& extras) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& tok = extras[i];
    if (tok.rfind("--", 0) != 0 || tok.size() < 3) throw ConfigError("unexpected argument '" + tok + "'");
    const std::string body = tok.substr(2);
    if (body.find('=') != std::string::npos) {
      out.push_back(body);
    } else if (i + 1 < extras.size() && extras[i + 1].rfind("--", 0) != 0) {
      out.push_back(body + "=" + extras[++i]);
    } else {
      throw ConfigError("override '" + tok + "' has no value");
    }
  }
  return out;
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void print_summary(const RunReport& r, std::ostream& out) {
  for (const Check& c : r.checks) {
    out << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << " = " << format_value(c.value);
    switch (c.comparator) {
      case Comparator::AtMost: out << " (<= " << format_value(c.threshold) << ")"; break;
      case Comparator::AtLeast: out << " (>= " << format_value(c.threshold) << ")"; break;
      case Comparator::Finite: out << " (finite)"; break;
      case Comparator::Report: out << " (reported)"; break;
    }
    out << "  [" << c.anchor << "]\n";
  }
  const auto failed = std::count_if(r.checks.begin(), r.checks.end(), [](const Check& c) { return !c.pass; });
  out << r.experiment << ": " << r.checks.size() - static_cast<std::size_t>(failed) << "/" << r.checks.size()
      << " checks pass\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Harmonic map heat flow, caloric gauge and wave maps into hyperbolic space"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<CLI::App*> commands;
  for (const char* name : {"heatflow", "gauge", "energyspace", "wavemap", "verify", "converge"}) {
    CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " experiment");
    sub->add_option("--config", config_path, "JSON configuration file")->required();
    sub->allow_extras();
    sub->footer("Any further --dotted.key=value overrides the configuration, e.g. --grid.n=256.");
    commands.push_back(sub);
  }

  std::vector<std::string> argv_storage{"caloricflow"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  CLI::App* chosen = nullptr;
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
    for (CLI::App* sub : commands)
      if (sub->parsed()) chosen = sub;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kAllPass;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }

  ExperimentConfig cfg;
  try {
    const std::vector<std::string> overrides = collect_overrides(chosen->remaining());
    cfg = load_config(config_path, overrides);
    cfg.experiment = experiment_from_string(chosen->get_name());
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  RunReport report;
  try {
    report = run_experiment(cfg);
    write_artifacts(report, cfg.output_dir);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "compute fault: " << e.what() << "\n";
    return kComputeFault;
  }
  print_summary(report, out);
  out << "artifacts written to " << cfg.output_dir << "\n";
  return report.all_pass() ? kAllPass : kCheckFailed;
}

}  // namespace caloricflow::cli
