/// @file experiments.hpp
/// @brief Experiment drivers behind the command line: each runs the relevant module operations on the
/// configured data, records threshold checks, and collects CSV rows and field files for export.
///
/// CSV files have the fixed header `t,s,quantity,value`; `t` is the wave time and `s` the heat time,
/// and either is left empty when it does not apply. There is one file per diagnostic family.
#pragma once

#include "caloricflow/config.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace caloricflow::cli {

enum class Comparator { AtMost, AtLeast, Finite, Report };

struct Check {
  std::string name;
  std::string anchor;  ///< the identity or inequality being measured
  double value = 0;
  double threshold = 0;
  Comparator comparator = Comparator::Report;
  bool pass = true;
};

struct CsvRow {
  std::optional<double> t, s;
  std::string quantity;
  double value = 0;
};

struct FieldArtifact {
  std::string stem;
  Field field;
  std::optional<AmbientVec> at_infinity;
};

struct RunReport {
  std::string experiment;
  nlohmann::json config;
  std::vector<Check> checks;
  std::vector<std::pair<std::string, double>> timings;  ///< seconds per stage
  std::map<std::string, std::vector<CsvRow>> csv;       ///< family -> rows
  std::vector<FieldArtifact> fields;
  nlohmann::json tables = nlohmann::json::object();     ///< structured extras, e.g. order tables

  bool all_pass() const;
  /// Adds a thresholded row. value <= threshold (AtMost) or value >= threshold (AtLeast).
  void require(std::string name, std::string anchor, double value, double threshold, Comparator cmp);
  /// Adds a row that passes iff the value is finite.
  void require_finite(std::string name, std::string anchor, double value);
  /// Adds an informational row (passes unless the value is NaN).
  void report(std::string name, std::string anchor, double value);
  /// Appends the checks, timings, CSV families and fields of another report, prefixing check names.
  void merge(const RunReport& other, const std::string& prefix);
  /// Everything except field data. Timings are kept apart from the deterministic content.
  nlohmann::json to_json() const;
};

RunReport cmd_heatflow(const ExperimentConfig& c);
RunReport cmd_gauge(const ExperimentConfig& c);
RunReport cmd_energyspace(const ExperimentConfig& c);
RunReport cmd_wavemap(const ExperimentConfig& c);
/// Gagliardo-Nirenberg and Strichartz ratios over a seeded corpus of 20 band-limited fields; each ratio's
/// max/min spread over the corpus is checked against 10 (constants themselves are only reported).
RunReport cmd_inequalities(const ExperimentConfig& c);
/// All of the above plus the seeded functional-inequality corpus.
RunReport cmd_verify_all(const ExperimentConfig& c);

struct OrderTable {
  std::string check;
  std::string anchor;
  std::vector<int> resolutions;
  std::vector<double> h, values;
  double order = 0;  ///< least-squares slope of log(value) against log(h); NaN when every value is zero
  double floor = 0;
  double ceiling = 0;  ///< +inf unless the order is expected inside a band
  bool pass = false;   ///< order within [floor, ceiling], or all values exactly zero
};

/// Runs one refinement study on c.converge.resolutions (grid.L, data recipe and wave duration from c).
OrderTable convergence_table(const ExperimentConfig& c, const std::string& check);
RunReport cmd_convergence(const ExperimentConfig& c, const std::string& check);

/// Dispatches on c.experiment.
RunReport run_experiment(const ExperimentConfig& c);

std::string csv_text(const std::vector<CsvRow>& rows);
/// report.json, one CSV per family and the field files, each written atomically.
void write_artifacts(const RunReport& r, const std::filesystem::path& dir);

}  // namespace caloricflow::cli
