#pragma once

#include "ellmpc/mpc_sim.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ellmpc {

/// Parse or validation failure in a scenario document. what() reads
/// "source:line: field: message".
class ScenarioError : public std::invalid_argument {
 public:
  ScenarioError(const std::string& source, int line, const std::string& field, const std::string& message);

  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

struct ScenarioFile {
  std::string name;
  Scenario scenario;
  RunSettings settings;
};

/// Parses a scenario document. Relative map files are resolved against `base_dir`.
ScenarioFile parse_scenario(std::string_view text, const std::string& source = "<scenario>",
                            const std::filesystem::path& base_dir = {});
ScenarioFile load_scenario(const std::filesystem::path& path);

inline constexpr int kSummarySchemaVersion = 1;

/// Shortest round-trip decimal form; "nan", "inf", "-inf" for non-finite values.
std::string format_number(double value);
/// RFC 4180 field: quoted when it contains a comma, quote, CR or LF.
std::string csv_field(std::string_view text);

void write_trajectory_csv(std::ostream& out, const RunLog& log);
void write_clearances_csv(std::ostream& out, const RunLog& log);
nlohmann::ordered_json run_summary(const ScenarioFile& file, const RunLog& log);

void write_comparison_csv(std::ostream& out, const ComparisonResult& result);
/// Fraction of valid records whose relative additional cost exceeds x, per restricted mode.
void write_exceedance_csv(std::ostream& out, const ComparisonResult& result);
/// Per-step solve times with two SQP iterations (wall clock, not reproducible).
void write_timing_csv(std::ostream& out, const ComparisonResult& result);
nlohmann::ordered_json comparison_summary(const ScenarioFile& file, const ComparisonResult& result);

void write_path_csv(std::ostream& out, const PathPolyline& path);
void write_reference_csv(std::ostream& out, const ReferenceTrajectory& reference);

}  // namespace ellmpc
