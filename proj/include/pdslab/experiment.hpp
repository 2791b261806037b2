#pragma once

// Versioned JSON experiment configs, the config runner, and mean/std tables
// over result CSVs.

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdslab/pipeline.hpp"

namespace pdslab {

inline constexpr int kConfigVersion = 1;

struct ExperimentConfig {
  int version = kConfigVersion;
  SweepGrid grid;
  std::string output = "results.csv";
};

/// Rejects unknown fields (naming them), duplicate seeds, missing presets and
/// inconsistent combinations with ValidationError.
ExperimentConfig parse_config(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

/// results.csv -> results.md
std::string summary_path_for(const std::string& csv_path);

/// Runs the sweep, writes the CSV and a markdown summary next to it. Returns
/// 0 on success, 2 on validation errors, 3 on runtime errors (including
/// failed cells, which are reported on `log`).
/// `seed_override` replaces the config's seed list with a single seed.
int run_config(const std::string& path, std::ostream& log, int threads = 0,
               const std::string& output_override = "",
               std::optional<std::uint64_t> seed_override = std::nullopt);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
CsvTable parse_csv(std::istream& in);

struct GroupStats {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single row
  std::size_t count = 0;
};

struct TableSummary {
  std::string group_by;
  std::vector<std::string> groups;   // in ascending numeric (else lexical) order
  std::vector<std::string> methods;  // in order of first appearance
  std::map<std::pair<std::string, std::string>, GroupStats> cells;  // (group, method)
  std::string value_column = "subopt_mean";
};

/// Throws ValidationError listing every missing column.
TableSummary summarize(const CsvTable& table, const std::string& group_by,
                       const std::string& value_column = "subopt_mean");

/// Non-oracle methods bolded when within one pooled standard deviation of the
/// best (lowest) non-oracle mean in the row.
std::vector<std::string> bolded_methods(const TableSummary& s, const std::string& group);

std::string render_markdown(const TableSummary& s);
std::string render_summary_csv(const TableSummary& s);

std::string emit_table(const std::string& csv_path, const std::string& group_by = "n1",
                       const std::string& format = "md");

}  // namespace pdslab
