#pragma once

// File formats used by the command-line front-end: long-format dataset CSV,
// the JSON run configuration, the columnar trace with its JSON sidecar, and
// the summary artifacts.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ar1dp/inference.hpp"
#include "ar1dp/mixture_model.hpp"
#include "ar1dp/summaries.hpp"

namespace ar1dp::io {

/// Bad or inconsistent configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Unreadable or malformed data (CLI exit code 3).
class DataError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string artifact_version();

/// "# ar1dp <version> config_hash=<hash>" provenance line for CSV outputs.
std::string provenance_comment(const std::string& config_hash);

// ---------------------------------------------------------------------------
// Dataset CSV: header `time,unit,value` plus optional `true_cluster` and
// covariate columns. Lines starting with '#' are comments. Time values are
// ordered numerically when they all parse as numbers, otherwise by first
// appearance; units are ordered by first appearance. Every (time, unit)
// pair must appear exactly once.

struct DatasetCsv {
  Dataset dataset;
  std::optional<Matrix<int>> true_cluster;  // T x n if the column was present
};

DatasetCsv read_dataset_csv(const std::filesystem::path& path,
                            const std::vector<std::string>& covariate_columns = {});
DatasetCsv parse_dataset_csv(std::istream& in, const std::vector<std::string>& covariate_columns,
                             const std::string& source_name);

void write_dataset_csv(std::ostream& out, const Dataset& data, const Matrix<int>* true_cluster,
                       const std::string& config_hash);

// ---------------------------------------------------------------------------
// Run configuration (JSON)

struct RunConfig {
  std::string preset;  // "", "applications" or "simulation"
  std::filesystem::path data_path;
  std::filesystem::path output_dir;
  std::vector<std::string> covariates;
  PriorSpec prior;
  MCMCConfig mcmc;
  std::string trace_format = "binary";
};

/// Parses a configuration object; unknown keys and bad values throw
/// ConfigError. Relative data paths are resolved against `base_dir`.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig read_run_config(const std::filesystem::path& path);

/// Every setting, defaults included, in the same schema parse_run_config reads.
nlohmann::json resolved_config_json(const RunConfig& config);

/// Hash of the resolved configuration.
std::string config_hash(const RunConfig& config);

// ---------------------------------------------------------------------------
// Trace files

inline constexpr int kTraceSchemaVersion = 1;

/// Writes <stem>.json (sidecar index) and <stem>.bin or <stem>.csv. Returns
/// the sidecar path.
std::filesystem::path write_trace(const std::filesystem::path& dir, const Trace& trace,
                                  const std::string& format, const nlohmann::json& extra = {},
                                  const std::string& stem = "trace");

/// Reads a trace through its sidecar; both formats are accepted.
Trace read_trace(const std::filesystem::path& sidecar);
nlohmann::json read_trace_sidecar(const std::filesystem::path& sidecar);

void write_iteration_log(std::ostream& out, const std::vector<IterationLog>& log,
                         const std::string& config_hash);

// ---------------------------------------------------------------------------
// Summary artifacts

void write_matrix_csv(std::ostream& out, const Matrix<double>& m, const std::string& config_hash);
void write_partition_csv(std::ostream& out, const Dataset* data, const Partition& partition,
                         const std::vector<ClusterSummary>* labels, const std::string& config_hash);
void write_density_csv(std::ostream& out, const DensityGrid& grid, const std::string& config_hash);
nlohmann::json posterior_summary_json(const PosteriorSummary& s);

/// Reads a numeric CSV (skipping '#' comments and a non-numeric header row).
std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path);

}  // namespace ar1dp::io
