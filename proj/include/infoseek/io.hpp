#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "infoseek/agents.hpp"
#include "infoseek/analysis.hpp"
#include "infoseek/game.hpp"
#include "infoseek/pipeline.hpp"

namespace infoseek::io {

inline constexpr const char* kToolVersion = "0.1.0";

// Shortest-exact decimal for doubles (up to 17 significant digits);
// integers print without a decimal point.
std::string format_real(double v);

struct ReadReport {
  int n_rows = 0;      // data rows seen
  int n_skipped = 0;   // rows dropped in lenient mode
  std::vector<std::string> diagnostics;  // "line N: ..." per bad row
};

// Canonical trials CSV. Header: subject_id,task,trial_id,a1,a2,b1,b2,
// reveal_order,actions,decision_time_ms. Derived fields are recomputed on
// read, never stored. strict: throw on the first bad row; lenient: skip,
// count, and record a diagnostic.
std::vector<TrialRecord> read_trials(const std::filesystem::path& path, bool strict = true,
                                     ReadReport* report = nullptr);
void write_trials(const std::vector<TrialRecord>& records, const std::filesystem::path& path);

// Subjects CSV. Header: subject_id,age_bucket,gender,education,
// approach_param,avoid_param,generator_tau,generator_w_conf,generator_w_cost,
// generator_b,generator_delta_frame,generator_alpha,generator_rho.
// Blank = missing; generator_* all present or all blank.
std::vector<SubjectProfile> read_subjects(const std::filesystem::path& path,
                                          bool strict = true, ReadReport* report = nullptr);
void write_subjects(const std::vector<SubjectProfile>& subjects,
                    const std::filesystem::path& path);

// Source-column name per canonical column; canonical columns missing from the
// map default to their own name. decision_time_ms may map to "" (absent).
struct ColumnMapping {
  std::map<std::string, std::string> columns;
};

struct ImportReport {
  int n_imported = 0;
  int n_dropped = 0;
  std::vector<std::string> diagnostics;
};

// Rewrites an external trials log into canonical form. Unmappable required
// columns are a hard error; invalid rows are dropped and reported.
ImportReport import_external(const std::filesystem::path& source, const ColumnMapping& mapping,
                             const std::filesystem::path& dest);

struct GeneratorConfig {
  int n_subjects = 100;
  int n_trials_per_task = 14;
  std::vector<Task> tasks = {Task::MaxProd, Task::MinProd};
  ParamDistributions distributions;
};

// Whole-run configuration (JSON on disk). Unknown keys are rejected at every
// level; every field has the compiled-in default.
struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";
  TrainConfig train;
  GeneratorConfig generator;
  SampleComplexityConfig sample_complexity;
};

RunConfig read_run_config(const std::filesystem::path& path);
void write_run_config(const RunConfig& config, const std::filesystem::path& path);

// Echoes the effective config plus the tool version into an output directory
// (creates it if needed).
void stamp_output_dir(const RunConfig& config, const std::filesystem::path& dir);

// Stable CSV: fixed column order, format_real() for numbers, empty cell for
// null, LF endings.
void write_table_csv(const AnalysisTable& table, const std::filesystem::path& path);
std::string table_to_csv(const AnalysisTable& table);

}  // namespace infoseek::io
