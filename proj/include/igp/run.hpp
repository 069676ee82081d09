#pragma once

// Run orchestration behind the command-line tool: resolved configuration,
// fit-to-directory and the validation suites.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "igp/io.hpp"
#include "igp/sampler.hpp"
#include "igp/validation.hpp"

namespace igp {

inline constexpr const char* kVersion = "1.0.0";

/// How GIA is applied. `preset` picks gamma = 0 for S-IGP and the published
/// per-site rates for EIV-IGP.
struct GiaSpec {
  bool preset = true;
  GiaAssignment assignment;
};

/// "preset", "none", "<gamma>[@t0]" or "<site>=<gamma>[@t0];<site>=...".
GiaSpec parse_gia_spec(const std::string& text);

struct RunConfig {
  ModelMode mode = ModelMode::SIGP;
  std::filesystem::path data;
  GiaSpec gia;
  FitSettings settings;
  std::filesystem::path out_dir = "run";
  std::size_t eval_points = 200;
  int threads = 0;  // 0: OpenMP default
  bool strict = false;

  /// settings.mode follows `mode`; chain seed and grid size are resolved.
  void validate() const;
};

/// Reads records with the ingester matching the mode.
std::vector<ObservationRecord> load_records(const RunConfig& config);
GiaAssignment resolve_gia(const RunConfig& config, const std::vector<ObservationRecord>& records);

struct FitReport {
  std::vector<ChainOutput> chains;
  RateSummary rate;
  LevelSummary level;
  std::vector<ParameterDiagnostics> diagnostics;
  bool flagged = false;
  std::vector<std::string> warnings;
};

/// Fits and writes manifest.json, draws.csv, diagnostics.csv,
/// rate_summary.csv and level_summary.csv under config.out_dir.
FitReport fit_to_directory(const RunConfig& config);

struct ScenarioRunOptions {
  int n_sims = 200;
  std::uint64_t seed = 1;
  std::vector<std::string> labels;  // empty: all seven
  ValidationFit fit = ValidationFit::scenario_default();
};

std::vector<ScenarioResult> run_scenarios(const ScenarioRunOptions& options, const std::filesystem::path& out_dir);

struct CvRunOptions {
  int k = 10;
  int lsr_degree = 2;
  std::size_t n_paths = 500;
};

struct CvRow {
  CvModel model;
  CvResult result;
};

/// LSR plus the IGP model matching config.mode.
std::vector<CvRow> run_cv(const RunConfig& config, const CvRunOptions& options);
void write_cv_table(const std::filesystem::path& path, const std::vector<CvRow>& rows);

}  // namespace igp
