#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "epsel/diagnostics.hpp"
#include "epsel/ensembles.hpp"
#include "epsel/ep_core.hpp"
#include "epsel/priors.hpp"
#include "epsel/state_evolution.hpp"

namespace epsel {

enum class Mode { simulate, se, compare, sweep, diagnose };
enum class OutputFormat { csv, json, svg };

std::string_view to_string(Mode mode);
std::string_view to_string(OutputFormat format);
std::optional<Mode> mode_from_string(std::string_view name);
std::optional<OutputFormat> format_from_string(std::string_view name);

struct SweepSpec {
  std::string axis = "delta";  // "delta" or "sigma2"
  std::vector<double> values;
  FixedPointGrid grid;
};

struct ExperimentConfig {
  Mode mode = Mode::simulate;
  Index n = 1024;
  double delta = 0.5;
  double sigma2 = 0.01;
  EnsembleSpec ensemble = EnsembleSpec::row_orthogonal();
  PriorSpec prior{0.1, 10.0};
  int iterations = 10;
  int trials = 10;
  std::uint64_t base_seed = 1;
  ReportTolerances tolerances;
  /// Early stopping is off by default so every trial reports T rows.
  double early_stop_tol = 0.0;
  /// Scalar samples for the covariance predictor (diagnose mode).
  Index mc_samples = 1'000'000;
  /// Reference dimension for sampled limiting spectra (iid_gaussian).
  Index reference_n = 4096;
  std::string output_dir = ".";
  std::vector<OutputFormat> formats{OutputFormat::csv};
  std::optional<SweepSpec> sweep;

  /// M = round(delta * N).
  [[nodiscard]] Index m() const;
  /// M / N.
  [[nodiscard]] double realized_delta() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&);
};

/// Parses a JSON document; missing keys take their defaults. Throws
/// ValidationError listing every offending field.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Throws ValidationError unless the configuration can be run.
void validate(const ExperimentConfig& config);
/// Canonical form: every field present, keys sorted.
nlohmann::json to_json(const ExperimentConfig& config);

struct TrialResult {
  int trial = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  int failed_iteration = -1;
  std::string error;
  std::vector<EpIteration> iterations;
};

struct AggregateRow {
  int iter = 0;
  int count = 0;
  double mse_mean = 0.0;
  double mse_std = 0.0;  // sample standard deviation (n - 1)
  double v_ab_mean = 0.0;
  double v_ba_mean = 0.0;
};

/// Per-iteration mean and standard deviation over the trials that did not fail.
std::vector<AggregateRow> aggregate(const std::vector<TrialResult>& trials);

struct ComparisonRow {
  int iter = 0;
  double mc_mean = 0.0;
  double mc_std = 0.0;
  double se_pred = 0.0;
  double rel_dev = 0.0;
};

struct ThresholdRow {
  double axis_value = 0.0;
  int fp_count = 0;
  double attractor_mse = 0.0;
  bool unique = false;
  bool grid_exhausted = false;
};

struct ThresholdReport {
  std::string axis;
  std::vector<ThresholdRow> rows;
  /// First axis value of the trailing run of unique fixed points.
  std::optional<double> threshold;
  /// The value preceding the threshold has more than one fixed point.
  bool crossover = false;
};

struct DiagnoseTrial {
  int trial = 0;
  std::uint64_t seed = 0;
  IdentityReport report;
  RVector mu;
  bool rank_deficient = false;
};

struct ResultSet {
  ExperimentConfig config;
  std::vector<TrialResult> trials;
  std::vector<AggregateRow> aggregate;
  std::optional<SeTrajectory> se;
  std::vector<ComparisonRow> comparison;
  std::optional<ThresholdReport> threshold;
  std::optional<CovarianceTables> predictions;
  std::vector<DiagnoseTrial> diagnostics;
  int failed_trials = 0;
  std::string timestamp;
  double wall_seconds = 0.0;
};

/// Sources of non-determinism, injectable for tests.
struct RunContext {
  std::string timestamp;                // empty: current UTC time
  std::function<double()> clock;        // seconds; empty: steady clock
  unsigned workers = 0;                 // 0: worker_count()
};

ResultSet run_experiment(const ExperimentConfig& config, const RunContext& ctx = {});

/// One trial of the simulate/compare modes: draws A, x and w from
/// base_seed + trial and runs EP.
TrialResult run_trial(const ExperimentConfig& config, int trial);

/// Limiting spectrum the SE uses for this configuration at rate `delta`.
SpectralDensity config_spectrum(const ExperimentConfig& config, double delta);

std::vector<ComparisonRow> compare_se_mc(const ExperimentConfig& config, const RunContext& ctx = {});
ThresholdReport sweep_threshold(const ExperimentConfig& config);

/// Joins aggregate MC rows with SE predictions.
std::vector<ComparisonRow> comparison_table(const std::vector<AggregateRow>& rows,
                                            const SeTrajectory& se);

/// Threshold rule on an already computed scan.
void locate_threshold(ThresholdReport& report);

}  // namespace epsel
