#pragma once

#include "stlmc/fixtures.hpp"
#include "stlmc/ladder.hpp"
#include "stlmc/sampler.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace stlmc {

enum class Mode { sample, verify_decomposition, verify_divergences, baseline_compare };

const char* to_string(Mode m);
Mode mode_from_string(const std::string& s);

inline constexpr int config_version = 1;

struct SamplingConfig {
  double delta = 0.05;
  std::optional<std::size_t> samples_per_stage;
  std::size_t max_runs_per_sample = 100000;
  double rejection_ceiling = 0.999;
  /// Recorded rows at the target level collected after partition estimation.
  std::size_t final_level_rows = 20000;
  std::size_t thin = 1;
  /// Length of each continuation chunk of the production run.
  std::optional<double> chunk_time;
  /// Row stride of the trajectory CSV files.
  std::size_t output_stride = 10;
};

struct AssertionConfig {
  std::optional<std::array<double, 2>> mode_mass_range;
  std::optional<double> tv_max;
  std::optional<double> baseline_minority_max;
  bool partition_interval = false;
};

struct SuiteConfig {
  std::size_t simple_instances = 20;
  std::size_t tempering_instances = 10;
  std::vector<double> K = {0.5, 1.0, 2.0};
  std::size_t path_chains = 50;
  std::size_t path_functions = 100;
  std::size_t chi2_pairs = 50;
  std::size_t scaling_mixtures = 10;
  std::size_t scaling_probes = 10000;
  std::size_t inequality_instances = 100;
};

struct ExperimentConfig {
  Mode mode = Mode::sample;
  std::string fixture;                 // built-in name, or empty when fixture_file is set
  std::filesystem::path fixture_file;  // resolved path
  std::optional<std::uint64_t> seed;
  std::filesystem::path output = "out";
  unsigned jobs = 1;

  double accuracy = 0.1;
  ScheduleConstants constants;
  std::optional<std::vector<double>> betas;  // explicit ladder
  std::optional<double> swap_rate, step_size, total_time, init_std;

  SamplingConfig sampling;
  std::optional<std::vector<double>> baseline_start;
  std::size_t baseline_thin = 10;
  SuiteConfig suite;
  AssertionConfig assertions;

  /// Throws schema errors for mode-specific requirements (seed, fixture).
  void validate() const;
};

/// Parses a config document; unknown fields and wrong types are schema
/// errors. Relative fixture paths are resolved against `base_dir`.
ExperimentConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
/// The config as written to disk; output directory and job count are left
/// out so that they do not affect artifact hashes.
nlohmann::json to_json(const ExperimentConfig& c);

/// In-memory artifact set written in one go with a manifest.
class ArtifactSet {
 public:
  void add(const std::string& name, std::string content);
  void add_json(const std::string& name, const nlohmann::json& doc);
  const std::map<std::string, std::string>& files() const noexcept { return files_; }
  /// Writes every file plus manifest.json (sha256 per file; the timestamp is
  /// not part of any hash).
  void write(const std::filesystem::path& dir) const;

 private:
  std::map<std::string, std::string> files_;
};

std::string sha256_hex(const std::string& data);
/// True when every file listed in dir/manifest.json exists with its hash.
bool verify_manifest(const std::filesystem::path& dir, std::string* problem = nullptr);

struct ExperimentResult {
  bool pass = true;
  std::vector<std::string> failures;
  std::filesystem::path report;  // the report to look at on failure
  nlohmann::json summary;
};

/// Sampling pipeline shared by sample and baseline-compare modes.
struct SamplingRun {
  LadderBuild formula;  // schedule values before overrides
  RunParams params;     // effective run parameters
  MainResult main;
  RunRecord production;
  std::vector<Vec> final_samples;
  std::optional<RunRecord> baseline;
  nlohmann::json metrics;
  bool pass = true;
  std::vector<std::string> failures;
};

SamplingRun run_sampling(const ExperimentConfig& cfg, const Fixture& fixture);
/// Adds the sampling artifacts (records, sidecar, ladder, metrics, plot data).
void sampling_artifacts(const ExperimentConfig& cfg, const Fixture& fixture, const SamplingRun& run,
                        ArtifactSet& out);

Fixture resolve_fixture(const ExperimentConfig& cfg);
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Table of the built-in fixtures (name, dim, m, D/sigma, description).
std::string list_fixtures();

}  // namespace stlmc
