#pragma once

#include "stlmc/ladder.hpp"
#include "stlmc/oracle.hpp"
#include "stlmc/rng.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <vector>

namespace stlmc {

/// (level, position); level 0 is the hottest temperature, size()-1 the target.
struct TemperingState {
  std::size_t level = 0;
  Vec position;
};

/// Thinned trajectory plus per-level statistics. Positions are stored flat,
/// row after row, `dim` values each.
struct RunRecord {
  Eigen::Index dim = 0;
  std::vector<std::uint64_t> steps;
  std::vector<double> times;
  std::vector<std::uint32_t> levels;
  std::vector<double> positions;

  std::vector<std::uint64_t> occupancy;      // per level, over recorded rows
  std::vector<std::uint64_t> swap_attempts;  // per adjacent pair (i, i+1)
  std::vector<std::uint64_t> swap_accepts;
  std::uint64_t langevin_steps = 0;  // one gradient evaluation each
  std::uint64_t swap_events = 0;
  TemperingState final_state;
  bool rejected = false;
  std::uint64_t seed = 0;
  nlohmann::json params = nlohmann::json::object();

  std::size_t rows() const noexcept { return steps.size(); }
  Eigen::Map<const Vec> position(std::size_t row) const {
    return Eigen::Map<const Vec>(positions.data() + row * static_cast<std::size_t>(dim), dim);
  }
  /// Recorded positions at one level.
  std::vector<Vec> positions_at(std::size_t level) const;
};

/// x - eta beta grad f(x) + sqrt(2 eta) xi with xi drawn from rng.
Vec langevin_step(const DensityOracle& oracle, double beta, const Vec& x, double eta, RngStream& rng);
/// Same update with caller-supplied noise (pass zeros for a gradient step).
Vec langevin_step(const DensityOracle& oracle, double beta, const Vec& x, double eta, const Vec& noise);

/// Event times of a rate-lambda Poisson process on (0, horizon).
std::vector<double> draw_swap_times(double rate, double horizon, RngStream& rng);

/// ln of r_j e^{-beta_j f} / Z^_j  over  r_i e^{-beta_i f} / Z^_i.
double swap_log_ratio(const TemperatureLadder& ladder, std::size_t from, std::size_t to, double f_value);

struct SwapOutcome {
  TemperingState state;
  bool in_bounds = false;
  bool accepted = false;
  std::size_t proposed = 0;  // meaningful when in_bounds
};

/// Proposes level +-1 with probability 1/2 each; out-of-range proposals leave
/// the state unchanged. The position is never modified.
SwapOutcome swap_attempt(const TemperingState& state, const TemperatureLadder& ladder,
                         const DensityOracle& oracle, RngStream& rng);

struct StlmcOptions {
  /// Record every swap event and every `thin`-th Langevin step; 0 records
  /// nothing but the statistics.
  std::size_t thin = 10;
  /// Overrides the N(0, init_std^2 I) start.
  std::optional<Vec> initial_position;
  /// Start level (default 0); with initial_position this continues a chain.
  std::size_t initial_level = 0;
};

/// One pass of the tempering chain over [0, T]. `rejected` is set when the
/// chain does not end on the last ladder level; the caller decides whether to
/// re-run.
RunRecord run_stlmc(const DensityOracle& oracle, const TemperatureLadder& ladder, const RunParams& params,
                    RngStream& rng, const StlmcOptions& options = {});

struct AcceptedSample {
  Vec position;
  std::size_t runs = 0;
  std::uint64_t langevin_steps = 0;
};

/// Re-runs run_stlmc until it ends on the last level; throws
/// rejection_ceiling after `max_runs` rejected runs.
AcceptedSample sample_stlmc(const DensityOracle& oracle, const TemperatureLadder& ladder, const RunParams& params,
                            RngStream& rng, std::size_t max_runs);

RunRecord run_plain_langevin(const DensityOracle& oracle, double beta, double eta, std::uint64_t steps,
                             const Vec& x0, RngStream& rng, std::size_t thin = 10);

/// ln of (1/n) sum_j exp((beta_lo - beta_hi) f(x_j)).
double log_partition_ratio(const std::vector<Vec>& samples, const DensityOracle& oracle, double beta_lo,
                           double beta_hi);
double estimate_partition_ratio(const std::vector<Vec>& samples, const DensityOracle& oracle, double beta_lo,
                                double beta_hi);

struct MainOptions {
  double delta = 0.05;
  /// Runs allowed per accepted sample.
  std::size_t max_runs_per_sample = 100000;
  /// Abort when a stage rejects more than this fraction of its runs.
  double rejection_ceiling = 0.999;
  /// Samples returned from the full ladder.
  std::size_t final_samples = 1;
  /// Overrides c_n L^2 ln(1/delta).
  std::optional<std::size_t> samples_per_stage;
};

struct StageReport {
  std::size_t levels = 0;
  std::size_t samples = 0;
  std::size_t runs = 0;
  std::size_t rejected = 0;
  double log_ratio = 0.0;
};

struct MainResult {
  TemperatureLadder ladder;  // with the estimated log partition table
  std::vector<Vec> samples;
  std::vector<StageReport> stages;
  std::uint64_t langevin_steps = 0;
};

std::size_t samples_per_stage(std::size_t levels, double delta, double c_n);

/// Inductive partition estimation followed by sampling on the full ladder.
MainResult run_main(const DensityOracle& oracle, TemperatureLadder ladder, const RunParams& params, RngStream& rng,
                    const MainOptions& options = {});

nlohmann::json to_json(const StageReport& s);

}  // namespace stlmc
