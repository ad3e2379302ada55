#pragma once

#include "stlmc/types.hpp"

#include <json.hpp>

#include <array>
#include <span>
#include <vector>

namespace stlmc {

/// Multipliers standing in for the asymptotic orders of the schedule.
struct ScheduleConstants {
  double beta1 = 1.0;        // c1: beta_1 = c1 * sigma^2 / D^2
  double swap_rate = 1.0;    // c2: lambda = c2 / D^2
  double total_time = 10.0;  // cT
  double step_size = 0.1;    // c_eta
  double sample_count = 1.0; // c_n: samples per stage = c_n L^2 ln(1/delta)
  double weight_exponent = 4.0;  // T grows as 1 / w_min^weight_exponent
};

/// Inverse temperatures beta_1 < ... < beta_L = 1 (index 0 is the hottest
/// level), relative probabilities and log partition estimates ln Z_i.
struct TemperatureLadder {
  std::vector<double> betas;
  std::vector<double> rel_probs;
  std::vector<double> log_partition;
  double ratio_bound = 1.0;

  std::size_t size() const noexcept { return betas.size(); }
  /// The first `levels` levels with rel_probs renormalized uniformly.
  TemperatureLadder prefix(std::size_t levels) const;
  /// Throws invalid_argument when an invariant is broken.
  void validate() const;
};

struct RunParams {
  double swap_rate = 1.0;   // lambda
  double step_size = 1e-2;  // eta
  double total_time = 1.0;  // T
  double init_std = 1.0;    // sigma_0
  double accuracy = 0.1;    // epsilon
  ScheduleConstants constants;
  /// The three candidate step sizes; step_size = c_eta * min of them.
  std::array<double, 3> step_size_terms{};
  int active_step_term = 0;

  void validate() const;
};

struct LadderBuild {
  TemperatureLadder ladder;
  RunParams params;
};

/// Schedule for mixtures of isotropic Gaussians with common sigma.
LadderBuild build_ladder_gaussian(Eigen::Index d, double center_bound, double sigma, double w_min,
                                  double eps, const ScheduleConstants& constants = {});

/// Schedule for kappa-strongly convex, K-smooth base functions.
LadderBuild build_ladder_logconcave(Eigen::Index d, double center_bound, double kappa, double smoothness,
                                    double w_min, double eps, const ScheduleConstants& constants = {});

/// beta_1 * ratio^k for k < L-1, then 1. L = ceil(ln(1/beta_1)/ln ratio) + 1.
std::vector<double> geometric_betas(double beta1, double ratio);

struct PartitionCheck {
  std::vector<bool> within;
  /// (Z^_i/Z_i)/(Z^_1/Z_1) furthest from 1 in log scale.
  double worst_ratio = 1.0;
  std::size_t worst_level = 0;

  bool all() const;
};

/// Checks (Z^_i/Z_i)/(Z^_1/Z_1) in [(1-1/L)^{i-1}, (1+1/L)^{i-1}] (inclusive)
/// for every level; both tables are given as logarithms.
PartitionCheck validate_partition_estimates(const TemperatureLadder& ladder,
                                            std::span<const double> exact_log_partition);

nlohmann::json to_json(const ScheduleConstants& c);
nlohmann::json to_json(const TemperatureLadder& ladder);
nlohmann::json to_json(const RunParams& params);
ScheduleConstants schedule_constants_from_json(const nlohmann::json& doc);
TemperatureLadder ladder_from_json(const nlohmann::json& doc);
RunParams run_params_from_json(const nlohmann::json& doc);

}  // namespace stlmc
