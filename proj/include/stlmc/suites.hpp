#pragma once

#include "stlmc/ladder.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace stlmc {

/// Result of a batch of randomized checks. `report` is the JSON written to
/// disk; `csv` is an optional per-instance table.
struct SuiteOutcome {
  std::string name;
  bool pass = false;
  nlohmann::json report;
  std::string csv;
};

/// Random mixtures of discretized Gaussians (n <= 64, m <= 3): C* <= C(1 + C-bar/2),
/// plus the overlap variant C* <= C(1 + 2 C-bar).
SuiteOutcome simple_decomposition_suite(std::uint64_t seed, std::size_t instances = 20, unsigned jobs = 1);

/// Random 3-level tempering chains on <= 64 nodes, each checked for every K.
SuiteOutcome tempering_decomposition_suite(std::uint64_t seed, std::size_t instances = 10,
                                           std::vector<double> Ks = {0.5, 1.0, 2.0}, unsigned jobs = 1);

/// Var <= rho * E for random test functions on random reversible chains with
/// geodesic paths, and C* <= rho.
SuiteOutcome canonical_path_suite(std::uint64_t seed, std::size_t chains = 50, std::size_t functions = 100);

/// Closed-form Gaussian chi^2 against quadrature on random 1D/2D pairs.
SuiteOutcome chi2_suite(std::uint64_t seed, std::size_t pairs = 50, double rel_tol = 1e-5);

/// g~ <= g <= g~/w_min on random mixtures and probes.
SuiteOutcome temp_scaling_suite(std::uint64_t seed, std::size_t mixtures = 10, std::size_t probes = 10000,
                                std::vector<double> betas = {0.1, 0.5, 0.9});

/// Change-of-measure, overlap and KL-mixture inequalities on random 1D instances.
SuiteOutcome inequality_suite(std::uint64_t seed, std::size_t instances = 100);

/// Partition-ratio interval for a few 1D/2D targets.
SuiteOutcome partition_ratio_suite();

/// |f - f~| <= ln 2 on a probe grid (per_axis^4 points in d = 4) and f~ = f1
/// exactly outside the 1.6 |u| ball.
SuiteOutcome adversarial_suite(std::uint64_t seed, std::size_t per_axis = 10);

/// Run parameters for the partition estimation experiment on N(3, 1).
struct PartitionEstimationSetup {
  std::size_t seeds = 20;
  std::size_t required = 18;
  double delta = 0.05;
  double swap_rate = 2.0;
  double step_size = 0.01;
  double total_time = 20.0;
  double accuracy = 0.1;
  ScheduleConstants constants;
};

/// Inductive partition estimation on the single-Gaussian fixture; each seed's Z table is checked
/// against the closed form.
SuiteOutcome partition_estimation_suite(std::uint64_t seed, const PartitionEstimationSetup& setup = {},
                                        unsigned jobs = 1);

}  // namespace stlmc
