#pragma once

#include "stlmc/oracle.hpp"
#include "stlmc/quadrature.hpp"

#include <json.hpp>

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace stlmc {

using DensityFn = std::function<double(const Vec&)>;

/// Returned (never thrown) when a divergence is infinite.
inline constexpr double divergence_infinity = std::numeric_limits<double>::infinity();

/// chi^2(N(mu2, S2) || N(mu1, S1)) = E_1[(p2/p1)^2] - 1. Infinite when
/// 2 S2^{-1} - S1^{-1} is not positive definite.
double chi2_gaussian(const Vec& mu1, const Mat& S1, const Vec& mu2, const Mat& S2);

/// chi^2(Q || P) = int q^2/p - 1 on the grid. Both densities must integrate
/// to 1 within 1e-4 (they are renormalized afterwards); a grid that cuts off
/// mass fails that check with a precondition error.
double chi2_numeric(const DensityFn& p, const DensityFn& q, const QuadratureGrid& grid);
double chi2_max(const DensityFn& p, const DensityFn& q, const QuadratureGrid& grid);

/// int min{c p, q}.
double overlap_delta(const DensityFn& p, const DensityFn& q, double c, const QuadratureGrid& grid);

/// KL(P || Q) by quadrature, same normalization rules as chi2_numeric.
double kl_numeric(const DensityFn& p, const DensityFn& q, const QuadratureGrid& grid);

// Probability vectors on a common finite state space.
double chi2_discrete(const Vec& p, const Vec& q);  // chi^2(q || p)
double chi2_max_discrete(const Vec& p, const Vec& q);
double overlap_discrete(const Vec& p, const Vec& q, double c);  // sum min{c p, q}

/// One instance of an inequality lhs <= rhs.
struct Inequality {
  double lhs = 0.0;
  double rhs = 0.0;
  double margin() const { return rhs - lhs; }
  bool holds(double tol) const { return lhs <= rhs + tol; }
};

/// Aggregate over many instances of one check.
struct CheckReport {
  std::string check;
  std::size_t instances = 0;
  std::size_t violations = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  nlohmann::json details = nlohmann::json::object();

  void record(double margin, bool ok);
  void record(const Inequality& q, double tol) { record(q.margin(), q.holds(tol)); }
  bool pass() const { return instances > 0 && violations == 0; }
};

nlohmann::json to_json(const CheckReport& r);

/// g_beta = (sum w_i e^{-f_i})^beta against g~_beta = sum w_i e^{-beta f_i}
/// at each probe; checks g~ <= g <= g~/w_min in log space. `details` holds
/// the extreme ratios g/g~ observed.
CheckReport check_temp_scaling_bounds(const MixtureTarget& target, double beta, const std::vector<Vec>& probes);

struct PartitionRatioReport {
  double alpha = 0.0;
  double beta = 0.0;
  double ratio = 1.0;  // Z_beta / Z_alpha
  double lower = 0.0;
  double upper = 1.0;
  double floor = 0.0;  // optional extra assertion ratio >= floor
  double margin() const { return std::min(ratio - lower, upper - ratio); }
  bool pass() const;
};

/// Grid covering every tempered component out to 12 tempered standard
/// deviations (1D or 2D targets only).
QuadratureGrid grid_for_target(const MixtureTarget& target, double alpha, std::size_t nodes = 256);

/// ln int e^{-beta f} on the grid; throws precondition when the integrand is
/// not negligible on the boundary of the box.
double log_partition_quadrature(const MixtureTarget& target, double beta, const QuadratureGrid& grid);

/// Z_beta/Z_alpha by quadrature against [1/2 exp(-2(beta-alpha)(D' + (sqrt d +
/// 2 sqrt(ln(2/w_min)))/sqrt(alpha))^2), 1] with D' = D/sigma for isotropic
/// bases; quadratic bases use the kappa/K version of the interval.
PartitionRatioReport check_partition_ratio_bound(const MixtureTarget& target, double alpha, double beta,
                                                 const QuadratureGrid& grid, double floor = 0.0);

/// KL(sum w_i P_i || sum w'_i Q_i) <= KL(w || w') + sum w_i KL(P_i || Q_i).
Inequality kl_mixture_bound(const Vec& w, const Vec& w_prime, const std::vector<DensityFn>& P,
                            const std::vector<DensityFn>& Q, const QuadratureGrid& grid);

/// (E_P g - E_Q g)^2 <= Var_P(g) chi^2(Q || P).
Inequality change_of_measure_bound(const DensityFn& p, const DensityFn& q, const std::function<double(const Vec&)>& g,
                                   const QuadratureGrid& grid);

/// chi^2(R~ || P) <= 1/delta where R = min{p, q}, delta = R(Omega) and R~ = R/delta.
Inequality overlap_chi_bound(const DensityFn& p, const DensityFn& q, const QuadratureGrid& grid);

/// Density of N(mu, S) (1D or 2D is typical, any d works).
DensityFn gaussian_density(const Vec& mu, const Mat& S);

}  // namespace stlmc
