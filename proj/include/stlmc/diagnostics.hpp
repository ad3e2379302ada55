#pragma once

#include "stlmc/oracle.hpp"
#include "stlmc/sampler.hpp"

#include <json.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace stlmc {

/// Equal-width histogram over a box in 1 or 2 dimensions. Samples outside
/// the box land in a final overflow bin, so masses always sum to 1.
struct HistogramEstimate {
  int dim = 1;
  std::vector<std::vector<double>> edges;  // per axis, bins + 1 values
  std::vector<std::uint64_t> counts;       // row-major (axis 0 slowest), then overflow
  std::vector<double> masses;
  std::uint64_t total = 0;

  std::size_t bins_per_axis() const { return edges[0].size() - 1; }
  /// Number of bins including overflow.
  std::size_t size() const { return counts.size(); }
  /// Bin center along each axis; not defined for the overflow bin.
  Vec center(std::size_t bin) const;
};

inline constexpr std::size_t default_histogram_bins = 40;

/// Box [min center - pad, max center + pad] per axis with pad = 6 * scale
/// of the base function.
HistogramEstimate make_histogram(const MixtureTarget& target, std::size_t bins = default_histogram_bins,
                                 double pad_scales = 6.0);
void accumulate(HistogramEstimate& h, const Vec& x);
void finalize(HistogramEstimate& h);

/// Exact target mass of every bin of `h` (overflow last). Isotropic bases use
/// the normal CDF; quadratic bases use 10-point Gauss-Legendre per bin and axis.
std::vector<double> exact_bin_masses(const MixtureTarget& target, const HistogramEstimate& h);

struct TvEstimate {
  double tv = 0.0;
  HistogramEstimate histogram;
  std::vector<double> exact;
};

/// 1/2 sum over bins of |empirical - exact|. Requires d <= 2 and at least
/// 1000 samples.
TvEstimate empirical_tv(std::span<const Vec> samples, const MixtureTarget& target,
                        std::size_t bins = default_histogram_bins);

/// Fraction of samples nearest to each center.
Vec mode_masses(std::span<const Vec> samples, const MixtureTarget& target);

struct AutocorrEstimate {
  double tau = 1.0;
  double ess = 0.0;
  std::size_t lags_used = 0;
  bool degenerate = false;  // zero-variance series
};

/// tau = 1 + 2 sum rho_k with Geyer's initial positive sequence truncation,
/// clamped below at 1. Needs at least 10 * max_lag values.
AutocorrEstimate integrated_autocorr(std::span<const double> series, std::size_t max_lag);

/// Occupancy fractions, swap acceptance per adjacent pair and step counts.
nlohmann::json run_summary(const RunRecord& rec);

}  // namespace stlmc
