#include "stlmc/diagnostics.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace stlmc {

Vec HistogramEstimate::center(std::size_t bin) const {
  const std::size_t b = bins_per_axis();
  if (bin >= b * (dim == 2 ? b : 1)) throw Error(ErrorCode::invalid_argument, "HistogramEstimate: overflow bin has no center");
  Vec c(dim);
  const std::size_t idx[2] = {dim == 1 ? bin : bin / b, bin % b};
  for (int a = 0; a < dim; ++a) {
    const auto& e = edges[static_cast<std::size_t>(a)];
    c[a] = 0.5 * (e[idx[a]] + e[idx[a] + 1]);
  }
  return c;
}

HistogramEstimate make_histogram(const MixtureTarget& target, std::size_t bins, double pad_scales) {
  if (target.dim() > 2) throw Error(ErrorCode::invalid_argument, "histogram: only d <= 2 is supported");
  if (bins < 20) throw Error(ErrorCode::invalid_argument, "histogram: at least 20 bins per axis required");
  HistogramEstimate h;
  h.dim = static_cast<int>(target.dim());
  const double pad = pad_scales * target.base().scale();
  for (Eigen::Index a = 0; a < target.dim(); ++a) {
    const double lo = target.centers().row(a).minCoeff() - pad;
    const double hi = target.centers().row(a).maxCoeff() + pad;
    std::vector<double> e(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) e[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
    h.edges.push_back(std::move(e));
  }
  const std::size_t inner = h.dim == 1 ? bins : bins * bins;
  h.counts.assign(inner + 1, 0);
  h.masses.assign(inner + 1, 0.0);
  return h;
}

void accumulate(HistogramEstimate& h, const Vec& x) {
  require_dim(x, h.dim, "histogram");
  const std::size_t b = h.bins_per_axis();
  std::size_t bin = 0;
  for (int a = 0; a < h.dim; ++a) {
    const auto& e = h.edges[static_cast<std::size_t>(a)];
    const double t = (x[a] - e.front()) / (e.back() - e.front());
    if (!(t >= 0.0 && t < 1.0)) {
      ++h.counts.back();
      ++h.total;
      return;
    }
    bin = bin * b + std::min(b - 1, static_cast<std::size_t>(t * static_cast<double>(b)));
  }
  ++h.counts[bin];
  ++h.total;
}

void finalize(HistogramEstimate& h) {
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    h.masses[k] = h.total ? static_cast<double>(h.counts[k]) / static_cast<double>(h.total) : 0.0;
  }
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

std::vector<double> exact_bin_masses(const MixtureTarget& target, const HistogramEstimate& h) {
  require_dim(Vec::Zero(h.dim), target.dim(), "exact_bin_masses");
  const std::size_t b = h.bins_per_axis();
  const std::size_t inner = h.size() - 1;
  std::vector<double> out(h.size(), 0.0);
  if (target.base().kind() == BaseKind::isotropic_gaussian) {
    const double s = target.base().sigma();
    for (Eigen::Index j = 0; j < target.components(); ++j) {
      // Per-axis interval masses of component j; bins are products of them.
      std::vector<std::vector<double>> axis(static_cast<std::size_t>(h.dim));
      for (int a = 0; a < h.dim; ++a) {
        const auto& e = h.edges[static_cast<std::size_t>(a)];
        for (std::size_t i = 0; i < b; ++i) {
          const double mu = target.centers()(a, j);
          axis[static_cast<std::size_t>(a)].push_back(normal_cdf((e[i + 1] - mu) / s) - normal_cdf((e[i] - mu) / s));
        }
      }
      for (std::size_t k = 0; k < inner; ++k) {
        const double m = h.dim == 1 ? axis[0][k] : axis[0][k / b] * axis[1][k % b];
        out[k] += target.weights()[j] * m;
      }
    }
  } else {
    // Each component is N(mu_j, H^{-1}).
    using gauss = boost::math::quadrature::gauss<double, 10>;
    const Mat& H = target.base().hessian();
    const double log_norm = 0.5 * std::log(H.determinant()) - 0.5 * static_cast<double>(h.dim) * std::log(2 * std::numbers::pi);
    auto density = [&](const Vec& x) {
      double p = 0.0;
      for (Eigen::Index j = 0; j < target.components(); ++j) {
        const Vec y = x - target.center(j);
        p += target.weights()[j] * std::exp(log_norm - 0.5 * y.dot(H * y));
      }
      return p;
    };
    for (std::size_t k = 0; k < inner; ++k) {
      const std::size_t idx[2] = {h.dim == 1 ? k : k / b, k % b};
      if (h.dim == 1) {
        const auto& e = h.edges[0];
        out[k] = gauss::integrate([&](double t) { return density(Vec::Constant(1, t)); }, e[idx[0]], e[idx[0] + 1]);
      } else {
        const auto& e0 = h.edges[0];
        const auto& e1 = h.edges[1];
        out[k] = gauss::integrate(
            [&](double u) {
              return gauss::integrate([&](double v) { return density((Vec(2) << u, v).finished()); }, e1[idx[1]],
                                      e1[idx[1] + 1]);
            },
            e0[idx[0]], e0[idx[0] + 1]);
      }
    }
  }
  double inside = 0.0;
  for (std::size_t k = 0; k < inner; ++k) inside += out[k];
  out.back() = std::max(0.0, 1.0 - inside);
  return out;
}

TvEstimate empirical_tv(std::span<const Vec> samples, const MixtureTarget& target, std::size_t bins) {
  if (target.dim() > 2) throw Error(ErrorCode::invalid_argument, "empirical_tv: only d <= 2 is supported");
  if (samples.size() < 1000) throw Error(ErrorCode::precondition, "empirical_tv: at least 1000 samples required");
  TvEstimate out;
  out.histogram = make_histogram(target, bins);
  for (const Vec& x : samples) accumulate(out.histogram, x);
  finalize(out.histogram);
  out.exact = exact_bin_masses(target, out.histogram);
  double s = 0.0;
  for (std::size_t k = 0; k < out.exact.size(); ++k) s += std::abs(out.histogram.masses[k] - out.exact[k]);
  out.tv = 0.5 * s;
  return out;
}

Vec mode_masses(std::span<const Vec> samples, const MixtureTarget& target) {
  Vec counts = Vec::Zero(target.components());
  for (const Vec& x : samples) {
    require_dim(x, target.dim(), "mode_masses");
    Eigen::Index best = 0;
    (target.centers().colwise() - x).colwise().squaredNorm().minCoeff(&best);
    counts[best] += 1.0;
  }
  if (!samples.empty()) counts /= static_cast<double>(samples.size());
  return counts;
}

AutocorrEstimate integrated_autocorr(std::span<const double> series, std::size_t max_lag) {
  const std::size_t n = series.size();
  if (max_lag == 0 || n < 10 * max_lag) {
    throw Error(ErrorCode::precondition, "integrated_autocorr: need at least 10 * max_lag values");
  }
  AutocorrEstimate out;
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  auto acov = [&](std::size_t k) {
    double s = 0.0;
    for (std::size_t t = 0; t + k < n; ++t) s += (series[t] - mean) * (series[t + k] - mean);
    return s / static_cast<double>(n);
  };
  const double c0 = acov(0);
  if (!(c0 > 0.0)) {
    out.degenerate = true;
    out.ess = static_cast<double>(n);
    return out;
  }
  // Sum of pairs Gamma_m = rho_{2m} + rho_{2m+1} while positive.
  double sum_pairs = 0.0;
  std::size_t lag = 0;
  while (lag + 1 <= max_lag) {
    const double gamma = (lag == 0 ? 1.0 : acov(lag) / c0) + acov(lag + 1) / c0;
    if (!(gamma > 0.0)) break;
    sum_pairs += gamma;
    lag += 2;
  }
  out.lags_used = lag;
  out.tau = std::max(1.0, 2.0 * sum_pairs - 1.0);
  out.ess = static_cast<double>(n) / out.tau;
  return out;
}

nlohmann::json run_summary(const RunRecord& rec) {
  std::uint64_t rows = 0;
  for (auto c : rec.occupancy) rows += c;
  std::vector<double> occupancy, acceptance;
  for (auto c : rec.occupancy) occupancy.push_back(rows ? static_cast<double>(c) / static_cast<double>(rows) : 0.0);
  for (std::size_t i = 0; i < rec.swap_attempts.size(); ++i) {
    acceptance.push_back(rec.swap_attempts[i] ? static_cast<double>(rec.swap_accepts[i]) /
                                                    static_cast<double>(rec.swap_attempts[i])
                                              : 0.0);
  }
  return {{"rows", rec.rows()},
          {"occupancy", occupancy},
          {"swap_attempts", rec.swap_attempts},
          {"swap_accepts", rec.swap_accepts},
          {"swap_acceptance", acceptance},
          {"swap_events", rec.swap_events},
          {"langevin_steps", rec.langevin_steps},
          {"final_level", rec.final_state.level},
          {"rejected", rec.rejected}};
}

}  // namespace stlmc
