#include "stlmc/divergences.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace stlmc {

namespace {

constexpr double normalization_tol = 1e-4;

Eigen::LLT<Mat> spd_factor(const Mat& S, const char* name) {
  if (S.rows() != S.cols()) throw Error(ErrorCode::dimension_mismatch, std::string(name) + " must be square");
  if (!S.isApprox(S.transpose(), 1e-12)) throw Error(ErrorCode::invalid_argument, std::string(name) + " not symmetric");
  Eigen::LLT<Mat> llt(S);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::invalid_argument, std::string(name) + " is not positive definite");
  }
  return llt;
}

double log_det(const Eigen::LLT<Mat>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

// Values of a density on the grid, checked and rescaled to unit mass.
std::vector<double> normalized(const DensityFn& p, const QuadratureGrid& grid, const char* who) {
  std::vector<double> v = grid.evaluate(p);
  for (double x : v) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw Error(ErrorCode::non_finite, std::string(who) + ": density is negative or non-finite on the grid");
    }
  }
  const double mass = grid.sum(v);
  if (!(std::abs(mass - 1.0) <= normalization_tol)) {
    throw Error(ErrorCode::precondition, std::string(who) + ": density integrates to " + std::to_string(mass) +
                                             " on the grid (widen the bounds or refine the grid)");
  }
  for (double& x : v) x /= mass;
  return v;
}

double chi2_values(const std::vector<double>& p, const std::vector<double>& q, const QuadratureGrid& grid) {
  std::vector<double> r(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (q[k] == 0.0) {
      r[k] = 0.0;
    } else if (p[k] == 0.0) {
      return divergence_infinity;
    } else {
      r[k] = q[k] * q[k] / p[k];
    }
  }
  return std::max(0.0, grid.sum(r) - 1.0);
}

double kl_values(const std::vector<double>& p, const std::vector<double>& q, const QuadratureGrid& grid) {
  std::vector<double> r(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] == 0.0) {
      r[k] = 0.0;
    } else if (q[k] == 0.0) {
      return divergence_infinity;
    } else {
      r[k] = p[k] * std::log(p[k] / q[k]);
    }
  }
  return grid.sum(r);
}

double log_sum_exp(const Vec& a) {
  const double m = a.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((a.array() - m).exp().sum());
}

}  // namespace

double chi2_gaussian(const Vec& mu1, const Mat& S1, const Vec& mu2, const Mat& S2) {
  const Eigen::Index d = mu1.size();
  require_dim(mu2, d, "chi2_gaussian");
  if (S1.rows() != d || S2.rows() != d) throw Error(ErrorCode::dimension_mismatch, "chi2_gaussian: covariance size");
  const auto l1 = spd_factor(S1, "chi2_gaussian: Sigma1");
  const auto l2 = spd_factor(S2, "chi2_gaussian: Sigma2");
  const Mat I = Mat::Identity(d, d);
  const Mat P1 = l1.solve(I);
  const Mat P2 = l2.solve(I);
  Mat A = 2.0 * P2 - P1;
  A = 0.5 * (A + A.transpose());
  Eigen::LLT<Mat> la(A);
  if (la.info() != Eigen::Success) return divergence_infinity;
  // Translate so that mu1 = 0; the divergence is shift invariant.
  const Vec delta = mu2 - mu1;
  const Vec b = 2.0 * P2 * delta;
  const double log_one_plus = 0.5 * log_det(l1) - log_det(l2) - 0.5 * log_det(la) + 0.5 * b.dot(la.solve(b)) -
                              delta.dot(P2 * delta);
  if (!(log_one_plus > 0.0)) return 0.0;  // rounding when the two coincide
  return std::expm1(log_one_plus);
}

double chi2_numeric(const DensityFn& p, const DensityFn& q, const QuadratureGrid& grid) {
  return chi2_values(normalized(p, grid, "chi2_numeric"), normalized(q, grid, "chi2_numeric"), grid);
}

double chi2_max(const DensityFn& p, const DensityFn& q, const QuadratureGrid& grid) {
  const auto pv = normalized(p, grid, "chi2_max");
  const auto qv = normalized(q, grid, "chi2_max");
  return std::max(chi2_values(pv, qv, grid), chi2_values(qv, pv, grid));
}

double overlap_delta(const DensityFn& p, const DensityFn& q, double c, const QuadratureGrid& grid) {
  if (!(c > 0.0)) throw Error(ErrorCode::invalid_argument, "overlap_delta: scale factor must be positive");
  const auto pv = normalized(p, grid, "overlap_delta");
  const auto qv = normalized(q, grid, "overlap_delta");
  std::vector<double> m(pv.size());
  for (std::size_t k = 0; k < m.size(); ++k) m[k] = std::min(c * pv[k], qv[k]);
  return grid.sum(m);
}

double kl_numeric(const DensityFn& p, const DensityFn& q, const QuadratureGrid& grid) {
  return kl_values(normalized(p, grid, "kl_numeric"), normalized(q, grid, "kl_numeric"), grid);
}

double chi2_discrete(const Vec& p, const Vec& q) {
  require_dim(q, p.size(), "chi2_discrete");
  double s = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (q[k] == 0.0) continue;
    if (p[k] == 0.0) return divergence_infinity;
    s += q[k] * q[k] / p[k];
  }
  return std::max(0.0, s - 1.0);
}

double chi2_max_discrete(const Vec& p, const Vec& q) { return std::max(chi2_discrete(p, q), chi2_discrete(q, p)); }

double overlap_discrete(const Vec& p, const Vec& q, double c) {
  require_dim(q, p.size(), "overlap_discrete");
  if (!(c > 0.0)) throw Error(ErrorCode::invalid_argument, "overlap_discrete: scale factor must be positive");
  return (c * p).cwiseMin(q).sum();
}

void CheckReport::record(double margin, bool ok) {
  ++instances;
  if (!ok) ++violations;
  worst_margin = std::min(worst_margin, margin);
}

nlohmann::json to_json(const CheckReport& r) {
  nlohmann::json j = {{"check", r.check},
                      {"instances", r.instances},
                      {"violations", r.violations},
                      {"worst_margin", r.instances ? nlohmann::json(r.worst_margin) : nlohmann::json(nullptr)},
                      {"pass", r.pass()}};
  if (!r.details.empty()) j["details"] = r.details;
  return j;
}

CheckReport check_temp_scaling_bounds(const MixtureTarget& target, double beta, const std::vector<Vec>& probes) {
  if (!(beta > 0.0 && beta <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "check_temp_scaling_bounds: beta must be in (0, 1]");
  }
  CheckReport report;
  report.check = "temperature-scaling";
  const double log_w_min = std::log(target.w_min());
  double min_ratio = std::numeric_limits<double>::infinity();
  double max_ratio = -min_ratio;
  const Eigen::Index m = target.components();
  Vec a(m), b(m);
  for (const Vec& x : probes) {
    require_dim(x, target.dim(), "check_temp_scaling_bounds");
    if (!x.allFinite()) throw Error(ErrorCode::non_finite, "check_temp_scaling_bounds: probe is not finite");
    for (Eigen::Index i = 0; i < m; ++i) {
      const double fi = target.base().value(x - target.center(i));
      a[i] = target.log_weights()[i] - fi;
      b[i] = target.log_weights()[i] - beta * fi;
    }
    const double log_g = beta * log_sum_exp(a);
    const double log_g_tilde = log_sum_exp(b);
    const double log_ratio = log_g - log_g_tilde;
    // Both sides are equal in exact arithmetic when beta = 1 or m = 1; allow
    // for the last bit of rounding in the log-sum-exp.
    const double tol = 1e-12 * std::max(1.0, std::abs(log_g));
    const double margin = std::min(log_ratio, -log_w_min - log_ratio);
    report.record(margin, margin >= -tol);
    min_ratio = std::min(min_ratio, log_ratio);
    max_ratio = std::max(max_ratio, log_ratio);
  }
  report.details = {{"beta", beta},
                    {"w_min", target.w_min()},
                    {"min_ratio", std::exp(min_ratio)},
                    {"max_ratio", std::exp(max_ratio)},
                    {"upper_bound", 1.0 / target.w_min()}};
  return report;
}

bool PartitionRatioReport::pass() const { return ratio >= lower && ratio <= upper && ratio >= floor; }

QuadratureGrid grid_for_target(const MixtureTarget& target, double alpha, std::size_t nodes) {
  if (target.dim() > 2) throw Error(ErrorCode::invalid_argument, "grid_for_target: quadrature needs d <= 2");
  if (!(alpha > 0.0)) throw Error(ErrorCode::invalid_argument, "grid_for_target: alpha must be positive");
  double scale = target.base().scale();
  if (target.base().kind() == BaseKind::quadratic_form) scale = 1.0 / std::sqrt(target.base().kappa());
  const double pad = 12.0 * scale / std::sqrt(alpha);
  std::vector<std::array<double, 2>> bounds;
  for (Eigen::Index a = 0; a < target.dim(); ++a) {
    bounds.push_back({target.centers().row(a).minCoeff() - pad, target.centers().row(a).maxCoeff() + pad});
  }
  return QuadratureGrid(bounds, nodes);
}

double log_partition_quadrature(const MixtureTarget& target, double beta, const QuadratureGrid& grid) {
  if (grid.dim() != target.dim()) throw Error(ErrorCode::dimension_mismatch, "log_partition_quadrature: grid");
  if (!(beta > 0.0)) throw Error(ErrorCode::invalid_argument, "log_partition_quadrature: beta must be positive");
  // Integrate e^{-beta f} relative to e^{-beta f_min} to stay clear of underflow.
  const auto f = grid.evaluate([&](const Vec& x) { return mixture_log_density(target, x); });
  const double f_min = *std::min_element(f.begin(), f.end());
  std::vector<double> v(f.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = std::exp(-beta * (f[k] - f_min));
  const std::size_t n = grid.nodes_per_axis();
  double edge = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const bool on_edge = grid.dim() == 1 ? (k == 0 || k + 1 == n)
                                         : (k / n == 0 || k / n + 1 == n || k % n == 0 || k % n + 1 == n);
    if (on_edge) edge = std::max(edge, v[k]);
  }
  if (edge > 1e-12) {
    throw Error(ErrorCode::precondition, "log_partition_quadrature: grid does not cover e^{-beta f}");
  }
  return std::log(grid.sum(v)) - beta * f_min;
}

PartitionRatioReport check_partition_ratio_bound(const MixtureTarget& target, double alpha, double beta,
                                                 const QuadratureGrid& grid, double floor) {
  if (!(alpha > 0.0 && alpha <= beta)) {
    throw Error(ErrorCode::invalid_argument, "check_partition_ratio_bound: need 0 < alpha <= beta");
  }
  if (grid.dim() != target.dim()) throw Error(ErrorCode::dimension_mismatch, "check_partition_ratio_bound: grid");
  PartitionRatioReport r;
  r.alpha = alpha;
  r.beta = beta;
  r.floor = floor;
  r.ratio = std::exp(log_partition_quadrature(target, beta, grid) - log_partition_quadrature(target, alpha, grid));
  const double d = static_cast<double>(target.dim());
  const double D = target.center_bound();
  const double log_term = std::log(2.0 / target.w_min());
  if (target.base().kind() == BaseKind::isotropic_gaussian) {
    const double Dp = D / target.base().sigma();
    const double c = Dp + (std::sqrt(d) + 2.0 * std::sqrt(log_term)) / std::sqrt(alpha);
    r.lower = 0.5 * std::exp(-2.0 * (beta - alpha) * c * c);
  } else {
    const double kappa = target.base().kappa();
    const double K = target.base().smoothness();
    const double c =
        D + (std::sqrt(d) + std::sqrt(d * std::log(K / kappa) + 2.0 * log_term)) / std::sqrt(alpha * kappa);
    r.lower = 0.5 * std::exp(-0.5 * (beta - alpha) * K * c * c);
  }
  return r;
}

Inequality kl_mixture_bound(const Vec& w, const Vec& w_prime, const std::vector<DensityFn>& P,
                            const std::vector<DensityFn>& Q, const QuadratureGrid& grid) {
  const auto m = static_cast<std::size_t>(w.size());
  if (w_prime.size() != w.size() || P.size() != m || Q.size() != m) {
    throw Error(ErrorCode::dimension_mismatch, "kl_mixture_bound: component counts differ");
  }
  std::vector<std::vector<double>> pv, qv;
  for (std::size_t i = 0; i < m; ++i) {
    pv.push_back(normalized(P[i], grid, "kl_mixture_bound"));
    qv.push_back(normalized(Q[i], grid, "kl_mixture_bound"));
  }
  std::vector<double> mix_p(grid.size(), 0.0), mix_q(grid.size(), 0.0);
  Inequality out;
  double kl_w = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      mix_p[k] += w[ii] * pv[i][k];
      mix_q[k] += w_prime[ii] * qv[i][k];
    }
    if (w[ii] > 0.0) {
      kl_w += w_prime[ii] > 0.0 ? w[ii] * std::log(w[ii] / w_prime[ii]) : divergence_infinity;
      out.rhs += w[ii] * kl_values(pv[i], qv[i], grid);
    }
  }
  out.rhs += kl_w;
  out.lhs = kl_values(mix_p, mix_q, grid);
  return out;
}

Inequality change_of_measure_bound(const DensityFn& p, const DensityFn& q, const std::function<double(const Vec&)>& g,
                                   const QuadratureGrid& grid) {
  const auto pv = normalized(p, grid, "change_of_measure_bound");
  const auto qv = normalized(q, grid, "change_of_measure_bound");
  const auto gv = grid.evaluate(g);
  std::vector<double> t(gv.size());
  auto expect = [&](const std::vector<double>& dens, auto&& fn) {
    for (std::size_t k = 0; k < t.size(); ++k) t[k] = dens[k] * fn(gv[k]);
    return grid.sum(t);
  };
  const double ep = expect(pv, [](double x) { return x; });
  const double eq = expect(qv, [](double x) { return x; });
  const double var = expect(pv, [ep](double x) { return (x - ep) * (x - ep); });
  Inequality out;
  out.lhs = (ep - eq) * (ep - eq);
  out.rhs = var * chi2_values(pv, qv, grid);
  return out;
}

Inequality overlap_chi_bound(const DensityFn& p, const DensityFn& q, const QuadratureGrid& grid) {
  const auto pv = normalized(p, grid, "overlap_chi_bound");
  const auto qv = normalized(q, grid, "overlap_chi_bound");
  std::vector<double> r(pv.size());
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = std::min(pv[k], qv[k]);
  const double delta = grid.sum(r);
  if (!(delta > 0.0)) throw Error(ErrorCode::precondition, "overlap_chi_bound: densities do not overlap");
  for (double& x : r) x /= delta;
  Inequality out;
  out.lhs = chi2_values(pv, r, grid);
  out.rhs = 1.0 / delta;
  return out;
}

DensityFn gaussian_density(const Vec& mu, const Mat& S) {
  const auto llt = spd_factor(S, "gaussian_density");
  const double d = static_cast<double>(mu.size());
  const double log_norm = -0.5 * d * std::log(2.0 * std::numbers::pi) - 0.5 * log_det(llt);
  const Mat L = llt.matrixL();
  return [mu, L, log_norm](const Vec& x) {
    const Vec z = L.triangularView<Eigen::Lower>().solve(x - mu);
    return std::exp(log_norm - 0.5 * z.squaredNorm());
  };
}

}  // namespace stlmc
