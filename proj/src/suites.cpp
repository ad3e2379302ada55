#include "stlmc/suites.hpp"

#include "stlmc/decomposition.hpp"
#include "stlmc/divergences.hpp"
#include "stlmc/fixtures.hpp"
#include "stlmc/oracle.hpp"
#include "stlmc/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numbers>
#include <sstream>
#include <thread>

namespace stlmc {

using nlohmann::json;

namespace {

// Runs fn(0..n-1) on up to `jobs` threads; results come back in index order so
// the output does not depend on scheduling.
template <class R, class F>
std::vector<R> parallel_map(std::size_t n, unsigned jobs, F fn) {
  std::vector<R> out(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < n; k = next++) {
      try {
        out[k] = fn(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

const char* decomposition_csv_header = "theorem,instance,hash,states,components,K,C,C_bar,C_star,bound,slack,pass\n";

void csv_row(std::ostringstream& os, const DecompositionReport& r, std::size_t instance) {
  os << r.theorem << ',' << instance << ',' << r.instance_hash << ',' << r.states << ',' << r.components << ','
     << fmt(r.K) << ',' << fmt(r.C) << ',' << fmt(r.C_bar) << ',' << fmt(r.C_star) << ',' << fmt(r.bound) << ','
     << fmt(r.slack) << ',' << (r.pass ? "true" : "false") << '\n';
}

// Random SPD matrix with eigenvalues in [lo, hi].
Mat random_spd(RngStream& rng, Eigen::Index d, double lo, double hi) {
  if (d == 1) return Mat::Constant(1, 1, lo + (hi - lo) * rng.uniform());
  const double angle = std::numbers::pi * rng.uniform();
  Mat R(2, 2);
  R << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  Vec ev(2);
  ev << lo + (hi - lo) * rng.uniform(), lo + (hi - lo) * rng.uniform();
  Mat S = R * ev.asDiagonal() * R.transpose();
  return 0.5 * (S + S.transpose());
}

// Box covering N(mu, S) out to `sds` standard deviations along every axis.
void cover(std::vector<std::array<double, 2>>& box, const Vec& mu, const Mat& S, double sds) {
  for (Eigen::Index a = 0; a < mu.size(); ++a) {
    const double r = sds * std::sqrt(S(a, a));
    auto& b = box[static_cast<std::size_t>(a)];
    b[0] = std::min(b[0], mu[a] - r);
    b[1] = std::max(b[1], mu[a] + r);
  }
}

struct Gaussian1D {
  double mu;
  double sigma;
};

// A 1D density that is a one- or two-component Gaussian mixture.
struct Mix1D {
  std::vector<double> w;
  std::vector<Gaussian1D> comps;

  DensityFn density() const {
    return [w = w, comps = comps](const Vec& x) {
      double p = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double z = (x[0] - comps[i].mu) / comps[i].sigma;
        p += w[i] * std::exp(-0.5 * z * z) / (comps[i].sigma * std::sqrt(2.0 * std::numbers::pi));
      }
      return p;
    };
  }
  double lo() const {
    double v = 0.0;
    for (const auto& c : comps) v = std::min(v, c.mu - 12.0 * c.sigma);
    return v;
  }
  double hi() const {
    double v = 0.0;
    for (const auto& c : comps) v = std::max(v, c.mu + 12.0 * c.sigma);
    return v;
  }
};

Mix1D random_mix(RngStream& rng) {
  Mix1D m;
  const std::size_t k = 1 + rng.index(2);
  for (std::size_t i = 0; i < k; ++i) {
    m.w.push_back(0.2 + rng.uniform());
    m.comps.push_back({-2.0 + 4.0 * rng.uniform(), 0.6 + 0.8 * rng.uniform()});
  }
  double s = 0.0;
  for (double v : m.w) s += v;
  for (double& v : m.w) v /= s;
  return m;
}

QuadratureGrid grid_for(const std::vector<const Mix1D*>& mixes, std::size_t nodes = 512) {
  double lo = 0.0, hi = 0.0;
  for (const auto* m : mixes) {
    lo = std::min(lo, m->lo());
    hi = std::max(hi, m->hi());
  }
  return QuadratureGrid({{lo, hi}}, nodes);
}

json check_json(const CheckReport& r) { return to_json(r); }

}  // namespace

SuiteOutcome simple_decomposition_suite(std::uint64_t seed, std::size_t instances, unsigned jobs) {
  struct Item {
    DecompositionReport main, overlap;
    json instance;
  };
  const RngStream root(seed);
  auto items = parallel_map<Item>(instances, jobs, [&](std::size_t k) {
    RngStream rng = root.child(k);
    SimpleInstance inst = random_simple_instance(rng, 64, 3);
    Item it;
    it.main = verify_simple_decomposition(inst.chain, inst.components, inst.weights, false);
    it.overlap = verify_simple_decomposition(inst.chain, inst.components, inst.weights, true);
    it.instance = inst.description;
    return it;
  });
  SuiteOutcome out;
  out.name = "simple-decomposition";
  out.pass = instances > 0;
  json entries = json::array();
  std::ostringstream csv;
  csv << decomposition_csv_header;
  std::size_t passed = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < items.size(); ++k) {
    const Item& it = items[k];
    const bool ok = it.main.pass && it.overlap.pass;
    out.pass = out.pass && ok;
    passed += ok;
    worst = std::min({worst, it.main.slack, it.overlap.slack});
    json e = to_json(it.main);
    e["overlap_variant"] = to_json(it.overlap);
    e["instance"] = it.instance;
    entries.push_back(std::move(e));
    csv_row(csv, it.main, k);
    csv_row(csv, it.overlap, k);
  }
  out.report = {{"check", out.name},
                {"seed", seed},
                {"instances", instances},
                {"passed", passed},
                {"worst_slack", worst},
                {"tolerance", decomposition_tolerance},
                {"pass", out.pass},
                {"entries", entries}};
  out.csv = csv.str();
  return out;
}

SuiteOutcome tempering_decomposition_suite(std::uint64_t seed, std::size_t instances, std::vector<double> Ks,
                                           unsigned jobs) {
  struct Item {
    std::vector<DecompositionReport> reports;
    json instance;
  };
  const RngStream root(seed);
  auto items = parallel_map<Item>(instances, jobs, [&](std::size_t k) {
    RngStream rng = root.child(k);
    TemperingInstance inst = random_tempering_instance(rng, 3, 64);
    Item it;
    for (double K : Ks) {
      it.reports.push_back(verify_tempering_decomposition(inst.chain, inst.components, inst.weights,
                                                          inst.rel_probs, K, inst.swap_rate));
    }
    it.instance = inst.description;
    return it;
  });
  SuiteOutcome out;
  out.name = "tempering-decomposition";
  out.pass = instances > 0 && !Ks.empty();
  json entries = json::array();
  std::ostringstream csv;
  csv << decomposition_csv_header;
  std::size_t checks = 0, passed = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < items.size(); ++k) {
    json per_k = json::array();
    double best_slack = std::numeric_limits<double>::infinity();
    double best_K = 0.0;
    for (const auto& r : items[k].reports) {
      ++checks;
      passed += r.pass;
      out.pass = out.pass && r.pass;
      worst = std::min(worst, r.slack);
      if (r.slack < best_slack) {
        best_slack = r.slack;
        best_K = r.K;
      }
      per_k.push_back(to_json(r));
      csv_row(csv, r, k);
    }
    entries.push_back({{"instance", items[k].instance}, {"reports", per_k}, {"tightest_K", best_K}});
  }
  out.report = {{"check", out.name}, {"seed", seed},     {"instances", instances},
                {"K", Ks},           {"checks", checks}, {"passed", passed},
                {"worst_slack", worst}, {"pass", out.pass}, {"entries", entries}};
  out.csv = csv.str();
  return out;
}

SuiteOutcome canonical_path_suite(std::uint64_t seed, std::size_t chains, std::size_t functions) {
  CheckReport var_check;
  var_check.check = "canonical-paths";
  std::size_t gap_violations = 0;
  double max_ratio = 0.0;  // C* / rho
  const RngStream root(seed);
  for (std::size_t c = 0; c < chains; ++c) {
    RngStream rng = root.child(c);
    const std::size_t n = 4 + rng.index(21);
    Mat cond = Mat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    auto link = [&](std::size_t x, std::size_t y) {
      const double v = 0.1 + 1.9 * rng.uniform();
      cond(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) = v;
      cond(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(x)) = v;
    };
    for (std::size_t x = 1; x < n; ++x) link(x, rng.index(x));  // random spanning tree
    for (std::size_t x = 0; x < n; ++x) {
      for (std::size_t y = x + 1; y < n; ++y) {
        if (cond(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) == 0.0 && rng.uniform() < 0.15) {
          link(x, y);
        }
      }
    }
    Vec pi(static_cast<Eigen::Index>(n));
    for (Eigen::Index x = 0; x < pi.size(); ++x) pi[x] = 0.1 + rng.uniform();
    pi /= pi.sum();
    Mat Q = pi.cwiseInverse().asDiagonal() * cond;
    Q.diagonal() = -Q.rowwise().sum();
    const FiniteMarkovProcess chain(Q, pi);
    Mat rates = Q;
    rates.diagonal().setZero();
    const Congestion cg = congestion_bound(rates, pi, geodesic_paths(rates));
    for (std::size_t k = 0; k < functions; ++k) {
      const Vec g = rng.normal_vector(pi.size());
      Inequality q{variance(pi, g), cg.rho * dirichlet_form(chain, g)};
      var_check.record(q, 1e-12 * std::max(1.0, q.rhs));
    }
    const double cstar = poincare_constant(chain);
    max_ratio = std::max(max_ratio, cstar / cg.rho);
    if (cstar > cg.rho * (1.0 + 1e-9)) ++gap_violations;
  }
  SuiteOutcome out;
  out.name = "canonical-paths";
  out.pass = var_check.pass() && gap_violations == 0;
  out.report = to_json(var_check);
  out.report["chains"] = chains;
  out.report["functions_per_chain"] = functions;
  out.report["poincare_vs_rho_violations"] = gap_violations;
  out.report["max_poincare_over_rho"] = max_ratio;
  out.report["pass"] = out.pass;
  return out;
}

SuiteOutcome chi2_suite(std::uint64_t seed, std::size_t pairs, double rel_tol) {
  json entries = json::array();
  double worst = 0.0;
  std::size_t failures = 0;
  auto compare = [&](const Vec& mu1, const Mat& S1, const Vec& mu2, const Mat& S2, const std::string& label) {
    const double closed = chi2_gaussian(mu1, S1, mu2, S2);
    const Eigen::Index d = mu1.size();
    // The grid covers both densities and the integrand q^2/p ~ N(A^{-1} b, A^{-1}).
    std::vector<std::array<double, 2>> box(static_cast<std::size_t>(d), {0.0, 0.0});
    for (Eigen::Index a = 0; a < d; ++a) box[static_cast<std::size_t>(a)] = {mu1[a], mu1[a]};
    cover(box, mu1, S1, 12.0);
    cover(box, mu2, S2, 12.0);
    const Mat P1 = S1.inverse(), P2 = S2.inverse();
    const Mat A = 2.0 * P2 - P1;
    const Mat Ainv = A.inverse();
    cover(box, Ainv * (2.0 * P2 * mu2 - P1 * mu1), Ainv, 12.0);
    const QuadratureGrid grid(box, d == 1 ? 1024 : 256);
    const double numeric = chi2_numeric(gaussian_density(mu1, S1), gaussian_density(mu2, S2), grid);
    const double rel = std::abs(numeric - closed) / std::max(std::abs(closed), 1e-300);
    const bool ok = rel <= rel_tol;
    failures += !ok;
    worst = std::max(worst, rel);
    entries.push_back({{"label", label},
                       {"d", d},
                       {"closed_form", closed},
                       {"quadrature", numeric},
                       {"relative_error", rel},
                       {"pass", ok}});
  };
  // chi^2(N(1,1) || N(0,1)) = e - 1.
  compare(Vec::Zero(1), Mat::Identity(1, 1), Vec::Ones(1), Mat::Identity(1, 1), "forced: N(1,1) vs N(0,1)");
  const double forced = chi2_gaussian(Vec::Zero(1), Mat::Identity(1, 1), Vec::Ones(1), Mat::Identity(1, 1));
  const double forced_err = std::abs(forced - (std::numbers::e - 1.0)) / (std::numbers::e - 1.0);
  RngStream rng(seed);
  for (std::size_t k = 0; k < pairs; ++k) {
    const Eigen::Index d = k % 2 == 0 ? 1 : 2;
    Vec mu1 = Vec::Zero(d), mu2(d);
    for (Eigen::Index a = 0; a < d; ++a) {
      mu1[a] = -1.0 + 2.0 * rng.uniform();
      mu2[a] = mu1[a] - 1.0 + 2.0 * rng.uniform();
    }
    Mat S1, S2;
    // Resample until 2 S2^{-1} - S1^{-1} is comfortably positive definite.
    for (;;) {
      S1 = random_spd(rng, d, 0.5, 1.5);
      S2 = random_spd(rng, d, 0.5, 1.5);
      const Mat A = 2.0 * S2.inverse() - S1.inverse();
      if (Eigen::SelfAdjointEigenSolver<Mat>(A).eigenvalues().minCoeff() > 0.3) break;
    }
    compare(mu1, S1, mu2, S2, "random " + std::to_string(k));
  }
  SuiteOutcome out;
  out.name = "chi2-gaussian";
  out.pass = failures == 0 && forced_err <= rel_tol;
  out.report = {{"check", out.name},
                {"instances", entries.size()},
                {"relative_tolerance", rel_tol},
                {"worst_relative_error", worst},
                {"forced_value", forced},
                {"forced_expected", std::numbers::e - 1.0},
                {"pass", out.pass},
                {"entries", entries}};
  return out;
}

SuiteOutcome temp_scaling_suite(std::uint64_t seed, std::size_t mixtures, std::size_t probes,
                                std::vector<double> betas) {
  RngStream rng(seed);
  json entries = json::array();
  CheckReport total;
  total.check = "temperature-scaling";
  for (std::size_t k = 0; k < mixtures; ++k) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(k % 3);
    const Eigen::Index m = 2 + static_cast<Eigen::Index>(rng.index(3));
    Mat centers(d, m);
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index a = 0; a < d; ++a) centers(a, j) = -4.0 + 8.0 * rng.uniform();
    }
    Vec w(m);
    for (Eigen::Index j = 0; j < m; ++j) w[j] = 0.1 + rng.uniform();
    w /= w.sum();
    const MixtureTarget target(w, centers, BaseFunction::isotropic_gaussian(0.5 + rng.uniform()));
    std::vector<Vec> pts;
    for (std::size_t p = 0; p < probes; ++p) {
      // Half uniform over a wide box, half near a random center.
      if (p % 2 == 0) {
        Vec x(d);
        for (Eigen::Index a = 0; a < d; ++a) x[a] = -10.0 + 20.0 * rng.uniform();
        pts.push_back(x);
      } else {
        pts.push_back(target.center(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(m)))) +
                      2.0 * rng.normal_vector(d));
      }
    }
    for (double beta : betas) {
      const CheckReport r = check_temp_scaling_bounds(target, beta, pts);
      total.instances += r.instances;
      total.violations += r.violations;
      total.worst_margin = std::min(total.worst_margin, r.worst_margin);
      json e = to_json(r);
      e["mixture"] = k;
      e["d"] = d;
      e["m"] = m;
      entries.push_back(std::move(e));
    }
  }
  SuiteOutcome out;
  out.name = total.check;
  out.pass = total.pass();
  out.report = to_json(total);
  out.report["mixtures"] = mixtures;
  out.report["betas"] = betas;
  out.report["entries"] = entries;
  return out;
}

SuiteOutcome inequality_suite(std::uint64_t seed, std::size_t instances) {
  CheckReport change, overlap, kl;
  change.check = "change-of-measure";
  overlap.check = "overlap-chi";
  kl.check = "kl-mixture";
  const RngStream root(seed);
  for (std::size_t k = 0; k < instances; ++k) {
    RngStream rng = root.child(k);
    {
      const Mix1D p = random_mix(rng), q = random_mix(rng);
      const double a = -2.0 + 4.0 * rng.uniform(), b = 0.3 + 2.0 * rng.uniform(), c = -1.0 + 2.0 * rng.uniform();
      const auto g = [a, b, c](const Vec& x) { return a * std::sin(b * x[0]) + c * x[0]; };
      change.record(change_of_measure_bound(p.density(), q.density(), g, grid_for({&p, &q})), 1e-9);
    }
    {
      const Mix1D p = random_mix(rng), q = random_mix(rng);
      overlap.record(overlap_chi_bound(p.density(), q.density(), grid_for({&p, &q})), 1e-6);
    }
    {
      Vec w(2), wp(2);
      w << 0.1 + rng.uniform(), 0.1 + rng.uniform();
      wp << 0.1 + rng.uniform(), 0.1 + rng.uniform();
      w /= w.sum();
      wp /= wp.sum();
      std::vector<Mix1D> P, Q;
      for (int i = 0; i < 2; ++i) {
        P.push_back({{1.0}, {{-2.0 + 4.0 * rng.uniform(), 0.6 + 0.8 * rng.uniform()}}});
        Q.push_back({{1.0}, {{-2.0 + 4.0 * rng.uniform(), 0.6 + 0.8 * rng.uniform()}}});
      }
      const QuadratureGrid grid = grid_for({&P[0], &P[1], &Q[0], &Q[1]});
      kl.record(kl_mixture_bound(w, wp, {P[0].density(), P[1].density()}, {Q[0].density(), Q[1].density()}, grid),
                1e-6);
    }
  }
  SuiteOutcome out;
  out.name = "inequalities";
  out.pass = change.pass() && overlap.pass() && kl.pass();
  out.report = {{"check", out.name},
                {"instances", instances},
                {"pass", out.pass},
                {"tolerances", {{"change-of-measure", 1e-9}, {"overlap-chi", 1e-6}, {"kl-mixture", 1e-6}}},
                {"checks", {check_json(change), check_json(overlap), check_json(kl)}}};
  return out;
}

SuiteOutcome partition_ratio_suite() {
  json entries = json::array();
  bool pass = true;
  auto run = [&](const std::string& label, const MixtureTarget& t, double alpha, double beta, double floor) {
    const PartitionRatioReport r = check_partition_ratio_bound(t, alpha, beta, grid_for_target(t, alpha), floor);
    pass = pass && r.pass();
    entries.push_back({{"label", label},
                       {"alpha", alpha},
                       {"beta", beta},
                       {"ratio", r.ratio},
                       {"lower", r.lower},
                       {"upper", r.upper},
                       {"floor", r.floor},
                       {"margin", r.margin()},
                       {"pass", r.pass()}});
  };
  Mat c1(1, 1);
  c1 << 0.0;
  run("standard normal", MixtureTarget(Vec::Ones(1), c1, BaseFunction::isotropic_gaussian(1.0)), 0.5, 1.0, 0.0);
  for (const char* name : {"two-mode-symmetric", "two-mode-asymmetric"}) {
    const MixtureTarget t = *builtin_fixture(name).target;
    const double D = t.center_bound(), d = 1.0;
    for (double alpha : {0.04, 0.2, 0.5}) {
      // beta - alpha = 1/(D^2 + d/alpha + ln(1/w_min)/alpha)
      const double gap = 1.0 / (D * D + d / alpha + std::log(1.0 / t.w_min()) / alpha);
      run(std::string(name) + " one-step ratio", t, alpha, std::min(1.0, alpha + gap), 0.1);
    }
  }
  Mat c2(2, 3);
  c2 << 0.0, 3.0, -2.0, 0.0, 1.0, 2.5;
  const MixtureTarget t2(Vec{{0.5, 0.3, 0.2}}, c2, BaseFunction::isotropic_gaussian(0.8));
  run("2D three-mode", t2, 0.3, 0.6, 0.0);
  SuiteOutcome out;
  out.name = "partition-ratio";
  out.pass = pass;
  out.report = {{"check", out.name}, {"instances", entries.size()}, {"pass", pass}, {"entries", entries}};
  return out;
}

SuiteOutcome adversarial_suite(std::uint64_t seed, std::size_t per_axis) {
  const Eigen::Index d = 4;
  RngStream rng(seed);
  const AdversarialTwoGaussian adv = AdversarialTwoGaussian::random(d, rng);
  const Vec& u = adv.shift();
  const double un = adv.shift_norm();
  // Orthonormal frame whose first axis is u.
  Mat frame = Eigen::HouseholderQR<Mat>(u).householderQ() * Mat::Identity(d, d);
  const Vec center = 2.0 * u;
  const double half_width = 2.2 * un;
  std::size_t total = 0, outside = 0, bound_violations = 0, exact_violations = 0;
  double worst = 0.0, worst_rounding = 0.0;
  std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
  for (;;) {
    Vec t(d);
    for (Eigen::Index a = 0; a < d; ++a) {
      t[a] = -1.0 + 2.0 * static_cast<double>(idx[static_cast<std::size_t>(a)]) / static_cast<double>(per_axis - 1);
    }
    const Vec x = center + half_width * (frame * t);
    const double f = adv.mixture(x);
    const double ft = adv.value(x);
    const double gap = std::abs(f - ft);
    worst = std::max(worst, gap);
    // f and f~ are O(|x|^2); allow for their rounding, nothing more.
    const double rounding = 16.0 * std::numeric_limits<double>::epsilon() * std::max({1.0, std::abs(f), std::abs(ft)});
    worst_rounding = std::max(worst_rounding, rounding);
    if (gap > std::log(2.0) + rounding) ++bound_violations;
    if ((x - center).norm() > 1.6 * un) {
      ++outside;
      if (ft != adv.f1(x)) ++exact_violations;
    }
    ++total;
    std::size_t a = 0;
    while (a < idx.size() && ++idx[a] == per_axis) idx[a++] = 0;
    if (a == idx.size()) break;
  }
  SuiteOutcome out;
  out.name = "adversarial-construction";
  out.pass = bound_violations == 0 && exact_violations == 0 && outside > 0;
  out.report = {{"check", out.name},
                {"d", d},
                {"u_norm", un},
                {"u_norm_expected", 8.0 * static_cast<double>(d) * std::log(2.0)},
                {"instances", total},
                {"max_abs_difference", worst},
                {"bound", std::log(2.0)},
                {"max_rounding_allowance", worst_rounding},
                {"bound_violations", bound_violations},
                {"outside_probes", outside},
                {"exactness_violations", exact_violations},
                {"pass", out.pass}};
  return out;
}

SuiteOutcome partition_estimation_suite(std::uint64_t seed, const PartitionEstimationSetup& s, unsigned jobs) {
  const Fixture fx = builtin_fixture("single-gaussian");
  const MixtureTarget& target = *fx.target;
  const LadderBuild build = build_ladder_gaussian(fx.dim(), fx.ladder.center_bound, target.base().sigma(),
                                                  fx.ladder.w_min, s.accuracy, s.constants);
  RunParams params = build.params;
  params.swap_rate = s.swap_rate;
  params.step_size = s.step_size;
  params.total_time = s.total_time;
  std::vector<double> exact;
  for (double b : build.ladder.betas) exact.push_back(gaussian_log_partition(target, b));

  struct Item {
    MainResult result;
    PartitionCheck check;
  };
  const RngStream root(seed);
  MainOptions opts;
  opts.delta = s.delta;
  auto items = parallel_map<Item>(s.seeds, jobs, [&](std::size_t k) {
    RngStream rng = root.child(k);
    Item it;
    it.result = run_main(*fx.oracle, build.ladder, params, rng, opts);
    it.check = validate_partition_estimates(it.result.ladder, exact);
    return it;
  });
  std::size_t passed = 0;
  json entries = json::array();
  for (std::size_t k = 0; k < items.size(); ++k) {
    const auto& it = items[k];
    passed += it.check.all();
    json stages = json::array();
    for (const auto& st : it.result.stages) stages.push_back(to_json(st));
    entries.push_back({{"seed_index", k},
                       {"log_partition_estimates", it.result.ladder.log_partition},
                       {"within", it.check.within},
                       {"worst_ratio", it.check.worst_ratio},
                       {"worst_level", it.check.worst_level},
                       {"langevin_steps", it.result.langevin_steps},
                       {"stages", stages},
                       {"pass", it.check.all()}});
  }
  SuiteOutcome out;
  out.name = "partition-estimation";
  out.pass = passed >= s.required;
  out.report = {{"check", out.name},
                {"fixture", fx.name},
                {"seed", seed},
                {"levels", build.ladder.size()},
                {"betas", build.ladder.betas},
                {"samples_per_stage", samples_per_stage(build.ladder.size(), s.delta, s.constants.sample_count)},
                {"exact_log_partition", exact},
                {"run", to_json(params)},
                {"seeds", s.seeds},
                {"passed", passed},
                {"required", s.required},
                {"pass", out.pass},
                {"entries", entries}};
  return out;
}

}  // namespace stlmc
