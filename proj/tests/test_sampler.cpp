#include "stlmc/diagnostics.hpp"
#include "stlmc/divergences.hpp"
#include "stlmc/fixtures.hpp"
#include "stlmc/sampler.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace stlmc;

namespace {

OraclePtr flat(Eigen::Index d) {
  return std::make_shared<FunctionOracle>(d, [](const Vec&) { return 0.0; },
                                          [](const Vec& x) { return Vec(Vec::Zero(x.size())); });
}

OraclePtr quadratic(Eigen::Index d) {
  return std::make_shared<FunctionOracle>(d, [](const Vec& x) { return 0.5 * x.squaredNorm(); },
                                          [](const Vec& x) { return x; });
}

TemperatureLadder ladder(std::vector<double> betas, std::vector<double> log_z) {
  TemperatureLadder l;
  const std::size_t n = betas.size();
  l.betas = std::move(betas);
  l.rel_probs.assign(n, 1.0 / static_cast<double>(n));
  l.log_partition = std::move(log_z);
  l.ratio_bound = 1e9;
  return l;
}

RunParams params(double lambda, double eta, double T, double init_std = 1.0) {
  RunParams p;
  p.swap_rate = lambda;
  p.step_size = eta;
  p.total_time = T;
  p.init_std = init_std;
  return p;
}

// Stationary variance of x <- (1 - eta) x + sqrt(2 eta) xi, simulated with a
// separate generator and a plain scalar loop.
double independent_ou_variance(double eta, std::size_t steps, std::size_t burn, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n01;
  double x = 0.0, s = 0.0, s2 = 0.0;
  for (std::size_t k = 0; k < steps + burn; ++k) {
    x = (1.0 - eta) * x + std::sqrt(2.0 * eta) * n01(gen);
    if (k >= burn) {
      s += x;
      s2 += x * x;
    }
  }
  const double m = s / static_cast<double>(steps);
  return s2 / static_cast<double>(steps) - m * m;
}

}  // namespace

TEST_CASE("langevin step: pure diffusion") {
  const auto o = flat(2);
  RngStream rng(1);
  const Vec x = Vec::Constant(2, 3.0);
  Vec s = Vec::Zero(2), s2 = Vec::Zero(2);
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    const Vec y = langevin_step(*o, 1.0, x, 0.5, rng) - x;
    s += y;
    s2 += y.cwiseProduct(y);
  }
  for (int c = 0; c < 2; ++c) {
    const double var = s2[c] / n - (s[c] / n) * (s[c] / n);
    CHECK(var == doctest::Approx(1.0).epsilon(0.03));
  }
}

TEST_CASE("langevin step: gradient descent without noise") {
  const auto o = quadratic(2);
  const Vec y = langevin_step(*o, 1.0, Vec{{1.0, 0.0}}, 0.1, Vec(Vec::Zero(2)));
  CHECK(y[0] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(y[1] == 0.0);
  const Vec z = langevin_step(*o, 0.5, Vec{{1.0, 0.0}}, 0.1, Vec(Vec::Zero(2)));
  CHECK(z[0] == doctest::Approx(0.95).epsilon(1e-15));
}

TEST_CASE("langevin: stationary variance of the discretized OU process") {
  const double eta = 1e-3;
  const Eigen::Index d = 20;
  const std::uint64_t steps = 1000000;
  RngStream rng(7);
  const RunRecord rec = run_plain_langevin(*quadratic(d), 1.0, eta, steps, Vec::Zero(d), rng, 10);
  double var = 0.0;
  const std::size_t burn = 1000;
  for (Eigen::Index c = 0; c < d; ++c) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t r = burn; r < rec.rows(); ++r) {
      const double v = rec.position(r)[c];
      s += v;
      s2 += v * v;
    }
    const double n = static_cast<double>(rec.rows() - burn);
    var += s2 / n - (s / n) * (s / n);
  }
  var /= static_cast<double>(d);
  const double exact = 1.0 / (1.0 - eta / 2.0);
  CHECK(var == doctest::Approx(exact).epsilon(0.05));
  const double independent = independent_ou_variance(eta, 20000000, 10000, 99);
  CHECK(independent == doctest::Approx(exact).epsilon(0.05));
  CHECK(var == doctest::Approx(independent).epsilon(0.05));
}

TEST_CASE("poisson swap times") {
  SUBCASE("mean count") {
    RngStream rng(2);
    double total = 0.0;
    const int runs = 1000;
    for (int k = 0; k < runs; ++k) {
      const auto t = draw_swap_times(2.0, 1000.0, rng);
      total += static_cast<double>(t.size());
      for (std::size_t i = 1; i < t.size(); ++i) REQUIRE(t[i] > t[i - 1]);
      if (!t.empty()) REQUIRE(t.back() < 1000.0);
    }
    CHECK(std::abs(total / runs - 2000.0) <= 3.0 * std::sqrt(2000.0 / runs));
  }
  SUBCASE("tail") {
    RngStream rng(3);
    int big = 0;
    const int runs = 100000;
    for (int k = 0; k < runs; ++k) big += draw_swap_times(1.0, 10.0, rng).size() >= 40;
    CHECK(static_cast<double>(big) / runs < 1e-3);
  }
  SUBCASE("horizon before the first event") {
    RngStream rng(4);
    CHECK(draw_swap_times(1.0, 1e-12, rng).empty());
  }
}

TEST_CASE("swap acceptance") {
  const auto o = std::make_shared<FunctionOracle>(1, [](const Vec& x) { return x[0] * x[0]; },
                                                  [](const Vec& x) { return Vec(2.0 * x); });
  SUBCASE("identical levels always accept") {
    const auto l = ladder({0.5, 0.5}, {0.2, 0.2});
    RngStream rng(5);
    for (int k = 0; k < 1000; ++k) {
      const auto out = swap_attempt({0, Vec::Constant(1, 1.7)}, l, *o, rng);
      if (out.in_bounds) CHECK(out.accepted);
      else CHECK(out.state.level == 0);
    }
  }
  SUBCASE("f = 0 reduces to the partition ratio") {
    const auto l = ladder({0.5, 1.0}, {0.0, std::log(3.0)});
    CHECK(swap_log_ratio(l, 0, 1, 0.0) == doctest::Approx(-std::log(3.0)));
    CHECK(swap_log_ratio(l, 1, 0, 0.0) == doctest::Approx(std::log(3.0)));
  }
  SUBCASE("Monte Carlo frequency matches the formula") {
    const auto l = ladder({0.3, 1.0}, {0.4, 0.1});
    const Vec x = Vec::Constant(1, 0.8);
    const double p = std::exp(std::min(0.0, swap_log_ratio(l, 0, 1, o->value(x))));
    RngStream rng(6);
    int tried = 0, acc = 0;
    for (int k = 0; k < 100000; ++k) {
      const auto out = swap_attempt({0, x}, l, *o, rng);
      CHECK(out.state.position == x);
      if (!out.in_bounds) continue;
      ++tried;
      acc += out.accepted;
    }
    const double se = std::sqrt(p * (1 - p) / tried);
    CHECK(std::abs(static_cast<double>(acc) / tried - p) <= 3 * se);
    CHECK(std::abs(tried - 50000) < 5 * std::sqrt(25000.0));
  }
}

TEST_CASE("one-level run without swaps is plain Langevin") {
  const auto o = quadratic(2);
  const auto l = ladder({1.0}, {0.0});
  const RunParams p = params(0.0, 0.01, 1.0, 1.5);
  RngStream a(11);
  StlmcOptions opt;
  opt.thin = 1;
  const RunRecord rec = run_stlmc(*o, l, p, a, opt);

  RngStream b(11);
  Vec x = 1.5 * b.normal_vector(2);
  const std::size_t k = static_cast<std::size_t>(std::ceil(1.0 / 0.01));
  REQUIRE(rec.rows() == k);
  for (std::size_t s = 0; s < k; ++s) {
    x = langevin_step(*o, 1.0, x, 1.0 / static_cast<double>(k), b);
    CHECK((rec.position(s) - x).norm() == 0.0);
  }
  CHECK(rec.swap_events == 0);
  CHECK_FALSE(rec.rejected);
}

TEST_CASE("standard Gaussian moments from a single-level run") {
  const auto o = quadratic(1);
  const auto l = ladder({1.0}, {0.0});
  RngStream rng(12);
  StlmcOptions opt;
  opt.thin = 10;
  const RunRecord rec = run_stlmc(*o, l, params(0.0, 0.01, 5000.0), rng, opt);
  std::vector<double> xs;
  for (std::size_t r = 100; r < rec.rows(); ++r) xs.push_back(rec.position(r)[0]);
  const double n = static_cast<double>(xs.size());
  double m = 0, v = 0;
  for (double x : xs) m += x;
  m /= n;
  for (double x : xs) v += (x - m) * (x - m);
  v /= n;
  const auto ac = integrated_autocorr(xs, 500);
  CHECK(std::abs(m) <= 3.0 * std::sqrt(v / ac.ess));
  CHECK(v == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("tempering run bookkeeping") {
  const Fixture f = builtin_fixture("two-mode-symmetric");
  const auto b = build_ladder_gaussian(1, 5.0, 1.0, 0.5, 0.1);
  TemperatureLadder l = b.ladder;
  for (std::size_t i = 0; i < l.size(); ++i) {
    l.log_partition[i] = log_partition_quadrature(*f.target, l.betas[i], grid_for_target(*f.target, l.betas[i], 1024));
  }
  RngStream rng(13);
  const RunRecord rec = run_stlmc(*f.oracle, l, params(2.0, 0.02, 4000.0, 5.0), rng, {});
  std::uint64_t rows = 0;
  for (auto c : rec.occupancy) rows += c;
  CHECK(rows == rec.rows());
  for (auto lv : rec.levels) CHECK(lv < l.size());
  std::uint64_t attempts = 0;
  for (std::size_t i = 0; i < rec.swap_attempts.size(); ++i) {
    CHECK(rec.swap_accepts[i] <= rec.swap_attempts[i]);
    attempts += rec.swap_attempts[i];
  }
  CHECK(attempts <= rec.swap_events);
  CHECK(rec.rejected == (rec.final_state.level + 1 != l.size()));
  for (std::size_t r = 1; r < rec.rows(); ++r) CHECK(rec.times[r] >= rec.times[r - 1]);

  // Both modes show up on the target level.
  const auto top = rec.positions_at(l.size() - 1);
  std::size_t pos = 0;
  for (const auto& x : top) pos += x[0] > 0;
  CHECK(pos > 0);
  CHECK(pos < top.size());
}

TEST_CASE("continuation from a given state") {
  const auto o = quadratic(1);
  const auto l = ladder({0.5, 1.0}, {0.0, -0.5 * std::log(2.0)});
  StlmcOptions opt;
  opt.initial_position = Vec::Constant(1, 2.5);
  opt.initial_level = 1;
  opt.thin = 1;
  RngStream rng(14);
  const RunRecord rec = run_stlmc(*o, l, params(1.0, 0.01, 1.0), rng, opt);
  CHECK(rec.rows() >= 1);
  opt.initial_level = 2;
  CHECK_THROWS_AS(run_stlmc(*o, l, params(1.0, 0.01, 1.0), rng, opt), Error);
}

TEST_CASE("re-running until the target level") {
  const auto o = quadratic(1);
  // The top level is practically unreachable: Z^ claims it is e^800 times larger.
  const auto l = ladder({0.5, 1.0}, {0.0, 800.0});
  RngStream rng(15);
  try {
    sample_stlmc(*o, l, params(1.0, 0.01, 2.0), rng, 5);
    FAIL("expected rejection_ceiling");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::rejection_ceiling);
  }
  const auto easy = ladder({1.0}, {0.0});
  const auto s = sample_stlmc(*o, easy, params(1.0, 0.01, 2.0), rng, 5);
  CHECK(s.runs == 1);
}

TEST_CASE("partition ratio estimator") {
  const auto o = quadratic(1);
  std::vector<Vec> one{Vec::Constant(1, 0.0)};
  CHECK(estimate_partition_ratio(one, *o, 0.5, 1.0) == 1.0);
  std::vector<Vec> some{Vec::Constant(1, 1.3), Vec::Constant(1, -2.0)};
  CHECK(estimate_partition_ratio(some, *o, 0.7, 0.7) == 1.0);
  CHECK_THROWS_AS(estimate_partition_ratio({}, *o, 0.5, 1.0), Error);

  // Exact draws from e^{-f/2} = N(0, 2).
  RngStream rng(16);
  std::vector<Vec> xs;
  for (int k = 0; k < 10000; ++k) xs.push_back(std::sqrt(2.0) * rng.normal_vector(1));
  CHECK(estimate_partition_ratio(xs, *o, 0.5, 1.0) == doctest::Approx(std::sqrt(0.5)).epsilon(0.05));
}

TEST_CASE("main loop") {
  SUBCASE("one level skips estimation") {
    const auto o = quadratic(1);
    RngStream rng(17);
    MainOptions mo;
    mo.final_samples = 3;
    const auto r = run_main(*o, ladder({1.0}, {0.0}), params(1.0, 0.01, 5.0), rng, mo);
    CHECK(r.samples.size() == 3);
    CHECK(r.stages.size() == 1);
    CHECK(r.ladder.log_partition == std::vector<double>{0.0});
  }
  SUBCASE("single Gaussian estimates within the interval") {
    const Fixture f = builtin_fixture("single-gaussian");
    const auto b = build_ladder_gaussian(1, f.ladder.center_bound, 1.0, 1.0, 0.1);
    RngStream rng(18);
    const auto r = run_main(*f.oracle, b.ladder, params(2.0, 0.01, 20.0, 3.0), rng, {});
    std::vector<double> exact;
    for (double beta : b.ladder.betas) exact.push_back(gaussian_log_partition(*f.target, beta));
    CHECK(r.stages.size() == b.ladder.size());
    CHECK(r.stages[0].samples == samples_per_stage(b.ladder.size(), 0.05, 1.0));
    CHECK(validate_partition_estimates(r.ladder, exact).all());
  }
  CHECK(samples_per_stage(5, 0.05, 1.0) == static_cast<std::size_t>(std::ceil(25 * std::log(20.0))));
}

TEST_CASE("plain Langevin stays in its mode") {
  const Fixture f = builtin_fixture("two-mode-symmetric");
  RngStream rng(19);
  const RunRecord rec = run_plain_langevin(*f.oracle, 1.0, 1e-2, 100000, Vec::Constant(1, 5.0), rng, 1);
  std::size_t neg = 0;
  for (std::size_t r = 0; r < rec.rows(); ++r) neg += rec.position(r)[0] < 0;
  CHECK(static_cast<double>(neg) / static_cast<double>(rec.rows()) < 0.01);
  CHECK_THROWS_AS(run_plain_langevin(*f.oracle, 1.0, 1e-2, 0, Vec::Constant(1, 5.0), rng), Error);
}
