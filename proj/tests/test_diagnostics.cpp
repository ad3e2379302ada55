#include "stlmc/diagnostics.hpp"
#include "stlmc/fixtures.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace stlmc;

namespace {

MixtureTarget two_mode(double w1) {
  Mat c(1, 2);
  c << -5.0, 5.0;
  return MixtureTarget(Vec{{w1, 1.0 - w1}}, c, BaseFunction::isotropic_gaussian(1.0));
}

}  // namespace

TEST_CASE("histogram layout") {
  const auto t = two_mode(0.5);
  const auto h = make_histogram(t);
  CHECK(h.bins_per_axis() == 40);
  CHECK(h.size() == 41);
  CHECK(h.edges[0].front() == doctest::Approx(-11.0));
  CHECK(h.edges[0].back() == doctest::Approx(11.0));
  const auto exact = exact_bin_masses(t, h);
  double s = 0.0;
  for (double m : exact) s += m;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(exact.back() < 1e-8);
}

TEST_CASE("exact masses: normal CDF and per-bin quadrature agree") {
  Mat c(2, 2);
  c << -1.0, 2.0, 0.5, 0.0;
  const MixtureTarget iso(Vec{{0.4, 0.6}}, c, BaseFunction::isotropic_gaussian(1.3));
  const Mat H = Mat::Identity(2, 2) / (1.3 * 1.3);
  const MixtureTarget quad(Vec{{0.4, 0.6}}, c, BaseFunction::quadratic_form(H, H(0, 0), H(0, 0)));
  const auto h = make_histogram(iso, 30);
  const auto a = exact_bin_masses(iso, h);
  const auto b = exact_bin_masses(quad, h);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(a[k] - b[k]) < 1e-9);
}

TEST_CASE("total variation") {
  const auto t = two_mode(0.3);
  RngStream rng(1);
  SUBCASE("exact samples") {
    const auto xs = draw_from_mixture(t, 100000, rng);
    const auto tv = empirical_tv(xs, t);
    CHECK(tv.tv < 0.05);
    CHECK(tv.tv >= 0.0);
    double s = 0.0;
    for (double m : tv.histogram.masses) s += m;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
    // Permutation invariance.
    auto ys = xs;
    std::reverse(ys.begin(), ys.end());
    CHECK(empirical_tv(ys, t).tv == tv.tv);
  }
  SUBCASE("all samples in one bin") {
    std::vector<Vec> xs(2000, Vec::Constant(1, 5.01));
    const auto tv = empirical_tv(xs, t);
    std::size_t bin = 0;
    for (std::size_t b = 0; b < tv.histogram.size(); ++b) {
      if (tv.histogram.counts[b] > 0) bin = b;
    }
    CHECK(tv.tv == doctest::Approx(1.0 - tv.exact[bin]).epsilon(1e-12));
  }
  SUBCASE("samples far from the target") {
    std::vector<Vec> xs(2000, Vec::Constant(1, 1000.0));
    CHECK(empirical_tv(xs, t).tv == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("preconditions") {
    std::vector<Vec> few(10, Vec::Zero(1));
    CHECK_THROWS_AS(empirical_tv(few, t), Error);
    const MixtureTarget t3 = simplex_centers_target(3, 4.0, 1.0);
    std::vector<Vec> xs(2000, Vec::Zero(3));
    CHECK_THROWS_AS(empirical_tv(xs, t3), Error);
  }
}

TEST_CASE("mode masses") {
  RngStream rng(2);
  {
    const auto t = two_mode(0.5);
    const auto xs = draw_from_mixture(t, 20000, rng);
    const Vec m = mode_masses(xs, t);
    CHECK(m.sum() == 1.0);
    CHECK(std::abs(m[0] - 0.5) <= 3 * std::sqrt(0.25 / 20000));
  }
  {
    const auto t = two_mode(0.3);
    const auto xs = draw_from_mixture(t, 100000, rng);
    const Vec m = mode_masses(xs, t);
    CHECK(std::abs(m[0] - 0.3) <= 3 * std::sqrt(0.21 / 100000));
    CHECK(std::abs(m[1] - 0.7) <= 3 * std::sqrt(0.21 / 100000));
  }
  {
    const Fixture f = builtin_fixture("two-mode-symmetric");
    const RunRecord rec = run_plain_langevin(*f.oracle, 1.0, 1e-2, 50000, Vec::Constant(1, 5.0), rng, 10);
    const Vec m = mode_masses(rec.positions_at(0), *f.target);
    CHECK(m[0] < 0.01);
    CHECK(m[1] > 0.99);
  }
}

TEST_CASE("integrated autocorrelation time") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> n01;
  SUBCASE("independent series") {
    std::vector<double> xs(100000);
    for (auto& x : xs) x = n01(gen);
    const auto a = integrated_autocorr(xs, 1000);
    CHECK(a.tau >= 0.8);
    CHECK(a.tau <= 1.3);
    CHECK(a.ess == doctest::Approx(100000 / a.tau));
  }
  SUBCASE("AR(1), phi = 0.9") {
    std::vector<double> xs(500000);
    double x = 0.0;
    for (auto& v : xs) {
      x = 0.9 * x + n01(gen);
      v = x;
    }
    const auto a = integrated_autocorr(xs, 5000);
    CHECK(a.tau == doctest::Approx(19.0).epsilon(0.2));
  }
  SUBCASE("constant series") {
    std::vector<double> xs(1000, 2.5);
    const auto a = integrated_autocorr(xs, 10);
    CHECK(a.degenerate);
    CHECK(a.tau == 1.0);
  }
  SUBCASE("too short") {
    std::vector<double> xs(99, 0.0);
    CHECK_THROWS_AS(integrated_autocorr(xs, 10), Error);
  }
}

TEST_CASE("run summary") {
  const Fixture f = builtin_fixture("single-gaussian");
  RngStream rng(4);
  const RunRecord rec = run_plain_langevin(*f.oracle, 1.0, 1e-2, 1000, Vec::Constant(1, 3.0), rng, 10);
  const auto j = run_summary(rec);
  CHECK(j.at("langevin_steps") == 1000);
  CHECK(j.at("occupancy")[0].get<double>() == doctest::Approx(1.0));
}
