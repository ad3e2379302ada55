#include "stlmc/decomposition.hpp"
#include "stlmc/divergences.hpp"

#include <doctest.h>

#include <cmath>

using namespace stlmc;

namespace {

Vec random_vec(RngStream& rng, Eigen::Index n) { return rng.normal_vector(n); }

FiniteMarkovProcess two_state(double a, double b) {
  Mat Q(2, 2);
  Q << -a, a, b, -b;
  return FiniteMarkovProcess(Q, Vec{{b / (a + b), a / (a + b)}});
}

// Random reversible chain on a connected graph (path plus random chords).
FiniteMarkovProcess random_chain(RngStream& rng, std::size_t n) {
  Vec pi(static_cast<Eigen::Index>(n));
  for (auto& v : pi) v = 0.1 + rng.uniform();
  pi /= pi.sum();
  Mat Q = Mat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  auto edge = [&](Eigen::Index x, Eigen::Index y) {
    const double c = 0.2 + rng.uniform();  // conductance pi_x Q(x,y)
    Q(x, y) = c / pi[x];
    Q(y, x) = c / pi[y];
  };
  for (Eigen::Index x = 0; x + 1 < static_cast<Eigen::Index>(n); ++x) edge(x, x + 1);
  for (std::size_t k = 0; k < n; ++k) {
    const auto x = static_cast<Eigen::Index>(rng.index(n)), y = static_cast<Eigen::Index>(rng.index(n));
    if (x != y) edge(x, y);
  }
  for (Eigen::Index x = 0; x < Q.rows(); ++x) Q(x, x) = -(Q.row(x).sum() - Q(x, x));
  return FiniteMarkovProcess(Q, pi);
}

}  // namespace

TEST_CASE("process validation") {
  Mat Q(2, 2);
  Q << -1, 1, 1, -1;
  CHECK_NOTHROW(FiniteMarkovProcess(Q, Vec{{0.5, 0.5}}));
  CHECK_THROWS_AS(FiniteMarkovProcess(Q, Vec{{0.4, 0.6}}), Error);  // not reversible
  Mat bad = Q;
  bad(0, 0) = -0.5;
  CHECK_THROWS_AS(FiniteMarkovProcess(bad, Vec{{0.5, 0.5}}), Error);
  CHECK_THROWS_AS(FiniteMarkovProcess(Q, Vec{{0.5, 0.6}}), Error);
}

TEST_CASE("discretized densities") {
  SUBCASE("uniform") {
    const auto c = discretize_density(Vec::Constant(4, 1.0), 2.0);
    for (Eigen::Index x = 0; x < 4; ++x) CHECK(c.stationary()[x] == doctest::Approx(0.25));
    for (Eigen::Index x = 0; x + 1 < 4; ++x) {
      CHECK(c.generator()(x, x + 1) == doctest::Approx(2.0));
      CHECK(c.generator()(x + 1, x) == doctest::Approx(2.0));
    }
  }
  SUBCASE("two points") {
    const auto c = discretize_density(Vec{{1.0, 2.0}}, 1.0);
    CHECK(c.generator()(0, 1) / c.generator()(1, 0) == doctest::Approx(2.0).epsilon(1e-15));
  }
  SUBCASE("gaussian on 129 nodes") {
    const auto nodes = uniform_nodes(-6.0, 6.0, 129);
    const auto c = discretize_density([](double x) { return std::exp(-x * x / 2); }, nodes);
    Vec w(129);
    for (int k = 0; k < 129; ++k) w[k] = std::exp(-nodes[static_cast<std::size_t>(k)] * nodes[static_cast<std::size_t>(k)] / 2);
    w /= w.sum();
    CHECK((c.stationary() - w).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(c.reversibility_residual() < 1e-10);
    CHECK(poincare_analysis(c).gap > 0.0);
    CHECK((gaussian_on_nodes(nodes, 0.0, 1.0) - w).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("dirichlet form") {
  const auto c = two_state(1.0, 1.0);
  CHECK(dirichlet_form(c, Vec{{0.0, 1.0}}) == doctest::Approx(0.5));
  CHECK(std::abs(dirichlet_form(c, Vec{{3.0, 3.0}})) < 1e-15);
  RngStream rng(2);
  for (int k = 0; k < 20; ++k) {
    const auto chain = random_chain(rng, 10 + rng.index(30));
    CHECK(std::abs(dirichlet_form(chain, Vec::Constant(static_cast<Eigen::Index>(chain.size()), 1.7))) < 1e-10);
    const Vec g = random_vec(rng, static_cast<Eigen::Index>(chain.size()));
    const double a = dirichlet_form(chain, g), b = dirichlet_form_edges(chain, g);
    CHECK(std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(a)));
  }
}

TEST_CASE("poincare constant") {
  CHECK(poincare_constant(two_state(1.0, 1.0)) == doctest::Approx(0.5));
  CHECK(poincare_constant(two_state(0.3, 2.0)) == doctest::Approx(1.0 / 2.3));

  for (int n : {3, 5, 9}) {
    Mat Q = Mat::Ones(n, n);
    Q.diagonal().setConstant(-(n - 1));
    const FiniteMarkovProcess c(Q, Vec::Constant(n, 1.0 / n));
    CHECK(poincare_analysis(c).gap == doctest::Approx(static_cast<double>(n)));
  }

  RngStream rng(3);
  const auto chain = random_chain(rng, 25);
  const auto pa = poincare_analysis(chain);
  const Vec& pi = chain.stationary();
  for (int k = 0; k < 100; ++k) {
    const Vec g = random_vec(rng, 25);
    CHECK(variance(pi, g) <= pa.constant * dirichlet_form(chain, g) + 1e-9);
  }
  CHECK(variance(pi, pa.extremal) == doctest::Approx(pa.constant * dirichlet_form(chain, pa.extremal)).epsilon(1e-6));

  Mat split = Mat::Zero(4, 4);
  split << -1, 1, 0, 0, 1, -1, 0, 0, 0, 0, -1, 1, 0, 0, 1, -1;
  const FiniteMarkovProcess broken(split, Vec::Constant(4, 0.25));
  CHECK_FALSE(broken.irreducible());
  CHECK_THROWS_AS(poincare_constant(broken), Error);
}

TEST_CASE("poincare lower bound for unresolved gaps") {
  const auto resolved = poincare_constant_lower_bound(two_state(0.3, 2.0));
  CHECK(resolved.exact);
  CHECK(resolved.value == doctest::Approx(1.0 / 2.3));

  // Path 0 - 1 - 2 with a 1e-25 bottleneck: the gap is of order 1e-25, far
  // below double resolution against rates of order 1.
  const double eps = 1e-25;
  Mat Q(3, 3);
  Q << -1, 1, 0, 1, -1 - eps, eps, 0, eps, -eps;
  const FiniteMarkovProcess slow(Q, Vec::Constant(3, 1.0 / 3.0));
  CHECK_THROWS_AS(poincare_constant(slow), Error);
  const auto lb = poincare_constant_lower_bound(slow);
  CHECK_FALSE(lb.exact);
  CHECK(lb.value > 1e10);
  CHECK(lb.value < 1.0 / eps);
}

TEST_CASE("mixing chains adds Dirichlet forms") {
  RngStream rng(4);
  const auto nodes = uniform_nodes(-5.0, 5.0, 40);
  std::vector<FiniteMarkovProcess> comps{discretize_density(gaussian_on_nodes(nodes, -1.0, 1.0), 1.0),
                                         discretize_density(gaussian_on_nodes(nodes, 2.0, 0.7), 1.0)};
  const Vec w{{0.35, 0.65}};
  const auto mix = mix_chains(comps, w);
  CHECK((mix.stationary() - (0.35 * comps[0].stationary() + 0.65 * comps[1].stationary())).cwiseAbs().maxCoeff() <
        1e-14);
  for (int k = 0; k < 20; ++k) {
    const Vec g = random_vec(rng, 40);
    const double sum = 0.35 * dirichlet_form(comps[0], g) + 0.65 * dirichlet_form(comps[1], g);
    CHECK(dirichlet_form(mix, g) == doctest::Approx(sum).epsilon(1e-10));
  }
}

TEST_CASE("tempering chain") {
  const auto nodes = uniform_nodes(-4.0, 4.0, 20);
  const auto level = discretize_density(gaussian_on_nodes(nodes, 0.0, 1.0), 1.0);
  SUBCASE("one level") {
    const auto t = build_tempering_chain({level}, Vec::Ones(1), 3.0);
    CHECK((t.generator() - level.generator()).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("two identical levels") {
    const auto t = build_tempering_chain({level, level}, Vec{{0.5, 0.5}}, 3.0);
    for (Eigen::Index x = 0; x < 20; ++x) CHECK(t.generator()(x, 20 + x) == doctest::Approx(1.5));
    CHECK(t.stationary().head(20).sum() == doctest::Approx(0.5));
  }
  SUBCASE("three levels against the direct Dirichlet form") {
    std::vector<FiniteMarkovProcess> levels;
    for (double beta : {0.25, 0.5, 1.0}) {
      Vec d(20);
      for (int k = 0; k < 20; ++k) {
        const double x = nodes[static_cast<std::size_t>(k)];
        d[k] = std::pow(0.5 * std::exp(-(x - 2) * (x - 2) / 2) + 0.5 * std::exp(-(x + 2) * (x + 2) / 2), beta);
      }
      levels.push_back(discretize_density(d, 1.0));
    }
    const Vec r{{0.2, 0.3, 0.5}};
    const double lambda = 1.7;
    const auto t = build_tempering_chain(levels, r, lambda);
    RngStream rng(5);
    for (int k = 0; k < 50; ++k) {
      const Vec g = random_vec(rng, 60);
      double direct = 0.0;
      for (int i = 0; i < 3; ++i) direct += r[i] * dirichlet_form(levels[static_cast<std::size_t>(i)], g.segment(20 * i, 20));
      for (int i = 0; i < 2; ++i) {
        for (int x = 0; x < 20; ++x) {
          const double m = std::min(r[i] * levels[static_cast<std::size_t>(i)].stationary()[x],
                                    r[i + 1] * levels[static_cast<std::size_t>(i + 1)].stationary()[x]);
          const double diff = g[20 * i + x] - g[20 * (i + 1) + x];
          direct += lambda / 2.0 * m * diff * diff;
        }
      }
      CHECK(dirichlet_form(t, g) == doctest::Approx(direct).epsilon(1e-9));
      CHECK(tempering_dirichlet_form(levels, r, lambda, g) == doctest::Approx(direct).epsilon(1e-9));
    }
  }
}

TEST_CASE("projected chain rates") {
  SUBCASE("identical components hit the cap") {
    const Vec p = Vec::Constant(5, 0.2);
    const auto pc = build_simple_projected_chain({p, p}, Vec{{0.5, 0.5}}, false, 1e6);
    CHECK(pc.capped_rates == 2);
    CHECK(pc.rates(0, 1) == 1e6);
  }
  SUBCASE("chi2_max = 3") {
    ProjectedInputs in;
    in.weights = {Vec{{0.5, 0.5}}};
    in.rel_probs = Vec::Ones(1);
    in.chi2_max = Mat::Constant(2, 2, 3.0);
    const auto pc = build_projected_chain(in, 1.0);
    CHECK(pc.rates(0, 1) == doctest::Approx(1.0 / 6.0));
    CHECK(pc.rates(1, 0) == doctest::Approx(1.0 / 6.0));
  }
  SUBCASE("vertical edge") {
    ProjectedInputs in;
    in.weights = {Vec::Ones(1), Vec::Ones(1)};
    in.rel_probs = Vec{{0.5, 0.5}};
    in.chi2_max = Mat::Zero(1, 1);
    in.delta_up = {Vec::Constant(1, 0.4)};
    in.delta_down = {Vec::Constant(1, 0.4)};
    const auto pc = build_projected_chain(in, 1.0);
    CHECK(pc.rates(0, 1) == doctest::Approx(0.4));
    CHECK(pc.rates(1, 0) == doctest::Approx(0.4));
    CHECK(pc.detailed_balance_residual() < 1e-15);
    in.delta_down = {Vec::Constant(1, std::nan(""))};
    CHECK_THROWS_AS(build_projected_chain(in, 1.0), Error);
  }
  SUBCASE("computed inputs satisfy detailed balance") {
    const auto nodes = uniform_nodes(-6.0, 6.0, 48);
    std::vector<std::vector<Vec>> comps;
    std::vector<Vec> w;
    for (double beta : {0.3, 0.6, 1.0}) {
      comps.push_back({gaussian_on_nodes(nodes, -2.0, 1.0 / std::sqrt(beta)),
                       gaussian_on_nodes(nodes, 2.5, 1.0 / std::sqrt(beta))});
      w.push_back(Vec{{0.4, 0.6}});
    }
    const auto in = projected_inputs(comps, w, Vec{{0.2, 0.3, 0.5}});
    const auto pc = build_projected_chain(in, 2.0);
    CHECK(pc.detailed_balance_residual() < 1e-8);
    CHECK(pc.rates.minCoeff() >= 0.0);
    CHECK(in.chi2_max(0, 1) == doctest::Approx(chi2_max_discrete(comps[0][0], comps[0][1])));
  }
}

TEST_CASE("canonical paths and congestion") {
  SUBCASE("two states") {
    Mat T(2, 2);
    T << 0, 0.5, 0.5, 0;
    const auto paths = geodesic_paths(T);
    CHECK(congestion_bound(T, Vec{{0.5, 0.5}}, paths).rho == doctest::Approx(1.0));
  }
  SUBCASE("cycles grow quadratically") {
    std::vector<double> rhos;
    for (int n : {4, 8, 16}) {
      Mat T = Mat::Zero(n, n);
      for (int x = 0; x < n; ++x) T(x, (x + 1) % n) = T((x + 1) % n, x) = 1.0;
      const Vec p = Vec::Constant(n, 1.0 / n);
      const auto paths = geodesic_paths(T);
      // Direct enumeration of the edge loads.
      Mat load = Mat::Zero(n, n);
      for (int x = 0; x < n; ++x) {
        for (int y = 0; y < n; ++y) {
          if (x == y) continue;
          const auto& g = paths.path(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
          const int dist = std::min(std::abs(x - y), n - std::abs(x - y));
          REQUIRE(static_cast<int>(g.size()) - 1 == dist);
          for (std::size_t k = 0; k + 1 < g.size(); ++k) {
            load(static_cast<Eigen::Index>(g[k]), static_cast<Eigen::Index>(g[k + 1])) += dist * p[x] * p[y];
          }
        }
      }
      double rho = 0.0;
      for (int z = 0; z < n; ++z) {
        for (int w = 0; w < n; ++w) {
          if (T(z, w) > 0) rho = std::max(rho, load(z, w) / (p[z] * T(z, w)));
        }
      }
      CHECK(congestion_bound(T, p, paths).rho == doctest::Approx(rho).epsilon(1e-12));
      rhos.push_back(rho);
    }
    for (std::size_t k = 0; k < rhos.size(); ++k) {
      const double n = 4.0 * std::pow(2.0, static_cast<double>(k));
      CHECK(rhos[k] / (n * n) > 0.02);
      CHECK(rhos[k] / (n * n) < 1.0);
    }
    CHECK(rhos[2] / rhos[1] > 3.0);
    CHECK(rhos[2] / rhos[1] < 5.0);
  }
  SUBCASE("star graph") {
    const int n = 6;
    Mat T = Mat::Zero(n, n);
    for (int x = 1; x < n; ++x) T(0, x) = T(x, 0) = 1.0;
    const Vec p = Vec::Constant(n, 1.0 / n);
    auto paths = geodesic_paths(T);
    CHECK(std::isfinite(congestion_bound(T, p, paths).rho));
    CHECK(paths.path(1, 2) == std::vector<std::size_t>{1, 0, 2});
    Mat cut = T;
    cut(0, 2) = cut(2, 0) = 0.0;
    CHECK_THROWS_AS(congestion_bound(cut, p, paths), Error);
  }
}

TEST_CASE("simple decomposition") {
  const auto nodes = uniform_nodes(-6.0, 6.0, 60);
  SUBCASE("single component") {
    const auto inst = gaussian_simple_instance(nodes, {0.5}, {1.2}, Vec::Ones(1));
    const auto r = verify_simple_decomposition(inst.chain, inst.components, inst.weights);
    CHECK(r.pass);
    CHECK(r.C == doctest::Approx(r.C_star).epsilon(1e-10));
  }
  SUBCASE("two overlapping Gaussians") {
    const auto inst = gaussian_simple_instance(nodes, {-1.0, 1.0}, {1.0, 1.0}, Vec{{0.5, 0.5}});
    const auto r = verify_simple_decomposition(inst.chain, inst.components, inst.weights);
    CHECK(r.pass);
    CHECK(r.slack >= 1.0);
    CHECK(r.identity_residual < 1e-10);
    const auto o = verify_simple_decomposition(inst.chain, inst.components, inst.weights, true);
    CHECK(o.pass);
    CHECK(to_json(r).at("theorem").is_string());
  }
  SUBCASE("random instances") {
    RngStream rng(6);
    for (int k = 0; k < 5; ++k) {
      const auto inst = random_simple_instance(rng);
      CHECK(inst.chain.size() <= 64);
      CHECK(inst.components.size() <= 3);
      CHECK(verify_simple_decomposition(inst.chain, inst.components, inst.weights).pass);
    }
  }
  SUBCASE("wrong decomposition is reported") {
    const auto a = gaussian_simple_instance(nodes, {-1.0, 1.0}, {1.0, 1.0}, Vec{{0.5, 0.5}});
    const auto b = gaussian_simple_instance(nodes, {-1.0, 2.0}, {1.0, 1.0}, Vec{{0.5, 0.5}});
    const auto r = verify_simple_decomposition(a.chain, b.components, b.weights);
    CHECK_FALSE(r.pass);
    CHECK_FALSE(r.error.empty());
  }
}

TEST_CASE("tempering decomposition") {
  const auto nodes = uniform_nodes(-8.0, 8.0, 48);
  SUBCASE("one level") {
    const auto inst = gaussian_tempering_instance(nodes, {-1.5, 1.5}, 1.0, Vec{{0.5, 0.5}}, {1.0}, 1.0);
    const auto t = verify_tempering_decomposition(inst.chain, inst.components, inst.weights, inst.rel_probs, 1.0, 1.0);
    const auto s = verify_simple_decomposition(inst.chain, inst.components[0], inst.weights[0]);
    CHECK(t.pass);
    CHECK(t.C == doctest::Approx(s.C));
    CHECK(t.C_bar == doctest::Approx(s.C_bar));
    CHECK(t.C_star == doctest::Approx(s.C_star));
  }
  SUBCASE("three levels over a two-mode target, K sweep") {
    const auto inst =
        gaussian_tempering_instance(nodes, {-3.0, 3.0}, 1.0, Vec{{0.5, 0.5}}, {0.25, 0.5, 1.0}, 1.0);
    CHECK(inst.chain.size() == 3 * 48);
    double best = std::numeric_limits<double>::infinity();
    for (double K : {0.5, 1.0, 2.0}) {
      const auto r = verify_tempering_decomposition(inst.chain, inst.components, inst.weights, inst.rel_probs, K,
                                                    inst.swap_rate);
      CHECK(r.pass);
      CHECK(r.slack >= 1.0);
      best = std::min(best, r.bound);
    }
    CHECK(std::isfinite(best));
  }
  SUBCASE("random instances") {
    RngStream rng(7);
    for (int k = 0; k < 3; ++k) {
      const auto inst = random_tempering_instance(rng);
      const auto r = verify_tempering_decomposition(inst.chain, inst.components, inst.weights, inst.rel_probs, 1.0,
                                                    inst.swap_rate);
      CHECK(r.pass);
    }
  }
}

TEST_CASE("instance hash is stable and content dependent") {
  const auto a = two_state(1.0, 2.0);
  CHECK(instance_hash(a) == instance_hash(two_state(1.0, 2.0)));
  CHECK(instance_hash(a) != instance_hash(two_state(1.0, 2.5)));
}
