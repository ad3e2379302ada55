#include "stlmc/decomposition.hpp"

#include "stlmc/divergences.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <deque>
#include <limits>

namespace stlmc {

namespace {

constexpr double chain_tol = 1e-10;

double rate_scale(const Mat& Q) { return std::max(1.0, Q.cwiseAbs().maxCoeff()); }

Vec normalized(const Vec& v) { return v / v.sum(); }

}  // namespace

FiniteMarkovProcess::FiniteMarkovProcess(Mat Q, Vec pi) : Q_(std::move(Q)), pi_(std::move(pi)) {
  const Eigen::Index n = pi_.size();
  if (n == 0 || Q_.rows() != n || Q_.cols() != n) {
    throw Error(ErrorCode::dimension_mismatch, "FiniteMarkovProcess: generator and stationary sizes differ");
  }
  if (!Q_.allFinite() || !pi_.allFinite()) throw Error(ErrorCode::non_finite, "FiniteMarkovProcess: non-finite entry");
  for (Eigen::Index x = 0; x < n; ++x) {
    if (!(pi_[x] > 0.0)) throw Error(ErrorCode::invalid_argument, "FiniteMarkovProcess: pi must be positive");
    for (Eigen::Index y = 0; y < n; ++y) {
      if (x != y && Q_(x, y) < 0.0) {
        throw Error(ErrorCode::invalid_argument, "FiniteMarkovProcess: negative off-diagonal rate");
      }
    }
  }
  if (std::abs(pi_.sum() - 1.0) > chain_tol) {
    throw Error(ErrorCode::invalid_argument, "FiniteMarkovProcess: pi does not sum to 1");
  }
  const double tol = chain_tol * rate_scale(Q_);
  if (row_sum_residual() > tol) {
    throw Error(ErrorCode::invalid_argument,
                "FiniteMarkovProcess: row sums not zero (residual " + std::to_string(row_sum_residual()) + ")");
  }
  if (reversibility_residual() > tol) {
    throw Error(ErrorCode::invalid_argument, "FiniteMarkovProcess: not reversible (residual " +
                                                 std::to_string(reversibility_residual()) + ")");
  }
}

double FiniteMarkovProcess::row_sum_residual() const { return Q_.rowwise().sum().cwiseAbs().maxCoeff(); }

double FiniteMarkovProcess::reversibility_residual() const {
  const Mat flux = pi_.asDiagonal() * Q_;
  return (flux - flux.transpose()).cwiseAbs().maxCoeff();
}

bool FiniteMarkovProcess::irreducible() const {
  const std::size_t n = size();
  std::vector<bool> seen(n, false);
  std::deque<std::size_t> queue{0};
  seen[0] = true;
  std::size_t count = 1;
  while (!queue.empty()) {
    const std::size_t x = queue.front();
    queue.pop_front();
    for (std::size_t y = 0; y < n; ++y) {
      if (!seen[y] && y != x && Q_(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) > 0.0) {
        seen[y] = true;
        ++count;
        queue.push_back(y);
      }
    }
  }
  return count == n;
}

std::vector<double> uniform_nodes(double lo, double hi, std::size_t n) {
  if (n < 2 || !(lo < hi)) throw Error(ErrorCode::invalid_argument, "uniform_nodes: need n >= 2 and lo < hi");
  std::vector<double> x(n);
  const double h = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) x[i] = lo + h * static_cast<double>(i);
  return x;
}

FiniteMarkovProcess discretize_density(const Vec& density, double base_rate) {
  const Eigen::Index n = density.size();
  if (n == 0) throw Error(ErrorCode::invalid_argument, "discretize_density: empty density");
  if (!(base_rate > 0.0)) throw Error(ErrorCode::invalid_argument, "discretize_density: base rate must be positive");
  for (Eigen::Index x = 0; x < n; ++x) {
    if (!(density[x] > 0.0) || !std::isfinite(density[x])) {
      throw Error(ErrorCode::invalid_argument,
                  "discretize_density: density must be positive and finite (node " + std::to_string(x) + ")");
    }
  }
  const Vec pi = normalized(density);
  Mat Q = Mat::Zero(n, n);
  for (Eigen::Index x = 0; x + 1 < n; ++x) {
    Q(x, x + 1) = base_rate * std::min(1.0, pi[x + 1] / pi[x]);
    Q(x + 1, x) = base_rate * std::min(1.0, pi[x] / pi[x + 1]);
  }
  Q.diagonal() = -Q.rowwise().sum();
  return FiniteMarkovProcess(std::move(Q), pi);
}

FiniteMarkovProcess discretize_density(const std::function<double(double)>& density,
                                       const std::vector<double>& nodes) {
  if (nodes.size() < 2) throw Error(ErrorCode::invalid_argument, "discretize_density: need at least two nodes");
  const double h = nodes[1] - nodes[0];
  Vec v(static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t i = 0; i < nodes.size(); ++i) v[static_cast<Eigen::Index>(i)] = density(nodes[i]);
  return discretize_density(v, 1.0 / (h * h));
}

Vec gaussian_on_nodes(const std::vector<double>& nodes, double mu, double sigma) {
  Vec v(static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double z = (nodes[i] - mu) / sigma;
    v[static_cast<Eigen::Index>(i)] = std::exp(-0.5 * z * z);
  }
  return normalized(v);
}

FiniteMarkovProcess mix_chains(const std::vector<FiniteMarkovProcess>& components, const Vec& weights) {
  if (components.empty() || static_cast<std::size_t>(weights.size()) != components.size()) {
    throw Error(ErrorCode::dimension_mismatch, "mix_chains: one weight per component required");
  }
  const auto n = static_cast<Eigen::Index>(components[0].size());
  Mat flux = Mat::Zero(n, n);
  Vec pi = Vec::Zero(n);
  for (std::size_t j = 0; j < components.size(); ++j) {
    const auto& c = components[j];
    if (static_cast<Eigen::Index>(c.size()) != n) throw Error(ErrorCode::dimension_mismatch, "mix_chains: state spaces differ");
    const double w = weights[static_cast<Eigen::Index>(j)];
    flux += w * (c.stationary().asDiagonal() * c.generator());
    pi += w * c.stationary();
  }
  Mat Q = pi.cwiseInverse().asDiagonal() * flux;
  Q.diagonal().setZero();
  Q.diagonal() = -Q.rowwise().sum();
  return FiniteMarkovProcess(std::move(Q), normalized(pi));
}

double expectation(const Vec& pi, const Vec& g) {
  require_dim(g, pi.size(), "expectation");
  return pi.dot(g);
}

double variance(const Vec& pi, const Vec& g) {
  const double m = expectation(pi, g);
  return pi.dot((g.array() - m).square().matrix());
}

double dirichlet_form(const FiniteMarkovProcess& chain, const Vec& g) {
  require_dim(g, static_cast<Eigen::Index>(chain.size()), "dirichlet_form");
  return -chain.stationary().dot(g.cwiseProduct(chain.generator() * g));
}

double dirichlet_form_edges(const FiniteMarkovProcess& chain, const Vec& g) {
  require_dim(g, static_cast<Eigen::Index>(chain.size()), "dirichlet_form_edges");
  const Mat& Q = chain.generator();
  const Vec& pi = chain.stationary();
  double s = 0.0;
  for (Eigen::Index x = 0; x < Q.rows(); ++x) {
    for (Eigen::Index y = 0; y < Q.cols(); ++y) {
      if (x != y) s += pi[x] * Q(x, y) * (g[x] - g[y]) * (g[x] - g[y]);
    }
  }
  return 0.5 * s;
}

namespace {

struct Spectrum {
  Eigen::SelfAdjointEigenSolver<Mat> solver;
  Vec sqrt_pi;
  double resolution = 0.0;
};

Spectrum symmetrized_spectrum(const FiniteMarkovProcess& chain) {
  const auto n = static_cast<Eigen::Index>(chain.size());
  if (!chain.irreducible()) throw Error(ErrorCode::reducible_chain, "poincare_constant: chain is reducible");
  Spectrum sp;
  sp.sqrt_pi = chain.stationary().cwiseSqrt();
  Mat S = -(sp.sqrt_pi.asDiagonal() * chain.generator() * sp.sqrt_pi.cwiseInverse().asDiagonal());
  S = 0.5 * (S + S.transpose());
  sp.solver.compute(S);
  if (sp.solver.info() != Eigen::Success) throw Error(ErrorCode::non_finite, "poincare_constant: eigensolver failed");
  const Vec& ev = sp.solver.eigenvalues();
  const double top = std::max(std::abs(ev[n - 1]), std::numeric_limits<double>::min());
  if (std::abs(ev[0]) > 1e-9 * top) {
    throw Error(ErrorCode::precondition, "poincare_constant: no zero eigenvalue (generator is not conservative)");
  }
  // The symmetric eigensolver is accurate to about n eps |S| in absolute terms.
  sp.resolution = std::max(100.0 * static_cast<double>(n) * std::numeric_limits<double>::epsilon() * top,
                           std::abs(ev[0]));
  return sp;
}

}  // namespace

PoincareLowerBound poincare_constant_lower_bound(const FiniteMarkovProcess& chain) {
  if (chain.size() == 1) return {0.0, true};
  const Spectrum sp = symmetrized_spectrum(chain);
  const double g = sp.solver.eigenvalues()[1];
  if (g > sp.resolution) return {1.0 / g, true};
  return {1.0 / (std::max(g, 0.0) + sp.resolution), false};
}

PoincareResult poincare_analysis(const FiniteMarkovProcess& chain) {
  PoincareResult out;
  if (chain.size() == 1) {
    out.extremal = Vec::Zero(1);
    out.gap = std::numeric_limits<double>::infinity();
    return out;
  }
  const Spectrum sp = symmetrized_spectrum(chain);
  const double g = sp.solver.eigenvalues()[1];
  if (!(g > sp.resolution)) {
    throw Error(ErrorCode::precondition, "poincare_constant: spectral gap below numerical resolution");
  }
  out.gap = g;
  out.constant = 1.0 / g;
  out.extremal = sp.sqrt_pi.cwiseInverse().cwiseProduct(sp.solver.eigenvectors().col(1));
  return out;
}

double poincare_constant(const FiniteMarkovProcess& chain) { return poincare_analysis(chain).constant; }

namespace {

void check_levels(const std::vector<FiniteMarkovProcess>& levels, const Vec& rel_probs) {
  if (levels.empty() || static_cast<std::size_t>(rel_probs.size()) != levels.size()) {
    throw Error(ErrorCode::dimension_mismatch, "tempering chain: one relative probability per level required");
  }
  for (const auto& l : levels) {
    if (l.size() != levels[0].size()) throw Error(ErrorCode::dimension_mismatch, "tempering chain: grid mismatch");
  }
  if ((rel_probs.array() <= 0.0).any() || std::abs(rel_probs.sum() - 1.0) > 1e-12) {
    throw Error(ErrorCode::invalid_argument, "tempering chain: relative probabilities must be positive and sum to 1");
  }
}

}  // namespace

FiniteMarkovProcess build_tempering_chain(const std::vector<FiniteMarkovProcess>& levels, const Vec& rel_probs,
                                          double swap_rate) {
  check_levels(levels, rel_probs);
  if (!(swap_rate >= 0.0)) throw Error(ErrorCode::invalid_argument, "build_tempering_chain: negative swap rate");
  const auto L = static_cast<Eigen::Index>(levels.size());
  const auto n = static_cast<Eigen::Index>(levels[0].size());
  Mat Q = Mat::Zero(L * n, L * n);
  Vec pi(L * n);
  for (Eigen::Index i = 0; i < L; ++i) {
    const auto& li = levels[static_cast<std::size_t>(i)];
    Q.block(i * n, i * n, n, n) = li.generator();
    pi.segment(i * n, n) = rel_probs[i] * li.stationary();
  }
  for (Eigen::Index i = 0; i < L; ++i) {
    for (Eigen::Index j : {i - 1, i + 1}) {
      if (j < 0 || j >= L) continue;
      for (Eigen::Index x = 0; x < n; ++x) {
        const double rate = 0.5 * swap_rate * std::min(1.0, pi[j * n + x] / pi[i * n + x]);
        Q(i * n + x, j * n + x) += rate;
        Q(i * n + x, i * n + x) -= rate;
      }
    }
  }
  return FiniteMarkovProcess(std::move(Q), std::move(pi));
}

double tempering_dirichlet_form(const std::vector<FiniteMarkovProcess>& levels, const Vec& rel_probs,
                                double swap_rate, const Vec& g) {
  check_levels(levels, rel_probs);
  const auto L = static_cast<Eigen::Index>(levels.size());
  const auto n = static_cast<Eigen::Index>(levels[0].size());
  require_dim(g, L * n, "tempering_dirichlet_form");
  double within = 0.0;
  for (Eigen::Index i = 0; i < L; ++i) {
    within += rel_probs[i] * dirichlet_form(levels[static_cast<std::size_t>(i)], g.segment(i * n, n));
  }
  double across = 0.0;
  for (Eigen::Index i = 0; i < L; ++i) {
    for (Eigen::Index j : {i - 1, i + 1}) {
      if (j < 0 || j >= L) continue;
      const Vec& pi_i = levels[static_cast<std::size_t>(i)].stationary();
      const Vec& pi_j = levels[static_cast<std::size_t>(j)].stationary();
      for (Eigen::Index x = 0; x < n; ++x) {
        const double d = g[i * n + x] - g[j * n + x];
        across += std::min(rel_probs[i] * pi_i[x], rel_probs[j] * pi_j[x]) * d * d;
      }
    }
  }
  return within + 0.25 * swap_rate * across;
}

ProjectedInputs projected_inputs(const std::vector<std::vector<Vec>>& components, const std::vector<Vec>& weights,
                                 const Vec& rel_probs) {
  const std::size_t L = components.size();
  if (L == 0 || weights.size() != L || static_cast<std::size_t>(rel_probs.size()) != L) {
    throw Error(ErrorCode::dimension_mismatch, "projected_inputs: level counts differ");
  }
  const std::size_t m = components[0].size();
  for (std::size_t i = 0; i < L; ++i) {
    if (components[i].size() != m || static_cast<std::size_t>(weights[i].size()) != m) {
      throw Error(ErrorCode::dimension_mismatch, "projected_inputs: every level needs the same components");
    }
  }
  ProjectedInputs in;
  in.weights = weights;
  in.rel_probs = rel_probs;
  const auto mm = static_cast<Eigen::Index>(m);
  in.chi2_max = Mat::Zero(mm, mm);
  for (Eigen::Index j = 0; j < mm; ++j) {
    for (Eigen::Index k = j + 1; k < mm; ++k) {
      const double c = chi2_max_discrete(components[0][static_cast<std::size_t>(j)],
                                         components[0][static_cast<std::size_t>(k)]);
      in.chi2_max(j, k) = in.chi2_max(k, j) = c;
    }
  }
  for (std::size_t i = 0; i + 1 < L; ++i) {
    Vec up(mm), down(mm);
    for (Eigen::Index j = 0; j < mm; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      const double a = rel_probs[static_cast<Eigen::Index>(i)] * weights[i][j];
      const double b = rel_probs[static_cast<Eigen::Index>(i + 1)] * weights[i + 1][j];
      // delta_{(i,j),(i',j)} = sum min{ r_i' w_i'j p_(i',j) / (r_i w_ij), p_(i,j) }
      up[j] = overlap_discrete(components[i + 1][jj], components[i][jj], b / a);
      down[j] = overlap_discrete(components[i][jj], components[i + 1][jj], a / b);
    }
    in.delta_up.push_back(up);
    in.delta_down.push_back(down);
  }
  return in;
}

double ProjectedChain::detailed_balance_residual() const {
  const Mat flux = weights.asDiagonal() * rates;
  return (flux - flux.transpose()).cwiseAbs().maxCoeff();
}

FiniteMarkovProcess ProjectedChain::process() const {
  Mat Q = rates;
  Q.diagonal() = -rates.rowwise().sum();
  return FiniteMarkovProcess(std::move(Q), weights / weights.sum());
}

ProjectedChain build_projected_chain(const ProjectedInputs& in, double K, double rate_cap) {
  if (!(K > 0.0)) throw Error(ErrorCode::invalid_argument, "build_projected_chain: K must be positive");
  const std::size_t L = in.weights.size();
  if (L == 0 || static_cast<std::size_t>(in.rel_probs.size()) != L || in.delta_up.size() + 1 != L ||
      in.delta_down.size() + 1 != L) {
    throw Error(ErrorCode::dimension_mismatch, "build_projected_chain: inputs do not match the level count");
  }
  const auto m = in.weights[0].size();
  if (in.chi2_max.rows() != m || in.chi2_max.cols() != m) {
    throw Error(ErrorCode::dimension_mismatch, "build_projected_chain: chi2_max table has the wrong size");
  }
  ProjectedChain out;
  const auto N = static_cast<Eigen::Index>(L) * m;
  out.rates = Mat::Zero(N, N);
  out.weights = Vec(N);
  for (std::size_t i = 0; i < L; ++i) {
    if (in.weights[i].size() != m || std::abs(in.weights[i].sum() - 1.0) > 1e-9) {
      throw Error(ErrorCode::invalid_argument, "build_projected_chain: weights of a level must sum to 1");
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      out.index.emplace_back(i, static_cast<std::size_t>(j));
      out.weights[static_cast<Eigen::Index>(i) * m + j] = in.rel_probs[static_cast<Eigen::Index>(i)] * in.weights[i][j];
    }
  }
  auto missing = [](const std::string& what) {
    return Error(ErrorCode::precondition, "build_projected_chain: missing divergence entry " + what);
  };
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index k = 0; k < m; ++k) {
      if (j == k) continue;
      const double c = in.chi2_max(j, k);
      if (std::isnan(c)) throw missing("chi2_max(" + std::to_string(j) + "," + std::to_string(k) + ")");
      double rate = 0.0;
      if (!std::isinf(c)) rate = c > 0.0 ? std::min(rate_cap, in.weights[0][k] / c) : rate_cap;
      if (rate >= rate_cap) ++out.capped_rates;
      out.rates(j, k) = rate;
    }
  }
  for (std::size_t i = 0; i + 1 < L; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const double up = in.delta_up[i][j];
      const double down = in.delta_down[i][j];
      if (std::isnan(up) || std::isnan(down)) throw missing("delta at level " + std::to_string(i));
      const Eigen::Index a = static_cast<Eigen::Index>(i) * m + j;
      out.rates(a, a + m) = K * up;
      out.rates(a + m, a) = K * down;
    }
  }
  return out;
}

ProjectedChain build_simple_projected_chain(const std::vector<Vec>& components, const Vec& weights, bool overlap,
                                            double rate_cap) {
  if (!overlap) {
    return build_projected_chain(projected_inputs({components}, {weights}, Vec::Ones(1)), 1.0, rate_cap);
  }
  const auto m = static_cast<Eigen::Index>(components.size());
  if (weights.size() != m) throw Error(ErrorCode::dimension_mismatch, "build_simple_projected_chain: weights");
  ProjectedChain out;
  out.rates = Mat::Zero(m, m);
  out.weights = weights;
  for (Eigen::Index j = 0; j < m; ++j) {
    out.index.emplace_back(0, static_cast<std::size_t>(j));
    for (Eigen::Index k = 0; k < m; ++k) {
      if (j != k) {
        out.rates(j, k) = weights[k] * overlap_discrete(components[static_cast<std::size_t>(j)],
                                                        components[static_cast<std::size_t>(k)], 1.0);
      }
    }
  }
  return out;
}

CanonicalPathSet geodesic_paths(const Mat& rates) {
  const auto n = static_cast<std::size_t>(rates.rows());
  CanonicalPathSet set;
  set.states = n;
  set.paths.resize(n * n);
  constexpr auto none = std::numeric_limits<std::size_t>::max();
  for (std::size_t x = 0; x < n; ++x) {
    std::vector<std::size_t> parent(n, none);
    parent[x] = x;
    std::deque<std::size_t> queue{x};
    while (!queue.empty()) {
      const std::size_t z = queue.front();
      queue.pop_front();
      for (std::size_t w = 0; w < n; ++w) {
        if (parent[w] == none && rates(static_cast<Eigen::Index>(z), static_cast<Eigen::Index>(w)) > 0.0) {
          parent[w] = z;
          queue.push_back(w);
        }
      }
    }
    for (std::size_t y = 0; y < n; ++y) {
      if (y == x) continue;
      if (parent[y] == none) throw Error(ErrorCode::reducible_chain, "geodesic_paths: support graph is disconnected");
      auto& path = set.paths[x * n + y];
      for (std::size_t v = y; v != x; v = parent[v]) path.push_back(v);
      path.push_back(x);
      std::reverse(path.begin(), path.end());
    }
  }
  return set;
}

Congestion congestion_bound(const Mat& rates, const Vec& p, const CanonicalPathSet& paths) {
  const auto n = static_cast<std::size_t>(p.size());
  if (static_cast<std::size_t>(rates.rows()) != n || paths.states != n) {
    throw Error(ErrorCode::dimension_mismatch, "congestion_bound: sizes differ");
  }
  Mat load = Mat::Zero(rates.rows(), rates.cols());
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = 0; y < n; ++y) {
      if (x == y) continue;
      const auto& path = paths.path(x, y);
      if (path.size() < 2 || path.front() != x || path.back() != y) {
        throw Error(ErrorCode::precondition, "congestion_bound: path " + std::to_string(x) + "->" + std::to_string(y) +
                                                 " does not connect its endpoints");
      }
      const double len = static_cast<double>(path.size() - 1);
      const double mass = len * p[static_cast<Eigen::Index>(x)] * p[static_cast<Eigen::Index>(y)];
      for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        const auto z = static_cast<Eigen::Index>(path[k]);
        const auto w = static_cast<Eigen::Index>(path[k + 1]);
        if (!(rates(z, w) > 0.0) || z == w) {
          throw Error(ErrorCode::precondition, "congestion_bound: path " + std::to_string(x) + "->" +
                                                   std::to_string(y) + " uses zero-rate edge " + std::to_string(z) +
                                                   "->" + std::to_string(w));
        }
        load(z, w) += mass;
      }
    }
  }
  Congestion out;
  for (Eigen::Index z = 0; z < load.rows(); ++z) {
    for (Eigen::Index w = 0; w < load.cols(); ++w) {
      if (load(z, w) == 0.0) continue;
      const double r = load(z, w) / (p[z] * rates(z, w));
      if (r > out.rho) {
        out.rho = r;
        out.from = static_cast<std::size_t>(z);
        out.to = static_cast<std::size_t>(w);
      }
    }
  }
  return out;
}

nlohmann::json to_json(const DecompositionReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(v > 0 ? "inf" : "-inf"); };
  nlohmann::json j = {{"theorem", r.theorem},
                      {"instance_hash", r.instance_hash},
                      {"states", r.states},
                      {"components", r.components},
                      {"C", num(r.C)},
                      {"C_bar", num(r.C_bar)},
                      {"C_star", num(r.C_star)},
                      {"bound", num(r.bound)},
                      {"slack", num(r.slack)},
                      {"identity_residual", r.identity_residual},
                      {"pass", r.pass}};
  if (r.capped_rates) j["capped_rates"] = r.capped_rates;
  if (r.C_bar_lower_bound) j["C_bar_is_lower_bound"] = true;
  if (r.K > 0.0) j["K"] = r.K;
  if (r.swap_rate > 0.0) j["swap_rate"] = r.swap_rate;
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

std::string instance_hash(const FiniteMarkovProcess& chain) {
  // FNV-1a over the raw bytes of pi and Q.
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const double* data, std::size_t count) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < count * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  feed(chain.stationary().data(), chain.size());
  feed(chain.generator().data(), chain.size() * chain.size());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

// Projected constant; a disconnected projected chain has no finite constant.
// Rates near zero can put the gap below eigensolver resolution; then only a
// lower bound on C-bar is known, which still gives a lower bound on the
// theorem's right-hand side.
void projected_constant(const ProjectedChain& pc, DecompositionReport& r) {
  const FiniteMarkovProcess p = pc.process();
  if (!p.irreducible()) {
    r.C_bar = std::numeric_limits<double>::infinity();
    return;
  }
  const PoincareLowerBound lb = poincare_constant_lower_bound(p);
  r.C_bar = lb.value;
  r.C_bar_lower_bound = !lb.exact;
}

void finish(DecompositionReport& r) {
  r.slack = r.C_star > 0.0 ? r.bound / r.C_star : std::numeric_limits<double>::infinity();
  r.pass = r.error.empty() && r.C_star <= r.bound * (1.0 + decomposition_tolerance);
}

}  // namespace

DecompositionReport verify_simple_decomposition(const FiniteMarkovProcess& chain,
                                                const std::vector<FiniteMarkovProcess>& components,
                                                const Vec& weights, bool overlap) {
  DecompositionReport r;
  r.theorem = overlap ? "simple-decomposition-overlap" : "simple-decomposition";
  r.instance_hash = instance_hash(chain);
  r.states = chain.size();
  r.components = components.size();
  if (components.empty() || static_cast<std::size_t>(weights.size()) != components.size()) {
    throw Error(ErrorCode::dimension_mismatch, "verify_simple_decomposition: one weight per component required");
  }
  // Decomposition identity on the standard basis: diag(pi) Q = sum_j w_j diag(pi_j) Q_j.
  Mat flux = Mat::Zero(chain.generator().rows(), chain.generator().cols());
  Vec pi = Vec::Zero(chain.stationary().size());
  std::vector<Vec> stationary;
  for (std::size_t j = 0; j < components.size(); ++j) {
    const auto& c = components[j];
    if (c.size() != chain.size()) throw Error(ErrorCode::dimension_mismatch, "verify_simple_decomposition: state spaces");
    const double w = weights[static_cast<Eigen::Index>(j)];
    flux += w * (c.stationary().asDiagonal() * c.generator());
    pi += w * c.stationary();
    stationary.push_back(c.stationary());
    r.C = std::max(r.C, poincare_constant(c));
  }
  const Mat own = chain.stationary().asDiagonal() * chain.generator();
  r.identity_residual = std::max((own - flux).cwiseAbs().maxCoeff(), (chain.stationary() - pi).cwiseAbs().maxCoeff());
  if (r.identity_residual > chain_tol * rate_scale(chain.generator())) {
    r.error = "decomposition identity fails (residual " + std::to_string(r.identity_residual) + ")";
    finish(r);
    return r;
  }
  const ProjectedChain pc = build_simple_projected_chain(stationary, weights, overlap);
  r.capped_rates = pc.capped_rates;
  projected_constant(pc, r);
  r.C_star = poincare_constant(chain);
  r.bound = overlap ? r.C * (1.0 + 2.0 * r.C_bar) : r.C * (1.0 + 0.5 * r.C_bar);
  finish(r);
  return r;
}

DecompositionReport verify_tempering_decomposition(const FiniteMarkovProcess& chain,
                                                   const std::vector<std::vector<FiniteMarkovProcess>>& components,
                                                   const std::vector<Vec>& weights, const Vec& rel_probs, double K,
                                                   double swap_rate) {
  if (!(swap_rate > 0.0)) throw Error(ErrorCode::invalid_argument, "verify_tempering_decomposition: lambda must be positive");
  const std::size_t L = components.size();
  if (L == 0 || weights.size() != L || static_cast<std::size_t>(rel_probs.size()) != L) {
    throw Error(ErrorCode::dimension_mismatch, "verify_tempering_decomposition: level counts differ");
  }
  const auto n = static_cast<Eigen::Index>(components[0].at(0).size());
  if (static_cast<Eigen::Index>(chain.size()) != static_cast<Eigen::Index>(L) * n) {
    throw Error(ErrorCode::dimension_mismatch, "verify_tempering_decomposition: chain is not on [L] x grid");
  }
  DecompositionReport r;
  r.theorem = "tempering-decomposition";
  r.instance_hash = instance_hash(chain);
  r.states = chain.size();
  r.components = components[0].size();
  r.K = K;
  r.swap_rate = swap_rate;

  // Per-level identity: within-level flux of the chain against the weighted
  // component fluxes, and the stationary law against r_i sum_j w_ij p_ij.
  std::vector<std::vector<Vec>> stationary(L);
  for (std::size_t i = 0; i < L; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    Mat flux = Mat::Zero(n, n);
    Vec pi = Vec::Zero(n);
    for (std::size_t j = 0; j < components[i].size(); ++j) {
      const auto& c = components[i][j];
      const double w = weights[i][static_cast<Eigen::Index>(j)];
      flux += w * (c.stationary().asDiagonal() * c.generator());
      pi += w * c.stationary();
      stationary[i].push_back(c.stationary());
      r.C = std::max(r.C, poincare_constant(c));
    }
    const Vec own_pi = chain.stationary().segment(ii * n, n);
    Mat own = own_pi.asDiagonal() * chain.generator().block(ii * n, ii * n, n, n);
    own.diagonal().setZero();
    flux *= rel_probs[ii];
    flux.diagonal().setZero();
    r.identity_residual = std::max({r.identity_residual, (own - flux).cwiseAbs().maxCoeff(),
                                    (own_pi - rel_probs[ii] * pi).cwiseAbs().maxCoeff()});
  }
  if (r.identity_residual > chain_tol * rate_scale(chain.generator())) {
    r.error = "decomposition identity fails (residual " + std::to_string(r.identity_residual) + ")";
    finish(r);
    return r;
  }
  const ProjectedChain pc = build_projected_chain(projected_inputs(stationary, weights, rel_probs), K);
  r.capped_rates = pc.capped_rates;
  projected_constant(pc, r);
  r.C_star = poincare_constant(chain);
  r.bound = std::max(r.C * (1.0 + (0.5 + 6.0 * K) * r.C_bar), 6.0 * K * r.C_bar / swap_rate);
  finish(r);
  return r;
}

SimpleInstance gaussian_simple_instance(const std::vector<double>& nodes, const std::vector<double>& centers,
                                        const std::vector<double>& sigmas, const Vec& weights) {
  if (centers.size() != sigmas.size() || static_cast<std::size_t>(weights.size()) != centers.size()) {
    throw Error(ErrorCode::dimension_mismatch, "gaussian_simple_instance: component counts differ");
  }
  const double h = nodes[1] - nodes[0];
  std::vector<FiniteMarkovProcess> comps;
  for (std::size_t j = 0; j < centers.size(); ++j) {
    comps.push_back(discretize_density(gaussian_on_nodes(nodes, centers[j], sigmas[j]), 1.0 / (h * h)));
  }
  FiniteMarkovProcess chain = mix_chains(comps, weights);
  nlohmann::json desc = {{"nodes", nodes.size()},
                         {"lo", nodes.front()},
                         {"hi", nodes.back()},
                         {"centers", centers},
                         {"sigmas", sigmas},
                         {"weights", std::vector<double>(weights.data(), weights.data() + weights.size())}};
  return {std::move(comps), weights, std::move(chain), std::move(desc)};
}

namespace {

Vec random_weights(RngStream& rng, std::size_t m) {
  Vec w(static_cast<Eigen::Index>(m));
  for (Eigen::Index j = 0; j < w.size(); ++j) w[j] = 0.2 + rng.uniform();
  return w / w.sum();
}

}  // namespace

SimpleInstance random_simple_instance(RngStream& rng, std::size_t max_states, std::size_t max_components) {
  if (max_states < 8 || max_components < 1) throw Error(ErrorCode::invalid_argument, "random_simple_instance: sizes");
  const std::size_t n = std::max<std::size_t>(8, max_states / 4 + rng.index(max_states - max_states / 4 + 1));
  const std::size_t m = 1 + rng.index(max_components);
  std::vector<double> centers, sigmas;
  for (std::size_t j = 0; j < m; ++j) {
    centers.push_back(-2.5 + 5.0 * rng.uniform());
    sigmas.push_back(0.6 + 0.9 * rng.uniform());
  }
  const double smax = *std::max_element(sigmas.begin(), sigmas.end());
  const double lo = *std::min_element(centers.begin(), centers.end()) - 4.0 * smax;
  const double hi = *std::max_element(centers.begin(), centers.end()) + 4.0 * smax;
  return gaussian_simple_instance(uniform_nodes(lo, hi, n), centers, sigmas, random_weights(rng, m));
}

TemperingInstance gaussian_tempering_instance(const std::vector<double>& nodes, const std::vector<double>& centers,
                                              double sigma, const Vec& weights, const std::vector<double>& betas,
                                              double swap_rate) {
  if (static_cast<std::size_t>(weights.size()) != centers.size() || betas.empty()) {
    throw Error(ErrorCode::dimension_mismatch, "gaussian_tempering_instance: sizes");
  }
  const double h = nodes[1] - nodes[0];
  const Vec r = Vec::Constant(static_cast<Eigen::Index>(betas.size()), 1.0 / static_cast<double>(betas.size()));
  std::vector<std::vector<FiniteMarkovProcess>> components;
  std::vector<FiniteMarkovProcess> levels;
  for (double beta : betas) {
    std::vector<FiniteMarkovProcess> level;
    for (double mu : centers) {
      level.push_back(discretize_density(gaussian_on_nodes(nodes, mu, sigma / std::sqrt(beta)), 1.0 / (h * h)));
    }
    levels.push_back(mix_chains(level, weights));
    components.push_back(std::move(level));
  }
  FiniteMarkovProcess chain = build_tempering_chain(levels, r, swap_rate);
  nlohmann::json desc = {{"nodes", nodes.size()},
                         {"lo", nodes.front()},
                         {"hi", nodes.back()},
                         {"centers", centers},
                         {"sigma", sigma},
                         {"betas", betas},
                         {"weights", std::vector<double>(weights.data(), weights.data() + weights.size())},
                         {"swap_rate", swap_rate}};
  return {std::move(components), std::vector<Vec>(betas.size(), weights), r, swap_rate, std::move(levels),
          std::move(chain), std::move(desc)};
}

TemperingInstance random_tempering_instance(RngStream& rng, std::size_t levels, std::size_t max_states) {
  if (levels < 1 || max_states < 8) throw Error(ErrorCode::invalid_argument, "random_tempering_instance: sizes");
  const std::size_t n = std::max<std::size_t>(8, max_states / 2 + rng.index(max_states - max_states / 2 + 1));
  const std::size_t m = 2 + rng.index(2);
  std::vector<double> centers;
  for (std::size_t j = 0; j < m; ++j) centers.push_back(-3.0 + 6.0 * rng.uniform());
  const double sigma = 0.5 + 0.5 * rng.uniform();
  const double beta0 = 0.1 + 0.2 * rng.uniform();
  std::vector<double> betas;
  for (std::size_t i = 0; i < levels; ++i) {
    betas.push_back(levels == 1 ? 1.0 : std::pow(beta0, 1.0 - static_cast<double>(i) / static_cast<double>(levels - 1)));
  }
  const double pad = 3.0 * sigma / std::sqrt(beta0);
  const double lo = *std::min_element(centers.begin(), centers.end()) - pad;
  const double hi = *std::max_element(centers.begin(), centers.end()) + pad;
  const double lambda = 0.5 + 1.5 * rng.uniform();
  return gaussian_tempering_instance(uniform_nodes(lo, hi, n), centers, sigma, random_weights(rng, m), betas, lambda);
}

}  // namespace stlmc
