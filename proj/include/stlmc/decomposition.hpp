#pragma once

#include "stlmc/rng.hpp"
#include "stlmc/types.hpp"

#include <json.hpp>

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace stlmc {

/// Continuous-time chain on {0..n-1}: generator Q (zero row sums,
/// nonnegative off-diagonal) and stationary law pi.
class FiniteMarkovProcess {
 public:
  /// Validates row sums, pi and reversibility. Tolerances are 1e-10 relative
  /// to max(1, largest rate).
  FiniteMarkovProcess(Mat Q, Vec pi);

  std::size_t size() const noexcept { return static_cast<std::size_t>(pi_.size()); }
  const Mat& generator() const noexcept { return Q_; }
  const Vec& stationary() const noexcept { return pi_; }

  double row_sum_residual() const;
  /// max |pi_x Q(x,y) - pi_y Q(y,x)|
  double reversibility_residual() const;
  /// True when the support graph of Q is connected.
  bool irreducible() const;

 private:
  Mat Q_;
  Vec pi_;
};

std::vector<double> uniform_nodes(double lo, double hi, std::size_t n);

/// Birth-death chain with Metropolis rates base_rate * min{1, pi(x+-1)/pi(x)}
/// whose stationary law is the normalized density vector.
FiniteMarkovProcess discretize_density(const Vec& density, double base_rate);
/// Same on uniform nodes with base_rate = 1/h^2.
FiniteMarkovProcess discretize_density(const std::function<double(double)>& density,
                                       const std::vector<double>& nodes);
/// Normalized N(mu, sigma^2) weights on the nodes.
Vec gaussian_on_nodes(const std::vector<double>& nodes, double mu, double sigma);

/// The chain with conductances sum_j w_j pi_j(x) Q_j(x,y): its stationary law
/// is sum_j w_j pi_j and its Dirichlet form is sum_j w_j E_j exactly.
FiniteMarkovProcess mix_chains(const std::vector<FiniteMarkovProcess>& components, const Vec& weights);

double expectation(const Vec& pi, const Vec& g);
double variance(const Vec& pi, const Vec& g);
/// -sum_x pi_x g(x) (Q g)(x)
double dirichlet_form(const FiniteMarkovProcess& chain, const Vec& g);
/// 1/2 sum_{x,y} pi_x Q(x,y) (g(x) - g(y))^2
double dirichlet_form_edges(const FiniteMarkovProcess& chain, const Vec& g);

struct PoincareResult {
  double constant = 0.0;  // 1 / gap; 0 for a single state
  double gap = 0.0;
  Vec extremal;  // eigenfunction of the gap, in the original basis
};

/// Smallest nonzero eigenvalue of -D^{1/2} Q D^{-1/2}. Throws reducible_chain
/// when the support graph is disconnected.
PoincareResult poincare_analysis(const FiniteMarkovProcess& chain);
double poincare_constant(const FiniteMarkovProcess& chain);

struct PoincareLowerBound {
  double value = 0.0;
  bool exact = true;  // false when the gap is below the eigensolver's resolution
};

/// Like poincare_constant, but a gap too small to resolve yields the lower
/// bound 1 / (computed gap + eigensolver error) instead of an error.
PoincareLowerBound poincare_constant_lower_bound(const FiniteMarkovProcess& chain);

/// States ordered level-major: (i, x) -> i * n + x.
FiniteMarkovProcess build_tempering_chain(const std::vector<FiniteMarkovProcess>& levels, const Vec& rel_probs,
                                          double swap_rate);
/// sum_i r_i E_i(g_i) + lambda/4 sum_{|i-j|=1} sum_x min{r_i pi_i, r_j pi_j} (g_i - g_j)^2
double tempering_dirichlet_form(const std::vector<FiniteMarkovProcess>& levels, const Vec& rel_probs,
                                double swap_rate, const Vec& g);

/// Divergence inputs of the projected chain. chi2_max holds level-0 pairs;
/// delta_up[i](j) = delta_{(i,j),(i+1,j)} and delta_down[i](j) =
/// delta_{(i+1,j),(i,j)}. NaN marks a missing entry.
struct ProjectedInputs {
  std::vector<Vec> weights;  // w_{i,.}
  Vec rel_probs;
  Mat chi2_max;
  std::vector<Vec> delta_up;
  std::vector<Vec> delta_down;
};

/// Computes the inputs from component stationary vectors on a shared state
/// space: components[i][j] = p_{(i,j)}.
ProjectedInputs projected_inputs(const std::vector<std::vector<Vec>>& components,
                                 const std::vector<Vec>& weights, const Vec& rel_probs);

struct ProjectedChain {
  std::vector<std::pair<std::size_t, std::size_t>> index;  // (level, component)
  Mat rates;                                                // T-bar, zero diagonal
  Vec weights;                                              // r_i w_{i,j}
  std::size_t capped_rates = 0;  // chi2_max = 0 entries replaced by the cap

  double detailed_balance_residual() const;
  FiniteMarkovProcess process() const;
};

/// Complete graph at level 0 with rates w_{0,k}/chi2_max (0 when infinite,
/// `rate_cap` when chi2_max = 0) and vertical rates K delta.
ProjectedChain build_projected_chain(const ProjectedInputs& inputs, double K, double rate_cap = 1e12);

/// Projected chain of the simple theorem (one level). `overlap` selects the
/// variant T(j,k) = w_k delta_{j,k}.
ProjectedChain build_simple_projected_chain(const std::vector<Vec>& components, const Vec& weights,
                                            bool overlap = false, double rate_cap = 1e12);

/// paths[x * n + y] lists the states from x to y (empty for x == y).
struct CanonicalPathSet {
  std::size_t states = 0;
  std::vector<std::vector<std::size_t>> paths;

  const std::vector<std::size_t>& path(std::size_t x, std::size_t y) const { return paths[x * states + y]; }
};

/// Shortest paths in the support graph of `rates` (BFS, lowest index first).
CanonicalPathSet geodesic_paths(const Mat& rates);

struct Congestion {
  double rho = 0.0;
  std::size_t from = 0;  // maximizing edge
  std::size_t to = 0;
};

/// max over edges (z,w) of sum_{gamma_{x,y} containing (z,w)} |gamma| p(x) p(y) / (p(z) T(z,w)).
/// Throws precondition when a path is broken or uses a zero-rate edge.
Congestion congestion_bound(const Mat& rates, const Vec& p, const CanonicalPathSet& paths);

struct DecompositionReport {
  std::string theorem;
  std::string instance_hash;
  std::size_t states = 0;
  std::size_t components = 0;
  double C = 0.0;
  double C_bar = 0.0;
  double C_star = 0.0;
  double bound = 0.0;
  double slack = 0.0;  // bound / C_star
  double identity_residual = 0.0;
  std::size_t capped_rates = 0;
  /// C_bar (and so the bound) is a lower bound on the true value.
  bool C_bar_lower_bound = false;
  double K = 0.0;
  double swap_rate = 0.0;
  bool pass = false;
  std::string error;  // set when a precondition failed
};

nlohmann::json to_json(const DecompositionReport& r);

/// Relative tolerance on C* <= bound.
inline constexpr double decomposition_tolerance = 1e-6;

/// Checks C* <= C (1 + C-bar/2), or C (1 + 2 C-bar) for the overlap variant.
DecompositionReport verify_simple_decomposition(const FiniteMarkovProcess& chain,
                                                const std::vector<FiniteMarkovProcess>& components,
                                                const Vec& weights, bool overlap = false);

/// Checks C* <= max{C (1 + (1/2 + 6K) C-bar), 6 K C-bar / lambda}.
DecompositionReport verify_tempering_decomposition(const FiniteMarkovProcess& chain,
                                                   const std::vector<std::vector<FiniteMarkovProcess>>& components,
                                                   const std::vector<Vec>& weights, const Vec& rel_probs, double K,
                                                   double swap_rate);

std::string instance_hash(const FiniteMarkovProcess& chain);

// Instance builders used by the test suites and the CLI.

struct SimpleInstance {
  std::vector<FiniteMarkovProcess> components;
  Vec weights;
  FiniteMarkovProcess chain;
  nlohmann::json description;
};

/// Mixture of discretized Gaussians N(mu_j, sigma_j^2) on shared nodes.
SimpleInstance gaussian_simple_instance(const std::vector<double>& nodes, const std::vector<double>& centers,
                                        const std::vector<double>& sigmas, const Vec& weights);
/// n <= max_states nodes, m <= max_components components.
SimpleInstance random_simple_instance(RngStream& rng, std::size_t max_states = 64, std::size_t max_components = 3);

struct TemperingInstance {
  std::vector<std::vector<FiniteMarkovProcess>> components;  // [level][component]
  std::vector<Vec> weights;
  Vec rel_probs;
  double swap_rate = 1.0;
  std::vector<FiniteMarkovProcess> levels;
  FiniteMarkovProcess chain;
  nlohmann::json description;
};

/// Level i holds components N(mu_j, sigma^2 / beta_i) with weights w_j and
/// uniform relative probabilities.
TemperingInstance gaussian_tempering_instance(const std::vector<double>& nodes, const std::vector<double>& centers,
                                              double sigma, const Vec& weights, const std::vector<double>& betas,
                                              double swap_rate);
TemperingInstance random_tempering_instance(RngStream& rng, std::size_t levels = 3, std::size_t max_states = 64);

}  // namespace stlmc
