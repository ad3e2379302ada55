#include "stlmc/ladder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace stlmc {

using nlohmann::json;

TemperatureLadder TemperatureLadder::prefix(std::size_t levels) const {
  if (levels == 0 || levels > size()) {
    throw Error(ErrorCode::invalid_argument, "TemperatureLadder::prefix: bad level count");
  }
  TemperatureLadder out;
  out.betas.assign(betas.begin(), betas.begin() + static_cast<long>(levels));
  out.log_partition.assign(log_partition.begin(), log_partition.begin() + static_cast<long>(levels));
  out.rel_probs.assign(levels, 1.0 / static_cast<double>(levels));
  out.ratio_bound = ratio_bound;
  return out;
}

void TemperatureLadder::validate() const {
  const auto bad = [](const std::string& m) { throw Error(ErrorCode::invalid_argument, "ladder: " + m); };
  if (betas.empty()) bad("no levels");
  if (rel_probs.size() != betas.size() || log_partition.size() != betas.size()) bad("length mismatch");
  if (!(betas.front() > 0.0)) bad("beta_1 must be positive");
  for (std::size_t i = 1; i < betas.size(); ++i) {
    if (!(betas[i] > betas[i - 1])) bad("betas must be strictly increasing");
    if (betas[i] / betas[i - 1] > ratio_bound * (1.0 + 1e-12)) bad("consecutive ratio exceeds bound");
  }
  if (betas.back() != 1.0) bad("the last beta must be 1");
  double sum = 0.0;
  for (double r : rel_probs) {
    if (!(r > 0.0)) bad("relative probabilities must be positive");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-12) bad("relative probabilities must sum to 1");
  for (double z : log_partition) {
    if (!std::isfinite(z)) bad("partition estimates must be positive and finite");
  }
}

void RunParams::validate() const {
  const auto bad = [](const std::string& m) { throw Error(ErrorCode::invalid_argument, "run params: " + m); };
  if (!(swap_rate >= 0.0) || !std::isfinite(swap_rate)) bad("swap rate must be non-negative");
  if (!(step_size > 0.0)) bad("step size must be positive");
  if (!(total_time > 0.0) || !std::isfinite(total_time)) bad("total time must be positive");
  if (!(init_std > 0.0)) bad("initial std must be positive");
  if (step_size > total_time) bad("step size exceeds total time");
  if (swap_rate > 0.0 && swap_rate * total_time < 1.0) bad("fewer than one expected swap (lambda * T < 1)");
}

std::vector<double> geometric_betas(double beta1, double ratio) {
  if (!(beta1 > 0.0)) throw Error(ErrorCode::invalid_argument, "geometric_betas: beta_1 must be positive");
  if (!(ratio > 1.0)) throw Error(ErrorCode::invalid_argument, "geometric_betas: ratio must exceed 1");
  if (beta1 >= 1.0) return {1.0};
  const auto levels = static_cast<std::size_t>(std::ceil(std::log(1.0 / beta1) / std::log(ratio))) + 1;
  std::vector<double> betas;
  betas.reserve(levels);
  for (std::size_t k = 0; k + 1 < levels; ++k) {
    betas.push_back(beta1 * std::pow(ratio, static_cast<double>(k)));
  }
  // ceil() can land one level late when ln(1/beta_1)/ln(ratio) is an integer
  // up to rounding; the last geometric level must stay strictly below 1.
  while (!betas.empty() && betas.back() >= 1.0 - 1e-12) betas.pop_back();
  betas.push_back(1.0);
  return betas;
}

namespace {

TemperatureLadder uniform_ladder(std::vector<double> betas, double ratio) {
  TemperatureLadder l;
  const std::size_t n = betas.size();
  l.betas = std::move(betas);
  l.rel_probs.assign(n, 1.0 / static_cast<double>(n));
  l.log_partition.assign(n, 0.0);
  l.ratio_bound = ratio;
  return l;
}

void check_common(Eigen::Index d, double w_min, double eps) {
  if (d <= 0) throw Error(ErrorCode::invalid_argument, "ladder: dimension must be positive");
  if (!(w_min > 0.0) || w_min > 1.0) throw Error(ErrorCode::invalid_argument, "ladder: w_min must be in (0, 1]");
  if (!(eps > 0.0) || !(eps < 1.0)) throw Error(ErrorCode::invalid_argument, "ladder: eps must be in (0, 1)");
}

int argmin3(const std::array<double, 3>& v) {
  return static_cast<int>(std::min_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

LadderBuild build_ladder_gaussian(Eigen::Index d, double center_bound, double sigma, double w_min, double eps,
                                  const ScheduleConstants& c) {
  check_common(d, w_min, eps);
  if (!(sigma > 0.0)) throw Error(ErrorCode::invalid_argument, "ladder: sigma must be positive");
  const double D = center_bound;
  if (!(D >= sigma)) {
    throw Error(ErrorCode::invalid_argument,
                "ladder: center bound D must be at least sigma; set D = max(max |mu_i|, sigma) = " +
                    std::to_string(sigma));
  }
  const double dd = static_cast<double>(d);
  const double beta1 = std::min(1.0, c.beta1 * sigma * sigma / (D * D));
  const double ratio = 1.0 + 1.0 / (dd + std::log(1.0 / w_min));

  LadderBuild out;
  out.ladder = uniform_ladder(geometric_betas(beta1, ratio), ratio);
  const double L = static_cast<double>(out.ladder.size());

  RunParams& p = out.params;
  p.constants = c;
  p.accuracy = eps;
  p.swap_rate = c.swap_rate / (D * D);
  p.total_time = c.total_time * L * L * D * D * std::log(L / (eps * w_min)) / std::pow(w_min, c.weight_exponent);
  const double T = p.total_time;
  p.step_size_terms = {std::pow(sigma, 4) / ((D / sigma + std::sqrt(dd)) * T), 1.0 / std::sqrt(D),
                       sigma * eps / (dd * T)};
  p.active_step_term = argmin3(p.step_size_terms);
  p.step_size = c.step_size * std::pow(sigma, 3) * eps / (D * D) * p.step_size_terms[p.active_step_term];
  p.init_std = sigma / std::sqrt(out.ladder.betas.front());
  return out;
}

LadderBuild build_ladder_logconcave(Eigen::Index d, double center_bound, double kappa, double smoothness,
                                    double w_min, double eps, const ScheduleConstants& c) {
  check_common(d, w_min, eps);
  if (!(kappa > 0.0)) throw Error(ErrorCode::invalid_argument, "ladder: kappa must be positive");
  if (kappa > smoothness) throw Error(ErrorCode::invalid_argument, "ladder: need kappa <= K");
  const double dd = static_cast<double>(d);
  const double K = smoothness;
  const double D = center_bound;
  const double floor = std::sqrt(kappa) / (std::sqrt(dd) * K);
  if (!(D >= floor)) {
    throw Error(ErrorCode::invalid_argument,
                "ladder: center bound D is below the floor sqrt(kappa)/(sqrt(d) K) = " + std::to_string(floor));
  }
  const double log_cond = std::log(K / kappa) + 1.0;
  const double beta1 = std::min(1.0, c.beta1 * kappa / (dd * K * K * D * D));
  const double ratio = 1.0 + kappa / (K * dd * log_cond);

  LadderBuild out;
  out.ladder = uniform_ladder(geometric_betas(beta1, ratio), ratio);
  const double L = static_cast<double>(out.ladder.size());

  RunParams& p = out.params;
  p.constants = c;
  p.accuracy = eps;
  p.swap_rate = c.swap_rate / (D * D);
  p.total_time = c.total_time * L * L * D * D / std::pow(w_min, c.weight_exponent) * dd *
                 std::log(L / (eps * w_min)) * log_cond;
  const double T = p.total_time;
  p.step_size_terms = {
      eps / (D * D * std::pow(K, 3.5) * (D * K / std::sqrt(kappa) + std::sqrt(dd)) * T),
      eps / (std::pow(D, 2.5) * std::pow(K, 1.5) * (std::sqrt(K / kappa) + 1.0)),
      eps / (D * D * K * K * dd * T)};
  p.active_step_term = argmin3(p.step_size_terms);
  p.step_size = c.step_size * p.step_size_terms[p.active_step_term];
  p.init_std = 1.0 / std::sqrt(kappa * out.ladder.betas.front());
  return out;
}

bool PartitionCheck::all() const {
  return std::all_of(within.begin(), within.end(), [](bool b) { return b; });
}

PartitionCheck validate_partition_estimates(const TemperatureLadder& ladder,
                                            std::span<const double> exact_log_partition) {
  if (exact_log_partition.size() != ladder.size() || ladder.log_partition.size() != ladder.size()) {
    throw Error(ErrorCode::dimension_mismatch, "validate_partition_estimates: length mismatch");
  }
  const std::size_t n = ladder.size();
  const double L = static_cast<double>(n);
  const double base = ladder.log_partition[0] - exact_log_partition[0];
  PartitionCheck out;
  out.within.resize(n);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double log_ratio = ladder.log_partition[i] - exact_log_partition[i] - base;
    const double k = static_cast<double>(i);
    const double lo = L > 1.0 ? k * std::log1p(-1.0 / L) : (i == 0 ? 0.0 : -INFINITY);
    const double hi = k * std::log1p(1.0 / L);
    const double slack = 1e-12 * (1.0 + std::abs(log_ratio));
    out.within[i] = log_ratio >= lo - slack && log_ratio <= hi + slack;
    if (std::abs(log_ratio) > std::abs(worst)) {
      worst = log_ratio;
      out.worst_level = i;
    }
  }
  out.worst_ratio = std::exp(worst);
  return out;
}

json to_json(const ScheduleConstants& c) {
  return {{"c1", c.beta1},          {"c2", c.swap_rate},     {"cT", c.total_time},
          {"c_eta", c.step_size},   {"c_n", c.sample_count}, {"w_exponent", c.weight_exponent}};
}

json to_json(const TemperatureLadder& l) {
  return {{"betas", l.betas},
          {"rel_probs", l.rel_probs},
          {"log_partition_estimates", l.log_partition},
          {"ratio_bound", l.ratio_bound}};
}

json to_json(const RunParams& p) {
  return {{"swap_rate", p.swap_rate},
          {"step_size", p.step_size},
          {"total_time", p.total_time},
          {"init_std", p.init_std},
          {"accuracy", p.accuracy},
          {"constants", to_json(p.constants)},
          {"step_size_terms", p.step_size_terms},
          {"active_step_term", p.active_step_term}};
}

ScheduleConstants schedule_constants_from_json(const json& doc) {
  ScheduleConstants c;
  for (const auto& [key, value] : doc.items()) {
    if (!value.is_number()) throw Error(ErrorCode::schema, "constants." + key + ": expected a number");
    const double v = value.get<double>();
    if (key == "c1") c.beta1 = v;
    else if (key == "c2") c.swap_rate = v;
    else if (key == "cT") c.total_time = v;
    else if (key == "c_eta") c.step_size = v;
    else if (key == "c_n") c.sample_count = v;
    else if (key == "w_exponent") c.weight_exponent = v;
    else throw Error(ErrorCode::schema, "constants: unknown field '" + key + "'");
    if (!(v > 0.0)) throw Error(ErrorCode::schema, "constants." + key + ": must be positive");
  }
  return c;
}

TemperatureLadder ladder_from_json(const json& doc) {
  TemperatureLadder l;
  try {
    l.betas = doc.at("betas").get<std::vector<double>>();
    l.rel_probs = doc.at("rel_probs").get<std::vector<double>>();
    l.log_partition = doc.at("log_partition_estimates").get<std::vector<double>>();
    l.ratio_bound = doc.at("ratio_bound").get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::schema, std::string("ladder: ") + e.what());
  }
  l.validate();
  return l;
}

RunParams run_params_from_json(const json& doc) {
  RunParams p;
  try {
    p.swap_rate = doc.at("swap_rate").get<double>();
    p.step_size = doc.at("step_size").get<double>();
    p.total_time = doc.at("total_time").get<double>();
    p.init_std = doc.at("init_std").get<double>();
    p.accuracy = doc.at("accuracy").get<double>();
    if (doc.contains("constants")) p.constants = schedule_constants_from_json(doc.at("constants"));
    if (doc.contains("step_size_terms")) p.step_size_terms = doc.at("step_size_terms").get<std::array<double, 3>>();
    p.active_step_term = doc.value("active_step_term", 0);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::schema, std::string("run params: ") + e.what());
  }
  p.validate();
  return p;
}

}  // namespace stlmc
