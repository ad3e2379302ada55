#include "stlmc/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace stlmc {

namespace {

std::string describe(const Vec& x) {
  std::ostringstream os;
  os << '[';
  for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ']';
  return os.str();
}

struct Recorder {
  RunRecord& rec;

  void push(std::uint64_t step, double time, std::size_t level, const Vec& x) {
    rec.steps.push_back(step);
    rec.times.push_back(time);
    rec.levels.push_back(static_cast<std::uint32_t>(level));
    rec.positions.insert(rec.positions.end(), x.data(), x.data() + x.size());
    ++rec.occupancy[level];
  }
};

}  // namespace

std::vector<Vec> RunRecord::positions_at(std::size_t level) const {
  std::vector<Vec> out;
  for (std::size_t r = 0; r < rows(); ++r) {
    if (levels[r] == level) out.emplace_back(position(r));
  }
  return out;
}

Vec langevin_step(const DensityOracle& oracle, double beta, const Vec& x, double eta, const Vec& noise) {
  Vec g = oracle.gradient(x);
  if (!g.allFinite()) {
    throw Error(ErrorCode::non_finite, "langevin_step: non-finite gradient at " + describe(x));
  }
  return x - (eta * beta) * g + std::sqrt(2.0 * eta) * noise;
}

Vec langevin_step(const DensityOracle& oracle, double beta, const Vec& x, double eta, RngStream& rng) {
  if (!(eta > 0.0) || !(beta > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "langevin_step: eta and beta must be positive");
  }
  return langevin_step(oracle, beta, x, eta, rng.normal_vector(x.size()));
}

std::vector<double> draw_swap_times(double rate, double horizon, RngStream& rng) {
  if (!(rate > 0.0) || !(horizon > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "draw_swap_times: rate and horizon must be positive");
  }
  std::vector<double> times;
  double t = rng.exponential(rate);
  while (t < horizon) {
    times.push_back(t);
    t += rng.exponential(rate);
  }
  return times;
}

double swap_log_ratio(const TemperatureLadder& ladder, std::size_t from, std::size_t to, double f_value) {
  return std::log(ladder.rel_probs[to]) - std::log(ladder.rel_probs[from]) -
         (ladder.betas[to] - ladder.betas[from]) * f_value -
         (ladder.log_partition[to] - ladder.log_partition[from]);
}

SwapOutcome swap_attempt(const TemperingState& state, const TemperatureLadder& ladder, const DensityOracle& oracle,
                         RngStream& rng) {
  SwapOutcome out{state, false, false};
  const bool up = rng.uniform() >= 0.5;
  if ((!up && state.level == 0) || (up && state.level + 1 >= ladder.size())) return out;
  const std::size_t to = up ? state.level + 1 : state.level - 1;
  out.in_bounds = true;
  out.proposed = to;
  const double log_acc = swap_log_ratio(ladder, state.level, to, oracle.value(state.position));
  // u < min(1, e^{log_acc}); for log_acc >= 0 this always holds.
  if (rng.uniform() < std::exp(std::min(0.0, log_acc))) {
    out.state.level = to;
    out.accepted = true;
  }
  return out;
}

RunRecord run_stlmc(const DensityOracle& oracle, const TemperatureLadder& ladder, const RunParams& params,
                    RngStream& rng, const StlmcOptions& options) {
  if (ladder.size() == 0) throw Error(ErrorCode::invalid_argument, "run_stlmc: empty ladder");
  params.validate();
  const Eigen::Index d = oracle.dim();
  const std::size_t L = ladder.size();

  RunRecord rec;
  rec.dim = d;
  rec.occupancy.assign(L, 0);
  rec.swap_attempts.assign(L > 1 ? L - 1 : 0, 0);
  rec.swap_accepts.assign(L > 1 ? L - 1 : 0, 0);
  rec.seed = rng.seed();
  Recorder recorder{rec};

  TemperingState state;
  if (options.initial_level >= L) throw Error(ErrorCode::invalid_argument, "run_stlmc: initial level out of range");
  state.level = options.initial_level;
  if (options.initial_position) {
    require_dim(*options.initial_position, d, "run_stlmc");
    state.position = *options.initial_position;
  } else {
    state.position = params.init_std * rng.normal_vector(d);
  }

  const double T = params.total_time;
  const double eta = params.step_size;
  double t = 0.0;
  std::uint64_t step = 0;
  while (t < T) {
    double xi = params.swap_rate > 0.0 ? rng.exponential(params.swap_rate)
                                       : std::numeric_limits<double>::infinity();
    double t_next;
    if (xi >= T - t) {
      xi = T - t;
      t_next = T;
    } else {
      t_next = t + xi;
    }
    const auto k = static_cast<std::uint64_t>(std::ceil(xi / eta));
    if (k > 0) {
      const double sub = xi / static_cast<double>(k);
      const double beta = ladder.betas[state.level];
      for (std::uint64_t s = 1; s <= k; ++s) {
        try {
          state.position = langevin_step(oracle, beta, state.position, sub, rng);
        } catch (const Error& e) {
          throw Error(e.code(), std::string(e.what()) + " (langevin step " + std::to_string(step) + ")");
        }
        ++step;
        if (options.thin > 0 && step % options.thin == 0) {
          recorder.push(step, t + static_cast<double>(s) * sub, state.level, state.position);
        }
      }
    }
    t = t_next;
    if (t < T) {
      ++rec.swap_events;
      const SwapOutcome o = swap_attempt(state, ladder, oracle, rng);
      if (o.in_bounds) {
        const std::size_t pair = std::min(state.level, o.proposed);
        ++rec.swap_attempts[pair];
        if (o.accepted) ++rec.swap_accepts[pair];
      }
      state = o.state;
      if (options.thin > 0) recorder.push(step, t, state.level, state.position);
    }
  }
  rec.langevin_steps = step;
  rec.final_state = state;
  rec.rejected = state.level + 1 != L;
  rec.params = {{"ladder", to_json(ladder)}, {"run", to_json(params)}, {"thin", options.thin}};
  return rec;
}


AcceptedSample sample_stlmc(const DensityOracle& oracle, const TemperatureLadder& ladder, const RunParams& params,
                            RngStream& rng, std::size_t max_runs) {
  AcceptedSample out;
  StlmcOptions quiet;
  quiet.thin = 0;
  while (out.runs < max_runs) {
    RunRecord rec = run_stlmc(oracle, ladder, params, rng, quiet);
    ++out.runs;
    out.langevin_steps += rec.langevin_steps;
    if (!rec.rejected) {
      out.position = std::move(rec.final_state.position);
      return out;
    }
  }
  throw Error(ErrorCode::rejection_ceiling,
              "sample_stlmc: " + std::to_string(max_runs) + " consecutive runs ended below level " +
                  std::to_string(ladder.size()));
}

RunRecord run_plain_langevin(const DensityOracle& oracle, double beta, double eta, std::uint64_t steps,
                             const Vec& x0, RngStream& rng, std::size_t thin) {
  if (steps == 0) throw Error(ErrorCode::invalid_argument, "run_plain_langevin: steps must be at least 1");
  require_dim(x0, oracle.dim(), "run_plain_langevin");
  RunRecord rec;
  rec.dim = oracle.dim();
  rec.occupancy.assign(1, 0);
  rec.seed = rng.seed();
  Recorder recorder{rec};
  Vec x = x0;
  for (std::uint64_t s = 1; s <= steps; ++s) {
    try {
      x = langevin_step(oracle, beta, x, eta, rng);
    } catch (const Error& e) {
      throw Error(e.code(), std::string(e.what()) + " (langevin step " + std::to_string(s - 1) + ")");
    }
    if (thin > 0 && s % thin == 0) recorder.push(s, static_cast<double>(s) * eta, 0, x);
  }
  rec.langevin_steps = steps;
  rec.final_state = {0, x};
  rec.params = {{"beta", beta}, {"step_size", eta}, {"steps", steps}, {"thin", thin}};
  return rec;
}

double log_partition_ratio(const std::vector<Vec>& samples, const DensityOracle& oracle, double beta_lo,
                           double beta_hi) {
  if (samples.empty()) throw Error(ErrorCode::invalid_argument, "estimate_partition_ratio: no samples");
  if (beta_hi == beta_lo) return 0.0;
  Vec a(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t j = 0; j < samples.size(); ++j) {
    a[static_cast<Eigen::Index>(j)] = (beta_lo - beta_hi) * oracle.value(samples[j]);
  }
  const double m = a.maxCoeff();
  return m + std::log((a.array() - m).exp().sum()) - std::log(static_cast<double>(samples.size()));
}

double estimate_partition_ratio(const std::vector<Vec>& samples, const DensityOracle& oracle, double beta_lo,
                                double beta_hi) {
  return std::exp(log_partition_ratio(samples, oracle, beta_lo, beta_hi));
}

std::size_t samples_per_stage(std::size_t levels, double delta, double c_n) {
  const double L = static_cast<double>(levels);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(c_n * L * L * std::log(1.0 / delta))));
}

MainResult run_main(const DensityOracle& oracle, TemperatureLadder ladder, const RunParams& params, RngStream& rng,
                    const MainOptions& options) {
  if (!(options.delta > 0.0 && options.delta < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "run_main: delta must be in (0, 1)");
  }
  ladder.log_partition.assign(ladder.size(), 0.0);
  ladder.validate();
  const std::size_t L = ladder.size();
  const std::size_t n = options.samples_per_stage.value_or(
      samples_per_stage(L, options.delta, params.constants.sample_count));

  MainResult out;
  for (std::size_t levels = 1; levels <= L; ++levels) {
    const TemperatureLadder stage = ladder.prefix(levels);
    const bool last = levels == L;
    const std::size_t want = last ? options.final_samples : n;
    StageReport report;
    report.levels = levels;
    std::vector<Vec> samples;
    samples.reserve(want);
    for (std::size_t j = 0; j < want; ++j) {
      AcceptedSample s = sample_stlmc(oracle, stage, params, rng, options.max_runs_per_sample);
      report.runs += s.runs;
      report.rejected += s.runs - 1;
      out.langevin_steps += s.langevin_steps;
      samples.push_back(std::move(s.position));
    }
    report.samples = samples.size();
    if (report.runs > 0 &&
        static_cast<double>(report.rejected) / static_cast<double>(report.runs) > options.rejection_ceiling) {
      throw Error(ErrorCode::rejection_ceiling,
                  "run_main: stage with " + std::to_string(levels) + " levels rejected " +
                      std::to_string(report.rejected) + " of " + std::to_string(report.runs) + " runs");
    }
    if (last) {
      out.samples = std::move(samples);
    } else {
      report.log_ratio = log_partition_ratio(samples, oracle, ladder.betas[levels - 1], ladder.betas[levels]);
      ladder.log_partition[levels] = ladder.log_partition[levels - 1] + report.log_ratio;
    }
    out.stages.push_back(report);
  }
  out.ladder = std::move(ladder);
  return out;
}

nlohmann::json to_json(const StageReport& s) {
  return {{"levels", s.levels}, {"samples", s.samples}, {"runs", s.runs}, {"rejected", s.rejected},
          {"log_ratio", s.log_ratio}};
}

}  // namespace stlmc
