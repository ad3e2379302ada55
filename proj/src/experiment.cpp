#include "stlmc/experiment.hpp"

#include "stlmc/diagnostics.hpp"
#include "stlmc/divergences.hpp"
#include "stlmc/suites.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace stlmc {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Strict accessor for one config object: every key must be consumed.
class Fields {
 public:
  Fields(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) fail("expected an object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return obj_.contains(key);
  }

  const json& at(const char* key) {
    if (!has(key)) fail(std::string("missing required field '") + key + "'");
    return obj_.at(key);
  }

  double number(const char* key, bool positive = true) {
    const json& v = at(key);
    if (!v.is_number()) fail(std::string(key) + ": expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x) || (positive && !(x > 0.0))) fail(std::string(key) + ": must be positive");
    return x;
  }

  std::size_t count(const char* key, bool allow_zero = false) {
    const json& v = at(key);
    if (!v.is_number_integer() || v.get<long long>() < (allow_zero ? 0 : 1)) {
      fail(std::string(key) + (allow_zero ? ": expected a non-negative integer" : ": expected a positive integer"));
    }
    return v.get<std::size_t>();
  }

  std::vector<double> numbers(const char* key) {
    const json& v = at(key);
    if (!v.is_array() || v.empty()) fail(std::string(key) + ": expected a non-empty array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) fail(std::string(key) + ": expected a non-empty array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::string text(const char* key) {
    const json& v = at(key);
    if (!v.is_string()) fail(std::string(key) + ": expected a string");
    return v.get<std::string>();
  }

  bool flag(const char* key) {
    const json& v = at(key);
    if (!v.is_boolean()) fail(std::string(key) + ": expected true or false");
    return v.get<bool>();
  }

  /// Call after reading; rejects every key that was not asked for.
  void done() const {
    for (const auto& [key, _] : obj_.items()) {
      if (!seen_.count(key)) fail("unknown field '" + key + "'");
    }
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorCode::schema, "config" + (where_.empty() ? std::string() : "." + where_) + ": " + msg);
  }

 private:
  const json& obj_;
  std::string where_;
  std::set<std::string> seen_;
};

std::string g17(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string trajectory_csv(const RunRecord& rec, std::size_t stride) {
  std::ostringstream os;
  os << "step,time,level";
  for (Eigen::Index k = 0; k < rec.dim; ++k) os << ",x" << (k + 1);
  os << '\n';
  stride = std::max<std::size_t>(1, stride);
  for (std::size_t r = 0; r < rec.rows(); r += stride) {
    os << rec.steps[r] << ',' << g17(rec.times[r]) << ',' << rec.levels[r];
    const auto x = rec.position(r);
    for (Eigen::Index k = 0; k < rec.dim; ++k) os << ',' << g17(x[k]);
    os << '\n';
  }
  return os.str();
}

// Exact log partition functions at every beta, or nothing when the oracle is
// not a plain mixture or the dimension is too high for quadrature.
std::optional<std::vector<double>> exact_log_partitions(const Fixture& fx, const std::vector<double>& betas) {
  const auto* mix = dynamic_cast<const MixtureOracle*>(fx.oracle.get());
  if (!mix) return std::nullopt;
  const MixtureTarget& t = mix->target();
  std::vector<double> out;
  const bool closed = t.base().kind() == BaseKind::isotropic_gaussian && t.components() == 1;
  if (!closed && t.dim() > 2) return std::nullopt;
  for (double b : betas) {
    if (closed || (b == 1.0 && t.base().kind() == BaseKind::isotropic_gaussian)) {
      out.push_back(gaussian_log_partition(t, b));
    } else {
      out.push_back(log_partition_quadrature(t, b, grid_for_target(t, b, t.dim() == 1 ? 2048 : 256)));
    }
  }
  return out;
}

RunRecord concatenate(std::vector<RunRecord>& parts) {
  RunRecord out;
  out.dim = parts.front().dim;
  out.occupancy.assign(parts.front().occupancy.size(), 0);
  out.swap_attempts.assign(parts.front().swap_attempts.size(), 0);
  out.swap_accepts.assign(parts.front().swap_accepts.size(), 0);
  out.seed = parts.front().seed;
  out.params = parts.front().params;
  double t0 = 0.0;
  for (auto& p : parts) {
    for (std::size_t r = 0; r < p.rows(); ++r) {
      out.steps.push_back(p.steps[r] + out.langevin_steps);
      out.times.push_back(p.times[r] + t0);
    }
    out.levels.insert(out.levels.end(), p.levels.begin(), p.levels.end());
    out.positions.insert(out.positions.end(), p.positions.begin(), p.positions.end());
    for (std::size_t i = 0; i < out.occupancy.size(); ++i) out.occupancy[i] += p.occupancy[i];
    for (std::size_t i = 0; i < out.swap_attempts.size(); ++i) {
      out.swap_attempts[i] += p.swap_attempts[i];
      out.swap_accepts[i] += p.swap_accepts[i];
    }
    out.langevin_steps += p.langevin_steps;
    out.swap_events += p.swap_events;
    out.final_state = p.final_state;
    t0 += p.params.at("run").at("total_time").get<double>();
  }
  return out;
}

std::vector<double> to_vector(const Vec& v) { return {v.data(), v.data() + v.size()}; }

std::string ladder_table(const TemperatureLadder& l) {
  std::ostringstream os;
  os << "level  beta          r             ln Z^\n";
  for (std::size_t i = 0; i < l.size(); ++i) {
    os << std::left << std::setw(7) << i << std::setw(14) << std::setprecision(6) << l.betas[i] << std::setw(14)
       << l.rel_probs[i] << l.log_partition[i] << '\n';
  }
  return os.str();
}

std::string iso_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

}  // namespace

const char* to_string(Mode m) {
  switch (m) {
    case Mode::sample: return "sample";
    case Mode::verify_decomposition: return "verify-decomposition";
    case Mode::verify_divergences: return "verify-divergences";
    case Mode::baseline_compare: return "baseline-compare";
  }
  return "?";
}

Mode mode_from_string(const std::string& s) {
  for (Mode m : {Mode::sample, Mode::verify_decomposition, Mode::verify_divergences, Mode::baseline_compare}) {
    if (s == to_string(m)) return m;
  }
  throw Error(ErrorCode::schema,
              "config.mode: unknown mode '" + s +
                  "' (expected sample, verify-decomposition, verify-divergences or baseline-compare)");
}

void ExperimentConfig::validate() const {
  if (!seed) throw Error(ErrorCode::schema, "config: missing required field 'seed'");
  const bool sampling_mode = mode == Mode::sample || mode == Mode::baseline_compare;
  if (sampling_mode && fixture.empty() && fixture_file.empty()) {
    throw Error(ErrorCode::schema, "config: mode '" + std::string(to_string(mode)) + "' needs a 'fixture'");
  }
  if (!sampling_mode && (assertions.mode_mass_range || assertions.tv_max || assertions.baseline_minority_max ||
                         assertions.partition_interval)) {
    throw Error(ErrorCode::schema, "config.assertions: sampling assertions need mode sample or baseline-compare");
  }
  if (assertions.baseline_minority_max && mode != Mode::baseline_compare) {
    throw Error(ErrorCode::schema, "config.assertions.baseline_minority_max: needs mode baseline-compare");
  }
  if (baseline_start && mode != Mode::baseline_compare) {
    throw Error(ErrorCode::schema, "config.baseline: only used by mode baseline-compare");
  }
  if (!(sampling.delta > 0.0 && sampling.delta < 1.0)) {
    throw Error(ErrorCode::schema, "config.sampling.delta: must be in (0, 1)");
  }
  if (!(sampling.rejection_ceiling > 0.0 && sampling.rejection_ceiling <= 1.0)) {
    throw Error(ErrorCode::schema, "config.sampling.rejection_ceiling: must be in (0, 1]");
  }
  if (sampling.thin == 0) throw Error(ErrorCode::schema, "config.sampling.thin: must be at least 1");
  if (betas) {
    for (std::size_t i = 0; i < betas->size(); ++i) {
      const double b = (*betas)[i];
      if (!(b > 0.0 && b <= 1.0) || (i > 0 && !(b > (*betas)[i - 1]))) {
        throw Error(ErrorCode::schema, "config.betas: must increase strictly within (0, 1]");
      }
    }
    if (betas->back() != 1.0) throw Error(ErrorCode::schema, "config.betas: last value must be 1");
  }
  if (assertions.mode_mass_range && !((*assertions.mode_mass_range)[0] <= (*assertions.mode_mass_range)[1])) {
    throw Error(ErrorCode::schema, "config.assertions.mode_mass_range: expected [low, high] with low <= high");
  }
}

ExperimentConfig config_from_json(const json& doc, const fs::path& base_dir) {
  ExperimentConfig c;
  Fields top(doc, "");
  if (!top.has("version")) top.fail("missing required field 'version'");
  if (!top.at("version").is_number_integer() || top.at("version").get<int>() != config_version) {
    top.fail("version: expected " + std::to_string(config_version));
  }
  c.mode = mode_from_string(top.text("mode"));
  if (top.has("seed")) {
    const json& s = top.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
      top.fail("seed: expected a non-negative integer");
    }
    c.seed = s.get<std::uint64_t>();
  }
  if (top.has("fixture")) {
    const json& f = top.at("fixture");
    if (f.is_string()) {
      c.fixture = f.get<std::string>();
      const auto names = builtin_fixture_names();
      if (std::find(names.begin(), names.end(), c.fixture) == names.end()) {
        top.fail("fixture: unknown built-in fixture '" + c.fixture + "'");
      }
    } else {
      Fields ff(f, "fixture");
      fs::path p = ff.text("file");
      ff.done();
      c.fixture_file = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    }
  }
  if (top.has("output")) c.output = top.text("output");
  if (top.has("jobs")) c.jobs = static_cast<unsigned>(top.count("jobs"));
  if (top.has("accuracy")) c.accuracy = top.number("accuracy");
  if (top.has("constants")) c.constants = schedule_constants_from_json(top.at("constants"));
  if (top.has("betas")) c.betas = top.numbers("betas");
  if (top.has("run")) {
    Fields r(top.at("run"), "run");
    if (r.has("swap_rate")) c.swap_rate = r.number("swap_rate");
    if (r.has("step_size")) c.step_size = r.number("step_size");
    if (r.has("total_time")) c.total_time = r.number("total_time");
    if (r.has("init_std")) c.init_std = r.number("init_std");
    r.done();
  }
  if (top.has("sampling")) {
    Fields s(top.at("sampling"), "sampling");
    if (s.has("delta")) c.sampling.delta = s.number("delta");
    if (s.has("samples_per_stage")) c.sampling.samples_per_stage = s.count("samples_per_stage");
    if (s.has("max_runs_per_sample")) c.sampling.max_runs_per_sample = s.count("max_runs_per_sample");
    if (s.has("rejection_ceiling")) c.sampling.rejection_ceiling = s.number("rejection_ceiling");
    if (s.has("final_level_rows")) c.sampling.final_level_rows = s.count("final_level_rows");
    if (s.has("thin")) c.sampling.thin = s.count("thin");
    if (s.has("chunk_time")) c.sampling.chunk_time = s.number("chunk_time");
    if (s.has("output_stride")) c.sampling.output_stride = s.count("output_stride");
    s.done();
  }
  if (top.has("baseline")) {
    Fields b(top.at("baseline"), "baseline");
    if (b.has("start")) c.baseline_start = b.numbers("start");
    if (b.has("thin")) c.baseline_thin = b.count("thin");
    b.done();
  }
  if (top.has("suite")) {
    Fields s(top.at("suite"), "suite");
    SuiteConfig& q = c.suite;
    if (s.has("simple_instances")) q.simple_instances = s.count("simple_instances");
    if (s.has("tempering_instances")) q.tempering_instances = s.count("tempering_instances");
    if (s.has("K")) q.K = s.numbers("K");
    if (s.has("path_chains")) q.path_chains = s.count("path_chains");
    if (s.has("path_functions")) q.path_functions = s.count("path_functions");
    if (s.has("chi2_pairs")) q.chi2_pairs = s.count("chi2_pairs");
    if (s.has("scaling_mixtures")) q.scaling_mixtures = s.count("scaling_mixtures");
    if (s.has("scaling_probes")) q.scaling_probes = s.count("scaling_probes");
    if (s.has("inequality_instances")) q.inequality_instances = s.count("inequality_instances");
    s.done();
  }
  if (top.has("assertions")) {
    Fields a(top.at("assertions"), "assertions");
    if (a.has("mode_mass_range")) {
      auto r = a.numbers("mode_mass_range");
      if (r.size() != 2) a.fail("mode_mass_range: expected [low, high]");
      c.assertions.mode_mass_range = std::array<double, 2>{r[0], r[1]};
    }
    if (a.has("tv_max")) c.assertions.tv_max = a.number("tv_max");
    if (a.has("baseline_minority_max")) c.assertions.baseline_minority_max = a.number("baseline_minority_max", false);
    if (a.has("partition_interval")) c.assertions.partition_interval = a.flag("partition_interval");
    a.done();
  }
  top.done();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::schema, "cannot open config " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::schema, "config " + path.string() + ": " + e.what());
  }
  return config_from_json(doc, path.parent_path());
}

json to_json(const ExperimentConfig& c) {
  json doc = {{"version", config_version}, {"mode", to_string(c.mode)}};
  if (c.seed) doc["seed"] = *c.seed;
  if (!c.fixture.empty()) doc["fixture"] = c.fixture;
  // Only the file name: the absolute location must not change the hashes.
  if (!c.fixture_file.empty()) doc["fixture"] = {{"file", c.fixture_file.filename().string()}};
  doc["accuracy"] = c.accuracy;
  doc["constants"] = to_json(c.constants);
  if (c.betas) doc["betas"] = *c.betas;
  json run = json::object();
  if (c.swap_rate) run["swap_rate"] = *c.swap_rate;
  if (c.step_size) run["step_size"] = *c.step_size;
  if (c.total_time) run["total_time"] = *c.total_time;
  if (c.init_std) run["init_std"] = *c.init_std;
  doc["run"] = run;
  const SamplingConfig& s = c.sampling;
  doc["sampling"] = {{"delta", s.delta},
                     {"max_runs_per_sample", s.max_runs_per_sample},
                     {"rejection_ceiling", s.rejection_ceiling},
                     {"final_level_rows", s.final_level_rows},
                     {"thin", s.thin},
                     {"output_stride", s.output_stride}};
  if (s.samples_per_stage) doc["sampling"]["samples_per_stage"] = *s.samples_per_stage;
  if (s.chunk_time) doc["sampling"]["chunk_time"] = *s.chunk_time;
  doc["baseline"] = {{"thin", c.baseline_thin}};
  if (c.baseline_start) doc["baseline"]["start"] = *c.baseline_start;
  const SuiteConfig& q = c.suite;
  doc["suite"] = {{"simple_instances", q.simple_instances},   {"tempering_instances", q.tempering_instances},
                  {"K", q.K},
                  {"path_chains", q.path_chains},             {"path_functions", q.path_functions},
                  {"chi2_pairs", q.chi2_pairs},               {"scaling_mixtures", q.scaling_mixtures},
                  {"scaling_probes", q.scaling_probes},       {"inequality_instances", q.inequality_instances}};
  json a = json::object();
  if (c.assertions.mode_mass_range) a["mode_mass_range"] = *c.assertions.mode_mass_range;
  if (c.assertions.tv_max) a["tv_max"] = *c.assertions.tv_max;
  if (c.assertions.baseline_minority_max) a["baseline_minority_max"] = *c.assertions.baseline_minority_max;
  if (c.assertions.partition_interval) a["partition_interval"] = true;
  doc["assertions"] = a;
  return doc;
}

// ---------------------------------------------------------------------------
// Artifacts

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::invalid_argument, "sha256: digest failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

void ArtifactSet::add(const std::string& name, std::string content) {
  if (name == "manifest.json") throw Error(ErrorCode::invalid_argument, "artifact name is reserved: " + name);
  files_[name] = std::move(content);
}

void ArtifactSet::add_json(const std::string& name, const json& doc) { add(name, doc.dump(2) + "\n"); }

void ArtifactSet::write(const fs::path& dir) const {
  fs::create_directories(dir);
  json entries = json::array();
  for (const auto& [name, content] : files_) {
    const fs::path p = dir / name;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << content;
    if (!out) throw Error(ErrorCode::invalid_argument, "cannot write " + p.string());
    entries.push_back({{"path", name}, {"bytes", content.size()}, {"sha256", sha256_hex(content)}});
  }
  json manifest = {{"version", 1}, {"generated_at", iso_now()}, {"files", entries}};
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  out << manifest.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::invalid_argument, "cannot write " + (dir / "manifest.json").string());
}

bool verify_manifest(const fs::path& dir, std::string* problem) {
  auto fail = [&](const std::string& msg) {
    if (problem) *problem = msg;
    return false;
  };
  std::ifstream in(dir / "manifest.json");
  if (!in) return fail("manifest.json missing");
  json m;
  try {
    in >> m;
    for (const auto& e : m.at("files")) {
      const std::string name = e.at("path").get<std::string>();
      std::ifstream f(dir / name, std::ios::binary);
      if (!f) return fail(name + ": missing");
      std::ostringstream buf;
      buf << f.rdbuf();
      const std::string content = buf.str();
      if (content.size() != e.at("bytes").get<std::size_t>()) return fail(name + ": size differs");
      if (sha256_hex(content) != e.at("sha256").get<std::string>()) return fail(name + ": hash differs");
    }
  } catch (const json::exception& e) {
    return fail(std::string("manifest.json: ") + e.what());
  }
  return true;
}

// ---------------------------------------------------------------------------
// Sampling

Fixture resolve_fixture(const ExperimentConfig& cfg) {
  if (!cfg.fixture_file.empty()) return load_fixture_file(cfg.fixture_file);
  return builtin_fixture(cfg.fixture);
}

SamplingRun run_sampling(const ExperimentConfig& cfg, const Fixture& fx) {
  SamplingRun run;
  const LadderInputs& in = fx.ladder;
  run.formula = in.isotropic
                    ? build_ladder_gaussian(fx.dim(), in.center_bound, 1.0 / std::sqrt(in.kappa), in.w_min,
                                            cfg.accuracy, cfg.constants)
                    : build_ladder_logconcave(fx.dim(), in.center_bound, in.kappa, in.smoothness, in.w_min,
                                              cfg.accuracy, cfg.constants);
  TemperatureLadder ladder = run.formula.ladder;
  if (cfg.betas) {
    ladder.betas = *cfg.betas;
    const std::size_t L = ladder.betas.size();
    ladder.rel_probs.assign(L, 1.0 / static_cast<double>(L));
    ladder.log_partition.assign(L, 0.0);
    ladder.ratio_bound = 1.0;
    for (std::size_t i = 1; i < L; ++i) ladder.ratio_bound = std::max(ladder.ratio_bound, ladder.betas[i] / ladder.betas[i - 1]);
  }
  run.params = run.formula.params;
  if (cfg.swap_rate) run.params.swap_rate = *cfg.swap_rate;
  if (cfg.step_size) run.params.step_size = *cfg.step_size;
  if (cfg.total_time) run.params.total_time = *cfg.total_time;
  if (cfg.init_std) run.params.init_std = *cfg.init_std;
  run.params.validate();

  const RngStream root(*cfg.seed);
  MainOptions mo;
  mo.delta = cfg.sampling.delta;
  mo.max_runs_per_sample = cfg.sampling.max_runs_per_sample;
  mo.rejection_ceiling = cfg.sampling.rejection_ceiling;
  mo.samples_per_stage = cfg.sampling.samples_per_stage;
  RngStream main_rng = root.child(1);
  run.main = run_main(*fx.oracle, ladder, run.params, main_rng, mo);
  const TemperatureLadder& est = run.main.ladder;
  const std::size_t L = est.size();
  const auto top = static_cast<std::uint32_t>(L - 1);

  // Production: continue the chain from the accepted sample on the target level
  // in chunks until enough target-level rows are recorded.
  RunParams chunk = run.params;
  chunk.total_time = cfg.sampling.chunk_time.value_or(run.params.total_time);
  StlmcOptions so;
  so.thin = cfg.sampling.thin;
  so.initial_position = run.main.samples.front();
  so.initial_level = L - 1;
  std::vector<RunRecord> parts;
  std::size_t top_rows = 0;
  const RngStream prod_root = root.child(2);
  while (top_rows < cfg.sampling.final_level_rows) {
    RngStream rng = prod_root.child(parts.size());
    parts.push_back(run_stlmc(*fx.oracle, est, chunk, rng, so));
    top_rows += parts.back().occupancy[top];
    so.initial_position = parts.back().final_state.position;
    so.initial_level = parts.back().final_state.level;
  }
  const std::size_t chunks = parts.size();
  run.production = concatenate(parts);
  parts.clear();
  run.final_samples = run.production.positions_at(top);

  json m;
  m["fixture"] = fx.name;
  m["levels"] = L;
  m["run"] = to_json(run.params);
  m["formula_run"] = to_json(run.formula.params);
  json stages = json::array();
  for (const auto& s : run.main.stages) stages.push_back(to_json(s));
  m["estimation"] = {{"stages", stages}, {"langevin_steps", run.main.langevin_steps},
                     {"log_partition", est.log_partition}};
  m["production"] = run_summary(run.production);
  m["production"]["chunks"] = chunks;
  m["production"]["chunk_time"] = chunk.total_time;
  m["production"]["target_level_rows"] = run.final_samples.size();
  m["gradient_budget"] = run.production.langevin_steps;

  auto fail = [&](const std::string& msg) {
    run.pass = false;
    run.failures.push_back(msg);
  };
  json assertions = json::array();
  auto record = [&](const std::string& name, bool ok, json value, json limit) {
    assertions.push_back({{"assertion", name}, {"value", value}, {"limit", limit}, {"pass", ok}});
    if (!ok) fail(name + ": value " + value.dump() + " outside " + limit.dump());
  };

  // Target-level statistics.
  if (fx.target) {
    const MixtureTarget& t = *fx.target;
    const Vec masses = mode_masses(run.final_samples, t);
    m["mode_masses"] = to_vector(masses);
    m["mode_mass_standard_error"] = json::array();
    if (cfg.assertions.mode_mass_range) {
      const auto [lo, hi] = *cfg.assertions.mode_mass_range;
      record("mode_mass_range", masses.minCoeff() >= lo && masses.maxCoeff() <= hi, to_vector(masses),
             std::vector<double>{lo, hi});
    }
    if (fx.dim() <= 2 && run.final_samples.size() >= 1000) {
      const TvEstimate tv = empirical_tv(run.final_samples, t);
      m["tv"] = tv.tv;
      if (!dynamic_cast<const MixtureOracle*>(fx.oracle.get())) {
        m["tv_note"] = "against the unperturbed mixture";
      }
      if (cfg.assertions.tv_max) record("tv_max", tv.tv < *cfg.assertions.tv_max, tv.tv, *cfg.assertions.tv_max);
    } else if (cfg.assertions.tv_max) {
      fail("tv_max: total variation needs d <= 2 and at least 1000 target-level rows");
    }
  } else if (cfg.assertions.mode_mass_range || cfg.assertions.tv_max) {
    fail("mode_mass_range/tv_max: fixture has no mixture ground truth");
  }

  std::vector<double> x1;
  x1.reserve(run.final_samples.size());
  for (const Vec& x : run.final_samples) x1.push_back(x[0]);
  if (x1.size() >= 20) {
    const AutocorrEstimate ac = integrated_autocorr(x1, std::min<std::size_t>(2000, x1.size() / 10));
    m["x1_autocorrelation"] = {{"tau", ac.tau}, {"ess", ac.ess}, {"lags_used", ac.lags_used},
                               {"degenerate", ac.degenerate}};
    if (fx.target) {
      // Binomial error inflated by the autocorrelation time of x1.
      const Vec masses = mode_masses(run.final_samples, *fx.target);
      for (Eigen::Index i = 0; i < masses.size(); ++i) {
        m["mode_mass_standard_error"].push_back(std::sqrt(masses[i] * (1.0 - masses[i]) / ac.ess));
      }
    }
  }

  const auto exact = exact_log_partitions(fx, est.betas);
  if (exact) {
    const PartitionCheck pc = validate_partition_estimates(est, *exact);
    m["partition_check"] = {{"exact_log_partition", *exact}, {"within", pc.within},
                            {"worst_ratio", pc.worst_ratio}, {"worst_level", pc.worst_level}, {"pass", pc.all()}};
    if (cfg.assertions.partition_interval) {
      record("partition_interval", pc.all(), pc.worst_ratio,
             std::vector<double>{std::pow(1.0 - 1.0 / static_cast<double>(L), static_cast<double>(pc.worst_level)),
                                 std::pow(1.0 + 1.0 / static_cast<double>(L), static_cast<double>(pc.worst_level))});
    }
  } else if (cfg.assertions.partition_interval) {
    fail("partition_interval: no exact partition functions for this fixture");
  }

  if (cfg.mode == Mode::baseline_compare) {
    Vec x0;
    if (cfg.baseline_start) {
      x0 = Eigen::Map<const Vec>(cfg.baseline_start->data(), static_cast<Eigen::Index>(cfg.baseline_start->size()));
      require_dim(x0, fx.dim(), "baseline.start");
    } else if (fx.target) {
      Eigen::Index best = 0;
      const Vec& w = fx.target->weights();
      for (Eigen::Index i = 1; i < w.size(); ++i) {
        if (w[i] >= w[best]) best = i;
      }
      x0 = fx.target->center(best);
    } else {
      x0 = Vec::Zero(fx.dim());
    }
    RngStream rng = root.child(3);
    run.baseline = run_plain_langevin(*fx.oracle, 1.0, run.params.step_size, run.production.langevin_steps, x0,
                                      rng, cfg.baseline_thin);
    json b = {{"start", to_vector(x0)}, {"steps", run.baseline->langevin_steps},
              {"rows", run.baseline->rows()}, {"thin", cfg.baseline_thin}};
    if (fx.target) {
      const std::vector<Vec> xs = run.baseline->positions_at(0);
      const Vec masses = mode_masses(xs, *fx.target);
      b["mode_masses"] = to_vector(masses);
      b["minority_mass"] = masses.minCoeff();
      if (fx.dim() <= 2 && xs.size() >= 1000) b["tv"] = empirical_tv(xs, *fx.target).tv;
      if (cfg.assertions.baseline_minority_max) {
        record("baseline_minority_max", masses.minCoeff() <= *cfg.assertions.baseline_minority_max,
               masses.minCoeff(), *cfg.assertions.baseline_minority_max);
      }
    } else if (cfg.assertions.baseline_minority_max) {
      fail("baseline_minority_max: fixture has no mixture ground truth");
    }
    m["baseline"] = b;
  }
  m["assertions"] = assertions;
  m["pass"] = run.pass;
  run.metrics = std::move(m);
  return run;
}

void sampling_artifacts(const ExperimentConfig& cfg, const Fixture& fx, const SamplingRun& run, ArtifactSet& out) {
  const TemperatureLadder& est = run.main.ladder;
  out.add_json("ladder.json", {{"ladder", to_json(est)},
                               {"formula_ladder", to_json(run.formula.ladder)},
                               {"run", to_json(run.params)},
                               {"formula_run", to_json(run.formula.params)}});
  out.add("records.csv", trajectory_csv(run.production, cfg.sampling.output_stride));
  json sidecar = run_summary(run.production);
  sidecar["seed"] = *cfg.seed;
  sidecar["fixture"] = fx.name;
  sidecar["ladder"] = to_json(est);
  sidecar["run"] = to_json(run.params);
  sidecar["thin"] = cfg.sampling.thin;
  sidecar["output_stride"] = cfg.sampling.output_stride;
  sidecar["rows"] = run.production.rows();
  sidecar["swap_attempts"] = run.production.swap_attempts;
  sidecar["swap_accepts"] = run.production.swap_accepts;
  sidecar["occupancy_counts"] = run.production.occupancy;
  sidecar["final_state"] = {{"level", run.production.final_state.level},
                            {"position", to_vector(run.production.final_state.position)}};
  out.add_json("records.json", sidecar);
  out.add_json("metrics.json", run.metrics);

  // Histogram against the exact masses.
  if (fx.target && fx.dim() <= 2 && run.final_samples.size() >= 1000) {
    const TvEstimate tv = empirical_tv(run.final_samples, *fx.target);
    std::ostringstream os;
    os << (fx.dim() == 1 ? "bin,center" : "bin,center_x1,center_x2") << ",empirical,exact\n";
    const HistogramEstimate& h = tv.histogram;
    for (std::size_t b = 0; b < h.size(); ++b) {
      os << b;
      if (b + 1 == h.size()) {
        os << (fx.dim() == 1 ? ",overflow" : ",overflow,overflow");
      } else {
        const Vec c = h.center(b);
        for (Eigen::Index k = 0; k < c.size(); ++k) os << ',' << g17(c[k]);
      }
      os << ',' << g17(h.masses[b]) << ',' << g17(tv.exact[b]) << '\n';
    }
    out.add("plot_histogram.csv", os.str());
  }

  // Level trace and cumulative occupancy, about a thousand rows each.
  const RunRecord& rec = run.production;
  const std::size_t L = est.size();
  const std::size_t stride = std::max<std::size_t>(1, rec.rows() / 1000);
  std::ostringstream levels, occ;
  levels << "step,time,level\n";
  occ << "step,time";
  for (std::size_t i = 0; i < L; ++i) occ << ",level_" << i;
  occ << '\n';
  std::vector<std::uint64_t> counts(L, 0);
  for (std::size_t r = 0; r < rec.rows(); ++r) {
    ++counts[rec.levels[r]];
    if (r % stride == 0 || r + 1 == rec.rows()) {
      levels << rec.steps[r] << ',' << g17(rec.times[r]) << ',' << rec.levels[r] << '\n';
      occ << rec.steps[r] << ',' << g17(rec.times[r]);
      for (auto c : counts) occ << ',' << g17(static_cast<double>(c) / static_cast<double>(r + 1));
      occ << '\n';
    }
  }
  out.add("plot_levels.csv", levels.str());
  out.add("plot_occupancy.csv", occ.str());
  if (run.baseline) out.add("baseline_records.csv", trajectory_csv(*run.baseline, cfg.sampling.output_stride));
}

// ---------------------------------------------------------------------------

namespace {

void add_suite(ArtifactSet& art, ExperimentResult& res, json& suites, const SuiteOutcome& s) {
  art.add_json(s.name + ".json", s.report);
  if (!s.csv.empty()) art.add(s.name + ".csv", s.csv);
  suites.push_back({{"suite", s.name}, {"pass", s.pass}, {"report", s.name + ".json"}});
  if (!s.pass) {
    res.pass = false;
    res.failures.push_back(s.name + " failed");
    if (res.report.empty()) res.report = s.name + ".json";
  }
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult res;
  ArtifactSet art;
  art.add_json("config.json", to_json(cfg));
  json summary = {{"mode", to_string(cfg.mode)}, {"seed", *cfg.seed}};
  const std::uint64_t seed = *cfg.seed;
  const SuiteConfig& q = cfg.suite;

  switch (cfg.mode) {
    case Mode::sample:
    case Mode::baseline_compare: {
      const Fixture fx = resolve_fixture(cfg);
      if (!cfg.fixture_file.empty()) art.add_json("fixture.json", mixture_to_json(*fx.target, fx.seed));
      const SamplingRun run = run_sampling(cfg, fx);
      sampling_artifacts(cfg, fx, run, art);
      res.pass = run.pass;
      res.failures = run.failures;
      if (!run.pass) res.report = "metrics.json";
      summary["fixture"] = fx.name;
      summary["ladder_table"] = ladder_table(run.main.ladder);
      for (const char* key : {"mode_masses", "tv", "gradient_budget", "assertions"}) {
        if (run.metrics.contains(key)) summary[key] = run.metrics.at(key);
      }
      if (run.metrics.contains("baseline")) summary["baseline"] = run.metrics.at("baseline");
      break;
    }
    case Mode::verify_decomposition: {
      json suites = json::array();
      add_suite(art, res, suites, simple_decomposition_suite(seed, q.simple_instances, cfg.jobs));
      add_suite(art, res, suites, tempering_decomposition_suite(seed + 1, q.tempering_instances, q.K, cfg.jobs));
      add_suite(art, res, suites, canonical_path_suite(seed + 2, q.path_chains, q.path_functions));
      summary["suites"] = suites;
      break;
    }
    case Mode::verify_divergences: {
      json suites = json::array();
      add_suite(art, res, suites, chi2_suite(seed, q.chi2_pairs));
      add_suite(art, res, suites, temp_scaling_suite(seed + 1, q.scaling_mixtures, q.scaling_probes));
      add_suite(art, res, suites, inequality_suite(seed + 2, q.inequality_instances));
      add_suite(art, res, suites, partition_ratio_suite());
      add_suite(art, res, suites, adversarial_suite(seed + 3));
      summary["suites"] = suites;
      break;
    }
  }
  summary["pass"] = res.pass;
  summary["failures"] = res.failures;
  art.add_json("summary.json", summary);
  art.write(cfg.output);
  if (!res.report.empty()) res.report = cfg.output / res.report;
  res.summary = std::move(summary);
  return res;
}

std::string list_fixtures() {
  std::ostringstream os;
  os << std::left << std::setw(26) << "name" << std::setw(5) << "dim" << std::setw(4) << "m" << std::setw(10)
     << "D/sigma"
     << "description\n";
  for (const auto& name : builtin_fixture_names()) {
    const Fixture f = builtin_fixture(name);
    const long m = f.target ? static_cast<long>(f.target->components()) : 2;
    const double sigma = 1.0 / std::sqrt(f.ladder.kappa);
    os << std::setw(26) << name << std::setw(5) << f.dim() << std::setw(4) << m << std::setw(10)
       << std::setprecision(4) << f.ladder.center_bound / sigma << f.description;
    for (const auto& [k, v] : f.info.items()) os << "; " << k << " = " << (v.is_string() ? v.get<std::string>() : v.dump());
    os << '\n';
  }
  return os.str();
}

}  // namespace stlmc
