#include "stlmc/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Simulated tempering Langevin Monte Carlo experiments"};
  std::string config_path, mode, out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  bool list = false;
  app.add_option("--config", config_path, "experiment config (JSON)");
  app.add_option("--mode", mode, "sample | verify-decomposition | verify-divergences | baseline-compare");
  app.add_option("--seed", seed, "override the config seed");
  app.add_option("--out", out, "output directory");
  app.add_option("--jobs", jobs, "worker threads for the verification suites");
  app.add_flag("--list-fixtures", list, "print the built-in fixtures and exit");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (list) {
    std::cout << stlmc::list_fixtures();
    return 0;
  }
  if (config_path.empty()) {
    std::cerr << "error: --config is required (or --list-fixtures)\n";
    return 2;
  }

  stlmc::ExperimentConfig cfg;
  try {
    cfg = stlmc::load_config(config_path);
    if (!mode.empty()) cfg.mode = stlmc::mode_from_string(mode);
    if (seed) cfg.seed = *seed;
    if (!out.empty()) cfg.output = out;
    if (jobs) cfg.jobs = std::max(1u, *jobs);
    cfg.validate();
  } catch (const stlmc::Error& e) {
    std::cerr << "schema error: " << e.what() << '\n';
    return 2;
  }

  try {
    const stlmc::ExperimentResult res = stlmc::run_experiment(cfg);
    if (res.summary.contains("ladder_table")) std::cout << res.summary.at("ladder_table").get<std::string>();
    std::cout << "artifacts: " << cfg.output.string() << '\n';
    if (!res.pass) {
      for (const auto& f : res.failures) std::cerr << "FAIL " << f << '\n';
      std::cerr << "report: " << res.report.string() << '\n';
      return 1;
    }
    std::cout << "all assertions passed\n";
    return 0;
  } catch (const stlmc::Error& e) {
    if (e.code() == stlmc::ErrorCode::schema) {
      std::cerr << "schema error: " << e.what() << '\n';
      return 2;
    }
    std::cerr << "error (" << stlmc::to_string(e.code()) << "): " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
