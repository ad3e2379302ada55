#include "stlmc/experiment.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace stlmc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path source_dir = STLMC_SOURCE_DIR;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("stlmc_test_" + name);
  fs::remove_all(p);
  return p;
}

json small_sample() {
  return {{"version", 1},
          {"mode", "sample"},
          {"fixture", "two-mode-symmetric"},
          {"seed", 3},
          {"run", {{"swap_rate", 5.0}, {"step_size", 0.02}, {"total_time", 10.0}}},
          {"sampling", {{"samples_per_stage", 10}, {"final_level_rows", 2000}, {"thin", 1}, {"chunk_time", 50.0}}}};
}

ErrorCode schema_code(const json& doc) {
  try {
    config_from_json(doc).validate();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::invalid_argument;
}

struct Cli {
  int status = -1;
  std::string out;
};

Cli run_cli(const std::string& args) {
  const char* exe = std::getenv("STLMC_CLI");
  REQUIRE(exe != nullptr);
  Cli r;
  FILE* pipe = popen((std::string(exe) + " " + args + " 2>&1").c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) r.out += buf;
  const int st = pclose(pipe);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

json files_of(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  json m;
  in >> m;
  return m.at("files");
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_NOTHROW(config_from_json(small_sample()).validate());
  auto doc = small_sample();
  doc.erase("seed");
  CHECK(schema_code(doc) == ErrorCode::schema);
  doc = small_sample();
  doc["sampling"]["thinn"] = 3;
  CHECK(schema_code(doc) == ErrorCode::schema);
  doc = small_sample();
  doc["extra"] = true;
  CHECK(schema_code(doc) == ErrorCode::schema);
  doc = small_sample();
  doc["mode"] = "explore";
  CHECK(schema_code(doc) == ErrorCode::schema);
  doc = small_sample();
  doc["fixture"] = "no-such-fixture";
  CHECK(schema_code(doc) == ErrorCode::schema);
  doc = small_sample();
  doc["version"] = 2;
  CHECK(schema_code(doc) == ErrorCode::schema);
  doc = small_sample();
  doc["betas"] = {0.5, 0.25, 1.0};
  CHECK(schema_code(doc) == ErrorCode::schema);
  doc = small_sample();
  doc.erase("fixture");
  CHECK(schema_code(doc) == ErrorCode::schema);
  doc = small_sample();
  doc["assertions"] = {{"baseline_minority_max", 0.01}};
  CHECK(schema_code(doc) == ErrorCode::schema);
  doc = small_sample();
  doc["run"]["step_size"] = "0.1";
  CHECK(schema_code(doc) == ErrorCode::schema);
}

TEST_CASE("config serialization round trip") {
  auto doc = small_sample();
  doc["betas"] = {0.1, 0.3, 1.0};
  doc["assertions"] = {{"mode_mass_range", {0.4, 0.6}}, {"tv_max", 0.1}};
  const ExperimentConfig c = config_from_json(doc);
  const ExperimentConfig d = config_from_json(to_json(c));
  CHECK(to_json(c) == to_json(d));
  CHECK(d.betas.value() == std::vector<double>{0.1, 0.3, 1.0});
  CHECK_FALSE(to_json(c).contains("output"));
  CHECK_FALSE(to_json(c).contains("jobs"));
}

TEST_CASE("shipped configs parse") {
  for (const auto& e : fs::directory_iterator(source_dir / "configs")) {
    if (e.path().extension() != ".json") continue;
    CAPTURE(e.path().string());
    CHECK_NOTHROW(load_config(e.path()).validate());
  }
}

TEST_CASE("sha256") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("artifact manifest") {
  const fs::path dir = scratch("manifest");
  ArtifactSet a;
  a.add("a.csv", "x,y\n1,2\n");
  a.add_json("b.json", json{{"k", 1}});
  CHECK_THROWS_AS(a.add("manifest.json", "{}"), Error);
  a.write(dir);
  std::string why;
  CHECK(verify_manifest(dir, &why));
  const json files = files_of(dir);
  CHECK(files.size() == 2);
  {
    std::ofstream out(dir / "a.csv", std::ios::app);
    out << "3,4\n";
  }
  CHECK_FALSE(verify_manifest(dir, &why));
  CHECK(why.find("a.csv") != std::string::npos);
  fs::remove(dir / "b.json");
  CHECK_FALSE(verify_manifest(dir));
  fs::remove_all(dir);
}

TEST_CASE("sample mode is deterministic") {
  auto cfg = config_from_json(small_sample());
  const fs::path da = scratch("det_a"), db = scratch("det_b");
  cfg.output = da;
  const auto a = run_experiment(cfg);
  cfg.output = db;
  cfg.jobs = 3;
  const auto b = run_experiment(cfg);
  CHECK(verify_manifest(da));
  CHECK(verify_manifest(db));
  CHECK(files_of(da) == files_of(db));
  CHECK(a.summary == b.summary);
  CHECK(fs::exists(da / "records.csv"));
  CHECK(fs::exists(da / "records.json"));
  CHECK(fs::exists(da / "config.json"));

  cfg.seed = 4;
  cfg.output = scratch("det_c");
  run_experiment(cfg);
  CHECK(files_of(cfg.output) != files_of(da));
  fs::remove_all(da);
  fs::remove_all(db);
  fs::remove_all(cfg.output);
}

TEST_CASE("records csv layout") {
  auto cfg = config_from_json(small_sample());
  cfg.output = scratch("layout");
  run_experiment(cfg);
  std::ifstream in(cfg.output / "records.csv");
  std::string header, row;
  std::getline(in, header);
  CHECK(header == "step,time,level,x1");
  std::size_t rows = 0;
  while (std::getline(in, row)) {
    if (row.empty()) continue;
    ++rows;
    CHECK(std::count(row.begin(), row.end(), ',') == 3);
  }
  CHECK(rows > 0);
  std::ifstream js(cfg.output / "records.json");
  json side;
  js >> side;
  CHECK(side.at("seed") == 3);
  CHECK(side.at("rows").get<std::size_t>() >= rows);
  fs::remove_all(cfg.output);
}

TEST_CASE("cli") {
  SUBCASE("list fixtures") {
    const Cli r = run_cli("--list-fixtures");
    CHECK(r.status == 0);
    for (const char* name : {"single-gaussian", "two-mode-symmetric", "adversarial"}) {
      CHECK(r.out.find(name) != std::string::npos);
    }
    CHECK(r.out.find("u_norm") != std::string::npos);
  }
  SUBCASE("schema errors exit 2") {
    const fs::path dir = scratch("cli_schema");
    fs::create_directories(dir);
    auto doc = small_sample();
    doc.erase("seed");
    std::ofstream(dir / "c.json") << doc.dump();
    const Cli r = run_cli("--config " + (dir / "c.json").string() + " --out " + (dir / "o").string());
    CHECK(r.status == 2);
    CHECK(r.out.find("seed") != std::string::npos);
    CHECK(run_cli("--mode sample").status == 2);
    CHECK(run_cli("--config " + (dir / "missing.json").string()).status == 2);
    fs::remove_all(dir);
  }
  SUBCASE("sample run with seed override") {
    const fs::path dir = scratch("cli_run");
    fs::create_directories(dir);
    auto doc = small_sample();
    doc.erase("seed");
    std::ofstream(dir / "c.json") << doc.dump();
    const Cli r =
        run_cli("--config " + (dir / "c.json").string() + " --seed 3 --out " + (dir / "o").string());
    CHECK(r.status == 0);
    CHECK(r.out.find("artifacts:") != std::string::npos);
    CHECK(verify_manifest(dir / "o"));
    fs::remove_all(dir);
  }
  SUBCASE("failing assertion exits 1 with a report") {
    const fs::path dir = scratch("cli_fail");
    fs::create_directories(dir);
    auto doc = small_sample();
    doc["assertions"] = {{"mode_mass_range", {0.99, 1.0}}};
    std::ofstream(dir / "c.json") << doc.dump();
    const Cli r = run_cli("--config " + (dir / "c.json").string() + " --out " + (dir / "o").string());
    CHECK(r.status == 1);
    CHECK(r.out.find("report:") != std::string::npos);
    fs::remove_all(dir);
  }
}
