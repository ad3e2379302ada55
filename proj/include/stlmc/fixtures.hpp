#pragma once

#include "stlmc/oracle.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace stlmc {

/// Scale parameters a ladder builder needs for a fixture.
struct LadderInputs {
  double center_bound = 1.0;  // D
  double kappa = 1.0;
  double smoothness = 1.0;  // K
  double w_min = 1.0;
  bool isotropic = true;  // use the Gaussian schedule (sigma = 1/sqrt(kappa))
};

struct Fixture {
  std::string name;
  std::string description;
  OraclePtr oracle;
  /// Ground truth mixture when one exists (for perturbed fixtures, the
  /// unperturbed mixture).
  std::optional<MixtureTarget> target;
  LadderInputs ladder;
  std::uint64_t seed = 0;
  /// Extra descriptive values shown by list_fixtures (e.g. |u| for the
  /// lower-bound fixture).
  nlohmann::json info = nlohmann::json::object();

  Eigen::Index dim() const { return oracle->dim(); }
};

std::vector<std::string> builtin_fixture_names();
Fixture builtin_fixture(const std::string& name);

/// Parses a mixture fixture document. Field names follow
/// schemas/fixture.schema.json; unknown fields are rejected.
Fixture fixture_from_json(const nlohmann::json& doc, const std::string& name = "file");
Fixture load_fixture_file(const std::filesystem::path& path);
nlohmann::json mixture_to_json(const MixtureTarget& target, std::uint64_t seed);

/// d components at scale * e_i plus one at their centroid, uniform weights.
MixtureTarget simplex_centers_target(Eigen::Index d, double scale, double sigma);

}  // namespace stlmc
