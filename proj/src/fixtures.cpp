#include "stlmc/fixtures.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace stlmc {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorCode::schema, where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw Error(ErrorCode::schema, where + ": unknown field '" + key + "'");
  }
}

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) {
    throw Error(ErrorCode::schema, where + ": missing required field '" + key + "'");
  }
  return obj.at(key);
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) throw Error(ErrorCode::schema, where + ": expected a number");
  return v.get<double>();
}

LadderInputs ladder_inputs_for(const MixtureTarget& t) {
  LadderInputs in;
  const double scale = t.base().scale();
  in.center_bound = std::max(t.center_bound(), scale);
  in.kappa = t.base().kappa();
  in.smoothness = t.base().smoothness();
  in.w_min = t.w_min();
  in.isotropic = t.base().kind() == BaseKind::isotropic_gaussian;
  return in;
}

Fixture mixture_fixture(std::string name, std::string description, MixtureTarget target,
                        std::uint64_t seed) {
  Fixture f;
  f.name = std::move(name);
  f.description = std::move(description);
  f.ladder = ladder_inputs_for(target);
  f.oracle = std::make_shared<MixtureOracle>(target);
  f.target = std::move(target);
  f.seed = seed;
  return f;
}

MixtureTarget two_mode(double a, double w1) {
  Mat c(1, 2);
  c << -a, a;
  return MixtureTarget(Vec{{w1, 1.0 - w1}}, c, BaseFunction::isotropic_gaussian(1.0));
}

}  // namespace

MixtureTarget simplex_centers_target(Eigen::Index d, double scale, double sigma) {
  Mat c = Mat::Zero(d, d + 1);
  for (Eigen::Index i = 0; i < d; ++i) c(i, i) = scale;
  c.col(d) = Vec::Constant(d, scale / static_cast<double>(d));
  return MixtureTarget(Vec::Constant(d + 1, 1.0 / static_cast<double>(d + 1)), c,
                       BaseFunction::isotropic_gaussian(sigma));
}

std::vector<std::string> builtin_fixture_names() {
  return {"single-gaussian",   "two-mode-symmetric",        "two-mode-asymmetric",
          "simplex-centers",   "adversarial-two-variance",  "perturbed-mixture"};
}

Fixture builtin_fixture(const std::string& name) {
  if (name == "single-gaussian") {
    Mat c(1, 1);
    c << 3.0;
    return mixture_fixture(name, "N(3, 1) in d=1; closed-form partition functions",
                           MixtureTarget(Vec::Ones(1), c, BaseFunction::isotropic_gaussian(1.0)), 11);
  }
  if (name == "two-mode-symmetric") {
    return mixture_fixture(name, "1D mixture of N(-5,1) and N(5,1), equal weights", two_mode(5.0, 0.5),
                           12);
  }
  if (name == "two-mode-asymmetric") {
    return mixture_fixture(name, "1D mixture of N(-5,1) and N(5,1), weights 0.3/0.7",
                           two_mode(5.0, 0.3), 13);
  }
  if (name == "simplex-centers") {
    return mixture_fixture(
        name, "d=3: unit-variance modes on the corners of a simplex plus one at its centroid",
        simplex_centers_target(3, 4.0, 1.0), 14);
  }
  if (name == "adversarial-two-variance") {
    RngStream rng(15);
    const Eigen::Index d = 4;
    auto adv = AdversarialTwoGaussian::random(d, rng);
    Fixture f;
    f.name = name;
    f.description = "uniform mixture of N(0,2I) and N(u,I), second mode hidden by a smooth switch";
    f.ladder.center_bound = adv.shift_norm();
    f.ladder.kappa = 0.5;
    f.ladder.smoothness = 1.0;
    f.ladder.w_min = 0.5;
    f.ladder.isotropic = false;
    f.info = {{"d", d}, {"u_norm", adv.shift_norm()}, {"u_norm_formula", "8 d ln 2"}};
    f.oracle = std::make_shared<AdversarialTwoGaussian>(std::move(adv));
    f.seed = 15;
    return f;
  }
  if (name == "perturbed-mixture") {
    auto base = two_mode(5.0, 0.5);
    const double delta = 0.1;
    Perturbation p{
        [delta](const Vec& x) { return delta * std::sin(x[0]); },
        [delta](const Vec& x) {
          Vec g = Vec::Zero(x.size());
          g[0] = delta * std::cos(x[0]);
          return g;
        },
        delta, delta};
    Fixture f = mixture_fixture(name, "two-mode-symmetric plus 0.1 sin(x1); declared bounds 0.1/0.1",
                                base, 16);
    f.oracle = perturbed_oracle(std::make_shared<MixtureOracle>(base), std::move(p));
    f.info = {{"sup_value", delta}, {"sup_gradient", delta}};
    return f;
  }
  throw Error(ErrorCode::schema, "unknown fixture '" + name + "'");
}

Fixture fixture_from_json(const json& doc, const std::string& name) {
  const std::string where = "fixture";
  reject_unknown(doc, {"dim", "weights", "centers", "base", "seed", "name", "description"}, where);
  const auto dim = static_cast<Eigen::Index>(field(doc, "dim", where).get<long>());
  if (dim <= 0) throw Error(ErrorCode::schema, where + ".dim: must be positive");

  const json& jw = field(doc, "weights", where);
  const json& jc = field(doc, "centers", where);
  if (!jw.is_array() || !jc.is_array() || jw.size() != jc.size() || jw.empty()) {
    throw Error(ErrorCode::schema, where + ": weights and centers must be arrays of equal length");
  }
  Vec w(static_cast<Eigen::Index>(jw.size()));
  Mat c(dim, static_cast<Eigen::Index>(jc.size()));
  for (std::size_t i = 0; i < jw.size(); ++i) {
    w[static_cast<Eigen::Index>(i)] = number(jw[i], where + ".weights");
    if (!jc[i].is_array() || static_cast<Eigen::Index>(jc[i].size()) != dim) {
      throw Error(ErrorCode::schema, where + ".centers: every center must have length dim");
    }
    for (Eigen::Index k = 0; k < dim; ++k) {
      c(k, static_cast<Eigen::Index>(i)) = number(jc[i][static_cast<std::size_t>(k)], where + ".centers");
    }
  }

  const json& jb = field(doc, "base", where);
  const std::string kind = field(jb, "kind", where + ".base").get<std::string>();
  BaseFunction base = BaseFunction::isotropic_gaussian(1.0);
  if (kind == "isotropic-gaussian") {
    reject_unknown(jb, {"kind", "sigma"}, where + ".base");
    base = BaseFunction::isotropic_gaussian(number(field(jb, "sigma", where + ".base"), where + ".base.sigma"));
  } else if (kind == "quadratic-form") {
    reject_unknown(jb, {"kind", "kappa", "K", "H"}, where + ".base");
    const json& jh = field(jb, "H", where + ".base");
    Mat H(dim, dim);
    if (!jh.is_array() || static_cast<Eigen::Index>(jh.size()) != dim) {
      throw Error(ErrorCode::schema, where + ".base.H: must be dim x dim");
    }
    for (Eigen::Index r = 0; r < dim; ++r) {
      const json& row = jh[static_cast<std::size_t>(r)];
      if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != dim) {
        throw Error(ErrorCode::schema, where + ".base.H: must be dim x dim");
      }
      for (Eigen::Index k = 0; k < dim; ++k) H(r, k) = number(row[static_cast<std::size_t>(k)], where + ".base.H");
    }
    base = BaseFunction::quadratic_form(H, number(field(jb, "kappa", where + ".base"), where + ".base.kappa"),
                                        number(field(jb, "K", where + ".base"), where + ".base.K"));
  } else {
    throw Error(ErrorCode::schema, where + ".base.kind: unknown kind '" + kind + "'");
  }

  std::uint64_t seed = doc.contains("seed") ? doc.at("seed").get<std::uint64_t>() : 0;
  Fixture f = mixture_fixture(doc.value("name", name), doc.value("description", std::string("fixture file")),
                              MixtureTarget(w, c, base), seed);
  return f;
}

Fixture load_fixture_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::schema, "cannot open fixture file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::schema, "fixture file " + path.string() + ": " + e.what());
  }
  return fixture_from_json(doc, path.stem().string());
}

json mixture_to_json(const MixtureTarget& target, std::uint64_t seed) {
  json doc;
  doc["dim"] = target.dim();
  doc["weights"] = std::vector<double>(target.weights().data(), target.weights().data() + target.components());
  json centers = json::array();
  for (Eigen::Index i = 0; i < target.components(); ++i) {
    Vec c = target.center(i);
    centers.push_back(std::vector<double>(c.data(), c.data() + c.size()));
  }
  doc["centers"] = centers;
  const auto& b = target.base();
  if (b.kind() == BaseKind::isotropic_gaussian) {
    doc["base"] = {{"kind", "isotropic-gaussian"}, {"sigma", b.sigma()}};
  } else {
    json H = json::array();
    for (Eigen::Index r = 0; r < b.hessian().rows(); ++r) {
      Vec row = b.hessian().row(r).transpose();
      H.push_back(std::vector<double>(row.data(), row.data() + row.size()));
    }
    doc["base"] = {{"kind", "quadratic-form"}, {"kappa", b.kappa()}, {"K", b.smoothness()}, {"H", H}};
  }
  doc["seed"] = seed;
  return doc;
}

}  // namespace stlmc
