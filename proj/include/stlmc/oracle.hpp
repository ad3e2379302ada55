#pragma once

#include "stlmc/rng.hpp"
#include "stlmc/types.hpp"

#include <functional>
#include <memory>
#include <utility>
#include <vector>

namespace stlmc {

/// Black-box access to a negative log-density f: value and gradient only.
/// Implementations are immutable after construction and safe to evaluate
/// from several threads at once.
class DensityOracle {
 public:
  virtual ~DensityOracle() = default;

  virtual Eigen::Index dim() const = 0;
  virtual double value(const Vec& x) const = 0;
  virtual Vec gradient(const Vec& x) const = 0;

  virtual std::pair<double, Vec> value_and_gradient(const Vec& x) const {
    return {value(x), gradient(x)};
  }
};

using OraclePtr = std::shared_ptr<const DensityOracle>;

// ---------------------------------------------------------------------------
// Base functions and mixture targets

enum class BaseKind { isotropic_gaussian, quadratic_form };

/// Strongly convex base f0 with f0(0) = 0 and grad f0(0) = 0.
///
/// isotropic_gaussian: f0(y) = |y|^2 / (2 sigma^2), kappa = K = 1/sigma^2.
/// quadratic_form:     f0(y) = y^T H y / 2 with kappa I <= H <= K I.
class BaseFunction {
 public:
  static BaseFunction isotropic_gaussian(double sigma);
  static BaseFunction quadratic_form(Mat H, double kappa, double smoothness);

  BaseKind kind() const noexcept { return kind_; }
  double sigma() const noexcept { return sigma_; }
  const Mat& hessian() const noexcept { return H_; }
  double kappa() const noexcept { return kappa_; }
  double smoothness() const noexcept { return K_; }
  /// Length scale 1/sqrt(kappa); equals sigma for the isotropic case.
  double scale() const;

  double value(const Vec& y) const;
  Vec gradient(const Vec& y) const;

 private:
  BaseFunction() = default;

  BaseKind kind_ = BaseKind::isotropic_gaussian;
  double sigma_ = 1.0;
  Mat H_;
  double kappa_ = 1.0;
  double K_ = 1.0;
};

/// f(x) = -log sum_i w_i exp(-f0(x - mu_i)); centers are the columns of a
/// d x m matrix.
class MixtureTarget {
 public:
  MixtureTarget(Vec weights, Mat centers, BaseFunction base);

  Eigen::Index dim() const noexcept { return centers_.rows(); }
  Eigen::Index components() const noexcept { return centers_.cols(); }
  const Vec& weights() const noexcept { return weights_; }
  const Vec& log_weights() const noexcept { return log_weights_; }
  const Mat& centers() const noexcept { return centers_; }
  Vec center(Eigen::Index i) const { return centers_.col(i); }
  const BaseFunction& base() const noexcept { return base_; }

  double w_min() const { return weights_.minCoeff(); }
  /// max_i |mu_i|
  double center_bound() const;

 private:
  Vec weights_;
  Vec log_weights_;
  Mat centers_;
  BaseFunction base_;
};

double mixture_log_density(const MixtureTarget& target, const Vec& x);
Vec mixture_grad(const MixtureTarget& target, const Vec& x);
/// Posterior component weights w_i e^{-f0(x-mu_i)} / sum_j w_j e^{-f0(x-mu_j)}.
Vec mixture_responsibilities(const MixtureTarget& target, const Vec& x);

/// Exact ln Z_beta for isotropic Gaussian targets. Defined for m = 1 (any
/// beta) and for beta = 1 (any m); everything else throws undefined_operation.
double gaussian_log_partition(const MixtureTarget& target, double beta);

/// Draw n exact samples: component by weight, then a base-distribution draw.
std::vector<Vec> draw_from_mixture(const MixtureTarget& target, std::size_t n, RngStream& rng);

class MixtureOracle final : public DensityOracle {
 public:
  explicit MixtureOracle(MixtureTarget target) : target_(std::move(target)) {}

  const MixtureTarget& target() const noexcept { return target_; }

  Eigen::Index dim() const override { return target_.dim(); }
  double value(const Vec& x) const override { return mixture_log_density(target_, x); }
  Vec gradient(const Vec& x) const override { return mixture_grad(target_, x); }
  std::pair<double, Vec> value_and_gradient(const Vec& x) const override;

 private:
  MixtureTarget target_;
};

/// Oracle built from two callables; used for ad-hoc targets in tests and
/// baselines (flat, quadratic).
class FunctionOracle final : public DensityOracle {
 public:
  using ValueFn = std::function<double(const Vec&)>;
  using GradFn = std::function<Vec(const Vec&)>;

  FunctionOracle(Eigen::Index dim, ValueFn value, GradFn grad)
      : dim_(dim), value_(std::move(value)), grad_(std::move(grad)) {}

  Eigen::Index dim() const override { return dim_; }
  double value(const Vec& x) const override;
  Vec gradient(const Vec& x) const override;

 private:
  Eigen::Index dim_;
  ValueFn value_;
  GradFn grad_;
};

/// (beta f, beta grad f).
OraclePtr tempered_oracle(OraclePtr base, double beta);

struct Perturbation {
  FunctionOracle::ValueFn value;
  FunctionOracle::GradFn gradient;
  double sup_value = 0.0;     // declared sup |perturbation|
  double sup_gradient = 0.0;  // declared sup |grad perturbation|
};

class PerturbedOracle final : public DensityOracle {
 public:
  PerturbedOracle(OraclePtr base, Perturbation perturbation);

  double sup_value() const noexcept { return perturbation_.sup_value; }
  double sup_gradient() const noexcept { return perturbation_.sup_gradient; }
  const OraclePtr& base() const noexcept { return base_; }

  Eigen::Index dim() const override { return base_->dim(); }
  double value(const Vec& x) const override;
  Vec gradient(const Vec& x) const override;

 private:
  OraclePtr base_;
  Perturbation perturbation_;
};

std::shared_ptr<const PerturbedOracle> perturbed_oracle(OraclePtr base, Perturbation perturbation);

// ---------------------------------------------------------------------------
// Lower-bound construction: a uniform mixture of N(0, 2I) and N(u, I) whose
// second mode is hidden behind a smooth switch to the first component.

/// 1 for t >= 1, 0 for t <= 0, t^2 (1-t)^2 + (1 - (1-t)^2)^2 in between.
double adversarial_bump_h(double t);
double adversarial_bump_h_derivative(double t);

class AdversarialTwoGaussian final : public DensityOracle {
 public:
  /// Scales `direction` to norm 8 d ln 2.
  static AdversarialTwoGaussian from_direction(const Vec& direction);
  static AdversarialTwoGaussian random(Eigen::Index d, RngStream& rng);

  static double shift_norm(Eigen::Index d);

  const Vec& shift() const noexcept { return u_; }
  double shift_norm() const noexcept { return u_norm_; }

  /// |x|^2/4 + (d/2) ln(2 sqrt(2) pi): the N(0, 2I) component.
  double f1(const Vec& x) const;
  /// |x-u|^2/2 + (d/2) ln(2 pi): the N(u, I) component.
  double f2(const Vec& x) const;
  /// The true mixture -ln(e^{-f1}/2 + e^{-f2}/2).
  double mixture(const Vec& x) const;
  Vec mixture_gradient(const Vec& x) const;
  /// Switch h(10(|x - 2u|/|u| - 1.5)).
  double switch_weight(const Vec& x) const;
  Vec switch_gradient(const Vec& x) const;

  Eigen::Index dim() const override { return u_.size(); }
  double value(const Vec& x) const override;
  Vec gradient(const Vec& x) const override;
  std::pair<double, Vec> value_and_gradient(const Vec& x) const override;

 private:
  explicit AdversarialTwoGaussian(Vec u);

  Vec u_;
  double u_norm_;
};

}  // namespace stlmc
