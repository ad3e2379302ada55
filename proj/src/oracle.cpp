#include "stlmc/oracle.hpp"

#include <cmath>
#include <numbers>

namespace stlmc {

namespace {

double log_sum_exp(const Vec& a) {
  const double m = a.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((a.array() - m).exp().sum());
}

// a_i = ln w_i - f0(x - mu_i)
Vec component_log_terms(const MixtureTarget& t, const Vec& x) {
  Vec a(t.components());
  for (Eigen::Index i = 0; i < t.components(); ++i) {
    a[i] = t.log_weights()[i] - t.base().value(x - t.centers().col(i));
  }
  return a;
}

Vec softmax(const Vec& a) {
  Vec s = (a.array() - a.maxCoeff()).exp();
  return s / s.sum();
}

}  // namespace

BaseFunction BaseFunction::isotropic_gaussian(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorCode::invalid_argument, "isotropic_gaussian: sigma must be positive");
  }
  BaseFunction b;
  b.kind_ = BaseKind::isotropic_gaussian;
  b.sigma_ = sigma;
  b.kappa_ = b.K_ = 1.0 / (sigma * sigma);
  return b;
}

BaseFunction BaseFunction::quadratic_form(Mat H, double kappa, double smoothness) {
  if (H.rows() != H.cols() || H.rows() == 0) {
    throw Error(ErrorCode::invalid_argument, "quadratic_form: H must be square and non-empty");
  }
  if (!(kappa > 0.0) || kappa > smoothness) {
    throw Error(ErrorCode::invalid_argument, "quadratic_form: need 0 < kappa <= K");
  }
  if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + H.cwiseAbs().maxCoeff())) {
    throw Error(ErrorCode::invalid_argument, "quadratic_form: H must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat> eig(H, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  const double tol = 1e-10 * smoothness;
  if (lo < kappa - tol || hi > smoothness + tol) {
    throw Error(ErrorCode::invalid_argument,
                "quadratic_form: eigenvalues of H must lie in [kappa, K]");
  }
  BaseFunction b;
  b.kind_ = BaseKind::quadratic_form;
  b.H_ = std::move(H);
  b.kappa_ = kappa;
  b.K_ = smoothness;
  b.sigma_ = 1.0 / std::sqrt(kappa);
  return b;
}

double BaseFunction::scale() const { return 1.0 / std::sqrt(kappa_); }

double BaseFunction::value(const Vec& y) const {
  if (kind_ == BaseKind::isotropic_gaussian) return y.squaredNorm() / (2.0 * sigma_ * sigma_);
  return 0.5 * y.dot(H_ * y);
}

Vec BaseFunction::gradient(const Vec& y) const {
  if (kind_ == BaseKind::isotropic_gaussian) return y / (sigma_ * sigma_);
  return H_ * y;
}

MixtureTarget::MixtureTarget(Vec weights, Mat centers, BaseFunction base)
    : weights_(std::move(weights)), centers_(std::move(centers)), base_(std::move(base)) {
  if (weights_.size() == 0 || weights_.size() != centers_.cols()) {
    throw Error(ErrorCode::invalid_argument,
                "MixtureTarget: need one weight per center (centers are columns)");
  }
  if (centers_.rows() == 0) {
    throw Error(ErrorCode::invalid_argument, "MixtureTarget: dimension must be positive");
  }
  if ((weights_.array() <= 0.0).any()) {
    throw Error(ErrorCode::invalid_argument, "MixtureTarget: weights must be positive");
  }
  if (std::abs(weights_.sum() - 1.0) > 1e-12) {
    throw Error(ErrorCode::invalid_argument, "MixtureTarget: weights must sum to 1");
  }
  if (base_.kind() == BaseKind::quadratic_form && base_.hessian().rows() != centers_.rows()) {
    throw Error(ErrorCode::dimension_mismatch, "MixtureTarget: H does not match center dimension");
  }
  log_weights_ = weights_.array().log();
}

double MixtureTarget::center_bound() const { return centers_.colwise().norm().maxCoeff(); }

double mixture_log_density(const MixtureTarget& target, const Vec& x) {
  require_dim(x, target.dim(), "mixture_log_density");
  return -log_sum_exp(component_log_terms(target, x));
}

Vec mixture_responsibilities(const MixtureTarget& target, const Vec& x) {
  require_dim(x, target.dim(), "mixture_responsibilities");
  return softmax(component_log_terms(target, x));
}

Vec mixture_grad(const MixtureTarget& target, const Vec& x) {
  const Vec s = mixture_responsibilities(target, x);
  Vec g = Vec::Zero(target.dim());
  for (Eigen::Index i = 0; i < target.components(); ++i) {
    g += s[i] * target.base().gradient(x - target.centers().col(i));
  }
  return g;
}

double gaussian_log_partition(const MixtureTarget& target, double beta) {
  if (target.base().kind() != BaseKind::isotropic_gaussian) {
    throw Error(ErrorCode::undefined_operation,
                "gaussian_log_partition: base must be an isotropic Gaussian");
  }
  if (!(beta > 0.0)) throw Error(ErrorCode::invalid_argument, "gaussian_log_partition: beta <= 0");
  const double sigma = target.base().sigma();
  const double half_d = 0.5 * static_cast<double>(target.dim());
  if (target.components() == 1) {
    return half_d * std::log(2.0 * std::numbers::pi * sigma * sigma / beta);
  }
  if (beta == 1.0) return half_d * std::log(2.0 * std::numbers::pi * sigma * sigma);
  throw Error(ErrorCode::undefined_operation,
              "gaussian_log_partition: no closed form for a tempered mixture (m > 1, beta != 1); "
              "integrate numerically with the divergences quadrature grid");
}

std::vector<Vec> draw_from_mixture(const MixtureTarget& target, std::size_t n, RngStream& rng) {
  std::vector<Vec> out;
  out.reserve(n);
  const Vec& w = target.weights();
  Eigen::LLT<Mat> chol;
  if (target.base().kind() == BaseKind::quadratic_form) chol.compute(target.base().hessian());
  for (std::size_t k = 0; k < n; ++k) {
    double u = rng.uniform();
    Eigen::Index c = 0;
    while (c + 1 < w.size() && u >= w[c]) {
      u -= w[c];
      ++c;
    }
    Vec xi = rng.normal_vector(target.dim());
    if (target.base().kind() == BaseKind::isotropic_gaussian) {
      out.push_back(target.centers().col(c) + target.base().sigma() * xi);
    } else {
      // cov = H^{-1} = L^{-T} L^{-1}
      out.push_back(target.centers().col(c) + Vec(chol.matrixU().solve(xi)));
    }
  }
  return out;
}

std::pair<double, Vec> MixtureOracle::value_and_gradient(const Vec& x) const {
  require_dim(x, target_.dim(), "MixtureOracle");
  const Vec a = component_log_terms(target_, x);
  const Vec s = softmax(a);
  Vec g = Vec::Zero(target_.dim());
  for (Eigen::Index i = 0; i < target_.components(); ++i) {
    g += s[i] * target_.base().gradient(x - target_.centers().col(i));
  }
  return {-log_sum_exp(a), std::move(g)};
}

double FunctionOracle::value(const Vec& x) const {
  require_dim(x, dim_, "FunctionOracle");
  return value_(x);
}

Vec FunctionOracle::gradient(const Vec& x) const {
  require_dim(x, dim_, "FunctionOracle");
  return grad_(x);
}

namespace {

class TemperedOracle final : public DensityOracle {
 public:
  TemperedOracle(OraclePtr base, double beta) : base_(std::move(base)), beta_(beta) {}

  Eigen::Index dim() const override { return base_->dim(); }
  double value(const Vec& x) const override { return beta_ * base_->value(x); }
  Vec gradient(const Vec& x) const override { return beta_ * base_->gradient(x); }
  std::pair<double, Vec> value_and_gradient(const Vec& x) const override {
    auto [v, g] = base_->value_and_gradient(x);
    return {beta_ * v, beta_ * g};
  }

 private:
  OraclePtr base_;
  double beta_;
};

}  // namespace

OraclePtr tempered_oracle(OraclePtr base, double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw Error(ErrorCode::invalid_argument, "tempered_oracle: beta must be positive");
  }
  return std::make_shared<TemperedOracle>(std::move(base), beta);
}

PerturbedOracle::PerturbedOracle(OraclePtr base, Perturbation perturbation)
    : base_(std::move(base)), perturbation_(std::move(perturbation)) {
  if (!perturbation_.value || !perturbation_.gradient) {
    throw Error(ErrorCode::invalid_argument, "perturbed_oracle: perturbation needs value and gradient");
  }
}

double PerturbedOracle::value(const Vec& x) const {
  return base_->value(x) + perturbation_.value(x);
}

Vec PerturbedOracle::gradient(const Vec& x) const {
  return base_->gradient(x) + perturbation_.gradient(x);
}

std::shared_ptr<const PerturbedOracle> perturbed_oracle(OraclePtr base, Perturbation perturbation) {
  return std::make_shared<PerturbedOracle>(std::move(base), std::move(perturbation));
}

double adversarial_bump_h(double t) {
  if (t >= 1.0) return 1.0;
  if (t <= 0.0) return 0.0;
  const double s = 1.0 - t;
  const double inner = 1.0 - s * s;
  return t * t * s * s + inner * inner;
}

double adversarial_bump_h_derivative(double t) {
  if (t >= 1.0 || t <= 0.0) return 0.0;
  return 2.0 * t * (4.0 * t * t - 9.0 * t + 5.0);
}

double AdversarialTwoGaussian::shift_norm(Eigen::Index d) {
  return 8.0 * static_cast<double>(d) * std::numbers::ln2;
}

AdversarialTwoGaussian::AdversarialTwoGaussian(Vec u) : u_(std::move(u)), u_norm_(u_.norm()) {}

AdversarialTwoGaussian AdversarialTwoGaussian::from_direction(const Vec& direction) {
  const double n = direction.norm();
  if (direction.size() == 0 || !(n > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "AdversarialTwoGaussian: direction must be non-zero");
  }
  return AdversarialTwoGaussian(direction * (shift_norm(direction.size()) / n));
}

AdversarialTwoGaussian AdversarialTwoGaussian::random(Eigen::Index d, RngStream& rng) {
  Vec dir;
  do {
    dir = rng.normal_vector(d);
  } while (dir.norm() == 0.0);
  return from_direction(dir);
}

double AdversarialTwoGaussian::f1(const Vec& x) const {
  const double d = static_cast<double>(dim());
  return x.squaredNorm() / 4.0 + 0.5 * d * std::log(2.0 * std::numbers::sqrt2 * std::numbers::pi);
}

double AdversarialTwoGaussian::f2(const Vec& x) const {
  const double d = static_cast<double>(dim());
  return (x - u_).squaredNorm() / 2.0 + 0.5 * d * std::log(2.0 * std::numbers::pi);
}

double AdversarialTwoGaussian::mixture(const Vec& x) const {
  const double a = -f1(x);
  const double b = -f2(x);
  const double m = std::max(a, b);
  return -(m + std::log(0.5 * (std::exp(a - m) + std::exp(b - m))));
}

Vec AdversarialTwoGaussian::mixture_gradient(const Vec& x) const {
  const double a = -f1(x);
  const double b = -f2(x);
  const double m = std::max(a, b);
  const double ea = std::exp(a - m);
  const double eb = std::exp(b - m);
  const double s1 = ea / (ea + eb);
  return s1 * (0.5 * x) + (1.0 - s1) * (x - u_);
}

double AdversarialTwoGaussian::switch_weight(const Vec& x) const {
  const double r = (x - 2.0 * u_).norm();
  return adversarial_bump_h(10.0 * (r / u_norm_ - 1.5));
}

Vec AdversarialTwoGaussian::switch_gradient(const Vec& x) const {
  const Vec diff = x - 2.0 * u_;
  const double r = diff.norm();
  const double dh = adversarial_bump_h_derivative(10.0 * (r / u_norm_ - 1.5));
  if (dh == 0.0) return Vec::Zero(dim());
  return (dh * 10.0 / (u_norm_ * r)) * diff;
}

double AdversarialTwoGaussian::value(const Vec& x) const {
  require_dim(x, dim(), "AdversarialTwoGaussian");
  const double g = switch_weight(x);
  if (g == 1.0) return f1(x);
  if (g == 0.0) return mixture(x);
  return g * f1(x) + (1.0 - g) * mixture(x);
}

Vec AdversarialTwoGaussian::gradient(const Vec& x) const { return value_and_gradient(x).second; }

std::pair<double, Vec> AdversarialTwoGaussian::value_and_gradient(const Vec& x) const {
  require_dim(x, dim(), "AdversarialTwoGaussian");
  const double g = switch_weight(x);
  if (g == 1.0) return {f1(x), 0.5 * x};
  if (g == 0.0) return {mixture(x), mixture_gradient(x)};
  const double v1 = f1(x);
  const double v = mixture(x);
  Vec grad = g * (0.5 * x) + (1.0 - g) * mixture_gradient(x) + (v1 - v) * switch_gradient(x);
  return {g * v1 + (1.0 - g) * v, std::move(grad)};
}

}  // namespace stlmc
