#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "lazycg/measure.hpp"

namespace lazycg {

/// Raised when a point leaves the closed domain box.
class DomainError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Raised when a finite-parameter derivative is requested at a zero weight.
class DegenerateParameterError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct Box {
  Vec lo;
  Vec hi;

  Eigen::Index dim() const { return lo.size(); }
  bool contains(const Vec& x) const;
  Vec clip(const Vec& x) const;
  double diameter() const { return (hi - lo).norm(); }
};

/// Observation kernel x -> kappa(x) in R^m together with its derivatives.
class Kernel {
 public:
  virtual ~Kernel() = default;

  virtual Eigen::Index dim() const = 0;
  virtual Eigen::Index obs_dim() const = 0;
  virtual std::string name() const = 0;

  virtual Vec value(const Vec& x) const = 0;
  /// d x m, column i is grad kappa_i(x).
  virtual Mat jacobian(const Vec& x) const = 0;
  /// (d*d) x m, column i is the column-major d x d Hessian of kappa_i(x).
  virtual Mat hessian(const Vec& x) const = 0;
  /// sum_i q_i * hess kappa_i(x), a d x d matrix.
  virtual Mat hessian_contract(const Vec& x, const Vec& q) const;
};

/// kappa_i(x) = exp(-|x - s_i|^2 / (4t)) / (4 pi t) for sensors s_i.
class HeatKernel final : public Kernel {
 public:
  HeatKernel(std::vector<Vec> sensors, double t);

  Eigen::Index dim() const override { return sensors_.cols(); }
  Eigen::Index obs_dim() const override { return sensors_.rows(); }
  std::string name() const override { return "heat2d"; }

  Vec value(const Vec& x) const override;
  Mat jacobian(const Vec& x) const override;
  Mat hessian(const Vec& x) const override;
  Mat hessian_contract(const Vec& x, const Vec& q) const override;

  double time() const { return t_; }
  const Mat& sensors() const { return sensors_; }

 private:
  Mat sensors_;  // m x d
  double t_;
};

/// kappa_i(x) = sin(2 pi t_i x) on a one-dimensional domain.
class SineKernel final : public Kernel {
 public:
  explicit SineKernel(Vec times);

  Eigen::Index dim() const override { return 1; }
  Eigen::Index obs_dim() const override { return times_.size(); }
  std::string name() const override { return "sine1d"; }

  Vec value(const Vec& x) const override;
  Mat jacobian(const Vec& x) const override;
  Mat hessian(const Vec& x) const override;
  Mat hessian_contract(const Vec& x, const Vec& q) const override;

  const Vec& times() const { return times_; }

 private:
  Vec times_;
};

class Fidelity {
 public:
  virtual ~Fidelity() = default;
  virtual double value(const Vec& y) const = 0;
  virtual Vec gradient(const Vec& y) const = 0;
  virtual Mat hessian(const Vec& y) const = 0;
  /// F(y + dy) - F(y); overridden where it can be formed without cancellation.
  virtual double value_change(const Vec& y, const Vec& dy) const { return value(y + dy) - value(y); }
};

/// F(y) = 0.5 |y - y_dagger|^2.
class QuadraticFidelity final : public Fidelity {
 public:
  explicit QuadraticFidelity(Vec target) : target_(std::move(target)) {}

  double value(const Vec& y) const override { return 0.5 * (y - target_).squaredNorm(); }
  Vec gradient(const Vec& y) const override { return y - target_; }
  Mat hessian(const Vec& y) const override { return Mat::Identity(y.size(), y.size()); }
  double value_change(const Vec& y, const Vec& dy) const override {
    return (y - target_).dot(dy) + 0.5 * dy.squaredNorm();
  }

  const Vec& target() const { return target_; }

 private:
  Vec target_;
};

struct HyperParams {
  double gamma = 1.0;
  double theta = 0.1;
  double R = 0.01;
  double sigma = 0.002;
  double L = 1.0;
  double C_K = 1.0;
  double C_Kp = 1.0;
  double m_lo = 1e-3;
  double m_hi = 0.1;
  int S = 5;
  /// Norm bound on the sublevel set. Zero selects J(u_0) / alpha.
  double M = 0.0;
};

struct Problem {
  Box domain;
  std::shared_ptr<const Kernel> kernel;
  std::shared_ptr<const Fidelity> fidelity;
  double alpha = 0.1;
  HyperParams params;

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;
  Eigen::Index dim() const { return domain.dim(); }
};

Vec forward(const Problem& problem, const SparseMeasure& u);
double objective(const Problem& problem, const SparseMeasure& u);

/// Dual variable p_u = -K_* grad F(K u) with the forward image cached.
class DualState {
 public:
  DualState(const Problem& problem, SparseMeasure u);

  const Problem& problem() const { return *problem_; }
  const SparseMeasure& measure() const { return u_; }
  const Vec& image() const { return y_; }
  const Vec& residual_gradient() const { return q_; }
  double objective() const { return J_; }

  double p(const Vec& x) const;
  Vec grad_p(const Vec& x) const;
  Mat hess_p(const Vec& x) const;

  /// alpha |u|_M - <p_u, u>, accumulated atom-wise for accuracy.
  double pairing_offset() const;

 private:
  void check_domain(const Vec& x) const;

  const Problem* problem_;
  SparseMeasure u_;
  Vec y_;
  Vec q_;
  double J_;
};

/// phi(u, v) = <p_u, v - u> + alpha |u|_M - alpha |v|_M with u = state.measure().
double pairing_phi(const DualState& state, const SparseMeasure& v);

/// M (max_{x in support} |p_u(x)| - alpha)_+ + alpha |u|_M - <p_u, u>.
double finite_gap(const DualState& state, const std::vector<Vec>& support, double M);

/// The dual gap, given a global maximizer xhat of |p_u|.
double global_gap(const DualState& state, const Vec& xhat, double M);

/// Value, gradient and Hessian of J_N(z) = F(K U(z)) + alpha |lambda|_1.
///
/// Variables are ordered as (x_1, ..., x_N, lambda_1, ..., lambda_N) with
/// each x_j occupying d consecutive entries.
double finite_objective(const Problem& problem, const FiniteParam& z);
Vec finite_gradient(const Problem& problem, const FiniteParam& z);
Mat finite_hessian(const Problem& problem, const FiniteParam& z);

Vec flatten(const FiniteParam& z);
FiniteParam unflatten(const Vec& flat, Eigen::Index n, Eigen::Index d);

}  // namespace lazycg
