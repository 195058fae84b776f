#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "lazycg/model.hpp"
#include "lazycg/search.hpp"

namespace lazycg {

/// The coefficient solver ran out of iterations before reaching its
/// certificate.
class SolverStallError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --------------------------------------------------------------------------
// Lazy conditional gradient step

struct StepReport {
  SparseMeasure u_plus;
  SparseMeasure direction;
  std::optional<Vec> x;
  double eps_out = 0.0;
  double eta = 0.0;
  /// phi(u, v) for the direction used.
  double phi = 0.0;
  bool lazy = false;
  /// J(u) - J(u_plus).
  double descent = 0.0;
};

/// C = 4 L M^2 C_K^2.
double curvature_constant(const Problem& problem, double M);

StepReport lgcg_step(const DualState& state, double eps, double C, double M,
                     CandidateCache& cache, const SearchConfig& cfg);

/// Right-hand side of the guaranteed decrease J(u_+) - J(u) <= bound.
double lgcg_descent_bound(double eps_out, double C, double M);

// --------------------------------------------------------------------------
// Drop and coefficient steps

/// Support points whose weight sign disagrees with p_u or where
/// |p_u| <= alpha - sigma/2.
std::vector<Vec> drop_set(const DualState& state, double sigma);

SparseMeasure drop_step(const DualState& state, double sigma);

/// Sign-fixed nonnegative coefficient problem on a fixed point set:
/// min_{c >= 0} F(sum_j s_j c_j kappa(x_j)) + alpha sum_j c_j.
class PositiveCoefState {
 public:
  PositiveCoefState(const Problem& problem, std::vector<Vec> points, Vec signs);

  /// Signs and magnitudes taken from the atoms of u.
  static PositiveCoefState from_measure(const Problem& problem, const SparseMeasure& u);

  Eigen::Index size() const { return signs_.size(); }
  const std::vector<Vec>& points() const { return points_; }
  const Vec& signs() const { return signs_; }
  /// Columns s_j kappa(x_j).
  const Mat& columns() const { return columns_; }

  double objective(const Vec& c) const;
  /// objective(c + dc) - objective(c) without forming both values.
  double objective_change(const Vec& c, const Vec& dc) const;
  /// alpha - p^u_w(x_j) per point.
  Vec gradient(const Vec& c) const;
  Mat hessian(const Vec& c) const;
  /// M (max_j p^u_w(x_j) - alpha)_+ + alpha |w| - <p^u_w, w>.
  double certificate(const Vec& c, double M) const;

  /// v^u_w = sum_j s_j c_j delta_{x_j}, pruned.
  SparseMeasure measure(const Vec& c) const;

 private:
  const Problem* problem_;
  std::vector<Vec> points_;
  Vec signs_;
  Mat columns_;
};

double positive_gap(const PositiveCoefState& coef, const Vec& c, double M);

struct CoefOptions {
  int max_iters = 500;
  /// Return the last iterate instead of throwing when the certificate is
  /// out of reach.
  bool allow_stall = false;
};

struct CoefResult {
  Vec c;
  double certificate = 0.0;
  double objective = 0.0;
  int iterations = 0;
};

/// Finds c >= 0 with certificate(c) <= psi and objective(c) <= objective(c0).
/// Throws SolverStallError after `max_iters` iterations unless
/// `opts.allow_stall` is set.
CoefResult solve_positive(const PositiveCoefState& coef, const Vec& c0, double psi, double M,
                          const CoefOptions& opts = {});

struct CoefficientStepResult {
  SparseMeasure u_plus;
  Vec w;
  /// Phi^u(w_+) on the support of the input measure.
  double certificate = 0.0;
  int iterations = 0;
};

CoefficientStepResult coefficient_step(const Problem& problem, const SparseMeasure& u, double psi,
                                       double M, const CoefOptions& opts = {});

// --------------------------------------------------------------------------
// Local support improvement and merging

std::vector<Vec> lsi(const DualState& state, double M, const SearchConfig& cfg);

struct LsiStepResult {
  SparseMeasure u_plus;
  std::vector<Vec> improvers;
  double eta = 0.0;
};

LsiStepResult lsi_step(const DualState& state, double M, const SearchConfig& cfg);

SparseMeasure local_merge(const DualState& state, double R);

// --------------------------------------------------------------------------
// Newton sliding on (x, lambda)

/// Reciprocal condition threshold below which the Hessian counts as singular.
inline constexpr double kNewtonRcondFloor = 1e-14;

FiniteParam newton_step(const Problem& problem, const FiniteParam& z);

bool accept_newton_descent(const Vec& grad, const FiniteParam& z, const FiniteParam& z_plus,
                           double m_lo, double M, const Problem& problem);

double newton_progress_threshold(double eps, double m_hi, double C, double M);

bool accept_newton_progress(double grad_norm_sq, double eps, double m_hi, double C, double M);

}  // namespace lazycg
