#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <limits>

#include "lazycg/steps.hpp"

namespace lazycg {

PositiveCoefState::PositiveCoefState(const Problem& problem, std::vector<Vec> points, Vec signs)
    : problem_(&problem), points_(std::move(points)), signs_(std::move(signs)) {
  if (static_cast<Eigen::Index>(points_.size()) != signs_.size()) {
    throw std::invalid_argument("coefficient problem: points/signs size mismatch");
  }
  columns_.resize(problem.kernel->obs_dim(), signs_.size());
  for (Eigen::Index j = 0; j < signs_.size(); ++j) {
    columns_.col(j) = signs_[j] * problem.kernel->value(points_[static_cast<std::size_t>(j)]);
  }
}

PositiveCoefState PositiveCoefState::from_measure(const Problem& problem, const SparseMeasure& u) {
  Vec signs(static_cast<Eigen::Index>(u.size()));
  for (std::size_t j = 0; j < u.size(); ++j) {
    signs[static_cast<Eigen::Index>(j)] = u[j].w < 0.0 ? -1.0 : 1.0;
  }
  return PositiveCoefState(problem, u.support(), std::move(signs));
}

double PositiveCoefState::objective(const Vec& c) const {
  return problem_->fidelity->value(columns_ * c) + problem_->alpha * c.sum();
}

double PositiveCoefState::objective_change(const Vec& c, const Vec& dc) const {
  return problem_->fidelity->value_change(columns_ * c, columns_ * dc) + problem_->alpha * dc.sum();
}

Vec PositiveCoefState::gradient(const Vec& c) const {
  const Vec q = problem_->fidelity->gradient(columns_ * c);
  return (columns_.transpose() * q).array() + problem_->alpha;
}

Mat PositiveCoefState::hessian(const Vec& c) const {
  return columns_.transpose() * problem_->fidelity->hessian(columns_ * c) * columns_;
}

double PositiveCoefState::certificate(const Vec& c, double M) const {
  if (c.size() == 0) return 0.0;
  // p^u_w(x_j) - alpha = -g_j
  const Vec g = gradient(c);
  const double excess = std::max(-g.minCoeff(), 0.0);
  return M * excess + c.dot(g);
}

SparseMeasure PositiveCoefState::measure(const Vec& c) const {
  std::vector<Atom> atoms;
  atoms.reserve(points_.size());
  for (Eigen::Index j = 0; j < c.size(); ++j) {
    atoms.push_back({points_[static_cast<std::size_t>(j)], signs_[j] * c[j]});
  }
  return SparseMeasure::from_atoms(std::move(atoms));
}

double positive_gap(const PositiveCoefState& coef, const Vec& c, double M) {
  if ((c.array() < 0.0).any()) throw std::invalid_argument("positive_gap: negative weights");
  return coef.certificate(c, M);
}

namespace {

Vec project(const Vec& c) { return c.cwiseMax(0.0); }

std::string fmt_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix.
double spectral_bound(const Mat& H) {
  if (H.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> eig(H, Eigen::EigenvaluesOnly);
  return std::max(eig.eigenvalues().maxCoeff(), 0.0);
}

}  // namespace

CoefResult solve_positive(const PositiveCoefState& coef, const Vec& c0, double psi, double M,
                          const CoefOptions& opts) {
  if ((c0.array() < 0.0).any()) throw std::invalid_argument("solve_positive: negative start");
  const double f0 = coef.objective(c0);
  const double f_slack = 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(f0));

  CoefResult res{c0, coef.certificate(c0, M), f0, 0};
  const Eigen::Index n = coef.size();
  if (n == 0) return res;

  // Primal active-set Newton: Newton steps on the free variables, truncated
  // at the first variable that reaches zero, and release of the active
  // variable with the most negative gradient once the free problem is solved.
  Vec c = c0;
  double f = f0;
  Vec g = coef.gradient(c);
  std::vector<bool> active(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) active[static_cast<std::size_t>(j)] = c[j] <= 0.0 && g[j] >= 0.0;
  bool free_solved = false;
  // Accumulated decrease f0 - f, summed from accurately formed changes.
  double decrease = 0.0;
  auto try_move = [&](const Vec& trial) {
    const double delta = coef.objective_change(c, trial - c);
    if (!(delta <= 0.0) && !(delta <= f_slack && decrease - delta >= -f_slack)) return false;
    decrease -= delta;
    c = trial;
    f = f0 - decrease;
    return true;
  };

  for (int it = 0; it <= opts.max_iters; ++it) {
    const double cert = M * std::max(-g.minCoeff(), 0.0) + c.dot(g);
    res = {c, cert, f, it};
    if (cert <= psi && f <= f0 + f_slack) return res;
    if (it == opts.max_iters) break;

    std::vector<Eigen::Index> free_idx;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!active[static_cast<std::size_t>(j)]) free_idx.push_back(j);
    }
    if (free_solved || free_idx.empty()) {
      Eigen::Index release = -1;
      double most = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (active[static_cast<std::size_t>(j)] && g[j] < most) {
          most = g[j];
          release = j;
        }
      }
      free_solved = false;
      if (release >= 0) {
        active[static_cast<std::size_t>(release)] = false;
        continue;
      }
      if (free_idx.empty()) break;
    }

    const auto nf = static_cast<Eigen::Index>(free_idx.size());
    const Mat H = coef.hessian(c);
    Mat Hf(nf, nf);
    Vec gf(nf);
    for (Eigen::Index a = 0; a < nf; ++a) {
      gf[a] = g[free_idx[static_cast<std::size_t>(a)]];
      for (Eigen::Index b = 0; b < nf; ++b) {
        Hf(a, b) = H(free_idx[static_cast<std::size_t>(a)], free_idx[static_cast<std::size_t>(b)]);
      }
    }
    const double scale = std::max(Hf.diagonal().maxCoeff(), 1e-300);
    Hf.diagonal().array() += 1e-14 * scale;
    Eigen::LDLT<Mat> ldlt(Hf);
    Vec df = ldlt.solve(-gf);
    if (ldlt.info() != Eigen::Success || !df.allFinite() || gf.dot(df) >= 0.0) df = -gf / scale;

    // Ratio test against the nonnegativity bounds.
    double t_max = 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index a = 0; a < nf; ++a) {
      const Eigen::Index j = free_idx[static_cast<std::size_t>(a)];
      if (df[a] < 0.0) {
        const double tj = -c[j] / df[a];
        if (tj < t_max) {
          t_max = tj;
          blocking = j;
        }
      }
    }

    bool moved = false;
    double t = t_max;
    for (int k = 0; k < 40 && !moved; ++k, t *= 0.5) {
      Vec trial = c;
      for (Eigen::Index a = 0; a < nf; ++a) trial[free_idx[static_cast<std::size_t>(a)]] += t * df[a];
      if (k == 0 && blocking >= 0) trial[blocking] = 0.0;
      trial = project(trial);
      if (try_move(trial)) {
        moved = true;
        if (k == 0 && blocking >= 0) {
          active[static_cast<std::size_t>(blocking)] = true;
        } else {
          free_solved = k == 0;
        }
      }
    }
    if (!moved) {
      // Projected gradient with the global Lipschitz step.
      const double lip = spectral_bound(H);
      if (!(lip > 0.0)) break;
      const Vec trial = project(c - g / lip);
      if (trial == c || !try_move(trial)) break;
      for (Eigen::Index j = 0; j < n; ++j) active[static_cast<std::size_t>(j)] = c[j] <= 0.0;
    }
    g = coef.gradient(c);
  }
  if ((res.certificate <= psi || opts.allow_stall) && res.objective <= f0 + f_slack) return res;
  throw SolverStallError("coefficient solver: certificate not reached (" + fmt_sci(res.certificate) +
                         " > " + fmt_sci(psi) + " after " + std::to_string(res.iterations) +
                         " iterations)");
}

CoefficientStepResult coefficient_step(const Problem& problem, const SparseMeasure& u, double psi,
                                       double M, const CoefOptions& opts) {
  if (u.empty()) throw std::invalid_argument("coefficient_step: empty measure");
  if (!(psi > 0.0)) throw std::invalid_argument("coefficient_step: psi must be positive");
  const auto coef = PositiveCoefState::from_measure(problem, u);
  Vec w0(coef.size());
  for (std::size_t j = 0; j < u.size(); ++j) w0[static_cast<Eigen::Index>(j)] = std::abs(u[j].w);
  const CoefResult res = solve_positive(coef, w0, psi, M, opts);
  return {coef.measure(res.c), res.c, res.certificate, res.iterations};
}

}  // namespace lazycg
