#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "lazycg/steps.hpp"

namespace lazycg {

namespace {

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

double curvature_constant(const Problem& problem, double M) {
  const auto& h = problem.params;
  return 4.0 * h.L * M * M * h.C_K * h.C_K;
}

StepReport lgcg_step(const DualState& state, double eps, double C, double M,
                     CandidateCache& cache, const SearchConfig& cfg) {
  if (!(eps > 0.0) || !(C > 0.0)) throw std::invalid_argument("lgcg_step: eps and C must be positive");
  const SparseMeasure& u = state.measure();
  LazyOutcome found = lazy_search(state, eps, M, u.support(), cache, cfg);

  StepReport rep;
  rep.lazy = found.lazy();
  rep.direction = std::move(found.direction);
  rep.x = std::move(found.x);
  rep.phi = found.phi;
  if (rep.lazy) {
    rep.eta = std::min(1.0, M * eps / C);
    rep.eps_out = eps;
  } else {
    const double gap = std::max(found.phi, 0.0);
    rep.eta = std::min(1.0, gap / C);
    rep.eps_out = gap / (2.0 * M);
  }
  // Insertions may be far below the weight floor late in a run; only exact
  // zeros are removed here and later coefficient updates prune.
  rep.u_plus = convex_combine(u, rep.direction, rep.eta, 0.0);
  rep.descent = state.objective() - objective(state.problem(), rep.u_plus);
  return rep;
}

double lgcg_descent_bound(double eps_out, double C, double M) {
  const double me = M * eps_out;
  return me <= C ? -me * me / (2.0 * C) : C / 2.0 - me;
}

std::vector<Vec> drop_set(const DualState& state, double sigma) {
  const double alpha = state.problem().alpha;
  std::vector<Vec> dropped;
  for (const auto& a : state.measure().atoms()) {
    const double p = state.p(a.x);
    if (sign_of(p) != sign_of(a.w) || std::abs(p) <= alpha - sigma / 2.0) dropped.push_back(a.x);
  }
  return dropped;
}

SparseMeasure drop_step(const DualState& state, double sigma) {
  const double alpha = state.problem().alpha;
  const SparseMeasure& u = state.measure();
  std::vector<Atom> kept;
  for (const auto& a : u.atoms()) {
    const double p = state.p(a.x);
    const bool drop = sign_of(p) != sign_of(a.w) || std::abs(p) <= alpha - sigma / 2.0;
    if (!drop) kept.push_back(a);
  }
  if (kept.size() == u.size()) return u;
  SparseMeasure candidate = SparseMeasure::from_atoms(std::move(kept), 0.0);
  return objective(state.problem(), candidate) <= state.objective() ? candidate : u;
}

// ---------------------------------------------------------------------------

namespace {

double max_abs_p_in_ball(const DualState& state, const Vec& center, double radius) {
  double best = 0.0;
  for (const auto& a : state.measure().atoms()) {
    if ((a.x - center).norm() < radius) best = std::max(best, std::abs(state.p(a.x)));
  }
  return best;
}

/// Index of the largest |p_u| among the flagged atoms, lowest index on ties.
std::size_t argmax_remaining(const DualState& state, const std::vector<bool>& remaining) {
  std::size_t best = remaining.size();
  double best_val = -1.0;
  const auto& atoms = state.measure().atoms();
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    if (!remaining[j]) continue;
    const double v = std::abs(state.p(atoms[j].x));
    if (v > best_val) {
      best_val = v;
      best = j;
    }
  }
  return best;
}

void remove_ball(const SparseMeasure& u, const Vec& center, double radius,
                 std::vector<bool>& remaining) {
  for (std::size_t j = 0; j < u.size(); ++j) {
    if (remaining[j] && (u[j].x - center).norm() < radius) remaining[j] = false;
  }
  // The center is always covered even if radius underflows.
  const long self = u.find(center);
  if (self >= 0) remaining[static_cast<std::size_t>(self)] = false;
}

}  // namespace

std::vector<Vec> lsi(const DualState& state, double M, const SearchConfig& cfg) {
  const SparseMeasure& u = state.measure();
  const auto& h = state.problem().params;
  const double alpha = state.problem().alpha;
  const double two_r = 2.0 * h.R;
  const double local_gap = finite_gap(state, u.support(), M);

  std::vector<Vec> improvers;
  std::vector<bool> remaining(u.size(), true);
  while (true) {
    const std::size_t j = argmax_remaining(state, remaining);
    if (j == remaining.size()) break;
    const Vec& x = u[j].x;
    const double near_max = max_abs_p_in_ball(state, x, two_r);

    auto qualifies = [&](const Vec& cand) {
      if ((cand - x).norm() >= two_r) return false;
      const double val = std::abs(state.p(cand));
      if (!(val > alpha - h.sigma / 2.0)) return false;
      const double gnorm = state.grad_p(cand).norm();
      return val - near_max >= two_r * gnorm && gnorm <= local_gap;
    };
    std::optional<Vec> found;
    local_ascent(state, x, cfg, [&](const Vec& cand) {
      if (!qualifies(cand)) return false;
      found = cand;
      return true;
    });
    if (found) improvers.push_back(*found);
    remove_ball(u, x, two_r, remaining);
  }
  return improvers;
}

LsiStepResult lsi_step(const DualState& state, double M, const SearchConfig& cfg) {
  const SparseMeasure& u = state.measure();
  LsiStepResult out{u, lsi(state, M, cfg), 0.0};
  if (out.improvers.empty()) return out;

  const auto& h = state.problem().params;
  const double two_r = 2.0 * h.R;
  std::vector<Atom> lumped;
  double best_score = -std::numeric_limits<double>::infinity();
  Vec best_x;
  for (const auto& x : out.improvers) {
    lumped.push_back({x, ball_mass(u, x, two_r)});
    const double score = std::abs(state.p(x)) - max_abs_p_in_ball(state, x, two_r);
    if (score > best_score) {
      best_score = score;
      best_x = x;
    }
  }
  const SparseMeasure lumped_measure = SparseMeasure::from_atoms(std::move(lumped));
  const double mu = std::abs(ball_mass(u, best_x, two_r));
  const double inner = 2.0 * M * std::sqrt(h.R / h.theta) +
                       2.0 * M * h.C_Kp * h.L / (h.theta * std::sqrt(h.gamma)) +
                       std::sqrt(M / h.theta);
  const double denom = 16.0 * M * h.L * h.C_Kp * h.C_Kp * inner * inner;
  out.eta = std::min(1.0, mu / denom);
  out.u_plus = convex_combine(u, lumped_measure, out.eta, 0.0);
  return out;
}

SparseMeasure local_merge(const DualState& state, double R) {
  const SparseMeasure& u = state.measure();
  const double two_r = 2.0 * R;
  std::vector<bool> remaining(u.size(), true);
  std::vector<Atom> lumped;
  while (true) {
    const std::size_t j = argmax_remaining(state, remaining);
    if (j == remaining.size()) break;
    const Vec x = u[j].x;
    lumped.push_back({x, ball_mass(u, x, two_r)});
    remove_ball(u, x, two_r, remaining);
  }
  return SparseMeasure::from_atoms(std::move(lumped));
}

// ---------------------------------------------------------------------------

FiniteParam newton_step(const Problem& problem, const FiniteParam& z) {
  const Vec g = finite_gradient(problem, z);
  const Mat H = finite_hessian(problem, z);
  if (!H.allFinite() || !g.allFinite()) return z;
  Eigen::PartialPivLU<Mat> lu(H);
  const double rcond = lu.rcond();
  if (!(rcond > kNewtonRcondFloor)) return z;
  const Vec step = lu.solve(g);
  if (!step.allFinite()) return z;
  return unflatten(flatten(z) - step, static_cast<Eigen::Index>(z.count()),
                   static_cast<Eigen::Index>(z.dim()));
}

bool accept_newton_descent(const Vec& grad, const FiniteParam& z, const FiniteParam& z_plus,
                           double m_lo, double M, const Problem& problem) {
  for (std::size_t j = 0; j < z_plus.count(); ++j) {
    if (!problem.domain.contains(z_plus.position(j))) return false;
  }
  if (!(z_plus.weights.lpNorm<1>() <= M)) return false;
  const double change = finite_objective(problem, z_plus) - finite_objective(problem, z);
  return change <= -(m_lo / 8.0) * grad.squaredNorm();
}

double newton_progress_threshold(double eps, double m_hi, double C, double M) {
  const double me = M * eps;
  return me <= C ? me * me / (2.0 * C * m_hi) : (2.0 * me - C) / (2.0 * m_hi);
}

bool accept_newton_progress(double grad_norm_sq, double eps, double m_hi, double C, double M) {
  if (!(eps >= 0.0)) throw std::invalid_argument("accept_newton_progress: eps must be nonnegative");
  return grad_norm_sq >= newton_progress_threshold(eps, m_hi, C, M);
}

}  // namespace lazycg
