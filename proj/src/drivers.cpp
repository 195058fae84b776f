#include "lazycg/drivers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lazycg {

const char* to_string(CallType c) {
  switch (c) {
    case CallType::Lazy: return "Lazy";
    case CallType::Exact: return "Exact";
    case CallType::Newton: return "Newton";
    case CallType::Merge: return "Merge";
    case CallType::Drop: return "Drop";
    case CallType::Coef: return "Coef";
    case CallType::Recompute: return "Recompute";
  }
  return "?";
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::NotConverged: return "NotConverged";
    case SolveStatus::Stalled: return "Stalled";
  }
  return "?";
}

void SolverOptions::validate() const {
  if (!(tol > 0.0)) throw std::invalid_argument("solver: tol must be positive");
  if (max_outer < 1) throw std::invalid_argument("solver: max_outer must be positive");
  if (eps_init && !(*eps_init > 0.0)) throw std::invalid_argument("solver: eps_init must be positive");
  if (psi_init && !(*psi_init > 0.0)) throw std::invalid_argument("solver: psi_init must be positive");
  if (m_beta && !(*m_beta > 0.0)) throw std::invalid_argument("solver: m_beta must be positive");
  search.validate();
}

namespace {

using Clock = std::chrono::steady_clock;

/// Shared bookkeeping: clock, dynamic norm bound, records and counters.
class Run {
 public:
  Run(std::string solver, const Problem& problem, const SolverOptions& opts)
      : problem_(problem), opts_(opts), start_(Clock::now()), cache_(opts.search.cache_size) {
    problem.validate();
    opts.validate();
    trace_.solver = std::move(solver);
    beta_ = opts.m_beta.value_or(problem.alpha);
    const double J0 = objective(problem, SparseMeasure{});
    M_ = problem.params.M > 0.0 ? problem.params.M : J0 / beta_;
    if (!(M_ > 0.0)) M_ = 1.0;
    C_ = curvature_constant(problem, M_);
  }

  const Problem& problem() const { return problem_; }
  const SolverOptions& opts() const { return opts_; }
  CandidateCache& cache() { return cache_; }
  Trace& trace() { return trace_; }
  double M() const { return M_; }
  double C() const { return C_; }

  double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

  bool out_of_time() const { return opts_.max_seconds > 0.0 && elapsed() > opts_.max_seconds; }

  /// M_k = J(u_k) / beta after an accepted iterate.
  void update_bound(double J) {
    if (!opts_.dynamic_M || problem_.params.M > 0.0) return;
    const double next = J / beta_;
    if (next > 0.0) {
      M_ = next;
      C_ = curvature_constant(problem_, M_);
    }
  }

  void record(int k, int s, double J, double gap, double eps, std::size_t support, CallType call,
              bool accepted) {
    TraceRecord r;
    r.k = k;
    r.s = s;
    r.time_s = elapsed();
    r.J = J;
    r.gap_est = gap;
    r.eps = eps;
    r.support_size = support;
    r.call = call;
    r.M = M_;
    r.C = C_;
    r.accepted = accepted;
    if (accepted) {
      if (last_accepted_J_ && J > *last_accepted_J_ + 1e-14 * std::max(1.0, std::abs(J))) {
        ++trace_.monitors.monotonicity_violations;
      }
      last_accepted_J_ = J;
    }
    trace_.records.push_back(r);
  }

  /// Books an LGCG step and checks its guarantees.
  void book_lgcg(const DualState& state, const StepReport& rep, double eps_in) {
    if (rep.lazy) {
      ++trace_.lazy_calls;
      if (!(rep.phi >= M_ * eps_in)) ++trace_.monitors.lazy_threshold_violations;
    } else {
      ++trace_.exact_calls;
    }
    const double bound = lgcg_descent_bound(rep.eps_out, C_, M_);
    const double slack = 1e-12 * std::max(1.0, state.objective());
    if (-rep.descent > bound + slack) ++trace_.monitors.lgcg_descent_violations;
  }

  SparseMeasure checked_drop(const DualState& state) {
    SparseMeasure out = drop_step(state, problem_.params.sigma);
    if (objective(problem_, out) > state.objective()) ++trace_.monitors.drop_increase_violations;
    return out;
  }

  Trace finish(SolveStatus status, SparseMeasure final_u, std::string message = {}) {
    trace_.status = status;
    trace_.message = std::move(message);
    // Sub-floor atoms from lazy insertions are dropped when that costs nothing.
    double J = objective(problem_, final_u);
    SparseMeasure cleaned = final_u.pruned();
    if (cleaned.size() < final_u.size()) {
      const double Jc = objective(problem_, cleaned);
      if (Jc <= J + 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(J))) {
        final_u = std::move(cleaned);
        J = Jc;
      }
    }
    trace_.final_J = J;
    trace_.final_measure = std::move(final_u);
    trace_.seconds = elapsed();
    return std::move(trace_);
  }

 private:
  const Problem& problem_;
  const SolverOptions& opts_;
  Clock::time_point start_;
  CandidateCache cache_;
  Trace trace_;
  double beta_ = 1.0;
  double M_ = 1.0;
  double C_ = 1.0;
  std::optional<double> last_accepted_J_;
};

/// Relative certificate level below which the coefficient solver hits rounding.
constexpr double kPsiFloor = 1e-14;

/// Consecutive PDAP iterations without decrease before giving up.
constexpr int kPdapFlatLimit = 5;

/// Argmin of J, with ties up to rounding resolved toward the later candidate.
/// A conditional gradient step whose descent is below the resolution of J
/// still carries its new atom forward this way.
std::size_t argmin_late(const std::vector<double>& J) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < J.size(); ++i) {
    const double slack = 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(J[best]));
    if (J[i] <= J[best] + slack) best = i;
  }
  double lowest = J[best];
  for (double v : J) lowest = std::min(lowest, v);
  // Never trade a real decrease for a tie.
  if (J[best] > lowest + 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(lowest))) {
    best = static_cast<std::size_t>(std::min_element(J.begin(), J.end()) - J.begin());
  }
  return best;
}

const SparseMeasure& better_of(const SparseMeasure& a, double Ja, const SparseMeasure& b,
                               double Jb) {
  return argmin_late({Ja, Jb}) == 1 ? b : a;
}

}  // namespace

// ---------------------------------------------------------------------------

Trace run_pdap(const Problem& problem, const SolverOptions& opts) {
  Run run("pdap", problem, opts);
  const double J0 = objective(problem, SparseMeasure{});
  const double psi = opts.psi_init.value_or(std::min(kPsiFloor * std::max(1.0, J0), 0.1 * opts.tol));

  SparseMeasure u;
  int flat = 0;
  for (int k = 1; k <= opts.max_outer; ++k) {
    run.trace().outer_iterations = k;
    DualState state(problem, u);
    const auto support = u.support();
    const Peak peak = exact_max(state, support, opts.search);
    const double gap = global_gap(state, peak.x, run.M());
    ++run.trace().exact_calls;
    run.record(k, 0, state.objective(), gap, gap / (2.0 * run.M()), u.size(), CallType::Exact, true);
    if (gap <= opts.tol) return run.finish(SolveStatus::Converged, u);
    if (run.out_of_time()) return run.finish(SolveStatus::NotConverged, u, "time budget exhausted");

    // Exact coefficient minimization over supp(u) and xhat, both signs per point.
    std::vector<Vec> points;
    std::vector<double> signs;
    std::vector<double> start;
    auto add_point = [&](const Vec& x, double w) {
      points.push_back(x);
      signs.push_back(1.0);
      start.push_back(std::max(w, 0.0));
      points.push_back(x);
      signs.push_back(-1.0);
      start.push_back(std::max(-w, 0.0));
    };
    for (const auto& a : u.atoms()) add_point(a.x, a.w);
    if (u.find(peak.x) < 0) add_point(peak.x, 0.0);

    const PositiveCoefState coef(problem, points,
                                 Eigen::Map<const Vec>(signs.data(), static_cast<Eigen::Index>(signs.size())));
    const Vec c0 = Eigen::Map<const Vec>(start.data(), static_cast<Eigen::Index>(start.size()));
    // The minimization is meant to be exact; at the rounding floor the best
    // iterate found stands in for it.
    CoefOptions coef_opts = opts.coef;
    coef_opts.allow_stall = true;
    CoefResult res;
    try {
      res = solve_positive(coef, c0, psi, run.M(), coef_opts);
    } catch (const SolverStallError& e) {
      return run.finish(SolveStatus::Stalled, u, e.what());
    }
    const double J_before = state.objective();
    u = coef.measure(res.c);
    if (objective(problem, u) < J_before) {
      flat = 0;
    } else if (++flat >= kPdapFlatLimit) {
      return run.finish(SolveStatus::Stalled, u, "no decrease in " + std::to_string(flat) + " iterations");
    }
    run.update_bound(res.objective);
    run.record(k, 0, objective(problem, u), res.certificate, 0.0, u.size(), CallType::Coef, false);
  }
  return run.finish(SolveStatus::NotConverged, u, "max_outer reached");
}

// ---------------------------------------------------------------------------

Trace run_lgcg(const Problem& problem, const SolverOptions& opts) {
  Run run("lgcg", problem, opts);
  SparseMeasure u;
  const double J0 = objective(problem, u);
  double eps = opts.eps_init.value_or(J0 / (2.0 * run.M()));

  for (int k = 1; k <= opts.max_outer; ++k) {
    run.trace().outer_iterations = k;
    DualState state(problem, u);
    const StepReport rep = lgcg_step(state, eps, run.C(), run.M(), run.cache(), opts.search);
    run.book_lgcg(state, rep, eps);
    run.record(k, 0, state.objective(), rep.phi, rep.eps_out, u.size(),
               rep.lazy ? CallType::Lazy : CallType::Exact, true);
    if (rep.eps_out <= 0.0 || 2.0 * run.M() * rep.eps_out <= opts.tol) {
      return run.finish(SolveStatus::Converged, u);
    }
    if (run.out_of_time()) return run.finish(SolveStatus::NotConverged, u, "time budget exhausted");
    eps = rep.eps_out;
    u = rep.u_plus;
    run.update_bound(objective(problem, u));
  }
  return run.finish(SolveStatus::NotConverged, u, "max_outer reached");
}

// ---------------------------------------------------------------------------

Trace run_lpdap(const Problem& problem, const SolverOptions& opts) {
  Run run("lpdap", problem, opts);
  const double J0 = objective(problem, SparseMeasure{});
  double eps = opts.eps_init.value_or(J0 / (2.0 * run.M()));
  double psi = opts.psi_init.value_or(std::max(1.0, J0));
  const double psi_floor = std::min(psi, kPsiFloor * std::max(1.0, J0));

  SparseMeasure u_minus = run.checked_drop(DualState(problem, SparseMeasure{}));
  SparseMeasure u_k;
  int recomputes = 0;
  for (int k = 1; k <= opts.max_outer; ++k) {
    run.trace().outer_iterations = k;
    int s = 0;
    StepReport rep;
    LsiStepResult improved;
    while (true) {
      double cert = 0.0;
      if (u_minus.empty()) {
        u_k = u_minus;
      } else {
        try {
          auto coef = coefficient_step(problem, u_minus, psi, run.M(), opts.coef);
          u_k = std::move(coef.u_plus);
          cert = coef.certificate;
        } catch (const SolverStallError& e) {
          run.trace().recomputes = recomputes;
          return run.finish(SolveStatus::Stalled, u_minus, e.what());
        }
      }
      DualState state(problem, u_k);
      run.update_bound(state.objective());
      run.record(k, s, state.objective(), cert, eps, u_k.size(), CallType::Coef, s == 0);

      improved = lsi_step(state, run.M(), opts.search);
      for (const auto& x : improved.improvers) run.cache().insert(x);

      rep = lgcg_step(state, eps, run.C(), run.M(), run.cache(), opts.search);
      run.book_lgcg(state, rep, eps);
      run.record(k, s, state.objective(), rep.phi, rep.eps_out, u_k.size(),
                 rep.lazy ? CallType::Lazy : CallType::Exact, false);
      if (rep.eps_out <= 0.0 || rep.phi <= opts.tol) {
        run.trace().recomputes = recomputes;
        return run.finish(SolveStatus::Converged, u_k);
      }
      if (run.out_of_time()) {
        run.trace().recomputes = recomputes;
        return run.finish(SolveStatus::NotConverged, u_k, "time budget exhausted");
      }
      if (cert > rep.phi / 2.0 && psi > psi_floor) {
        psi = std::max(psi / 2.0, psi_floor);
        ++s;
        ++recomputes;
        run.record(k, s, state.objective(), cert, eps, u_k.size(), CallType::Recompute, false);
        continue;
      }
      break;
    }
    eps = rep.eps_out;
    const double J_lsi = objective(problem, improved.u_plus);
    const double J_gcg = objective(problem, rep.u_plus);
    const SparseMeasure& u_plus = better_of(improved.u_plus, J_lsi, rep.u_plus, J_gcg);
    DualState plus_state(problem, u_plus);
    u_minus = run.checked_drop(plus_state);
    run.record(k, s, objective(problem, u_minus), rep.phi, eps, u_minus.size(), CallType::Drop, false);
  }
  run.trace().recomputes = recomputes;
  return run.finish(SolveStatus::NotConverged, u_k, "max_outer reached");
}

// ---------------------------------------------------------------------------

Trace run_nlgcg(const Problem& problem, const SolverOptions& opts) {
  Run run("nlgcg", problem, opts);
  const auto& h = problem.params;
  const double J0 = objective(problem, SparseMeasure{});
  double eps = opts.eps_init.value_or(J0 / (2.0 * run.M()));
  double psi = opts.psi_init.value_or(std::max(1.0, J0));
  const double psi_floor = std::min(psi, kPsiFloor * std::max(1.0, J0));
  const double tol = opts.tol;

  SparseMeasure u;
  for (int k = 1; k <= opts.max_outer; ++k) {
    run.trace().outer_iterations = k;
    const double M = run.M();
    const double C = run.C();
    auto small = [&](double e) { return e <= 0.0 || 2.0 * M * e <= tol; };

    DualState state(problem, u);
    run.record(k, 0, state.objective(), 0.0, eps, u.size(), CallType::Coef, true);
    const StepReport outer = lgcg_step(state, eps, C, M, run.cache(), opts.search);
    run.book_lgcg(state, outer, eps);
    run.record(k, 0, state.objective(), outer.phi, outer.eps_out, u.size(),
               outer.lazy ? CallType::Lazy : CallType::Exact, false);
    if (small(outer.eps_out)) {
      return run.finish(SolveStatus::Converged,
                        better_of(u, state.objective(), outer.u_plus, state.objective() - outer.descent));
    }
    if (run.out_of_time()) return run.finish(SolveStatus::NotConverged, u, "time budget exhausted");
    const double eps_next = outer.eps_out;

    const SparseMeasure u_drop = run.checked_drop(DualState(problem, outer.u_plus));
    const double J_drop = objective(problem, u_drop);
    run.record(k, 0, J_drop, 0.0, eps_next, u_drop.size(), CallType::Drop, false);

    SparseMeasure u_coef = u_drop;
    if (!u_drop.empty()) {
      try {
        u_coef = coefficient_step(problem, u_drop, psi, M, opts.coef).u_plus;
      } catch (const SolverStallError& e) {
        return run.finish(SolveStatus::Stalled, u_drop, e.what());
      }
    }
    const DualState coef_state(problem, u_coef);
    const double J_coef = coef_state.objective();
    run.record(k, 0, J_coef, 0.0, eps_next, u_coef.size(), CallType::Coef, false);

    SparseMeasure u_inner = local_merge(coef_state, h.R);
    double J_inner = objective(problem, u_inner);
    double eps_inner = eps_next + (J_inner - J_coef) / (2.0 * M);
    run.record(k, 0, J_inner, 0.0, eps_inner, u_inner.size(), CallType::Merge, false);
    if (small(eps_inner)) return run.finish(SolveStatus::Converged, u_inner);

    // Candidates for the final selection; the inner loop overwrites the last two.
    SparseMeasure u_new = u_inner;
    SparseMeasure u_gcg = u_inner;
    for (int s = 1; !u_inner.empty(); ++s) {
      const FiniteParam z = minimal_representer(u_inner);
      const FiniteParam z_new = newton_step(problem, z);
      const Vec grad = finite_gradient(problem, z);
      const double grad_sq = grad.squaredNorm();
      u_gcg = u_inner;

      double eps_after = eps_inner;
      if (!accept_newton_progress(grad_sq, eps_inner, h.m_hi, C, M)) {
        const DualState inner_state(problem, u_inner);
        const StepReport rep = lgcg_step(inner_state, eps_inner, C, M, run.cache(), opts.search);
        run.book_lgcg(inner_state, rep, eps_inner);
        run.record(k, s, J_inner, rep.phi, rep.eps_out, u_inner.size(),
                   rep.lazy ? CallType::Lazy : CallType::Exact, false);
        u_gcg = rep.u_plus;
        eps_after = rep.eps_out;
        if (small(eps_after)) {
          return run.finish(SolveStatus::Converged,
                            better_of(u_inner, J_inner, u_gcg, objective(problem, u_gcg)));
        }
        if (!accept_newton_progress(grad_sq, eps_after, h.m_hi, C, M)) {
          eps_inner = eps_after;
          break;
        }
      }
      eps_inner = eps_after;
      if (!accept_newton_descent(grad, z, z_new, h.m_lo, M, problem)) break;
      u_new = measure_of(z_new);

      if (s % h.S == 0) {
        const SparseMeasure dropped = run.checked_drop(DualState(problem, u_new));
        const double J_dropped = objective(problem, dropped);
        u_inner = local_merge(DualState(problem, dropped), h.R);
        J_inner = objective(problem, u_inner);
        eps_inner += (J_inner - J_dropped) / (2.0 * M);
        run.record(k, s, J_inner, grad_sq, eps_inner, u_inner.size(), CallType::Merge, false);
      } else {
        u_inner = u_new;
        J_inner = objective(problem, u_inner);
        run.record(k, s, J_inner, grad_sq, eps_inner, u_inner.size(), CallType::Newton, false);
      }
      if (small(eps_inner)) return run.finish(SolveStatus::Converged, u_inner);
      if (run.out_of_time()) return run.finish(SolveStatus::NotConverged, u_inner, "time budget exhausted");
    }

    // u_{k+1} in argmin J over {u_coef, u_{k,1}, u_new, u_gcg}.
    const SparseMeasure u_first = local_merge(coef_state, h.R);
    const std::vector<const SparseMeasure*> cands{&u_coef, &u_first, &u_new, &u_gcg};
    std::vector<double> Js;
    for (const auto* c : cands) Js.push_back(objective(problem, *c));
    const std::size_t best = argmin_late(Js);
    const double best_J = Js[best];
    u = *cands[best];
    eps = std::min(eps_next, eps_inner);
    psi = std::max(psi / 2.0, psi_floor);
    run.update_bound(best_J);
  }
  return run.finish(SolveStatus::NotConverged, u, "max_outer reached");
}

// ---------------------------------------------------------------------------

Trace run_solver(const std::string& name, const Problem& problem, const SolverOptions& opts) {
  if (name == "pdap") return run_pdap(problem, opts);
  if (name == "lgcg") return run_lgcg(problem, opts);
  if (name == "lpdap") return run_lpdap(problem, opts);
  if (name == "nlgcg") return run_nlgcg(problem, opts);
  throw std::invalid_argument("unknown solver: " + name);
}

void estimate_residual(Trace& trace, double reference_J) {
  for (auto& r : trace.records) r.residual = std::max(r.J - reference_J, 0.0);
}

}  // namespace lazycg
