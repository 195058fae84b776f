#include <doctest.h>

#include "fixtures.hpp"
#include "lazycg/steps.hpp"

using namespace lazycg;

namespace {

SearchConfig search_for(const Problem& P) {
  SearchConfig cfg;
  cfg.grid_per_dim = default_grid_per_dim(P.dim());
  return cfg;
}

/// Copy of P whose data is K applied to `truth`.
Problem with_truth(const Problem& P, const SparseMeasure& truth) {
  Problem Q = P;
  Q.fidelity = std::make_shared<QuadraticFidelity>(forward(P, truth));
  return Q;
}

}  // namespace

TEST_CASE("curvature constant") {
  const Problem& P = fixtures::heat().problem;
  CHECK(curvature_constant(P, 2.0) == doctest::Approx(4.0 * 1.0 * 4.0 * 6.26 * 6.26));
}

TEST_CASE("lgcg step descent bound on randomized pairs") {
  int checked = 0;
  for (const auto* b : {&fixtures::heat(), &fixtures::signal()}) {
    const Problem& P = b->problem;
    const SearchConfig cfg = search_for(P);
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> frac(0.01, 1.5);
    for (int i = 0; i < 50; ++i) {
      const auto u = fixtures::random_measure(P.domain, 1 + i % 4, rng);
      const DualState state(P, u);
      const double M = std::max(state.objective() / P.alpha, total_variation(u));
      const double C = curvature_constant(P, M);
      const double gap = global_gap(state, exact_max(state, u.support(), cfg).x, M);
      const double eps = frac(rng) * gap / M;
      CandidateCache cache;
      const StepReport rep = lgcg_step(state, eps, C, M, cache, cfg);
      const double change = objective(P, rep.u_plus) - state.objective();
      CAPTURE(b->name);
      CAPTURE(i);
      CHECK(change <= lgcg_descent_bound(rep.eps_out, C, M) + 1e-13 * std::max(1.0, state.objective()));
      if (rep.lazy) {
        CHECK(rep.eps_out == eps);
        CHECK(rep.eta == doctest::Approx(std::min(1.0, M * eps / C)));
        CHECK(rep.phi >= M * eps);
      } else {
        CHECK(rep.eps_out == doctest::Approx(rep.phi / (2.0 * M)));
        CHECK(rep.eps_out < eps);
      }
      ++checked;
    }
  }
  CHECK(checked == 100);
}

TEST_CASE("lgcg step at a minimizer returns eps = 0") {
  Problem P = fixtures::signal().problem;
  P.fidelity = std::make_shared<QuadraticFidelity>(Vec::Zero(P.kernel->obs_dim()));
  const DualState state(P, SparseMeasure{});
  CandidateCache cache;
  const StepReport rep = lgcg_step(state, 1.0, 1.0, 1.0, cache, search_for(P));
  CHECK_FALSE(rep.lazy);
  CHECK(rep.eps_out == 0.0);
  CHECK(rep.u_plus.empty());
}

TEST_CASE("lazy call with M eps >= C jumps to the direction") {
  const Problem& P = fixtures::heat().problem;
  std::mt19937_64 rng(43);
  const DualState state(P, fixtures::random_measure(P.domain, 2, rng));
  const double M = state.objective() / P.alpha;
  CandidateCache cache;
  const double gap = global_gap(state, exact_max(state, state.measure().support(), search_for(P)).x, M);
  const double eps = 0.5 * gap / M;
  const StepReport rep = lgcg_step(state, eps, 0.5 * M * eps, M, cache, search_for(P));
  REQUIRE(rep.lazy);
  CHECK(rep.eta == 1.0);
  CHECK(rep.u_plus == rep.direction);
}

TEST_CASE("lgcg descent bound branches") {
  CHECK(lgcg_descent_bound(0.5, 4.0, 2.0) == doctest::Approx(-0.125));
  CHECK(lgcg_descent_bound(3.0, 4.0, 2.0) == doctest::Approx(2.0 - 6.0));
}

TEST_CASE("drop step never increases J") {
  for (const auto* b : {&fixtures::heat(), &fixtures::signal()}) {
    const Problem& P = b->problem;
    std::mt19937_64 rng(47);
    for (int i = 0; i < 20; ++i) {
      const DualState state(P, fixtures::random_measure(P.domain, 6, rng));
      const SparseMeasure d = drop_step(state, P.params.sigma);
      CHECK(objective(P, d) <= state.objective());
      CHECK(d.size() <= state.measure().size());
    }
  }
}

TEST_CASE("drop set flags wrong signs and weak certificates") {
  const BenchProblem& b = fixtures::signal();
  const Problem& P = b.problem;
  // Near the truth p_u has the sign of each true weight; flip one atom.
  const SparseMeasure u = SparseMeasure::from_atoms(
      {{b.truth[0].x, 0.5 * b.truth[0].w}, {b.truth[1].x, -0.5 * b.truth[1].w}});
  const DualState state(P, u);
  const auto dropped = drop_set(state, P.params.sigma);
  REQUIRE(dropped.size() == 1);
  CHECK(dropped[0] == b.truth[1].x);
}

TEST_CASE("one-atom coefficient step is a soft threshold") {
  const BenchProblem& b = fixtures::signal();
  const Problem& P = b.problem;
  const Vec y = dynamic_cast<const QuadraticFidelity&>(*P.fidelity).target();
  for (std::size_t j = 0; j < b.truth.size(); ++j) {
    const Vec x = b.truth[j].x;
    const Vec k = P.kernel->value(x);
    const double s = b.truth[j].w < 0.0 ? -1.0 : 1.0;
    const double expected = std::max(0.0, s * k.dot(y) - P.alpha) / k.squaredNorm();
    REQUIRE(expected > 0.0);
    const auto u = SparseMeasure::from_atoms({{x, s * 0.01}});
    const auto res = coefficient_step(P, u, 1e-11, 10.0);
    REQUIRE(res.u_plus.size() == 1);
    CHECK(std::abs(std::abs(res.u_plus[0].w) - expected) <= 1e-10);
    CHECK(res.u_plus[0].w * s > 0.0);
  }
}

TEST_CASE("coefficient step reaches its certificate without increasing J") {
  for (const auto* b : {&fixtures::heat(), &fixtures::signal()}) {
    const Problem& P = b->problem;
    std::mt19937_64 rng(53);
    for (int i = 0; i < 10; ++i) {
      const auto u = fixtures::random_measure(P.domain, 2 + i % 5, rng);
      const double M = objective(P, u) / P.alpha;
      const double psi = 1e-10;
      const auto res = coefficient_step(P, u, psi, M);
      CHECK(res.certificate <= psi);
      CHECK(objective(P, res.u_plus) <= objective(P, u) + 1e-14);
      const auto coef = PositiveCoefState::from_measure(P, u);
      CHECK(positive_gap(coef, res.w, M) == doctest::Approx(res.certificate));
    }
  }
}

TEST_CASE("coefficient solver failures") {
  const Problem& P = fixtures::heat().problem;
  std::mt19937_64 rng(59);
  const auto u = fixtures::random_measure(P.domain, 4, rng);
  CoefOptions none;
  none.max_iters = 0;
  CHECK_THROWS_AS(coefficient_step(P, u, 1e-14, 10.0, none), SolverStallError);
  none.allow_stall = true;
  CHECK_NOTHROW(coefficient_step(P, u, 1e-14, 10.0, none));
  CHECK_THROWS_AS(coefficient_step(P, SparseMeasure{}, 1e-10, 10.0), std::invalid_argument);
  const auto coef = PositiveCoefState::from_measure(P, u);
  CHECK_THROWS_AS(positive_gap(coef, -Vec::Ones(coef.size()), 1.0), std::invalid_argument);
}

TEST_CASE("local merge lumps mass onto the best certificate point") {
  const BenchProblem& b = fixtures::heat();
  const Problem& P = b.problem;
  const double R = P.params.R;
  Vec near = b.truth[0].x;
  near[0] += 0.5 * R;
  const SparseMeasure u = SparseMeasure::from_atoms(
      {{b.truth[0].x, 0.6}, {near, 0.3}, {b.truth[1].x, -0.7}});
  const DualState state(P, u);
  const SparseMeasure m = local_merge(state, R);
  REQUIRE(m.size() == 2);
  const Vec keep = std::abs(state.p(b.truth[0].x)) >= std::abs(state.p(near)) ? b.truth[0].x : near;
  const long at = m.find(keep);
  REQUIRE(at >= 0);
  CHECK(m[static_cast<std::size_t>(at)].w == doctest::Approx(0.9));
  CHECK(m.find(b.truth[1].x) >= 0);
  CHECK(total_variation(m) == doctest::Approx(total_variation(u)));
}

TEST_CASE("lsi improvers stay within 2R of the support") {
  const BenchProblem& b = fixtures::heat();
  const Problem& P = b.problem;
  std::vector<Atom> shifted;
  for (const auto& a : b.truth.atoms()) {
    Vec x = a.x;
    x[1] += 0.8 * P.params.R;
    shifted.push_back({x, 0.9 * a.w});
  }
  const SparseMeasure u = SparseMeasure::from_atoms(std::move(shifted));
  const DualState state(P, u);
  const double M = state.objective() / P.alpha + total_variation(u);
  const LsiStepResult r = lsi_step(state, M, search_for(P));
  for (const auto& x : r.improvers) {
    double nearest = 1e300;
    for (const auto& s : u.support()) nearest = std::min(nearest, (x - s).norm());
    CHECK(nearest < 2.0 * P.params.R);
  }
  CHECK(r.eta >= 0.0);
  CHECK(r.eta <= 1.0);
}

TEST_CASE("newton step solves the local quadratic model") {
  for (const auto* b : {&fixtures::heat(), &fixtures::signal()}) {
    const Problem P = with_truth(b->problem, b->truth);
    std::vector<Atom> perturbed;
    for (const auto& a : b->truth.atoms()) {
      perturbed.push_back({a.x + Vec::Constant(a.x.size(), 1e-3 * (P.domain.hi[0] - P.domain.lo[0])), 1.05 * a.w});
    }
    const FiniteParam z = minimal_representer(SparseMeasure::from_atoms(std::move(perturbed)));
    const FiniteParam zp = newton_step(P, z);
    const Vec g = finite_gradient(P, z);
    const Mat H = finite_hessian(P, z);
    const Vec model_grad = g + H * (flatten(zp) - flatten(z));
    CAPTURE(b->name);
    CHECK(model_grad.norm() <= 1e-10 * std::max(1.0, g.norm()));
  }
}

TEST_CASE("newton iteration converges quadratically near a nondegenerate minimizer") {
  const BenchProblem& b = fixtures::signal();
  const Problem P = with_truth(b.problem, b.truth);
  std::vector<Atom> start;
  for (const auto& a : b.truth.atoms()) start.push_back({a.x + Vec::Constant(1, 2e-3), 0.95 * a.w});
  FiniteParam z = minimal_representer(SparseMeasure::from_atoms(std::move(start)));
  std::vector<double> norms{finite_gradient(P, z).norm()};
  for (int i = 0; i < 4; ++i) {
    z = newton_step(P, z);
    norms.push_back(finite_gradient(P, z).norm());
  }
  CHECK(norms[1] < norms[0]);
  CHECK(norms[2] <= 10.0 * norms[1] * norms[1] / norms[0] + 1e-12);
  CHECK(norms.back() <= 1e-10);
}

TEST_CASE("newton step refuses a singular hessian") {
  // Two equal halves of an exact fit: moving mass between them is free.
  const Problem base = fixtures::signal().problem;
  const Problem P = with_truth(base, SparseMeasure::from_atoms({{Vec::Constant(1, 7.0), 0.6}}));
  FiniteParam z{Mat::Constant(2, 1, 7.0), Vec::Constant(2, 0.3)};
  const FiniteParam zp = newton_step(P, z);
  CHECK(zp.positions == z.positions);
  CHECK(zp.weights == z.weights);
}

TEST_CASE("newton progress threshold is continuous at M eps = C") {
  const double C = 3.7, M = 2.3, m_hi = 0.1;
  const double eps = C / M;
  const double at = newton_progress_threshold(eps, m_hi, C, M);
  const double lo = newton_progress_threshold(eps * (1.0 - 1e-15), m_hi, C, M);
  const double hi = newton_progress_threshold(eps * (1.0 + 1e-15), m_hi, C, M);
  CHECK(std::abs(at - C / (2.0 * m_hi)) <= 1e-12 * at);
  CHECK(std::abs(lo - hi) <= 1e-12 * at);
  CHECK(accept_newton_progress(at, eps, m_hi, C, M));
  CHECK_FALSE(accept_newton_progress(0.99 * at, eps, m_hi, C, M));
  CHECK_THROWS_AS(accept_newton_progress(1.0, -1.0, m_hi, C, M), std::invalid_argument);
}

TEST_CASE("newton descent test") {
  const BenchProblem& b = fixtures::signal();
  const Problem P = with_truth(b.problem, b.truth);
  std::vector<Atom> start;
  for (const auto& a : b.truth.atoms()) start.push_back({a.x + Vec::Constant(1, 2e-3), 0.95 * a.w});
  const FiniteParam z = minimal_representer(SparseMeasure::from_atoms(std::move(start)));
  const Vec g = finite_gradient(P, z);
  const FiniteParam zp = newton_step(P, z);
  CHECK(accept_newton_descent(g, z, zp, P.params.m_lo, 100.0, P));
  CHECK_FALSE(accept_newton_descent(g, z, zp, P.params.m_lo, 0.1, P));
  FiniteParam outside = zp;
  outside.positions(0, 0) = -1.0;
  CHECK_FALSE(accept_newton_descent(g, z, outside, P.params.m_lo, 100.0, P));
  CHECK_FALSE(accept_newton_descent(g, z, z, P.params.m_lo, 100.0, P));
}
