#include <doctest.h>

#include "fixtures.hpp"
#include "lazycg/search.hpp"

using namespace lazycg;

TEST_CASE("grid nodes span the box with the first coordinate fastest") {
  Box box{Vec::Zero(2), Vec::Ones(2)};
  const auto nodes = grid_nodes(box, 4);
  REQUIRE(nodes.size() == 16);
  CHECK(nodes[0] == Vec::Zero(2));
  CHECK(nodes[1][0] == doctest::Approx(1.0 / 3.0));
  CHECK(nodes[1][1] == 0.0);
  CHECK(nodes[15] == Vec::Ones(2));
}

TEST_CASE("search config validation") {
  SearchConfig cfg;
  cfg.grid_per_dim = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.grid_per_dim = 2;
  cfg.max_local_iters = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("candidate cache is a bounded FIFO without duplicates") {
  CandidateCache cache(2);
  cache.insert(Vec::Constant(1, 1.0));
  cache.insert(Vec::Constant(1, 1.0));
  CHECK(cache.size() == 1);
  cache.insert(Vec::Constant(1, 2.0));
  cache.insert(Vec::Constant(1, 3.0));
  REQUIRE(cache.size() == 2);
  CHECK(cache.points().front()[0] == 2.0);
  CandidateCache off(0);
  off.insert(Vec::Constant(1, 1.0));
  CHECK(off.size() == 0);
}

TEST_CASE("exact maximization agrees with a brute-force grid at u = 0") {
  struct Case {
    const BenchProblem* bench;
    int per_dim;
  };
  for (const Case c : {Case{&fixtures::signal(), 2001}, Case{&fixtures::heat(), 501}}) {
    const Problem& P = c.bench->problem;
    CAPTURE(c.bench->name);
    const DualState state(P, SparseMeasure{});
    SearchConfig cfg;
    cfg.grid_per_dim = default_grid_per_dim(P.dim());
    const Peak fast = exact_max(state, {}, cfg);
    const Peak brute = brute_force_max(state, c.per_dim);
    // The raw grid value carries the grid's own discretization error; polish
    // the grid winner before comparing values.
    SearchConfig polish = cfg;
    polish.max_local_iters = 50;
    const Vec refined = local_ascent(state, brute.x, polish);
    CHECK(std::abs(fast.value - std::abs(state.p(refined))) <= 1e-6 * std::max(1.0, brute.value));
    CHECK(fast.value >= brute.value - 1e-12);
    const Vec cell = (P.domain.hi - P.domain.lo) / (c.per_dim - 1);
    CHECK(((fast.x - brute.x).cwiseAbs().array() <= cell.array()).all());
  }
}

TEST_CASE("local ascent never decreases |p|") {
  const Problem& P = fixtures::heat().problem;
  std::mt19937_64 rng(4);
  const DualState state(P, fixtures::random_measure(P.domain, 3, rng));
  SearchConfig cfg;
  for (int i = 0; i < 20; ++i) {
    const Vec x0 = fixtures::uniform_point(P.domain, rng);
    const Vec x = local_ascent(state, x0, cfg);
    CHECK(P.domain.contains(x));
    CHECK(std::abs(state.p(x)) >= std::abs(state.p(x0)));
  }
}

TEST_CASE("lazy hits meet the threshold exactly") {
  for (const auto* b : {&fixtures::heat(), &fixtures::signal()}) {
    const Problem& P = b->problem;
    CAPTURE(b->name);
    std::mt19937_64 rng(29);
    SearchConfig cfg;
    cfg.grid_per_dim = default_grid_per_dim(P.dim());
    for (int i = 0; i < 10; ++i) {
      const auto u = fixtures::random_measure(P.domain, 2, rng);
      const DualState state(P, u);
      const double M = state.objective() / P.alpha;
      const Peak peak = exact_max(state, u.support(), cfg);
      const double gap = global_gap(state, peak.x, M);
      CandidateCache cache;
      const double eps = (0.05 + 0.1 * i) * gap / M;
      const LazyOutcome out = lazy_search(state, eps, M, u.support(), cache, cfg);
      REQUIRE(out.lazy());
      CHECK(pairing_phi(state, out.direction) >= M * eps);
      CHECK(out.phi == pairing_phi(state, out.direction));
    }
  }
}

TEST_CASE("an unreachable threshold yields the exact gap") {
  const Problem& P = fixtures::signal().problem;
  std::mt19937_64 rng(31);
  const auto u = fixtures::random_measure(P.domain, 3, rng);
  const DualState state(P, u);
  SearchConfig cfg;
  cfg.grid_per_dim = default_grid_per_dim(1);
  const double M = state.objective() / P.alpha;
  const Peak peak = exact_max(state, u.support(), cfg);
  const double gap = global_gap(state, peak.x, M);
  CandidateCache cache;
  const LazyOutcome out = lazy_search(state, 2.0 * gap / M, M, u.support(), cache, cfg);
  CHECK_FALSE(out.lazy());
  CHECK(out.phi == doctest::Approx(gap).epsilon(1e-12));
  CHECK(out.peak == doctest::Approx(peak.value).epsilon(1e-12));
  CHECK_THROWS_AS(lazy_search(state, 0.0, M, u.support(), cache, cfg), std::invalid_argument);
}

TEST_CASE("parallel kernels reproduce the serial reference") {
  for (const auto* b : {&fixtures::heat(), &fixtures::signal()}) {
    const Problem& P = b->problem;
    CAPTURE(b->name);
    std::mt19937_64 rng(37);
    SearchConfig par;
    par.grid_per_dim = default_grid_per_dim(P.dim());
    SearchConfig ser = par;
    ser.parallel = false;
    for (int i = 0; i < 5; ++i) {
      const auto u = fixtures::random_measure(P.domain, 3, rng);
      const DualState state(P, u);
      const Peak a = exact_max(state, u.support(), par);
      const Peak r = reference::exact_max(state, u.support(), ser);
      CHECK(a.x == r.x);
      CHECK(a.value == r.value);

      const double M = state.objective() / P.alpha;
      const double gap = global_gap(state, a.x, M);
      for (double frac : {0.3, 0.9, 2.0}) {
        CandidateCache ca, cr;
        const auto la = lazy_search(state, frac * gap / M, M, u.support(), ca, par);
        const auto lr = reference::lazy_search(state, frac * gap / M, M, u.support(), cr, ser);
        CHECK(la.kind == lr.kind);
        CHECK(la.direction == lr.direction);
        CHECK(la.phi == lr.phi);
      }
    }
  }
}
