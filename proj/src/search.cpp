#include "lazycg/search.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lazycg {

void SearchConfig::validate() const {
  if (grid_per_dim < 2) throw std::invalid_argument("search: grid_per_dim must be at least 2");
  if (max_local_iters < 1) throw std::invalid_argument("search: max_local_iters must be positive");
}

int default_grid_per_dim(Eigen::Index dim) { return dim == 1 ? 240 : 30; }

std::vector<Vec> grid_nodes(const Box& box, int per_dim) {
  const Eigen::Index d = box.dim();
  std::size_t total = 1;
  for (Eigen::Index k = 0; k < d; ++k) total *= static_cast<std::size_t>(per_dim);
  std::vector<Vec> nodes;
  nodes.reserve(total);
  const Vec step = (box.hi - box.lo) / static_cast<double>(per_dim - 1);
  for (std::size_t flat = 0; flat < total; ++flat) {
    Vec x(d);
    std::size_t rest = flat;
    for (Eigen::Index k = 0; k < d; ++k) {
      const auto i = static_cast<int>(rest % static_cast<std::size_t>(per_dim));
      rest /= static_cast<std::size_t>(per_dim);
      x[k] = (i == per_dim - 1) ? box.hi[k] : box.lo[k] + i * step[k];
    }
    nodes.push_back(std::move(x));
  }
  return nodes;
}

Vec local_ascent(const DualState& state, const Vec& x0, const SearchConfig& cfg,
                 const AscentVisitor& visit) {
  const Box& box = state.problem().domain;
  const Eigen::Index d = box.dim();
  Vec x = box.clip(x0);
  double px = state.p(x);
  const double s = px < 0.0 ? -1.0 : 1.0;
  Vec best = x;
  double best_val = std::abs(px);
  if (visit && visit(x)) return x;

  for (int it = 0; it < cfg.max_local_iters; ++it) {
    // Coordinates pinned at a face with the gradient pointing outward stay fixed.
    Vec g = s * state.grad_p(x);
    std::vector<Eigen::Index> free_idx;
    for (Eigen::Index i = 0; i < d; ++i) {
      const bool pinned = (x[i] <= box.lo[i] && g[i] < 0.0) || (x[i] >= box.hi[i] && g[i] > 0.0);
      if (pinned) {
        g[i] = 0.0;
      } else {
        free_idx.push_back(i);
      }
    }
    const double gnorm = g.norm();
    if (gnorm <= cfg.ascent_tol) break;
    const double f0 = s * px;

    std::optional<Vec> next;
    const auto nf = static_cast<Eigen::Index>(free_idx.size());
    const Mat H = s * state.hess_p(x);
    Mat Hf(nf, nf);
    Vec gf(nf);
    for (Eigen::Index a = 0; a < nf; ++a) {
      gf[a] = g[free_idx[static_cast<std::size_t>(a)]];
      for (Eigen::Index b = 0; b < nf; ++b) {
        Hf(a, b) = -H(free_idx[static_cast<std::size_t>(a)], free_idx[static_cast<std::size_t>(b)]);
      }
    }
    Eigen::LLT<Mat> llt(Hf);
    if (llt.info() == Eigen::Success) {
      const Vec step = llt.solve(gf);
      Vec trial = x;
      for (Eigen::Index a = 0; a < nf; ++a) trial[free_idx[static_cast<std::size_t>(a)]] += step[a];
      trial = box.clip(trial);
      if (s * state.p(trial) > f0) next = std::move(trial);
    }
    if (!next) {
      const double hnorm = H.norm();
      double t = hnorm > 0.0 ? 1.0 / hnorm : 0.1 * box.diameter() / gnorm;
      t = std::min(t, box.diameter() / gnorm);
      for (int halving = 0; halving <= 10; ++halving, t *= 0.5) {
        Vec trial = box.clip(x + t * g);
        if (s * state.p(trial) > f0) {
          next = std::move(trial);
          break;
        }
      }
    }
    if (!next) break;
    x = std::move(*next);
    px = state.p(x);
    if (std::abs(px) > best_val) {
      best_val = std::abs(px);
      best = x;
    }
    if (visit && visit(x)) return x;
  }
  return best;
}

std::vector<Vec> multistart_points(const Box& box, const std::vector<Vec>& support,
                                   const SearchConfig& cfg) {
  std::vector<Vec> starts = grid_nodes(box, cfg.grid_per_dim);
  starts.insert(starts.end(), support.begin(), support.end());
  return starts;
}

namespace {

struct Ascended {
  Vec x;
  double value;
};

void ascend_range(const DualState& state, const std::vector<Vec>& starts, std::size_t first,
                  std::size_t last, const SearchConfig& cfg, std::vector<Ascended>& out) {
  const auto count = static_cast<long>(last - first);
#pragma omp parallel for schedule(dynamic, 8) if (cfg.parallel)
  for (long i = 0; i < count; ++i) {
    const auto idx = first + static_cast<std::size_t>(i);
    Vec x = local_ascent(state, starts[idx], cfg);
    const double v = std::abs(state.p(x));
    out[idx] = {std::move(x), v};
  }
}

bool better(double candidate, double incumbent) { return candidate > incumbent; }

}  // namespace

Peak exact_max(const DualState& state, const std::vector<Vec>& support,
               const SearchConfig& cfg) {
  const auto starts = multistart_points(state.problem().domain, support, cfg);
  std::vector<Ascended> results(starts.size());
  ascend_range(state, starts, 0, starts.size(), cfg, results);
  Peak best{results.front().x, results.front().value, 0};
  for (std::size_t i = 1; i < results.size(); ++i) {
    if (better(results[i].value, best.value)) best = {results[i].x, results[i].value, i};
  }
  return best;
}

void CandidateCache::insert(const Vec& x) {
  if (capacity_ == 0) return;
  for (const auto& p : points_) {
    if (p.size() == x.size() && p == x) return;
  }
  points_.push_back(x);
  while (points_.size() > capacity_) points_.pop_front();
}

SparseMeasure dirac_direction(const DualState& state, const Vec& x, double M) {
  const double sgn = state.p(x) < 0.0 ? -1.0 : 1.0;
  return SparseMeasure::from_atoms({{x, sgn * M}});
}

namespace {

/// Cheap screen followed by the exact pairing evaluation.
struct LazyTest {
  const DualState& state;
  double M;
  double threshold;
  double offset;

  bool passes(const Vec& x) const {
    const double alpha = state.problem().alpha;
    const double quick = M * (std::abs(state.p(x)) - alpha) + offset;
    const double slack = 1e-12 * (std::abs(threshold) + std::abs(offset) + M);
    if (quick < threshold - slack) return false;
    return pairing_phi(state, dirac_direction(state, x, M)) >= threshold;
  }
};

LazyOutcome make_hit(const DualState& state, const Vec& x, double M) {
  LazyOutcome out;
  out.kind = LazyOutcome::Kind::LazyHit;
  out.direction = dirac_direction(state, x, M);
  out.x = x;
  out.phi = pairing_phi(state, out.direction);
  return out;
}

}  // namespace

LazyOutcome lazy_search(const DualState& state, double eps, double M,
                        const std::vector<Vec>& support, CandidateCache& cache,
                        const SearchConfig& cfg) {
  if (!(eps > 0.0)) throw std::invalid_argument("lazy_search: eps must be positive");
  const double threshold = M * eps;
  const double offset = state.pairing_offset();

  if (pairing_phi(state, SparseMeasure{}) >= threshold) {
    LazyOutcome out;
    out.kind = LazyOutcome::Kind::LazyHit;
    out.phi = pairing_phi(state, SparseMeasure{});
    return out;
  }

  const LazyTest test{state, M, threshold, offset};
  for (const auto& x : cache.points()) {
    if (state.problem().domain.contains(x) && test.passes(x)) return make_hit(state, x, M);
  }
  for (const auto& x : support) {
    if (test.passes(x)) {
      cache.insert(x);
      return make_hit(state, x, M);
    }
  }

  // Ascend from the most promising starts first.
  const auto nodes = multistart_points(state.problem().domain, support, cfg);
  std::vector<double> screen(nodes.size());
#pragma omp parallel for schedule(static) if (cfg.parallel)
  for (long i = 0; i < static_cast<long>(nodes.size()); ++i) {
    screen[static_cast<std::size_t>(i)] = std::abs(state.p(nodes[static_cast<std::size_t>(i)]));
  }
  std::vector<std::size_t> order(nodes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return screen[a] > screen[b]; });
  std::vector<Vec> starts;
  starts.reserve(nodes.size());
  for (std::size_t i : order) starts.push_back(nodes[i]);

  std::vector<Ascended> results(starts.size());
#ifdef _OPENMP
  const std::size_t threads = cfg.parallel ? static_cast<std::size_t>(omp_get_max_threads()) : 1;
#else
  const std::size_t threads = 1;
#endif
  const std::size_t chunk = cfg.parallel ? 16 * threads : 1;

  Peak best{starts.front(), -1.0, 0};
  for (std::size_t first = 0; first < starts.size(); first += chunk) {
    const std::size_t last = std::min(first + chunk, starts.size());
    ascend_range(state, starts, first, last, cfg, results);
    for (std::size_t i = first; i < last; ++i) {
      if (test.passes(results[i].x)) {
        cache.insert(results[i].x);
        return make_hit(state, results[i].x, M);
      }
      if (better(results[i].value, best.value)) best = {results[i].x, results[i].value, i};
    }
  }

  LazyOutcome out;
  out.kind = LazyOutcome::Kind::Exact;
  out.peak = best.value;
  out.x = best.x;
  if (best.value >= state.problem().alpha) {
    out.direction = dirac_direction(state, best.x, M);
    cache.insert(best.x);
  }
  out.phi = pairing_phi(state, out.direction);
  return out;
}

Peak brute_force_max(const DualState& state, int per_dim) {
  const auto nodes = grid_nodes(state.problem().domain, per_dim);
  std::vector<double> values(nodes.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(nodes.size()); ++i) {
    values[static_cast<std::size_t>(i)] = std::abs(state.p(nodes[static_cast<std::size_t>(i)]));
  }
  Peak best{nodes.front(), values.front(), 0};
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    if (values[i] > best.value) best = {nodes[i], values[i], i};
  }
  return best;
}

}  // namespace lazycg
