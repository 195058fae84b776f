#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "lazycg/search.hpp"

namespace lazycg::reference {

Peak exact_max(const DualState& state, const std::vector<Vec>& support,
               const SearchConfig& cfg) {
  const auto starts = multistart_points(state.problem().domain, support, cfg);
  Peak best{starts.front(), -1.0, 0};
  for (std::size_t i = 0; i < starts.size(); ++i) {
    Vec x = local_ascent(state, starts[i], cfg);
    const double v = std::abs(state.p(x));
    if (v > best.value) best = {std::move(x), v, i};
  }
  return best;
}

LazyOutcome lazy_search(const DualState& state, double eps, double M,
                        const std::vector<Vec>& support, CandidateCache& cache,
                        const SearchConfig& cfg) {
  if (!(eps > 0.0)) throw std::invalid_argument("lazy_search: eps must be positive");
  const double threshold = M * eps;

  LazyOutcome out;
  out.phi = pairing_phi(state, SparseMeasure{});
  if (out.phi >= threshold) {
    out.kind = LazyOutcome::Kind::LazyHit;
    return out;
  }

  auto hit = [&](const Vec& x) {
    return pairing_phi(state, dirac_direction(state, x, M)) >= threshold;
  };
  auto lazy_at = [&](const Vec& x) {
    LazyOutcome o;
    o.kind = LazyOutcome::Kind::LazyHit;
    o.direction = dirac_direction(state, x, M);
    o.x = x;
    o.phi = pairing_phi(state, o.direction);
    cache.insert(x);
    return o;
  };

  for (const auto& x : cache.points()) {
    if (state.problem().domain.contains(x) && hit(x)) return lazy_at(x);
  }
  for (const auto& x : support) {
    if (hit(x)) return lazy_at(x);
  }

  const auto nodes = multistart_points(state.problem().domain, support, cfg);
  std::vector<double> screen;
  for (const auto& x : nodes) screen.push_back(std::abs(state.p(x)));
  std::vector<std::size_t> order(nodes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return screen[a] > screen[b]; });

  Peak best{nodes.front(), -1.0, 0};
  for (std::size_t i = 0; i < order.size(); ++i) {
    Vec x = local_ascent(state, nodes[order[i]], cfg);
    if (hit(x)) return lazy_at(x);
    const double v = std::abs(state.p(x));
    if (v > best.value) best = {std::move(x), v, i};
  }

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

}  // namespace lazycg::reference
