#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include "lazycg/model.hpp"

namespace lazycg {

struct SearchConfig {
  int grid_per_dim = 30;
  int max_local_iters = 5;
  double ascent_tol = 1e-10;
  std::size_t cache_size = 64;
  /// Multistart sweeps run under OpenMP when true.
  bool parallel = true;

  void validate() const;
};

/// Default grid resolution per spatial dimension (30 in 2D, 240 in 1D).
int default_grid_per_dim(Eigen::Index dim);

/// Equally spaced nodes including the box faces, lexicographic order with the
/// first coordinate varying fastest.
std::vector<Vec> grid_nodes(const Box& box, int per_dim);

/// Called on every ascent iterate; returning true stops the ascent there.
using AscentVisitor = std::function<bool(const Vec&)>;

/// Newton ascent on s * p_u with s = sign p_u(x0), clipped to the box.
///
/// Returns the visited iterate with the largest |p_u|, or the first iterate
/// accepted by `visit`.
Vec local_ascent(const DualState& state, const Vec& x0, const SearchConfig& cfg,
                 const AscentVisitor& visit = {});

struct Peak {
  Vec x;
  double value = 0.0;  // |p_u(x)|
  std::size_t start = 0;
};

/// Start points of the multistart sweep: grid nodes, then support points.
std::vector<Vec> multistart_points(const Box& box, const std::vector<Vec>& support,
                                   const SearchConfig& cfg);

Peak exact_max(const DualState& state, const std::vector<Vec>& support,
               const SearchConfig& cfg);

/// Bounded FIFO of points that produced lazy or exact insertions.
class CandidateCache {
 public:
  explicit CandidateCache(std::size_t capacity = 64) : capacity_(capacity) {}

  void insert(const Vec& x);
  const std::deque<Vec>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }

 private:
  std::size_t capacity_;
  std::deque<Vec> points_;
};

struct LazyOutcome {
  enum class Kind { LazyHit, Exact };

  Kind kind = Kind::Exact;
  SparseMeasure direction;
  /// Insertion point; empty for the zero direction.
  std::optional<Vec> x;
  /// phi(u, direction); equals the dual gap for an exact result.
  double phi = 0.0;
  /// |p_u| at the best point of the sweep (exact results only).
  double peak = 0.0;

  bool lazy() const { return kind == Kind::LazyHit; }
};

/// M sign(p_u(x)) delta_x.
SparseMeasure dirac_direction(const DualState& state, const Vec& x, double M);

/// Finds a direction with phi(u, v) >= M eps, falling back to the exact
/// maximizer of |p_u| when none exists.
LazyOutcome lazy_search(const DualState& state, double eps, double M,
                        const std::vector<Vec>& support, CandidateCache& cache,
                        const SearchConfig& cfg);

/// Brute-force maximization of |p_u| over a uniform grid (test oracle).
Peak brute_force_max(const DualState& state, int per_dim);

}  // namespace lazycg

namespace lazycg::reference {

/// Single-threaded multistart kept as the baseline for the OpenMP kernels.
Peak exact_max(const DualState& state, const std::vector<Vec>& support,
               const SearchConfig& cfg);

LazyOutcome lazy_search(const DualState& state, double eps, double M,
                        const std::vector<Vec>& support, CandidateCache& cache,
                        const SearchConfig& cfg);

}  // namespace lazycg::reference
