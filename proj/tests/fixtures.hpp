#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "lazycg/bench.hpp"

namespace fixtures {

using lazycg::Mat;
using lazycg::Vec;

inline const lazycg::BenchProblem& heat() {
  static const lazycg::BenchProblem b = lazycg::build_heat_problem();
  return b;
}

inline const lazycg::BenchProblem& signal() {
  static const lazycg::BenchProblem b = lazycg::build_signal_problem();
  return b;
}

inline Vec uniform_point(const lazycg::Box& box, std::mt19937_64& rng, double margin = 0.0) {
  Vec x(box.dim());
  for (Eigen::Index i = 0; i < box.dim(); ++i) {
    const double w = box.hi[i] - box.lo[i];
    std::uniform_real_distribution<double> d(box.lo[i] + margin * w, box.hi[i] - margin * w);
    x[i] = d(rng);
  }
  return x;
}

/// Atoms at uniform positions, weights uniform in +-[0.1, 1].
inline lazycg::SparseMeasure random_measure(const lazycg::Box& box, int atoms, std::mt19937_64& rng,
                                            double margin = 0.0) {
  std::uniform_real_distribution<double> mag(0.1, 1.0);
  std::bernoulli_distribution flip(0.5);
  std::vector<lazycg::Atom> a;
  for (int j = 0; j < atoms; ++j) a.push_back({uniform_point(box, rng, margin), flip(rng) ? mag(rng) : -mag(rng)});
  return lazycg::SparseMeasure::from_atoms(std::move(a));
}

/// Central differences of a scalar function.
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

/// Central differences of a vector function; column i holds d f / d x_i.
inline Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h) {
  const Vec f0 = f(x);
  Mat J(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    J.col(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return J;
}

/// |a - b| / max(|b|, floor) in the max norm.
inline double rel_err(const Mat& a, const Mat& b, double floor = 1e-8) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), floor);
}

}  // namespace fixtures
