#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace lazycg {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Weights with magnitude below this are treated as zero.
inline constexpr double kWeightFloor = 1e-12;

struct Atom {
  Vec x;
  double w = 0.0;
};

/// Finite signed sum of Dirac masses, sum_j w_j delta_{x_j}.
///
/// Atoms keep insertion order and positions are pairwise distinct under exact
/// coordinate equality. Construction through `from_atoms` merges duplicates
/// and prunes weights below `kWeightFloor`.
class SparseMeasure {
 public:
  SparseMeasure() = default;

  static SparseMeasure from_atoms(std::vector<Atom> atoms,
                                  double floor = kWeightFloor);

  const std::vector<Atom>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }
  const Atom& operator[](std::size_t i) const { return atoms_[i]; }

  std::vector<Vec> support() const;

  /// Index of the atom located exactly at x, or -1.
  long find(const Vec& x) const;

  SparseMeasure pruned(double floor = kWeightFloor) const;
  SparseMeasure scaled(double factor) const;

  bool operator==(const SparseMeasure& other) const;

 private:
  std::vector<Atom> atoms_;
};

/// Position-weight parametrization z = (x, lambda) of a sparse measure.
struct FiniteParam {
  Mat positions;  // N x d
  Vec weights;    // N

  std::size_t count() const { return static_cast<std::size_t>(weights.size()); }
  std::size_t dim() const { return static_cast<std::size_t>(positions.cols()); }
  Vec position(std::size_t j) const { return positions.row(static_cast<Eigen::Index>(j)).transpose(); }
};

double total_variation(const SparseMeasure& u);

SparseMeasure restrict(const SparseMeasure& u,
                       const std::function<bool(const Vec&)>& keep);

/// Signed mass of the atoms strictly inside the open Euclidean ball.
double ball_mass(const SparseMeasure& u, const Vec& center, double radius);

SparseMeasure convex_combine(const SparseMeasure& u, const SparseMeasure& v,
                             double eta, double floor = kWeightFloor);

/// Throws std::invalid_argument for the zero measure.
FiniteParam minimal_representer(const SparseMeasure& u);

SparseMeasure measure_of(const FiniteParam& z);

}  // namespace lazycg
