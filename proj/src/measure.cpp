#include "lazycg/measure.hpp"

#include <cmath>

namespace lazycg {

namespace {

bool same_position(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

}  // namespace

SparseMeasure SparseMeasure::from_atoms(std::vector<Atom> atoms, double floor) {
  SparseMeasure out;
  out.atoms_.reserve(atoms.size());
  for (auto& a : atoms) {
    const long at = out.find(a.x);
    if (at >= 0) {
      out.atoms_[static_cast<std::size_t>(at)].w += a.w;
    } else {
      out.atoms_.push_back(std::move(a));
    }
  }
  return out.pruned(floor);
}

std::vector<Vec> SparseMeasure::support() const {
  std::vector<Vec> pts;
  pts.reserve(atoms_.size());
  for (const auto& a : atoms_) pts.push_back(a.x);
  return pts;
}

long SparseMeasure::find(const Vec& x) const {
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    if (same_position(atoms_[i].x, x)) return static_cast<long>(i);
  }
  return -1;
}

SparseMeasure SparseMeasure::pruned(double floor) const {
  SparseMeasure out;
  out.atoms_.reserve(atoms_.size());
  for (const auto& a : atoms_) {
    if (std::abs(a.w) >= floor && a.w != 0.0) out.atoms_.push_back(a);
  }
  return out;
}

SparseMeasure SparseMeasure::scaled(double factor) const {
  std::vector<Atom> atoms = atoms_;
  for (auto& a : atoms) a.w *= factor;
  return from_atoms(std::move(atoms));
}

bool SparseMeasure::operator==(const SparseMeasure& other) const {
  if (atoms_.size() != other.atoms_.size()) return false;
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    if (atoms_[i].w != other.atoms_[i].w) return false;
    if (!same_position(atoms_[i].x, other.atoms_[i].x)) return false;
  }
  return true;
}

double total_variation(const SparseMeasure& u) {
  double tv = 0.0;
  for (const auto& a : u.atoms()) tv += std::abs(a.w);
  return tv;
}

SparseMeasure restrict(const SparseMeasure& u,
                       const std::function<bool(const Vec&)>& keep) {
  std::vector<Atom> kept;
  for (const auto& a : u.atoms()) {
    if (keep(a.x)) kept.push_back(a);
  }
  return SparseMeasure::from_atoms(std::move(kept), 0.0);
}

double ball_mass(const SparseMeasure& u, const Vec& center, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("ball_mass: radius must be positive");
  double mass = 0.0;
  for (const auto& a : u.atoms()) {
    if ((a.x - center).norm() < radius) mass += a.w;
  }
  return mass;
}

SparseMeasure convex_combine(const SparseMeasure& u, const SparseMeasure& v,
                             double eta, double floor) {
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw std::invalid_argument("convex_combine: eta outside [0,1]");
  }
  if (eta == 0.0) return u;
  if (eta == 1.0) return v;
  std::vector<Atom> atoms;
  atoms.reserve(u.size() + v.size());
  for (const auto& a : u.atoms()) atoms.push_back({a.x, (1.0 - eta) * a.w});
  for (const auto& a : v.atoms()) atoms.push_back({a.x, eta * a.w});
  return SparseMeasure::from_atoms(std::move(atoms), floor);
}

FiniteParam minimal_representer(const SparseMeasure& u) {
  if (u.empty()) throw std::invalid_argument("no representer of the zero measure");
  const auto n = static_cast<Eigen::Index>(u.size());
  const auto d = u[0].x.size();
  FiniteParam z{Mat(n, d), Vec(n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& a = u[static_cast<std::size_t>(j)];
    z.positions.row(j) = a.x.transpose();
    z.weights[j] = a.w;
  }
  return z;
}

SparseMeasure measure_of(const FiniteParam& z) {
  std::vector<Atom> atoms;
  atoms.reserve(z.count());
  for (std::size_t j = 0; j < z.count(); ++j) {
    atoms.push_back({z.position(j), z.weights[static_cast<Eigen::Index>(j)]});
  }
  return SparseMeasure::from_atoms(std::move(atoms));
}

}  // namespace lazycg
