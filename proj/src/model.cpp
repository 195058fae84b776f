#include "lazycg/model.hpp"

#include <cmath>
#include <numbers>

namespace lazycg {

namespace {

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

bool Box::contains(const Vec& x) const {
  if (x.size() != lo.size()) return false;
  return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
}

Vec Box::clip(const Vec& x) const { return x.cwiseMax(lo).cwiseMin(hi); }

Mat Kernel::hessian_contract(const Vec& x, const Vec& q) const {
  const Eigen::Index d = dim();
  Vec flat = hessian(x) * q;
  return Eigen::Map<Mat>(flat.data(), d, d);
}

// ---------------------------------------------------------------------------

HeatKernel::HeatKernel(std::vector<Vec> sensors, double t) : t_(t) {
  if (sensors.empty()) throw std::invalid_argument("HeatKernel: no sensors");
  if (!(t > 0.0)) throw std::invalid_argument("HeatKernel: t must be positive");
  const auto d = sensors.front().size();
  sensors_.resize(static_cast<Eigen::Index>(sensors.size()), d);
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    sensors_.row(static_cast<Eigen::Index>(i)) = sensors[i].transpose();
  }
}

Vec HeatKernel::value(const Vec& x) const {
  const double amp = 1.0 / (4.0 * std::numbers::pi * t_);
  Vec k(obs_dim());
  for (Eigen::Index i = 0; i < obs_dim(); ++i) {
    const double r2 = (x.transpose() - sensors_.row(i)).squaredNorm();
    k[i] = amp * std::exp(-r2 / (4.0 * t_));
  }
  return k;
}

Mat HeatKernel::jacobian(const Vec& x) const {
  const Vec k = value(x);
  Mat jac(dim(), obs_dim());
  for (Eigen::Index i = 0; i < obs_dim(); ++i) {
    jac.col(i) = -k[i] / (2.0 * t_) * (x - sensors_.row(i).transpose());
  }
  return jac;
}

Mat HeatKernel::hessian(const Vec& x) const {
  const Eigen::Index d = dim();
  const Vec k = value(x);
  Mat hess(d * d, obs_dim());
  for (Eigen::Index i = 0; i < obs_dim(); ++i) {
    const Vec r = x - sensors_.row(i).transpose();
    Mat h = k[i] * (r * r.transpose() / (4.0 * t_ * t_) - Mat::Identity(d, d) / (2.0 * t_));
    hess.col(i) = Eigen::Map<Vec>(h.data(), d * d);
  }
  return hess;
}

Mat HeatKernel::hessian_contract(const Vec& x, const Vec& q) const {
  const Eigen::Index d = dim();
  const Vec k = value(x);
  Mat h = Mat::Zero(d, d);
  double diag = 0.0;
  for (Eigen::Index i = 0; i < obs_dim(); ++i) {
    const double c = q[i] * k[i];
    const Vec r = x - sensors_.row(i).transpose();
    h.noalias() += (c / (4.0 * t_ * t_)) * r * r.transpose();
    diag += c;
  }
  h.diagonal().array() -= diag / (2.0 * t_);
  return h;
}

// ---------------------------------------------------------------------------

SineKernel::SineKernel(Vec times) : times_(std::move(times)) {
  if (times_.size() == 0) throw std::invalid_argument("SineKernel: no time points");
}

Vec SineKernel::value(const Vec& x) const {
  const double two_pi = 2.0 * std::numbers::pi;
  return (two_pi * x[0] * times_).array().sin();
}

Mat SineKernel::jacobian(const Vec& x) const {
  const double two_pi = 2.0 * std::numbers::pi;
  Vec omega = two_pi * times_;
  Mat jac(1, times_.size());
  jac.row(0) = (omega.array() * (omega * x[0]).array().cos()).transpose();
  return jac;
}

Mat SineKernel::hessian(const Vec& x) const {
  const double two_pi = 2.0 * std::numbers::pi;
  Vec omega = two_pi * times_;
  Mat hess(1, times_.size());
  hess.row(0) = (-omega.array().square() * (omega * x[0]).array().sin()).transpose();
  return hess;
}

Mat SineKernel::hessian_contract(const Vec& x, const Vec& q) const {
  Mat h(1, 1);
  h(0, 0) = hessian(x).row(0).dot(q);
  return h;
}

// ---------------------------------------------------------------------------

void Problem::validate() const {
  if (!kernel || !fidelity) throw std::invalid_argument("problem: kernel and fidelity required");
  if (!(alpha > 0.0)) throw std::invalid_argument("problem: alpha must be positive");
  if (domain.lo.size() != domain.hi.size() || domain.lo.size() == 0) {
    throw std::invalid_argument("problem: malformed domain box");
  }
  if (!(domain.lo.array() < domain.hi.array()).all()) {
    throw std::invalid_argument("problem: degenerate domain box");
  }
  if (kernel->dim() != domain.dim()) throw std::invalid_argument("problem: kernel/domain dimension mismatch");
  const auto& h = params;
  const bool positive = h.gamma > 0 && h.theta > 0 && h.R > 0 && h.sigma > 0 && h.L > 0 &&
                        h.C_K > 0 && h.C_Kp > 0 && h.m_lo > 0 && h.m_hi > 0 && h.S > 0 &&
                        h.M >= 0;
  if (!positive) throw std::invalid_argument("problem: hyperparameters must be positive");
  if (!(h.sigma < alpha)) throw std::invalid_argument("problem: sigma must be below alpha");
  if (!(h.m_lo <= h.m_hi)) throw std::invalid_argument("problem: m_lo must not exceed m_hi");
}

Vec forward(const Problem& problem, const SparseMeasure& u) {
  Vec y = Vec::Zero(problem.kernel->obs_dim());
  for (const auto& a : u.atoms()) {
    if (!problem.domain.contains(a.x)) throw DomainError("forward: atom outside the domain");
    y.noalias() += a.w * problem.kernel->value(a.x);
  }
  return y;
}

double objective(const Problem& problem, const SparseMeasure& u) {
  return problem.fidelity->value(forward(problem, u)) + problem.alpha * total_variation(u);
}

// ---------------------------------------------------------------------------

DualState::DualState(const Problem& problem, SparseMeasure u)
    : problem_(&problem), u_(std::move(u)) {
  y_ = forward(problem, u_);
  q_ = problem.fidelity->gradient(y_);
  J_ = problem.fidelity->value(y_) + problem.alpha * total_variation(u_);
}

void DualState::check_domain(const Vec& x) const {
  if (!problem_->domain.contains(x)) throw DomainError("dual: point outside the domain");
}

double DualState::p(const Vec& x) const {
  check_domain(x);
  return -problem_->kernel->value(x).dot(q_);
}

Vec DualState::grad_p(const Vec& x) const {
  check_domain(x);
  return -(problem_->kernel->jacobian(x) * q_);
}

Mat DualState::hess_p(const Vec& x) const {
  check_domain(x);
  return -problem_->kernel->hessian_contract(x, q_);
}

double DualState::pairing_offset() const {
  const double alpha = problem_->alpha;
  double acc = 0.0;
  for (const auto& a : u_.atoms()) acc += std::abs(a.w) * (alpha - sign_of(a.w) * p(a.x));
  return acc;
}

double pairing_phi(const DualState& state, const SparseMeasure& v) {
  const double alpha = state.problem().alpha;
  double acc = state.pairing_offset();
  for (const auto& a : v.atoms()) acc += a.w * state.p(a.x) - alpha * std::abs(a.w);
  return acc;
}

double finite_gap(const DualState& state, const std::vector<Vec>& support, double M) {
  double peak = 0.0;
  for (const auto& x : support) peak = std::max(peak, std::abs(state.p(x)));
  const double excess = std::max(peak - state.problem().alpha, 0.0);
  return M * excess + state.pairing_offset();
}

double global_gap(const DualState& state, const Vec& xhat, double M) {
  const double excess = std::max(std::abs(state.p(xhat)) - state.problem().alpha, 0.0);
  return M * excess + state.pairing_offset();
}

// ---------------------------------------------------------------------------

Vec flatten(const FiniteParam& z) {
  const Eigen::Index n = z.weights.size();
  const Eigen::Index d = z.positions.cols();
  Vec flat(n * (d + 1));
  for (Eigen::Index j = 0; j < n; ++j) flat.segment(j * d, d) = z.positions.row(j).transpose();
  flat.tail(n) = z.weights;
  return flat;
}

FiniteParam unflatten(const Vec& flat, Eigen::Index n, Eigen::Index d) {
  FiniteParam z{Mat(n, d), flat.tail(n)};
  for (Eigen::Index j = 0; j < n; ++j) z.positions.row(j) = flat.segment(j * d, d).transpose();
  return z;
}

namespace {

Vec finite_image(const Problem& problem, const FiniteParam& z) {
  Vec y = Vec::Zero(problem.kernel->obs_dim());
  for (std::size_t j = 0; j < z.count(); ++j) {
    y.noalias() += z.weights[static_cast<Eigen::Index>(j)] * problem.kernel->value(z.position(j));
  }
  return y;
}

void require_nonzero(const FiniteParam& z) {
  for (Eigen::Index j = 0; j < z.weights.size(); ++j) {
    if (z.weights[j] == 0.0) throw DegenerateParameterError("finite objective: zero weight");
  }
}

}  // namespace

double finite_objective(const Problem& problem, const FiniteParam& z) {
  return problem.fidelity->value(finite_image(problem, z)) + problem.alpha * z.weights.lpNorm<1>();
}

Vec finite_gradient(const Problem& problem, const FiniteParam& z) {
  require_nonzero(z);
  const Eigen::Index n = z.weights.size();
  const Eigen::Index d = z.positions.cols();
  const Vec q = problem.fidelity->gradient(finite_image(problem, z));
  Vec g(n * (d + 1));
  for (Eigen::Index j = 0; j < n; ++j) {
    const Vec x = z.positions.row(j).transpose();
    const double lam = z.weights[j];
    g.segment(j * d, d) = lam * (problem.kernel->jacobian(x) * q);
    g[n * d + j] = problem.kernel->value(x).dot(q) + problem.alpha * sign_of(lam);
  }
  return g;
}

Mat finite_hessian(const Problem& problem, const FiniteParam& z) {
  require_nonzero(z);
  const Eigen::Index n = z.weights.size();
  const Eigen::Index d = z.positions.cols();
  const Eigen::Index m = problem.kernel->obs_dim();
  const Vec y = finite_image(problem, z);
  const Vec q = problem.fidelity->gradient(y);
  const Mat hf = problem.fidelity->hessian(y);

  // Jacobian of the forward image with respect to z.
  Mat dy(m, n * (d + 1));
  Mat h = Mat::Zero(n * (d + 1), n * (d + 1));
  for (Eigen::Index j = 0; j < n; ++j) {
    const Vec x = z.positions.row(j).transpose();
    const double lam = z.weights[j];
    const Mat jac = problem.kernel->jacobian(x);
    dy.block(0, j * d, m, d) = lam * jac.transpose();
    dy.col(n * d + j) = problem.kernel->value(x);

    h.block(j * d, j * d, d, d) = lam * problem.kernel->hessian_contract(x, q);
    const Vec mixed = jac * q;
    h.block(j * d, n * d + j, d, 1) = mixed;
    h.block(n * d + j, j * d, 1, d) = mixed.transpose();
  }
  h.noalias() += dy.transpose() * hf * dy;
  return 0.5 * (h + h.transpose());
}

}  // namespace lazycg
