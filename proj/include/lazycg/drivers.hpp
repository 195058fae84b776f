#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lazycg/steps.hpp"

namespace lazycg {

enum class CallType { Lazy, Exact, Newton, Merge, Drop, Coef, Recompute };

const char* to_string(CallType c);

struct SolverOptions {
  double tol = 1e-12;
  int max_outer = 10000;
  /// Wall-clock budget in seconds; zero disables it.
  double max_seconds = 0.0;
  /// Defaults to J(u_0) / (2M).
  std::optional<double> eps_init;
  /// Defaults to max(1, J(u_0)); PDAP uses it as its fixed tolerance,
  /// min(1e-14 max(1, J(u_0)), tol / 10) by default.
  std::optional<double> psi_init;
  bool dynamic_M = true;
  /// Divisor in M_k = J(u_k) / beta; defaults to alpha.
  std::optional<double> m_beta;
  SearchConfig search;
  CoefOptions coef;

  void validate() const;
};

struct TraceRecord {
  int k = 0;
  int s = 0;
  double time_s = 0.0;
  double J = 0.0;
  /// Gap or gap estimate attached to the record (Phi, phi(u, v), ...).
  double gap_est = 0.0;
  double residual = 0.0;
  double eps = 0.0;
  std::size_t support_size = 0;
  CallType call = CallType::Exact;
  double M = 0.0;
  double C = 0.0;
  /// True for iterates the driver commits to (outer iterates).
  bool accepted = false;
};

enum class SolveStatus { Converged, NotConverged, Stalled };

const char* to_string(SolveStatus s);

/// Invariant violations observed while solving.
struct Monitors {
  int lazy_threshold_violations = 0;
  int drop_increase_violations = 0;
  int lgcg_descent_violations = 0;
  int monotonicity_violations = 0;
};

struct Trace {
  std::string solver;
  std::vector<TraceRecord> records;
  SolveStatus status = SolveStatus::NotConverged;
  std::string message;
  SparseMeasure final_measure;
  double final_J = 0.0;
  int lazy_calls = 0;
  int exact_calls = 0;
  int recomputes = 0;
  int outer_iterations = 0;
  double seconds = 0.0;
  Monitors monitors;

  bool converged() const { return status == SolveStatus::Converged; }
};

Trace run_pdap(const Problem& problem, const SolverOptions& opts);
Trace run_lgcg(const Problem& problem, const SolverOptions& opts);
Trace run_lpdap(const Problem& problem, const SolverOptions& opts);
Trace run_nlgcg(const Problem& problem, const SolverOptions& opts);

/// Dispatch by name: pdap, lgcg, lpdap or nlgcg.
Trace run_solver(const std::string& name, const Problem& problem, const SolverOptions& opts);

/// residual = max(J - reference_J, 0) written into every record.
void estimate_residual(Trace& trace, double reference_J);

}  // namespace lazycg
