#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lazycg/drivers.hpp"

namespace lazycg {

/// A fully specified experiment problem plus the measure that generated y.
struct BenchProblem {
  std::string name;
  Problem problem;
  SparseMeasure truth;
  /// Canonical description; the problem hash is computed from its dump.
  nlohmann::json config;

  std::string hash() const;
};

/// Heat source location on [0,1]^2 with a 4x4 sensor grid.
BenchProblem build_heat_problem();

/// Spectral estimation on [0,60] with 120 sine measurements.
BenchProblem build_signal_problem();

/// Builds a problem from a JSON description (same layout as BenchProblem::config).
BenchProblem problem_from_config(const nlohmann::json& config);

/// "heat", "signal" or a path to a JSON config file.
BenchProblem load_problem(const std::string& spec);

// --------------------------------------------------------------------------
// Serialization

nlohmann::json measure_to_json(const SparseMeasure& u);
SparseMeasure measure_from_json(const nlohmann::json& j);

void write_trace_csv(const Trace& trace, const std::filesystem::path& path);
nlohmann::json summary_json(const Trace& trace);
/// Accepted iterates only: iteration, seconds, residual, support size, eps.
void write_plot_csv(const Trace& trace, const std::filesystem::path& path);

// --------------------------------------------------------------------------
// Reference solutions

struct Reference {
  std::string hash;
  double J = 0.0;
  double gap = 0.0;
  SparseMeasure measure;
};

/// PDAP run to a gap of 1e-14, read from `cache_dir` when already present.
Reference reference_solution(const BenchProblem& bench, const std::filesystem::path& cache_dir,
                             const SearchConfig& search);

// --------------------------------------------------------------------------
// Experiments

struct ExperimentSpec {
  std::string problem = "heat";
  std::string solver = "lpdap";
  SolverOptions opts;
  /// Overrides the per-dimension default of the multistart grid.
  std::optional<int> grid_per_dim;
  std::filesystem::path out_dir = "out";
  std::filesystem::path cache_dir = ".lazycg-cache";
  /// Reserved; every run is deterministic.
  int seed = 0;
};

struct ExperimentResult {
  Trace trace;
  Reference reference;
  std::string hash;
  /// Wall-clock seconds of the solver run (time to tolerance when converged).
  double time_to_tol = 0.0;
};

/// Grid resolution used when the caller leaves it unset.
SearchConfig default_search(const BenchProblem& bench);

ExperimentResult run_experiment(const ExperimentSpec& spec);

struct CompareRow {
  std::string dir;
  std::string solver;
  double time_to_tol = 0.0;
  /// time_to_tol of the first run divided by this run's.
  double speedup = 1.0;
};

/// Reads completed run directories; throws on mismatched problem hashes.
/// Writes a merged trace CSV to `merged_csv` when the path is nonempty.
std::vector<CompareRow> compare(const std::vector<std::filesystem::path>& dirs,
                                const std::filesystem::path& merged_csv = {});

}  // namespace lazycg
