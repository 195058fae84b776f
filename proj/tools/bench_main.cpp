#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "lazycg/bench.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"Lazified conditional gradient benchmarks"};
  app.require_subcommand(1);

  lazycg::ExperimentSpec spec;
  int grid_n = 0;
  double m_beta = 0.0;

  auto* run = app.add_subcommand("run", "Solve one problem and write trace, summary and plot data");
  run->add_option("--problem", spec.problem, "heat, signal or a JSON config file")->required();
  run->add_option("--solver", spec.solver, "pdap, lgcg, lpdap or nlgcg")
      ->check(CLI::IsMember({"pdap", "lgcg", "lpdap", "nlgcg"}));
  run->add_option("--tol", spec.opts.tol, "Stopping tolerance")->check(CLI::PositiveNumber);
  run->add_option("--grid-n", grid_n, "Multistart grid nodes per dimension")->check(CLI::PositiveNumber);
  run->add_option("--max-local-iters", spec.opts.search.max_local_iters, "Newton ascent iterations per start");
  run->add_option("--cache-size", spec.opts.search.cache_size, "Lazy candidate cache capacity");
  run->add_option("--coef-max-iters", spec.opts.coef.max_iters, "Coefficient solver iteration cap");
  run->add_option("--max-outer", spec.opts.max_outer, "Outer iteration cap");
  run->add_option("--max-seconds", spec.opts.max_seconds, "Wall-clock budget, 0 for none");
  run->add_option("--m-beta", m_beta, "Divisor beta in M = J(u)/beta (default alpha)")
      ->check(CLI::PositiveNumber);
  run->add_option("--out", spec.out_dir, "Output directory");
  run->add_option("--cache-dir", spec.cache_dir, "Reference solution cache");
  run->add_flag("--serial", [&](std::int64_t) { spec.opts.search.parallel = false; },
                "Run the multistart sweep on one thread");

  std::vector<std::string> dirs;
  std::string merged;
  auto* cmp = app.add_subcommand("compare", "Compare completed runs of one problem");
  cmp->add_option("dirs", dirs, "Run directories")->required()->expected(2, -1);
  cmp->add_option("--merged", merged, "Write the merged plot CSV here");

  std::string ref_problem;
  std::string ref_cache = ".lazycg-cache";
  auto* ref = app.add_subcommand("reference", "Compute or load the reference solution");
  ref->add_option("--problem", ref_problem, "heat, signal or a JSON config file")->required();
  ref->add_option("--cache-dir", ref_cache, "Reference solution cache");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      if (grid_n > 0) spec.grid_per_dim = grid_n;
      if (m_beta > 0.0) spec.opts.m_beta = m_beta;
      const auto res = lazycg::run_experiment(spec);
      const auto& t = res.trace;
      std::printf("%s on %s: %s in %.3fs, %d iterations, lazy %d, exact %d, recomputes %d, support %zu, J %.15g\n",
                  t.solver.c_str(), spec.problem.c_str(), lazycg::to_string(t.status), t.seconds,
                  t.outer_iterations, t.lazy_calls, t.exact_calls, t.recomputes, t.final_measure.size(),
                  t.final_J);
      if (!t.message.empty()) std::printf("  %s\n", t.message.c_str());
      std::printf("  outputs in %s\n", spec.out_dir.string().c_str());
      return t.converged() ? 0 : 2;
    }
    if (*cmp) {
      std::vector<fs::path> paths(dirs.begin(), dirs.end());
      const auto rows = lazycg::compare(paths, merged);
      std::printf("%-30s %-8s %12s %10s\n", "run", "solver", "seconds", "speedup");
      for (const auto& r : rows) {
        std::printf("%-30s %-8s %12.4f %10.3f\n", r.dir.c_str(), r.solver.c_str(), r.time_to_tol, r.speedup);
      }
      return 0;
    }
    if (*ref) {
      const auto bench = lazycg::load_problem(ref_problem);
      const auto r = lazycg::reference_solution(bench, ref_cache, lazycg::default_search(bench));
      std::printf("reference %s (%s): J %.17g, gap %.3e\n", bench.name.c_str(), r.hash.c_str(), r.J, r.gap);
      std::cout << lazycg::measure_to_json(r.measure).dump(2) << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
