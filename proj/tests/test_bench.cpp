#include <doctest.h>

#include <fstream>
#include <unistd.h>

#include "fixtures.hpp"

using namespace lazycg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("lazycg-" + tag + "-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("heat problem constants") {
  const BenchProblem& b = fixtures::heat();
  const Problem& P = b.problem;
  CHECK(P.kernel->obs_dim() == 16);
  CHECK(P.alpha == 0.1);
  CHECK(P.params.C_K == 6.26);
  CHECK(P.params.C_Kp == 27.13);
  CHECK(P.params.sigma == 0.002);
  CHECK(P.params.R == 0.01);
  CHECK(total_variation(b.truth) == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(objective(P, b.truth) == doctest::Approx(0.25).epsilon(1e-15));
  const auto& y = dynamic_cast<const QuadraticFidelity&>(*P.fidelity).target();
  CHECK(forward(P, b.truth) == y);
  const auto& k = dynamic_cast<const HeatKernel&>(*P.kernel);
  CHECK(k.time() == 0.025);
  CHECK(k.sensors()(0, 0) == doctest::Approx(0.2));
  CHECK(k.sensors()(15, 1) == doctest::Approx(0.8));
}

TEST_CASE("heat sensor layouts") {
  nlohmann::json cfg = fixtures::heat().config;
  cfg["kernel"] = {{"type", "heat2d"}, {"sensor_grid", 4}, {"sensor_layout", "boundary"}, {"t", 0.025}};
  const BenchProblem bp = problem_from_config(cfg);
  const auto& boundary = dynamic_cast<const HeatKernel&>(*bp.problem.kernel);
  CHECK(boundary.sensors()(1, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(boundary.sensors()(15, 0) == 1.0);
  cfg["kernel"]["sensor_layout"] = "cell";
  const BenchProblem cp = problem_from_config(cfg);
  const auto& cell = dynamic_cast<const HeatKernel&>(*cp.problem.kernel);
  CHECK(cell.sensors()(0, 0) == doctest::Approx(0.125));
  cfg["kernel"]["sensor_layout"] = "hexagonal";
  CHECK_THROWS_AS(problem_from_config(cfg), std::invalid_argument);
}

TEST_CASE("signal problem constants") {
  const BenchProblem& b = fixtures::signal();
  const Problem& P = b.problem;
  CHECK(P.kernel->obs_dim() == 120);
  CHECK(total_variation(b.truth) == doctest::Approx(2.2).epsilon(1e-15));
  CHECK(P.domain.contains(Vec::Constant(1, std::sqrt(179.0))));
  const auto& k = dynamic_cast<const SineKernel&>(*P.kernel);
  CHECK(k.times()[0] == doctest::Approx(1.0 / 120.0));
  CHECK(k.times()[119] == 1.0);
  CHECK(objective(P, b.truth) == doctest::Approx(0.22).epsilon(1e-15));
  CHECK(P.params.C_K == 8.44);
  CHECK(P.params.C_Kp == 39.49);
}

TEST_CASE("problem hash is stable and config sensitive") {
  CHECK(build_heat_problem().hash() == fixtures::heat().hash());
  CHECK(fixtures::heat().hash() != fixtures::signal().hash());
  nlohmann::json cfg = fixtures::signal().config;
  cfg["alpha"] = 0.2;
  CHECK(problem_from_config(cfg).hash() != fixtures::signal().hash());
  CHECK(problem_from_config(fixtures::signal().config).hash() == fixtures::signal().hash());
}

TEST_CASE("load_problem resolves names and files") {
  CHECK(load_problem("heat").name == "heat");
  CHECK(load_problem("signal").name == "signal");
  TempDir dir("load");
  const fs::path file = dir.path / "p.json";
  std::ofstream(file) << fixtures::signal().config.dump();
  CHECK(load_problem(file.string()).hash() == fixtures::signal().hash());
  CHECK_THROWS(load_problem((dir.path / "missing.json").string()));
}

TEST_CASE("measure json round trip is exact") {
  std::mt19937_64 rng(61);
  const auto u = fixtures::random_measure(fixtures::heat().problem.domain, 4, rng);
  CHECK(measure_from_json(nlohmann::json::parse(measure_to_json(u).dump())) == u);
}

TEST_CASE("experiment outputs and comparison") {
  TempDir dir("exp");
  ExperimentSpec spec;
  spec.problem = "signal";
  spec.solver = "nlgcg";
  spec.out_dir = dir.path / "a";
  spec.cache_dir = dir.path / "cache";
  const ExperimentResult res = run_experiment(spec);
  REQUIRE(res.trace.converged());
  CHECK(fs::exists(spec.out_dir / "trace.csv"));
  CHECK(fs::exists(spec.out_dir / "plot.csv"));
  CHECK(fs::exists(spec.out_dir / "summary.json"));
  CHECK(fs::exists(spec.cache_dir / ("reference-" + res.hash + ".json")));
  for (const auto& r : res.trace.records) CHECK(r.residual >= 0.0);

  const Reference again = reference_solution(fixtures::signal(), spec.cache_dir, default_search(fixtures::signal()));
  CHECK(again.J == res.reference.J);
  CHECK(again.measure == res.reference.measure);

  SUBCASE("a run compared to itself has speedup one") {
    const auto rows = compare({spec.out_dir, spec.out_dir}, dir.path / "merged.csv");
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].speedup == 1.0);
    CHECK(fs::exists(dir.path / "merged.csv"));
  }
  SUBCASE("mismatched problems are rejected") {
    const fs::path other = dir.path / "b";
    fs::create_directories(other);
    std::ifstream in(spec.out_dir / "summary.json");
    nlohmann::json s = nlohmann::json::parse(in);
    s["problem_hash"] = "0000000000000000";
    std::ofstream(other / "summary.json") << s.dump();
    CHECK_THROWS_AS(compare({spec.out_dir, other}), std::runtime_error);
  }
}
