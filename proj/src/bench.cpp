#include "lazycg/bench.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace lazycg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json vec_to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec vec_from_json(const json& j) {
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j.at(i).get<double>();
  return v;
}

Vec point(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

json params_to_json(const HyperParams& h) {
  return {{"gamma", h.gamma}, {"theta", h.theta}, {"R", h.R},       {"sigma", h.sigma},
          {"L", h.L},         {"C_K", h.C_K},     {"C_Kp", h.C_Kp}, {"m_lo", h.m_lo},
          {"m_hi", h.m_hi},   {"S", h.S},         {"M", h.M}};
}

HyperParams params_from_json(const json& j) {
  HyperParams h;
  h.gamma = j.value("gamma", h.gamma);
  h.theta = j.value("theta", h.theta);
  h.R = j.value("R", h.R);
  h.sigma = j.value("sigma", h.sigma);
  h.L = j.value("L", h.L);
  h.C_K = j.value("C_K", h.C_K);
  h.C_Kp = j.value("C_Kp", h.C_Kp);
  h.m_lo = j.value("m_lo", h.m_lo);
  h.m_hi = j.value("m_hi", h.m_hi);
  h.S = j.value("S", h.S);
  h.M = j.value("M", h.M);
  return h;
}

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string BenchProblem::hash() const { return fnv1a(config.dump()); }

BenchProblem problem_from_config(const json& config) {
  BenchProblem b;
  b.name = config.value("name", std::string("custom"));
  const json& dom = config.at("domain");
  b.problem.domain = {vec_from_json(dom.at("lo")), vec_from_json(dom.at("hi"))};
  b.problem.alpha = config.value("alpha", 0.1);
  b.problem.params = params_from_json(config.value("params", json::object()));
  const Eigen::Index d = b.problem.domain.dim();

  const json& k = config.at("kernel");
  const std::string type = k.at("type").get<std::string>();
  json canon_kernel = {{"type", type}};
  if (type == "heat2d") {
    std::vector<Vec> sensors;
    if (k.contains("sensors")) {
      for (const auto& s : k.at("sensors")) sensors.push_back(vec_from_json(s));
    } else {
      // n^d nodes, first coordinate fastest. "interior" places them at
      // lo + (i+1)/(n+1) (hi-lo), "boundary" spans the box, "cell" uses cell centres.
      const int n = k.value("sensor_grid", 4);
      const std::string layout = k.value("sensor_layout", std::string("interior"));
      if (n < 1) throw std::invalid_argument("heat2d: sensor_grid must be positive");
      if (layout == "boundary") {
        if (n < 2) throw std::invalid_argument("heat2d: boundary layout needs sensor_grid >= 2");
        sensors = grid_nodes(b.problem.domain, n);
      } else if (layout == "interior" || layout == "cell") {
        const Box& box = b.problem.domain;
        const double shift = layout == "interior" ? 1.0 : 0.5;
        const double denom = layout == "interior" ? n + 1.0 : static_cast<double>(n);
        std::size_t total = 1;
        for (Eigen::Index c = 0; c < d; ++c) total *= static_cast<std::size_t>(n);
        for (std::size_t flat = 0; flat < total; ++flat) {
          Vec x(d);
          std::size_t rest = flat;
          for (Eigen::Index c = 0; c < d; ++c) {
            const auto i = static_cast<double>(rest % static_cast<std::size_t>(n));
            rest /= static_cast<std::size_t>(n);
            x[c] = box.lo[c] + (i + shift) / denom * (box.hi[c] - box.lo[c]);
          }
          sensors.push_back(std::move(x));
        }
      } else {
        throw std::invalid_argument("heat2d: unknown sensor_layout '" + layout + "'");
      }
    }
    const double t = k.at("t").get<double>();
    json js = json::array();
    for (const auto& s : sensors) js.push_back(vec_to_json(s));
    canon_kernel["sensors"] = js;
    canon_kernel["t"] = t;
    b.problem.kernel = std::make_shared<HeatKernel>(std::move(sensors), t);
  } else if (type == "sine1d") {
    Vec times;
    if (k.contains("times")) {
      times = vec_from_json(k.at("times"));
    } else {
      const int n = k.value("n_times", 120);
      times = Vec::LinSpaced(n, 1.0 / n, 1.0);
    }
    canon_kernel["times"] = vec_to_json(times);
    b.problem.kernel = std::make_shared<SineKernel>(std::move(times));
  } else {
    throw std::invalid_argument("unknown kernel type: " + type);
  }
  if (b.problem.kernel->dim() != d) throw std::invalid_argument("kernel and domain dimensions differ");

  b.truth = measure_from_json(config.at("truth"));
  Vec target;
  if (config.contains("target")) {
    target = vec_from_json(config.at("target"));
  } else {
    Problem tmp = b.problem;
    tmp.fidelity = std::make_shared<QuadraticFidelity>(Vec::Zero(tmp.kernel->obs_dim()));
    target = forward(tmp, b.truth);
  }
  b.problem.fidelity = std::make_shared<QuadraticFidelity>(target);
  b.problem.validate();

  b.config = {{"name", b.name},
              {"domain", {{"lo", vec_to_json(b.problem.domain.lo)}, {"hi", vec_to_json(b.problem.domain.hi)}}},
              {"kernel", canon_kernel},
              {"alpha", b.problem.alpha},
              {"truth", measure_to_json(b.truth)},
              {"target", vec_to_json(target)},
              {"params", params_to_json(b.problem.params)}};
  return b;
}

BenchProblem build_heat_problem() {
  HyperParams h;
  h.theta = 0.1;
  h.gamma = 1.0;
  h.sigma = 0.002;
  h.L = 1.0;
  h.R = 0.01;
  h.m_lo = 0.001;
  h.m_hi = 0.1;
  h.C_K = 6.26;
  h.C_Kp = 27.13;
  const SparseMeasure truth = SparseMeasure::from_atoms(
      {{point({0.28, 0.71}), 1.0}, {point({0.51, 0.27}), -0.7}, {point({0.71, 0.53}), 0.8}});
  json cfg = {{"name", "heat"},
              {"domain", {{"lo", {0.0, 0.0}}, {"hi", {1.0, 1.0}}}},
              {"kernel", {{"type", "heat2d"}, {"sensor_grid", 4}, {"sensor_layout", "interior"}, {"t", 0.025}}},
              {"alpha", 0.1},
              {"truth", measure_to_json(truth)},
              {"params", params_to_json(h)}};
  return problem_from_config(cfg);
}

BenchProblem build_signal_problem() {
  HyperParams h;
  h.theta = 0.1;
  h.gamma = 1.0;
  h.sigma = 0.05;
  h.L = 1.0;
  h.R = 0.1;
  h.m_lo = 0.001;
  h.m_hi = 0.1;
  h.C_K = 8.44;
  h.C_Kp = 39.49;
  const SparseMeasure truth = SparseMeasure::from_atoms(
      {{point({3.125}), -1.0}, {point({7.0}), 0.7}, {point({std::sqrt(179.0)}), 0.5}});
  json cfg = {{"name", "signal"},
              {"domain", {{"lo", {0.0}}, {"hi", {60.0}}}},
              {"kernel", {{"type", "sine1d"}, {"n_times", 120}}},
              {"alpha", 0.1},
              {"truth", measure_to_json(truth)},
              {"params", params_to_json(h)}};
  return problem_from_config(cfg);
}

BenchProblem load_problem(const std::string& spec) {
  if (spec == "heat") return build_heat_problem();
  if (spec == "signal") return build_signal_problem();
  return problem_from_config(read_json(spec));
}

// ---------------------------------------------------------------------------

json measure_to_json(const SparseMeasure& u) {
  json a = json::array();
  for (const auto& atom : u.atoms()) a.push_back({{"x", vec_to_json(atom.x)}, {"w", atom.w}});
  return a;
}

SparseMeasure measure_from_json(const json& j) {
  std::vector<Atom> atoms;
  for (const auto& a : j) atoms.push_back({vec_from_json(a.at("x")), a.at("w").get<double>()});
  return SparseMeasure::from_atoms(std::move(atoms));
}

void write_trace_csv(const Trace& trace, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "k,s,time_s,J,gap_est,residual,eps,support_size,call_type,M,C,accepted\n";
  for (const auto& r : trace.records) {
    out << r.k << ',' << r.s << ',' << fmt(r.time_s) << ',' << fmt(r.J) << ',' << fmt(r.gap_est) << ','
        << fmt(r.residual) << ',' << fmt(r.eps) << ',' << r.support_size << ',' << to_string(r.call)
        << ',' << fmt(r.M) << ',' << fmt(r.C) << ',' << (r.accepted ? 1 : 0) << '\n';
  }
}

json summary_json(const Trace& trace) {
  return {{"solver", trace.solver},
          {"converged", trace.converged()},
          {"status", to_string(trace.status)},
          {"message", trace.message},
          {"iters", trace.outer_iterations},
          {"lazy_calls", trace.lazy_calls},
          {"exact_calls", trace.exact_calls},
          {"recomputes", trace.recomputes},
          {"final_support", measure_to_json(trace.final_measure)},
          {"final_J", trace.final_J},
          {"seconds", trace.seconds}};
}

void write_plot_csv(const Trace& trace, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "iteration,time_s,residual,support_size,eps\n";
  int it = 0;
  for (const auto& r : trace.records) {
    if (!r.accepted) continue;
    out << it++ << ',' << fmt(r.time_s) << ',' << fmt(r.residual) << ',' << r.support_size << ','
        << fmt(r.eps) << '\n';
  }
}

// ---------------------------------------------------------------------------

SearchConfig default_search(const BenchProblem& bench) {
  SearchConfig cfg;
  cfg.grid_per_dim = default_grid_per_dim(bench.problem.dim());
  return cfg;
}

Reference reference_solution(const BenchProblem& bench, const fs::path& cache_dir,
                             const SearchConfig& search) {
  const std::string hash = bench.hash();
  const fs::path file = cache_dir / ("reference-" + hash + ".json");
  if (fs::exists(file)) {
    const json j = read_json(file);
    if (j.at("hash").get<std::string>() == hash) {
      return {hash, j.at("J").get<double>(), j.at("gap").get<double>(), measure_from_json(j.at("measure"))};
    }
  }
  SolverOptions opts;
  opts.tol = 1e-14;
  opts.search = search;
  const Trace t = run_pdap(bench.problem, opts);
  if (!t.converged()) {
    throw std::runtime_error("reference solve did not converge: " + t.message);
  }
  Reference ref{hash, t.final_J, t.records.back().gap_est, t.final_measure};
  fs::create_directories(cache_dir);
  write_json({{"hash", hash}, {"J", ref.J}, {"gap", ref.gap}, {"measure", measure_to_json(ref.measure)}},
             file);
  return ref;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  const BenchProblem bench = load_problem(spec.problem);
  SolverOptions opts = spec.opts;
  opts.search.grid_per_dim = spec.grid_per_dim.value_or(default_grid_per_dim(bench.problem.dim()));

  ExperimentResult res;
  res.hash = bench.hash();
  res.reference = reference_solution(bench, spec.cache_dir, opts.search);
  res.trace = run_solver(spec.solver, bench.problem, opts);
  estimate_residual(res.trace, res.reference.J);
  res.time_to_tol = res.trace.seconds;

  fs::create_directories(spec.out_dir);
  write_trace_csv(res.trace, spec.out_dir / "trace.csv");
  write_plot_csv(res.trace, spec.out_dir / "plot.csv");
  json summary = summary_json(res.trace);
  summary["problem"] = bench.name;
  summary["problem_hash"] = res.hash;
  summary["reference_J"] = res.reference.J;
  summary["time_to_tol"] = res.time_to_tol;
  summary["tol"] = opts.tol;
  write_json(summary, spec.out_dir / "summary.json");
  return res;
}

std::vector<CompareRow> compare(const std::vector<fs::path>& dirs, const fs::path& merged_csv) {
  if (dirs.empty()) throw std::invalid_argument("compare: no run directories");
  std::vector<CompareRow> rows;
  std::string hash;
  for (const auto& dir : dirs) {
    const json s = read_json(dir / "summary.json");
    const std::string h = s.at("problem_hash").get<std::string>();
    if (hash.empty()) {
      hash = h;
    } else if (h != hash) {
      throw std::runtime_error("compare: problem hash mismatch between " + dirs.front().string() +
                               " and " + dir.string());
    }
    rows.push_back({dir.string(), s.at("solver").get<std::string>(), s.at("time_to_tol").get<double>(), 1.0});
  }
  for (auto& r : rows) r.speedup = r.time_to_tol > 0.0 ? rows.front().time_to_tol / r.time_to_tol : 1.0;

  if (!merged_csv.empty()) {
    std::ofstream out(merged_csv);
    if (!out) throw std::runtime_error("cannot write " + merged_csv.string());
    out << "run,solver,iteration,time_s,residual,support_size,eps\n";
    for (std::size_t i = 0; i < dirs.size(); ++i) {
      std::ifstream in(dirs[i] / "plot.csv");
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        if (!line.empty()) out << i << ',' << rows[i].solver << ',' << line << '\n';
      }
    }
  }
  return rows;
}

}  // namespace lazycg
