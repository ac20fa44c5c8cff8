// pwamc command-line tool: solve / synthesize / benchmark.
//
// Exit codes are a stable contract: 0 success, 1 usage or parse error,
// 2 solver failure, 3 synthesis failure.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <pwamc/oracle.hpp>
#include <pwamc/policy.hpp>
#include <pwamc/problem.hpp>
#include <pwamc/relaxation.hpp>
#include <pwamc/sdp.hpp>

#ifndef PWAMC_VERSION
#define PWAMC_VERSION "0.0.0"
#endif

namespace {

using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Plumbing: digests, atomic writes, thread cap.

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Write through a temp file in the same directory, then rename: readers never
// observe a partially written artifact.
void write_atomic(const std::filesystem::path& path, const std::string& data) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + tmp.string());
    out << data;
  }
  std::filesystem::rename(tmp, path);
}

int thread_cap() {
  if (const char* env = std::getenv("PWAMC_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// ---------------------------------------------------------------------------
// Shared option handling.

struct ProblemSource {
  std::string path;       // empty means the built-in example
  bool builtin = false;
  std::optional<double> mass_bound;

  pwamc::PwaOcp load(json& manifest_input) const {
    pwamc::PwaOcp ocp;
    if (builtin) {
      ocp = pwamc::builtin_example();
      manifest_input["problem"] = "builtin-example";
      manifest_input["digest"] = hex64(fnv1a(pwamc::render_problem(ocp)));
    } else {
      const std::string text = read_file(path);
      ocp = pwamc::parse_problem(text);
      manifest_input["problem"] = path;
      manifest_input["digest"] = hex64(fnv1a(text));
    }
    if (mass_bound) ocp.mass_bound = *mass_bound;
    return ocp;
  }
};

void add_problem_flags(CLI::App* cmd, ProblemSource& src) {
  auto* p = cmd->add_option("--problem", src.path, "Problem file (JSON)");
  auto* b = cmd->add_flag("--builtin-example", src.builtin,
                          "Use the built-in two-cell example");
  p->excludes(b);
  cmd->callback([&src, p, b, cmd] {
    if (p->count() == 0 && b->count() == 0)
      throw CLI::ValidationError(cmd->get_name(),
                                 "one of --problem or --builtin-example is required");
  });
}

json manifest_base(const std::string& command) {
  json m;
  m["command"] = command;
  m["tool_version"] = PWAMC_VERSION;
  m["input"] = json::object();
  m["options"] = json::object();
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json value_function_json(const pwamc::ValueFunctionApprox& vf, int n) {
  return json::parse(pwamc::value_function_to_json(vf, n));
}

json order_to_json(const pwamc::OrderResult& r, int n) {
  json o;
  o["d"] = r.d;
  o["status"] = pwamc::to_string(r.solution.status);
  o["lower_bound"] = r.value.lower_bound;
  o["lower_bound_scaled"] = r.lower_bound_scaled;
  o["gap"] = r.value.solver_gap;
  o["iterations"] = r.solution.iterations;
  o["value_function"] = value_function_json(r.value, n);
  json cert;
  cert["cell_residuals"] = r.certificate.cell_residuals;
  cert["terminal_residual"] = r.certificate.terminal_residual;
  cert["hjb_min"] = r.certificate.hjb_min;
  cert["worst_point"] = vector_to_json(r.certificate.worst_point);
  o["certificate"] = cert;
  return o;
}

// Hierarchy orders are independent SDPs; distribute them over a small pool.
std::vector<pwamc::OrderResult> solve_orders_parallel(
    const pwamc::PwaOcp& ocp, int d_min, int d_max,
    const pwamc::RelaxationOptions& opts, std::vector<double>& order_seconds) {
  const int count = d_max - d_min + 1;
  std::vector<pwamc::OrderResult> results(count);
  order_seconds.assign(count, 0.0);
  const int workers = std::min(thread_cap(), count);
  std::atomic<int> next{0};
  auto run = [&] {
    for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      const auto t0 = Clock::now();
      results[i] = pwamc::solve_order(ocp, d_min + i, opts);
      order_seconds[i] = seconds_since(t0);
    }
  };
  if (workers <= 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }
  return results;
}

void dump_sdpa_files(const pwamc::PwaOcp& ocp, int d_min, int d_max,
                     bool scaling, const std::filesystem::path& out_dir) {
  pwamc::PwaOcp scaled =
      scaling ? pwamc::apply_scaling(ocp, pwamc::unit_box_scaling(ocp)) : ocp;
  for (int d = d_min; d <= d_max; ++d) {
    pwamc::LmiRelaxation rel = pwamc::assemble(scaled, d);
    std::ostringstream ss;
    pwamc::write_sdpa(rel.program, ss);
    write_atomic(out_dir / ("order_" + std::to_string(d) + ".dat-s"), ss.str());
  }
}

std::string trajectory_csv(const pwamc::PolicyRun& run, int n, int m) {
  std::ostringstream out;
  out.precision(17);
  out << "t";
  for (int i = 1; i <= n; ++i) out << ",x" << i;
  for (int i = 1; i <= m; ++i) out << ",u" << i;
  out << ",cell,running_cost,partition_point\n";
  for (const auto& s : run.samples) {
    out << s.t;
    for (int i = 0; i < n; ++i) out << "," << s.x[i];
    for (int i = 0; i < m; ++i) out << "," << s.u[i];
    out << "," << (s.cell + 1) << "," << s.running_cost << ","
        << (s.partition_point ? 1 : 0) << "\n";
  }
  return out.str();
}

json run_summary_json(const pwamc::PolicyRun& run, const pwamc::PolicyConfig& cfg) {
  json s;
  s["status"] = pwamc::to_string(run.status);
  s["T_pi"] = run.total_time;
  s["J"] = run.cost;
  s["steps"] = run.points.size();
  json c;
  c["diameter"] = cfg.diameter;
  c["epsilon"] = cfg.epsilon;
  c["max_steps"] = cfg.max_steps;
  c["event_tol"] = cfg.effective_event_tol();
  s["config"] = c;
  return s;
}

std::string two_column_csv(const std::vector<std::array<double, 2>>& rows,
                           const std::string& header) {
  std::ostringstream out;
  out.precision(17);
  out << header << "\n";
  for (const auto& r : rows) out << r[0] << "," << r[1] << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// solve

int cmd_solve(const ProblemSource& src, int d_max, bool scaling,
              const std::filesystem::path& out_dir, bool dump_sdpa) {
  json manifest = manifest_base("solve");
  pwamc::PwaOcp ocp = src.load(manifest["input"]);
  const int d_min = pwamc::minimum_order(ocp);
  if (d_max < d_min) {
    std::cerr << "error: --dmax " << d_max << " is below the minimum order "
              << d_min << " required by the problem data\n";
    return 1;
  }
  manifest["options"] = {{"dmax", d_max},
                         {"scaling", scaling},
                         {"dump_sdpa", dump_sdpa},
                         {"mass_bound", src.mass_bound
                                            ? json(*src.mass_bound)
                                            : json(nullptr)}};

  std::filesystem::create_directories(out_dir);
  pwamc::RelaxationOptions opts;
  opts.scale_to_unit_box = scaling;

  const auto t0 = Clock::now();
  std::vector<double> order_seconds;
  std::vector<pwamc::OrderResult> results =
      solve_orders_parallel(ocp, d_min, d_max, opts, order_seconds);

  json report;
  report["manifest"] = manifest;
  report["orders"] = json::array();
  bool all_optimal = true;
  for (const auto& r : results) {
    report["orders"].push_back(order_to_json(r, ocp.n));
    if (r.solution.status != pwamc::SolveStatus::Optimal) all_optimal = false;
    write_atomic(out_dir / ("value_d" + std::to_string(r.d) + ".json"),
                 pwamc::value_function_to_json(r.value, ocp.n));
  }
  json timings;
  timings["total_seconds"] = seconds_since(t0);
  timings["per_order_seconds"] = order_seconds;
  report["timings"] = timings;
  write_atomic(out_dir / "solve_report.json", report.dump(2) + "\n");

  for (const auto& r : results)
    std::cout << "d=" << r.d << "  " << pwamc::to_string(r.solution.status)
              << "  lower_bound=" << r.value.lower_bound << "\n";
  if (dump_sdpa) dump_sdpa_files(ocp, d_min, d_max, scaling, out_dir);
  return all_optimal ? 0 : 2;
}

// ---------------------------------------------------------------------------
// synthesize

int cmd_synthesize(const ProblemSource& src, const std::string& value_file,
                   double diameter, double epsilon, int max_steps,
                   const std::filesystem::path& out_dir) {
  json manifest = manifest_base("synthesize");
  pwamc::PwaOcp ocp = src.load(manifest["input"]);
  const std::string vf_text = read_file(value_file);
  pwamc::ValueFunctionApprox vf = pwamc::value_function_from_json(vf_text);
  if (vf.v.nvars() != ocp.n) {
    std::cerr << "error: value function has " << vf.v.nvars()
              << " variables but the problem state dimension is " << ocp.n << "\n";
    return 1;
  }
  std::optional<Eigen::VectorXd> target = pwamc::point_target(ocp);
  if (!target) {
    std::cerr << "error: the terminal guards do not pin a single target point; "
                 "synthesis needs a point target\n";
    return 1;
  }
  manifest["input"]["value_function"] = value_file;
  manifest["input"]["value_function_digest"] = hex64(fnv1a(vf_text));
  manifest["options"] = {{"diameter", diameter},
                         {"epsilon", epsilon},
                         {"max_steps", max_steps}};

  pwamc::PolicyConfig cfg;
  cfg.diameter = diameter;
  cfg.epsilon = epsilon;
  cfg.max_steps = max_steps;

  const auto t0 = Clock::now();
  pwamc::PolicyRun run = pwamc::run_policy(ocp, vf.v, *target, cfg);

  std::filesystem::create_directories(out_dir);
  write_atomic(out_dir / "trajectory.csv", trajectory_csv(run, ocp.n, ocp.m));
  json summary;
  summary["manifest"] = manifest;
  summary["run"] = run_summary_json(run, cfg);
  summary["timings"] = {{"total_seconds", seconds_since(t0)}};
  write_atomic(out_dir / "run_summary.json", summary.dump(2) + "\n");

  std::cout << pwamc::to_string(run.status) << "  J=" << run.cost
            << "  T=" << run.total_time << "  steps=" << run.points.size()
            << "\n";
  return run.status == pwamc::RunStatus::ReachedTarget ? 0 : 3;
}

// ---------------------------------------------------------------------------
// benchmark

int cmd_benchmark(int d_max, double diameter, double epsilon,
                  std::vector<double> sweep,
                  const std::filesystem::path& out_dir) {
  json manifest = manifest_base("benchmark");
  pwamc::PwaOcp ocp = pwamc::builtin_example();
  manifest["input"]["problem"] = "builtin-example";
  manifest["input"]["digest"] = hex64(fnv1a(pwamc::render_problem(ocp)));
  manifest["options"] = {{"dmax", d_max},
                         {"diameter", diameter},
                         {"epsilon", epsilon},
                         {"diameters", sweep}};

  const int d_min = pwamc::minimum_order(ocp);
  if (d_max < d_min) {
    std::cerr << "error: --dmax below the minimum order " << d_min << "\n";
    return 1;
  }
  std::filesystem::create_directories(out_dir);
  const double x0 = ocp.initial.point[0];
  const double oracle_cost = pwamc::oracle::oracle_cost(x0);

  const auto t0 = Clock::now();
  std::vector<double> order_seconds;
  std::vector<pwamc::OrderResult> results = solve_orders_parallel(
      ocp, d_min, d_max, pwamc::RelaxationOptions{}, order_seconds);
  for (const auto& r : results)
    if (r.solution.status != pwamc::SolveStatus::Optimal) {
      std::cerr << "error: order " << r.d << " finished with status "
                << pwamc::to_string(r.solution.status) << "\n";
      return 2;
    }
  const pwamc::OrderResult& top = results.back();

  Eigen::VectorXd target = *pwamc::point_target(ocp);
  pwamc::PolicyConfig cfg;
  cfg.diameter = diameter;
  cfg.epsilon = epsilon;
  pwamc::PolicyRun run = pwamc::run_policy(ocp, top.value.v, target, cfg);
  if (run.status != pwamc::RunStatus::ReachedTarget) {
    std::cerr << "error: synthesis ended with status "
              << pwamc::to_string(run.status) << "\n";
    return 3;
  }
  pwamc::oracle::ComparisonReport cmp = pwamc::oracle::compare(top, run, x0);

  // Diameter sweep: |J - oracle| should not increase as the partition is
  // refined (up to additive noise).
  json sweep_json = json::array();
  for (double dia : sweep) {
    pwamc::PolicyConfig c = cfg;
    c.diameter = dia;
    pwamc::PolicyRun r = pwamc::run_policy(ocp, top.value.v, target, c);
    json row;
    row["diameter"] = dia;
    row["status"] = pwamc::to_string(r.status);
    row["J"] = r.cost;
    row["cost_gap"] = r.cost - oracle_cost;
    sweep_json.push_back(row);
  }

  json report;
  report["manifest"] = manifest;
  report["oracle_cost"] = cmp.oracle_cost;
  report["lower_bound"] = cmp.lower_bound;
  report["policy_cost"] = cmp.policy_cost;
  report["bound_gap"] = cmp.bound_gap;
  report["cost_gap"] = cmp.cost_gap;
  report["feedback_sup_dev"] = cmp.feedback_sup_dev;
  json bounds = json::array();
  for (const auto& r : results)
    bounds.push_back({{"d", r.d}, {"lower_bound", r.value.lower_bound}});
  report["orders"] = bounds;
  report["diameter_sweep"] = sweep_json;
  report["timings"] = {{"total_seconds", seconds_since(t0)},
                       {"per_order_seconds", order_seconds}};
  write_atomic(out_dir / "comparison_report.json", report.dump(2) + "\n");

  // Plot-ready data: per-order bounds against the oracle value, the analytic
  // feedback curve, and the synthesized controls at the partition points.
  {
    std::ostringstream out;
    out.precision(17);
    out << "d,lower_bound,oracle_cost\n";
    for (const auto& r : results)
      out << r.d << "," << r.value.lower_bound << "," << oracle_cost << "\n";
    write_atomic(out_dir / "bounds.csv", out.str());
  }
  write_atomic(out_dir / "feedback_oracle.csv",
               two_column_csv(pwamc::oracle::feedback_curve(
                                  ocp.state_box.lo[0], ocp.state_box.hi[0], 401),
                              "x,k_star"));
  {
    std::vector<std::array<double, 2>> rows;
    for (const auto& p : run.points) rows.push_back({p.x[0], p.u[0]});
    write_atomic(out_dir / "feedback_policy.csv",
                 two_column_csv(rows, "x,u_policy"));
  }

  std::cout << "oracle=" << cmp.oracle_cost << "  bound(d=" << top.d
            << ")=" << cmp.lower_bound << "  J=" << cmp.policy_cost
            << "  feedback_sup_dev=" << cmp.feedback_sup_dev << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Piecewise-affine optimal control: moment-LMI bounds, value "
               "function recovery, and sample-and-hold synthesis"};
  app.require_subcommand(1);

  ProblemSource solve_src, synth_src;
  int dmax = 6;
  bool no_scaling = false, dump_sdpa = false;
  std::string out_dir = ".";

  CLI::App* solve = app.add_subcommand("solve", "Solve the LMI hierarchy");
  add_problem_flags(solve, solve_src);
  solve->add_option("--dmax", dmax, "Largest relaxation order")
      ->check(CLI::PositiveNumber);
  solve->add_option("--mass-bound", solve_src.mass_bound,
                    "Upper bound on the total occupation mass");
  solve->add_flag("--no-scaling", no_scaling,
                  "Skip the unit-box change of coordinates");
  solve->add_option("--out", out_dir, "Output directory");
  solve->add_flag("--dump-sdpa", dump_sdpa,
                  "Also write each order in SDPA sparse format");

  std::string value_file;
  double diameter = 0.01, epsilon = 0.01;
  int max_steps = 100000;
  std::string synth_out = ".";
  CLI::App* synth =
      app.add_subcommand("synthesize", "Run the sample-and-hold feedback");
  add_problem_flags(synth, synth_src);
  synth->add_option("--value-function", value_file,
                    "Value-function coefficient file from solve")
      ->required();
  synth->add_option("--diameter", diameter, "Partition diameter d(pi)")
      ->check(CLI::PositiveNumber);
  synth->add_option("--epsilon", epsilon, "Target tolerance on ||x - x_T||")
      ->check(CLI::PositiveNumber);
  synth->add_option("--max-steps", max_steps, "Partition point budget")
      ->check(CLI::PositiveNumber);
  synth->add_option("--out", synth_out, "Output directory");

  int bench_dmax = 6;
  double bench_diameter = 0.01, bench_epsilon = 0.01;
  std::vector<double> sweep = {0.1, 0.05, 0.025, 0.0125};
  std::string bench_out = ".";
  CLI::App* bench = app.add_subcommand(
      "benchmark", "Full pipeline on the built-in example plus oracle comparison");
  bench->add_option("--dmax", bench_dmax, "Largest relaxation order")
      ->check(CLI::PositiveNumber);
  bench->add_option("--diameter", bench_diameter, "Partition diameter")
      ->check(CLI::PositiveNumber);
  bench->add_option("--epsilon", bench_epsilon, "Target tolerance")
      ->check(CLI::PositiveNumber);
  bench->add_option("--diameters", sweep, "Diameter sweep values");
  bench->add_option("--out", bench_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (solve->parsed())
      return cmd_solve(solve_src, dmax, !no_scaling, out_dir, dump_sdpa);
    if (synth->parsed())
      return cmd_synthesize(synth_src, value_file, diameter, epsilon, max_steps,
                            synth_out);
    return cmd_benchmark(bench_dmax, bench_diameter, bench_epsilon, sweep,
                         bench_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
