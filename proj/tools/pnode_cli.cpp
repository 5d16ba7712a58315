// pnode: single solves and work-precision sweeps over the C API.

#include <CLI11.hpp>

#include <cstdio>
#include <memory>
#include <optional>
#include <string>

#include "pnode/pnode.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitAbort = 2;

int exit_code(pnode_status status) {
  switch (status) {
    case PNODE_OK: return kExitOk;
    case PNODE_E_SOLVER_ABORT:
    case PNODE_E_REFERENCE:
    case PNODE_E_INTERNAL: return kExitAbort;
    default: return kExitUsage;
  }
}

int report(pnode_status status) {
  if (status != PNODE_OK) {
    std::fprintf(stderr, "pnode: %s: %s\n", pnode_status_string(status), pnode_last_error());
  }
  return exit_code(status);
}

struct SolveArgs {
  std::string problem;
  std::string method = "ek1";
  int order = 3;
  std::optional<double> dt;
  std::optional<double> rtol;
  std::optional<double> atol;
  std::string ops = "ode";
  bool first_order_transform = false;
  bool smooth = false;
  int samples = 0;
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "json";
  bool timing = false;
};

using ConfigPtr = std::unique_ptr<pnode_config, decltype(&pnode_config_destroy)>;
using ResultPtr = std::unique_ptr<pnode_result, decltype(&pnode_result_destroy)>;

int run_solve(const SolveArgs& a) {
  if (a.dt && (a.rtol || a.atol)) {
    std::fprintf(stderr, "pnode: --dt cannot be combined with --rtol/--atol\n");
    return kExitUsage;
  }
  if (!a.dt && (a.rtol.has_value() != a.atol.has_value())) {
    std::fprintf(stderr, "pnode: --rtol and --atol must be given together\n");
    return kExitUsage;
  }

  pnode_config* raw = nullptr;
  if (pnode_status s = pnode_config_create(&raw); s != PNODE_OK) return report(s);
  ConfigPtr cfg(raw, &pnode_config_destroy);

  pnode_status s = pnode_config_set_problem(cfg.get(), a.problem.c_str());
  if (s == PNODE_OK) s = pnode_config_set_method(cfg.get(), a.method == "ek0" ? PNODE_EK0 : PNODE_EK1);
  if (s == PNODE_OK) s = pnode_config_set_order(cfg.get(), a.order);
  if (s == PNODE_OK) {
    if (a.dt) s = pnode_config_set_fixed_step(cfg.get(), *a.dt);
    else if (a.rtol) s = pnode_config_set_adaptive(cfg.get(), *a.rtol, *a.atol);
  }
  if (s == PNODE_OK) s = pnode_config_set_operators(cfg.get(), a.ops.c_str());
  if (s == PNODE_OK) s = pnode_config_set_first_order_transform(cfg.get(), a.first_order_transform);
  if (s == PNODE_OK) s = pnode_config_set_smooth(cfg.get(), a.smooth);
  if (s == PNODE_OK) s = pnode_config_set_samples(cfg.get(), a.samples);
  if (s == PNODE_OK) s = pnode_config_set_seed(cfg.get(), a.seed);
  if (s == PNODE_OK) s = pnode_config_validate(cfg.get());
  if (s != PNODE_OK) return report(s);

  pnode_result* rraw = nullptr;
  if (s = pnode_run(cfg.get(), &rraw); s != PNODE_OK) return report(s);
  ResultPtr result(rraw, &pnode_result_destroy);

  const pnode_format fmt = a.format == "csv" ? PNODE_FORMAT_CSV : PNODE_FORMAT_JSON;
  return report(pnode_result_write(result.get(), a.out.c_str(), fmt, a.timing));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic ODE/DAE solver"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pnode_version());

  SolveArgs solve;
  auto* cmd_solve = app.add_subcommand("solve", "Solve one problem and write the posterior");
  cmd_solve->add_option("--problem", solve.problem, "Problem name (see `pnode problems`)")->required();
  cmd_solve->add_option("--method", solve.method)->check(CLI::IsMember({"ek0", "ek1"}))->capture_default_str();
  cmd_solve->add_option("--order", solve.order, "Prior smoothness q")->check(CLI::PositiveNumber)->capture_default_str();
  cmd_solve->add_option("--dt", solve.dt, "Fixed step size")->check(CLI::PositiveNumber);
  cmd_solve->add_option("--rtol", solve.rtol)->check(CLI::PositiveNumber);
  cmd_solve->add_option("--atol", solve.atol)->check(CLI::PositiveNumber);
  cmd_solve->add_option("--ops", solve.ops, "Subset of ode,chainrule,conservation")->capture_default_str();
  cmd_solve->add_flag("--first-order-transform", solve.first_order_transform);
  cmd_solve->add_flag("--smooth", solve.smooth);
  cmd_solve->add_option("--samples", solve.samples, "Posterior samples (implies --smooth)")->check(CLI::NonNegativeNumber);
  cmd_solve->add_option("--seed", solve.seed);
  cmd_solve->add_option("--out", solve.out)->required();
  cmd_solve->add_option("--format", solve.format)->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  cmd_solve->add_flag("--timing", solve.timing, "Include wall time in the output");

  std::string bench_config;
  std::string bench_out;
  unsigned bench_threads = 0;
  auto* cmd_bench = app.add_subcommand("bench", "Run a work-precision sweep and write CSV");
  cmd_bench->add_option("config", bench_config, "Sweep configuration file")->required();
  cmd_bench->add_option("--out", bench_out)->required();
  cmd_bench->add_option("--threads", bench_threads, "Worker count (0: PNODE_THREADS or all cores)");

  app.add_subcommand("problems", "List the bundled problems");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (*cmd_solve) return run_solve(solve);
  if (*cmd_bench) return report(pnode_bench_run(bench_config.c_str(), bench_out.c_str(), bench_threads));
  for (size_t i = 0; i < pnode_problem_count(); ++i) std::printf("%s\n", pnode_problem_name(i));
  return kExitOk;
}
