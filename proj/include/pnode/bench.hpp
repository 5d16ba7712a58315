#pragma once

// Work-precision sweeps. One record per (problem, method, order, operator
// set, transform, tolerance) cell.

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "pnode/report.hpp"

namespace pnode {

enum class StepMode { Adaptive, Fixed };

struct BenchConfig {
  std::vector<std::string> problems;
  std::vector<Approximation> methods{Approximation::EK1};
  std::vector<int> orders{3};
  std::vector<OperatorSet> operator_sets{OperatorSet{}};
  StepMode mode = StepMode::Adaptive;
  std::vector<double> ladder{1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9};
  std::vector<bool> transforms{false};
  int transform_order_offset = -1;
  std::uint64_t seed = 0;
  double reference_tol = 1e-12;
};

// Grammar: one `key = value` per line, `#` starts a comment, list values are
// comma separated. See docs/bench-config.md.
BenchConfig parse_bench_config(std::istream& in);
BenchConfig load_bench_config(const std::string& path);

struct BenchRecord {
  std::string problem;
  std::string method;
  int order = 0;
  std::string ops;
  std::string mode;
  double tol_or_dt = 0.0;
  double final_error = 0.0;
  long n_feval = 0;
  long n_steps = 0;
  long long wall_time_ns = 0;
  double energy_drift = 0.0;  // NaN -> empty field
  double dae_residual = 0.0;  // NaN -> empty field
  std::uint64_t seed = 0;
};

inline constexpr const char* kBenchHeader =
    "problem,method,order,ops,mode,tol_or_dt,final_error,n_feval,n_steps,wall_time_ns,energy_drift,"
    "dae_residual,seed";

// Worker count from PNODE_THREADS, else the hardware concurrency.
unsigned bench_threads();

std::vector<BenchRecord> run_bench(const BenchConfig& config, unsigned threads = 0);
void write_bench_csv(const std::vector<BenchRecord>& records, std::ostream& out);

}  // namespace pnode
