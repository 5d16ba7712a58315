#pragma once

// Single-run driver and result serialization shared by the C API and CLI.

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "pnode/problems.hpp"
#include "pnode/solver.hpp"

namespace pnode {

struct RunSpec {
  std::string problem = "logistic";
  Approximation approx = Approximation::EK1;
  int order = 3;
  std::variant<FixedStep, AdaptiveStep> step = AdaptiveStep{};
  OperatorSet operators;
  bool first_order_transform = false;
  bool smooth = false;
  int samples = 0;
  std::uint64_t seed = 0;
};

struct RunResult {
  RunSpec spec;
  IVProblem problem;  // after the optional first-order transform
  Solution solution;
  std::vector<std::vector<Vector>> samples;
  double energy_drift = 0.0;  // NaN when the problem has no invariants
  double dae_residual = 0.0;  // NaN without a mass matrix
  double final_error = 0.0;   // vs the closed form; NaN when unavailable
};

IVProblem prepare_problem(const RunSpec& spec);
SolverConfig make_config(const RunSpec& spec);
RunResult run(const RunSpec& spec);

// "ode", "ode+chainrule", ...; "@fo" marks first-order transformed runs.
std::string ops_label(const OperatorSet& ops, bool first_order_transform);
// Parses "ode,chainrule,conservation" or "ode+chainrule".
OperatorSet parse_ops(const std::string& text);
std::string method_label(Approximation approx);
Approximation parse_method(const std::string& text);

// max_n |g(E1 mu_n, E0 mu_n)| over the grid.
double energy_drift(const IVProblem& problem, const Solution& solution);
// max_n max_i |algebraic row i of f(E0 mu_n)|.
double dae_residual(const IVProblem& problem, const Solution& solution);

struct WriteOptions {
  bool include_timing = false;
};

void write_json(const RunResult& result, std::ostream& out, const WriteOptions& opts = {});
void write_csv(const RunResult& result, std::ostream& out, const WriteOptions& opts = {});

}  // namespace pnode
