#include "pnode/pnode.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "pnode/bench.hpp"
#include "pnode/error.hpp"
#include "pnode/report.hpp"

struct pnode_config {
  pnode::RunSpec spec;
};

struct pnode_result {
  pnode::RunResult result;
};

namespace {

thread_local std::string last_error;

pnode_status status_for(pnode::ErrorCode code) {
  using pnode::ErrorCode;
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::NoOdeOperator:
    case ErrorCode::MultipleOdeOperators:
    case ErrorCode::NoAnalyticSolution:
    case ErrorCode::UnsupportedField: return PNODE_E_INVALID_ARGUMENT;
    case ErrorCode::UnknownProblem: return PNODE_E_UNKNOWN_PROBLEM;
    case ErrorCode::OrderTooLow: return PNODE_E_ORDER_TOO_LOW;
    case ErrorCode::NonFiniteField:
    case ErrorCode::StepUnderflow:
    case ErrorCode::TooManyRejections: return PNODE_E_SOLVER_ABORT;
    case ErrorCode::ReferenceInconsistent: return PNODE_E_REFERENCE;
    case ErrorCode::Io: return PNODE_E_IO;
  }
  return PNODE_E_INTERNAL;
}

pnode_status fail(pnode_status status, std::string message) {
  last_error = std::move(message);
  return status;
}

template <class Fn>
pnode_status guarded(Fn&& fn) {
  try {
    last_error.clear();
    return fn();
  } catch (const pnode::Error& e) {
    return fail(status_for(e.code()), e.what());
  } catch (const std::exception& e) {
    return fail(PNODE_E_INTERNAL, e.what());
  } catch (...) {
    return fail(PNODE_E_INTERNAL, "unknown error");
  }
}

pnode_status null_arg(const char* what) { return fail(PNODE_E_INVALID_ARGUMENT, std::string(what) + " is null"); }

}  // namespace

extern "C" {

const char* pnode_version(void) { return "1.0.0"; }

const char* pnode_last_error(void) { return last_error.c_str(); }

const char* pnode_status_string(pnode_status status) {
  switch (status) {
    case PNODE_OK: return "ok";
    case PNODE_E_INVALID_ARGUMENT: return "invalid argument";
    case PNODE_E_UNKNOWN_PROBLEM: return "unknown problem";
    case PNODE_E_ORDER_TOO_LOW: return "order too low";
    case PNODE_E_SOLVER_ABORT: return "solver aborted";
    case PNODE_E_REFERENCE: return "reference inconsistent";
    case PNODE_E_IO: return "i/o error";
    case PNODE_E_INTERNAL: return "internal error";
  }
  return "unknown status";
}

size_t pnode_problem_count(void) { return pnode::problem_names().size(); }

const char* pnode_problem_name(size_t index) {
  const auto& names = pnode::problem_names();
  return index < names.size() ? names[index].c_str() : nullptr;
}

pnode_status pnode_config_create(pnode_config** out) {
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = new pnode_config{};
    return PNODE_OK;
  });
}

void pnode_config_destroy(pnode_config* config) { delete config; }

pnode_status pnode_config_set_problem(pnode_config* config, const char* name) {
  if (!config) return null_arg("config");
  if (!name) return null_arg("name");
  return guarded([&] {
    pnode::load_problem(name);
    config->spec.problem = name;
    return PNODE_OK;
  });
}

pnode_status pnode_config_set_method(pnode_config* config, pnode_method method) {
  if (!config) return null_arg("config");
  if (method != PNODE_EK0 && method != PNODE_EK1) return fail(PNODE_E_INVALID_ARGUMENT, "unknown method");
  config->spec.approx = method == PNODE_EK0 ? pnode::Approximation::EK0 : pnode::Approximation::EK1;
  return PNODE_OK;
}

pnode_status pnode_config_set_order(pnode_config* config, int order) {
  if (!config) return null_arg("config");
  if (order < 1) return fail(PNODE_E_INVALID_ARGUMENT, "order must be >= 1");
  config->spec.order = order;
  return PNODE_OK;
}

pnode_status pnode_config_set_fixed_step(pnode_config* config, double dt) {
  if (!config) return null_arg("config");
  if (!(dt > 0.0) || !std::isfinite(dt)) return fail(PNODE_E_INVALID_ARGUMENT, "dt must be > 0");
  config->spec.step = pnode::FixedStep{dt};
  return PNODE_OK;
}

pnode_status pnode_config_set_adaptive(pnode_config* config, double rtol, double atol) {
  if (!config) return null_arg("config");
  if (!(rtol > 0.0) || !(atol > 0.0)) return fail(PNODE_E_INVALID_ARGUMENT, "rtol and atol must be > 0");
  config->spec.step = pnode::AdaptiveStep{rtol, atol};
  return PNODE_OK;
}

pnode_status pnode_config_set_operators(pnode_config* config, const char* ops) {
  if (!config) return null_arg("config");
  if (!ops) return null_arg("ops");
  return guarded([&] {
    config->spec.operators = pnode::parse_ops(ops);
    return PNODE_OK;
  });
}

pnode_status pnode_config_set_first_order_transform(pnode_config* config, int enabled) {
  if (!config) return null_arg("config");
  config->spec.first_order_transform = enabled != 0;
  return PNODE_OK;
}

pnode_status pnode_config_set_smooth(pnode_config* config, int enabled) {
  if (!config) return null_arg("config");
  config->spec.smooth = enabled != 0;
  return PNODE_OK;
}

pnode_status pnode_config_set_samples(pnode_config* config, int n_samples) {
  if (!config) return null_arg("config");
  if (n_samples < 0) return fail(PNODE_E_INVALID_ARGUMENT, "sample count must be >= 0");
  config->spec.samples = n_samples;
  return PNODE_OK;
}

pnode_status pnode_config_set_seed(pnode_config* config, uint64_t seed) {
  if (!config) return null_arg("config");
  config->spec.seed = seed;
  return PNODE_OK;
}

pnode_status pnode_config_validate(const pnode_config* config) {
  if (!config) return null_arg("config");
  return guarded([&] {
    const pnode::IVProblem problem = pnode::prepare_problem(config->spec);
    pnode::build_plan(problem, pnode::make_config(config->spec));
    return PNODE_OK;
  });
}

pnode_status pnode_run(const pnode_config* config, pnode_result** out) {
  if (!config) return null_arg("config");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    auto* r = new pnode_result{pnode::run(config->spec)};
    *out = r;
    return PNODE_OK;
  });
}

void pnode_result_destroy(pnode_result* result) { delete result; }

size_t pnode_result_num_nodes(const pnode_result* result) {
  return result ? result->result.solution.size() : 0;
}

size_t pnode_result_dim(const pnode_result* result) {
  return result ? static_cast<size_t>(result->result.solution.d) : 0;
}

pnode_status pnode_result_times(const pnode_result* result, double* out, size_t n) {
  if (!result) return null_arg("result");
  if (!out) return null_arg("out");
  const auto& times = result->result.solution.times;
  if (n != times.size()) return fail(PNODE_E_INVALID_ARGUMENT, "buffer length must equal the node count");
  std::copy(times.begin(), times.end(), out);
  return PNODE_OK;
}

static pnode_status copy_block(const pnode_result* result, size_t node, double* out, size_t n, bool want_std) {
  if (!result) return null_arg("result");
  if (!out) return null_arg("out");
  const pnode::Solution& sol = result->result.solution;
  if (node >= sol.size()) return fail(PNODE_E_INVALID_ARGUMENT, "node index out of range");
  if (n != static_cast<size_t>(sol.d)) return fail(PNODE_E_INVALID_ARGUMENT, "buffer length must equal dim");
  const pnode::GaussianSqrt& s = sol.posterior(node);
  const pnode::Vector v =
      want_std ? pnode::Vector(s.rfactor.leftCols(sol.d).colwise().norm().transpose()) : pnode::Vector(s.mean.head(sol.d));
  std::copy(v.data(), v.data() + v.size(), out);
  return PNODE_OK;
}

pnode_status pnode_result_mean(const pnode_result* result, size_t node, double* out, size_t n) {
  return copy_block(result, node, out, n, false);
}

pnode_status pnode_result_std(const pnode_result* result, size_t node, double* out, size_t n) {
  return copy_block(result, node, out, n, true);
}

pnode_status pnode_result_stats(const pnode_result* result, pnode_stats* out) {
  if (!result) return null_arg("result");
  if (!out) return null_arg("out");
  const auto& s = result->result.solution.stats;
  out->n_feval = s.n_feval;
  out->n_steps_accepted = s.n_steps_accepted;
  out->n_steps_rejected = s.n_steps_rejected;
  out->wall_time_ns = static_cast<long long>(s.wall_time * 1e9);
  return PNODE_OK;
}

double pnode_result_energy_drift(const pnode_result* result) {
  return result ? result->result.energy_drift : std::numeric_limits<double>::quiet_NaN();
}

double pnode_result_dae_residual(const pnode_result* result) {
  return result ? result->result.dae_residual : std::numeric_limits<double>::quiet_NaN();
}

pnode_status pnode_result_write(const pnode_result* result, const char* path, pnode_format format,
                                int include_timing) {
  if (!result) return null_arg("result");
  if (!path) return null_arg("path");
  if (format != PNODE_FORMAT_JSON && format != PNODE_FORMAT_CSV) {
    return fail(PNODE_E_INVALID_ARGUMENT, "unknown output format");
  }
  return guarded([&] {
    std::ofstream out(path, std::ios::binary);
    if (!out) return fail(PNODE_E_IO, std::string("cannot open '") + path + "' for writing");
    pnode::WriteOptions opts;
    opts.include_timing = include_timing != 0;
    if (format == PNODE_FORMAT_JSON) pnode::write_json(result->result, out, opts);
    else pnode::write_csv(result->result, out, opts);
    if (!out) return fail(PNODE_E_IO, std::string("write to '") + path + "' failed");
    return PNODE_OK;
  });
}

pnode_status pnode_bench_run(const char* config_path, const char* out_path, unsigned threads) {
  if (!config_path) return null_arg("config_path");
  if (!out_path) return null_arg("out_path");
  return guarded([&] {
    const pnode::BenchConfig cfg = pnode::load_bench_config(config_path);
    const auto records = pnode::run_bench(cfg, threads);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) return fail(PNODE_E_IO, std::string("cannot open '") + out_path + "' for writing");
    pnode::write_bench_csv(records, out);
    if (!out) return fail(PNODE_E_IO, std::string("write to '") + out_path + "' failed");
    return PNODE_OK;
  });
}

}  // extern "C"
