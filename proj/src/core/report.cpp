#include "pnode/report.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "pnode/error.hpp"

namespace pnode {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

nlohmann::json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json number_or_null(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }

std::string mode_label(const RunSpec& spec) {
  return std::holds_alternative<FixedStep>(spec.step) ? "fixed" : "adaptive";
}

double tol_or_dt(const RunSpec& spec) {
  if (const auto* f = std::get_if<FixedStep>(&spec.step)) return f->dt;
  return std::get<AdaptiveStep>(spec.step).rtol;
}

}  // namespace

std::string method_label(Approximation approx) { return approx == Approximation::EK0 ? "ek0" : "ek1"; }

Approximation parse_method(const std::string& text) {
  const std::string t = trim(text);
  if (t == "ek0") return Approximation::EK0;
  if (t == "ek1") return Approximation::EK1;
  throw Error(ErrorCode::InvalidArgument, "unknown method '" + t + "' (expected ek0 or ek1)");
}

std::string ops_label(const OperatorSet& ops, bool first_order_transform) {
  std::string s = "ode";
  if (ops.chainrule) s += "+chainrule";
  if (ops.conservation) s += "+conservation";
  if (first_order_transform) s += "@fo";
  return s;
}

OperatorSet parse_ops(const std::string& text) {
  OperatorSet ops;
  bool has_ode = false;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, text.find('+') != std::string::npos ? '+' : ',')) {
    item = trim(item);
    if (item == "ode") has_ode = true;
    else if (item == "chainrule") ops.chainrule = true;
    else if (item == "conservation") ops.conservation = true;
    else throw Error(ErrorCode::InvalidArgument, "unknown operator '" + item + "'");
  }
  if (!has_ode) throw Error(ErrorCode::NoOdeOperator, "operator set must include 'ode'");
  return ops;
}

IVProblem prepare_problem(const RunSpec& spec) {
  IVProblem p = load_problem(spec.problem);
  if (spec.first_order_transform) {
    if (p.order != 2) throw Error(ErrorCode::InvalidArgument, "first-order transform needs a second-order problem");
    p = first_order_twin(p);
  }
  return p;
}

SolverConfig make_config(const RunSpec& spec) {
  SolverConfig cfg;
  cfg.approx = spec.approx;
  cfg.order = spec.order;
  cfg.step = spec.step;
  cfg.operators = spec.operators;
  cfg.smooth = spec.smooth || spec.samples > 0;
  cfg.seed = spec.seed;
  return cfg;
}

RunResult run(const RunSpec& spec) {
  if (spec.samples < 0) throw Error(ErrorCode::InvalidArgument, "sample count must be >= 0");
  RunResult r;
  r.spec = spec;
  r.problem = prepare_problem(spec);
  const SolverConfig cfg = make_config(spec);
  validate(r.problem, cfg);
  r.solution = solve(r.problem, cfg);
  if (spec.samples > 0) r.samples = sample(r.solution, spec.samples, spec.seed);
  r.energy_drift = energy_drift(r.problem, r.solution);
  r.dae_residual = dae_residual(r.problem, r.solution);
  r.final_error = kNaN;
  if (r.problem.analytic) {
    r.final_error = (observable_mean(r.solution, r.solution.size() - 1) - r.problem.analytic(r.problem.t1)).norm();
  }
  return r;
}

double energy_drift(const IVProblem& problem, const Solution& sol) {
  if (!problem.invariants) return kNaN;
  double worst = 0.0;
  const int d = sol.d;
  for (std::size_t n = 0; n < sol.size(); ++n) {
    const Vector& m = sol.posterior(n).mean;
    const Vector g = problem.invariants->g(m.segment(d, d), m.head(d));
    worst = std::max(worst, g.cwiseAbs().maxCoeff());
  }
  return worst;
}

double dae_residual(const IVProblem& problem, const Solution& sol) {
  if (!problem.is_dae()) return kNaN;
  double worst = 0.0;
  for (std::size_t n = 0; n < sol.size(); ++n) {
    const Vector r = algebraic_residual(problem, sol.posterior(n).mean.head(sol.d));
    if (r.size() > 0) worst = std::max(worst, r.cwiseAbs().maxCoeff());
  }
  return worst;
}

void write_json(const RunResult& r, std::ostream& out, const WriteOptions& opts) {
  const Solution& sol = r.solution;
  const int d = sol.d;
  nlohmann::json j;
  j["problem"] = r.spec.problem;
  j["method"] = method_label(r.spec.approx);
  j["order"] = r.spec.order;
  j["ops"] = ops_label(r.spec.operators, r.spec.first_order_transform);
  j["mode"] = mode_label(r.spec);
  j["tol_or_dt"] = tol_or_dt(r.spec);
  j["seed"] = r.spec.seed;
  j["dim"] = d;
  j["smoothed"] = sol.is_smoothed();
  j["times"] = sol.times;
  nlohmann::json means = nlohmann::json::array(), stds = nlohmann::json::array();
  for (std::size_t n = 0; n < sol.size(); ++n) {
    const GaussianSqrt& s = sol.posterior(n);
    means.push_back(vec_json(s.mean.head(d)));
    stds.push_back(vec_json(s.rfactor.leftCols(d).colwise().norm().transpose()));
  }
  j["mean"] = std::move(means);
  j["std"] = std::move(stds);
  j["diffusions"] = sol.local_diffusions;
  nlohmann::json stats;
  stats["n_feval"] = sol.stats.n_feval;
  stats["n_steps_accepted"] = sol.stats.n_steps_accepted;
  stats["n_steps_rejected"] = sol.stats.n_steps_rejected;
  if (opts.include_timing) stats["wall_time_ns"] = static_cast<long long>(sol.stats.wall_time * 1e9);
  j["stats"] = std::move(stats);
  j["energy_drift"] = number_or_null(r.energy_drift);
  j["dae_residual"] = number_or_null(r.dae_residual);
  j["final_error"] = number_or_null(r.final_error);
  if (!r.samples.empty()) {
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& path : r.samples) {
      nlohmann::json p = nlohmann::json::array();
      for (const Vector& x : path) p.push_back(vec_json(x.head(d)));
      samples.push_back(std::move(p));
    }
    j["samples"] = std::move(samples);
  }
  out << j.dump(1) << '\n';
}

void write_csv(const RunResult& r, std::ostream& out, const WriteOptions&) {
  const Solution& sol = r.solution;
  const int d = sol.d;
  out << "t";
  for (int i = 0; i < d; ++i) out << ",mean_" << i;
  for (int i = 0; i < d; ++i) out << ",std_" << i;
  out << ",diffusion";
  for (std::size_t s = 0; s < r.samples.size(); ++s)
    for (int i = 0; i < d; ++i) out << ",sample" << s << '_' << i;
  out << '\n';
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  };
  for (std::size_t n = 0; n < sol.size(); ++n) {
    const GaussianSqrt& s = sol.posterior(n);
    out << num(sol.times[n]);
    for (int i = 0; i < d; ++i) out << ',' << num(s.mean(i));
    const Vector sd = s.rfactor.leftCols(d).colwise().norm().transpose();
    for (int i = 0; i < d; ++i) out << ',' << num(sd(i));
    out << ',';
    if (n > 0) out << num(sol.local_diffusions[n - 1]);
    for (const auto& path : r.samples)
      for (int i = 0; i < d; ++i) out << ',' << num(path[n](i));
    out << '\n';
  }
}

}  // namespace pnode
