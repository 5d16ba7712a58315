#include "pnode/solver.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>
#include <random>
#include <sstream>

#include "pnode/error.hpp"

namespace pnode {

namespace {

bool is_fixed(const SolverConfig& c) { return std::holds_alternative<FixedStep>(c.step); }

std::vector<double> fixed_grid(double t0, double t1, double dt) {
  const double span = t1 - t0;
  const auto n = static_cast<long>(std::ceil(span / dt * (1.0 - 1e-12)));
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(n) + 1);
  for (long k = 0; k < n; ++k) grid.push_back(t0 + static_cast<double>(k) * dt);
  grid.push_back(t1);
  return grid;
}

}  // namespace

// ------------------------------------------------------------------ config

void validate(const IVProblem& problem, const SolverConfig& config) {
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::InvalidArgument, msg); };
  if (config.order < 1) bad("order must be >= 1");
  if (const auto* f = std::get_if<FixedStep>(&config.step)) {
    if (!(f->dt > 0.0)) bad("fixed step size must be > 0");
  } else {
    const auto& a = std::get<AdaptiveStep>(config.step);
    if (!(a.rtol > 0.0) || !(a.atol > 0.0)) bad("adaptive mode needs rtol > 0 and atol > 0");
  }
  if (!(problem.t1 > problem.t0)) bad("time span must be increasing");
  if (problem.order == 2 && config.order < 2) {
    throw Error(ErrorCode::OrderTooLow, "second-order problems need q >= 2");
  }
  if (problem.is_dae() && config.approx != Approximation::EK1) bad("mass-matrix problems require ek1");
  if (config.operators.chainrule) {
    if (problem.order != 1 || problem.is_dae()) bad("chain-rule information needs an explicit first-order ODE");
    if (config.order < 2) throw Error(ErrorCode::OrderTooLow, "chain-rule information needs q >= 2");
  }
  if (config.operators.conservation && !problem.invariants) {
    bad("problem '" + problem.name + "' has no conserved quantities");
  }
}

UpdatePlan build_plan(const IVProblem& problem, const SolverConfig& config) {
  validate(problem, config);
  const int d = problem.dim;
  const int q = config.order;
  OperatorScheme scheme;
  if (problem.is_dae()) {
    scheme.operators.push_back(dae_operator(d, q, *problem.mass, problem.f, problem.df_dy));
  } else if (problem.order == 2) {
    scheme.operators.push_back(ode2_operator(d, q, problem.f, problem.df_dy, problem.df_ddy, config.approx));
  } else {
    scheme.operators.push_back(ode1_operator(d, q, problem.f, problem.df_dy, config.approx));
  }
  if (config.operators.chainrule) {
    scheme.operators.push_back(chainrule_operator(d, q, problem.f, problem.df_dy, problem.jff_jacobian));
  }
  if (config.operators.conservation) {
    scheme.operators.push_back(invariant_operator(d, q, *problem.invariants));
  }
  scheme.kind = config.operators.scheme.value_or(config.operators.conservation ? SchemeKind::Partitioned
                                                                                : SchemeKind::Joint);
  return compose(std::move(scheme));
}

// ------------------------------------------------- calibration and control

double local_diffusion(const Vector& residual, const Matrix& innovation_unit_factor, bool* singular) {
  const Eigen::Index m = residual.size();
  if (m == 0) return 0.0;
  const Vector w = whiten(innovation_unit_factor, residual, singular);
  return w.squaredNorm() / static_cast<double>(m);
}

double local_error(double sigma2, const Vector& row_norms, const Vector& scale) {
  if (row_norms.size() == 0) return 0.0;
  const double sigma = std::sqrt(std::max(sigma2, 0.0));
  const Vector ratio = (sigma * row_norms).cwiseQuotient(scale);
  return std::sqrt(ratio.squaredNorm() / static_cast<double>(ratio.size()));
}

StepDecision step_control(double error, double error_prev, double h, int q, const StepLimits& limits) {
  const double alpha = 0.7 / (q + 1);
  const double beta = 0.4 / (q + 1);
  const double e = std::max(error, 1e-10);
  const double e_prev = std::max(error_prev, 1e-10);
  const double factor = std::clamp(limits.safety * std::pow(e, -alpha) * std::pow(e_prev, beta),
                                   limits.min_factor, limits.max_factor);
  StepDecision out{error <= 1.0, h * factor};
  if (out.h_next < limits.min_step) {
    std::ostringstream msg;
    msg << "step size underflow: h_next = " << out.h_next << " (error estimate " << error << ")";
    throw Error(ErrorCode::StepUnderflow, msg.str());
  }
  return out;
}

// ----------------------------------------------------- preconditioned step

PreconditionedStep::PreconditionedStep(const IWPModel& model, double h) {
  const Preconditioner pre = preconditioner(model.q, h);
  scale_.resize(model.state_dim());
  for (int i = 0; i <= model.q; ++i) {
    scale_.segment(static_cast<Eigen::Index>(i) * model.d, model.d).setConstant(pre.t(i));
  }
  a_bar_ = kron_identity(pre.a_bar, model.d);
  q_bar_sqrt_ = kron_identity(pre.q_bar_sqrt, model.d);
}

GaussianSqrt PreconditionedStep::to_bar(const GaussianSqrt& s) const {
  return {s.mean.cwiseQuotient(scale_), s.rfactor * scale_.cwiseInverse().asDiagonal()};
}

GaussianSqrt PreconditionedStep::from_bar(const GaussianSqrt& s) const {
  return {s.mean.cwiseProduct(scale_), s.rfactor * scale_.asDiagonal()};
}

Vector PreconditionedStep::predict_mean(const Vector& mean) const {
  return (a_bar_ * mean.cwiseQuotient(scale_)).cwiseProduct(scale_);
}

GaussianSqrt PreconditionedStep::predict(const GaussianSqrt& state, double sigma2) const {
  return from_bar(pnode::predict(to_bar(state), a_bar_, std::sqrt(sigma2) * q_bar_sqrt_));
}

Matrix PreconditionedStep::unit_q_sqrt() const { return q_bar_sqrt_ * scale_.asDiagonal(); }

SmoothedPair PreconditionedStep::smooth(const GaussianSqrt& filtered, const GaussianSqrt& predicted,
                                        const GaussianSqrt& smoothed_next, double sigma2) const {
  SmoothedPair bar = smooth_pair(to_bar(filtered), to_bar(predicted), to_bar(smoothed_next), a_bar_,
                                 std::sqrt(sigma2) * q_bar_sqrt_);
  SmoothedPair out;
  out.state = from_bar(bar.state);
  out.gain = scale_.asDiagonal() * bar.gain * scale_.cwiseInverse().asDiagonal();
  out.backward_rfactor = bar.backward_rfactor * scale_.asDiagonal();
  out.singular = bar.singular;
  return out;
}

// ------------------------------------------------------------------- solve

Solution solve(const IVProblem& problem, const SolverConfig& config) {
  const UpdatePlan plan = build_plan(problem, config);
  return solve(problem, config, plan);
}

Solution solve(const IVProblem& problem, const SolverConfig& config, const UpdatePlan& plan) {
  validate(problem, config);
  const auto clock_start = std::chrono::steady_clock::now();

  const int d = problem.dim;
  const int q = config.order;
  const IWPModel model(d, q);
  const double t0 = problem.t0;
  const double t1 = problem.t1;
  const double span = t1 - t0;
  const InformationOperator& ode = plan.ode();

  Solution sol;
  sol.d = d;
  sol.q = q;
  sol.problem_order = problem.order;
  sol.times.push_back(t0);
  sol.filtered.push_back(initial_state(problem, q));

  const bool fixed = is_fixed(config);
  std::vector<double> grid;
  if (fixed) grid = fixed_grid(t0, t1, std::get<FixedStep>(config.step).dt);
  AdaptiveStep tol = fixed ? AdaptiveStep{} : std::get<AdaptiveStep>(config.step);

  std::vector<double> stops;
  for (double s : config.tstops)
    if (s > t0 && s < t1) stops.push_back(s);
  std::sort(stops.begin(), stops.end());
  stops.push_back(t1);
  std::size_t next_stop = 0;

  StepLimits limits;
  limits.min_step = 1e-14 * span;
  double h = config.initial_step > 0.0 ? config.initial_step : 0.01 * span;
  double error_prev = 1.0;
  int consecutive_rejections = 0;
  std::size_t grid_index = 1;

  // Only non-finite rejections count towards the abort limit; error-driven
  // rejections are bounded by the step underflow check.
  auto reject_nonfinite = [&](const std::string& why) {
    ++sol.stats.n_steps_rejected;
    if (fixed) throw Error(ErrorCode::NonFiniteField, why + " on a fixed grid at t = " + std::to_string(sol.times.back()));
    if (++consecutive_rejections > config.max_consecutive_rejections) {
      throw Error(ErrorCode::TooManyRejections,
                  "too many consecutive rejections at t = " + std::to_string(sol.times.back()) + ": " + why);
    }
  };

  while (true) {
    const double t = sol.times.back();
    double t_new;
    if (fixed) {
      if (grid_index >= grid.size()) break;
      t_new = grid[grid_index];
    } else {
      if (t >= t1) break;
      while (stops[next_stop] <= t) ++next_stop;
      const double stop = stops[next_stop];
      t_new = t + h;
      // Land on the next stop instead of leaving a sliver behind it.
      if (t_new >= stop || stop - t_new < 1e-10 * span) t_new = stop;
    }
    const double step = t_new - t;
    const GaussianSqrt& current = sol.filtered.back();
    const PreconditionedStep transition(model, step);
    const Vector mean_pred = transition.predict_mean(current.mean);

    Linearization ode_lin;
    try {
      sol.stats.n_feval += ode.cost().evaluate + ode.cost().linearize;
      ode_lin = ode.evaluate_and_linearize(t_new, mean_pred);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFiniteField) throw;
      reject_nonfinite(e.what());
      h *= 0.5;
      continue;
    }

    const Matrix qh = transition.unit_q_sqrt() * ode_lin.jacobian.transpose();
    const Matrix s_unit = triangularize(qh);
    const double sigma2 = local_diffusion(ode_lin.residual, s_unit);
    const Vector row_norms = qh.colwise().norm().transpose();

    double error = 0.0;
    if (!fixed) {
      const Vector y_now = current.mean.head(d).cwiseAbs();
      const Vector y_pred = mean_pred.head(d).cwiseAbs();
      const Vector scale = (tol.atol + tol.rtol * y_now.cwiseMax(y_pred).array()).matrix();
      error = std::isfinite(sigma2) ? local_error(sigma2, row_norms.head(d), scale)
                                    : std::numeric_limits<double>::infinity();
      if (!std::isfinite(error)) {
        reject_nonfinite("non-finite error estimate");
        h *= 0.5;
        continue;
      }
      const StepDecision decision = step_control(error, error_prev, step, q, limits);
      if (!decision.accept) {
        ++sol.stats.n_steps_rejected;
        h = decision.h_next;
        continue;
      }
      h = decision.h_next;
      error_prev = error;
    } else if (!std::isfinite(sigma2)) {
      reject_nonfinite("non-finite diffusion estimate");
    }

    UpdateOutcome outcome;
    try {
      const GaussianSqrt predicted = transition.predict(current, sigma2);
      outcome = plan.apply(predicted, t_new, &ode_lin);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFiniteField) throw;
      reject_nonfinite(e.what());
      h *= 0.5;
      error_prev = 1.0;
      continue;
    }
    sol.stats.n_feval += outcome.fevals;
    if (!outcome.state.mean.allFinite() || !outcome.state.rfactor.allFinite()) {
      reject_nonfinite("non-finite posterior");
      h *= 0.5;
      continue;
    }
    sol.stats.n_singular_updates += outcome.singular;
    ++sol.stats.n_steps_accepted;
    consecutive_rejections = 0;
    sol.times.push_back(t_new);
    sol.filtered.push_back(std::move(outcome.state));
    sol.local_diffusions.push_back(sigma2);
    sol.local_errors.push_back(error);
    ++grid_index;
  }

  if (config.smooth) smooth(sol);
  sol.stats.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
  return sol;
}

// --------------------------------------------------------------- smoothing

void smooth(Solution& sol) {
  const std::size_t n = sol.size();
  if (n == 0) return;
  const IWPModel model(sol.d, sol.q);
  sol.smoothed.assign(n, GaussianSqrt{});
  sol.smoothed[n - 1] = sol.filtered[n - 1];
  sol.gains.assign(n - 1, Matrix());
  sol.backward_factors.assign(n - 1, Matrix());
  sol.predicted_means.assign(n - 1, Vector());
  for (std::size_t k = n - 1; k-- > 0;) {
    const PreconditionedStep transition(model, sol.times[k + 1] - sol.times[k]);
    const double sigma2 = sol.local_diffusions[k];
    const GaussianSqrt predicted = transition.predict(sol.filtered[k], sigma2);
    SmoothedPair pair = transition.smooth(sol.filtered[k], predicted, sol.smoothed[k + 1], sigma2);
    sol.smoothed[k] = std::move(pair.state);
    sol.gains[k] = std::move(pair.gain);
    sol.backward_factors[k] = std::move(pair.backward_rfactor);
    sol.predicted_means[k] = predicted.mean;
  }
}

std::vector<std::vector<Vector>> sample(const Solution& sol, int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw Error(ErrorCode::InvalidArgument, "need at least one sample");
  if (!sol.is_smoothed()) throw Error(ErrorCode::InvalidArgument, "sampling needs a smoothed solution");
  const std::size_t n = sol.size();
  const Eigen::Index dim = sol.filtered.front().dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&]() {
    Vector z(dim);
    for (Eigen::Index i = 0; i < dim; ++i) z(i) = normal(rng);
    return z;
  };

  std::vector<std::vector<Vector>> out(static_cast<std::size_t>(n_samples), std::vector<Vector>(n));
  for (auto& path : out) {
    const GaussianSqrt& last = sol.smoothed[n - 1];
    path[n - 1] = last.mean + last.rfactor.transpose() * draw();
    for (std::size_t k = n - 1; k-- > 0;) {
      path[k] = sol.filtered[k].mean + sol.gains[k] * (path[k + 1] - sol.predicted_means[k]) +
                sol.backward_factors[k].transpose() * draw();
    }
  }
  return out;
}

Vector observable_mean(const Solution& sol, std::size_t node) {
  const Vector& m = sol.posterior(node).mean;
  if (sol.problem_order == 2) {
    Vector out(2 * sol.d);
    out << m.segment(sol.d, sol.d), m.head(sol.d);
    return out;
  }
  return m.head(sol.d);
}

}  // namespace pnode

