#pragma once

// Filtering loop: predict, calibrate, estimate the local error, accept or
// reject, then condition on the information operators. Smoothing and
// backward sampling operate on a finished forward pass.

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "pnode/infoops.hpp"
#include "pnode/prior.hpp"
#include "pnode/problem.hpp"

namespace pnode {

struct FixedStep {
  double dt = 0.0;
};

struct AdaptiveStep {
  double rtol = 1e-6;
  double atol = 1e-6;
};

struct OperatorSet {
  bool chainrule = false;
  bool conservation = false;
  // Defaults to Partitioned when conservation is requested, Joint otherwise.
  std::optional<SchemeKind> scheme;
};

struct SolverConfig {
  Approximation approx = Approximation::EK1;
  int order = 3;
  std::variant<FixedStep, AdaptiveStep> step = AdaptiveStep{};
  OperatorSet operators;
  bool smooth = false;
  std::uint64_t seed = 0;
  // Adaptive mode lands exactly on these times.
  std::vector<double> tstops;
  // 0 selects 0.01 (T - t0).
  double initial_step = 0.0;
  int max_consecutive_rejections = 20;
};

void validate(const IVProblem& problem, const SolverConfig& config);

UpdatePlan build_plan(const IVProblem& problem, const SolverConfig& config);

struct SolveStats {
  long n_feval = 0;
  long n_steps_accepted = 0;
  long n_steps_rejected = 0;
  long n_singular_updates = 0;
  double wall_time = 0.0;  // seconds
};

struct Solution {
  int d = 0;
  int q = 0;
  int problem_order = 1;
  std::vector<double> times;
  std::vector<GaussianSqrt> filtered;
  std::vector<GaussianSqrt> smoothed;       // empty until smoothed
  std::vector<double> local_diffusions;     // one per step
  std::vector<double> local_errors;         // one per step
  SolveStats stats;

  // Backward-pass quantities kept for sampling, one per step.
  std::vector<Matrix> gains;
  std::vector<Matrix> backward_factors;
  std::vector<Vector> predicted_means;

  std::size_t size() const { return times.size(); }
  bool is_smoothed() const { return !smoothed.empty(); }
  const GaussianSqrt& posterior(std::size_t n) const { return is_smoothed() ? smoothed[n] : filtered[n]; }
};

// Per-step quasi maximum likelihood diffusion: z^T (R^T R)^{-1} z / m where R
// is the right factor of the unit-diffusion innovation H Q Hᵀ.
double local_diffusion(const Vector& residual, const Matrix& innovation_unit_factor,
                       bool* singular = nullptr);

// RMS over coordinates of sqrt(sigma2) * row_norm_i / scale_i.
double local_error(double sigma2, const Vector& row_norms, const Vector& scale);

struct StepLimits {
  double min_factor = 0.2;
  double max_factor = 10.0;
  double safety = 0.95;
  double min_step = 0.0;  // StepUnderflow below this
};

struct StepDecision {
  bool accept = false;
  double h_next = 0.0;
};

// PI controller with exponents 0.7/(q+1) and 0.4/(q+1).
StepDecision step_control(double error, double error_prev, double h, int q, const StepLimits& limits);

// One IWP step of size h in step-size-free coordinates.
class PreconditionedStep {
 public:
  PreconditionedStep(const IWPModel& model, double h);

  Vector predict_mean(const Vector& mean) const;
  GaussianSqrt predict(const GaussianSqrt& state, double sigma2) const;
  // Unit-diffusion process-noise factor in original coordinates.
  Matrix unit_q_sqrt() const;
  SmoothedPair smooth(const GaussianSqrt& filtered, const GaussianSqrt& predicted,
                      const GaussianSqrt& smoothed_next, double sigma2) const;

 private:
  GaussianSqrt to_bar(const GaussianSqrt& s) const;
  GaussianSqrt from_bar(const GaussianSqrt& s) const;

  Vector scale_;
  Matrix a_bar_;
  Matrix q_bar_sqrt_;
};

Solution solve(const IVProblem& problem, const SolverConfig& config);
Solution solve(const IVProblem& problem, const SolverConfig& config, const UpdatePlan& plan);

void smooth(Solution& solution);

// samples[s][n] is the full state of sample s at node n.
std::vector<std::vector<Vector>> sample(const Solution& solution, int n_samples, std::uint64_t seed);

// y for order-1 problems, (y', y) for order-2 problems.
Vector observable_mean(const Solution& solution, std::size_t node);

}  // namespace pnode
