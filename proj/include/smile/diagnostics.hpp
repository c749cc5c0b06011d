#pragma once

#include <span>
#include <vector>

#include "smile/trainer.hpp"

namespace smile {

/// Gradient of one task's loss split into the task-specific block and the
/// shared (decoder) block.
struct TaskGradient {
  Eigen::VectorXd specific;
  Eigen::VectorXd shared;
  double norm() const { return std::sqrt(specific.squaredNorm() + shared.squaredNorm()); }
};

/// A pair of losses sharing one parameter block. Task 1 is the main task
/// (unmixing), task 2 the auxiliary (super-resolution). The diagnostics below
/// are written against this interface so closed-form toy problems can drive
/// them in tests.
class TwoTaskProblem {
 public:
  virtual ~TwoTaskProblem() = default;
  virtual double loss1() = 0;
  virtual double loss2() = 0;
  virtual TaskGradient grad1() = 0;
  virtual TaskGradient grad2() = 0;
  virtual Eigen::VectorXd shared_params() const = 0;
  virtual void set_shared_params(const Eigen::VectorXd& v) = 0;
  virtual Eigen::VectorXd task1_params() const = 0;
  virtual void set_task1_params(const Eigen::VectorXd& v) = 0;
};

/// Λ_{2→1}: applies a plain gradient step −η·∇_shared ℓ₂ to the shared
/// parameters only, re-evaluates ℓ₁ with task-1 parameters frozen, and returns
/// 1 − ℓ₁(after)/ℓ₁(before). Side-effect free; η = 0 gives exactly 0.
/// Throws NumericError when ℓ₁ = 0 at the base point.
double task_affinity(TwoTaskProblem& problem, double eta);

struct GradientGeometry {
  double dot = 0.0;     // G₁·G₂ over the common coordinates (the shared block)
  double cosine = 0.0;  // 0 with zero_norm set when either gradient vanishes
  double norm1 = 0.0;
  double norm2 = 0.0;
  bool zero_norm = false;
};

/// Backpropagates both branch losses independently and reports their inner
/// product and angle. Task-specific coordinates contribute zero to the other
/// task's gradient, so the inner product reduces to the shared block.
GradientGeometry gradient_geometry(TwoTaskProblem& problem);

struct Theorem2Result {
  double l1_base = 0.0;
  double l1_mtl = 0.0;     // ℓ₁ after the combined step −η(G₁+G₂)
  double l1_single = 0.0;  // ℓ₁ after the single-task step −ηG₁
  double margin = 0.0;     // l1_single − l1_mtl
};

/// Step-dominance probe: evaluates ℓ₁ after the combined and the single-task
/// update from the same base point. Side-effect free.
Theorem2Result theorem2_check(TwoTaskProblem& problem, double eta);

struct Lemma1Report {
  long parameter_count = 0;
  int task_count = 2;
  bool overparameterized = false;  // parameter_count >= 100 × task_count
  long geometry_samples = 0;
  double conflict_free_fraction = 0.0;  // fraction of samples with G₁·G₂ >= 0
  bool weights_convex = false;
  double weight_sum = 0.0;
};

Lemma1Report lemma1_preconditions(const ParamState& state, const TrainConfig& cfg,
                                  std::span<const GradientGeometry> trace = {});

/// Adapter exposing a SMILE parameter state as a TwoTaskProblem. Gradients and
/// losses are the plain branch losses (no scalarization weights). Mutations go
/// straight into the referenced state.
class SmileTaskPair : public TwoTaskProblem {
 public:
  SmileTaskPair(ParamState& state, const HsiCube& cube, const TrainConfig& cfg);
  double loss1() override;
  double loss2() override;
  TaskGradient grad1() override;
  TaskGradient grad2() override;
  Eigen::VectorXd shared_params() const override;
  void set_shared_params(const Eigen::VectorXd& v) override;
  Eigen::VectorXd task1_params() const override;
  void set_task1_params(const Eigen::VectorXd& v) override;

 private:
  ParamState& state_;
  const HsiCube& cube_;
  const TrainConfig& cfg_;
};

struct AffinityRecord {
  int iteration = 0;
  double lambda = 0.0;
  double bound = 0.0;  // η|G₁|²/ℓ₁
  double dot = 0.0;
  double cosine = 0.0;
  double l1_before = 0.0;
  double l1_mtl_step = 0.0;
  double l1_single_step = 0.0;
};

struct AffinitySummary {
  double mean_cosine = 0.0;
  double conflict_free_fraction = 0.0;
  double min_theorem2_margin = 0.0;    // over sampled non-conflicting points
  long theorem2_violations = 0;        // margin < −1e-6·ℓ₁(base) with G₁·G₂ >= 0
  long theorem2_samples = 0;
};

struct AffinityRunResult {
  std::vector<AffinityRecord> records;
  std::vector<GradientGeometry> geometry;
  std::vector<int> theorem2_iterations;
  std::vector<Theorem2Result> theorem2;
  std::vector<StepLog> history;
  AffinitySummary summary;
};

/// Trains for cfg.iterations with plain sgd (optimizer and projection are
/// forced to the theorem setting) while recording the affinity trace each
/// iteration. `affinity_eta` drives the Λ/bound/candidate-step probes
/// (may be 0); theorem-2 probes run at `theorem2_samples` evenly spaced
/// iterations with step `theorem2_eta`.
AffinityRunResult run_affinity_trace(const HsiCube& cube, int p, TrainConfig cfg,
                                     double affinity_eta, int theorem2_samples,
                                     double theorem2_eta);

}  // namespace smile
