#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "smile/lmm.hpp"
#include "smile/sr_branch.hpp"
#include "smile/unmix_branch.hpp"

namespace smile {

/// Convex coefficients of the scalarized objective α₁L₁ + α₂L₂ + α₃L₃ + α₄L₄.
struct ScalarizationWeights {
  double a1 = 0.4;
  double a2 = 0.4;
  double a3 = 0.1;
  double a4 = 0.1;

  /// Rejects negative weights or a sum off 1 by more than 1e-9; weights are
  /// never silently renormalized.
  void validate() const;
  bool convex() const;
  double sum() const { return a1 + a2 + a3 + a4; }
};

enum class Optimizer { Sgd, Adam };
enum class TrainMode { Smile, SingleTask };

struct TrainConfig {
  double learning_rate = 1e-3;
  int iterations = 4000;
  Optimizer optimizer = Optimizer::Adam;
  ScalarizationWeights weights;
  SrConfig sr;
  std::uint64_t seed = 0;
  bool project_endmembers = true;  // clamp θ_E >= 0 after each update
  TrainMode mode = TrainMode::Smile;
  int hidden = 64;           // encoder width
  bool raw_loss_sums = false;  // raw Frobenius/sum losses instead of means

  void validate() const;
};

struct AdamSlot {
  Eigen::ArrayXd m, v;
};

/// All trainable state plus the frozen noise inputs. The decoder is a single
/// object read by both branches — the task-shared parameter.
struct ParamState {
  int height = 0;
  int width = 0;
  SharedDecoderParams decoder;
  UnmixEncoderParams encoder;
  SrGeneratorParams sr;
  NoiseInputs noise;
  int adam_step = 0;
  std::vector<AdamSlot> adam;

  long parameter_count(TrainMode mode) const;
};

struct LossBreakdown {
  double l1 = 0.0, l2 = 0.0, l3 = 0.0, l4 = 0.0, total = 0.0;
};

struct StepLog {
  int iteration = 0;
  LossBreakdown losses;
};

struct TrainResult {
  EndmemberMatrix endmembers;
  AbundanceMap abundance;     // Â₁ at the final parameters
  HsiCube reconstruction;     // Ŷ₁
  std::vector<StepLog> history;
  std::optional<AbundanceMap> hr_abundance;  // Â_HR (SMILE mode only)
  std::optional<HsiCube> hr_cube;            // Ŷ_HR
  std::optional<Eigen::MatrixXd> kernel;     // K̂
};

/// θ_E from VCA, branch weights He-uniform, noise inputs drawn once.
ParamState initialize(const HsiCube& cube, int p, const TrainConfig& cfg);

/// Scalarized loss and its per-term breakdown at the current parameters.
/// Single-task mode treats α₂ as 0 and never evaluates the SR branch.
LossBreakdown total_loss(const ParamState& state, const HsiCube& cube, const TrainConfig& cfg);

/// One forward/backward pass and optimizer update. Throws DivergenceError
/// (naming the iteration and term) when the loss goes non-finite.
StepLog train_step(ParamState& state, const HsiCube& cube, const TrainConfig& cfg, int iteration);

/// Runs cfg.iterations steps with no early stopping. On divergence the partial
/// history is left in *history_out (when given) and the error is rethrown.
TrainResult train(const HsiCube& cube, int p, const TrainConfig& cfg,
                  std::vector<StepLog>* history_out = nullptr);

namespace detail {
/// Trainable parameters in update order; SR parameters are absent in
/// single-task mode.
std::vector<Eigen::ArrayXd*> trainable_params(ParamState& state, TrainMode mode);

struct ForwardGraph {
  Tensor y_nc;
  Tensor abundance;  // N×p
  Tensor l1, l3, l4;
  Tensor l2;     // invalid in single-task mode
  Tensor total;
  UnmixBinding enc;
  Tensor theta_e;
  SrBinding sr;
};

ForwardGraph build_forward(Tape& tape, const ParamState& state, const HsiCube& cube,
                           const TrainConfig& cfg, bool trainable);
}  // namespace detail

}  // namespace smile
