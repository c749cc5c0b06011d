#include "smile/trainer.hpp"

#include <cmath>

#include "smile/errors.hpp"
#include "smile/rng.hpp"
#include "smile/vca.hpp"

namespace smile {

void ScalarizationWeights::validate() const {
  if (!convex()) {
    throw ConfigError("ScalarizationWeights: need a_i >= 0 and sum(a) = 1 (got sum " +
                      std::to_string(sum()) + "); weights are not renormalized");
  }
}

bool ScalarizationWeights::convex() const {
  return a1 >= 0.0 && a2 >= 0.0 && a3 >= 0.0 && a4 >= 0.0 && std::abs(sum() - 1.0) <= 1e-9;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("TrainConfig: learning_rate must be > 0");
  if (iterations < 1) throw ConfigError("TrainConfig: iterations must be >= 1");
  if (hidden < 1) throw ConfigError("TrainConfig: hidden width must be >= 1");
  weights.validate();
  sr.validate();
}

long ParamState::parameter_count(TrainMode mode) const {
  long q = encoder.parameter_count() + decoder.theta_e.size();
  if (mode == TrainMode::Smile) q += sr.parameter_count();
  return q;
}

ParamState initialize(const HsiCube& cube, int p, const TrainConfig& cfg) {
  cfg.validate();
  ParamState state;
  state.height = cube.height;
  state.width = cube.width;
  state.decoder = SharedDecoderParams(vca_extract(cube, p, cfg.seed));

  auto enc_rng = make_rng(cfg.seed, RngStream::UnmixInit);
  state.encoder = UnmixEncoderParams::random(cube.channels, cfg.hidden, p, enc_rng);
  auto sr_rng = make_rng(cfg.seed, RngStream::SrInit);
  state.sr = SrGeneratorParams::random(cfg.sr, p, sr_rng);
  auto noise_rng = make_rng(cfg.seed, RngStream::NoiseInputs);
  state.noise = NoiseInputs::sample(cube.height, cube.width, cfg.sr, noise_rng);
  return state;
}

namespace detail {

std::vector<Eigen::ArrayXd*> trainable_params(ParamState& s, TrainMode mode) {
  std::vector<Eigen::ArrayXd*> params{&s.encoder.w1, &s.encoder.b1, &s.encoder.w2,
                                      &s.encoder.b2, &s.encoder.w3, &s.encoder.b3,
                                      &s.decoder.theta_e};
  if (mode == TrainMode::Smile) {
    for (Eigen::ArrayXd* a : {&s.sr.k1, &s.sr.kb1, &s.sr.k2, &s.sr.kb2, &s.sr.k3, &s.sr.kb3,
                              &s.sr.wk1, &s.sr.bk1, &s.sr.wk2, &s.sr.bk2}) {
      params.push_back(a);
    }
  }
  return params;
}

ForwardGraph build_forward(Tape& tape, const ParamState& state, const HsiCube& cube,
                           const TrainConfig& cfg, bool trainable) {
  ForwardGraph g;
  g.y_nc = tape.constant({cube.pixels(), cube.channels}, cube.values);
  g.enc = bind_unmix(tape, state.encoder, trainable);
  g.theta_e = bind_decoder(tape, state.decoder, trainable);

  g.abundance = abundance_graph(g.y_nc, g.enc);
  g.l1 = l1_graph(g.y_nc, decode_graph(g.abundance, g.theta_e), cfg.raw_loss_sums);
  g.l3 = l3_graph(g.abundance, cfg.raw_loss_sums);
  g.l4 = l4_graph(g.abundance, cfg.raw_loss_sums);

  Tensor total = scale(g.l1, cfg.weights.a1);
  if (cfg.mode == TrainMode::Smile) {
    Tensor y_hwc = reshape(g.y_nc, {cube.height, cube.width, cube.channels});
    Tensor l_y = tape.constant({state.noise.height, state.noise.width, state.noise.channels},
                               state.noise.l_y);
    Tensor l_k = tape.constant({static_cast<int>(state.noise.l_k.size())}, state.noise.l_k);
    g.sr = bind_sr(tape, state.sr, trainable);
    Tensor hr = hr_abundance_graph(l_y, g.sr);
    Tensor kernel = kernel_graph(l_k, g.sr, state.sr.kernel_size);
    g.l2 = l2_graph(y_hwc, hr, g.theta_e, kernel, cfg.sr.scale, cfg.raw_loss_sums);
    total = add(total, scale(g.l2, cfg.weights.a2));
  }
  total = add(total, scale(g.l3, cfg.weights.a3));
  g.total = add(total, scale(g.l4, cfg.weights.a4));
  return g;
}

}  // namespace detail

namespace {

LossBreakdown breakdown_of(const detail::ForwardGraph& g, const TrainConfig& cfg) {
  LossBreakdown b;
  b.l1 = g.l1.value();
  b.l2 = cfg.mode == TrainMode::Smile ? g.l2.value() : 0.0;
  b.l3 = g.l3.value();
  b.l4 = g.l4.value();
  b.total = g.total.value();
  return b;
}

void check_finite(const LossBreakdown& b, int iteration) {
  const std::pair<const char*, double> terms[] = {
      {"L1", b.l1}, {"L2", b.l2}, {"L3", b.l3}, {"L4", b.l4}, {"total", b.total}};
  for (const auto& [name, value] : terms) {
    if (!std::isfinite(value)) throw DivergenceError(iteration, name);
  }
}

}  // namespace

LossBreakdown total_loss(const ParamState& state, const HsiCube& cube, const TrainConfig& cfg) {
  cfg.validate();
  Tape tape;
  detail::ForwardGraph g = detail::build_forward(tape, state, cube, cfg, false);
  return breakdown_of(g, cfg);
}

StepLog train_step(ParamState& state, const HsiCube& cube, const TrainConfig& cfg,
                   int iteration) {
  Tape tape;
  detail::ForwardGraph g = detail::build_forward(tape, state, cube, cfg, true);
  StepLog log{iteration, breakdown_of(g, cfg)};
  check_finite(log.losses, iteration);
  tape.backward(g.total);

  const Tensor bound[] = {g.enc.w1, g.enc.b1, g.enc.w2,  g.enc.b2,  g.enc.w3,  g.enc.b3,
                          g.theta_e, g.sr.k1,  g.sr.kb1,  g.sr.k2,   g.sr.kb2,  g.sr.k3,
                          g.sr.kb3,  g.sr.wk1, g.sr.bk1,  g.sr.wk2,  g.sr.bk2};
  std::vector<Eigen::ArrayXd*> params = detail::trainable_params(state, cfg.mode);

  if (cfg.optimizer == Optimizer::Adam && state.adam.size() != params.size()) {
    state.adam.assign(params.size(), AdamSlot{});
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.adam[i].m = Eigen::ArrayXd::Zero(params[i]->size());
      state.adam[i].v = Eigen::ArrayXd::Zero(params[i]->size());
    }
  }

  if (cfg.optimizer == Optimizer::Adam) ++state.adam_step;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Eigen::ArrayXd grad = tape.grad(bound[i]);
    Eigen::ArrayXd& value = *params[i];
    if (cfg.optimizer == Optimizer::Sgd) {
      value -= cfg.learning_rate * grad;
    } else {
      constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
      AdamSlot& slot = state.adam[i];
      slot.m = kBeta1 * slot.m + (1.0 - kBeta1) * grad;
      slot.v = kBeta2 * slot.v + (1.0 - kBeta2) * grad.square();
      const double c1 = 1.0 - std::pow(kBeta1, state.adam_step);
      const double c2 = 1.0 - std::pow(kBeta2, state.adam_step);
      value -= cfg.learning_rate * (slot.m / c1) / ((slot.v / c2).sqrt() + kEps);
    }
  }
  if (cfg.project_endmembers) {
    state.decoder.theta_e = state.decoder.theta_e.max(0.0);
  }
  return log;
}

TrainResult train(const HsiCube& cube, int p, const TrainConfig& cfg,
                  std::vector<StepLog>* history_out) {
  ParamState state = initialize(cube, p, cfg);
  TrainResult result;
  std::vector<StepLog>& history = history_out ? *history_out : result.history;
  history.clear();
  history.reserve(static_cast<std::size_t>(cfg.iterations));
  for (int t = 0; t < cfg.iterations; ++t) {
    history.push_back(train_step(state, cube, cfg, t));
  }
  if (history_out) result.history = *history_out;

  result.endmembers = state.decoder.as_endmembers();
  result.abundance = encode_abundance(cube, state.encoder);
  result.reconstruction = decode(result.abundance, state.decoder);
  if (cfg.mode == TrainMode::Smile) {
    result.hr_abundance = generate_hr_abundance(state.noise, state.sr);
    result.hr_cube = decode(*result.hr_abundance, state.decoder);
    result.kernel = generate_kernel(state.noise, state.sr);
  }
  return result;
}

}  // namespace smile
