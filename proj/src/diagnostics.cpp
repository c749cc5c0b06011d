#include "smile/diagnostics.hpp"

#include <cmath>
#include <utility>

#include "smile/errors.hpp"

namespace smile {

namespace {

Eigen::VectorXd concat(const std::vector<const Eigen::ArrayXd*>& arrays) {
  Eigen::Index total = 0;
  for (const auto* a : arrays) total += a->size();
  Eigen::VectorXd out(total);
  Eigen::Index at = 0;
  for (const auto* a : arrays) {
    out.segment(at, a->size()) = a->matrix();
    at += a->size();
  }
  return out;
}

void split_into(const Eigen::VectorXd& v, const std::vector<Eigen::ArrayXd*>& arrays) {
  Eigen::Index at = 0;
  for (Eigen::ArrayXd* a : arrays) {
    *a = v.segment(at, a->size()).array();
    at += a->size();
  }
  if (at != v.size()) throw DimensionError("split_into: vector length mismatch");
}

std::vector<Eigen::ArrayXd*> encoder_arrays(UnmixEncoderParams& e) {
  return {&e.w1, &e.b1, &e.w2, &e.b2, &e.w3, &e.b3};
}

std::vector<const Eigen::ArrayXd*> encoder_arrays(const UnmixEncoderParams& e) {
  return {&e.w1, &e.b1, &e.w2, &e.b2, &e.w3, &e.b3};
}

std::vector<Eigen::ArrayXd*> sr_arrays(SrGeneratorParams& s) {
  return {&s.k1, &s.kb1, &s.k2, &s.kb2, &s.k3, &s.kb3, &s.wk1, &s.bk1, &s.wk2, &s.bk2};
}

}  // namespace

SmileTaskPair::SmileTaskPair(ParamState& state, const HsiCube& cube, const TrainConfig& cfg)
    : state_(state), cube_(cube), cfg_(cfg) {}

double SmileTaskPair::loss1() {
  return loss_l1(cube_, state_.encoder, state_.decoder, cfg_.raw_loss_sums);
}

double SmileTaskPair::loss2() {
  return loss_l2(cube_, state_.noise, state_.sr, state_.decoder, cfg_.sr, cfg_.raw_loss_sums);
}

TaskGradient SmileTaskPair::grad1() {
  Tape tape;
  Tensor y = tape.constant({cube_.pixels(), cube_.channels}, cube_.values);
  UnmixBinding enc = bind_unmix(tape, state_.encoder, true);
  Tensor theta = bind_decoder(tape, state_.decoder, true);
  Tensor l1 = l1_graph(y, decode_graph(abundance_graph(y, enc), theta), cfg_.raw_loss_sums);
  tape.backward(l1);
  TaskGradient g;
  const Eigen::ArrayXd gw1 = tape.grad(enc.w1), gb1 = tape.grad(enc.b1),
                       gw2 = tape.grad(enc.w2), gb2 = tape.grad(enc.b2),
                       gw3 = tape.grad(enc.w3), gb3 = tape.grad(enc.b3);
  g.specific = concat({&gw1, &gb1, &gw2, &gb2, &gw3, &gb3});
  g.shared = tape.grad(theta).matrix();
  return g;
}

TaskGradient SmileTaskPair::grad2() {
  Tape tape;
  Tensor y = tape.constant({cube_.height, cube_.width, cube_.channels}, cube_.values);
  Tensor l_y = tape.constant({state_.noise.height, state_.noise.width, state_.noise.channels},
                             state_.noise.l_y);
  Tensor l_k = tape.constant({static_cast<int>(state_.noise.l_k.size())}, state_.noise.l_k);
  SrBinding gen = bind_sr(tape, state_.sr, true);
  Tensor theta = bind_decoder(tape, state_.decoder, true);
  Tensor hr = hr_abundance_graph(l_y, gen);
  Tensor kernel = kernel_graph(l_k, gen, state_.sr.kernel_size);
  Tensor l2 = l2_graph(y, hr, theta, kernel, cfg_.sr.scale, cfg_.raw_loss_sums);
  tape.backward(l2);
  TaskGradient g;
  const Eigen::ArrayXd g1 = tape.grad(gen.k1), g2 = tape.grad(gen.kb1), g3 = tape.grad(gen.k2),
                       g4 = tape.grad(gen.kb2), g5 = tape.grad(gen.k3), g6 = tape.grad(gen.kb3),
                       g7 = tape.grad(gen.wk1), g8 = tape.grad(gen.bk1), g9 = tape.grad(gen.wk2),
                       g10 = tape.grad(gen.bk2);
  g.specific = concat({&g1, &g2, &g3, &g4, &g5, &g6, &g7, &g8, &g9, &g10});
  g.shared = tape.grad(theta).matrix();
  return g;
}

Eigen::VectorXd SmileTaskPair::shared_params() const { return state_.decoder.theta_e.matrix(); }

void SmileTaskPair::set_shared_params(const Eigen::VectorXd& v) {
  if (v.size() != state_.decoder.theta_e.size()) {
    throw DimensionError("set_shared_params: length mismatch");
  }
  state_.decoder.theta_e = v.array();
}

Eigen::VectorXd SmileTaskPair::task1_params() const {
  return concat(encoder_arrays(std::as_const(state_.encoder)));
}

void SmileTaskPair::set_task1_params(const Eigen::VectorXd& v) {
  split_into(v, encoder_arrays(state_.encoder));
}

double task_affinity(TwoTaskProblem& problem, double eta) {
  if (eta < 0.0) throw ConfigError("task_affinity: eta must be >= 0");
  const double l1_before = problem.loss1();
  if (l1_before == 0.0) {
    throw NumericError("task_affinity: task-1 loss is zero at the base point; ratio undefined");
  }
  const TaskGradient g2 = problem.grad2();
  const Eigen::VectorXd saved = problem.shared_params();
  problem.set_shared_params(saved - eta * g2.shared);
  const double l1_after = problem.loss1();
  problem.set_shared_params(saved);
  return 1.0 - l1_after / l1_before;
}

GradientGeometry gradient_geometry(TwoTaskProblem& problem) {
  const TaskGradient g1 = problem.grad1();
  const TaskGradient g2 = problem.grad2();
  GradientGeometry geo;
  geo.dot = g1.shared.dot(g2.shared);
  geo.norm1 = g1.norm();
  geo.norm2 = g2.norm();
  if (geo.norm1 == 0.0 || geo.norm2 == 0.0) {
    geo.zero_norm = true;
    geo.cosine = 0.0;
  } else {
    geo.cosine = geo.dot / (geo.norm1 * geo.norm2);
  }
  return geo;
}

Theorem2Result theorem2_check(TwoTaskProblem& problem, double eta) {
  Theorem2Result res;
  res.l1_base = problem.loss1();
  const TaskGradient g1 = problem.grad1();
  const TaskGradient g2 = problem.grad2();
  const Eigen::VectorXd saved_shared = problem.shared_params();
  const Eigen::VectorXd saved_task1 = problem.task1_params();

  // Both candidates move the task-1 specific block by −ηG₁.
  problem.set_task1_params(saved_task1 - eta * g1.specific);
  problem.set_shared_params(saved_shared - eta * (g1.shared + g2.shared));
  res.l1_mtl = problem.loss1();
  problem.set_shared_params(saved_shared - eta * g1.shared);
  res.l1_single = problem.loss1();

  problem.set_task1_params(saved_task1);
  problem.set_shared_params(saved_shared);
  res.margin = res.l1_single - res.l1_mtl;
  return res;
}

Lemma1Report lemma1_preconditions(const ParamState& state, const TrainConfig& cfg,
                                  std::span<const GradientGeometry> trace) {
  Lemma1Report rep;
  rep.parameter_count = state.parameter_count(cfg.mode);
  rep.task_count = 2;
  rep.overparameterized = rep.parameter_count >= 100L * rep.task_count;
  rep.geometry_samples = static_cast<long>(trace.size());
  if (!trace.empty()) {
    long ok = 0;
    for (const GradientGeometry& g : trace) {
      if (g.dot >= 0.0) ++ok;
    }
    rep.conflict_free_fraction = static_cast<double>(ok) / static_cast<double>(trace.size());
  }
  rep.weights_convex = cfg.weights.convex();
  rep.weight_sum = cfg.weights.sum();
  return rep;
}

AffinityRunResult run_affinity_trace(const HsiCube& cube, int p, TrainConfig cfg,
                                     double affinity_eta, int theorem2_samples,
                                     double theorem2_eta) {
  // Theorems 1–2 assume plain gradient steps; adam preconditioning and the
  // nonnegativity projection would falsify the algebra.
  cfg.optimizer = Optimizer::Sgd;
  cfg.project_endmembers = false;
  cfg.mode = TrainMode::Smile;
  cfg.validate();
  if (affinity_eta < 0.0) throw ConfigError("run_affinity_trace: affinity eta must be >= 0");

  ParamState state = initialize(cube, p, cfg);
  SmileTaskPair pair(state, cube, cfg);

  const int stride = theorem2_samples > 0 ? std::max(1, cfg.iterations / theorem2_samples) : 0;

  AffinityRunResult run;
  run.records.reserve(static_cast<std::size_t>(cfg.iterations));
  double cos_total = 0.0;
  long conflict_free = 0;

  for (int t = 0; t < cfg.iterations; ++t) {
    Tape tape;
    detail::ForwardGraph g = detail::build_forward(tape, state, cube, cfg, true);
    StepLog log{t, {g.l1.value(), g.l2.value(), g.l3.value(), g.l4.value(), g.total.value()}};
    for (const auto& [name, value] :
         {std::pair<const char*, double>{"L1", log.losses.l1}, {"L2", log.losses.l2},
          {"L3", log.losses.l3}, {"L4", log.losses.l4}, {"total", log.losses.total}}) {
      if (!std::isfinite(value)) throw DivergenceError(t, name);
    }
    run.history.push_back(log);

    // Branch gradients off the shared graph.
    tape.backward(g.l1);
    const Eigen::ArrayXd g1w1 = tape.grad(g.enc.w1), g1b1 = tape.grad(g.enc.b1),
                         g1w2 = tape.grad(g.enc.w2), g1b2 = tape.grad(g.enc.b2),
                         g1w3 = tape.grad(g.enc.w3), g1b3 = tape.grad(g.enc.b3);
    const Eigen::VectorXd g1_specific = concat({&g1w1, &g1b1, &g1w2, &g1b2, &g1w3, &g1b3});
    const Eigen::VectorXd g1_shared = tape.grad(g.theta_e).matrix();

    tape.backward(g.l2);
    const Eigen::VectorXd g2_shared = tape.grad(g.theta_e).matrix();
    double g2_specific_sq = 0.0;
    for (const Tensor* srt : {&g.sr.k1, &g.sr.kb1, &g.sr.k2, &g.sr.kb2, &g.sr.k3, &g.sr.kb3,
                              &g.sr.wk1, &g.sr.bk1, &g.sr.wk2, &g.sr.bk2}) {
      g2_specific_sq += tape.grad(*srt).square().sum();
    }

    GradientGeometry geo;
    geo.dot = g1_shared.dot(g2_shared);
    geo.norm1 = std::sqrt(g1_specific.squaredNorm() + g1_shared.squaredNorm());
    geo.norm2 = std::sqrt(g2_specific_sq + g2_shared.squaredNorm());
    geo.zero_norm = geo.norm1 == 0.0 || geo.norm2 == 0.0;
    geo.cosine = geo.zero_norm ? 0.0 : geo.dot / (geo.norm1 * geo.norm2);
    run.geometry.push_back(geo);
    cos_total += geo.cosine;
    if (geo.dot >= 0.0) ++conflict_free;

    AffinityRecord rec;
    rec.iteration = t;
    rec.dot = geo.dot;
    rec.cosine = geo.cosine;
    rec.l1_before = log.losses.l1;
    rec.bound = affinity_eta * geo.norm1 * geo.norm1 / log.losses.l1;

    const Eigen::ArrayXd saved_theta = state.decoder.theta_e;
    const Eigen::VectorXd saved_enc = concat(encoder_arrays(std::as_const(state.encoder)));

    // Λ: Eq.-5 step on the shared block only, from the SR gradient.
    state.decoder.theta_e = saved_theta - affinity_eta * g2_shared.array();
    rec.lambda = 1.0 - pair.loss1() / log.losses.l1;

    // Candidate steps for the trace: combined vs single-task update.
    split_into(saved_enc - affinity_eta * g1_specific, encoder_arrays(state.encoder));
    state.decoder.theta_e = saved_theta - affinity_eta * (g1_shared + g2_shared).array();
    rec.l1_mtl_step = pair.loss1();
    state.decoder.theta_e = saved_theta - affinity_eta * g1_shared.array();
    rec.l1_single_step = pair.loss1();

    if (stride > 0 && t % stride == 0 &&
        static_cast<int>(run.theorem2.size()) < theorem2_samples) {
      Theorem2Result t2;
      t2.l1_base = log.losses.l1;
      split_into(saved_enc - theorem2_eta * g1_specific, encoder_arrays(state.encoder));
      state.decoder.theta_e = saved_theta - theorem2_eta * (g1_shared + g2_shared).array();
      t2.l1_mtl = pair.loss1();
      state.decoder.theta_e = saved_theta - theorem2_eta * g1_shared.array();
      t2.l1_single = pair.loss1();
      t2.margin = t2.l1_single - t2.l1_mtl;
      run.theorem2_iterations.push_back(t);
      run.theorem2.push_back(t2);
    }

    split_into(saved_enc, encoder_arrays(state.encoder));
    state.decoder.theta_e = saved_theta;
    run.records.push_back(rec);

    // Plain sgd update from the scalarized loss.
    tape.backward(g.total);
    const Tensor bound[] = {g.enc.w1, g.enc.b1, g.enc.w2, g.enc.b2, g.enc.w3, g.enc.b3,
                            g.theta_e, g.sr.k1, g.sr.kb1, g.sr.k2, g.sr.kb2, g.sr.k3,
                            g.sr.kb3, g.sr.wk1, g.sr.bk1, g.sr.wk2, g.sr.bk2};
    std::vector<Eigen::ArrayXd*> params = detail::trainable_params(state, cfg.mode);
    for (std::size_t i = 0; i < params.size(); ++i) {
      *params[i] -= cfg.learning_rate * tape.grad(bound[i]);
    }
  }

  run.summary.mean_cosine = cos_total / static_cast<double>(cfg.iterations);
  run.summary.conflict_free_fraction =
      static_cast<double>(conflict_free) / static_cast<double>(cfg.iterations);
  run.summary.theorem2_samples = static_cast<long>(run.theorem2.size());
  double min_margin = std::numeric_limits<double>::infinity();
  long violations = 0;
  for (std::size_t i = 0; i < run.theorem2.size(); ++i) {
    const int it = run.theorem2_iterations[i];
    if (run.geometry[static_cast<std::size_t>(it)].dot < 0.0) continue;
    const Theorem2Result& t2 = run.theorem2[i];
    min_margin = std::min(min_margin, t2.margin);
    if (t2.l1_mtl > t2.l1_single + 1e-6 * t2.l1_base) ++violations;
  }
  run.summary.min_theorem2_margin = std::isfinite(min_margin) ? min_margin : 0.0;
  run.summary.theorem2_violations = violations;
  return run;
}

}  // namespace smile
