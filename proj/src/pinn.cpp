#include "mfpinn/pinn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mfpinn/kernels.hpp"
#include "mfpinn/rng.hpp"

namespace mfpinn::pinn {

void Normalization::validate() const {
  if (!(x_scale > 0.0 && t_scale > 0.0 && temp_scale > 0.0))
    throw ConfigError("normalization scales must be positive");
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be nonnegative");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor < 1.0))
    throw ConfigError("lr_decay_factor must be in (0,1)");
  if (lr_patience_epochs < 1) throw ConfigError("lr_patience_epochs must be >= 1");
  if (!(ema_alpha > 0.0 && ema_alpha <= 1.0))
    throw ConfigError("ema_alpha must be in (0,1]");
  if (weight_update_stride < 1)
    throw ConfigError("weight_update_stride must be >= 1");
  if (!(data_weight_per_label > 0.0))
    throw ConfigError("data_weight_per_label must be > 0");
}

PointSets sample_points(int n_collocation, int n_boundary, int n_initial,
                        std::uint64_t seed) {
  if (n_collocation < 0 || n_boundary < 0 || n_initial < 0)
    throw ConfigError("point counts must be nonnegative");
  if (n_boundary % 2 != 0)
    throw ConfigError("n_boundary must be even (split between the two sides)");
  Xoshiro256ss rng(seed);
  PointSets s;
  s.collocation.reserve(static_cast<std::size_t>(n_collocation));
  for (int i = 0; i < n_collocation; ++i) {
    const double xi = rng.uniform_open01();
    const double tau = rng.uniform_open01();
    s.collocation.push_back({xi, tau});
  }
  s.boundary.reserve(static_cast<std::size_t>(n_boundary));
  for (int i = 0; i < n_boundary / 2; ++i)
    s.boundary.push_back({Side::Bottom, rng.uniform_open01()});
  for (int i = 0; i < n_boundary / 2; ++i)
    s.boundary.push_back({Side::Top, rng.uniform_open01()});
  s.initial.reserve(static_cast<std::size_t>(n_initial));
  for (int i = 0; i < n_initial; ++i) s.initial.push_back(rng.uniform_open01());
  return s;
}

double diffusion_group(const heat::ThermalSetup& setup,
                       const Normalization& norm) {
  return setup.material.diffusivity() * norm.t_scale /
         (norm.x_scale * norm.x_scale);
}

double pde_residual(const net::Jet& jet, const heat::ThermalSetup& setup,
                    const Normalization& norm) {
  return jet.du_dt - diffusion_group(setup, norm) * jet.d2u_dx2;
}

std::pair<double, double> boundary_residuals(const net::Jet& jet_bottom,
                                             const net::Jet& jet_top,
                                             double tau,
                                             const heat::ThermalSetup& setup,
                                             const Normalization& norm) {
  if (tau < 0.0 || tau > 1.0)
    throw DomainError("boundary residual: tau outside [0,1]");
  const double u_air =
      norm.to_u(setup.cycle.air_temperature(tau * norm.t_scale));
  const double k_over_L = setup.material.conductivity / norm.x_scale;
  const double r_b = setup.htc_bottom * (jet_bottom.u - u_air) -
                     k_over_L * jet_bottom.du_dx;
  const double r_t =
      setup.htc_top * (u_air - jet_top.u) - k_over_L * jet_top.du_dx;
  return {r_b, r_t};
}

double initial_residual(const net::Jet& jet, double /*xi*/,
                        const heat::ThermalSetup& setup,
                        const Normalization& norm) {
  return jet.u - norm.to_u(setup.initial_temperature);
}

TrainProblem build_problem(const PointSets& sets,
                           const heat::ThermalSetup& setup,
                           const Normalization& norm) {
  norm.validate();
  setup.validate();
  TrainProblem p;
  p.kappa = diffusion_group(setup, norm);
  p.h_bottom = setup.htc_bottom;
  p.h_top = setup.htc_top;
  p.k_over_L = setup.material.conductivity / norm.x_scale;
  p.u0 = norm.to_u(setup.initial_temperature);

  p.collocation.reserve(sets.collocation.size());
  for (const auto& c : sets.collocation)
    p.collocation.push_back(net::EvalPoint::standard(c[0], c[1], 4));

  p.boundary.reserve(sets.boundary.size());
  p.boundary_sides.reserve(sets.boundary.size());
  p.boundary_air_u.reserve(sets.boundary.size());
  for (const auto& b : sets.boundary) {
    const double xi = (b.side == Side::Bottom) ? 0.0 : 1.0;
    p.boundary.push_back(net::EvalPoint::standard(xi, b.tau, 2));
    p.boundary_sides.push_back(b.side);
    p.boundary_air_u.push_back(
        norm.to_u(setup.cycle.air_temperature(b.tau * norm.t_scale)));
  }

  p.initial.reserve(sets.initial.size());
  for (double xi : sets.initial)
    p.initial.push_back(net::EvalPoint::standard(xi, 0.0, 1));

  p.labeled.reserve(sets.labeled.size());
  p.labeled_u.reserve(sets.labeled.size());
  for (const auto& d : sets.labeled) {
    p.labeled.push_back(net::EvalPoint::standard(d[0], d[1], 1));
    p.labeled_u.push_back(d[2]);
  }
  return p;
}

namespace {

// Step batches are laid out boundary | initial | labeled | collocation so
// the collocation tail can shrink on the last minibatch of an epoch while
// the span stays contiguous.
struct BatchLayout {
  std::size_t boundary_begin = 0, boundary_n = 0;
  std::size_t initial_begin = 0, initial_n = 0;
  std::size_t labeled_begin = 0, labeled_n = 0;
  std::size_t colloc_begin = 0, colloc_n = 0;
};

struct TermValues {
  double pde = 0.0, bc = 0.0, ic = 0.0, data = 0.0;
};

// Collocation minibatches index into the problem's collocation arrays;
// the other families always appear in full and in order.
struct ScatterIndex {
  const std::vector<std::size_t>* colloc_ids = nullptr;  // null: identity
  std::size_t at(std::size_t i) const {
    return colloc_ids ? (*colloc_ids)[i] : i;
  }
};

ad::Var pde_term(ad::Tape& tape, std::span<const net::JetVar> jets,
                 const BatchLayout& lay, const TrainProblem& prob,
                 const ScatterIndex& scatter) {
  if (lay.colloc_n == 0) return tape.constant(0.0);
  const bool off = !prob.collocation_offset.empty();
  ad::Var sum = tape.constant(0.0);
  for (std::size_t i = 0; i < lay.colloc_n; ++i) {
    const net::JetVar& j = jets[lay.colloc_begin + i];
    ad::Var r = j.du_dt - prob.kappa * j.d2u_dx2;
    if (off) {
      const net::Jet& o = prob.collocation_offset[scatter.at(i)];
      r = r + (o.du_dt - prob.kappa * o.d2u_dx2);
    }
    sum = sum + square(r);
  }
  return sum * (1.0 / static_cast<double>(lay.colloc_n));
}

// Per-side mean squares summed (bottom then top); keeps the two Robin
// faces equally weighted regardless of how the points split.
ad::Var bc_term(ad::Tape& tape, std::span<const net::JetVar> jets,
                const BatchLayout& lay, const TrainProblem& prob) {
  if (lay.boundary_n == 0) return tape.constant(0.0);
  const bool off = !prob.boundary_offset.empty();
  ad::Var sum_b = tape.constant(0.0);
  ad::Var sum_t = tape.constant(0.0);
  std::size_t n_b = 0, n_t = 0;
  for (std::size_t i = 0; i < lay.boundary_n; ++i) {
    const net::JetVar& j = jets[lay.boundary_begin + i];
    const double u_air = prob.boundary_air_u[i];
    const double ou = off ? prob.boundary_offset[i].u : 0.0;
    const double odx = off ? prob.boundary_offset[i].du_dx : 0.0;
    if (prob.boundary_sides[i] == Side::Bottom) {
      ad::Var r = prob.h_bottom * (j.u + (ou - u_air)) -
                  prob.k_over_L * (j.du_dx + odx);
      sum_b = sum_b + square(r);
      ++n_b;
    } else {
      ad::Var r = prob.h_top * ((u_air - ou) - j.u) -
                  prob.k_over_L * (j.du_dx + odx);
      sum_t = sum_t + square(r);
      ++n_t;
    }
  }
  ad::Var out = tape.constant(0.0);
  if (n_b) out = out + sum_b * (1.0 / static_cast<double>(n_b));
  if (n_t) out = out + sum_t * (1.0 / static_cast<double>(n_t));
  return out;
}

ad::Var ic_term(ad::Tape& tape, std::span<const net::JetVar> jets,
                const BatchLayout& lay, const TrainProblem& prob) {
  if (lay.initial_n == 0) return tape.constant(0.0);
  const bool off = !prob.initial_offset_u.empty();
  ad::Var sum = tape.constant(0.0);
  for (std::size_t i = 0; i < lay.initial_n; ++i) {
    const net::JetVar& j = jets[lay.initial_begin + i];
    const double ou = off ? prob.initial_offset_u[i] : 0.0;
    sum = sum + square(j.u + (ou - prob.u0));
  }
  return sum * (1.0 / static_cast<double>(lay.initial_n));
}

ad::Var data_term(ad::Tape& tape, std::span<const net::JetVar> jets,
                  const BatchLayout& lay, const TrainProblem& prob) {
  if (lay.labeled_n == 0) return tape.constant(0.0);
  const bool off = !prob.labeled_offset_u.empty();
  ad::Var sum = tape.constant(0.0);
  for (std::size_t i = 0; i < lay.labeled_n; ++i) {
    const net::JetVar& j = jets[lay.labeled_begin + i];
    const double ou = off ? prob.labeled_offset_u[i] : 0.0;
    sum = sum + square(j.u + (ou - prob.labeled_u[i]));
  }
  return sum * (1.0 / static_cast<double>(lay.labeled_n));
}

double weighted_total(const LossWeights& w, const TermValues& t) {
  return ((w.pde * t.pde + w.bc * t.bc) + w.ic * t.ic) + w.data * t.data;
}

net::LossBuilder make_weighted_builder(const BatchLayout& lay,
                                       const TrainProblem& prob,
                                       const LossWeights& w,
                                       const ScatterIndex& scatter,
                                       TermValues* out) {
  return [&lay, &prob, &w, &scatter, out](ad::Tape& tape,
                                          std::span<const net::JetVar> jets) {
    ad::Var pde = pde_term(tape, jets, lay, prob, scatter);
    ad::Var bc = bc_term(tape, jets, lay, prob);
    ad::Var ic = ic_term(tape, jets, lay, prob);
    ad::Var data = data_term(tape, jets, lay, prob);
    if (out) {
      out->pde = pde.v;
      out->bc = bc.v;
      out->ic = ic.v;
      out->data = data.v;
    }
    return ((w.pde * pde + w.bc * bc) + w.ic * ic) + w.data * data;
  };
}

}  // namespace

std::pair<LossReport, net::Gradient> composite_loss(
    const net::NetworkParams& params, const PointSets& sets,
    const LossWeights& weights, const heat::ThermalSetup& setup,
    const Normalization& norm) {
  const TrainProblem prob = build_problem(sets, setup, norm);

  std::vector<net::EvalPoint> pts;
  pts.reserve(prob.total_points());
  BatchLayout lay;
  lay.boundary_begin = pts.size();
  lay.boundary_n = prob.boundary.size();
  pts.insert(pts.end(), prob.boundary.begin(), prob.boundary.end());
  lay.initial_begin = pts.size();
  lay.initial_n = prob.initial.size();
  pts.insert(pts.end(), prob.initial.begin(), prob.initial.end());
  lay.labeled_begin = pts.size();
  lay.labeled_n = prob.labeled.size();
  pts.insert(pts.end(), prob.labeled.begin(), prob.labeled.end());
  lay.colloc_begin = pts.size();
  lay.colloc_n = prob.collocation.size();
  pts.insert(pts.end(), prob.collocation.begin(), prob.collocation.end());

  TermValues tv;
  const ScatterIndex identity;
  auto [loss, grad] = net::grad_params(
      params, pts, make_weighted_builder(lay, prob, weights, identity, &tv));
  LossReport rep;
  rep.epoch = 0;
  rep.pde = tv.pde;
  rep.bc = tv.bc;
  rep.ic = tv.ic;
  rep.data = tv.data;
  rep.weights = weights;
  rep.total = weighted_total(weights, tv);
  rep.lr = 0.0;
  (void)loss;  // rep.total equals it by construction
  return {rep, std::move(grad)};
}

LossWeights update_weights_adaptive(const net::Gradient& g_pde,
                                    const net::Gradient* g_bc,
                                    const net::Gradient* g_ic,
                                    const net::Gradient* g_data,
                                    const LossWeights& current,
                                    double ema_alpha,
                                    bool adapt_data_weight) {
  // The ratio is taken against the term's current *weighted* gradient,
  // lambda_i * mean|grad L_i|. That makes the update self-damping (the
  // equilibrium is sqrt(max/mean)): as a term converges and its raw
  // gradient collapses, its weight grows like a square root instead of
  // diverging, so converged terms eventually rest. The clamp bounds the
  // pathological fully-interpolated case.
  constexpr double kTargetFloor = 1e-6;
  constexpr double kTargetCap = 1e3;
  const double ref = g_pde.max_abs();
  LossWeights next = current;
  auto blend = [&](double old_w, const net::Gradient* g) {
    if (g == nullptr) return old_w;
    const double denom = old_w * g->mean_abs();
    if (denom == 0.0 || !std::isfinite(denom) || !std::isfinite(ref) ||
        ref == 0.0)
      return old_w;
    double target = ref / denom;
    if (!std::isfinite(target)) return old_w;
    target = std::clamp(target, kTargetFloor, kTargetCap);
    return (1.0 - ema_alpha) * old_w + ema_alpha * target;
  };
  next.pde = 1.0;
  next.bc = blend(current.bc, g_bc);
  next.ic = blend(current.ic, g_ic);
  if (adapt_data_weight) next.data = blend(current.data, g_data);
  return next;
}

TrainResult train_core(const net::NetworkParams& init,
                       const TrainProblem& problem, LossWeights weights,
                       const TrainConfig& config,
                       const EpochCallback& on_epoch) {
  config.validate();
  if (problem.total_points() == 0)
    throw ConfigError("training needs at least one nonempty point family");

  net::NetworkParams params = init;
  const std::size_t n_params = params.param_count();
  std::vector<double> adam_m(n_params, 0.0), adam_v(n_params, 0.0);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

  const std::size_t n_colloc = problem.collocation.size();
  const std::size_t batch =
      std::min<std::size_t>(static_cast<std::size_t>(config.batch_size),
                            std::max<std::size_t>(n_colloc, 1));
  const std::size_t steps_per_epoch =
      n_colloc == 0 ? 1 : (n_colloc + batch - 1) / batch;

  // Fixed step batch: constant families up front, collocation tail
  // refreshed per minibatch.
  std::vector<net::EvalPoint> step_pts;
  BatchLayout lay;
  lay.boundary_begin = 0;
  lay.boundary_n = problem.boundary.size();
  step_pts.insert(step_pts.end(), problem.boundary.begin(),
                  problem.boundary.end());
  lay.initial_begin = step_pts.size();
  lay.initial_n = problem.initial.size();
  step_pts.insert(step_pts.end(), problem.initial.begin(),
                  problem.initial.end());
  lay.labeled_begin = step_pts.size();
  lay.labeled_n = problem.labeled.size();
  step_pts.insert(step_pts.end(), problem.labeled.begin(),
                  problem.labeled.end());
  lay.colloc_begin = step_pts.size();
  const std::size_t fixed_prefix = step_pts.size();
  step_pts.resize(fixed_prefix + batch);

  // The gradient statistics behind the adaptive weights are computed on
  // the full point sets, not the current minibatch: the max/mean ratio is
  // far too noisy over 64 points and the weights end up chasing that
  // noise.
  std::vector<net::EvalPoint> stats_pts(step_pts.begin(),
                                        step_pts.begin() +
                                            static_cast<std::ptrdiff_t>(fixed_prefix));
  stats_pts.insert(stats_pts.end(), problem.collocation.begin(),
                   problem.collocation.end());
  BatchLayout stats_lay = lay;
  stats_lay.colloc_n = problem.collocation.size();

  std::vector<std::size_t> order(n_colloc);
  std::iota(order.begin(), order.end(), 0);
  Xoshiro256ss shuffle_rng(derive_seed(config.seed, 0xC011));

  double lr = config.learning_rate;
  std::vector<double> plateau_window;  // recent epoch metrics
  long global_step = 0;

  std::vector<LossReport> history;
  history.reserve(static_cast<std::size_t>(config.epochs));
  net::NetworkParams last_good = params;  // most recent cleanly-evaluated state

  const ScatterIndex identity;
  std::vector<std::size_t> batch_ids(batch);
  ScatterIndex batch_scatter;
  batch_scatter.colloc_ids = &batch_ids;

  const net::LossBuilder stats_builders[4] = {
      [&](ad::Tape& t, std::span<const net::JetVar> j) {
        return pde_term(t, j, stats_lay, problem, identity);
      },
      [&](ad::Tape& t, std::span<const net::JetVar> j) {
        return bc_term(t, j, stats_lay, problem);
      },
      [&](ad::Tape& t, std::span<const net::JetVar> j) {
        return ic_term(t, j, stats_lay, problem);
      },
      [&](ad::Tape& t, std::span<const net::JetVar> j) {
        return data_term(t, j, stats_lay, problem);
      }};

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    TermValues epoch_sum;
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      const std::size_t begin = step * batch;
      const std::size_t count =
          n_colloc == 0 ? 0 : std::min(batch, n_colloc - begin);
      batch_ids.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        batch_ids[i] = order[begin + i];
        step_pts[lay.colloc_begin + i] = problem.collocation[batch_ids[i]];
      }
      lay.colloc_n = count;
      const std::span<const net::EvalPoint> batch_span(step_pts.data(),
                                                       fixed_prefix + count);

      TermValues tv;
      net::Gradient grad;
      try {
        if (global_step % config.weight_update_stride == 0) {
          net::MultiGrad mg =
              net::grad_params_multi(params, stats_pts, stats_builders);
          // First refresh initializes the weights straight from the
          // gradient statistics; EMA smoothing applies from then on.
          const double alpha = global_step == 0 ? 1.0 : config.ema_alpha;
          weights = update_weights_adaptive(
              mg.grads[0], stats_lay.boundary_n ? &mg.grads[1] : nullptr,
              stats_lay.initial_n ? &mg.grads[2] : nullptr,
              stats_lay.labeled_n ? &mg.grads[3] : nullptr, weights, alpha,
              config.adapt_data_weight);
        }
        auto [loss, g] = net::grad_params(
            params, batch_span,
            make_weighted_builder(lay, problem, weights, batch_scatter, &tv));
        (void)loss;
        grad = std::move(g);
      } catch (const NumericError& e) {
        throw TrainingError(std::string("loss went non-finite at step ") +
                                std::to_string(global_step) + ": " + e.what(),
                            last_good, global_step);
      }
      last_good = params;

      ++global_step;
      const double bias1 = 1.0 - std::pow(kBeta1, static_cast<double>(global_step));
      const double bias2 = 1.0 - std::pow(kBeta2, static_cast<double>(global_step));
      kernels::active().adam_update(params.data.data(), adam_m.data(),
                                    adam_v.data(), grad.data.data(),
                                    static_cast<int>(n_params), lr, kBeta1,
                                    kBeta2, kEps, bias1, bias2);

      epoch_sum.pde += tv.pde;
      epoch_sum.bc += tv.bc;
      epoch_sum.ic += tv.ic;
      epoch_sum.data += tv.data;
    }

    LossReport rep;
    rep.epoch = epoch;
    const double inv_steps = 1.0 / static_cast<double>(steps_per_epoch);
    rep.pde = epoch_sum.pde * inv_steps;
    rep.bc = epoch_sum.bc * inv_steps;
    rep.ic = epoch_sum.ic * inv_steps;
    rep.data = epoch_sum.data * inv_steps;
    rep.weights = weights;
    rep.total = weighted_total(weights, {rep.pde, rep.bc, rep.ic, rep.data});
    rep.lr = lr;

    // Plateau detection on the epoch-mean unweighted loss sum (the
    // weighted total moves with the adaptive weights themselves, which
    // would register weight motion as fit changes). Single epochs are too
    // noisy under minibatching, so two adjacent windows of
    // lr_patience_epochs are compared by their means; no relative
    // improvement between them counts as a stall.
    plateau_window.push_back(((rep.pde + rep.bc) + rep.ic) + rep.data);
    const std::size_t w = static_cast<std::size_t>(
        std::max(1, config.lr_patience_epochs / 2));
    if (plateau_window.size() >= 2 * w) {
      double prev = 0.0, last = 0.0;
      const std::size_t n = plateau_window.size();
      for (std::size_t i = n - 2 * w; i < n - w; ++i) prev += plateau_window[i];
      for (std::size_t i = n - w; i < n; ++i) last += plateau_window[i];
      prev /= static_cast<double>(w);
      last /= static_cast<double>(w);
      if (prev - last <= config.improvement_rtol * std::fabs(prev)) {
        lr *= config.lr_decay_factor;
        plateau_window.clear();
      }
    }

    history.push_back(rep);
    if (on_epoch) on_epoch(rep);
  }

  return {std::move(params), std::move(history), weights};
}

TrainResult train(const net::NetworkParams& init, const PointSets& sets,
                  const LossWeights& weights, const TrainConfig& config,
                  const heat::ThermalSetup& setup, const Normalization& norm,
                  const EpochCallback& on_epoch) {
  const TrainProblem problem = build_problem(sets, setup, norm);
  return train_core(init, problem, weights, config, on_epoch);
}

}  // namespace mfpinn::pinn
