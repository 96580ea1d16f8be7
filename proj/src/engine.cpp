#include "pdmm/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <thread>
#include <utility>

#include "pdmm/reflection.hpp"

namespace pdmm {

namespace {

/// Runs fn(i) for i in [0, n). Work is split into contiguous ranges; every
/// index writes only its own outputs, so results do not depend on the split.
template <typename Fn>
void parallel_for(Index n, int threads, Fn&& fn) {
  if (threads <= 1 || n < 2 * threads) {
    for (Index i = 0; i < n; ++i) fn(i);
    return;
  }
  const Index chunk = (n + threads - 1) / threads;
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    const Index begin = t * chunk;
    const Index end = std::min(n, begin + chunk);
    if (begin >= end) break;
    workers.emplace_back([begin, end, &fn] {
      for (Index i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& w : workers) w.join();
}

void append_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

void validate(const ScheduleConfig& cfg) {
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0)) {
    throw Error("alpha must lie in (0, 1]");
  }
  if (!(cfg.c > 0.0)) throw Error("penalty c must be positive");
  if (!(cfg.node_active_prob > 0.0 && cfg.node_active_prob <= 1.0)) {
    throw Error("node_active_prob must lie in (0, 1]");
  }
  if (!(cfg.loss_rate >= 0.0 && cfg.loss_rate < 1.0)) {
    throw Error("loss_rate must lie in [0, 1)");
  }
  if (cfg.max_iters < 1) throw Error("max_iters must be at least 1");
  if (cfg.trace_every < 1) throw Error("trace_every must be at least 1");
  if (cfg.threads < 1) throw Error("threads must be at least 1");
}

std::string trace_to_csv(const Trace& trace) {
  std::string out = "iter,primal_error,fixed_point_residual,max_violation,objective\n";
  for (const auto& row : trace.rows) {
    out += std::to_string(row.iter);
    out += ',';
    if (row.primal_error) append_double(out, *row.primal_error);
    out += ',';
    append_double(out, row.fixed_point_residual);
    out += ',';
    append_double(out, row.max_violation);
    out += ',';
    append_double(out, row.objective);
    out += '\n';
  }
  return out;
}

Engine::Engine(ProblemGraph g, double c) : c_(c) {
  if (!(c > 0.0)) throw Error("penalty c must be positive");
  graph_ = lower_node_constraints(std::move(g));
  layout_ = build_layout(graph_);
  systems_ = build_node_systems(graph_, layout_, c_);

  edge_views_.reserve(graph_.edges.size());
  for (int ei = 0; ei < static_cast<int>(graph_.edges.size()); ++ei) {
    const auto& e = graph_.edges[static_cast<std::size_t>(ei)];
    EdgeView view;
    view.low = std::min(e.i, e.j);
    view.high = std::max(e.i, e.j);
    view.A_low = (e.i == view.low) ? &e.A_ij : &e.A_ji;
    view.A_high = (e.i == view.low) ? &e.A_ji : &e.A_ij;
    view.b = &e.b;
    view.base = 2 * layout_.edge_row_offset[static_cast<std::size_t>(ei)];
    view.m = e.rows();
    view.colocated = e.colocated;
    view.host = e.i;  // lowering always puts the real node first
    edge_views_.push_back(view);
  }
}

void Engine::refresh_edges(const Vector& z, const std::vector<Vector>& x,
                           Vector& y, Vector& mu, int threads) const {
  parallel_for(static_cast<Index>(edge_views_.size()), threads, [&](Index ei) {
    const EdgeView& v = edge_views_[static_cast<std::size_t>(ei)];
    const Vector half_b = 0.5 * *v.b;
    const Vector t_low = *v.A_low * x[static_cast<std::size_t>(v.low)] - half_b;
    const Vector t_high = *v.A_high * x[static_cast<std::size_t>(v.high)] - half_b;
    y.segment(v.base, v.m) = z.segment(v.base, v.m) + 2.0 * c_ * t_low;
    y.segment(v.base + v.m, v.m) = z.segment(v.base + v.m, v.m) + 2.0 * c_ * t_high;
    mu.segment(v.base, v.m) = z.segment(v.base, v.m) + c_ * t_low;
    mu.segment(v.base + v.m, v.m) = z.segment(v.base + v.m, v.m) + c_ * t_high;
  });
}

void Engine::apply_T(const Vector& z, std::vector<Vector>& x, Vector& y,
                     Vector& mu, Vector& z_next, int threads) const {
  if (z.size() != layout_.num_slots()) {
    throw DimensionMismatch("z length does not match slot count");
  }
  x.resize(graph_.nodes.size());
  y.resize(z.size());
  mu.resize(z.size());

  parallel_for(static_cast<Index>(graph_.nodes.size()), threads, [&](Index i) {
    x[static_cast<std::size_t>(i)] = systems_[static_cast<std::size_t>(i)].x_update(z);
  });
  refresh_edges(z, x, y, mu, threads);
  z_next = reflect_all(y, layout_);
}

IterationState Engine::initial_state(const Vector* z0) const {
  IterationState s;
  const Index slots = layout_.num_slots();
  if (z0 != nullptr) {
    if (z0->size() != slots) {
      throw DimensionMismatch("initial z length does not match slot count");
    }
    s.z = *z0;
  } else {
    s.z = Vector::Zero(slots);
  }
  s.y = Vector::Zero(slots);
  s.mu = Vector::Zero(slots);
  s.mu_prev = Vector::Zero(slots);
  s.x.resize(graph_.nodes.size());
  for (int i = 0; i < graph_.num_nodes(); ++i) {
    s.x[static_cast<std::size_t>(i)] = Vector::Zero(graph_.nodes[static_cast<std::size_t>(i)].dim);
  }
  return s;
}

void Engine::step_synchronous(IterationState& state, double alpha, int threads) const {
  step_stochastic(state, UpdateMask::full(layout_.num_slots()), alpha, threads);
}

void Engine::step_stochastic(IterationState& state, const UpdateMask& mask,
                             double alpha, int threads) const {
  if (static_cast<Index>(mask.bits.size()) != layout_.num_slots()) {
    throw DimensionMismatch("mask length does not match slot count");
  }
  Vector mu_old = state.mu;
  Vector t_z;
  apply_T(state.z, state.x, state.y, state.mu, t_z, threads);
  state.mu_prev = state.k == 0 ? state.mu : std::move(mu_old);
  for (Index s = 0; s < t_z.size(); ++s) {
    if (mask.bits[static_cast<std::size_t>(s)]) {
      state.z[s] = (1.0 - alpha) * state.z[s] + alpha * t_z[s];
    }
  }
  ++state.k;
}

UpdateMask Engine::sample_mask(Rng& rng, const ScheduleConfig& cfg) const {
  UpdateMask mask{std::vector<std::uint8_t>(static_cast<std::size_t>(layout_.num_slots()), 0)};
  std::vector<std::uint8_t> active(static_cast<std::size_t>(graph_.num_real_nodes));
  for (auto& a : active) a = rng.bernoulli(cfg.node_active_prob) ? 1 : 0;

  for (const EdgeView& v : edge_views_) {
    if (v.colocated) {
      // Both endpoints live inside the host node; no transmission to lose.
      if (active[static_cast<std::size_t>(v.host)]) {
        std::fill_n(mask.bits.begin() + v.base, 2 * v.m, std::uint8_t{1});
      }
      continue;
    }
    const bool lost_low_to_high = rng.bernoulli(cfg.loss_rate);
    const bool lost_high_to_low = rng.bernoulli(cfg.loss_rate);
    // A message from the low node refreshes the slots owned by the high node.
    if (active[static_cast<std::size_t>(v.low)] && !lost_low_to_high) {
      std::fill_n(mask.bits.begin() + v.base + v.m, v.m, std::uint8_t{1});
    }
    if (active[static_cast<std::size_t>(v.high)] && !lost_high_to_low) {
      std::fill_n(mask.bits.begin() + v.base, v.m, std::uint8_t{1});
    }
  }
  return mask;
}

double Engine::objective_value(const std::vector<Vector>& x) const {
  double total = 0.0;
  for (int i = 0; i < graph_.num_nodes(); ++i) {
    total += pdmm::objective_value(graph_.nodes[static_cast<std::size_t>(i)].objective,
                                   x[static_cast<std::size_t>(i)]);
  }
  return total;
}

double Engine::max_constraint_violation(const std::vector<Vector>& x) const {
  double worst = 0.0;
  for (const auto& e : graph_.edges) {
    const Vector r = e.A_ij * x[static_cast<std::size_t>(e.i)] +
                     e.A_ji * x[static_cast<std::size_t>(e.j)] - e.b;
    for (Index row = 0; row < r.size(); ++row) {
      const double v = e.kind[static_cast<std::size_t>(row)] == ConstraintKind::Equality
                           ? std::abs(r[row])
                           : std::max(r[row], 0.0);
      worst = std::max(worst, v);
    }
  }
  return worst;
}

Vector Engine::recover_row_duals(const Vector& mu) const {
  Vector duals(layout_.total_rows);
  for (Index s = 0; s < layout_.num_slots(); ++s) {
    const Index p = layout_.partner[static_cast<std::size_t>(s)];
    if (s > p) continue;
    const auto& slot = layout_.slots[static_cast<std::size_t>(s)];
    duals[layout_.global_row(slot.edge, slot.row)] = 0.5 * (mu[s] + mu[p]);
  }
  return duals;
}

Vector Engine::recover_row_duals(const IterationState& state) const {
  return recover_row_duals(Vector(0.5 * (state.mu + state.mu_prev)));
}

double Engine::primal_error(const std::vector<Vector>& x,
                            const std::vector<Vector>& reference) const {
  double sq = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    sq += (x[i] - reference[i]).squaredNorm();
  }
  return std::sqrt(sq);
}

RunResult Engine::run(const ScheduleConfig& cfg,
                      const std::vector<Vector>* oracle_x, const Vector* z0) const {
  validate(cfg);
  if (cfg.c != c_) {
    throw Error("config penalty differs from the engine's factorized penalty");
  }
  if (oracle_x != nullptr &&
      static_cast<int>(oracle_x->size()) > graph_.num_real_nodes) {
    throw DimensionMismatch("oracle solution has more nodes than the problem");
  }

  Rng rng(cfg.seed);
  RunResult result;
  IterationState& state = result.state;
  state = initial_state(z0);
  Trace& trace = result.trace;
  trace.stop_reason = "max_iters";

  // Stagnation window for alpha = 1 without an oracle, where neither the
  // fixed-point residual nor a primal error is available as a stop signal.
  constexpr long kStallWindow = 50;
  long stalled = 0;
  std::vector<Vector> x_prev;

  Vector t_z(layout_.num_slots());
  for (long k = 1; k <= cfg.max_iters; ++k) {
    Vector mu_old = state.mu;
    apply_T(state.z, state.x, state.y, state.mu, t_z, cfg.threads);
    state.mu_prev = k == 1 ? state.mu : std::move(mu_old);
    const double residual = (state.z - t_z).norm();

    UpdateMask mask = cfg.mode == ScheduleMode::Stochastic
                          ? sample_mask(rng, cfg)
                          : UpdateMask::full(layout_.num_slots());
    for (Index s = 0; s < t_z.size(); ++s) {
      if (mask.bits[static_cast<std::size_t>(s)]) {
        state.z[s] = (1.0 - cfg.alpha) * state.z[s] + cfg.alpha * t_z[s];
      }
    }
    state.k = k;

    std::optional<double> perr;
    if (oracle_x != nullptr) perr = primal_error(state.x, *oracle_x);

    bool converged = false;
    if (oracle_x != nullptr) {
      converged = *perr <= cfg.tol_primal;
      if (converged) trace.stop_reason = "primal_tol";
    } else if (cfg.alpha < 1.0) {
      converged = residual <= cfg.tol_residual;
      if (converged) trace.stop_reason = "residual_tol";
    } else {
      double change = 0.0;
      if (!x_prev.empty()) {
        for (std::size_t i = 0; i < state.x.size(); ++i) {
          if (state.x[i].size() > 0) {
            change = std::max(change, (state.x[i] - x_prev[i]).cwiseAbs().maxCoeff());
          }
        }
        stalled = change <= cfg.tol_primal ? stalled + 1 : 0;
      }
      x_prev = state.x;
      converged = stalled >= kStallWindow;
      if (converged) trace.stop_reason = "stalled";
    }

    if ((k - 1) % cfg.trace_every == 0 || converged || k == cfg.max_iters) {
      trace.rows.push_back(TraceRow{k, perr, residual,
                                    max_constraint_violation(state.x),
                                    objective_value(state.x)});
    }
    if (converged) {
      trace.converged = true;
      trace.iterations = k;
      return result;
    }
  }
  trace.iterations = cfg.max_iters;
  return result;
}

}  // namespace pdmm
