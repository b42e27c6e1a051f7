#include "innoprot/consensus.hpp"

#include <cmath>
#include <map>
#include <ostream>

#include <fmt/format.h>

namespace innoprot {

double StepSchedule::operator()(std::size_t t) const {
    return scale / std::pow(static_cast<double>(t) + offset, power);
}

NodeSignal NodeSignal::from_increments(Vector x0, std::vector<double> increments) {
    NodeSignal s;
    s.dim = x0.size();
    if (s.dim == 0 || increments.size() % s.dim != 0) {
        throw std::invalid_argument("increment buffer does not match state dimension");
    }
    s.states.reserve(increments.size() + s.dim);
    s.states.insert(s.states.end(), x0.begin(), x0.end());
    for (std::size_t idx = 0; idx < increments.size(); ++idx) {
        s.states.push_back(s.states[idx] + increments[idx]);
    }
    s.x0 = std::move(x0);
    s.increments = std::move(increments);
    return s;
}

NodeSignal Trajectory::node_signal(std::size_t node) const {
    NodeSignal s;
    s.dim = dim_;
    const auto x0 = state(0, node);
    s.x0.assign(x0.begin(), x0.end());
    const std::size_t t_end = rounds();
    s.increments.reserve(t_end * dim_);
    s.states.reserve((t_end + 1) * dim_);
    for (std::size_t t = 0; t <= t_end; ++t) {
        const auto x = state(t, node);
        s.states.insert(s.states.end(), x.begin(), x.end());
        if (t < t_end) {
            const auto xi = innovation(t, node);
            s.increments.insert(s.increments.end(), xi.begin(), xi.end());
        }
    }
    return s;
}

void Trajectory::push_initial(std::span<const double> x0) {
    states_.assign(x0.begin(), x0.end());
    innovations_.clear();
}

void Trajectory::push_round(std::span<const double> innovations, std::span<const double> next_states) {
    innovations_.insert(innovations_.end(), innovations.begin(), innovations.end());
    states_.insert(states_.end(), next_states.begin(), next_states.end());
}

DivergenceError::DivergenceError(double alpha_, std::size_t iteration_)
    : std::runtime_error(fmt::format("optimizer diverged at iteration {} with step size alpha={}", iteration_,
                                     alpha_)),
      alpha(alpha_),
      iteration(iteration_) {}

void extra_tracker(std::span<const double> y, std::span<const double> grad_next,
                   std::span<const double> grad_cur, std::span<const double> consensus, double alpha,
                   std::span<double> out) {
    const double half_inv_alpha = 1.0 / (2.0 * alpha);
    for (std::size_t k = 0; k < y.size(); ++k) {
        out[k] = y[k] + grad_next[k] - grad_cur[k] - half_inv_alpha * consensus[k];
    }
}

void subgradient_tracker(std::size_t t, std::span<const double> grad_next, const StepSchedule& beta,
                         std::span<double> out) {
    const double bt = beta(t);
    for (std::size_t k = 0; k < grad_next.size(); ++k) out[k] = bt * grad_next[k];
}

namespace {

void validate(const DirectedGraph& g, const WeightMatrix& w, const ObjectiveSpec& spec,
              const AlgorithmConfig& cfg) {
    const std::size_t n = g.size();
    if (w.size() != n || spec.nodes() != n) throw std::invalid_argument("graph, weights and objective disagree on n");
    if (cfg.x0.size() != n * spec.dim()) throw std::invalid_argument("x0 must hold n * m entries");
    if (!(cfg.alpha > 0.0)) throw std::invalid_argument("step size alpha must be > 0");
    if (cfg.max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
    if (cfg.x_star && cfg.x_star->size() != spec.dim()) throw std::invalid_argument("x_star has wrong dimension");
    for (NodeId i = 0; i < n; ++i) {
        for (NodeId j = 0; j < n; ++j) {
            if (w(i, j) != 0.0 && !g.in_neighbors(i).contains(j)) {
                throw std::invalid_argument(fmt::format("weight w[{}][{}] off the edge set", i, j));
            }
        }
    }
}

bool reached(std::span<const double> states, std::size_t n, std::size_t m, const AlgorithmConfig& cfg) {
    if (!cfg.x_star || !(cfg.stop_tol > 0.0)) return false;
    const double radius = cfg.stop_tol * norm(*cfg.x_star);
    for (std::size_t i = 0; i < n; ++i) {
        if (std::sqrt(dist2(states.subspan(i * m, m), *cfg.x_star)) > radius) return false;
    }
    return true;
}

void check_divergence(std::span<const double> states, std::size_t m, const AlgorithmConfig& cfg,
                      std::size_t t) {
    for (std::size_t off = 0; off < states.size(); off += m) {
        const double r = norm(states.subspan(off, m));
        if (!(r <= divergence_cap)) throw DivergenceError(cfg.alpha, t);
    }
}

// Shared round driver. `exchange(x_t, ξ_{t-1})` runs once per round before
// any update and delivers that round's messages. `view(i, j)` yields node i's view of x_j.
//
// Both algorithms write x_{t+1} = x_t + ξ_t with
// ξ_t = Σ_j w_ij (x_j - x_i) - α y, so matching views give matching bits.
template <class Exchange, class View>
Trajectory drive(const DirectedGraph& g, const WeightMatrix& w, const ObjectiveSpec& spec,
                 const AlgorithmConfig& cfg, Exchange&& exchange, View&& view) {
    validate(g, w, spec, cfg);
    const std::size_t n = g.size(), m = spec.dim();

    Trajectory traj(n, m);
    Vector x = cfg.x0;
    traj.push_initial(x);

    Vector y(n * m), grad(n * m), grad_next(n * m);
    for (NodeId i = 0; i < n; ++i) {
        spec.local_gradient(i, std::span<const double>(x).subspan(i * m, m), std::span(grad).subspan(i * m, m));
    }
    if (cfg.tracker == TrackerKind::extra) {
        y = grad;
    } else {
        const double b0 = cfg.beta(0);
        for (std::size_t k = 0; k < n * m; ++k) y[k] = b0 * grad[k];
    }

    if (reached(x, n, m, cfg)) {
        traj.converged_at = 0;
        return traj;
    }

    Vector xi(n * m), x_next(n * m), consensus(n * m), y_next(n * m);
    Vector prev_xi = x;  // ξ_{-1} = x_0
    for (std::size_t t = 0; t < cfg.max_iters; ++t) {
        exchange(std::span<const double>(x), std::span<const double>(prev_xi));
        for (NodeId i = 0; i < n; ++i) {
            const auto own = std::span<const double>(x).subspan(i * m, m);
            auto cons = std::span(consensus).subspan(i * m, m);
            consensus_term(g, w, i, own, [&](NodeId j) { return view(i, j); }, cons);
            for (std::size_t k = 0; k < m; ++k) {
                xi[i * m + k] = cons[k] - cfg.alpha * y[i * m + k];
                x_next[i * m + k] = own[k] + xi[i * m + k];
            }
        }
        for (NodeId i = 0; i < n; ++i) {
            auto gn = std::span(grad_next).subspan(i * m, m);
            spec.local_gradient(i, std::span<const double>(x_next).subspan(i * m, m), gn);
            auto yo = std::span(y_next).subspan(i * m, m);
            if (cfg.tracker == TrackerKind::extra) {
                extra_tracker(std::span<const double>(y).subspan(i * m, m), gn,
                              std::span<const double>(grad).subspan(i * m, m),
                              std::span<const double>(consensus).subspan(i * m, m), cfg.alpha, yo);
            } else {
                subgradient_tracker(t, gn, cfg.beta, yo);
            }
        }
        check_divergence(x_next, m, cfg, t + 1);
        traj.push_round(xi, x_next);
        prev_xi = xi;
        x.swap(x_next);
        y.swap(y_next);
        grad.swap(grad_next);
        if (reached(x, n, m, cfg)) {
            traj.converged_at = t + 1;
            break;
        }
    }
    return traj;
}

}  // namespace

Trajectory run_dco(const DirectedGraph& g, const WeightMatrix& w, const ObjectiveSpec& spec,
                   const AlgorithmConfig& cfg) {
    const std::size_t m = spec.dim();
    // States are broadcast directly; every node reads the true x_j.
    std::span<const double> shared;
    return drive(
        g, w, spec, cfg, [&](std::span<const double> x, std::span<const double>) { shared = x; },
        [&](NodeId, NodeId j) { return shared.subspan(j * m, m); });
}

Trajectory run_dico(const DirectedGraph& g, const WeightMatrix& w, const ObjectiveSpec& spec,
                    const AlgorithmConfig& cfg) {
    const std::size_t n = g.size(), m = spec.dim();
    // estimate[i][j]: node i's reconstruction of x_j, starting from x̂ = 0.
    std::vector<std::map<NodeId, Vector>> estimate(n);
    for (NodeId i = 0; i < n; ++i) {
        for (NodeId j : g.in_neighbors(i)) estimate[i].emplace(j, Vector(m, 0.0));
    }
    std::span<const double> own_states;

    // Each node j puts only ξ_{j,t-1} on the wire; receivers integrate it.
    auto exchange = [&](std::span<const double> x, std::span<const double> outbox) {
        own_states = x;
        for (NodeId i = 0; i < n; ++i) {
            for (auto& [j, est] : estimate[i]) {
                for (std::size_t k = 0; k < m; ++k) est[k] += outbox[j * m + k];
            }
        }
    };
    auto view = [&](NodeId i, NodeId j) -> std::span<const double> {
        if (i == j) return own_states.subspan(i * m, m);
        return estimate[i].at(j);
    };
    return drive(g, w, spec, cfg, exchange, view);
}

std::optional<std::size_t> convergence_time(const Trajectory& traj, std::span<const double> x_star,
                                            double rel) {
    const double radius = rel * norm(x_star);
    for (std::size_t t = 0; t <= traj.rounds(); ++t) {
        bool ok = true;
        for (std::size_t i = 0; i < traj.nodes() && ok; ++i) {
            ok = std::sqrt(dist2(traj.state(t, i), x_star)) <= radius;
        }
        if (ok) return t;
    }
    return std::nullopt;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    os << "t,node,component,x,xi\n";
    for (std::size_t t = 0; t <= traj.rounds(); ++t) {
        for (std::size_t i = 0; i < traj.nodes(); ++i) {
            const auto x = traj.state(t, i);
            for (std::size_t k = 0; k < traj.dim(); ++k) {
                const double msg = t == 0 ? x[k] : traj.innovation(t - 1, i)[k];
                os << fmt::format("{},{},{},{:.17g},{:.17g}\n", t, i, k, x[k], msg);
            }
        }
    }
}

}  // namespace innoprot
