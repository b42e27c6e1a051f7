#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "innoprot/graph.hpp"
#include "innoprot/objective.hpp"
#include "innoprot/vector_ops.hpp"

namespace innoprot {

enum class TrackerKind { extra, diminishing_subgradient };

/// β_t = scale / (t + offset)^power.
struct StepSchedule {
    double scale = 1.0;
    double offset = 1.0;
    double power = 1.0;

    double operator()(std::size_t t) const;
};

struct AlgorithmConfig {
    double alpha = 0.01;
    TrackerKind tracker = TrackerKind::extra;
    StepSchedule beta;
    std::size_t max_iters = 20000;
    Vector x0;  // n * m, node-major
    /// Early stop once max_i ‖x_i - x*‖ ≤ stop_tol ‖x*‖; needs x_star.
    double stop_tol = 0.0;
    std::optional<Vector> x_star;
};

/// One node's state sequence seen as its innovation stream.
///
/// x0 is ξ_{-1}; increments[t] is ξ_t for t = 0..T-1. States are the left
/// fold x_{t+1} = x_t + ξ_t, stored so the fold is reproduced bit for bit.
struct NodeSignal {
    std::size_t dim = 0;
    Vector x0;
    std::vector<double> increments;  // T * dim
    std::vector<double> states;      // (T + 1) * dim, states[0..dim) == x0

    std::size_t steps() const { return dim ? increments.size() / dim : 0; }
    std::span<const double> xi(std::size_t t) const { return {increments.data() + t * dim, dim}; }
    std::span<const double> state(std::size_t t) const { return {states.data() + t * dim, dim}; }
    std::span<const double> final_state() const { return state(steps()); }

    /// Builds a signal from x0 and innovations by left-folding the states.
    static NodeSignal from_increments(Vector x0, std::vector<double> increments);
};

class Trajectory {
public:
    Trajectory(std::size_t nodes, std::size_t dim) : nodes_(nodes), dim_(dim) {}

    std::size_t nodes() const { return nodes_; }
    std::size_t dim() const { return dim_; }
    /// Number of completed rounds T; states exist for t = 0..T.
    std::size_t rounds() const { return innovations_.size() / (nodes_ * dim_); }

    std::span<const double> state(std::size_t t, std::size_t node) const {
        return {states_.data() + (t * nodes_ + node) * dim_, dim_};
    }
    /// ξ_{node,t} for t = 0..T-1.
    std::span<const double> innovation(std::size_t t, std::size_t node) const {
        return {innovations_.data() + (t * nodes_ + node) * dim_, dim_};
    }
    std::span<const double> round_states(std::size_t t) const {
        return {states_.data() + t * nodes_ * dim_, nodes_ * dim_};
    }

    NodeSignal node_signal(std::size_t node) const;

    std::optional<std::size_t> converged_at;

    void push_initial(std::span<const double> x0);
    /// Appends one round: innovations ξ_t and the resulting states x_{t+1}.
    void push_round(std::span<const double> innovations, std::span<const double> next_states);

private:
    std::size_t nodes_;
    std::size_t dim_;
    std::vector<double> states_;
    std::vector<double> innovations_;
};

class DivergenceError : public std::runtime_error {
public:
    DivergenceError(double alpha, std::size_t iteration);
    double alpha;
    std::size_t iteration;
};

/// Threshold on any ‖x_{i,t}‖ beyond which a run is declared divergent.
inline constexpr double divergence_cap = 1e9;

/// Distributed consensus optimization with state sharing.
Trajectory run_dco(const DirectedGraph& g, const WeightMatrix& w, const ObjectiveSpec& spec,
                   const AlgorithmConfig& cfg);

/// Same dynamics, but nodes exchange only innovations and rebuild their
/// neighbors' states locally.
Trajectory run_dico(const DirectedGraph& g, const WeightMatrix& w, const ObjectiveSpec& spec,
                    const AlgorithmConfig& cfg);

/// Gradient-tracking update
/// y⁺ = y + ∇f(x_{t+1}) - ∇f(x_t) - (1/2α) Σ_j w_ij (x_{j,t} - x_{i,t}).
/// `consensus` is the precomputed Σ_j w_ij (x_{j,t} - x_{i,t}).
void extra_tracker(std::span<const double> y, std::span<const double> grad_next,
                   std::span<const double> grad_cur, std::span<const double> consensus, double alpha,
                   std::span<double> out);

/// Σ_{j ∈ N_i} w_ij (x_j - x_i) in ascending j, with x_j read through `neighbor_state`.
template <class StateOf>
void consensus_term(const DirectedGraph& g, const WeightMatrix& w, NodeId i,
                    std::span<const double> own, StateOf&& neighbor_state, std::span<double> out) {
    for (double& v : out) v = 0.0;
    for (NodeId j : g.in_neighbors(i)) {
        const double wij = w(i, j);
        const std::span<const double> xj = neighbor_state(j);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += wij * (xj[k] - own[k]);
    }
}

/// Diminishing-step subgradient tracker y_{t+1} = β_t ∇f_i(x_{t+1}).
void subgradient_tracker(std::size_t t, std::span<const double> grad_next, const StepSchedule& beta,
                         std::span<double> out);

/// First t with max_i ‖x_{i,t} - x*‖ ≤ rel ‖x*‖.
std::optional<std::size_t> convergence_time(const Trajectory& traj, std::span<const double> x_star,
                                            double rel);

/// CSV columns t,node,component,x,xi where xi on row t is ξ_{t-1}, the
/// message node sends at round t (ξ_{-1} = x_0).
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

}  // namespace innoprot
