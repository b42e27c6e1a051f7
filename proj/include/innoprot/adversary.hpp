#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "innoprot/consensus.hpp"
#include "innoprot/rng.hpp"
#include "innoprot/vector_ops.hpp"

namespace innoprot {

enum class SharingMode { innovation, state };

/// Probabilistic eavesdropper on one node's outgoing messages.
///
/// Estimator: z_t = (1 - μ_t) b_t z_{t-1} + μ_t m_t with b_0 = 1, b_t = b.
/// In innovation mode m_t = ξ_{t-1} and x̂_t = x̂_{t-1} + z_t (x̂_{-1} = 0);
/// in state mode m_t = x_t and x̂_t = z_t.
struct AdversaryConfig {
    double gamma = 0.5;
    double b = 0.0;
    Vector z_init;  // z_{-1}; empty means zero
    SharingMode mode = SharingMode::innovation;
    NodeId target = 0;
    std::uint64_t seed = 0;
    /// Test hook: every interception succeeds (true) or fails (false).
    std::optional<bool> forced_outcome;
};

/// Throws std::invalid_argument unless 0 < γ < 1 and z_init fits `dim`.
void validate(const AdversaryConfig& cfg, std::size_t dim);

inline bool intercepted(const AdversaryConfig& cfg, std::uint64_t run_index, std::size_t t) {
    if (cfg.forced_outcome) return *cfg.forced_outcome;
    return counter_uniform(cfg.seed, run_index, t) < cfg.gamma;
}

/// One sampled realization, t = 0..H.
struct AdversaryRun {
    std::size_t dim = 0;
    std::vector<std::uint8_t> mu;
    std::vector<double> z, x_hat, e;

    std::size_t steps() const { return mu.size(); }
    std::span<const double> z_at(std::size_t t) const { return {z.data() + t * dim, dim}; }
    std::span<const double> x_hat_at(std::size_t t) const { return {x_hat.data() + t * dim, dim}; }
    std::span<const double> e_at(std::size_t t) const { return {e.data() + t * dim, dim}; }
};

/// Walks the estimator over t = 0..horizon, calling
/// visit(t, mu, z_t, x̂_t, e_t) after each step. Pure in (signal, cfg, run_index).
template <class Visitor>
void simulate(const NodeSignal& signal, const AdversaryConfig& cfg, std::uint64_t run_index,
              std::size_t horizon, Visitor&& visit) {
    const std::size_t m = signal.dim;
    Vector z(m, 0.0), x_hat(m, 0.0), e(m);
    if (!cfg.z_init.empty()) z = cfg.z_init;
    for (std::size_t t = 0; t <= horizon; ++t) {
        const bool mu = intercepted(cfg, run_index, t);
        const double weight = t == 0 ? 1.0 : cfg.b;
        const std::span<const double> x_t = signal.state(t);
        const std::span<const double> msg =
            cfg.mode == SharingMode::state ? x_t : (t == 0 ? std::span<const double>(signal.x0) : signal.xi(t - 1));
        for (std::size_t k = 0; k < m; ++k) {
            z[k] = mu ? msg[k] : weight * z[k];
            x_hat[k] = cfg.mode == SharingMode::state ? z[k] : x_hat[k] + z[k];
            e[k] = x_hat[k] - x_t[k];
        }
        visit(t, mu, std::span<const double>(z), std::span<const double>(x_hat), std::span<const double>(e));
    }
}

/// Records a full run up to `horizon` (default: end of the signal).
AdversaryRun sample_run(const NodeSignal& signal, const AdversaryConfig& cfg, std::uint64_t run_index,
                        std::optional<std::size_t> horizon = std::nullopt);
AdversaryRun sample_run(const Trajectory& traj, const AdversaryConfig& cfg, std::uint64_t run_index,
                        std::optional<std::size_t> horizon = std::nullopt);

/// Moments of the post-horizon gain G = Σ_{k≥1} Π_{j≤k} (1 - μ_{H+j}) b when
/// no further innovation arrives: e_∞ = e_H + G z_H.
struct TailFactors {
    double mean = 0.0;    // E G
    double second = 0.0;  // E G²
};

/// Throws std::invalid_argument when (1 - p) b² ≥ 1 (the tail has no second moment).
TailFactors tail_factors(double b, double success_prob);
TailFactors tail_factors(const AdversaryConfig& cfg);

/// Closed-form E[e_∞ | e_H, z_H] and E[‖e_∞‖² | e_H, z_H] for innovation mode.
struct ClosedTail {
    Vector mean_error;
    double mean_sq = 0.0;
};
ClosedTail close_tail(std::span<const double> e_h, std::span<const double> z_h, const TailFactors& f);

/// ‖e_T‖² at the last recorded step.
double terminal_error(const AdversaryRun& run);
/// Tail-closed E‖e_∞‖² conditioned on the last recorded (e_T, z_T).
double terminal_error(const AdversaryRun& run, const AdversaryConfig& cfg);

/// Per-time sample means and standard errors across independent runs.
struct MomentSample {
    std::size_t t = 0;
    Vector z_mean, z_se, e_mean, e_se;
    double z2_mean = 0.0, z2_se = 0.0, e2_mean = 0.0, e2_se = 0.0;
};

/// Runs `runs` realizations and summarizes z_t, ‖z_t‖², e_t, ‖e_t‖² at each
/// requested t. The result does not depend on the thread count.
std::vector<MomentSample> empirical_moments(const NodeSignal& signal, const AdversaryConfig& cfg,
                                            std::size_t runs, std::span<const std::size_t> times,
                                            std::size_t threads = 0);

/// CSV columns t,mu,z0..,e0.. for debugging a single run.
void write_run_csv(std::ostream& os, const AdversaryRun& run);

}  // namespace innoprot
