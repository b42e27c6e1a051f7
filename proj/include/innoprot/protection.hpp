#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "innoprot/adversary.hpp"
#include "innoprot/consensus.hpp"
#include "innoprot/vector_ops.hpp"

namespace innoprot {

/// What the analytics need to know about the eavesdropper.
struct EstimatorModel {
    double gamma = 0.5;
    double b = 0.0;
    Vector z_init;                       // E z_{-1}; empty means zero
    std::optional<double> z_init_norm2;  // E‖z_{-1}‖²; defaults to ‖E z_{-1}‖² (deterministic start)

    static EstimatorModel from(const AdversaryConfig& cfg) { return {cfg.gamma, cfg.b, cfg.z_init, std::nullopt}; }
};

/// c = bγ̄, ρ = bγ/(1-c), ν = b - γ̄ - ργ. Construction requires γ̄b² < 1.
struct DerivedConstants {
    double gamma = 0.0;
    double b = 0.0;
    double c = 0.0;
    double rho = 0.0;
    double nu = 0.0;

    static DerivedConstants make(double gamma, double b);
    double gamma_bar() const { return 1.0 - gamma; }
    /// (b² + b - |ρ|/η) / (1 - bc)
    double h(double eta) const;
};

/// True when the estimator moment recursions are stable, γ̄b² < 1.
bool stable(double gamma, double b);

/// Expected estimator moments advanced along an innovation sequence, with
/// accumulated series Q = Σ‖ξ_t‖², R = Σ⟨E z_t, ξ_t⟩, P = Σ⟨E e_t, ξ_t⟩, S = Σ E‖z_t‖².
struct MomentSeries {
    std::size_t dim = 0;
    std::vector<double> ez;      // (horizon + 1) * dim
    std::vector<double> eznorm;  // horizon + 1
    std::vector<double> ee;      // (horizon + 1) * dim
    double q = 0.0, r = 0.0, p = 0.0, s = 0.0;

    /// Innovations processed before the cutoff; later ones are treated as zero.
    std::size_t horizon = 0;
    /// Analytic geometric tail added to S.
    double s_tail = 0.0;
    /// Σ‖ξ_t‖² over innovations past the cutoff.
    double truncated_q = 0.0;
    /// Set when truncated_q exceeds 1e-6 of Q.
    bool tail_warning = false;

    std::span<const double> ez_at(std::size_t t) const { return {ez.data() + t * dim, dim}; }
    std::span<const double> ee_at(std::size_t t) const { return {ee.data() + t * dim, dim}; }
};

MomentSeries moment_series(const NodeSignal& signal, const EstimatorModel& model);

/// Limit E‖e_∞‖² of the innovation-sharing estimator.
double exact_protection(const NodeSignal& signal, std::span<const double> x_star, const EstimatorModel& model);

struct OptimizeEta {};
using EtaChoice = std::variant<double, OptimizeEta>;

struct LowerBound {
    double value = 0.0;
    double eta = 1.0;
};

/// R-free lower bound on E‖e_∞‖², exact at b = 0. With OptimizeEta the bound
/// is maximized over η on a log grid in [1e-3, 1e3] plus golden-section refinement.
LowerBound protection_lower_bound(const NodeSignal& signal, std::span<const double> x_star,
                                  const EstimatorModel& model, EtaChoice eta);

/// Closed form at b = 0: γγ̄²‖d0‖² + γ̄‖z_{-1} - x0 - γ̄d0‖² + γγ̄Q, d0 = x* - x0.
double protection_b0(const NodeSignal& signal, std::span<const double> x_star, double gamma,
                     std::span<const double> z_init = {});

struct UnbiasedProtection {
    Vector mean_error;
    double value = 0.0;
};

/// b = 1, z_{-1} = 0: (γ̄/γ)(‖x0‖² + Σ‖E z_t - ξ_t‖² + Σ Var z_t), with
/// E e_∞ from the mean-error recursion (zero up to rounding).
UnbiasedProtection protection_b1(const NodeSignal& signal, double gamma);

/// γγ̄ Σ_{t≥-1} ‖ξ_t‖², a floor on the entropy power of the b = 0 error.
double entropy_floor(const NodeSignal& signal, double gamma);

struct NetworkProtection {
    double value = 0.0;
    NodeId node = 0;
};

/// Minimum protection over nodes; ties go to the smallest id.
NetworkProtection network_protection(const std::map<NodeId, double>& per_node);

struct MonteCarloEstimate {
    double mean = 0.0;
    double std_err = 0.0;
    Vector mean_error;
    Vector error_std_err;
    std::size_t runs = 0;
    std::size_t horizon = 0;
};

/// Sample mean of the tail-closed squared error E[‖e_∞‖² | e_H, z_H] over
/// independent runs, plus the componentwise mean of E[e_∞ | e_H, z_H].
/// Result is independent of the thread count.
MonteCarloEstimate monte_carlo_protection(const NodeSignal& signal, const AdversaryConfig& cfg, std::size_t runs,
                                          std::optional<std::size_t> horizon = std::nullopt,
                                          std::size_t threads = 0);

struct ProtectionReport {
    double exact = 0.0;
    LowerBound lower_bound;            // at the requested η
    LowerBound lower_bound_optimized;  // η optimized
    std::optional<double> b0_value;    // when b == 0
    std::optional<double> b1_value;    // when b == 1 and z_{-1} == 0
    double entropy_floor = 0.0;
    double q = 0.0, r = 0.0, p = 0.0, s = 0.0;
};

ProtectionReport protection_report(const NodeSignal& signal, std::span<const double> x_star,
                                   const EstimatorModel& model, double eta = 1.0);

struct NetworkReport {
    std::map<NodeId, ProtectionReport> per_node;
    NetworkProtection minimum;
};

NetworkReport network_report(const Trajectory& traj, std::span<const double> x_star, const EstimatorModel& model,
                             double eta = 1.0);

}  // namespace innoprot
