#include "innoprot/protection.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "innoprot/parallel.hpp"
#include "innoprot/stats.hpp"

namespace innoprot {

bool stable(double gamma, double b) { return (1.0 - gamma) * b * b < 1.0; }

DerivedConstants DerivedConstants::make(double gamma, double b) {
    if (!(gamma > 0.0 && gamma < 1.0)) {
        throw std::invalid_argument(fmt::format("eavesdrop probability must lie in (0, 1), got {}", gamma));
    }
    if (!stable(gamma, b)) {
        throw std::invalid_argument(
            fmt::format("protection undefined: (1-gamma) b^2 = {} >= 1 (gamma={}, b={})", (1.0 - gamma) * b * b, gamma, b));
    }
    DerivedConstants k;
    k.gamma = gamma;
    k.b = b;
    k.c = b * (1.0 - gamma);
    k.rho = b * gamma / (1.0 - k.c);
    k.nu = b - (1.0 - gamma) - k.rho * gamma;
    return k;
}

double DerivedConstants::h(double eta) const { return (b * b + b - std::abs(rho) / eta) / (1.0 - b * c); }

namespace {

constexpr double cutoff_rel = 1e-14;
constexpr std::size_t cutoff_run = 50;
constexpr double tail_warn_rel = 1e-6;

Vector init_mean(const EstimatorModel& model, std::size_t dim) {
    if (model.z_init.empty()) return Vector(dim, 0.0);
    if (model.z_init.size() != dim) throw std::invalid_argument("z_init has wrong dimension");
    return model.z_init;
}

double init_norm2(const EstimatorModel& model, std::span<const double> z_mean) {
    const double base = norm2(z_mean);
    if (!model.z_init_norm2) return base;
    if (*model.z_init_norm2 < base) throw std::invalid_argument("E||z_{-1}||^2 below ||E z_{-1}||^2");
    return *model.z_init_norm2;
}

double total_q(const NodeSignal& signal) {
    double q = 0.0;
    for (std::size_t t = 0; t < signal.steps(); ++t) q += norm2(signal.xi(t));
    return q;
}

// Terms of the limit identity shared by the exact value and the R-free bound.
struct InitialTerms {
    double x0_sq = 0.0;
    double z_sq = 0.0;        // E‖z_{-1}‖²
    double z_minus_x0 = 0.0;  // E‖z_{-1} - x0‖²
    double d0_sq = 0.0;
    double cross = 0.0;       // ⟨E z_{-1} - (1-b) x0, d0⟩
};

InitialTerms initial_terms(const NodeSignal& signal, std::span<const double> x_star, const EstimatorModel& model) {
    const std::size_t m = signal.dim;
    if (x_star.size() != m) throw std::invalid_argument("x_star has wrong dimension");
    const Vector z = init_mean(model, m);
    InitialTerms it;
    it.x0_sq = norm2(signal.x0);
    it.z_sq = init_norm2(model, z);
    // E‖z - x0‖² = ‖E z - x0‖² + (E‖z‖² - ‖E z‖²)
    it.z_minus_x0 = dist2(z, signal.x0) + (it.z_sq - norm2(z));
    const Vector d0 = sub(x_star, signal.x0);
    it.d0_sq = norm2(d0);
    for (std::size_t k = 0; k < m; ++k) it.cross += (z[k] - (1.0 - model.b) * signal.x0[k]) * d0[k];
    return it;
}

}  // namespace

MomentSeries moment_series(const NodeSignal& signal, const EstimatorModel& model) {
    const auto k = DerivedConstants::make(model.gamma, model.b);
    const double g = model.gamma, gb = 1.0 - g, c = k.c, bc = model.b * c;
    const std::size_t m = signal.dim, steps = signal.steps();
    const Vector z = init_mean(model, m);

    MomentSeries ms;
    ms.dim = m;
    ms.ez.reserve((steps + 1) * m);
    ms.ee.reserve((steps + 1) * m);
    ms.eznorm.reserve(steps + 1);
    for (std::size_t i = 0; i < m; ++i) {
        ms.ez.push_back(g * signal.x0[i] + gb * z[i]);
        ms.ee.push_back(gb * (z[i] - signal.x0[i]));
    }
    ms.eznorm.push_back(gb * init_norm2(model, z) + g * norm2(signal.x0));

    std::size_t quiet = 0;
    std::size_t t = 0;
    for (; t < steps; ++t) {
        const auto xi = signal.xi(t);
        const double xi_sq = norm2(xi);
        ms.q += xi_sq;
        ms.r += dot(ms.ez_at(t), xi);
        ms.p += dot(ms.ee_at(t), xi);
        for (std::size_t i = 0; i < m; ++i) {
            const double ez = ms.ez[t * m + i];
            ms.ez.push_back(c * ez + g * xi[i]);
            ms.ee.push_back(ms.ee[t * m + i] + c * ez - gb * xi[i]);
        }
        ms.eznorm.push_back(bc * ms.eznorm[t] + g * xi_sq);

        quiet = xi_sq < cutoff_rel * (1.0 + ms.q) ? quiet + 1 : 0;
        if (quiet >= cutoff_run) {
            ++t;
            break;
        }
    }
    ms.horizon = t;
    for (std::size_t u = t; u < steps; ++u) ms.truncated_q += norm2(signal.xi(u));

    for (double v : ms.eznorm) ms.s += v;
    ms.s_tail = ms.eznorm.back() * bc / (1.0 - bc);
    ms.s += ms.s_tail;
    ms.tail_warning = ms.truncated_q > tail_warn_rel * ms.q;
    return ms;
}

double exact_protection(const NodeSignal& signal, std::span<const double> x_star, const EstimatorModel& model) {
    const auto k = DerivedConstants::make(model.gamma, model.b);
    const MomentSeries ms = moment_series(signal, model);
    const InitialTerms it = initial_terms(signal, x_star, model);
    const double g = model.gamma, gb = 1.0 - g, b = model.b, cbar = 1.0 - k.c;

    const double kappa = b * (b + 1.0) / (1.0 - b * k.c);
    const double rhs = kappa * (gb * it.z_sq + g * it.x0_sq) - b * it.x0_sq + it.z_minus_x0 +
                       (kappa + 1.0 - k.rho) * g * ms.q - 2.0 * k.rho * ms.r -
                       2.0 * (1.0 - b) * gb / cbar * it.cross - k.nu * it.d0_sq;
    return gb / cbar * rhs;
}

namespace {

double lower_bound_at(const DerivedConstants& k, const InitialTerms& it, double q, double eta) {
    const double g = k.gamma, gb = 1.0 - g, b = k.b, cbar = 1.0 - k.c;
    const double h = k.h(eta);
    const double rhs = it.z_minus_x0 + h * gb * it.z_sq + (h * g - b) * it.x0_sq +
                       (g * (1.0 - k.rho) + h * g - std::abs(k.rho) * eta) * q -
                       2.0 * (1.0 - b) * gb / cbar * it.cross - k.nu * it.d0_sq;
    return gb / cbar * rhs;
}

}  // namespace

LowerBound protection_lower_bound(const NodeSignal& signal, std::span<const double> x_star,
                                  const EstimatorModel& model, EtaChoice eta) {
    const auto k = DerivedConstants::make(model.gamma, model.b);
    const InitialTerms it = initial_terms(signal, x_star, model);
    const double q = total_q(signal);

    if (const double* fixed = std::get_if<double>(&eta)) {
        if (!(*fixed > 0.0)) throw std::invalid_argument("eta must be > 0");
        return {lower_bound_at(k, it, q, *fixed), *fixed};
    }

    constexpr std::size_t grid = 61;
    const double lo = std::log(1e-3), hi = std::log(1e3), step = (hi - lo) / (grid - 1);
    std::size_t best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid; ++i) {
        const double v = lower_bound_at(k, it, q, std::exp(lo + step * i));
        if (v > best_value) {
            best_value = v;
            best = i;
        }
    }
    // Concave in log η; refine on the bracketing cells.
    double a = lo + step * (best == 0 ? 0 : best - 1);
    double d = lo + step * std::min(best + 1, grid - 1);
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = d - phi * (d - a), x2 = a + phi * (d - a);
    double f1 = lower_bound_at(k, it, q, std::exp(x1)), f2 = lower_bound_at(k, it, q, std::exp(x2));
    for (int iter = 0; iter < 80; ++iter) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (d - a);
            f2 = lower_bound_at(k, it, q, std::exp(x2));
        } else {
            d = x2;
            x2 = x1;
            f2 = f1;
            x1 = d - phi * (d - a);
            f1 = lower_bound_at(k, it, q, std::exp(x1));
        }
    }
    const double x_mid = 0.5 * (a + d);
    const double refined = lower_bound_at(k, it, q, std::exp(x_mid));
    if (refined >= best_value) return {refined, std::exp(x_mid)};
    return {best_value, std::exp(lo + step * best)};
}

double protection_b0(const NodeSignal& signal, std::span<const double> x_star, double gamma,
                     std::span<const double> z_init) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("eavesdrop probability must lie in (0, 1)");
    const std::size_t m = signal.dim;
    if (x_star.size() != m || (!z_init.empty() && z_init.size() != m)) {
        throw std::invalid_argument("dimension mismatch in protection_b0");
    }
    const double gb = 1.0 - gamma;
    double d0_sq = 0.0, offset_sq = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const double d0 = x_star[k] - signal.x0[k];
        const double z = z_init.empty() ? 0.0 : z_init[k];
        const double off = z - signal.x0[k] - gb * d0;
        d0_sq += d0 * d0;
        offset_sq += off * off;
    }
    return gamma * gb * gb * d0_sq + gb * offset_sq + gamma * gb * total_q(signal);
}

UnbiasedProtection protection_b1(const NodeSignal& signal, double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("eavesdrop probability must lie in (0, 1)");
    const std::size_t m = signal.dim;
    const double g = gamma, gb = 1.0 - g;  // c = γ̄ and bc = γ̄ at b = 1

    Vector ez(m), ee(m);
    for (std::size_t k = 0; k < m; ++k) {
        ez[k] = g * signal.x0[k];
        ee[k] = -gb * signal.x0[k];
    }
    double ez2 = g * norm2(signal.x0);
    double mismatch = 0.0, variance = 0.0;
    for (std::size_t t = 0; t < signal.steps(); ++t) {
        const auto xi = signal.xi(t);
        double ez_sq = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const double d = ez[k] - xi[k];
            mismatch += d * d;
            ez_sq += ez[k] * ez[k];
        }
        variance += ez2 - ez_sq;
        for (std::size_t k = 0; k < m; ++k) {
            ee[k] += gb * ez[k] - gb * xi[k];
            ez[k] = gb * ez[k] + g * xi[k];
        }
        ez2 = gb * ez2 + g * norm2(xi);
    }
    // Beyond the signal ξ = 0: Σ(‖E z‖² + Var z) = Σ E‖z‖² = E‖z_T‖² / γ, and
    // E e gains Σ_{k≥0} γ̄ E z_{T+k} = (γ̄/γ) E z_T.
    UnbiasedProtection out;
    out.value = gb / g * (norm2(signal.x0) + mismatch + variance + ez2 / g);
    out.mean_error.resize(m);
    for (std::size_t k = 0; k < m; ++k) out.mean_error[k] = ee[k] + gb / g * ez[k];
    return out;
}

double entropy_floor(const NodeSignal& signal, double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("eavesdrop probability must lie in (0, 1)");
    return gamma * (1.0 - gamma) * (norm2(signal.x0) + total_q(signal));
}

NetworkProtection network_protection(const std::map<NodeId, double>& per_node) {
    if (per_node.empty()) throw std::invalid_argument("network_protection needs at least one node");
    NetworkProtection best{per_node.begin()->second, per_node.begin()->first};
    for (const auto& [node, value] : per_node) {
        if (value < best.value) best = {value, node};
    }
    return best;
}

namespace {

constexpr std::size_t runs_per_chunk = 256;

struct McChunk {
    RunningStats sq;
    std::vector<RunningStats> err;
};

}  // namespace

MonteCarloEstimate monte_carlo_protection(const NodeSignal& signal, const AdversaryConfig& cfg, std::size_t runs,
                                          std::optional<std::size_t> horizon, std::size_t threads) {
    validate(cfg, signal.dim);
    if (cfg.mode != SharingMode::innovation) {
        throw std::invalid_argument("Monte Carlo protection is defined for innovation sharing");
    }
    if (runs < 100) throw std::invalid_argument("Monte Carlo protection needs at least 100 runs");
    if (!stable(cfg.gamma, cfg.b)) {
        throw std::invalid_argument(fmt::format("protection undefined: (1-gamma) b^2 >= 1 (gamma={}, b={})",
                                                cfg.gamma, cfg.b));
    }
    const std::size_t h = std::min(horizon.value_or(signal.steps()), signal.steps());
    const TailFactors tail = tail_factors(cfg);
    const std::size_t m = signal.dim;

    const std::size_t chunks = (runs + runs_per_chunk - 1) / runs_per_chunk;
    std::vector<McChunk> partial(chunks);
    parallel_for(chunks, threads, [&](std::size_t c) {
        McChunk& acc = partial[c];
        acc.err.resize(m);
        const std::size_t begin = c * runs_per_chunk, end = std::min(runs, begin + runs_per_chunk);
        Vector e_h(m), z_h(m);
        for (std::size_t r = begin; r < end; ++r) {
            simulate(signal, cfg, r, h,
                     [&](std::size_t t, bool, std::span<const double> z, std::span<const double>,
                         std::span<const double> e) {
                         if (t == h) {
                             std::copy(z.begin(), z.end(), z_h.begin());
                             std::copy(e.begin(), e.end(), e_h.begin());
                         }
                     });
            const ClosedTail closed = close_tail(e_h, z_h, tail);
            acc.sq.push(closed.mean_sq);
            for (std::size_t k = 0; k < m; ++k) acc.err[k].push(closed.mean_error[k]);
        }
    });

    RunningStats sq;
    std::vector<RunningStats> err(m);
    for (const auto& chunk : partial) {
        sq.merge(chunk.sq);
        for (std::size_t k = 0; k < m; ++k) err[k].merge(chunk.err[k]);
    }
    MonteCarloEstimate out;
    out.mean = sq.mean;
    out.std_err = sq.std_err();
    out.runs = runs;
    out.horizon = h;
    for (const auto& s : err) {
        out.mean_error.push_back(s.mean);
        out.error_std_err.push_back(s.std_err());
    }
    return out;
}

ProtectionReport protection_report(const NodeSignal& signal, std::span<const double> x_star,
                                   const EstimatorModel& model, double eta) {
    ProtectionReport rep;
    const MomentSeries ms = moment_series(signal, model);
    rep.q = ms.q;
    rep.r = ms.r;
    rep.p = ms.p;
    rep.s = ms.s;
    rep.exact = exact_protection(signal, x_star, model);
    rep.lower_bound = protection_lower_bound(signal, x_star, model, eta);
    rep.lower_bound_optimized = protection_lower_bound(signal, x_star, model, OptimizeEta{});
    rep.entropy_floor = entropy_floor(signal, model.gamma);
    if (model.b == 0.0) rep.b0_value = protection_b0(signal, x_star, model.gamma, model.z_init);
    const bool zero_start =
        std::all_of(model.z_init.begin(), model.z_init.end(), [](double v) { return v == 0.0; }) &&
        model.z_init_norm2.value_or(0.0) == 0.0;
    if (model.b == 1.0 && zero_start) rep.b1_value = protection_b1(signal, model.gamma).value;
    return rep;
}

NetworkReport network_report(const Trajectory& traj, std::span<const double> x_star, const EstimatorModel& model,
                             double eta) {
    NetworkReport out;
    std::map<NodeId, double> values;
    for (NodeId i = 0; i < traj.nodes(); ++i) {
        auto rep = protection_report(traj.node_signal(i), x_star, model, eta);
        values[i] = rep.exact;
        out.per_node.emplace(i, std::move(rep));
    }
    out.minimum = network_protection(values);
    return out;
}

}  // namespace innoprot
