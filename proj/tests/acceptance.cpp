// Acceptance runner: one line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include <fmt/format.h>

#include "innoprot/harness.hpp"
#include "innoprot/protection.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace innoprot;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Reference {
    harness::ExperimentConfig cfg;
    harness::Instance inst;
    Trajectory traj{1, 1};
};

// n = 10, m = 3, 10 samples per node, σ = 1, α = 0.01.
const Reference& reference() {
    static const Reference p = [] {
        Reference out;
        out.inst = harness::build_instance(out.cfg);
        out.traj = run_dico(out.inst.graph, out.inst.weights, out.inst.objective,
                            harness::algorithm_config(out.cfg, out.inst, out.cfg.algorithm.alpha, 1.0));
        return out;
    }();
    return p;
}

Outcome dico_matches_dco() {
    const auto& p = reference();
    auto acfg = harness::algorithm_config(p.cfg, p.inst, 0.01, 1.0);
    acfg.max_iters = 20000;
    acfg.stop_tol = 0.0;
    const auto start = Clock::now();
    const auto dco = run_dco(p.inst.graph, p.inst.weights, p.inst.objective, acfg);
    const auto dico = run_dico(p.inst.graph, p.inst.weights, p.inst.objective, acfg);
    const double elapsed = seconds_since(start);
    double gap = dco.rounds() == dico.rounds() ? 0.0 : INFINITY;
    for (std::size_t t = 0; t <= std::min(dco.rounds(), dico.rounds()); ++t)
        for (std::size_t i = 0; i < 10; ++i) gap = std::max(gap, std::sqrt(dist2(dco.state(t, i), dico.state(t, i))));
    return {gap == 0.0 && dco.rounds() == 20000 && elapsed < 10.0,
            fmt::format("rounds={} max gap={:.3g} time={:.2f}s", dco.rounds(), gap, elapsed)};
}

Outcome monte_carlo_matches_exact() {
    const auto& p = reference();
    const auto sig = p.traj.node_signal(0);
    const auto start = Clock::now();
    int agree = 0, cells = 0;
    double worst = 0;
    for (double gamma : {0.25, 0.5, 0.75}) {
        for (double b : {-0.55, 0.0, 0.5, 1.0}) {
            AdversaryConfig a;
            a.gamma = gamma;
            a.b = b;
            a.seed = 1000 + cells;
            const auto mc = monte_carlo_protection(sig, a, 10000);
            const double exact = exact_protection(sig, p.inst.x_star, EstimatorModel::from(a));
            const double z = std::abs(mc.mean - exact) / mc.std_err;
            worst = std::max(worst, z);
            agree += z <= 3.0;
            ++cells;
        }
    }
    const double elapsed = seconds_since(start);
    return {agree >= 11 && elapsed < 300.0,
            fmt::format("{}/{} cells within 3 SE, worst {:.2f} SE, time={:.1f}s", agree, cells, worst, elapsed)};
}

Outcome lower_bound_equality_and_dominance() {
    const auto& p = reference();
    double eq_gap = 0, worst_excess = -INFINITY;
    std::size_t evaluated = 0;
    harness::AdversaryBlock grid_block;
    for (std::size_t i = 0; i < 10; ++i) {
        const auto sig = p.traj.node_signal(i);
        for (double gamma : {0.25, 0.5, 0.75}) {
            const EstimatorModel zero{gamma, 0.0, {}, std::nullopt};
            const double exact0 = exact_protection(sig, p.inst.x_star, zero);
            const double lb0 = protection_lower_bound(sig, p.inst.x_star, zero, 1.0).value;
            eq_gap = std::max(eq_gap, std::abs(lb0 - exact0) / (1 + exact0));
            for (double b : grid_block.b_grid()) {
                if (!stable(gamma, b)) continue;
                const EstimatorModel model{gamma, b, {}, std::nullopt};
                const double exact = exact_protection(sig, p.inst.x_star, model);
                for (EtaChoice eta : {EtaChoice{0.5}, EtaChoice{1.0}, EtaChoice{2.0}, EtaChoice{OptimizeEta{}}}) {
                    const double lb = protection_lower_bound(sig, p.inst.x_star, model, eta).value;
                    worst_excess = std::max(worst_excess, lb - exact);
                    ++evaluated;
                }
            }
        }
    }
    return {eq_gap <= 1e-9 && worst_excess <= 1e-8,
            fmt::format("b=0 relative gap {:.3g}; max(lb - exact) = {:.3g} over {} bounds", eq_gap, worst_excess,
                        evaluated)};
}

Outcome special_cases() {
    std::mt19937_64 rng(20240);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst0 = 0, worst1 = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto seq = oracle::random_sequence(rng, 3, 40, 0.4 + 0.5 * unit(rng));
        const auto sig = to_signal(seq);
        const auto xs = seq.limit();
        const double gamma = 0.05 + 0.9 * unit(rng);
        const double e0 = exact_protection(sig, xs, {gamma, 0.0, {}, std::nullopt});
        const double e1 = exact_protection(sig, xs, {gamma, 1.0, {}, std::nullopt});
        worst0 = std::max(worst0, rel_diff(protection_b0(sig, xs, gamma), e0));
        worst1 = std::max(worst1, rel_diff(protection_b1(sig, gamma).value, e1));
    }
    return {worst0 <= 1e-9 && worst1 <= 1e-9, fmt::format("b=0 worst rel {:.3g}; b=1 worst rel {:.3g}", worst0, worst1)};
}

Outcome unbiased_at_b1() {
    const auto& p = reference();
    const auto sig = p.traj.node_signal(0);
    AdversaryConfig a;
    a.gamma = 0.5;
    a.b = 1.0;
    a.seed = 555;
    const auto mc = monte_carlo_protection(sig, a, 10000);
    double worst = 0;
    for (std::size_t k = 0; k < mc.mean_error.size(); ++k)
        worst = std::max(worst, std::abs(mc.mean_error[k]) / mc.error_std_err[k]);
    return {worst <= 4.0, fmt::format("worst component |mean| = {:.2f} SE", worst)};
}

Outcome state_sharing_decay() {
    const auto& p = reference();
    const auto conv = convergence_time(p.traj, p.inst.x_star, 0.01);
    if (!conv) return {false, "trajectory never within 1% of x*"};
    const std::size_t horizon = 2 * *conv;
    Trajectory traj = p.traj;
    if (traj.rounds() < horizon) {
        auto acfg = harness::algorithm_config(p.cfg, p.inst, 0.01, 1.0);
        acfg.stop_tol = 0.0;
        acfg.max_iters = horizon;
        traj = run_dico(p.inst.graph, p.inst.weights, p.inst.objective, acfg);
    }
    const std::vector<std::size_t> times{0, horizon};
    double worst = 0;
    for (double gamma : {0.1, 0.5, 0.9}) {
        for (std::size_t i = 0; i < 10; ++i) {
            AdversaryConfig a;
            a.gamma = gamma;
            a.b = 1.0;
            a.mode = SharingMode::state;
            a.target = i;
            a.seed = 77;
            const auto mo = empirical_moments(traj.node_signal(i), a, 1000, times);
            worst = std::max(worst, mo[1].e2_mean / mo[0].e2_mean);
        }
    }
    return {worst <= 1e-4, fmt::format("t={} (2x convergence), worst ratio over 30 node/gamma pairs {:.3g}", horizon, worst)};
}

Outcome series_identities() {
    std::mt19937_64 rng(777);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    double worst_pr = 0, worst_s = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t dim = 1 + trial % 4;
        const auto seq = oracle::random_sequence(rng, dim, 10 + trial * 3, 0.3 + 0.65 * unit(rng), trial % 2);
        const auto sig = to_signal(seq);
        const double gamma = 0.05 + 0.9 * unit(rng);
        const double bmax = std::min(1.5, 0.98 / std::sqrt(1 - gamma));
        const double b = (2 * unit(rng) - 1) * bmax;
        oracle::Vec z(dim);
        for (auto& v : z) v = normal(rng);
        const auto k = DerivedConstants::make(gamma, b);
        const auto ms = moment_series(sig, {gamma, b, z, std::nullopt});
        const auto xs = seq.limit();
        double theta_d0 = 0;
        for (std::size_t c = 0; c < dim; ++c) {
            const double theta = (1 - b) * ms.ee_at(0)[c] + (b - k.rho) * ms.ez_at(0)[c] - k.nu * seq.x0[c];
            theta_d0 += theta * (xs[c] - seq.x0[c]);
        }
        const double lhs = (1 - b) * ms.p + (b - k.rho) * ms.r;
        const double rhs = theta_d0 + 0.5 * k.nu * (oracle::dot(xs, xs) - oracle::dot(seq.x0, seq.x0) - ms.q);
        const double mag = 1 + std::abs((1 - b) * ms.p) + std::abs((b - k.rho) * ms.r) + std::abs(theta_d0) +
                           std::abs(0.5 * k.nu * ms.q);
        worst_pr = std::max(worst_pr, std::abs(lhs - rhs) / mag);
        const double closed = (ms.eznorm[0] + gamma * ms.q) / (1 - b * k.c);
        worst_s = std::max(worst_s, std::abs(ms.s - closed) / std::max(1.0, std::abs(closed)));
    }
    return {worst_pr <= 1e-7 && worst_s <= 1e-7,
            fmt::format("P/R identity worst rel {:.3g}; S closed form worst rel {:.3g}", worst_pr, worst_s)};
}

Outcome moment_recursions() {
    const auto& p = reference();
    const auto sig = p.traj.node_signal(0);
    AdversaryConfig a;
    a.gamma = 0.5;
    a.b = -0.55;
    a.seed = 31337;
    const auto ms = moment_series(sig, EstimatorModel::from(a));
    const std::size_t last = std::min(ms.horizon, sig.steps());
    std::vector<std::size_t> times;
    for (std::size_t k = 0; k < 10; ++k) times.push_back(k < 6 ? k : last * (k - 5) / 4);
    const auto emp = empirical_moments(sig, a, 100000, times);
    double worst = 0;
    for (const auto& mo : emp) {
        for (std::size_t c = 0; c < sig.dim; ++c) {
            worst = std::max(worst, std::abs(mo.z_mean[c] - ms.ez_at(mo.t)[c]) / mo.z_se[c]);
            worst = std::max(worst, std::abs(mo.e_mean[c] - ms.ee_at(mo.t)[c]) / mo.e_se[c]);
        }
        worst = std::max(worst, std::abs(mo.z2_mean - ms.eznorm[mo.t]) / mo.z2_se);
    }
    return {worst <= 4.0, fmt::format("10 time indices up to t={}, worst deviation {:.2f} SE", last, worst)};
}

Outcome tradeoff_trends() {
    const auto& p = reference();
    std::optional<std::size_t> prev_conv;
    double prev_prot = -INFINITY;
    int prot_drops = 0, conv_drops = 0, missing = 0;
    for (int k = 0; k < 30; ++k) {
        const double scale = 1.0 + 0.5 * k;
        const auto traj = run_dico(p.inst.graph, p.inst.weights, p.inst.objective,
                                   harness::algorithm_config(p.cfg, p.inst, 0.05, scale));
        const auto conv = convergence_time(traj, p.inst.x_star, 0.01);
        std::map<NodeId, double> per_node;
        for (std::size_t i = 0; i < 10; ++i)
            per_node[i] = exact_protection(traj.node_signal(i), p.inst.x_star, {0.5, 0.0, {}, std::nullopt});
        const double prot = network_protection(per_node).value;
        if (!conv) ++missing;
        if (prot < prev_prot) ++prot_drops;
        if (conv && prev_conv && *conv < *prev_conv) ++conv_drops;
        prev_prot = prot;
        prev_conv = conv;
    }
    return {prot_drops == 0 && conv_drops == 0 && missing == 0,
            fmt::format("30 scales: {} protection decreases, {} convergence-time decreases, {} unconverged", prot_drops,
                        conv_drops, missing)};
}

Outcome gradient_check() {
    const auto& spec = reference().inst.objective;
    std::mt19937_64 rng(99);
    std::normal_distribution<double> normal(0.0, 1.5);
    double worst = 0;
    for (int trial = 0; trial < 20; ++trial) {
        Vector x(3);
        for (auto& v : x) v = normal(rng);
        const std::size_t node = trial % 10;
        const auto fd = oracle::fd_gradient([&](const Vector& q) { return spec.local_value(node, q); }, x);
        const auto g = spec.local_gradient(node, x);
        double diff = 0, scale = 0;
        for (std::size_t k = 0; k < 3; ++k) {
            diff += (g[k] - fd[k]) * (g[k] - fd[k]);
            scale += fd[k] * fd[k];
        }
        worst = std::max(worst, std::sqrt(diff / scale));
    }
    return {worst <= 1e-5, fmt::format("worst relative error {:.3g} over 20 points", worst)};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"DICO and DCO trajectories identical", dico_matches_dco},
        {"exact protection vs Monte Carlo", monte_carlo_matches_exact},
        {"lower bound equality at b=0 and dominance", lower_bound_equality_and_dominance},
        {"b=0 and b=1 closed forms", special_cases},
        {"unbiased error at b=1", unbiased_at_b1},
        {"state-sharing error decay", state_sharing_decay},
        {"series identities", series_identities},
        {"moment recursions vs simulation", moment_recursions},
        {"trade-off trends", tradeoff_trends},
        {"logistic gradient vs finite differences", gradient_check},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const auto start = Clock::now();
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("[%s] criterion %zu: %s (%s) [%.1fs]\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first,
                    o.detail.c_str(), seconds_since(start));
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed ? 1 : 0;
}
