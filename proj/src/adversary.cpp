#include "innoprot/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "innoprot/parallel.hpp"
#include "innoprot/stats.hpp"

namespace innoprot {

void validate(const AdversaryConfig& cfg, std::size_t dim) {
    if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) {
        throw std::invalid_argument(fmt::format("eavesdrop probability must lie in (0, 1), got {}", cfg.gamma));
    }
    if (!cfg.z_init.empty() && cfg.z_init.size() != dim) {
        throw std::invalid_argument("z_init has wrong dimension");
    }
    if (!std::isfinite(cfg.b)) throw std::invalid_argument("adversary weight b must be finite");
}

AdversaryRun sample_run(const NodeSignal& signal, const AdversaryConfig& cfg, std::uint64_t run_index,
                        std::optional<std::size_t> horizon) {
    validate(cfg, signal.dim);
    const std::size_t h = std::min(horizon.value_or(signal.steps()), signal.steps());
    AdversaryRun run;
    run.dim = signal.dim;
    run.mu.reserve(h + 1);
    run.z.reserve((h + 1) * signal.dim);
    run.x_hat.reserve((h + 1) * signal.dim);
    run.e.reserve((h + 1) * signal.dim);
    simulate(signal, cfg, run_index, h,
             [&](std::size_t, bool mu, std::span<const double> z, std::span<const double> x_hat,
                 std::span<const double> e) {
                 run.mu.push_back(mu ? 1 : 0);
                 run.z.insert(run.z.end(), z.begin(), z.end());
                 run.x_hat.insert(run.x_hat.end(), x_hat.begin(), x_hat.end());
                 run.e.insert(run.e.end(), e.begin(), e.end());
             });
    return run;
}

AdversaryRun sample_run(const Trajectory& traj, const AdversaryConfig& cfg, std::uint64_t run_index,
                        std::optional<std::size_t> horizon) {
    if (cfg.target >= traj.nodes()) throw std::invalid_argument("adversary target out of range");
    return sample_run(traj.node_signal(cfg.target), cfg, run_index, horizon);
}

TailFactors tail_factors(double b, double success_prob) {
    // G = (1-μ) b (1 + G'), G' an independent copy.
    const double miss = 1.0 - success_prob;
    if (!(miss * b * b < 1.0)) {
        throw std::invalid_argument(fmt::format("tail unbounded: (1-p) b^2 = {} >= 1", miss * b * b));
    }
    TailFactors f;
    f.mean = miss * b / (1.0 - miss * b);
    f.second = miss * b * b * (1.0 + 2.0 * f.mean) / (1.0 - miss * b * b);
    return f;
}

TailFactors tail_factors(const AdversaryConfig& cfg) {
    const double p = cfg.forced_outcome ? (*cfg.forced_outcome ? 1.0 : 0.0) : cfg.gamma;
    return tail_factors(cfg.b, p);
}

ClosedTail close_tail(std::span<const double> e_h, std::span<const double> z_h, const TailFactors& f) {
    ClosedTail out;
    out.mean_error.resize(e_h.size());
    for (std::size_t k = 0; k < e_h.size(); ++k) out.mean_error[k] = e_h[k] + f.mean * z_h[k];
    out.mean_sq = norm2(e_h) + 2.0 * f.mean * dot(e_h, z_h) + f.second * norm2(z_h);
    return out;
}

double terminal_error(const AdversaryRun& run) {
    if (run.steps() == 0) return 0.0;
    return norm2(run.e_at(run.steps() - 1));
}

double terminal_error(const AdversaryRun& run, const AdversaryConfig& cfg) {
    if (cfg.mode != SharingMode::innovation) {
        throw std::invalid_argument("tail closure is defined for innovation sharing only");
    }
    if (run.steps() == 0) return 0.0;
    const std::size_t last = run.steps() - 1;
    return close_tail(run.e_at(last), run.z_at(last), tail_factors(cfg)).mean_sq;
}

namespace {

constexpr std::size_t runs_per_chunk = 256;

struct MomentAccumulator {
    std::vector<RunningStats> z, e;  // per component
    RunningStats z2, e2;
};

}  // namespace

std::vector<MomentSample> empirical_moments(const NodeSignal& signal, const AdversaryConfig& cfg,
                                            std::size_t runs, std::span<const std::size_t> times,
                                            std::size_t threads) {
    validate(cfg, signal.dim);
    const std::size_t m = signal.dim;
    std::vector<std::size_t> sorted(times.begin(), times.end());
    std::sort(sorted.begin(), sorted.end());
    if (!sorted.empty() && sorted.back() > signal.steps()) {
        throw std::invalid_argument("requested time beyond the end of the signal");
    }
    const std::size_t horizon = sorted.empty() ? 0 : sorted.back();

    const std::size_t chunks = (runs + runs_per_chunk - 1) / runs_per_chunk;
    std::vector<std::vector<MomentAccumulator>> partial(chunks);
    parallel_for(chunks, threads, [&](std::size_t c) {
        auto& acc = partial[c];
        acc.assign(sorted.size(), MomentAccumulator{std::vector<RunningStats>(m), std::vector<RunningStats>(m), {}, {}});
        const std::size_t begin = c * runs_per_chunk, end = std::min(runs, begin + runs_per_chunk);
        for (std::size_t r = begin; r < end; ++r) {
            std::size_t slot = 0;
            simulate(signal, cfg, r, horizon,
                     [&](std::size_t t, bool, std::span<const double> z, std::span<const double>,
                         std::span<const double> e) {
                         while (slot < sorted.size() && sorted[slot] == t) {
                             auto& a = acc[slot++];
                             for (std::size_t k = 0; k < m; ++k) {
                                 a.z[k].push(z[k]);
                                 a.e[k].push(e[k]);
                             }
                             a.z2.push(norm2(z));
                             a.e2.push(norm2(e));
                         }
                     });
        }
    });

    std::vector<MomentSample> out(sorted.size());
    for (std::size_t s = 0; s < sorted.size(); ++s) {
        MomentAccumulator total{std::vector<RunningStats>(m), std::vector<RunningStats>(m), {}, {}};
        for (const auto& chunk : partial) {
            for (std::size_t k = 0; k < m; ++k) {
                total.z[k].merge(chunk[s].z[k]);
                total.e[k].merge(chunk[s].e[k]);
            }
            total.z2.merge(chunk[s].z2);
            total.e2.merge(chunk[s].e2);
        }
        auto& o = out[s];
        o.t = sorted[s];
        for (std::size_t k = 0; k < m; ++k) {
            o.z_mean.push_back(total.z[k].mean);
            o.z_se.push_back(total.z[k].std_err());
            o.e_mean.push_back(total.e[k].mean);
            o.e_se.push_back(total.e[k].std_err());
        }
        o.z2_mean = total.z2.mean;
        o.z2_se = total.z2.std_err();
        o.e2_mean = total.e2.mean;
        o.e2_se = total.e2.std_err();
    }
    return out;
}

void write_run_csv(std::ostream& os, const AdversaryRun& run) {
    os << "t,mu";
    for (std::size_t k = 0; k < run.dim; ++k) os << ",z" << k;
    for (std::size_t k = 0; k < run.dim; ++k) os << ",e" << k;
    os << '\n';
    for (std::size_t t = 0; t < run.steps(); ++t) {
        os << t << ',' << int(run.mu[t]);
        for (double v : run.z_at(t)) os << fmt::format(",{:.17g}", v);
        for (double v : run.e_at(t)) os << fmt::format(",{:.17g}", v);
        os << '\n';
    }
}

}  // namespace innoprot
