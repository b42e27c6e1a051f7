#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include <fmt/format.h>

#include "innoprot/harness.hpp"
#include "innoprot/parallel.hpp"
#include "innoprot/protection.hpp"

namespace innoprot::harness {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> seed_cells(const ExperimentConfig& cfg) {
    return {std::to_string(cfg.problem.seed), std::to_string(cfg.graph.seed), std::to_string(cfg.algorithm.x0.seed),
            std::to_string(cfg.adversary.seed)};
}

const std::vector<std::string> seed_columns{"problem_seed", "graph_seed", "x0_seed", "adversary_seed"};

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

std::string opt_cell(const std::optional<double>& v) { return v ? cell(*v) : ""; }
std::string opt_cell(const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : ""; }

// Short, filename-safe rendering of a parameter value.
std::string tag(double v) { return fmt::format("{}", v); }

class OutputSink {
public:
    OutputSink(const RunOptions& opt) : opt_(opt) {
        if (opt_.write_files) fs::create_directories(opt_.out_dir);
    }

    template <class Writer>
    void file(const std::string& name, Writer&& writer) {
        if (!opt_.write_files) return;
        std::ofstream os(opt_.out_dir / name, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + (opt_.out_dir / name).string());
        writer(os);
        written_.push_back(name);
    }

    void table(const std::string& name, const ResultTable& t) {
        file(name, [&](std::ostream& os) { t.write_csv(os); });
    }

    void finish(const std::string& command, const ExperimentConfig& cfg) {
        if (opt_.write_files) write_manifest(opt_.out_dir, command, cfg, written_);
    }

private:
    const RunOptions& opt_;
    std::vector<std::string> written_;
};

std::vector<NodeId> target_nodes(const ExperimentConfig& cfg, std::size_t n) {
    if (cfg.adversary.target) {
        if (*cfg.adversary.target >= n) throw std::invalid_argument("adversary.target out of range");
        return {*cfg.adversary.target};
    }
    std::vector<NodeId> all(n);
    for (NodeId i = 0; i < n; ++i) all[i] = i;
    return all;
}

EstimatorModel model_for(const ExperimentConfig& cfg, double gamma, double b) {
    return {gamma, b, cfg.adversary.z_init, std::nullopt};
}

AdversaryConfig adversary_for(const ExperimentConfig& cfg, double gamma, double b, NodeId target) {
    AdversaryConfig a;
    a.gamma = gamma;
    a.b = b;
    a.z_init = cfg.adversary.z_init;
    a.mode = SharingMode::innovation;
    a.target = target;
    a.seed = cfg.adversary.seed;
    return a;
}

struct ProtectionSweep {
    ResultTable rows;
    // Per γ: (b, exact min, lower bound, optimized bound, mc mean, mc se) at the minimizing node.
    std::map<double, ResultTable> panels;
};

ProtectionSweep sweep_protection(const ExperimentConfig& cfg, const Instance& inst, const Trajectory& traj,
                                 const std::vector<double>& gammas, const std::vector<double>& bs,
                                 std::size_t threads) {
    ProtectionSweep out;
    out.rows.columns = concat({"node", "gamma", "b", "alpha", "x0_scale", "status", "exact", "lower_bound", "eta",
                               "lower_bound_opt", "eta_opt", "b0", "b1", "mc_mean", "mc_stderr", "network_min",
                               "Q", "R", "S", "entropy_floor"},
                              seed_columns);
    const auto nodes = target_nodes(cfg, traj.nodes());
    std::vector<NodeSignal> signals;
    for (NodeId i : nodes) signals.push_back(traj.node_signal(i));

    const std::string alpha = cell(cfg.algorithm.alpha), scale = cell(cfg.algorithm.x0.scale);
    for (double gamma : gammas) {
        ResultTable panel;
        panel.columns = {"b", "exact", "lower_bound", "lower_bound_opt", "mc_mean", "mc_stderr", "node"};
        for (double b : bs) {
            if (!stable(gamma, b)) {
                for (NodeId i : nodes) {
                    std::vector<std::string> row{std::to_string(i), cell(gamma), cell(b), alpha, scale, "unstable"};
                    row.resize(out.rows.columns.size() - seed_columns.size());
                    out.rows.add(concat(row, seed_cells(cfg)));
                }
                continue;
            }
            const EstimatorModel model = model_for(cfg, gamma, b);
            std::vector<ProtectionReport> reports(nodes.size());
            parallel_for(nodes.size(), threads, [&](std::size_t k) {
                reports[k] = protection_report(signals[k], inst.x_star, model, cfg.adversary.eta);
            });
            std::map<NodeId, double> exact;
            for (std::size_t k = 0; k < nodes.size(); ++k) exact[nodes[k]] = reports[k].exact;
            const NetworkProtection worst = network_protection(exact);
            const std::size_t worst_k =
                static_cast<std::size_t>(std::find(nodes.begin(), nodes.end(), worst.node) - nodes.begin());

            std::optional<MonteCarloEstimate> mc;
            if (cfg.adversary.mc_runs > 0) {
                mc = monte_carlo_protection(signals[worst_k], adversary_for(cfg, gamma, b, worst.node),
                                            cfg.adversary.mc_runs, std::nullopt, threads);
            }
            for (std::size_t k = 0; k < nodes.size(); ++k) {
                const auto& r = reports[k];
                const bool is_min = k == worst_k;
                out.rows.add(concat({std::to_string(nodes[k]), cell(gamma), cell(b), alpha, scale, "ok", cell(r.exact),
                                     cell(r.lower_bound.value), cell(r.lower_bound.eta),
                                     cell(r.lower_bound_optimized.value), cell(r.lower_bound_optimized.eta),
                                     opt_cell(r.b0_value), opt_cell(r.b1_value),
                                     is_min && mc ? cell(mc->mean) : "", is_min && mc ? cell(mc->std_err) : "",
                                     is_min ? "1" : "0", cell(r.q), cell(r.r), cell(r.s), cell(r.entropy_floor)},
                                    seed_cells(cfg)));
            }
            const auto& r = reports[worst_k];
            panel.add({cell(b), cell(r.exact), cell(r.lower_bound.value), cell(r.lower_bound_optimized.value),
                       mc ? cell(mc->mean) : "", mc ? cell(mc->std_err) : "", std::to_string(worst.node)});
        }
        out.panels.emplace(gamma, std::move(panel));
    }
    return out;
}

}  // namespace

ResultTable cmd_simulate(const ExperimentConfig& cfg, const RunOptions& opt) {
    OutputSink sink(opt);
    const Instance inst = build_instance(cfg);
    const AlgorithmConfig acfg = algorithm_config(cfg, inst, cfg.algorithm.alpha, cfg.algorithm.x0.scale);
    const Trajectory traj = run_dico(inst.graph, inst.weights, inst.objective, acfg);

    std::optional<double> dco_gap;
    if (cfg.algorithm.check_dco) {
        const Trajectory dco = run_dco(inst.graph, inst.weights, inst.objective, acfg);
        double gap = dco.rounds() == traj.rounds() ? 0.0 : INFINITY;
        for (std::size_t t = 0; t <= std::min(dco.rounds(), traj.rounds()); ++t) {
            for (NodeId i = 0; i < traj.nodes(); ++i) gap = std::max(gap, std::sqrt(dist2(dco.state(t, i), traj.state(t, i))));
        }
        dco_gap = gap;
    }
    const auto conv = convergence_time(traj, inst.x_star, cfg.algorithm.convergence_rel);

    ResultTable summary;
    summary.columns = concat({"alpha", "x0_scale", "rounds", "stopped_at", "convergence_time", "dco_dico_max_gap",
                              "x_star_norm", "final_max_dist"},
                             seed_columns);
    double final_dist = 0.0;
    for (NodeId i = 0; i < traj.nodes(); ++i) {
        final_dist = std::max(final_dist, std::sqrt(dist2(traj.state(traj.rounds(), i), inst.x_star)));
    }
    summary.add(concat({cell(acfg.alpha), cell(cfg.algorithm.x0.scale), std::to_string(traj.rounds()),
                        opt_cell(traj.converged_at), opt_cell(conv), opt_cell(dco_gap), cell(norm(inst.x_star)),
                        cell(final_dist)},
                       seed_cells(cfg)));

    sink.file("trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(os, traj); });
    sink.file("graph_edges.csv", [&](std::ostream& os) { write_edge_list(os, inst.graph); });
    sink.file("weights.csv", [&](std::ostream& os) { write_weights(os, inst.weights); });
    sink.file("objective.txt", [&](std::ostream& os) { save_objective(os, inst.objective); });
    sink.file("x_star.csv", [&](std::ostream& os) {
        os << "component,value\n";
        for (std::size_t k = 0; k < inst.x_star.size(); ++k) os << k << ',' << cell(inst.x_star[k]) << '\n';
    });
    sink.table("summary.csv", summary);
    sink.finish("simulate", cfg);
    return summary;
}

ResultTable cmd_sweep_b(const ExperimentConfig& cfg, const RunOptions& opt) {
    OutputSink sink(opt);
    const Instance inst = build_instance(cfg);
    const auto acfg = algorithm_config(cfg, inst, cfg.algorithm.alpha, cfg.algorithm.x0.scale);
    const Trajectory traj = run_dico(inst.graph, inst.weights, inst.objective, acfg);
    const auto bs = cfg.adversary.b_grid();
    if (bs.empty()) throw std::invalid_argument("sweep-b needs at least one b value");

    ProtectionSweep sweep = sweep_protection(cfg, inst, traj, cfg.adversary.gammas, bs, opt.threads);
    sink.table("sweep_b.csv", sweep.rows);
    for (const auto& [gamma, panel] : sweep.panels) sink.table("plot_sweep_b_gamma" + tag(gamma) + ".csv", panel);
    sink.finish("sweep-b", cfg);
    return sweep.rows;
}

ResultTable cmd_protect(const ExperimentConfig& cfg, const RunOptions& opt) {
    OutputSink sink(opt);
    const Instance inst = build_instance(cfg);
    const auto acfg = algorithm_config(cfg, inst, cfg.algorithm.alpha, cfg.algorithm.x0.scale);
    const Trajectory traj = run_dico(inst.graph, inst.weights, inst.objective, acfg);
    const auto bs = cfg.adversary.b_grid();
    if (bs.empty() || cfg.adversary.gammas.empty()) throw std::invalid_argument("protect needs a gamma and a b value");

    ProtectionSweep sweep = sweep_protection(cfg, inst, traj, cfg.adversary.gammas, bs, opt.threads);
    sink.table("protect.csv", sweep.rows);
    sink.finish("protect", cfg);
    return sweep.rows;
}

ResultTable cmd_tradeoff(const ExperimentConfig& cfg, const RunOptions& opt) {
    if (cfg.tradeoff.alphas.empty()) throw std::invalid_argument("tradeoff needs a nonempty alpha list");
    std::vector<double> scales = cfg.tradeoff.scales;
    if (scales.empty()) {
        for (int k = 0; k < 30; ++k) scales.push_back(1.0 + 0.5 * k);
    }
    for (double s : scales) {
        if (!(s > 0.0)) throw std::invalid_argument("x0 scales must be positive");
    }
    if (cfg.adversary.gammas.empty()) throw std::invalid_argument("tradeoff needs adversary.gammas");
    const double gamma = cfg.adversary.gammas.front();
    for (double b : cfg.tradeoff.b_values) {
        if (!stable(gamma, b)) throw std::invalid_argument(fmt::format("tradeoff b={} violates (1-gamma) b^2 < 1", b));
    }

    OutputSink sink(opt);
    const Instance inst = build_instance(cfg);

    struct Cell {
        double alpha, scale;
        std::string status;
        std::size_t rounds = 0;
        std::optional<std::size_t> conv;
        std::vector<NetworkProtection> protection;
    };
    std::vector<Cell> cells;
    for (double a : cfg.tradeoff.alphas) {
        for (double s : scales) cells.push_back({a, s, "", 0, std::nullopt, {}});
    }
    parallel_for(cells.size(), opt.threads, [&](std::size_t k) {
        Cell& c = cells[k];
        try {
            const Trajectory traj = run_dico(inst.graph, inst.weights, inst.objective,
                                             algorithm_config(cfg, inst, c.alpha, c.scale));
            c.rounds = traj.rounds();
            c.conv = convergence_time(traj, inst.x_star, cfg.algorithm.convergence_rel);
            c.status = traj.converged_at ? "ok" : "not_converged";
            for (double b : cfg.tradeoff.b_values) {
                std::map<NodeId, double> per_node;
                for (NodeId i : target_nodes(cfg, traj.nodes())) {
                    per_node[i] = exact_protection(traj.node_signal(i), inst.x_star, model_for(cfg, gamma, b));
                }
                c.protection.push_back(network_protection(per_node));
            }
        } catch (const DivergenceError&) {
            c.status = "diverged";
        }
    });

    ResultTable table;
    table.columns = {"alpha", "x0_scale", "status", "rounds", "convergence_time", "gamma"};
    for (double b : cfg.tradeoff.b_values) {
        table.columns.push_back("protection_b" + tag(b));
        table.columns.push_back("node_b" + tag(b));
    }
    table.columns = concat(table.columns, seed_columns);
    for (const auto& c : cells) {
        std::vector<std::string> row{cell(c.alpha), cell(c.scale), c.status, std::to_string(c.rounds),
                                     opt_cell(c.conv), cell(gamma)};
        for (std::size_t k = 0; k < cfg.tradeoff.b_values.size(); ++k) {
            row.push_back(k < c.protection.size() ? cell(c.protection[k].value) : "");
            row.push_back(k < c.protection.size() ? std::to_string(c.protection[k].node) : "");
        }
        table.add(concat(row, seed_cells(cfg)));
    }

    ResultTable plot;
    plot.columns = {"convergence_time", "x0_scale", "alpha"};
    for (double b : cfg.tradeoff.b_values) plot.columns.push_back("protection_b" + tag(b));
    for (const auto& c : cells) {
        if (c.status == "diverged") continue;
        std::vector<std::string> row{opt_cell(c.conv), cell(c.scale), cell(c.alpha)};
        for (const auto& p : c.protection) row.push_back(cell(p.value));
        plot.add(row);
    }
    sink.table("tradeoff.csv", table);
    sink.table("plot_tradeoff.csv", plot);
    sink.finish("tradeoff", cfg);
    return table;
}

ResultTable cmd_theorem1(const ExperimentConfig& cfg, const RunOptions& opt) {
    OutputSink sink(opt);
    const Instance inst = build_instance(cfg);
    AlgorithmConfig acfg = algorithm_config(cfg, inst, cfg.algorithm.alpha, cfg.algorithm.x0.scale);
    Trajectory traj = run_dico(inst.graph, inst.weights, inst.objective, acfg);
    const auto conv = convergence_time(traj, inst.x_star, cfg.algorithm.convergence_rel);
    if (!conv) throw std::runtime_error("theorem1: trajectory never reached the convergence radius");
    const std::size_t horizon = std::max<std::size_t>(2 * *conv, 1);
    if (traj.rounds() < horizon) {
        acfg.stop_tol = 0.0;
        acfg.max_iters = horizon;
        traj = run_dico(inst.graph, inst.weights, inst.objective, acfg);
    }

    const std::size_t samples = std::max<std::size_t>(cfg.theorem1.samples, 2);
    std::vector<std::size_t> times;
    for (std::size_t k = 0; k < samples; ++k) times.push_back(horizon * k / (samples - 1));
    times.erase(std::unique(times.begin(), times.end()), times.end());

    ResultTable decay;
    decay.columns = {"gamma", "node", "t", "mean_sq_error", "std_err"};
    ResultTable summary;
    summary.columns = concat({"gamma", "node", "convergence_time", "horizon", "initial", "final", "ratio"}, seed_columns);

    for (double gamma : cfg.theorem1.gammas) {
        for (NodeId i : target_nodes(cfg, traj.nodes())) {
            AdversaryConfig a;
            a.gamma = gamma;
            a.b = 1.0;
            a.mode = SharingMode::state;
            a.target = i;
            a.seed = cfg.adversary.seed;
            const auto moments = empirical_moments(traj.node_signal(i), a, cfg.theorem1.runs, times, opt.threads);
            for (const auto& mo : moments) {
                decay.add({cell(gamma), std::to_string(i), std::to_string(mo.t), cell(mo.e2_mean), cell(mo.e2_se)});
            }
            const double first = moments.front().e2_mean, last = moments.back().e2_mean;
            summary.add(concat({cell(gamma), std::to_string(i), std::to_string(*conv), std::to_string(horizon),
                                cell(first), cell(last), cell(first > 0.0 ? last / first : 0.0)},
                               seed_cells(cfg)));
        }
    }
    sink.table("theorem1_decay.csv", decay);
    sink.table("theorem1_summary.csv", summary);
    sink.finish("theorem1", cfg);
    return summary;
}

void write_manifest(const fs::path& dir, const std::string& command, const ExperimentConfig& cfg,
                    const std::vector<std::string>& files) {
    nlohmann::json m;
    m["toolkit"] = "innoprot";
    m["version"] = INNOPROT_VERSION;
    m["command"] = command;
    m["config_hash"] = config_hash(cfg);
    m["config"] = to_json(cfg);
    m["files"] = files;
    std::ofstream os(dir / "manifest.json", std::ios::binary);
    os << m.dump(2) << '\n';
}

}  // namespace innoprot::harness
