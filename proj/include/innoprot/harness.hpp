#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "innoprot/adversary.hpp"
#include "innoprot/consensus.hpp"
#include "innoprot/graph.hpp"
#include "innoprot/objective.hpp"

namespace innoprot::harness {

struct ProblemBlock {
    ObjectiveKind kind = ObjectiveKind::logistic;
    std::size_t n = 10;
    std::size_t m = 3;
    std::size_t samples_per_node = 10;
    double sigma = 1.0;
    std::uint64_t seed = 3;
    std::vector<QuadraticTerm> quadratic;  // used when kind == quadratic
    double solver_tol = 1e-10;

    friend bool operator==(const ProblemBlock&, const ProblemBlock&) = default;
};

struct GraphBlock {
    double extra_edge_prob = 0.3;
    std::uint64_t seed = 7;

    friend bool operator==(const GraphBlock&, const GraphBlock&) = default;
};

/// x0 = scale * base, base either explicit (n*m values) or N(0, spread²) from a seed.
struct InitialStateBlock {
    std::vector<double> values;
    std::uint64_t seed = 11;
    double spread = 10.0;
    double scale = 1.0;

    friend bool operator==(const InitialStateBlock&, const InitialStateBlock&) = default;
};

struct AlgorithmBlock {
    double alpha = 0.01;
    TrackerKind tracker = TrackerKind::extra;
    StepSchedule beta;
    std::size_t max_iters = 20000;
    /// Early-stop radius for the optimizer run (relative to ‖x*‖).
    double stop_tol = 1e-10;
    /// Radius for the reported convergence time.
    double convergence_rel = 0.01;
    InitialStateBlock x0;
    bool check_dco = true;

    friend bool operator==(const AlgorithmBlock& a, const AlgorithmBlock& b) {
        return a.alpha == b.alpha && a.tracker == b.tracker && a.beta.scale == b.beta.scale &&
               a.beta.offset == b.beta.offset && a.beta.power == b.beta.power && a.max_iters == b.max_iters &&
               a.stop_tol == b.stop_tol && a.convergence_rel == b.convergence_rel && a.x0 == b.x0 &&
               a.check_dco == b.check_dco;
    }
};

struct AdversaryBlock {
    std::vector<double> gammas{0.5};
    std::vector<double> b_values;  // explicit list; wins over the range when nonempty
    double b_min = -1.0;
    double b_max = 1.0;
    std::size_t b_count = 41;
    std::vector<double> z_init;    // empty means zero
    std::optional<NodeId> target;  // nullopt means all nodes
    std::size_t mc_runs = 10000;
    std::uint64_t seed = 42;
    double eta = 1.0;

    std::vector<double> b_grid() const;
    friend bool operator==(const AdversaryBlock&, const AdversaryBlock&) = default;
};

struct TradeoffBlock {
    std::vector<double> alphas{0.01, 0.05, 0.1, 0.15, 0.2};
    std::vector<double> scales;  // default: 1, 1.5, ..., 15.5
    std::vector<double> b_values{0.0, -0.15};

    friend bool operator==(const TradeoffBlock&, const TradeoffBlock&) = default;
};

struct Theorem1Block {
    std::vector<double> gammas{0.1, 0.5, 0.9};
    std::size_t runs = 1000;
    std::size_t samples = 41;  // time points between 0 and 2 * convergence time

    friend bool operator==(const Theorem1Block&, const Theorem1Block&) = default;
};

struct OutputBlock {
    std::string directory = "results";
    std::vector<std::string> formats{"csv"};

    friend bool operator==(const OutputBlock&, const OutputBlock&) = default;
};

struct ExperimentConfig {
    ProblemBlock problem;
    GraphBlock graph;
    AlgorithmBlock algorithm;
    AdversaryBlock adversary;
    TradeoffBlock tradeoff;
    Theorem1Block theorem1;
    OutputBlock output;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Missing keys take defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Sets a dotted key path ("adversary.gammas", "problem.sigma") from text;
/// the text is parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::json& j, const std::string& dotted_key, const std::string& value);

/// Sets every seed from one base: problem K, graph K+1, x0 K+2, adversary K+3.
void apply_seed(ExperimentConfig& cfg, std::uint64_t base);

/// 64-bit FNV-1a of the canonical JSON dump, as hex.
std::string config_hash(const ExperimentConfig& cfg);

/// Everything an experiment derives from its config.
struct Instance {
    DirectedGraph graph;
    WeightMatrix weights;
    ObjectiveSpec objective;
    Vector x_star;
    Vector x0_base;  // unscaled
};

Instance build_instance(const ExperimentConfig& cfg);
AlgorithmConfig algorithm_config(const ExperimentConfig& cfg, const Instance& inst, double alpha, double scale);

/// Ordered table of text cells; rows are kept in insertion order.
struct ResultTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row);
    void write_csv(std::ostream& os) const;
    std::size_t column(const std::string& name) const;
};

std::string cell(double v);

struct RunOptions {
    std::filesystem::path out_dir;
    std::size_t threads = 0;
    bool write_files = true;
};

/// simulate: DICO run (plus DCO equality check), trajectory and summary files.
ResultTable cmd_simulate(const ExperimentConfig& cfg, const RunOptions& opt);
/// sweep-b: protection vs b for every γ; Monte Carlo at the network-minimizing node.
ResultTable cmd_sweep_b(const ExperimentConfig& cfg, const RunOptions& opt);
/// tradeoff: (α, x0 scale) grid of convergence time and protection.
ResultTable cmd_tradeoff(const ExperimentConfig& cfg, const RunOptions& opt);
/// theorem1: state-sharing eavesdropper error decay for each γ.
ResultTable cmd_theorem1(const ExperimentConfig& cfg, const RunOptions& opt);
/// protect: single-point analytics for the first γ and each b value.
ResultTable cmd_protect(const ExperimentConfig& cfg, const RunOptions& opt);

/// Writes manifest.json describing a finished command.
void write_manifest(const std::filesystem::path& dir, const std::string& command, const ExperimentConfig& cfg,
                    const std::vector<std::string>& files);

}  // namespace innoprot::harness
