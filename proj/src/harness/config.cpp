#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "innoprot/harness.hpp"

namespace innoprot::harness {

using nlohmann::json;

namespace {

const char* tracker_name(TrackerKind k) { return k == TrackerKind::extra ? "extra" : "diminishing_subgradient"; }

TrackerKind parse_tracker(const std::string& s) {
    if (s == "extra") return TrackerKind::extra;
    if (s == "diminishing_subgradient") return TrackerKind::diminishing_subgradient;
    throw std::invalid_argument("unknown tracker '" + s + "'");
}

void reject_unknown(const json& j, const std::string& block, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw std::invalid_argument("config block '" + block + "' must be an object");
    const std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& [key, _] : j.items()) {
        const std::string path = block.empty() ? key : block + "." + key;
        if (!known.contains(key)) throw std::invalid_argument("unknown config key '" + path + "'");
    }
}

template <class T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::vector<double> AdversaryBlock::b_grid() const {
    if (!b_values.empty()) return b_values;
    if (b_count == 0) return {};
    if (b_count == 1) return {b_min};
    std::vector<double> grid(b_count);
    for (std::size_t i = 0; i < b_count; ++i) {
        grid[i] = b_min + (b_max - b_min) * static_cast<double>(i) / static_cast<double>(b_count - 1);
    }
    return grid;
}

json to_json(const ExperimentConfig& cfg) {
    json j;
    const auto& p = cfg.problem;
    j["problem"] = {{"kind", p.kind == ObjectiveKind::logistic ? "logistic" : "quadratic"},
                    {"n", p.n},
                    {"m", p.m},
                    {"samples_per_node", p.samples_per_node},
                    {"sigma", p.sigma},
                    {"seed", p.seed},
                    {"solver_tol", p.solver_tol}};
    if (!p.quadratic.empty()) {
        json terms = json::array();
        for (const auto& q : p.quadratic) terms.push_back({{"matrix", q.matrix}, {"offset", q.offset}});
        j["problem"]["quadratic"] = terms;
    }
    j["graph"] = {{"extra_edge_prob", cfg.graph.extra_edge_prob}, {"seed", cfg.graph.seed}};
    const auto& a = cfg.algorithm;
    j["algorithm"] = {{"alpha", a.alpha},
                      {"tracker", tracker_name(a.tracker)},
                      {"beta", {{"scale", a.beta.scale}, {"offset", a.beta.offset}, {"power", a.beta.power}}},
                      {"max_iters", a.max_iters},
                      {"stop_tol", a.stop_tol},
                      {"convergence_rel", a.convergence_rel},
                      {"check_dco", a.check_dco},
                      {"x0",
                       {{"values", a.x0.values}, {"seed", a.x0.seed}, {"spread", a.x0.spread}, {"scale", a.x0.scale}}}};
    const auto& adv = cfg.adversary;
    j["adversary"] = {{"gammas", adv.gammas},
                      {"b_values", adv.b_values},
                      {"b_range", {{"min", adv.b_min}, {"max", adv.b_max}, {"count", adv.b_count}}},
                      {"z_init", adv.z_init},
                      {"target", adv.target ? json(*adv.target) : json("all")},
                      {"mc_runs", adv.mc_runs},
                      {"seed", adv.seed},
                      {"eta", adv.eta}};
    j["tradeoff"] = {{"alphas", cfg.tradeoff.alphas},
                     {"scales", cfg.tradeoff.scales},
                     {"b_values", cfg.tradeoff.b_values}};
    j["theorem1"] = {{"gammas", cfg.theorem1.gammas},
                     {"runs", cfg.theorem1.runs},
                     {"samples", cfg.theorem1.samples}};
    j["output"] = {{"directory", cfg.output.directory}, {"formats", cfg.output.formats}};
    return j;
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig cfg;
    reject_unknown(j, "", {"problem", "graph", "algorithm", "adversary", "tradeoff", "theorem1", "output"});

    if (j.contains("problem")) {
        const json& p = j.at("problem");
        reject_unknown(p, "problem", {"kind", "n", "m", "samples_per_node", "sigma", "seed", "solver_tol", "quadratic"});
        auto& out = cfg.problem;
        if (p.contains("kind")) {
            const auto kind = p.at("kind").get<std::string>();
            if (kind == "logistic") {
                out.kind = ObjectiveKind::logistic;
            } else if (kind == "quadratic") {
                out.kind = ObjectiveKind::quadratic;
            } else {
                throw std::invalid_argument("unknown problem kind '" + kind + "'");
            }
        }
        read(p, "n", out.n);
        read(p, "m", out.m);
        read(p, "samples_per_node", out.samples_per_node);
        read(p, "sigma", out.sigma);
        read(p, "seed", out.seed);
        read(p, "solver_tol", out.solver_tol);
        if (p.contains("quadratic")) {
            for (const auto& t : p.at("quadratic")) {
                out.quadratic.push_back({t.at("matrix").get<Vector>(), t.at("offset").get<Vector>()});
            }
        }
    }
    if (j.contains("graph")) {
        const json& g = j.at("graph");
        reject_unknown(g, "graph", {"extra_edge_prob", "seed"});
        read(g, "extra_edge_prob", cfg.graph.extra_edge_prob);
        read(g, "seed", cfg.graph.seed);
    }
    if (j.contains("algorithm")) {
        const json& a = j.at("algorithm");
        reject_unknown(a, "algorithm",
                       {"alpha", "tracker", "beta", "max_iters", "stop_tol", "convergence_rel", "check_dco", "x0"});
        auto& out = cfg.algorithm;
        read(a, "alpha", out.alpha);
        if (a.contains("tracker")) out.tracker = parse_tracker(a.at("tracker").get<std::string>());
        if (a.contains("beta")) {
            const json& b = a.at("beta");
            reject_unknown(b, "algorithm.beta", {"scale", "offset", "power"});
            read(b, "scale", out.beta.scale);
            read(b, "offset", out.beta.offset);
            read(b, "power", out.beta.power);
        }
        read(a, "max_iters", out.max_iters);
        read(a, "stop_tol", out.stop_tol);
        read(a, "convergence_rel", out.convergence_rel);
        read(a, "check_dco", out.check_dco);
        if (a.contains("x0")) {
            const json& x = a.at("x0");
            reject_unknown(x, "algorithm.x0", {"values", "seed", "spread", "scale"});
            read(x, "values", out.x0.values);
            read(x, "seed", out.x0.seed);
            read(x, "spread", out.x0.spread);
            read(x, "scale", out.x0.scale);
        }
    }
    if (j.contains("adversary")) {
        const json& a = j.at("adversary");
        reject_unknown(a, "adversary", {"gammas", "b_values", "b_range", "z_init", "target", "mc_runs", "seed", "eta"});
        auto& out = cfg.adversary;
        read(a, "gammas", out.gammas);
        read(a, "b_values", out.b_values);
        if (a.contains("b_range")) {
            const json& r = a.at("b_range");
            reject_unknown(r, "adversary.b_range", {"min", "max", "count"});
            read(r, "min", out.b_min);
            read(r, "max", out.b_max);
            read(r, "count", out.b_count);
        }
        read(a, "z_init", out.z_init);
        if (a.contains("target")) {
            const json& t = a.at("target");
            if (t.is_string()) {
                if (t.get<std::string>() != "all") throw std::invalid_argument("adversary.target must be a node id or \"all\"");
                out.target.reset();
            } else {
                out.target = t.get<NodeId>();
            }
        }
        read(a, "mc_runs", out.mc_runs);
        read(a, "seed", out.seed);
        read(a, "eta", out.eta);
    }
    if (j.contains("tradeoff")) {
        const json& t = j.at("tradeoff");
        reject_unknown(t, "tradeoff", {"alphas", "scales", "b_values"});
        read(t, "alphas", cfg.tradeoff.alphas);
        read(t, "scales", cfg.tradeoff.scales);
        read(t, "b_values", cfg.tradeoff.b_values);
    }
    if (j.contains("theorem1")) {
        const json& t = j.at("theorem1");
        reject_unknown(t, "theorem1", {"gammas", "runs", "samples"});
        read(t, "gammas", cfg.theorem1.gammas);
        read(t, "runs", cfg.theorem1.runs);
        read(t, "samples", cfg.theorem1.samples);
    }
    if (j.contains("output")) {
        const json& o = j.at("output");
        reject_unknown(o, "output", {"directory", "formats"});
        read(o, "directory", cfg.output.directory);
        read(o, "formats", cfg.output.formats);
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    return config_from_json(json::parse(in));
}

void apply_override(json& j, const std::string& dotted_key, const std::string& value) {
    json* node = &j;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = dotted_key.find('.', start);
        const std::string part = dotted_key.substr(start, dot - start);
        if (part.empty()) throw std::invalid_argument("malformed override key '" + dotted_key + "'");
        if (dot == std::string::npos) {
            json parsed = json::parse(value, nullptr, false);
            (*node)[part] = parsed.is_discarded() ? json(value) : parsed;
            return;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

void apply_seed(ExperimentConfig& cfg, std::uint64_t base) {
    cfg.problem.seed = base;
    cfg.graph.seed = base + 1;
    cfg.algorithm.x0.seed = base + 2;
    cfg.adversary.seed = base + 3;
}

std::string config_hash(const ExperimentConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : to_json(cfg).dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", h);
}

Instance build_instance(const ExperimentConfig& cfg) {
    const auto& p = cfg.problem;
    if (p.n == 0 || p.m == 0) throw std::invalid_argument("problem.n and problem.m must be positive");
    Instance inst;
    if (p.kind == ObjectiveKind::logistic) {
        inst.objective = synth_logistic(p.n, p.m, p.samples_per_node, p.sigma, p.seed);
    } else {
        if (p.quadratic.size() != p.n) throw std::invalid_argument("problem.quadratic needs one term per node");
        inst.objective = ObjectiveSpec::quadratic(p.m, p.quadratic);
    }
    if (p.n == 1) {
        inst.graph = DirectedGraph(1, {});
        inst.weights = WeightMatrix(1);
        inst.weights(0, 0) = 1.0;
    } else {
        inst.graph = generate_random_strongly_connected(p.n, cfg.graph.extra_edge_prob, cfg.graph.seed);
        inst.weights = metropolis_weights(inst.graph);
    }
    inst.x_star = global_minimizer(inst.objective, p.solver_tol);

    const auto& x0 = cfg.algorithm.x0;
    if (!x0.values.empty()) {
        if (x0.values.size() != p.n * p.m) throw std::invalid_argument("algorithm.x0.values must hold n * m entries");
        inst.x0_base = x0.values;
    } else {
        std::mt19937_64 rng(x0.seed);
        std::normal_distribution<double> normal(0.0, x0.spread);
        inst.x0_base.resize(p.n * p.m);
        for (auto& v : inst.x0_base) v = normal(rng);
    }
    return inst;
}

AlgorithmConfig algorithm_config(const ExperimentConfig& cfg, const Instance& inst, double alpha, double scale) {
    AlgorithmConfig a;
    a.alpha = alpha;
    a.tracker = cfg.algorithm.tracker;
    a.beta = cfg.algorithm.beta;
    a.max_iters = cfg.algorithm.max_iters;
    a.stop_tol = cfg.algorithm.stop_tol;
    a.x_star = inst.x_star;
    a.x0 = inst.x0_base;
    for (auto& v : a.x0) v *= scale;
    return a;
}

void ResultTable::add(std::vector<std::string> row) {
    if (row.size() != columns.size()) throw std::logic_error("result row width mismatch");
    rows.push_back(std::move(row));
}

void ResultTable::write_csv(std::ostream& os) const {
    for (std::size_t k = 0; k < columns.size(); ++k) os << (k ? "," : "") << columns[k];
    os << '\n';
    for (const auto& row : rows) {
        for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << row[k];
        os << '\n';
    }
}

std::size_t ResultTable::column(const std::string& name) const {
    for (std::size_t k = 0; k < columns.size(); ++k) {
        if (columns[k] == name) return k;
    }
    throw std::out_of_range("no column '" + name + "'");
}

std::string cell(double v) { return fmt::format("{:.17g}", v); }

}  // namespace innoprot::harness
