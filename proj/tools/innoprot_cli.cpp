#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "innoprot/consensus.hpp"
#include "innoprot/harness.hpp"

namespace h = innoprot::harness;

namespace {

// Collects "--a.b=value" / "--a.b value" pairs left over by CLI11.
std::vector<std::pair<std::string, std::string>> dotted_overrides(const std::vector<std::string>& extras) {
    std::vector<std::pair<std::string, std::string>> out;
    for (std::size_t k = 0; k < extras.size(); ++k) {
        const std::string& arg = extras[k];
        if (arg.rfind("--", 0) != 0 || arg.find('.') == std::string::npos) {
            throw std::invalid_argument("unrecognized argument '" + arg + "'");
        }
        const std::string body = arg.substr(2);
        const auto eq = body.find('=');
        if (eq != std::string::npos) {
            out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
        } else if (k + 1 < extras.size()) {
            out.emplace_back(body, extras[++k]);
        } else {
            throw std::invalid_argument("override '" + arg + "' needs a value");
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Innovation-sharing protection toolkit: consensus optimization under probabilistic eavesdropping"};
    app.require_subcommand(1);
    app.set_version_flag("--version", INNOPROT_VERSION);

    std::string config_path;
    std::string out_dir;
    std::size_t threads = 0;
    long long seed = -1;

    struct Command {
        const char* name;
        const char* help;
        h::ResultTable (*run)(const h::ExperimentConfig&, const h::RunOptions&);
    };
    const std::vector<Command> commands{
        {"simulate", "Run DICO (and DCO for the equality check); write the trajectory", h::cmd_simulate},
        {"sweep-b", "Exact protection, lower bounds and Monte Carlo over a grid of b", h::cmd_sweep_b},
        {"tradeoff", "Convergence time vs protection over step sizes and x0 scales", h::cmd_tradeoff},
        {"theorem1", "Error decay of a state-sharing eavesdropper", h::cmd_theorem1},
        {"protect", "Single-point protection analytics", h::cmd_protect},
    };
    std::vector<CLI::App*> subs;
    for (const auto& c : commands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("--config", config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "Output directory (default: output.directory)");
        sub->add_option("--threads", threads, "Worker threads (0 = all cores)");
        sub->add_option("--seed", seed, "Base seed for problem, graph, x0 and adversary");
        sub->allow_extras();
        sub->footer("Any config key can be overridden as --block.key=value, e.g. --problem.sigma=0.01");
        subs.push_back(sub);
    }
    CLI11_PARSE(app, argc, argv);

    try {
        for (std::size_t k = 0; k < commands.size(); ++k) {
            if (!subs[k]->parsed()) continue;
            nlohmann::json j = config_path.empty() ? h::to_json(h::ExperimentConfig{})
                                                   : nlohmann::json::parse(std::ifstream(config_path));
            for (const auto& [key, value] : dotted_overrides(subs[k]->remaining())) h::apply_override(j, key, value);
            h::ExperimentConfig cfg = h::config_from_json(j);
            if (seed >= 0) h::apply_seed(cfg, static_cast<std::uint64_t>(seed));

            h::RunOptions opt;
            opt.out_dir = out_dir.empty() ? cfg.output.directory : out_dir;
            opt.threads = threads;
            const h::ResultTable table = commands[k].run(cfg, opt);
            table.write_csv(std::cout);
            std::cerr << commands[k].name << ": wrote results to " << opt.out_dir.string() << '\n';
        }
    } catch (const innoprot::DivergenceError& e) {
        std::cerr << "error: " << e.what() << "; try a smaller --algorithm.alpha\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
