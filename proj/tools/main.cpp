#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "sparsepm/cli.hpp"

namespace {

struct ListOptions {
    std::string k = "16";
    std::string p;
    std::string capacity;
};

int dispatch(const sparsepm::RunConfig& cfg, const std::string& command) {
    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!cfg.output.empty() && cfg.output != "-") {
        file.open(cfg.output);
        if (!file) {
            std::cerr << "config error: output path is not writable: " << cfg.output << "\n";
            return 1;
        }
        out = &file;
    }
    if (command == "simulate") return sparsepm::run_simulate(cfg, *out, std::cerr);
    if (command == "bounds") return sparsepm::run_bounds(cfg, *out, std::cerr);
    return sparsepm::run_verify(cfg, *out, std::cerr);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Posterior-matching simulator for the BSC with sparse feedback times"};
    app.set_config("--config");
    app.require_subcommand(1);

    sparsepm::RunConfig cfg;
    ListOptions lists;

    auto add_channel_opts = [&](CLI::App* sub) {
        sub->add_option("--K", lists.k, "message sizes, e.g. 16,32 or 1..64");
        sub->add_option("--p", lists.p, "crossover probabilities");
        sub->add_option("--capacity", lists.capacity, "capacities (resolved to p)");
        sub->add_option("--epsilon", cfg.epsilon, "FER target / stopping threshold");
        sub->add_option("--seed", cfg.master_seed, "master seed");
        sub->add_option("--output", cfg.output, "output path ('-' = stdout)");
    };

    CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo sweep, CSV per point");
    add_channel_opts(sim);
    sim->add_option("--trials", cfg.trials, "trials per point");
    sim->add_option("--dmax", cfg.d_max, "look-ahead block-size cap");
    sim->add_option("--rule", cfg.rule, "sed | sead | wmad-lookahead");
    sim->add_option("--feedback", cfg.feedback, "dense | sparse");
    sim->add_option("--threads", cfg.threads, "worker threads");

    CLI::App* bnd = app.add_subcommand("bounds", "achievability bounds, CSV per point");
    add_channel_opts(bnd);

    CLI::App* ver = app.add_subcommand("verify", "numerical verification table");
    ver->add_option("--trials", cfg.trials, "instances per check");
    ver->add_option("--seed", cfg.master_seed, "master seed");
    ver->add_option("--output", cfg.output, "output path ('-' = stdout)");

    CLI11_PARSE(app, argc, argv);

    std::string command = "verify";
    if (sim->parsed()) command = "simulate";
    if (bnd->parsed()) command = "bounds";
    if (ver->parsed()) {
        command = "verify";
        if (ver->count("--trials") == 0) cfg.trials = 100000;
    }

    try {
        if (command != "verify") {
            cfg.k_list = sparsepm::parse_int_list(lists.k);
            if (!lists.p.empty()) cfg.p_list = sparsepm::parse_double_list(lists.p);
            if (!lists.capacity.empty()) {
                cfg.c_list = sparsepm::parse_double_list(lists.capacity);
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }
    return dispatch(cfg, command);
}
