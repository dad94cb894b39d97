#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "oarl/cli/config.hpp"
#include "oarl/cli/run.hpp"
#include "oarl/common.hpp"

namespace {

std::vector<uint64_t> parse_seed_subset(const std::string& text) {
    std::vector<uint64_t> out;
    std::string cur;
    const auto flush = [&]() {
        if (cur.empty()) throw oarl::ConfigError("--seed-subset: empty entry");
        out.push_back(std::stoull(cur));
        cur.clear();
    };
    for (char c : text) {
        if (c == ',') flush();
        else if (c != ' ') cur += c;
    }
    flush();
    return out;
}

void apply_seed_subset(oarl::cli::ExperimentConfig& cfg, const std::string& subset) {
    const std::vector<uint64_t> wanted = parse_seed_subset(subset);
    for (uint64_t s : wanted) {
        if (std::find(cfg.seeds.begin(), cfg.seeds.end(), s) == cfg.seeds.end()) {
            throw oarl::ConfigError("--seed-subset: seed " + std::to_string(s) +
                                    " is not in run.seeds");
        }
    }
    cfg.seeds = wanted;
    cfg.validate();
}

}  // namespace

int main(int argc, char** argv) {
    using namespace oarl;
    using namespace oarl::cli;

    CLI::App app{"Offline RL experiment runner: corridor and maze worlds, ensemble "
                 "conservative Q-learning, and acquisition-driven replay sampling."};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    std::string checkpoint;
    std::string seed_subset;
    std::string compare_out;
    std::vector<std::string> run_dirs;
    double target = 0.0;
    int window = 2;

    CLI::App* collect = app.add_subcommand("collect", "Roll out the scripted behavior policy and "
                                                      "write the dataset file plus its manifest.");
    collect->add_option("--config", config_path, "experiment config file")->required();
    collect->add_option("--out", out_override, "override run.output_dir");

    CLI::App* train = app.add_subcommand("train", "Train every configured seed and write curves, "
                                                  "checkpoints, and the cross-seed aggregate.");
    train->add_option("--config", config_path, "experiment config file")->required();
    train->add_option("--seed-subset", seed_subset, "comma-separated subset of run.seeds to train");
    train->add_option("--out", out_override, "override run.output_dir");

    CLI::App* evaluate = app.add_subcommand("evaluate", "Evaluate a saved checkpoint on the "
                                                        "policy suite; no training.");
    evaluate->add_option("--config", config_path, "experiment config file")->required();
    evaluate->add_option("--checkpoint", checkpoint, "ensemble checkpoint to evaluate")->required();
    evaluate->add_option("--out", out_override, "override run.output_dir");

    CLI::App* compare = app.add_subcommand("compare", "Aggregate one or more training runs into "
                                                      "IQM curves, a convergence table, and an SVG plot.");
    compare->add_option("dirs", run_dirs, "training run directories")->required()->expected(-1);
    compare->add_option("--out", compare_out, "directory for comparison outputs")->required();
    compare->add_option("--target", target, "suite reward the IQM curve must sustain")->required();
    compare->add_option("--window", window, "evaluations the curve must hold the target (default 2)");

    CLI::App* histogram = app.add_subcommand("histogram", "Score every dataset transition with the "
                                                          "configured acquisition and rank the "
                                                          "rare-case tail.");
    histogram->add_option("--config", config_path, "experiment config file")->required();
    histogram->add_option("--checkpoint", checkpoint, "scoring ensemble checkpoint")->required();
    histogram->add_option("--out", out_override, "override run.output_dir");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (compare->parsed()) {
            run_compare(run_dirs, compare_out, target, window, std::cout);
            return kExitOk;
        }

        ExperimentConfig cfg = load_config(config_path);
        if (const char* env_out = std::getenv("OARL_OUT"); env_out != nullptr && *env_out != '\0') {
            cfg.output_dir = env_out;
        }
        if (!out_override.empty()) cfg.output_dir = out_override;
        if (!seed_subset.empty()) apply_seed_subset(cfg, seed_subset);

        if (collect->parsed()) {
            run_collect(cfg, std::cout);
            return kExitOk;
        }
        if (train->parsed()) {
            const TrainOutcome outcome = run_train(cfg, std::cout);
            if (outcome.any_divergence()) {
                for (const TrainSeedOutcome& s : outcome.seeds) {
                    if (s.diverged) std::cerr << "seed " << s.seed << " diverged: " << s.diagnostic << "\n";
                }
                return kExitDivergence;
            }
            return kExitOk;
        }
        if (evaluate->parsed()) {
            run_evaluate(cfg, checkpoint, std::cout);
            return kExitOk;
        }
        if (histogram->parsed()) {
            run_histogram(cfg, checkpoint, std::cout);
            return kExitOk;
        }
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ContractError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}
