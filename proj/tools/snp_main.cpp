// snp: depth-conditioned generation with selective control-feature routing,
// ablation sweeps, and metric reports. See README.md for the config format.

#include <CLI11.hpp>

#include <iostream>

#include "snp/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"skip-and-play conditioning controller"};
    app.require_subcommand(1);

    snp::cli::GenerateOptions gen;
    snp::cli::AblateOptions ablate;
    snp::cli::EvalOptions eval;

    auto add_run_flags = [](CLI::App* cmd, snp::cli::GenerateOptions& o) {
        cmd->add_option("--config", o.config_path, "config or manifest file");
        cmd->add_option("--depth", o.depth_path, "depth condition (PNG or SNPD)");
        cmd->add_option("--prompt", o.prompt, "positive prompt text");
        cmd->add_option("--negative-prompt", o.negative_prompt, "negative prompt text");
        cmd->add_option("--seed", o.seed, "run seed (overrides run.seed)");
        cmd->add_option("--out", o.out, "output directory (overrides run.out)");
        cmd->add_option("--set", o.sets, "override: section.key=value (repeatable)")
            ->take_all();
    };

    CLI::App* cmd_generate = app.add_subcommand("generate", "run one deterministic generation");
    add_run_flags(cmd_generate, gen);

    CLI::App* cmd_ablate =
        app.add_subcommand("ablate", "run a cartesian sweep over config parameters");
    add_run_flags(cmd_ablate, ablate.base);
    cmd_ablate
        ->add_option("--sweep", ablate.sweeps,
                     "axis: path=v1,v2,... or path=start:stop:step (repeatable)")
        ->take_all();

    CLI::App* cmd_eval = app.add_subcommand("eval", "compute metric reports over a dataset");
    cmd_eval->add_option("dataset", eval.dataset, "dataset root directory")->required();
    cmd_eval->add_option("--mode", eval.mode, "pose | clip | fid | full");
    cmd_eval->add_option("--ref", eval.ref_dir, "reference feature directory (fid)");
    cmd_eval->add_option("--prompt-feat", eval.prompt_feat, "prompt feature file (clip)");
    cmd_eval->add_option("--bin-width", eval.bin_width, "pose bin width in degrees");
    cmd_eval->add_option("--out", eval.out, "report directory (default: dataset root)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : snp::cli::kExitConfig;
    }

    if (cmd_generate->parsed()) return snp::cli::run_generate(gen, std::cout);
    if (cmd_ablate->parsed()) return snp::cli::run_ablate(ablate, std::cout);
    if (cmd_eval->parsed()) return snp::cli::run_eval(eval, std::cout);
    return snp::cli::kExitConfig;
}
