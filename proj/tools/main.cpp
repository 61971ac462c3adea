#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "arise_forge/pipeline.hpp"

namespace {

int log_level_from_env() {
    const char* v = std::getenv("ARISE_FORGE_LOG");
    if (!v) return 1;
    std::string s = v;
    if (s == "0" || s == "quiet") return 0;
    if (s == "2" || s == "debug") return 2;
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"derives custom RV32 instruction-set extensions from disassembly and traces"};
    app.require_subcommand(1);

    arise_forge::RunConfig cfg;
    cfg.log_level = log_level_from_env();
    std::string target = "static-size";
    std::string liveness = "strict";

    CLI::App* gen = app.add_subcommand("generate",
                                       "generate, select and emit custom instructions");
    gen->add_option("--asm", cfg.asm_path, "objdump-style disassembly file")->required();
    gen->add_option("--trace", cfg.trace_path, "execution trace file");
    gen->add_option("--target", target, "static-size | dynamic-size | dynamic-count");
    gen->add_option("--opcode-bits", cfg.opcode_bits, "opcode length in bits (>= 7)");
    gen->add_option("--liveness", liveness, "strict | paper");
    gen->add_option("--out-coredsl", cfg.out_coredsl, "instruction-set description output path");
    gen->add_option("--out-report", cfg.out_report, "report output path");
    gen->add_option("--seed", cfg.seed, "seed for the equivalence trials");
    gen->add_flag("--m-ext", cfg.m_ext, "treat M-extension multiply/divide ops as fusable");
    gen->add_option("--set-name", cfg.set_name, "InstructionSet name in the emitted description");

    CLI::App* eval = app.add_subcommand("evaluate",
                                        "rewrite with a prior selection and recount all metrics");
    eval->add_option("--asm", cfg.asm_path, "objdump-style disassembly file")->required();
    eval->add_option("--trace", cfg.trace_path, "execution trace file");
    eval->add_option("--selection", cfg.selection_path, "report file of a prior generate run")
        ->required();
    eval->add_option("--liveness", liveness, "strict | paper");
    eval->add_option("--out-report", cfg.out_report, "report output path");

    CLI11_PARSE(app, argc, argv);

    auto metric = arise_forge::parse_metric(target);
    if (!metric) {
        std::cerr << "config error: unknown --target " << target << "\n";
        return static_cast<int>(arise_forge::RunStatus::config_error);
    }
    cfg.target = *metric;
    if (liveness == "strict") {
        cfg.liveness = arise_forge::LivenessMode::strict;
    } else if (liveness == "paper") {
        cfg.liveness = arise_forge::LivenessMode::paper;
    } else {
        std::cerr << "config error: unknown --liveness " << liveness << "\n";
        return static_cast<int>(arise_forge::RunStatus::config_error);
    }

    arise_forge::RunStatus status = gen->parsed()
                                        ? arise_forge::run_generate(cfg, std::cout, std::cerr)
                                        : arise_forge::run_evaluate(cfg, std::cout, std::cerr);
    return static_cast<int>(status);
}
