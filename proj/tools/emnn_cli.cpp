// Experiment runner: train, eval, sweep, power-dump.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "emnn/data.hpp"
#include "emnn/experiment.hpp"

namespace ex = emnn::experiment;

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<int> epochs;
    std::optional<int> subset;
    std::string combining;
    std::string angles;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "key=value config file (empty: reference defaults)");
    cmd->add_option("--seed", f.seed, "master seed");
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--epochs", f.epochs, "epoch budget");
    cmd->add_option("--subset", f.subset, "use the first N training samples");
    cmd->add_option("--combining", f.combining, "pre | post")->check(CLI::IsMember({"pre", "post"}));
    cmd->add_option("--angles", f.angles, "comma-separated rotation angles in degrees, one per SIM");
    cmd->add_option("--threads", f.threads, "worker threads for batch/eval loops");
}

ex::ExperimentConfig build_config(const CommonFlags& f) {
    ex::ExperimentConfig cfg = f.config.empty() ? ex::ExperimentConfig{} : ex::parse_config(f.config);
    if (f.seed) cfg.seed = *f.seed;
    if (!f.out.empty()) cfg.out_dir = f.out;
    if (f.epochs) cfg.epochs = *f.epochs;
    if (f.subset) cfg.train_subset = *f.subset;
    if (!f.combining.empty()) ex::set_key(cfg, "combining", f.combining);
    if (!f.angles.empty()) ex::set_key(cfg, "angles_deg", f.angles);
    if (f.threads > 0) cfg.threads = f.threads;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributed electromagnetic neural network simulator and trainer"};
    app.require_subcommand(1);

    CommonFlags train_f, eval_f, sweep_f, dump_f;
    std::string eval_ckpt, dump_ckpt, axis, values;
    int sample = 0;
    bool parallel = false;

    auto* train = app.add_subcommand("train", "train a model and write metrics, checkpoint and manifest");
    add_common(train, train_f);

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    add_common(eval, eval_f);
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();

    auto* sweep = app.add_subcommand("sweep", "train+eval once per value of one axis");
    add_common(sweep, sweep_f);
    sweep->add_option("--axis", axis, "L | N | K | T_fixed")->required()->check(CLI::IsMember({"L", "N", "K", "T_fixed"}));
    sweep->add_option("--values", values, "comma-separated values (T_fixed: multiples of the initial T)")->required();
    sweep->add_flag("--parallel", parallel, "run sweep points concurrently");

    auto* dump = app.add_subcommand("power-dump", "per-antenna, per-SIM scaled power for one test sample");
    add_common(dump, dump_f);
    dump->add_option("--checkpoint", dump_ckpt, "checkpoint file")->required();
    dump->add_option("--sample", sample, "test sample index")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return ex::cmd_train(build_config(train_f), std::cout);
        if (eval->parsed()) return ex::cmd_eval(build_config(eval_f), eval_ckpt, std::cout);
        if (sweep->parsed()) {
            auto cfg = build_config(sweep_f);
            cfg.parallel_sweep = cfg.parallel_sweep || parallel;
            const auto vals = emnn::data::parse_angles(values);
            return ex::cmd_sweep(cfg, axis, vals, std::cout);
        }
        if (dump->parsed()) return ex::cmd_power_dump(build_config(dump_f), dump_ckpt, sample, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
