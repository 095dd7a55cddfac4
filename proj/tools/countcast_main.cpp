#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "countcast/config.hpp"
#include "countcast/errors.hpp"
#include "countcast/report.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* out_opt = nullptr;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "settings file (key = value lines)")
            ->check(CLI::ExistingFile);
        seed_opt = cmd->add_option("--seed", seed, "master seed for every random stream");
        out_opt = cmd->add_option("--out", out_dir, "output directory");
    }

    countcast::RunConfig resolve() const {
        countcast::RunConfig cfg;
        if (!config_path.empty()) cfg = countcast::load_run_config(config_path);
        if (seed_opt->count() > 0) cfg.train.seed = seed;
        if (out_opt->count() > 0) cfg.out_dir = out_dir;
        return cfg;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"countcast: daily count forecasting with credible bands"};
    app.require_subcommand(1);

    CommonArgs ingest_args, train_args, predict_args, scenario_args;
    std::string spec_path;

    CLI::App* ingest = app.add_subcommand("ingest", "parse a cumulative CSV into a daily panel");
    ingest_args.attach(ingest);
    CLI::App* train = app.add_subcommand("train", "fit the forecaster on an ingested panel");
    train_args.attach(train);
    CLI::App* predict =
        app.add_subcommand("predict", "write predictive grids, credible bands and plots");
    predict_args.attach(predict);
    CLI::App* scenario =
        app.add_subcommand("scenario", "compare a counterfactual history against the baseline");
    scenario_args.attach(scenario);
    scenario->add_option("--spec", spec_path, "scenario description file")
        ->required()
        ->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(countcast::ExitCode::Usage);
    }

    try {
        if (ingest->parsed()) {
            countcast::cmd_ingest(ingest_args.resolve());
        } else if (train->parsed()) {
            countcast::cmd_train(train_args.resolve());
        } else if (predict->parsed()) {
            countcast::cmd_predict(predict_args.resolve());
        } else if (scenario->parsed()) {
            countcast::cmd_scenario(scenario_args.resolve(), spec_path);
        }
    } catch (const countcast::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(countcast::ExitCode::Data);
    }
    return 0;
}
