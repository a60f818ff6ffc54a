#include <iostream>
#include <set>

#include <CLI11.hpp>

#include "fplf/core.hpp"
#include "fplf/dataset.hpp"
#include "fplf/pipeline.hpp"

namespace {

using namespace fplf;
namespace fs = std::filesystem;

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    for (const auto& part : split(text, ',')) {
        const auto t = trim(part);
        if (t.empty()) continue;
        const auto dash = t.find('-');
        try {
            if (dash != std::string::npos && dash > 0) {
                const int a = std::stoi(t.substr(0, dash)), b = std::stoi(t.substr(dash + 1));
                if (b < a) throw Error(ErrorKind::config, "bad range '" + t + "'");
                for (int i = a; i <= b; ++i) out.push_back(i);
            } else {
                out.push_back(std::stoi(t));
            }
        } catch (const std::logic_error&) {
            throw Error(ErrorKind::config, "expected integers, got '" + t + "'");
        }
    }
    return out;
}

struct Flags {
    std::string config;
    std::string store;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    bool dry_run = false;
    bool force = false;
    std::string position;
    std::string fold;
    std::string horizons;
    std::string methods;
    std::string gameweeks;
    bool export_features = false;
    std::string live_season;
    std::optional<int> live_gameweek;
    std::string synth_out;
    std::uint64_t synth_seed = 7;
};

pipeline::RunConfig make_config(const Flags& f) {
    auto c = f.config.empty() ? pipeline::RunConfig{} : pipeline::load_config(f.config);
    if (!f.store.empty()) c.store = f.store;
    if (f.seed) c.seed = *f.seed;
    if (f.jobs) c.jobs = *f.jobs;
    if (!f.horizons.empty()) c.horizons = parse_int_list(f.horizons);
    if (!f.methods.empty()) {
        c.methods.clear();
        for (const auto& m : split(f.methods, ','))
            if (!trim(m).empty()) c.methods.push_back(trim(m));
    }
    c.validate();
    return c;
}

pipeline::CommandOptions make_options(const Flags& f) {
    pipeline::CommandOptions o;
    o.dry_run = f.dry_run;
    o.force = f.force;
    if (!f.position.empty()) o.position = parse_position(f.position);
    if (!f.fold.empty()) o.fold = dataset::parse_fold(f.fold);
    if (!f.gameweeks.empty()) o.gameweeks = parse_int_list(f.gameweeks);
    o.export_features = f.export_features;
    if (!f.live_season.empty() || f.live_gameweek) {
        o.live = true;
        if (!f.live_season.empty()) o.live_season = f.live_season;
        o.live_gameweek = f.live_gameweek;
    }
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fplf: gameweek points forecasting for Fantasy Premier League"};
    app.require_subcommand(1);
    Flags f;
    app.add_option("--config", f.config, "JSON config file");
    app.add_option("--store", f.store, "Snapshot store directory");
    app.add_option("--seed", f.seed, "Search and training seed");
    app.add_option("--jobs", f.jobs, "Parallel candidate evaluations")->check(CLI::PositiveNumber);
    app.add_flag("--dry-run", f.dry_run, "Print the execution plan and exit");
    app.add_flag("--force", f.force, "Rerun even when outputs are up to date");
    app.add_option("--horizons", f.horizons, "Comma-separated horizons, e.g. 1,2,3");
    app.add_option("--methods", f.methods, "Comma-separated methods, e.g. ensemble,last5");
    app.add_option("--position", f.position, "Restrict to one position (GK, DEF, MID, FWD, AM)");
    app.add_option("--fold", f.fold, "Restrict search to one fold (C1..C5)");
    app.add_option("--gameweeks", f.gameweeks, "Forecast deadlines, e.g. 32-38");
    app.fallthrough();

    auto* ingest = app.add_subcommand("ingest", "Import historical seasons or fetch a live snapshot");
    ingest->add_option("--season", f.live_season, "Live fetch: season label, e.g. 2024-25");
    ingest->add_option("--gameweek", f.live_gameweek, "Live fetch: upcoming gameweek");
    app.add_subcommand("build-dataset", "Join sources and write the development and evaluation datasets");
    auto* search = app.add_subcommand("search", "Run K-best hyperparameter search per position and fold");
    search->add_flag("--export-features", f.export_features, "Also write validation features and weights");
    app.add_subcommand("train-ensembles", "Bundle the searched models into per-position ensembles");
    app.add_subcommand("forecast", "Forecast points for the evaluation window");
    app.add_subcommand("evaluate", "Score forecasts against realized points");
    app.add_subcommand("report", "Print the evaluation report and search summary");
    app.add_subcommand("run", "Run every step from ingest to evaluate");
    auto* synth = app.add_subcommand("synth", "Write a synthetic league and a config that uses it");
    synth->add_option("--out", f.synth_out, "Workspace directory")->required();
    synth->add_option("--league-seed", f.synth_seed, "League generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        const auto* sub = app.get_subcommands().front();
        const auto name = sub->get_name();
        if (name == "synth") {
            const auto c = pipeline::write_synthetic_workspace(f.synth_out, f.synth_seed);
            std::cout << (fs::path(f.synth_out) / "config.json").string() << "\n";
            (void)c;
            return 0;
        }
        const auto config = make_config(f);
        const auto options = make_options(f);
        if (name == "ingest") pipeline::run_ingest(config, options);
        else if (name == "build-dataset") pipeline::run_build_dataset(config, options);
        else if (name == "search") pipeline::run_search(config, options);
        else if (name == "train-ensembles") pipeline::run_train_ensembles(config, options);
        else if (name == "forecast") pipeline::run_forecast(config, options);
        else if (name == "evaluate") pipeline::run_evaluate(config, options);
        else if (name == "report") pipeline::run_report(config, options);
        else if (name == "run") pipeline::run_all(config, options);
        return 0;
    } catch (const Error& e) {
        std::cerr << "fplf: " << error_kind_name(e.kind()) << " error: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "fplf: internal error: " << e.what() << "\n";
        return exit_code(ErrorKind::internal);
    }
}
