#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fplf/ingest.hpp"
#include "fplf/search.hpp"
#include "fplf/weighting.hpp"

namespace fplf::pipeline {

namespace fs = std::filesystem;

struct RunConfig {
    fs::path store = "store";
    fs::path artifacts = "artifacts";
    std::vector<std::string> dev_seasons{"2020-21", "2021-22", "2022-23", "2023-24"};
    std::string eval_season = "2024-25";
    int eval_first_gameweek = 32;
    int eval_last_gameweek = 38;
    int expected_teams = 20;
    std::optional<fs::path> fold_table;  // empty = built-in development table
    std::optional<fs::path> aliases;
    std::map<std::string, fs::path> historical;  // season -> historical CSV directory
    std::vector<std::string> impute_seasons{"2020-21"};
    std::vector<Position> positions{kAllPositions.begin(), kAllPositions.end()};
    int k = 10;
    int budget = 200;
    search::StopRule stop_rule = search::StopRule::qualifying_count;
    std::uint64_t seed = 42;
    weighting::WeightingConfig weighting;
    std::vector<int> horizons{1, 2, 3};
    int jobs = 1;
    std::vector<std::string> methods{"ensemble", "last5"};
    bool last5_played_only = false;
    std::map<std::string, fs::path> external_forecasts;  // method -> CSV
    std::optional<fs::path> external_aliases;
    ingest::Endpoints endpoints;

    void validate() const;
    // Seasons the pipeline loads: development seasons, then the evaluation season.
    std::vector<std::string> seasons() const;
};

nlohmann::json to_json(const RunConfig& c);
// Relative paths in the file resolve against `base`.
RunConfig config_from_json(const nlohmann::json& j, const fs::path& base = {});
RunConfig load_config(const fs::path& path);
// Hash over the settings that affect outputs. Excludes jobs and file
// locations; input contents are checksummed separately.
std::string config_hash(const RunConfig& c);

struct CommandOptions {
    bool dry_run = false;
    bool force = false;
    std::optional<Position> position;
    std::optional<int> fold;
    std::optional<std::vector<int>> gameweeks;  // forecast deadlines
    bool export_features = false;
    // Live ingest of one gameweek.
    bool live = false;
    std::optional<std::string> live_season;
    std::optional<int> live_gameweek;
    std::ostream* out = nullptr;  // plan and report text; defaults to stdout
};

/// Where each command reads and writes under the artifacts root.
struct Layout {
    fs::path root;

    fs::path ingest_provenance() const { return root / "ingest" / "provenance.json"; }
    fs::path records() const { return root / "dataset" / "records.csv"; }
    fs::path fixtures() const { return root / "dataset" / "fixtures.csv"; }
    fs::path folds() const { return root / "dataset" / "folds.csv"; }
    fs::path dataset_provenance() const { return root / "dataset" / "provenance.json"; }
    fs::path search_dir(Position p, int fold) const;
    fs::path ensemble_dir(Position p) const;
    fs::path forecasts_dir() const { return root / "forecasts"; }
    fs::path forecast(const std::string& method) const { return forecasts_dir() / (method + ".csv"); }
    fs::path reports_dir() const { return root / "reports"; }
};

// Each returns true when work was done, false when the outputs were already
// up to date (or on a dry run).
bool run_ingest(const RunConfig& config, const CommandOptions& options, ingest::HttpClient* client = nullptr);
bool run_build_dataset(const RunConfig& config, const CommandOptions& options);
bool run_search(const RunConfig& config, const CommandOptions& options);
bool run_train_ensembles(const RunConfig& config, const CommandOptions& options);
bool run_forecast(const RunConfig& config, const CommandOptions& options);
bool run_evaluate(const RunConfig& config, const CommandOptions& options);
bool run_report(const RunConfig& config, const CommandOptions& options);
// Every step in order.
void run_all(const RunConfig& config, const CommandOptions& options);

// Fixture file helpers shared with the CLI.
void write_fixtures(const fs::path& path, std::span<const ingest::Fixture> fixtures);
std::vector<ingest::Fixture> read_fixtures(const fs::path& path);

std::string file_checksum(const fs::path& path);

// Generates the synthetic league under <dir>/league and writes <dir>/config.json
// pointing at it (8 teams, one development season, gameweeks 8-14 held out).
// Returns the loaded config.
RunConfig write_synthetic_workspace(const fs::path& dir, std::uint64_t league_seed = 7);

}  // namespace fplf::pipeline
