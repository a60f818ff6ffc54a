#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fplf/dataset.hpp"
#include "fplf/ingest.hpp"

namespace fplf::synthetic {

/// A small fictional league played as a double round robin. Each player has a
/// hidden skill that drives goals, assists and points, and an injury process
/// that is announced through the availability tag before each gameweek.
struct LeagueConfig {
    std::uint64_t seed = 7;
    int n_teams = 8;
    std::vector<std::string> seasons{"2023-24", "2024-25"};
    int goalkeepers = 1;
    int defenders = 3;
    int midfielders = 3;
    int forwards = 2;
    int managers = 1;
    int n_folds = 5;
};

struct League {
    std::vector<ingest::SeasonData> seasons;
    dataset::AliasTable aliases;
    dataset::FoldAssignment folds;
    std::map<std::string, double> skill;  // player_id -> planted skill on the first season
};

League generate_league(const LeagueConfig& config);

// Writes <dir>/seasons/<season>/..., <dir>/aliases.csv and <dir>/folds.csv.
void write_league(const std::filesystem::path& dir, const League& league);

}  // namespace fplf::synthetic
