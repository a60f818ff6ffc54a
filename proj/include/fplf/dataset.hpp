#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fplf/ingest.hpp"

namespace fplf::dataset {

using ingest::Fixture;
using ingest::RawFplPlayerGW;
using ingest::RawUnderstatPlayerMatch;
using ingest::RawUnderstatTeamMatch;

/// Curated FPL <-> Understat entity links, keyed by season. Teams must all
/// resolve; players may be partial.
struct AliasTable {
    std::map<std::string, std::map<std::string, std::string>> teams;    // season -> FPL team -> Understat key
    std::map<std::string, std::map<std::string, std::string>> players;  // season -> FPL player_id -> Understat key

    const std::string& team_key(const std::string& season, const std::string& team) const;
    std::optional<std::string> player_key(const std::string& season, const std::string& player_id) const;

    void merge(const AliasTable& other);
    // CSV columns: kind (team|player), season, fpl_key, understat_key.
    static AliasTable read(const std::filesystem::path& path);
    void write(const std::filesystem::path& path) const;
};

struct PlayerMatchRecord {
    RawFplPlayerGW fpl;
    std::optional<RawUnderstatPlayerMatch> understat_player;
    RawUnderstatTeamMatch team_match;
    RawUnderstatTeamMatch opponent_match;
    bool imputed = false;
    Timestamp kickoff = 0;
    Timestamp deadline = 0;

    bool operator==(const PlayerMatchRecord&) const = default;
};

// Identity of a player's history: a club move starts a new history.
std::string player_key(const RawFplPlayerGW& r);

struct JoinResult {
    std::vector<PlayerMatchRecord> records;
    // "season|player_id|name" for FPL players with no Understat link.
    std::vector<std::string> unmatched_players;
};

JoinResult join_sources(const ingest::SeasonData& season, const AliasTable& aliases);

struct ImputationOutcome {
    PlayerMatchRecord record;
    bool relaxed = false;  // no donor matched played status and assists/goals exactly
    std::string donor;     // "season|player_id|gameweek"
};

// 1-NN fill of player-level Understat fields. Donors must carry Understat
// data; candidates are restricted to the target's played status and exact
// assists/goals counts, then ranked by Euclidean distance over
// (minutes, total_points, position one-hot), ties to the smallest player_id.
ImputationOutcome impute_understat_1nn(const PlayerMatchRecord& target,
                                       std::span<const PlayerMatchRecord> donors);

/// Same result as calling impute_understat_1nn per record, with donor
/// bucketing so whole seasons stay tractable.
class DonorIndex {
public:
    explicit DonorIndex(std::span<const PlayerMatchRecord> donors);
    ImputationOutcome impute(const PlayerMatchRecord& target) const;
    std::size_t size() const noexcept { return donors_.size(); }

private:
    struct Rep {
        int minutes;
        int points;
        int position;
        std::size_t donor;  // smallest player_id for this (minutes, points, position)
    };
    std::vector<const PlayerMatchRecord*> donors_;
    std::map<std::array<int, 3>, std::vector<Rep>> buckets_;  // (played, goals, assists)
};

// Imputes every record lacking Understat player data; returns provenance lines.
std::vector<std::string> impute_records(std::vector<PlayerMatchRecord>& targets,
                                        std::span<const PlayerMatchRecord> donors);

/// Team -> fold index (0-based; label "C<index+1>").
class FoldAssignment {
public:
    FoldAssignment() = default;
    FoldAssignment(std::map<std::string, int> team_fold, int n_folds);

    static const FoldAssignment& development_table();
    static FoldAssignment read(const std::filesystem::path& path);  // CSV: team,fold
    void write(const std::filesystem::path& path) const;

    int fold_of(const std::string& team) const;  // throws on unknown team
    bool contains(const std::string& team) const;
    int n_folds() const noexcept { return n_folds_; }
    const std::map<std::string, int>& teams() const noexcept { return team_fold_; }

    bool operator==(const FoldAssignment&) const = default;

private:
    std::map<std::string, int> team_fold_;
    int n_folds_ = 0;
};

std::string fold_label(int fold);
int parse_fold(std::string_view label);

// Maps common FPL/Understat spellings onto the fold-table spelling.
std::string normalize_team_name(std::string_view name);

struct TeamSeason {
    std::string team;
    std::string season;
    auto operator<=>(const TeamSeason&) const = default;
};

// Restricts `table` to the given teams (normalized) and checks each is known.
FoldAssignment assign_folds(std::span<const TeamSeason> team_seasons,
                            const FoldAssignment& table = FoldAssignment::development_table());
std::vector<int> fold_team_season_counts(std::span<const TeamSeason> team_seasons,
                                         const FoldAssignment& assignment);
std::vector<TeamSeason> team_seasons(std::span<const PlayerMatchRecord> records);

struct DevDataset {
    std::vector<std::vector<PlayerMatchRecord>> folds;
    std::size_t size() const;
};

DevDataset build_dev_dataset(std::span<const PlayerMatchRecord> records, const FoldAssignment& assignment);

struct EvalWindow {
    std::string season = "2024-25";
    int first_gameweek = 32;
    int last_gameweek = 38;
    int expected_teams = 20;
};

struct EvalDataset {
    EvalWindow window;
    std::vector<PlayerMatchRecord> records;
};

EvalDataset build_eval_dataset(std::span<const PlayerMatchRecord> records, const EvalWindow& window = {});

// Joined dataset file: canonical columns + Understat columns + imputed flag.
void write_joined(const std::filesystem::path& path, std::span<const PlayerMatchRecord> records);
std::vector<PlayerMatchRecord> read_joined(const std::filesystem::path& path);

}  // namespace fplf::dataset
