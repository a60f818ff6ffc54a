#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fplf/core.hpp"

namespace fplf::ingest {

/// One player in one fixture as published by FPL (live API or the historical
/// per-gameweek CSVs).
struct RawFplPlayerGW {
    std::string player_id;
    std::string player_name;
    Position position = Position::MID;
    std::string team;
    std::string opponent_team;
    bool was_home = false;
    int gameweek = 1;
    std::string season;
    int minutes = 0;
    int total_points = 0;
    int goals_scored = 0;
    int assists = 0;
    int goals_conceded = 0;
    int own_goals = 0;
    int saves = 0;
    int penalties_saved = 0;
    int penalties_missed = 0;
    int yellow_cards = 0;
    int red_cards = 0;
    int bonus = 0;
    int bps = 0;
    double influence = 0.0;
    double creativity = 0.0;
    double threat = 0.0;
    int availability_pct = 100;

    bool operator==(const RawFplPlayerGW&) const = default;
};

struct RawUnderstatPlayerMatch {
    std::string player_key;
    Timestamp match_date = 0;
    int shots = 0;
    double xg = 0.0;
    double xa = 0.0;
    double xg_chain = 0.0;
    double xg_buildup = 0.0;
    int key_passes = 0;

    bool operator==(const RawUnderstatPlayerMatch&) const = default;
};

struct RawUnderstatTeamMatch {
    std::string team_key;
    Timestamp match_date = 0;
    double xg = 0.0;
    double xga = 0.0;
    int deep = 0;
    int deep_allowed = 0;
    double ppda_att = 0.0;
    double ppda_def = 0.0;
    double ppda_allowed_att = 0.0;
    double ppda_allowed_def = 0.0;
    int goals_scored = 0;
    int goals_conceded = 0;

    bool operator==(const RawUnderstatTeamMatch&) const = default;
};

struct Fixture {
    std::string season;
    int gameweek = 1;
    std::string home_team;
    std::string away_team;
    Timestamp kickoff = 0;
    Timestamp deadline = 0;

    bool operator==(const Fixture&) const = default;
};

/// Everything loaded for one season from either source family.
struct SeasonData {
    std::string season;
    std::vector<RawFplPlayerGW> fpl;
    std::vector<RawUnderstatPlayerMatch> understat_players;
    std::vector<RawUnderstatTeamMatch> understat_teams;
    std::vector<Fixture> fixtures;

    bool operator==(const SeasonData&) const = default;
};

inline constexpr int kMaxGameweek = 38;

// FPL status letter + chance-of-playing -> one of {0,25,50,75,100}.
int map_availability(std::string_view status_code, std::optional<int> chance_pct);

void validate(const RawFplPlayerGW& r);
void validate(const RawUnderstatPlayerMatch& r);
void validate(const RawUnderstatTeamMatch& r);
void validate(const Fixture& f);

// Canonical per-gameweek CSV columns, in file order.
const std::vector<std::string>& canonical_fpl_columns();

// Reads <dir>/gws/gw*.csv, fixtures.csv, understat_players.csv and
// understat_teams.csv. Rows whose season column differs from `season` are rejected.
SeasonData load_historical_season(const std::filesystem::path& dir, const std::string& season);
void write_historical_season(const std::filesystem::path& dir, const SeasonData& data);

// ---------------------------------------------------------------------------
// Snapshot store

enum class DataSource { fpl_api, understat_api, historical_csv };

std::string_view to_string(DataSource source) noexcept;
DataSource parse_data_source(std::string_view text);

struct SnapshotManifest {
    DataSource source = DataSource::fpl_api;
    std::string season;
    std::optional<int> gameweek;
    Timestamp fetched_at = 0;
    std::string snapshot_id;
    std::string content_checksum;
    std::vector<std::string> file_list;

    nlohmann::json to_json() const;
    static SnapshotManifest from_json(const nlohmann::json& j);
    bool operator==(const SnapshotManifest&) const = default;
};

// Relative path -> raw bytes.
using Payloads = std::map<std::string, std::string>;

std::string payload_checksum(const Payloads& payloads);

/// Immutable, append-only store of raw payloads laid out as
/// <root>/<source>/<season>/<gameweek|season>/<snapshot_id>/... with the
/// manifest list in <root>/<source>/<season>/<gameweek|season>/manifest.json.
class SnapshotStore {
public:
    explicit SnapshotStore(std::filesystem::path root);

    const std::filesystem::path& root() const noexcept { return root_; }

    SnapshotManifest write(DataSource source, const std::string& season, std::optional<int> gameweek,
                           const Payloads& payloads, Timestamp fetched_at);

    std::vector<SnapshotManifest> list(DataSource source, const std::string& season,
                                       std::optional<int> gameweek) const;
    // All manifests for a source/season across gameweek slots, oldest first.
    std::vector<SnapshotManifest> list_all(DataSource source, const std::string& season) const;
    std::optional<SnapshotManifest> latest(DataSource source, const std::string& season) const;

    std::filesystem::path directory(const SnapshotManifest& m) const;
    // Throws if the stored bytes no longer match the manifest checksum.
    Payloads read(const SnapshotManifest& m) const;
    void verify(const SnapshotManifest& m) const;

private:
    std::filesystem::path slot_dir(DataSource source, const std::string& season,
                                   std::optional<int> gameweek) const;

    std::filesystem::path root_;
    mutable std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// Live sources

class HttpClient {
public:
    virtual ~HttpClient() = default;
    // Returns the response body; throws Error(network) on transport failure or
    // a non-200 status.
    virtual std::string get(const std::string& url) = 0;
};

std::unique_ptr<HttpClient> make_http_client();

struct Endpoints {
    std::string fpl_base = "https://fantasy.premierleague.com/api";
    // {year} is replaced by the season start year, {id} by the Understat player id.
    std::string understat_league = "https://understat.com/getLeagueData/EPL/{year}";
    std::string understat_player = "https://understat.com/getPlayerData/{id}";
    int attempts = 3;
};

SnapshotManifest fetch_live_snapshot(SnapshotStore& store, HttpClient& client, DataSource source,
                                     const std::string& season, int gameweek, Timestamp fetched_at,
                                     const Endpoints& endpoints = {});

// Pulls a JSON value out of an Understat payload. Accepts either a JSON API
// response (object keyed e.g. "teams"/"players"/"matches") or an HTML page
// embedding `var <name>Data = JSON.parse('...')` with \xNN escapes.
nlohmann::json extract_understat_json(std::string_view payload, std::string_view key);

// Schema checks used right after download; throw Error(schema, "missing field: <name>").
void check_fpl_bootstrap(const nlohmann::json& bootstrap);
void check_fpl_history(const nlohmann::json& summary);

// Converts a stored fpl_api snapshot into canonical records and fixtures.
SeasonData season_from_fpl_snapshot(const Payloads& payloads, const std::string& season);
// Converts a stored understat_api snapshot into Understat records.
void add_understat_snapshot(SeasonData& data, const Payloads& payloads);

// Stores a historical season directory as an immutable historical_csv snapshot.
SnapshotManifest import_historical_season(SnapshotStore& store, const std::filesystem::path& dir,
                                          const std::string& season, Timestamp fetched_at);
SeasonData load_snapshot_season(const SnapshotStore& store, const SnapshotManifest& m);

}  // namespace fplf::ingest
