#include "fplf/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "fplf/csv.hpp"

namespace fplf::dataset {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Aliases

const std::string& AliasTable::team_key(const std::string& season, const std::string& team) const {
    auto s = teams.find(season);
    if (s != teams.end()) {
        auto t = s->second.find(team);
        if (t != s->second.end()) return t->second;
    }
    fail("team alias missing for '" + team + "' in season " + season);
}

std::optional<std::string> AliasTable::player_key(const std::string& season, const std::string& player_id) const {
    auto s = players.find(season);
    if (s == players.end()) return std::nullopt;
    auto p = s->second.find(player_id);
    if (p == s->second.end()) return std::nullopt;
    return p->second;
}

void AliasTable::merge(const AliasTable& other) {
    for (const auto& [season, m] : other.teams)
        for (const auto& [k, v] : m) teams[season][k] = v;
    for (const auto& [season, m] : other.players)
        for (const auto& [k, v] : m) players[season][k] = v;
}

AliasTable AliasTable::read(const fs::path& path) {
    const auto t = csv::Table::read(path);
    t.require_columns({"kind", "season", "fpl_key", "understat_key"});
    AliasTable out;
    for (std::size_t r = 0; r < t.size(); ++r) {
        const std::string kind = trim(t.cell(r, "kind"));
        const std::string season = trim(t.cell(r, "season"));
        const std::string key = trim(t.cell(r, "fpl_key"));
        const std::string value = trim(t.cell(r, "understat_key"));
        if (kind == "team")
            out.teams[season][key] = value;
        else if (kind == "player")
            out.players[season][key] = value;
        else
            fail(path.string() + ": row " + std::to_string(r + 1) + ": unknown alias kind '" + kind + "'");
    }
    return out;
}

void AliasTable::write(const fs::path& path) const {
    csv::Table t({"kind", "season", "fpl_key", "understat_key"});
    for (const auto& [season, m] : teams)
        for (const auto& [k, v] : m) t.add_row({"team", season, k, v});
    for (const auto& [season, m] : players)
        for (const auto& [k, v] : m) t.add_row({"player", season, k, v});
    t.write(path);
}

std::string player_key(const RawFplPlayerGW& r) { return r.player_id + "|" + r.team; }

// ---------------------------------------------------------------------------
// Join

namespace {

using DayKey = std::pair<std::string, std::int64_t>;

struct DayKeyHash {
    std::size_t operator()(const DayKey& k) const noexcept {
        return std::hash<std::string>{}(k.first) ^ (std::hash<std::int64_t>{}(k.second) * 0x9e3779b97f4a7c15ULL);
    }
};

template <class T>
const T* find_by_day(const std::unordered_map<DayKey, const T*, DayKeyHash>& index,
                     const std::string& key, Timestamp when) {
    const std::int64_t day = day_number(when);
    // Understat dates are UK local time, FPL kickoffs are UTC.
    for (std::int64_t delta : {0, -1, 1}) {
        auto it = index.find({key, day + delta});
        if (it != index.end()) return it->second;
    }
    return nullptr;
}

}  // namespace

JoinResult join_sources(const ingest::SeasonData& season, const AliasTable& aliases) {
    JoinResult out;

    std::map<std::tuple<int, std::string, std::string>, const Fixture*> by_gw;
    std::multimap<std::pair<std::string, std::string>, const Fixture*> by_pair;
    for (const auto& f : season.fixtures) {
        by_gw[{f.gameweek, f.home_team, f.away_team}] = &f;
        by_pair.emplace(std::make_pair(f.home_team, f.away_team), &f);
    }
    std::unordered_map<DayKey, const RawUnderstatTeamMatch*, DayKeyHash> team_index;
    for (const auto& m : season.understat_teams)
        team_index.emplace(DayKey{m.team_key, day_number(m.match_date)}, &m);
    std::unordered_map<DayKey, const RawUnderstatPlayerMatch*, DayKeyHash> player_index;
    for (const auto& m : season.understat_players)
        player_index.emplace(DayKey{m.player_key, day_number(m.match_date)}, &m);

    std::set<std::tuple<std::string, int, std::string, bool>> seen;
    std::set<std::string> unmatched;

    for (const auto& row : season.fpl) {
        if (!seen.emplace(row.player_id, row.gameweek, row.opponent_team, row.was_home).second)
            fail("duplicate join key: season " + season.season + " player " + row.player_id +
                 " gameweek " + std::to_string(row.gameweek) + " vs " + row.opponent_team);

        const std::string& home = row.was_home ? row.team : row.opponent_team;
        const std::string& away = row.was_home ? row.opponent_team : row.team;
        const Fixture* fixture = nullptr;
        if (auto it = by_gw.find({row.gameweek, home, away}); it != by_gw.end()) {
            fixture = it->second;
        } else if (auto range = by_pair.equal_range({home, away}); range.first != range.second) {
            fixture = range.first->second;  // rescheduled into another gameweek
        } else {
            fail("no fixture " + home + " v " + away + " in season " + season.season);
        }

        PlayerMatchRecord rec;
        rec.fpl = row;
        rec.kickoff = fixture->kickoff;
        rec.deadline = fixture->deadline;

        const std::string& team_key = aliases.team_key(season.season, row.team);
        const std::string& opp_key = aliases.team_key(season.season, row.opponent_team);
        const auto* tm = find_by_day(team_index, team_key, fixture->kickoff);
        const auto* om = find_by_day(team_index, opp_key, fixture->kickoff);
        if (!tm || !om)
            fail("understat team match missing for " + home + " v " + away + " on " +
                 format_timestamp(fixture->kickoff));
        rec.team_match = *tm;
        rec.opponent_match = *om;

        if (auto key = aliases.player_key(season.season, row.player_id)) {
            if (const auto* pm = find_by_day(player_index, *key, fixture->kickoff)) {
                rec.understat_player = *pm;
            } else if (row.minutes == 0) {
                RawUnderstatPlayerMatch zero;
                zero.player_key = *key;
                zero.match_date = fixture->kickoff;
                rec.understat_player = zero;
            }
        } else {
            unmatched.insert(season.season + "|" + row.player_id + "|" + row.player_name);
        }
        out.records.push_back(std::move(rec));
    }
    out.unmatched_players.assign(unmatched.begin(), unmatched.end());
    return out;
}

// ---------------------------------------------------------------------------
// Imputation

namespace {

bool id_less(const std::string& a, const std::string& b) {
    long long x = 0, y = 0;
    auto ra = std::from_chars(a.data(), a.data() + a.size(), x);
    auto rb = std::from_chars(b.data(), b.data() + b.size(), y);
    const bool na = ra.ec == std::errc{} && ra.ptr == a.data() + a.size() && !a.empty();
    const bool nb = rb.ec == std::errc{} && rb.ptr == b.data() + b.size() && !b.empty();
    if (na && nb) return x < y;
    if (na != nb) return na;
    return a < b;
}

// Total order among equidistant donors.
bool donor_before(const PlayerMatchRecord& a, const PlayerMatchRecord& b) {
    if (a.fpl.player_id != b.fpl.player_id) return id_less(a.fpl.player_id, b.fpl.player_id);
    return std::tie(a.fpl.season, a.fpl.gameweek, a.kickoff, a.fpl.opponent_team) <
           std::tie(b.fpl.season, b.fpl.gameweek, b.kickoff, b.fpl.opponent_team);
}

long long distance2(int dm, int dp, bool same_position) {
    return static_cast<long long>(dm) * dm + static_cast<long long>(dp) * dp + (same_position ? 0 : 2);
}

ImputationOutcome fill_from(const PlayerMatchRecord& target, const PlayerMatchRecord& donor, bool relaxed) {
    ImputationOutcome out;
    out.record = target;
    RawUnderstatPlayerMatch m = *donor.understat_player;
    m.player_key = "imputed:" + donor.understat_player->player_key;
    m.match_date = target.kickoff;
    out.record.understat_player = m;
    out.record.imputed = true;
    out.relaxed = relaxed;
    out.donor = donor.fpl.season + "|" + donor.fpl.player_id + "|" + std::to_string(donor.fpl.gameweek);
    return out;
}

bool played(const PlayerMatchRecord& r) { return r.fpl.minutes > 0; }

}  // namespace

ImputationOutcome impute_understat_1nn(const PlayerMatchRecord& target,
                                       std::span<const PlayerMatchRecord> donors) {
    const auto& t = target.fpl;
    const PlayerMatchRecord* best = nullptr;
    long long best_d = 0;
    bool any_same_status = false;
    for (const auto& d : donors) {
        if (!d.understat_player) continue;
        if (played(d) != played(target)) continue;
        any_same_status = true;
        if (d.fpl.assists != t.assists || d.fpl.goals_scored != t.goals_scored) continue;
        const long long dist = distance2(d.fpl.minutes - t.minutes, d.fpl.total_points - t.total_points,
                                         d.fpl.position == t.position);
        if (!best || dist < best_d || (dist == best_d && donor_before(d, *best))) {
            best = &d;
            best_d = dist;
        }
    }
    if (best) return fill_from(target, *best, false);

    // Relaxed: nearest (assists, goals) in L1, then the usual distance.
    long long best_l1 = 0;
    for (const auto& d : donors) {
        if (!d.understat_player) continue;
        if (any_same_status && played(d) != played(target)) continue;
        const long long l1 = std::abs(d.fpl.assists - t.assists) + std::abs(d.fpl.goals_scored - t.goals_scored);
        const long long dist = distance2(d.fpl.minutes - t.minutes, d.fpl.total_points - t.total_points,
                                         d.fpl.position == t.position);
        if (!best || std::tie(l1, dist) < std::tie(best_l1, best_d) ||
            (l1 == best_l1 && dist == best_d && donor_before(d, *best))) {
            best = &d;
            best_l1 = l1;
            best_d = dist;
        }
    }
    if (!best) fail("imputation donor pool is empty");
    return fill_from(target, *best, true);
}

DonorIndex::DonorIndex(std::span<const PlayerMatchRecord> donors) {
    std::map<std::array<int, 3>, std::map<std::array<int, 3>, std::size_t>> reps;
    for (const auto& d : donors) {
        if (!d.understat_player) continue;
        const std::size_t idx = donors_.size();
        donors_.push_back(&d);
        const std::array<int, 3> bucket{played(d) ? 1 : 0, d.fpl.goals_scored, d.fpl.assists};
        const std::array<int, 3> point{d.fpl.minutes, d.fpl.total_points, static_cast<int>(d.fpl.position)};
        auto [it, inserted] = reps[bucket].try_emplace(point, idx);
        if (!inserted && donor_before(d, *donors_[it->second])) it->second = idx;
    }
    for (const auto& [bucket, points] : reps) {
        auto& list = buckets_[bucket];
        for (const auto& [p, idx] : points) list.push_back({p[0], p[1], p[2], idx});
    }
}

ImputationOutcome DonorIndex::impute(const PlayerMatchRecord& target) const {
    if (donors_.empty()) fail("imputation donor pool is empty");
    const auto& t = target.fpl;
    const int status = played(target) ? 1 : 0;
    const auto nearest = [&](const std::vector<const std::vector<Rep>*>& lists) {
        const PlayerMatchRecord* best = nullptr;
        long long best_d = 0;
        for (const auto* list : lists)
            for (const auto& rep : *list) {
                const long long dist = distance2(rep.minutes - t.minutes, rep.points - t.total_points,
                                                 rep.position == static_cast<int>(t.position));
                const PlayerMatchRecord* d = donors_[rep.donor];
                if (!best || dist < best_d || (dist == best_d && donor_before(*d, *best))) {
                    best = d;
                    best_d = dist;
                }
            }
        return best;
    };

    if (auto it = buckets_.find({status, t.goals_scored, t.assists}); it != buckets_.end())
        return fill_from(target, *nearest({&it->second}), false);

    bool any_same_status = false;
    for (const auto& [b, _] : buckets_) any_same_status |= b[0] == status;
    long long best_l1 = std::numeric_limits<long long>::max();
    std::vector<const std::vector<Rep>*> lists;
    for (const auto& [b, list] : buckets_) {
        if (any_same_status && b[0] != status) continue;
        const long long l1 = std::abs(b[1] - t.goals_scored) + std::abs(b[2] - t.assists);
        if (l1 < best_l1) {
            best_l1 = l1;
            lists.clear();
        }
        if (l1 == best_l1) lists.push_back(&list);
    }
    return fill_from(target, *nearest(lists), true);
}

std::vector<std::string> impute_records(std::vector<PlayerMatchRecord>& targets,
                                        std::span<const PlayerMatchRecord> donors) {
    std::vector<std::string> log;
    bool any_missing = std::any_of(targets.begin(), targets.end(),
                                   [](const auto& r) { return !r.understat_player; });
    if (!any_missing) return log;
    const DonorIndex index(donors);
    for (auto& r : targets) {
        if (r.understat_player) continue;
        auto outcome = index.impute(r);
        if (outcome.relaxed)
            log.push_back("relaxed match: " + r.fpl.season + "|" + r.fpl.player_id + "|gw" +
                          std::to_string(r.fpl.gameweek) + " <- " + outcome.donor);
        r = std::move(outcome.record);
    }
    return log;
}

// ---------------------------------------------------------------------------
// Folds

FoldAssignment::FoldAssignment(std::map<std::string, int> team_fold, int n_folds)
    : team_fold_(std::move(team_fold)), n_folds_(n_folds) {
    for (const auto& [team, fold] : team_fold_)
        if (fold < 0 || fold >= n_folds_) fail("fold index out of range for team " + team);
}

const FoldAssignment& FoldAssignment::development_table() {
    static const FoldAssignment table(
        {
            {"Everton", 0}, {"Leeds", 0}, {"Luton", 0}, {"Manchester United", 0}, {"West Ham", 0},
            {"Aston Villa", 1}, {"Burnley", 1}, {"Leicester", 1}, {"Tottenham", 1}, {"Watford", 1},
            {"West Bromwich", 1},
            {"Bournemouth", 2}, {"Brentford", 2}, {"Manchester City", 2}, {"Southampton", 2},
            {"Wolverhampton", 2},
            {"Brighton", 3}, {"Chelsea", 3}, {"Crystal Palace", 3}, {"Nottingham Forest", 3},
            {"Sheffield United", 3},
            {"Arsenal", 4}, {"Fulham", 4}, {"Liverpool", 4}, {"Newcastle", 4}, {"Norwich", 4},
        },
        5);
    return table;
}

std::string fold_label(int fold) { return "C" + std::to_string(fold + 1); }

int parse_fold(std::string_view label) {
    const std::string s = trim(label);
    int n = 0;
    if (s.size() >= 2 && (s[0] == 'C' || s[0] == 'c')) {
        auto [p, ec] = std::from_chars(s.data() + 1, s.data() + s.size(), n);
        if (ec == std::errc{} && p == s.data() + s.size() && n >= 1) return n - 1;
    }
    throw Error(ErrorKind::config, "malformed fold label: '" + s + "'");
}

FoldAssignment FoldAssignment::read(const fs::path& path) {
    const auto t = csv::Table::read(path);
    t.require_columns({"team", "fold"});
    std::map<std::string, int> m;
    int max_fold = -1;
    for (std::size_t r = 0; r < t.size(); ++r) {
        const int fold = parse_fold(t.cell(r, "fold"));
        m[normalize_team_name(t.cell(r, "team"))] = fold;
        max_fold = std::max(max_fold, fold);
    }
    return FoldAssignment(std::move(m), max_fold + 1);
}

void FoldAssignment::write(const fs::path& path) const {
    csv::Table t({"team", "fold"});
    for (const auto& [team, fold] : team_fold_) t.add_row({team, fold_label(fold)});
    t.write(path);
}

bool FoldAssignment::contains(const std::string& team) const {
    return team_fold_.count(normalize_team_name(team)) > 0;
}

int FoldAssignment::fold_of(const std::string& team) const {
    auto it = team_fold_.find(normalize_team_name(team));
    if (it == team_fold_.end()) fail("unknown team name: '" + team + "'");
    return it->second;
}

std::string normalize_team_name(std::string_view name) {
    static const std::map<std::string, std::string> aliases{
        {"man utd", "Manchester United"},      {"manchester utd", "Manchester United"},
        {"manchester united", "Manchester United"}, {"man united", "Manchester United"},
        {"man city", "Manchester City"},       {"manchester city", "Manchester City"},
        {"spurs", "Tottenham"},                {"tottenham hotspur", "Tottenham"},
        {"wolves", "Wolverhampton"},           {"wolverhampton wanderers", "Wolverhampton"},
        {"west brom", "West Bromwich"},        {"west bromwich albion", "West Bromwich"},
        {"nott'm forest", "Nottingham Forest"}, {"nottingham forest", "Nottingham Forest"},
        {"sheffield utd", "Sheffield United"}, {"sheffield united", "Sheffield United"},
        {"leeds united", "Leeds"},             {"leicester city", "Leicester"},
        {"luton town", "Luton"},               {"norwich city", "Norwich"},
        {"brighton & hove albion", "Brighton"}, {"brighton and hove albion", "Brighton"},
        {"west ham united", "West Ham"},       {"newcastle united", "Newcastle"},
        {"afc bournemouth", "Bournemouth"},
    };
    const std::string t = trim(name);
    auto it = aliases.find(to_lower(t));
    return it == aliases.end() ? t : it->second;
}

FoldAssignment assign_folds(std::span<const TeamSeason> seasons, const FoldAssignment& table) {
    std::map<std::string, int> m;
    for (const auto& ts : seasons) m[normalize_team_name(ts.team)] = table.fold_of(ts.team);
    return FoldAssignment(std::move(m), table.n_folds());
}

std::vector<int> fold_team_season_counts(std::span<const TeamSeason> seasons, const FoldAssignment& assignment) {
    std::set<TeamSeason> distinct;
    for (const auto& ts : seasons) distinct.insert({normalize_team_name(ts.team), ts.season});
    std::vector<int> counts(static_cast<std::size_t>(assignment.n_folds()), 0);
    for (const auto& ts : distinct) ++counts[static_cast<std::size_t>(assignment.fold_of(ts.team))];
    return counts;
}

std::vector<TeamSeason> team_seasons(std::span<const PlayerMatchRecord> records) {
    std::set<TeamSeason> distinct;
    for (const auto& r : records) distinct.insert({r.fpl.team, r.fpl.season});
    return {distinct.begin(), distinct.end()};
}

std::size_t DevDataset::size() const {
    std::size_t n = 0;
    for (const auto& f : folds) n += f.size();
    return n;
}

DevDataset build_dev_dataset(std::span<const PlayerMatchRecord> records, const FoldAssignment& assignment) {
    DevDataset dev;
    dev.folds.resize(static_cast<std::size_t>(assignment.n_folds()));
    for (const auto& r : records) dev.folds[static_cast<std::size_t>(assignment.fold_of(r.fpl.team))].push_back(r);
    return dev;
}

EvalDataset build_eval_dataset(std::span<const PlayerMatchRecord> records, const EvalWindow& window) {
    if (records.empty()) fail("evaluation input is empty");
    EvalDataset out;
    out.window = window;
    std::set<std::string> teams;
    for (const auto& r : records) {
        if (r.fpl.season != window.season) continue;
        if (r.fpl.gameweek < window.first_gameweek || r.fpl.gameweek > window.last_gameweek) continue;
        teams.insert(r.fpl.team);
        out.records.push_back(r);
    }
    if (out.records.empty()) fail("no records of " + window.season + " fall inside the evaluation window");
    if (static_cast<int>(teams.size()) != window.expected_teams)
        fail("evaluation window covers " + std::to_string(teams.size()) + " teams, expected " +
             std::to_string(window.expected_teams));
    return out;
}

// ---------------------------------------------------------------------------
// Joined file

namespace {

std::vector<std::string> team_columns(const std::string& prefix) {
    std::vector<std::string> c;
    for (const char* n : {"key", "date", "xg", "xga", "deep", "deep_allowed", "ppda_att", "ppda_def",
                          "ppda_allowed_att", "ppda_allowed_def", "goals_scored", "goals_conceded"})
        c.push_back(prefix + n);
    return c;
}

std::vector<std::string> joined_columns() {
    auto cols = ingest::canonical_fpl_columns();
    for (const char* c : {"kickoff", "deadline", "us_present", "us_key", "us_date", "us_shots", "us_xg", "us_xa",
                          "us_xg_chain", "us_xg_buildup", "us_key_passes", "imputed"})
        cols.emplace_back(c);
    for (auto& c : team_columns("team_")) cols.push_back(std::move(c));
    for (auto& c : team_columns("opp_")) cols.push_back(std::move(c));
    return cols;
}

void append_team(std::vector<std::string>& row, const RawUnderstatTeamMatch& m) {
    const auto d = format_double;
    row.insert(row.end(), {m.team_key, format_timestamp(m.match_date), d(m.xg), d(m.xga),
                           std::to_string(m.deep), std::to_string(m.deep_allowed), d(m.ppda_att),
                           d(m.ppda_def), d(m.ppda_allowed_att), d(m.ppda_allowed_def),
                           std::to_string(m.goals_scored), std::to_string(m.goals_conceded)});
}

RawUnderstatTeamMatch read_team(const csv::Table& t, std::size_t r, const std::string& p) {
    RawUnderstatTeamMatch m;
    m.team_key = t.cell(r, p + "key");
    m.match_date = parse_timestamp(t.cell(r, p + "date"));
    m.xg = t.get_double(r, p + "xg");
    m.xga = t.get_double(r, p + "xga");
    m.deep = static_cast<int>(t.get_int(r, p + "deep"));
    m.deep_allowed = static_cast<int>(t.get_int(r, p + "deep_allowed"));
    m.ppda_att = t.get_double(r, p + "ppda_att");
    m.ppda_def = t.get_double(r, p + "ppda_def");
    m.ppda_allowed_att = t.get_double(r, p + "ppda_allowed_att");
    m.ppda_allowed_def = t.get_double(r, p + "ppda_allowed_def");
    m.goals_scored = static_cast<int>(t.get_int(r, p + "goals_scored"));
    m.goals_conceded = static_cast<int>(t.get_int(r, p + "goals_conceded"));
    return m;
}

}  // namespace

void write_joined(const fs::path& path, std::span<const PlayerMatchRecord> records) {
    csv::Table t(joined_columns());
    t.add_comment("fplf-joined-v1");
    const auto d = format_double;
    for (const auto& rec : records) {
        const auto& r = rec.fpl;
        std::vector<std::string> row{
            r.season, std::to_string(r.gameweek), r.player_id, r.player_name,
            std::string(to_string(r.position)), r.team, r.opponent_team, r.was_home ? "true" : "false",
            std::to_string(r.minutes), std::to_string(r.total_points), std::to_string(r.goals_scored),
            std::to_string(r.assists), std::to_string(r.goals_conceded), std::to_string(r.own_goals),
            std::to_string(r.saves), std::to_string(r.penalties_saved), std::to_string(r.penalties_missed),
            std::to_string(r.yellow_cards), std::to_string(r.red_cards), std::to_string(r.bonus),
            std::to_string(r.bps), d(r.influence), d(r.creativity), d(r.threat),
            std::to_string(r.availability_pct), format_timestamp(rec.kickoff),
            format_timestamp(rec.deadline)};
        if (rec.understat_player) {
            const auto& u = *rec.understat_player;
            row.insert(row.end(), {"true", u.player_key, format_timestamp(u.match_date), std::to_string(u.shots), d(u.xg), d(u.xa),
                                   d(u.xg_chain), d(u.xg_buildup), std::to_string(u.key_passes)});
        } else {
            row.insert(row.end(), {"false", "", "", "", "", "", "", "", ""});
        }
        row.push_back(rec.imputed ? "true" : "false");
        append_team(row, rec.team_match);
        append_team(row, rec.opponent_match);
        t.add_row(std::move(row));
    }
    t.write(path);
}

std::vector<PlayerMatchRecord> read_joined(const fs::path& path) {
    const auto t = csv::Table::read(path);
    t.require_columns(joined_columns());
    std::vector<PlayerMatchRecord> out;
    out.reserve(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        PlayerMatchRecord rec;
        auto& r = rec.fpl;
        const auto gi = [&](const char* c) { return static_cast<int>(t.get_int(i, c)); };
        r.season = t.cell(i, "season");
        r.gameweek = gi("gameweek");
        r.player_id = t.cell(i, "player_id");
        r.player_name = t.cell(i, "name");
        r.position = parse_position(t.cell(i, "position"));
        r.team = t.cell(i, "team");
        r.opponent_team = t.cell(i, "opponent_team");
        r.was_home = t.get_bool(i, "was_home");
        r.minutes = gi("minutes");
        r.total_points = gi("total_points");
        r.goals_scored = gi("goals_scored");
        r.assists = gi("assists");
        r.goals_conceded = gi("goals_conceded");
        r.own_goals = gi("own_goals");
        r.saves = gi("saves");
        r.penalties_saved = gi("penalties_saved");
        r.penalties_missed = gi("penalties_missed");
        r.yellow_cards = gi("yellow_cards");
        r.red_cards = gi("red_cards");
        r.bonus = gi("bonus");
        r.bps = gi("bps");
        r.influence = t.get_double(i, "influence");
        r.creativity = t.get_double(i, "creativity");
        r.threat = t.get_double(i, "threat");
        r.availability_pct = gi("availability");
        rec.kickoff = parse_timestamp(t.cell(i, "kickoff"));
        rec.deadline = parse_timestamp(t.cell(i, "deadline"));
        if (t.get_bool(i, "us_present")) {
            RawUnderstatPlayerMatch u;
            u.player_key = t.cell(i, "us_key");
            u.match_date = parse_timestamp(t.cell(i, "us_date"));
            u.shots = gi("us_shots");
            u.xg = t.get_double(i, "us_xg");
            u.xa = t.get_double(i, "us_xa");
            u.xg_chain = t.get_double(i, "us_xg_chain");
            u.xg_buildup = t.get_double(i, "us_xg_buildup");
            u.key_passes = gi("us_key_passes");
            rec.understat_player = u;
        }
        rec.imputed = t.get_bool(i, "imputed");
        rec.team_match = read_team(t, i, "team_");
        rec.opponent_match = read_team(t, i, "opp_");
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace fplf::dataset
