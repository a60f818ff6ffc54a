#include "fplf/features.hpp"

#include <algorithm>
#include <set>

#include "fplf/csv.hpp"

namespace fplf::features {

namespace {

std::string_view stat_name(PlayerStat s) {
    switch (s) {
        case PlayerStat::points: return "fpl_points";
        case PlayerStat::relevant_points: return "relevant_fpl_points";
        case PlayerStat::minutes: return "minutes";
        case PlayerStat::influence: return "influence";
        case PlayerStat::creativity: return "creativity";
        case PlayerStat::threat: return "threat";
        case PlayerStat::goals_scored: return "goals_scored";
        case PlayerStat::penalties_missed: return "penalties_missed";
        case PlayerStat::assists: return "assists";
        case PlayerStat::goals_conceded: return "goals_conceded";
        case PlayerStat::own_goals: return "own_goals";
        case PlayerStat::saves: return "saves";
        case PlayerStat::penalties_saved: return "penalties_saved";
        case PlayerStat::yellow_cards: return "yellow_cards";
        case PlayerStat::red_cards: return "red_cards";
        case PlayerStat::bps: return "bps";
        case PlayerStat::bonus: return "bonus";
        case PlayerStat::shots: return "shots";
        case PlayerStat::xg: return "xg";
        case PlayerStat::xg_chain: return "xg_chain";
        case PlayerStat::xg_buildup: return "xg_buildup";
        case PlayerStat::key_passes: return "key_passes";
        case PlayerStat::xa: return "xa";
    }
    return "?";
}

std::string_view stat_name(TeamStat s) {
    switch (s) {
        case TeamStat::goals_scored: return "goals_scored";
        case TeamStat::goals_conceded: return "goals_conceded";
        case TeamStat::league_rank: return "league_rank";
        case TeamStat::opponent_league_rank: return "opponent_league_rank";
        case TeamStat::xg: return "xg";
        case TeamStat::deep_allowed: return "deep_allowed";
        case TeamStat::ppda_allowed_att: return "ppda_allowed_att";
        case TeamStat::ppda_allowed_def: return "ppda_allowed_def";
        case TeamStat::xga: return "xga";
        case TeamStat::deep: return "deep";
        case TeamStat::ppda_att: return "ppda_att";
        case TeamStat::ppda_def: return "ppda_def";
    }
    return "?";
}

std::string_view stat_name(StatusStat s) {
    switch (s) {
        case StatusStat::availability: return "availability";
        case StatusStat::team_league_rank: return "team_league_rank";
        case StatusStat::opponent_league_rank: return "opponent_league_rank";
    }
    return "?";
}

PositionSchema make_schema(Position position) {
    using P = PlayerStat;
    using T = TeamStat;
    PositionSchema s;
    s.position = position;
    const std::vector<T> opponent{T::goals_scored, T::goals_conceded, T::xg, T::deep_allowed,
                                  T::ppda_allowed_att, T::ppda_allowed_def, T::xga, T::deep,
                                  T::ppda_att, T::ppda_def};
    switch (position) {
        case Position::GK:
            s.player = {P::points, P::relevant_points, P::minutes, P::influence, P::creativity,
                        P::threat, P::assists, P::goals_conceded, P::own_goals, P::saves,
                        P::penalties_saved, P::yellow_cards, P::red_cards, P::bps, P::bonus,
                        P::xg_chain, P::xg_buildup, P::key_passes, P::xa};
            s.team = opponent;
            s.status = {StatusStat::availability};
            s.expected_count = 196;
            break;
        case Position::DEF:
        case Position::MID:
        case Position::FWD:
            s.player = {P::points, P::relevant_points, P::minutes, P::influence, P::creativity,
                        P::threat, P::goals_scored, P::penalties_missed, P::assists,
                        P::goals_conceded, P::own_goals, P::yellow_cards, P::red_cards, P::bps,
                        P::bonus, P::shots, P::xg, P::xg_chain, P::xg_buildup, P::key_passes, P::xa};
            s.team = opponent;
            s.status = {StatusStat::availability};
            s.expected_count = 206;
            break;
        case Position::AM:
            s.player = {P::points, P::relevant_points};
            s.team = {T::goals_scored, T::goals_conceded, T::league_rank, T::opponent_league_rank,
                      T::xg, T::deep_allowed, T::ppda_allowed_att, T::ppda_allowed_def, T::xga,
                      T::deep, T::ppda_att, T::ppda_def};
            s.status = {StatusStat::team_league_rank, StatusStat::opponent_league_rank};
            s.expected_count = 122;
            break;
    }
    s.opponent = opponent;
    for (int h : kHorizons) {
        const std::string suffix = "_h" + std::to_string(h);
        for (auto p : s.player) s.names.push_back("xp_" + std::string(stat_name(p)) + suffix);
        for (auto t : s.team) s.names.push_back("xt_" + std::string(stat_name(t)) + suffix);
        for (auto o : s.opponent) s.names.push_back("xo_" + std::string(stat_name(o)) + suffix);
    }
    for (auto st : s.status) s.names.push_back("xs_" + std::string(stat_name(st)));
    if (s.names.size() != s.expected_count)
        throw Error(ErrorKind::internal, "feature schema size mismatch for " + std::string(to_string(position)));
    return s;
}

double player_value(const PlayerMatchRecord& r, PlayerStat s) {
    const auto& f = r.fpl;
    const auto& u = r.understat_player;
    switch (s) {
        case PlayerStat::points:
        case PlayerStat::relevant_points: return f.total_points;
        case PlayerStat::minutes: return f.minutes;
        case PlayerStat::influence: return f.influence;
        case PlayerStat::creativity: return f.creativity;
        case PlayerStat::threat: return f.threat;
        case PlayerStat::goals_scored: return f.goals_scored;
        case PlayerStat::penalties_missed: return f.penalties_missed;
        case PlayerStat::assists: return f.assists;
        case PlayerStat::goals_conceded: return f.goals_conceded;
        case PlayerStat::own_goals: return f.own_goals;
        case PlayerStat::saves: return f.saves;
        case PlayerStat::penalties_saved: return f.penalties_saved;
        case PlayerStat::yellow_cards: return f.yellow_cards;
        case PlayerStat::red_cards: return f.red_cards;
        case PlayerStat::bps: return f.bps;
        case PlayerStat::bonus: return f.bonus;
        // Unlinked players contribute zero Understat involvement.
        case PlayerStat::shots: return u ? u->shots : 0.0;
        case PlayerStat::xg: return u ? u->xg : 0.0;
        case PlayerStat::xg_chain: return u ? u->xg_chain : 0.0;
        case PlayerStat::xg_buildup: return u ? u->xg_buildup : 0.0;
        case PlayerStat::key_passes: return u ? u->key_passes : 0.0;
        case PlayerStat::xa: return u ? u->xa : 0.0;
    }
    return 0.0;
}

double team_value(const TeamMatchEntry& e, TeamStat s) {
    const auto& m = e.stats;
    switch (s) {
        case TeamStat::goals_scored: return m.goals_scored;
        case TeamStat::goals_conceded: return m.goals_conceded;
        case TeamStat::league_rank: return e.rank_at_match;
        case TeamStat::opponent_league_rank: return e.opponent_rank_at_match;
        case TeamStat::xg: return m.xg;
        case TeamStat::deep_allowed: return m.deep_allowed;
        case TeamStat::ppda_allowed_att: return m.ppda_allowed_att;
        case TeamStat::ppda_allowed_def: return m.ppda_allowed_def;
        case TeamStat::xga: return m.xga;
        case TeamStat::deep: return m.deep;
        case TeamStat::ppda_att: return m.ppda_att;
        case TeamStat::ppda_def: return m.ppda_def;
    }
    return 0.0;
}

// Mean of the first `horizon` values produced by `value(i)`, i < n.
template <class F>
double head_mean(std::size_t n, int horizon, F&& value) {
    const std::size_t k = std::min<std::size_t>(n, static_cast<std::size_t>(horizon));
    if (k == 0) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += value(i);
    return sum / static_cast<double>(k);
}

}  // namespace

std::string PositionSchema::version() const {
    return std::string(kSchemaVersion) + "/" + std::string(to_string(position)) + "/" +
           std::to_string(expected_count);
}

const PositionSchema& schema_for(Position position) {
    static const std::array<PositionSchema, 5> schemas{
        make_schema(Position::GK), make_schema(Position::DEF), make_schema(Position::MID),
        make_schema(Position::FWD), make_schema(Position::AM)};
    return schemas[static_cast<std::size_t>(position)];
}

double rolling_mean(std::span<const double> most_recent_first, int horizon) {
    return head_mean(most_recent_first.size(), horizon, [&](std::size_t i) { return most_recent_first[i]; });
}

std::vector<double> relevant_points_history(std::span<const VenuePoints> most_recent_first, bool upcoming_home) {
    std::vector<double> out;
    for (const auto& v : most_recent_first)
        if (v.home == upcoming_home) out.push_back(v.points);
    return out;
}

// ---------------------------------------------------------------------------

LeagueTable::LeagueTable(std::span<const std::string> teams, std::span<const Result> results) {
    for (const auto& t : teams) table_[t];
    for (const auto& r : results) {
        auto& h = table_[r.home];
        auto& a = table_[r.away];
        h.goals_scored += r.home_goals;
        h.goals_conceded += r.away_goals;
        a.goals_scored += r.away_goals;
        a.goals_conceded += r.home_goals;
    }
    std::vector<std::pair<std::string, Standing*>> order;
    for (auto& [name, s] : table_) order.emplace_back(name, &s);
    const auto key = [](const Standing* s) {
        return std::make_pair(s->goals_scored - s->goals_conceded, s->goals_scored);
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](const auto& a, const auto& b) { return key(a.second) > key(b.second); });
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && key(order[j + 1].second) == key(order[i].second)) ++j;
        // Positions i+1..j+1 share their mean.
        const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) order[k].second->rank = rank;
        i = j + 1;
    }
}

double LeagueTable::rank(const std::string& team) const {
    auto it = table_.find(team);
    if (it == table_.end()) fail("team not in league table: '" + team + "'");
    return it->second.rank;
}

double league_rank(const LeagueTable& table, const std::string& team) { return table.rank(team); }

// ---------------------------------------------------------------------------

HistoryIndex::HistoryIndex(std::span<const PlayerMatchRecord> records, std::span<const ingest::Fixture> fixtures) {
    std::set<std::tuple<std::string, Timestamp, std::string>> seen;
    std::map<std::string, std::set<std::string>> season_teams;
    for (const auto& f : fixtures) {
        season_teams[f.season].insert(f.home_team);
        season_teams[f.season].insert(f.away_team);
    }
    for (const auto& r : records) {
        players_[dataset::player_key(r.fpl)].push_back(&r);
        season_teams[r.fpl.season].insert(r.fpl.team);
        season_teams[r.fpl.season].insert(r.fpl.opponent_team);
        const auto add = [&](const std::string& team, const std::string& opp, bool home,
                             const ingest::RawUnderstatTeamMatch& stats) {
            if (!seen.emplace(team, r.kickoff, opp).second) return;
            TeamMatchEntry e;
            e.season = r.fpl.season;
            e.gameweek = r.fpl.gameweek;
            e.kickoff = r.kickoff;
            e.deadline = r.deadline;
            e.team = team;
            e.opponent = opp;
            e.home = home;
            e.stats = stats;
            teams_[team].push_back(std::move(e));
        };
        add(r.fpl.team, r.fpl.opponent_team, r.fpl.was_home, r.team_match);
        add(r.fpl.opponent_team, r.fpl.team, !r.fpl.was_home, r.opponent_match);
    }
    for (auto& [_, list] : players_)
        std::stable_sort(list.begin(), list.end(), [](const auto* a, const auto* b) {
            return std::tie(a->kickoff, a->fpl.opponent_team) < std::tie(b->kickoff, b->fpl.opponent_team);
        });
    for (auto& [_, list] : teams_)
        std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) {
            return std::tie(a.kickoff, a.opponent) < std::tie(b.kickoff, b.opponent);
        });
    for (const auto& [season, set] : season_teams) season_teams_[season].assign(set.begin(), set.end());
    for (const auto& [_, list] : teams_)
        for (const auto& e : list)
            if (e.home) season_home_matches_[e.season].push_back(&e);
    for (auto& [_, list] : season_home_matches_)
        std::sort(list.begin(), list.end(), [](const auto* a, const auto* b) {
            return std::tie(a->kickoff, a->team) < std::tie(b->kickoff, b->team);
        });
    for (auto& [_, list] : teams_)
        for (auto& e : list) {
            const LeagueTable t = table(e.season, e.deadline);
            e.rank_at_match = t.rank(e.team);
            e.opponent_rank_at_match = t.rank(e.opponent);
        }
}

std::vector<const PlayerMatchRecord*> HistoryIndex::player_history(const std::string& key, Timestamp cutoff) const {
    std::vector<const PlayerMatchRecord*> out;
    auto it = players_.find(key);
    if (it == players_.end()) return out;
    for (auto r = it->second.rbegin(); r != it->second.rend(); ++r)
        if ((*r)->kickoff < cutoff) out.push_back(*r);
    return out;
}

std::vector<const TeamMatchEntry*> HistoryIndex::team_history(const std::string& team, Timestamp cutoff) const {
    std::vector<const TeamMatchEntry*> out;
    auto it = teams_.find(team);
    if (it == teams_.end()) return out;
    for (auto e = it->second.rbegin(); e != it->second.rend(); ++e)
        if (e->kickoff < cutoff) out.push_back(&*e);
    return out;
}

LeagueTable HistoryIndex::table(const std::string& season, Timestamp cutoff) const {
    std::lock_guard lock(cache_mutex_);
    const auto key = std::make_pair(season, cutoff);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    std::vector<LeagueTable::Result> results;
    if (auto it = season_home_matches_.find(season); it != season_home_matches_.end())
        for (const auto* e : it->second)
            if (e->kickoff < cutoff)
                results.push_back({e->team, e->opponent, e->stats.goals_scored, e->stats.goals_conceded});
    static const std::vector<std::string> kNone;
    auto teams = season_teams_.find(season);
    const auto& list = teams == season_teams_.end() ? kNone : teams->second;
    LeagueTable t(list, results);
    cache_.emplace(key, t);
    return t;
}

// ---------------------------------------------------------------------------

FeatureContext context_for(const PlayerMatchRecord& r) {
    FeatureContext c;
    c.season = r.fpl.season;
    c.player_key = dataset::player_key(r.fpl);
    c.position = r.fpl.position;
    c.team = r.fpl.team;
    c.opponent = r.fpl.opponent_team;
    c.was_home = r.fpl.was_home;
    c.availability_pct = r.fpl.availability_pct;
    // Everything known at the gameweek deadline, nothing after.
    c.cutoff = r.deadline;
    return c;
}

Eigen::VectorXd build_feature_row(const HistoryIndex& index, const FeatureContext& ctx, const PositionSchema& schema) {
    if (ctx.position != schema.position)
        fail("feature schema " + schema.version() + " does not match position " +
             std::string(to_string(ctx.position)));
    const auto player = index.player_history(ctx.player_key, ctx.cutoff);
    const auto team = index.team_history(ctx.team, ctx.cutoff);
    const auto opp = index.team_history(ctx.opponent, ctx.cutoff);
    std::vector<const PlayerMatchRecord*> at_venue;
    for (const auto* r : player)
        if (r->fpl.was_home == ctx.was_home) at_venue.push_back(r);

    Eigen::VectorXd row(static_cast<Eigen::Index>(schema.size()));
    Eigen::Index k = 0;
    for (int h : kHorizons) {
        for (auto s : schema.player) {
            const auto& src = s == PlayerStat::relevant_points ? at_venue : player;
            row(k++) = head_mean(src.size(), h, [&](std::size_t i) { return player_value(*src[i], s); });
        }
        for (auto s : schema.team)
            row(k++) = head_mean(team.size(), h, [&](std::size_t i) { return team_value(*team[i], s); });
        for (auto s : schema.opponent)
            row(k++) = head_mean(opp.size(), h, [&](std::size_t i) { return team_value(*opp[i], s); });
    }
    if (!schema.status.empty()) {
        LeagueTable table;
        const bool needs_table = std::any_of(schema.status.begin(), schema.status.end(),
                                             [](auto s) { return s != StatusStat::availability; });
        if (needs_table) table = index.table(ctx.season, ctx.cutoff);
        for (auto s : schema.status) {
            switch (s) {
                case StatusStat::availability: row(k++) = ctx.availability_pct / 100.0; break;
                case StatusStat::team_league_rank: row(k++) = table.rank(ctx.team); break;
                case StatusStat::opponent_league_rank: row(k++) = table.rank(ctx.opponent); break;
            }
        }
    }
    return row;
}

FeatureMatrix build_feature_matrix(const HistoryIndex& index, std::span<const PlayerMatchRecord> records,
                                   Position position) {
    const auto& schema = schema_for(position);
    std::vector<const PlayerMatchRecord*> rows;
    for (const auto& r : records)
        if (r.fpl.position == position) rows.push_back(&r);
    FeatureMatrix m;
    m.position = position;
    m.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(schema.size()));
    m.target.resize(static_cast<Eigen::Index>(rows.size()));
    m.meta.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = *rows[i];
        const auto ei = static_cast<Eigen::Index>(i);
        m.values.row(ei) = build_feature_row(index, context_for(r), schema).transpose();
        m.target(ei) = r.fpl.total_points;
        m.meta.push_back({r.fpl.season, r.fpl.gameweek, r.fpl.player_id, r.fpl.player_name, r.fpl.team,
                          r.fpl.opponent_team, r.fpl.was_home, r.kickoff, r.fpl.minutes, r.fpl.total_points});
    }
    return m;
}

FeatureMatrix concat(std::span<const FeatureMatrix* const> parts) {
    FeatureMatrix out;
    Eigen::Index rows = 0, cols = -1;
    for (const auto* p : parts) {
        rows += p->rows();
        if (cols >= 0 && p->values.cols() != cols) fail("cannot concatenate feature matrices of different widths");
        cols = p->values.cols();
        out.position = p->position;
    }
    out.values.resize(rows, std::max<Eigen::Index>(cols, 0));
    out.target.resize(rows);
    Eigen::Index at = 0;
    for (const auto* p : parts) {
        out.values.middleRows(at, p->rows()) = p->values;
        out.target.segment(at, p->rows()) = p->target;
        out.meta.insert(out.meta.end(), p->meta.begin(), p->meta.end());
        at += p->rows();
    }
    return out;
}

void export_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& m, const Eigen::VectorXd* weights) {
    const auto& schema = schema_for(m.position);
    std::vector<std::string> header{"season", "gameweek", "player_id", "name", "team", "opponent",
                                    "was_home", "minutes", "total_points"};
    header.insert(header.end(), schema.names.begin(), schema.names.end());
    if (weights) header.emplace_back("sample_weight");
    csv::Table t(header);
    t.add_comment("schema=" + schema.version());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const auto& meta = m.meta[static_cast<std::size_t>(i)];
        std::vector<std::string> row{meta.season, std::to_string(meta.gameweek), meta.player_id, meta.name,
                                     meta.team, meta.opponent, meta.was_home ? "true" : "false",
                                     std::to_string(meta.minutes), std::to_string(meta.points)};
        for (Eigen::Index j = 0; j < m.values.cols(); ++j) row.push_back(format_double(m.values(i, j)));
        if (weights) row.push_back(format_double((*weights)(i)));
        t.add_row(std::move(row));
    }
    t.write(path);
}

}  // namespace fplf::features
