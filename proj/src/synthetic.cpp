#include "fplf/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace fplf::synthetic {

namespace {

const std::vector<std::string> kTeamNames{
    "Ashford",  "Bexley",   "Camden",   "Dunmore",  "Ealing",   "Fairport", "Greywick",
    "Harwood",  "Ingleby",  "Jarrow",   "Kelso",    "Lydford",  "Marston",  "Northam",
    "Oakhurst", "Penrith",  "Quarley",  "Redcliff", "Stanwick", "Thornby"};

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    bool bernoulli(double p) { return uniform() < p; }
    double normal() {
        const double u1 = std::max(uniform(), 1e-300);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
    int poisson(double lambda) {
        const double limit = std::exp(-lambda);
        int k = 0;
        double p = uniform();
        while (p > limit) {
            ++k;
            p *= uniform();
        }
        return k;
    }
    std::size_t pick(const std::vector<double>& weights) {
        const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
        double u = uniform() * total;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (u < weights[i]) return i;
            u -= weights[i];
        }
        return weights.size() - 1;
    }

private:
    std::mt19937_64 engine_;
};

struct Player {
    std::string id;
    std::string name;
    Position position;
    int team;
    double skill;
    int injured_for = 0;  // gameweeks still to miss
    bool doubtful = false;
};

struct Team {
    std::string name;
    double attack;
    double defence;
};

struct Pairing {
    int home;
    int away;
};

// Circle-method double round robin.
std::vector<std::vector<Pairing>> schedule(int n) {
    std::vector<int> ring(static_cast<std::size_t>(n));
    std::iota(ring.begin(), ring.end(), 0);
    std::vector<std::vector<Pairing>> rounds;
    for (int r = 0; r < n - 1; ++r) {
        std::vector<Pairing> games;
        for (int i = 0; i < n / 2; ++i) {
            int a = ring[static_cast<std::size_t>(i)], b = ring[static_cast<std::size_t>(n - 1 - i)];
            if ((r + i) % 2) std::swap(a, b);
            games.push_back({a, b});
        }
        rounds.push_back(std::move(games));
        std::rotate(ring.begin() + 1, ring.end() - 1, ring.end());
    }
    const auto first = rounds;
    for (const auto& games : first) {
        std::vector<Pairing> back;
        for (const auto& g : games) back.push_back({g.away, g.home});
        rounds.push_back(std::move(back));
    }
    return rounds;
}

double position_goal_weight(Position p) {
    switch (p) {
        case Position::DEF: return 0.25;
        case Position::MID: return 1.0;
        case Position::FWD: return 2.0;
        default: return 0.0;
    }
}

double position_assist_weight(Position p) {
    switch (p) {
        case Position::DEF: return 0.5;
        case Position::MID: return 1.5;
        case Position::FWD: return 1.0;
        default: return 0.0;
    }
}

int goal_points(Position p) {
    switch (p) {
        case Position::GK:
        case Position::DEF: return 6;
        case Position::MID: return 5;
        default: return 4;
    }
}

struct Appearance {
    Player* player;
    ingest::RawFplPlayerGW row;
    double goal_weight = 0.0;
    double assist_weight = 0.0;
    double xg = 0.0;
    double xa = 0.0;
};

}  // namespace

League generate_league(const LeagueConfig& config) {
    if (config.n_teams < 2 || config.n_teams % 2 || config.n_teams > static_cast<int>(kTeamNames.size()))
        throw Error(ErrorKind::config, "synthetic league needs an even team count between 2 and " +
                                           std::to_string(kTeamNames.size()));
    if (config.seasons.empty()) throw Error(ErrorKind::config, "synthetic league needs at least one season");
    Rng rng(config.seed);
    League league;

    std::vector<Team> teams;
    for (int t = 0; t < config.n_teams; ++t)
        teams.push_back({kTeamNames[static_cast<std::size_t>(t)], std::exp(0.25 * rng.normal()),
                         std::exp(0.25 * rng.normal())});

    std::vector<Player> players;
    const std::vector<std::pair<Position, int>> squad{{Position::GK, config.goalkeepers},
                                                      {Position::DEF, config.defenders},
                                                      {Position::MID, config.midfielders},
                                                      {Position::FWD, config.forwards},
                                                      {Position::AM, config.managers}};
    for (int t = 0; t < config.n_teams; ++t) {
        int slot = 0;
        for (const auto& [pos, count] : squad)
            for (int i = 0; i < count; ++i) {
                Player p;
                p.id = std::to_string(100 * (t + 1) + slot++);
                p.name = teams[static_cast<std::size_t>(t)].name + " " + std::string(to_string(pos)) + " " +
                         std::to_string(i + 1);
                p.position = pos;
                p.team = t;
                p.skill = 0.2 + 0.8 * rng.uniform();
                league.skill[p.id] = p.skill;
                players.push_back(std::move(p));
            }
    }

    std::map<std::string, int> fold_of;
    std::vector<std::string> sorted_names;
    for (const auto& t : teams) sorted_names.push_back(t.name);
    std::sort(sorted_names.begin(), sorted_names.end());
    for (std::size_t i = 0; i < sorted_names.size(); ++i)
        fold_of[sorted_names[i]] = static_cast<int>(i) % config.n_folds;
    league.folds = dataset::FoldAssignment(fold_of, std::min(config.n_folds, config.n_teams));

    const auto rounds = schedule(config.n_teams);
    for (std::size_t s = 0; s < config.seasons.size(); ++s) {
        const std::string& season = config.seasons[s];
        if (s > 0) {
            for (auto& t : teams) {
                t.attack *= std::exp(0.08 * rng.normal());
                t.defence *= std::exp(0.08 * rng.normal());
            }
            for (auto& p : players) p.skill = std::clamp(p.skill + 0.05 * rng.normal(), 0.1, 1.0);
        }
        for (auto& p : players) {
            p.injured_for = 0;
            p.doubtful = false;
        }
        ingest::SeasonData data;
        data.season = season;
        for (const auto& t : teams) league.aliases.teams[season][t.name] = "US-" + t.name;
        for (const auto& p : players)
            if (p.position != Position::AM) league.aliases.players[season][p.id] = "us" + p.id;

        const Timestamp season_start =
            parse_timestamp(std::to_string(season_start_year(season)) + "-08-12T14:00:00Z");
        for (std::size_t r = 0; r < rounds.size(); ++r) {
            const int gw = static_cast<int>(r) + 1;
            const Timestamp base = season_start + static_cast<Timestamp>(r) * 7 * 86400;
            const Timestamp deadline = base - 19 * 3600 - 1800;

            // Availability is announced before the round.
            std::vector<int> availability(players.size(), 100);
            for (std::size_t i = 0; i < players.size(); ++i) {
                auto& p = players[i];
                if (p.injured_for > 0) {
                    availability[i] = p.injured_for == 1 && p.doubtful ? 50 : 0;
                } else if (p.position != Position::AM && rng.bernoulli(0.04)) {
                    availability[i] = 75;
                }
            }

            for (std::size_t g = 0; g < rounds[r].size(); ++g) {
                const auto& pairing = rounds[r][g];
                const Timestamp kickoff = base + static_cast<Timestamp>(g % 4) * 3 * 3600;
                const auto& home = teams[static_cast<std::size_t>(pairing.home)];
                const auto& away = teams[static_cast<std::size_t>(pairing.away)];
                data.fixtures.push_back({season, gw, home.name, away.name, kickoff, deadline});

                const double lambda_home = 1.35 * home.attack * away.defence * 1.1;
                const double lambda_away = 1.35 * away.attack * home.defence / 1.1;
                const int goals[2] = {rng.poisson(lambda_home), rng.poisson(lambda_away)};
                const double xg[2] = {lambda_home * (0.85 + 0.3 * rng.uniform()),
                                      lambda_away * (0.85 + 0.3 * rng.uniform())};
                const int side_team[2] = {pairing.home, pairing.away};

                std::vector<Appearance> apps[2];
                for (int side = 0; side < 2; ++side) {
                    for (std::size_t i = 0; i < players.size(); ++i) {
                        auto& p = players[i];
                        if (p.team != side_team[side]) continue;
                        Appearance a;
                        a.player = &p;
                        auto& row = a.row;
                        row.player_id = p.id;
                        row.player_name = p.name;
                        row.position = p.position;
                        row.team = teams[static_cast<std::size_t>(p.team)].name;
                        row.opponent_team = teams[static_cast<std::size_t>(side_team[1 - side])].name;
                        row.was_home = side == 0;
                        row.gameweek = gw;
                        row.season = season;
                        row.availability_pct = availability[i];
                        if (p.position == Position::AM) {
                            row.minutes = 90;
                        } else if (availability[i] > 0) {
                            const double play = availability[i] / 100.0 *
                                                (p.position == Position::GK ? 0.97 : 0.55 + 0.45 * p.skill);
                            if (rng.bernoulli(play))
                                row.minutes = rng.bernoulli(0.45 + 0.55 * p.skill)
                                                  ? 90
                                                  : 15 + static_cast<int>(50 * rng.uniform());
                        }
                        const double share = row.minutes / 90.0;
                        a.goal_weight = position_goal_weight(p.position) * p.skill * p.skill * share;
                        a.assist_weight = position_assist_weight(p.position) * p.skill * share;
                        apps[side].push_back(std::move(a));
                    }
                    // Attribute goals and assists to players on the pitch.
                    std::vector<double> gw_weights, as_weights;
                    for (const auto& a : apps[side]) {
                        gw_weights.push_back(a.goal_weight);
                        as_weights.push_back(a.assist_weight);
                    }
                    const double gsum = std::accumulate(gw_weights.begin(), gw_weights.end(), 0.0);
                    const double asum = std::accumulate(as_weights.begin(), as_weights.end(), 0.0);
                    for (std::size_t k = 0; k < apps[side].size(); ++k) {
                        if (gsum > 0) apps[side][k].xg = xg[side] * gw_weights[k] / gsum;
                        if (asum > 0) apps[side][k].xa = 0.7 * xg[side] * as_weights[k] / asum;
                    }
                    if (gsum > 0)
                        for (int goal = 0; goal < goals[side]; ++goal) {
                            const auto scorer = rng.pick(gw_weights);
                            ++apps[side][scorer].row.goals_scored;
                            if (rng.bernoulli(0.7) && asum > as_weights[scorer]) {
                                auto w = as_weights;
                                w[scorer] = 0.0;
                                ++apps[side][rng.pick(w)].row.assists;
                            }
                        }
                }

                std::vector<Appearance*> everyone;
                for (int side = 0; side < 2; ++side) {
                    const int conceded = goals[1 - side];
                    for (auto& a : apps[side]) {
                        auto& row = a.row;
                        const Position pos = row.position;
                        if (pos == Position::AM) {
                            row.goals_scored = goals[side];
                            row.goals_conceded = conceded;
                            const int result = goals[side] > conceded ? 6 : goals[side] == conceded ? 3 : 0;
                            row.total_points = result + goals[side] + (conceded == 0 ? 2 : 0);
                            row.bps = 10 * result;
                            row.influence = 5.0 * result;
                            continue;
                        }
                        if (row.minutes == 0) continue;
                        const bool full = row.minutes >= 60;
                        row.goals_conceded = full ? conceded : 0;
                        if (pos == Position::GK) row.saves = rng.poisson(1.5 + 1.2 * xg[1 - side]);
                        row.yellow_cards = rng.bernoulli(0.07) ? 1 : 0;
                        int pts = full ? 2 : 1;
                        pts += goal_points(pos) * row.goals_scored + 3 * row.assists;
                        if (full && conceded == 0)
                            pts += pos == Position::GK || pos == Position::DEF ? 4 : pos == Position::MID ? 1 : 0;
                        if (pos == Position::GK || pos == Position::DEF) pts -= row.goals_conceded / 2;
                        pts += row.saves / 3 - row.yellow_cards;
                        row.total_points = pts;
                        row.bps = 3 * (row.minutes / 30) + 24 * row.goals_scored + 9 * row.assists +
                                  (full && conceded == 0 && pos != Position::FWD ? 12 : 0) + 2 * row.saves -
                                  3 * row.yellow_cards + static_cast<int>(6 * rng.uniform());
                        row.influence = std::round(10.0 * std::max(0.0, 12.0 * row.goals_scored + 6.0 * row.assists +
                                                           0.4 * row.bps + 2.0 * rng.uniform())) / 10.0;
                        row.creativity = std::round(10.0 * std::max(0.0, 30.0 * a.xa + 4.0 * a.player->skill * rng.uniform())) / 10.0;
                        row.threat = std::round(10.0 * std::max(0.0, 45.0 * a.xg + 4.0 * a.player->skill * rng.uniform())) / 10.0;
                        everyone.push_back(&a);
                    }
                }
                // Bonus to the three highest BPS scores of the match.
                std::stable_sort(everyone.begin(), everyone.end(),
                                 [](const Appearance* x, const Appearance* y) { return x->row.bps > y->row.bps; });
                for (std::size_t k = 0; k < everyone.size() && k < 3; ++k) {
                    everyone[k]->row.bonus = 3 - static_cast<int>(k);
                    everyone[k]->row.total_points += everyone[k]->row.bonus;
                }

                for (int side = 0; side < 2; ++side) {
                    const auto& team = teams[static_cast<std::size_t>(side_team[side])];
                    const auto& opp = teams[static_cast<std::size_t>(side_team[1 - side])];
                    ingest::RawUnderstatTeamMatch tm;
                    tm.team_key = "US-" + team.name;
                    tm.match_date = kickoff;
                    tm.xg = xg[side];
                    tm.xga = xg[1 - side];
                    tm.goals_scored = goals[side];
                    tm.goals_conceded = goals[1 - side];
                    tm.deep = rng.poisson(5.0 * team.attack / opp.defence);
                    tm.ppda_att = std::round(10.0 * (150 + 80 * rng.uniform())) / 10.0;
                    tm.ppda_def = std::round(10.0 * (14 + 8 * rng.uniform() / team.attack)) / 10.0;
                    data.understat_teams.push_back(tm);
                    for (auto& a : apps[side]) {
                        data.fpl.push_back(a.row);
                        if (a.row.position == Position::AM || a.row.minutes == 0) continue;
                        ingest::RawUnderstatPlayerMatch pm;
                        pm.player_key = "us" + a.row.player_id;
                        pm.match_date = kickoff;
                        pm.xg = std::round(1e4 * a.xg) / 1e4;
                        pm.xa = std::round(1e4 * a.xa) / 1e4;
                        pm.shots = rng.poisson(6.0 * a.xg) + a.row.goals_scored;
                        pm.key_passes = rng.poisson(8.0 * a.xa) + a.row.assists;
                        pm.xg_chain = std::round(1e4 * (a.xg + a.xa + 0.1 * xg[side] * a.row.minutes / 90.0)) / 1e4;
                        pm.xg_buildup = std::round(1e4 * (a.row.position == Position::FWD ? 0.02 : 0.06) * xg[side] *
                                                   a.row.minutes / 90.0) / 1e4;
                        data.understat_players.push_back(pm);
                    }
                }
                // Opponent-facing pressing numbers mirror the other side's.
                auto& last = data.understat_teams;
                auto& h = last[last.size() - 2];
                auto& w = last[last.size() - 1];
                h.deep_allowed = w.deep;
                w.deep_allowed = h.deep;
                h.ppda_allowed_att = w.ppda_att;
                h.ppda_allowed_def = w.ppda_def;
                w.ppda_allowed_att = h.ppda_att;
                w.ppda_allowed_def = h.ppda_def;
            }

            // Injuries picked up this round keep players out of later rounds.
            for (auto& p : players) {
                if (p.injured_for > 0) {
                    --p.injured_for;
                    continue;
                }
                if (p.position != Position::AM && rng.bernoulli(0.05)) {
                    p.injured_for = 1 + static_cast<int>(3 * rng.uniform());
                    p.doubtful = rng.bernoulli(0.5);
                }
            }
        }
        league.seasons.push_back(std::move(data));
    }
    return league;
}

void write_league(const std::filesystem::path& dir, const League& league) {
    std::filesystem::create_directories(dir / "seasons");
    for (const auto& s : league.seasons) ingest::write_historical_season(dir / "seasons" / s.season, s);
    league.aliases.write(dir / "aliases.csv");
    league.folds.write(dir / "folds.csv");
}

}  // namespace fplf::synthetic
