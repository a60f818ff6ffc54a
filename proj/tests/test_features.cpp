#include <doctest.h>

#include <random>
#include <set>
#include <tuple>

#include "fplf/csv.hpp"
#include "fplf/features.hpp"
#include "fplf/synthetic.hpp"
#include "support.hpp"

using namespace fplf;
using namespace fplf::features;
using dataset::PlayerMatchRecord;

namespace {

std::vector<PlayerMatchRecord> synthetic_records() {
    const auto league = synthetic::generate_league({});
    std::vector<PlayerMatchRecord> all;
    for (const auto& s : league.seasons) {
        auto j = dataset::join_sources(s, league.aliases).records;
        all.insert(all.end(), j.begin(), j.end());
    }
    return all;
}

Eigen::Index column(const PositionSchema& s, const std::string& name) {
    for (std::size_t i = 0; i < s.names.size(); ++i)
        if (s.names[i] == name) return static_cast<Eigen::Index>(i);
    FAIL("missing feature " << name);
    return -1;
}

double mean_head(const std::vector<double>& v, int h) {
    const std::size_t k = std::min<std::size_t>(v.size(), static_cast<std::size_t>(h));
    if (k == 0) return 0.0;
    double s = 0;
    for (std::size_t i = 0; i < k; ++i) s += v[i];
    return s / static_cast<double>(k);
}

// Average rank with ties over (goal difference, goals scored), by counting.
double brute_rank(const std::map<std::string, std::pair<int, int>>& gf_ga, const std::string& team) {
    const auto key = [&](const std::string& t) {
        const auto [f, a] = gf_ga.at(t);
        return std::make_pair(f - a, f);
    };
    int better = 0, tied = 0;
    for (const auto& [t, _] : gf_ga) {
        if (key(t) > key(team)) ++better;
        else if (key(t) == key(team)) ++tied;
    }
    return better + (1.0 + tied) / 2.0;
}

struct Oracle {
    const std::vector<PlayerMatchRecord>& all;

    // Player values strictly before the cutoff, most recent first.
    std::vector<double> player(const PlayerMatchRecord& r, bool venue_only,
                               double (*get)(const PlayerMatchRecord&)) const {
        std::vector<std::pair<Timestamp, double>> v;
        for (const auto& o : all)
            if (o.fpl.player_id == r.fpl.player_id && o.fpl.team == r.fpl.team && o.kickoff < r.deadline &&
                (!venue_only || o.fpl.was_home == r.fpl.was_home))
                v.push_back({o.kickoff, get(o)});
        std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
        std::vector<double> out;
        for (const auto& [_, x] : v) out.push_back(x);
        return out;
    }

    std::vector<double> team_goals(const std::string& team, Timestamp cutoff) const {
        std::map<std::pair<Timestamp, std::string>, double> m;
        for (const auto& o : all) {
            if (o.kickoff >= cutoff) continue;
            if (o.fpl.team == team) m[{o.kickoff, o.fpl.opponent_team}] = o.team_match.goals_scored;
            if (o.fpl.opponent_team == team) m[{o.kickoff, o.fpl.team}] = o.opponent_match.goals_scored;
        }
        std::vector<double> out;
        for (auto it = m.rbegin(); it != m.rend(); ++it) out.push_back(it->second);
        return out;
    }

    double rank(const std::string& season, const std::string& team, Timestamp cutoff) const {
        std::map<std::string, std::pair<int, int>> table;
        std::set<std::tuple<Timestamp, std::string, std::string>> seen;
        for (const auto& o : all) {
            if (o.fpl.season != season) continue;
            table[o.fpl.team];
            table[o.fpl.opponent_team];
            if (o.kickoff >= cutoff) continue;
            const std::string& home = o.fpl.was_home ? o.fpl.team : o.fpl.opponent_team;
            const std::string& away = o.fpl.was_home ? o.fpl.opponent_team : o.fpl.team;
            if (!seen.emplace(o.kickoff, home, away).second) continue;
            const int hg = o.fpl.was_home ? o.team_match.goals_scored : o.opponent_match.goals_scored;
            const int ag = o.fpl.was_home ? o.opponent_match.goals_scored : o.team_match.goals_scored;
            table[home].first += hg;
            table[home].second += ag;
            table[away].first += ag;
            table[away].second += hg;
        }
        return brute_rank(table, team);
    }
};

double points_of(const PlayerMatchRecord& r) { return r.fpl.total_points; }
double minutes_of(const PlayerMatchRecord& r) { return r.fpl.minutes; }

}  // namespace

TEST_CASE("schemas per position") {
    const std::map<Position, std::size_t> want{
        {Position::GK, 196}, {Position::DEF, 206}, {Position::MID, 206}, {Position::FWD, 206}, {Position::AM, 122}};
    for (auto p : kAllPositions) {
        const auto& s = schema_for(p);
        CHECK(s.size() == want.at(p));
        CHECK(s.size() == kHorizons.size() * (s.player.size() + s.team.size() + s.opponent.size()) + s.status.size());
        CHECK(std::set<std::string>(s.names.begin(), s.names.end()).size() == s.size());
        CHECK(s.names.front() == "xp_fpl_points_h1");
        CHECK(s.version() == "fplf-features-v1/" + std::string(to_string(p)) + "/" + std::to_string(want.at(p)));
    }
    CHECK(schema_for(Position::GK).names.back() == "xs_availability");
    CHECK(schema_for(Position::FWD).names.back() == "xs_availability");
    CHECK(schema_for(Position::AM).names.back() == "xs_opponent_league_rank");
    CHECK(column(schema_for(Position::MID), "xo_ppda_def_h38") >= 0);
    CHECK(column(schema_for(Position::AM), "xt_league_rank_h5") >= 0);
}

TEST_CASE("rolling means and venue filter") {
    const std::vector<double> v{3, 1, 2};
    CHECK(rolling_mean(v, 1) == 3.0);
    CHECK(rolling_mean(v, 3) == 2.0);
    CHECK(rolling_mean(v, 5) == 2.0);
    CHECK(rolling_mean(std::vector<double>{}, 3) == 0.0);
    const std::vector<VenuePoints> h{{true, 6}, {false, 1}, {true, 2}, {false, 9}};
    CHECK(relevant_points_history(h, true) == std::vector<double>{6, 2});
    CHECK(relevant_points_history(h, false) == std::vector<double>{1, 9});
}

TEST_CASE("league table ranks agree with counting") {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> goals(0, 3);
    const std::vector<std::string> teams{"A", "B", "C", "D", "E", "F"};
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<LeagueTable::Result> results;
        std::map<std::string, std::pair<int, int>> gf_ga;
        for (const auto& t : teams) gf_ga[t];
        const int n = trial % 12;
        for (int i = 0; i < n; ++i) {
            const auto& h = teams[static_cast<std::size_t>(i % 6)];
            const auto& a = teams[static_cast<std::size_t>((i + 1 + trial) % 6)];
            if (h == a) continue;
            const int hg = goals(rng), ag = goals(rng);
            results.push_back({h, a, hg, ag});
            gf_ga[h].first += hg;
            gf_ga[h].second += ag;
            gf_ga[a].first += ag;
            gf_ga[a].second += hg;
        }
        const LeagueTable t(teams, results);
        double sum = 0;
        for (const auto& team : teams) {
            REQUIRE(t.rank(team) == brute_rank(gf_ga, team));
            sum += t.rank(team);
        }
        CHECK(sum == 21.0);
    }
    const LeagueTable empty(teams, {});
    for (const auto& team : teams) CHECK(empty.rank(team) == 3.5);
    CHECK_THROWS(empty.rank("Z"));
}

TEST_CASE("feature rows agree with a direct recomputation") {
    const auto all = synthetic_records();
    const HistoryIndex index(all);
    const Oracle oracle{all};
    int checked = 0;
    for (std::size_t i = 0; i < all.size(); i += 7) {
        const auto& r = all[i];
        const auto& s = schema_for(r.fpl.position);
        const auto row = build_feature_row(index, context_for(r), s);
        REQUIRE(row.size() == static_cast<Eigen::Index>(s.size()));
        const auto pts = oracle.player(r, false, points_of);
        const auto venue = oracle.player(r, true, points_of);
        const auto team = oracle.team_goals(r.fpl.team, r.deadline);
        const auto opp = oracle.team_goals(r.fpl.opponent_team, r.deadline);
        for (int h : kHorizons) {
            const std::string sfx = "_h" + std::to_string(h);
            CHECK(row(column(s, "xp_fpl_points" + sfx)) == doctest::Approx(mean_head(pts, h)));
            CHECK(row(column(s, "xp_relevant_fpl_points" + sfx)) == doctest::Approx(mean_head(venue, h)));
            CHECK(row(column(s, "xt_goals_scored" + sfx)) == doctest::Approx(mean_head(team, h)));
            CHECK(row(column(s, "xo_goals_scored" + sfx)) == doctest::Approx(mean_head(opp, h)));
            if (r.fpl.position != Position::AM) {
                const auto mins = oracle.player(r, false, minutes_of);
                CHECK(row(column(s, "xp_minutes" + sfx)) == doctest::Approx(mean_head(mins, h)));
            }
        }
        if (r.fpl.position == Position::AM) {
            CHECK(row(column(s, "xs_team_league_rank")) == oracle.rank(r.fpl.season, r.fpl.team, r.deadline));
            CHECK(row(column(s, "xs_opponent_league_rank")) ==
                  oracle.rank(r.fpl.season, r.fpl.opponent_team, r.deadline));
        } else {
            CHECK(row(column(s, "xs_availability")) == r.fpl.availability_pct / 100.0);
        }
        ++checked;
    }
    CHECK(checked > 100);
}

TEST_CASE("history is cut strictly before the deadline") {
    const auto all = synthetic_records();
    const HistoryIndex index(all);
    std::mt19937_64 rng(4);
    for (std::size_t i = 0; i < all.size(); i += 53) {
        const auto& target = all[i];
        // Perturb everything at or after the target's deadline.
        auto changed = all;
        for (auto& r : changed)
            if (r.kickoff >= target.deadline) {
                r.fpl.total_points += 7;
                r.fpl.minutes = 90 - r.fpl.minutes;
                r.team_match.goals_scored += 2;
                r.opponent_match.goals_scored += 1;
                r.team_match.xg *= 3;
                if (r.understat_player) r.understat_player->xg += 1;
            }
        const HistoryIndex other(changed);
        const auto& s = schema_for(target.fpl.position);
        const auto ctx = context_for(target);
        REQUIRE(build_feature_row(index, ctx, s) == build_feature_row(other, ctx, s));
        for (const auto* r : index.player_history(ctx.player_key, ctx.cutoff)) CHECK(r->kickoff < ctx.cutoff);
        for (const auto* e : index.team_history(ctx.team, ctx.cutoff)) CHECK(e->kickoff < ctx.cutoff);
    }
}

TEST_CASE("feature matrices and export") {
    const auto all = synthetic_records();
    const HistoryIndex index(all);
    const auto m = build_feature_matrix(index, all, Position::DEF);
    std::size_t n_def = 0;
    for (const auto& r : all) n_def += r.fpl.position == Position::DEF;
    CHECK(static_cast<std::size_t>(m.rows()) == n_def);
    CHECK(m.values.cols() == 206);
    CHECK(m.meta.size() == n_def);
    for (Eigen::Index i = 0; i < m.rows(); ++i) CHECK(m.target(i) == m.meta[static_cast<std::size_t>(i)].points);

    const FeatureMatrix* parts[] = {&m, &m};
    const auto twice = concat(parts);
    CHECK(twice.rows() == 2 * m.rows());
    CHECK(twice.values.bottomRows(m.rows()) == m.values);

    test::TempDir dir("features");
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(m.rows());
    export_feature_matrix(dir / "def.csv", m, &w);
    const auto t = csv::Table::read(dir / "def.csv");
    CHECK(t.size() == n_def);
    CHECK(t.comments() == std::vector<std::string>{"schema=fplf-features-v1/DEF/206"});
    CHECK(t.header().size() == 9 + 206 + 1);
    CHECK(t.get_double(3, "xp_fpl_points_h5") == m.values(3, column(schema_for(Position::DEF), "xp_fpl_points_h5")));
    for (const auto& r : all)
        if (r.fpl.position != Position::AM) {
            CHECK_THROWS(build_feature_row(index, context_for(r), schema_for(Position::AM)));
            break;
        }
}

TEST_CASE("min-max scaler") {
    Eigen::MatrixXd X(3, 3);
    X << 0, 5, 1, 10, 5, 2, 5, 5, 3;
    Eigen::VectorXd y(3);
    y << -2, 8, 3;
    const auto s = ScalerParams::fit(X, y);
    const Eigen::MatrixXd Z = s.transform(X);
    CHECK(Z.col(0) == Eigen::Vector3d(0, 1, 0.5));
    CHECK(Z.col(1).isZero());
    Eigen::RowVector3d out;
    out << 20, 7, -1;
    const Eigen::VectorXd clipped = s.transform_row(out.transpose());
    CHECK(clipped(0) == 1.0);
    CHECK(clipped(2) == 0.0);
    CHECK(s.normalize_target(3) == 0.5);
    CHECK(s.denormalize_target(0.5) == 3.0);
    CHECK(s.normalize_target(100) == 1.0);
    CHECK_THROWS(s.transform(Eigen::MatrixXd::Zero(1, 2)));
    CHECK_THROWS(ScalerParams::fit(Eigen::MatrixXd(0, 3), Eigen::VectorXd(0)));
}
