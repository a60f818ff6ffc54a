#include <doctest.h>

#include <random>
#include <tuple>

#include "fplf/dataset.hpp"
#include "fplf/synthetic.hpp"
#include "reference.hpp"
#include "support.hpp"

using namespace fplf;
using namespace fplf::dataset;

namespace {

PlayerMatchRecord random_record(std::mt19937_64& rng, int id, bool with_understat) {
    std::uniform_int_distribution<int> small(0, 2), minutes(0, 4), points(-1, 6), pos(0, 3), gw(1, 38);
    PlayerMatchRecord r;
    r.fpl.season = "2022-23";
    r.fpl.player_id = std::to_string(id);
    r.fpl.gameweek = gw(rng);
    r.fpl.position = static_cast<Position>(pos(rng));
    // Coarse minutes so that exact distance ties occur.
    r.fpl.minutes = minutes(rng) * 30;
    r.fpl.goals_scored = r.fpl.minutes ? small(rng) : 0;
    r.fpl.assists = r.fpl.minutes ? small(rng) : 0;
    r.fpl.total_points = r.fpl.minutes ? points(rng) : 0;
    r.kickoff = 1'600'000'000 + r.fpl.gameweek * 604800;
    if (with_understat) {
        RawUnderstatPlayerMatch u;
        u.player_key = "u" + r.fpl.player_id;
        u.match_date = r.kickoff;
        u.xg = static_cast<double>(id) / 100.0;
        u.shots = id % 5;
        r.understat_player = u;
    }
    return r;
}

long long id_number(const PlayerMatchRecord& r) { return std::stoll(r.fpl.player_id); }

// Exhaustive nearest donor: status match when possible, then (assists, goals)
// L1 distance, then squared distance in (minutes, points, position one-hot).
std::pair<const PlayerMatchRecord*, bool> brute_force_donor(const PlayerMatchRecord& t,
                                                            const std::vector<PlayerMatchRecord>& donors) {
    const auto played = [](const PlayerMatchRecord& r) { return r.fpl.minutes > 0; };
    bool any_same_status = false;
    for (const auto& d : donors) any_same_status |= played(d) == played(t);
    using Key = std::tuple<long long, long long, long long, std::string, int, Timestamp>;
    const PlayerMatchRecord* best = nullptr;
    Key best_key;
    for (const auto& d : donors) {
        if (any_same_status && played(d) != played(t)) continue;
        const long long l1 = std::abs(d.fpl.assists - t.fpl.assists) + std::abs(d.fpl.goals_scored - t.fpl.goals_scored);
        const long long dm = d.fpl.minutes - t.fpl.minutes, dp = d.fpl.total_points - t.fpl.total_points;
        const long long pos = d.fpl.position == t.fpl.position ? 0 : 2;  // one-hot difference, squared
        const Key k{l1, dm * dm + dp * dp + pos, id_number(d), d.fpl.season, d.fpl.gameweek, d.kickoff};
        if (!best || k < best_key) {
            best = &d;
            best_key = k;
        }
    }
    return {best, best && (std::get<0>(best_key) > 0 || !any_same_status)};
}

std::string donor_label(const PlayerMatchRecord& d) {
    return d.fpl.season + "|" + d.fpl.player_id + "|" + std::to_string(d.fpl.gameweek);
}

}  // namespace

TEST_CASE("fold table over the development rosters") {
    const auto seasons = test::development_team_seasons();
    CHECK(seasons.size() == 80);
    const auto folds = assign_folds(seasons);
    CHECK(folds.teams().size() == 26);
    CHECK(test::render_fold_table(folds, seasons) == test::fold_table_lines());
    CHECK(fold_team_season_counts(seasons, folds) == std::vector<int>{16, 16, 16, 16, 16});
    CHECK(folds.fold_of("Man Utd") == 0);
    CHECK(folds.fold_of("Spurs") == 1);
    CHECK(folds.fold_of("Nott'm Forest") == 3);

    std::vector<TeamSeason> unknown{{"Ipswich", "2024-25"}};
    CHECK_THROWS(assign_folds(unknown));
}

TEST_CASE("fold labels and files") {
    CHECK(fold_label(0) == "C1");
    CHECK(parse_fold("C5") == 4);
    CHECK(parse_fold(" c2 ") == 1);
    for (const char* bad : {"C0", "5", "C", "Cx", "C1a"}) {
        try {
            parse_fold(bad);
            FAIL("accepted " << bad);
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::config);
        }
    }
    test::TempDir dir("folds");
    FoldAssignment::development_table().write(dir / "folds.csv");
    CHECK(FoldAssignment::read(dir / "folds.csv") == FoldAssignment::development_table());
}

TEST_CASE("joining the synthetic league") {
    const auto league = synthetic::generate_league({});
    for (const auto& season : league.seasons) {
        const auto j = join_sources(season, league.aliases);
        CHECK(j.records.size() == season.fpl.size());
        for (const auto& r : j.records) {
            CHECK(r.team_match.team_key == league.aliases.team_key(season.season, r.fpl.team));
            CHECK(r.opponent_match.team_key == league.aliases.team_key(season.season, r.fpl.opponent_team));
            CHECK(r.deadline < r.kickoff);
            CHECK(std::abs(day_number(r.team_match.match_date) - day_number(r.kickoff)) <= 1);
            if (r.fpl.position != Position::AM) REQUIRE(r.understat_player);
            if (r.understat_player && r.fpl.minutes == 0) CHECK(r.understat_player->xg == 0.0);
        }
        for (const auto& u : j.unmatched_players) CHECK(u.rfind(season.season + "|", 0) == 0);
        CHECK_FALSE(j.unmatched_players.empty());

        auto broken = league.aliases;
        broken.teams[season.season].erase(season.fpl.front().team);
        CHECK_THROWS_AS(join_sources(season, broken), Error);

        auto dup = season;
        dup.fpl.push_back(dup.fpl.front());
        CHECK_THROWS_AS(join_sources(dup, league.aliases), Error);
    }
}

TEST_CASE("1-NN imputation matches an exhaustive search") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<PlayerMatchRecord> donors;
        const int n_donors = 1 + trial * 3;
        for (int i = 0; i < n_donors; ++i) donors.push_back(random_record(rng, 1000 - i * 7, true));
        const DonorIndex index(donors);
        CHECK(index.size() == donors.size());
        for (int t = 0; t < 40; ++t) {
            const auto target = random_record(rng, 5000 + t, false);
            const auto [want, relaxed] = brute_force_donor(target, donors);
            REQUIRE(want);
            const auto direct = impute_understat_1nn(target, donors);
            const auto fast = index.impute(target);
            INFO("trial " << trial << " target " << t);
            CHECK(direct.donor == donor_label(*want));
            CHECK(fast.donor == donor_label(*want));
            CHECK(direct.relaxed == relaxed);
            CHECK(fast.relaxed == relaxed);
            CHECK(fast.record == direct.record);
            CHECK(fast.record.imputed);
            CHECK(fast.record.understat_player->xg == want->understat_player->xg);
            CHECK(fast.record.understat_player->match_date == target.kickoff);
            CHECK(fast.record.fpl == target.fpl);
        }
    }
    const std::vector<PlayerMatchRecord> none;
    std::mt19937_64 r2(1);
    CHECK_THROWS(impute_understat_1nn(random_record(r2, 1, false), none));
}

TEST_CASE("impute_records fills only missing rows") {
    std::mt19937_64 rng(5);
    std::vector<PlayerMatchRecord> donors, targets;
    for (int i = 0; i < 50; ++i) donors.push_back(random_record(rng, i + 1, true));
    for (int i = 0; i < 20; ++i) targets.push_back(random_record(rng, 100 + i, i % 2 == 0));
    const auto before = targets;
    impute_records(targets, donors);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        REQUIRE(targets[i].understat_player);
        CHECK(targets[i].imputed == !before[i].understat_player);
        if (before[i].understat_player) CHECK(targets[i] == before[i]);
    }
}

TEST_CASE("joined files round-trip") {
    const auto league = synthetic::generate_league({});
    auto records = join_sources(league.seasons[0], league.aliases).records;
    impute_records(records, records);
    test::TempDir dir("joined");
    write_joined(dir / "records.csv", records);
    CHECK(read_joined(dir / "records.csv") == records);
}

TEST_CASE("development folds and the evaluation window") {
    const auto league = synthetic::generate_league({});
    std::vector<PlayerMatchRecord> all;
    for (const auto& s : league.seasons) {
        auto j = join_sources(s, league.aliases).records;
        all.insert(all.end(), j.begin(), j.end());
    }
    std::vector<PlayerMatchRecord> dev_records;
    for (const auto& r : all)
        if (r.fpl.season == "2023-24") dev_records.push_back(r);
    const auto dev = build_dev_dataset(dev_records, league.folds);
    CHECK(dev.size() == dev_records.size());
    for (std::size_t f = 0; f < dev.folds.size(); ++f)
        for (const auto& r : dev.folds[f]) CHECK(league.folds.fold_of(r.fpl.team) == static_cast<int>(f));

    EvalWindow w;
    w.first_gameweek = 8;
    w.last_gameweek = 14;
    w.expected_teams = 8;
    const auto eval = build_eval_dataset(all, w);
    for (const auto& r : eval.records) {
        CHECK(r.fpl.season == "2024-25");
        CHECK(r.fpl.gameweek >= 8);
        CHECK(r.fpl.gameweek <= 14);
    }
    w.expected_teams = 20;
    CHECK_THROWS(build_eval_dataset(all, w));
    const std::string missing = all.front().fpl.team;
    std::vector<PlayerMatchRecord> without;
    for (const auto& r : all)
        if (r.fpl.team != missing) without.push_back(r);
    w.expected_teams = 8;
    CHECK_THROWS(build_eval_dataset(without, w));
    w.first_gameweek = w.last_gameweek = 60;
    CHECK_THROWS(build_eval_dataset(all, w));
}
