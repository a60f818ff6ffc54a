#include <doctest.h>

#include <random>

#include "fplf/ensemble.hpp"
#include "support.hpp"

using namespace fplf;
using namespace fplf::ensemble;

namespace {

trees::FittedModel constant_model(double normalized, int n_features) {
    trees::FittedModel m;
    m.kind = trees::ModelKind::random_forest;
    m.hyperparams = trees::RfHyperparams{};
    m.n_features = n_features;
    trees::TreeModel t;
    t.nodes.push_back(trees::TreeNode{.value = normalized});
    m.trees.push_back(t);
    return m;
}

// 5 folds x 10 members, each a constant; predictions are values[i] points.
PositionEnsemble constant_ensemble(const std::vector<double>& values, Position p = Position::GK) {
    PositionEnsemble e;
    e.position = p;
    e.schema_version = features::schema_for(p).version();
    e.n_features = static_cast<int>(features::schema_for(p).size());
    e.k = 10;
    e.budget = 20;
    e.data_checksum = "abc";
    for (int f = 0; f < 5; ++f) {
        ScalerParams s;
        s.feature_min = Eigen::VectorXd::Zero(e.n_features);
        s.feature_max = Eigen::VectorXd::Ones(e.n_features);
        s.target_min = -2;
        s.target_max = 18;
        e.fold_scalers[f] = s;
        for (int r = 1; r <= 10; ++r) {
            const double v = values[static_cast<std::size_t>(f * 10 + r - 1)];
            e.members.push_back({f, r, "rf:const", 1.0, constant_model((v + 2) / 20, e.n_features)});
        }
    }
    return e;
}

PlayerMatchRecord played(const std::string& id, Position p, const std::string& team, const std::string& opp,
                         bool home, int gw, Timestamp kickoff, int availability = 100) {
    PlayerMatchRecord r;
    r.fpl.season = "2024-25";
    r.fpl.gameweek = gw;
    r.fpl.player_id = id;
    r.fpl.player_name = "P" + id;
    r.fpl.position = p;
    r.fpl.team = team;
    r.fpl.opponent_team = opp;
    r.fpl.was_home = home;
    r.fpl.minutes = 90;
    r.fpl.total_points = 2;
    r.fpl.availability_pct = availability;
    r.kickoff = kickoff;
    r.deadline = kickoff - 3600;
    return r;
}

}  // namespace

TEST_CASE("median") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-3, 15);
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::VectorXd v(50);
        for (auto& x : v) x = u(rng);
        std::vector<double> s(v.begin(), v.end());
        std::sort(s.begin(), s.end());
        const double m = median(v);
        CHECK(m == (s[24] + s[25]) / 2);
        Eigen::VectorXd shuffled = v;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        CHECK(median(shuffled) == m);
        Eigen::VectorXd corrupted = v;
        corrupted(trial % 50) = 1e9;
        CHECK(median(corrupted) >= s[24]);
        CHECK(median(corrupted) <= s[26]);
    }
    Eigen::Vector3d odd(3, 1, 2);
    CHECK(median(odd) == 2.0);
    CHECK_THROWS(median(Eigen::VectorXd(0)));
}

TEST_CASE("ensemble prediction is the median of 50 members") {
    std::vector<double> values(50);
    for (int i = 0; i < 50; ++i) values[static_cast<std::size_t>(i)] = (i * 37 % 50) / 5.0;
    const auto e = constant_ensemble(values);
    CHECK_NOTHROW(e.validate());
    const Eigen::MatrixXd X = Eigen::MatrixXd::Random(4, e.n_features);
    const auto out = e.member_outputs(X);
    CHECK(out.cols() == 50);
    for (int m = 0; m < 50; ++m) CHECK(out(0, m) == doctest::Approx(values[static_cast<std::size_t>(m)]));
    std::vector<double> s = values;
    std::sort(s.begin(), s.end());
    const auto p = e.predict(X);
    for (int i = 0; i < 4; ++i) CHECK(p(i) == doctest::Approx((s[24] + s[25]) / 2));
    CHECK(e.predict_points(X.row(0).transpose()) == p(0));
    CHECK_THROWS(e.predict(Eigen::MatrixXd::Zero(1, 3)));

    auto short_fold = e;
    short_fold.members.pop_back();
    CHECK_THROWS(short_fold.validate());
    auto wrong_schema = e;
    wrong_schema.schema_version = "fplf-features-v1/GK/195";
    CHECK_THROWS(wrong_schema.validate());
    auto no_scaler = e;
    no_scaler.fold_scalers.erase(2);
    CHECK_THROWS(no_scaler.validate());
}

TEST_CASE("ensembles round-trip through their directory") {
    std::vector<double> values(50);
    for (int i = 0; i < 50; ++i) values[static_cast<std::size_t>(i)] = i % 7;
    const auto e = constant_ensemble(values, Position::AM);
    test::TempDir dir("ensemble");
    save_ensemble(dir / "AM", e);
    const auto back = load_ensemble(dir / "AM");
    CHECK(back.position == Position::AM);
    CHECK(back.schema_version == e.schema_version);
    CHECK(back.members.size() == 50);
    for (std::size_t m = 0; m < 50; ++m) {
        CHECK(back.members[m].model == e.members[m].model);
        CHECK(back.members[m].fold == e.members[m].fold);
        CHECK(back.members[m].rank == e.members[m].rank);
    }
    CHECK(back.fold_scalers == e.fold_scalers);
    const Eigen::MatrixXd X = Eigen::MatrixXd::Random(3, e.n_features);
    CHECK(back.predict(X) == e.predict(X));
    try {
        load_ensemble(dir / "missing");
        FAIL("expected a missing artifact");
    } catch (const Error& err) {
        CHECK(err.kind() == ErrorKind::missing_artifact);
    }
}

TEST_CASE("forecast slots follow fixtures, double and blank gameweeks") {
    const Timestamp day = 86400, t0 = 1'723'800'000;
    std::vector<ingest::Fixture> fx{
        {"2024-25", 1, "A", "B", t0, t0 - 3600},
        {"2024-25", 1, "C", "D", t0 + 7200, t0 - 3600},
        {"2024-25", 2, "A", "C", t0 + 7 * day, t0 + 7 * day - 3600},
        {"2024-25", 2, "B", "D", t0 + 7 * day, t0 + 7 * day - 3600},
        {"2024-25", 2, "A", "D", t0 + 10 * day, t0 + 7 * day - 3600},
        {"2024-25", 3, "B", "C", t0 + 14 * day, t0 + 14 * day - 3600},
    };
    std::vector<PlayerMatchRecord> records{
        played("1", Position::GK, "A", "B", true, 1, t0, 75),
        played("2", Position::DEF, "D", "C", false, 1, t0 + 7200),
        played("3", Position::AM, "B", "A", false, 1, t0),
    };
    std::vector<std::string> warnings;
    const std::vector<int> horizons{1, 2, 3, 4};
    const auto slots = forecast_slots(records, fx, "2024-25", 1, horizons, &warnings);
    const auto count = [&](const std::string& id, int h) {
        return std::count_if(slots.begin(), slots.end(),
                             [&](const auto& s) { return s.player.player_id == id && s.horizon == h; });
    };
    CHECK(count("1", 1) == 1);
    CHECK(count("1", 2) == 2);
    CHECK(count("2", 2) == 2);
    CHECK(count("3", 2) == 1);
    CHECK(count("1", 3) == 0);
    CHECK(count("3", 3) == 1);
    CHECK(count("1", 4) == 0);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("gameweek 4") != std::string::npos);
    for (const auto& s : slots) {
        CHECK(s.context.cutoff == t0 - 3600);
        CHECK(s.gameweek == s.deadline_gameweek + s.horizon - 1);
        if (s.player.player_id == "1") CHECK(s.context.availability_pct == 75);
    }
    const auto d_slots = std::count_if(slots.begin(), slots.end(), [](const auto& s) {
        return s.player.player_id == "2" && s.horizon == 2 && !s.context.was_home;
    });
    CHECK(d_slots == 2);
    CHECK_THROWS(forecast_slots(records, fx, "2024-25", 9, horizons));

    SUBCASE("ensembles score only their own position") {
        std::vector<double> values(50, 4.0);
        std::map<Position, PositionEnsemble> ens{{Position::GK, constant_ensemble(values)}};
        const features::HistoryIndex index(records);
        const auto f = forecast_with_ensembles(ens, index, slots);
        CHECK(f.size() == static_cast<std::size_t>(count("1", 1) + count("1", 2)));
        for (const auto& x : f) {
            CHECK(x.position == Position::GK);
            CHECK(x.predicted_points == doctest::Approx(4.0));
            CHECK(x.member_points.size() == 50);
        }

        test::TempDir dir("forecasts");
        write_forecasts(dir / "f.csv", f);
        auto stripped = f;
        for (auto& x : stripped) x.member_points.clear();
        CHECK(read_forecasts(dir / "f.csv") == stripped);
        write_member_outputs(dir / "m.csv", f, ens);
        CHECK(std::filesystem::file_size(dir / "m.csv") > 0);
    }
}
