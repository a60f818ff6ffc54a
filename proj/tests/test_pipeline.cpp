#include <doctest.h>

#include <sstream>

#include "fplf/pipeline.hpp"
#include "support.hpp"

using namespace fplf;
using namespace fplf::pipeline;
using nlohmann::json;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::internal;
}

std::size_t count_files(const fs::path& dir) {
    if (!fs::exists(dir)) return 0;
    std::size_t n = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir)) n += e.is_regular_file();
    return n;
}

RunConfig small_workspace(const fs::path& dir) {
    auto c = write_synthetic_workspace(dir);
    c.positions = {Position::GK, Position::AM};
    c.k = 1;
    c.budget = 2;
    return c;
}

}  // namespace

TEST_CASE("configuration defaults") {
    const RunConfig c;
    CHECK(c.k == 10);
    CHECK(c.budget == 200);
    CHECK(c.seed == 42);
    CHECK(c.horizons == std::vector<int>{1, 2, 3});
    CHECK(c.weighting.clip_quantile == 0.95);
    CHECK(c.stop_rule == search::StopRule::qualifying_count);
    CHECK(c.eval_first_gameweek == 32);
    CHECK(c.eval_last_gameweek == 38);
    CHECK(c.positions.size() == 5);
    CHECK(c.seasons() == std::vector<std::string>{"2020-21", "2021-22", "2022-23", "2023-24", "2024-25"});
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("configuration files") {
    const RunConfig c;
    const auto back = config_from_json(to_json(c), "/base");
    CHECK(back.store == fs::path("/base/store"));
    CHECK(back.k == c.k);
    CHECK(back.horizons == c.horizons);

    auto j = to_json(c);
    j["k_best"] = 3;
    CHECK(kind_of([&] { config_from_json(j); }) == ErrorKind::config);
    j = to_json(c);
    j["k"] = 0;
    CHECK(kind_of([&] { config_from_json(j).validate(); }) == ErrorKind::config);
    j = to_json(c);
    j["horizons"] = json::array();
    CHECK(kind_of([&] { config_from_json(j).validate(); }) == ErrorKind::config);
    CHECK(kind_of([&] { load_config("/nonexistent/config.json"); }) == ErrorKind::config);

    auto moved = c;
    moved.store = "/elsewhere/store";
    moved.artifacts = "/elsewhere/out";
    moved.jobs = 8;
    CHECK(config_hash(moved) == config_hash(c));
    auto reseeded = c;
    reseeded.seed = 43;
    CHECK(config_hash(reseeded) != config_hash(c));
    auto narrower = c;
    narrower.horizons = {1};
    CHECK(config_hash(narrower) != config_hash(c));
}

TEST_CASE("pipeline steps are ordered, idempotent and auditable") {
    test::TempDir dir("pipeline");
    const auto c = small_workspace(dir.path());
    std::ostringstream sink;
    CommandOptions o;
    o.out = &sink;
    const Layout layout{c.artifacts};

    SUBCASE("missing inputs name the producing command") {
        try {
            run_forecast(c, o);
            FAIL("expected a missing artifact");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::missing_artifact);
            CHECK(std::string(e.what()).find("fplf build-dataset") != std::string::npos);
        }
    }

    SUBCASE("dry runs only print the plan") {
        auto dry = o;
        dry.dry_run = true;
        CHECK_FALSE(run_ingest(c, dry));
        CHECK(count_files(c.artifacts) == 0);
        CHECK(count_files(c.store) == 0);
        CHECK(sink.str().find("plan:") != std::string::npos);
    }

    SUBCASE("full run") {
        run_all(c, o);
        for (const auto& p : {layout.records(), layout.fixtures(), layout.folds(), layout.dataset_provenance(),
                              layout.forecast("ensemble"), layout.forecast("last5"),
                              layout.reports_dir() / "evaluation.csv", layout.reports_dir() / "report.txt"})
            CHECK_MESSAGE(fs::exists(p), p);
        CHECK(fs::exists(layout.ensemble_dir(Position::GK) / "manifest.json"));
        CHECK_FALSE(fs::exists(layout.ensemble_dir(Position::DEF)));

        const auto prov = json::parse(test::slurp(layout.dataset_provenance()));
        CHECK(prov.at("config_hash") == config_hash(c));
        CHECK(prov.at("command") == "build-dataset");
        CHECK_FALSE(prov.at("inputs").empty());
        CHECK_FALSE(prov.at("outputs").empty());

        // Reruns are no-ops until forced.
        CHECK_FALSE(run_ingest(c, o));
        CHECK_FALSE(run_build_dataset(c, o));
        CHECK_FALSE(run_search(c, o));
        CHECK_FALSE(run_train_ensembles(c, o));
        CHECK_FALSE(run_forecast(c, o));
        CHECK_FALSE(run_evaluate(c, o));

        const auto log = layout.search_dir(Position::GK, 0) / "log.csv";
        const auto result = layout.search_dir(Position::GK, 0) / "result.json";
        const std::string first_log = test::slurp(log), first_result = test::slurp(result);
        auto one = o;
        one.force = true;
        one.position = Position::GK;
        one.fold = 0;
        CHECK(run_search(c, one));
        CHECK(test::slurp(log) == first_log);
        CHECK(test::slurp(result) == first_result);

        // Changing a result-affecting setting invalidates downstream outputs.
        auto reseeded = c;
        reseeded.seed = 7;
        CHECK(run_build_dataset(reseeded, o));

        std::ostringstream report;
        auto ro = o;
        ro.out = &report;
        run_report(c, ro);
        CHECK(report.str().find("RMSE (MAE)") != std::string::npos);
    }
}

TEST_CASE("search rejects unknown folds and bundling needs every fold") {
    test::TempDir dir("pipeline-gaps");
    auto c = small_workspace(dir.path());
    c.positions = {Position::GK};
    std::ostringstream sink;
    CommandOptions o;
    o.out = &sink;
    run_ingest(c, o);
    run_build_dataset(c, o);
    auto bad = o;
    bad.fold = 9;
    CHECK_THROWS_AS(run_search(c, bad), Error);
    auto one = o;
    one.fold = 0;
    run_search(c, one);
    CHECK(kind_of([&] { run_train_ensembles(c, o); }) == ErrorKind::missing_artifact);
}
