#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "fplf/core.hpp"
#include "fplf/csv.hpp"
#include "support.hpp"

using namespace fplf;

TEST_CASE("timestamps") {
    CHECK(parse_timestamp("1970-01-01") == 0);
    CHECK(parse_timestamp("2024-08-16T19:00:00Z") == 1723834800);
    CHECK(parse_timestamp("2024-08-16 19:00") == 1723834800);
    CHECK(parse_timestamp("2024-08-16T19:00") == 1723834800);
    CHECK(format_timestamp(1723834800) == "2024-08-16T19:00:00Z");
    CHECK(parse_timestamp(format_timestamp(951782400)) == 951782400);  // 2000-02-29
    CHECK(day_number(parse_timestamp("2024-08-16T23:59:59Z")) == day_number(parse_timestamp("2024-08-16")));
    CHECK_THROWS(parse_timestamp("2024-13-01"));
    CHECK_THROWS(parse_timestamp("yesterday"));
}

TEST_CASE("season labels") {
    CHECK(season_start_year("2024-25") == 2024);
    CHECK(season_label(1999) == "1999-00");
    CHECK_THROWS(season_start_year("2024-26"));
    CHECK_THROWS(season_start_year("24-25"));
}

TEST_CASE("positions") {
    for (auto p : kAllPositions) CHECK(parse_position(to_string(p)) == p);
    CHECK(parse_position("1") == Position::GK);
    CHECK(parse_position("5") == Position::AM);
    CHECK_THROWS(parse_position("striker"));
}

TEST_CASE("hashing and seeds") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(mix_seed(42, 1) == mix_seed(42, 1));
    std::set<std::uint64_t> seen;
    for (std::uint64_t s = 0; s < 100; ++s)
        for (std::uint64_t t = 0; t < 100; ++t) seen.insert(mix_seed(s, t));
    CHECK(seen.size() == 10000);
}

TEST_CASE("shortest round-trip doubles") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 2000; ++i) {
        const double v = u(rng) / (1 + i);
        REQUIRE(std::stod(format_double(v)) == v);
    }
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(3.0) == "3");
}

TEST_CASE("error kinds map to distinct exit codes") {
    std::set<int> codes;
    for (auto k : {ErrorKind::data, ErrorKind::schema, ErrorKind::network, ErrorKind::missing_artifact,
                   ErrorKind::config, ErrorKind::internal}) {
        CHECK(exit_code(k) != 0);
        codes.insert(exit_code(k));
        CHECK_FALSE(error_kind_name(k).empty());
    }
    CHECK(codes.size() == 6);
    CHECK(Error(ErrorKind::network, "x").retriable());
    CHECK_FALSE(Error(ErrorKind::data, "x").retriable());
}

TEST_CASE("csv tables") {
    csv::Table t({"name", "value", "note"});
    t.add_row({"Mbeumo", "1.5", "said \"hi\", left"});
    t.add_row({"Ødegaard", "-2", "line\nbreak"});
    t.add_comment("schema=v1");
    const auto text = t.to_string();
    const auto back = csv::Table::parse(text);
    REQUIRE(back.size() == 2);
    CHECK(back.comments() == std::vector<std::string>{"schema=v1"});
    CHECK(back.cell(0, "note") == "said \"hi\", left");
    CHECK(back.cell(1, "note") == "line\nbreak");
    CHECK(back.cell(1, "name") == "Ødegaard");
    CHECK(back.get_double(0, "value") == 1.5);
    CHECK(back.get_int(1, "value") == -2);
    CHECK_THROWS(back.get_int(0, "value"));
    CHECK_THROWS(back.cell(0, "missing"));
    CHECK_THROWS(back.require_columns({"name", "team"}));
    CHECK_THROWS(t.add_row({"too", "short"}));
    CHECK_THROWS(csv::Table::parse("a,b\n1,2,3\n"));
    CHECK_THROWS(csv::Table::parse("a,b\n\"open,2\n"));

    test::TempDir dir("csv");
    t.write(dir / "t.csv");
    CHECK(csv::Table::read(dir / "t.csv").to_string() == text);
    CHECK_THROWS(csv::Table::read(dir / "absent.csv"));
}
