#include <doctest.h>

#include <random>

#include "fplf/weighting.hpp"

using namespace fplf;
using namespace fplf::weighting;
using Eigen::VectorXd;

TEST_CASE("linear quantile") {
    VectorXd v(20);
    v.setOnes();
    v(19) = 100.0;
    CHECK(std::abs(quantile_linear(v, 0.95) - 5.95) < 1e-12);
    VectorXd u(5);
    u << 4, 1, 3, 2, 5;
    CHECK(quantile_linear(u, 0.0) == 1.0);
    CHECK(quantile_linear(u, 1.0) == 5.0);
    CHECK(quantile_linear(u, 0.5) == 3.0);
    CHECK(quantile_linear(u, 0.1) == doctest::Approx(1.4));
}

TEST_CASE("balanced weights for a 3:1 split") {
    const auto w = balanced_weights({0, 0, 0, 1});
    REQUIRE(w.size() == 4);
    for (int i = 0; i < 3; ++i) CHECK(w(i) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(w(3) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(w.mean() == doctest::Approx(1.0));
}

TEST_CASE("clipping at the 0.95 quantile, by hand") {
    VectorXd w = VectorXd::Ones(20);
    w(19) = 100.0;
    const auto out = clip_and_rescale(w, 0.95);
    // Clip 100 to 5.95, then divide by the mean (19 + 5.95) / 20.
    const double mean = (19.0 + 5.95) / 20.0;
    for (int i = 0; i < 19; ++i) CHECK(std::abs(out(i) - 1.0 / mean) < 1e-12);
    CHECK(std::abs(out(19) - 5.95 / mean) < 1e-12);
    CHECK(std::abs(out.mean() - 1.0) < 1e-12);
    CHECK_THROWS(clip_and_rescale(VectorXd::Zero(3), 0.95));
}

TEST_CASE("quantile bins") {
    SUBCASE("uniform values split evenly") {
        VectorXd v(100);
        for (int i = 0; i < 100; ++i) v(i) = i;
        const auto labels = discretize_targets(v, 4);
        std::vector<int> counts(4, 0);
        for (int l : labels) ++counts[static_cast<std::size_t>(l)];
        CHECK(counts == std::vector<int>{25, 25, 25, 25});
    }
    SUBCASE("ties merge bins and labels stay contiguous") {
        VectorXd v(10);
        v << 0, 0, 0, 0, 0, 0, 0, 1, 2, 8;
        const auto bins = QuantileBins::fit(v, 5);
        CHECK(bins.n_bins() < 5);
        const auto labels = discretize_targets(v, 5);
        const int top = *std::max_element(labels.begin(), labels.end());
        for (int b = 0; b <= top; ++b) CHECK(std::count(labels.begin(), labels.end(), b) > 0);
        CHECK(std::is_sorted(labels.begin(), labels.end()));
    }
    SUBCASE("a constant target is one bin") {
        const auto labels = discretize_targets(VectorXd::Constant(6, 2.0), 3);
        CHECK(std::all_of(labels.begin(), labels.end(), [](int l) { return l == 0; }));
    }
    SUBCASE("edges transfer to other samples") {
        VectorXd train(8), other(3);
        train << 0, 1, 2, 3, 4, 5, 6, 7;
        other << -5, 3.5, 50;
        const auto bins = QuantileBins::fit(train, 2);
        const auto l = bins.assign(other);
        CHECK(l == std::vector<int>{0, 1, 1});
    }
    CHECK(compact_labels({0, 2, 2, 4}) == std::vector<int>{0, 1, 1, 2});
}

TEST_CASE("final weights have mean one") {
    std::mt19937_64 rng(1);
    std::exponential_distribution<double> ex(0.4);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 50 + trial * 7;
        VectorXd train(n), valid(n / 2);
        for (int i = 0; i < n; ++i) train(i) = std::floor(ex(rng));
        for (int i = 0; i < n / 2; ++i) valid(i) = std::floor(ex(rng));
        for (int bins : {2, 3, 4, 5}) {
            const auto fw = fold_weights(train, valid, bins, 0.95);
            CHECK(std::abs(fw.train.mean() - 1.0) < 1e-9);
            CHECK(std::abs(fw.valid.mean() - 1.0) < 1e-9);
            CHECK((fw.train.array() > 0).all());
            // Equal targets share a bin and therefore a weight.
            for (int i = 1; i < n; ++i)
                for (int j = 0; j < i; ++j)
                    if (train(i) == train(j)) REQUIRE(fw.train(i) == fw.train(j));
        }
    }
}

TEST_CASE("default bins per position") {
    const WeightingConfig c;
    CHECK(c.bins(Position::GK) == 2);
    CHECK(c.bins(Position::DEF) == 3);
    CHECK(c.bins(Position::MID) == 4);
    CHECK(c.bins(Position::FWD) == 3);
    CHECK(c.bins(Position::AM) == 5);
    CHECK(c.clip_quantile == 0.95);
    WeightingConfig bad;
    bad.clip_quantile = 1.5;
    CHECK_THROWS(bad.validate());
}
