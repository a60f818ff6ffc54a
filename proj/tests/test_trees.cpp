#include <doctest.h>

#include <random>

#include "fplf/trees.hpp"
#include "support.hpp"
#include "tree_oracle.hpp"

using namespace fplf;
using namespace fplf::trees;

namespace {

GbdtHyperparams one_round(int depth, double mcw, double lambda, double gamma) {
    GbdtHyperparams h;
    h.n_estimators = 1;
    h.max_depth = depth;
    h.learning_rate = 1.0;
    h.subsample = 1.0;
    h.colsample_bytree = 1.0;
    h.min_child_weight = mcw;
    h.reg_lambda = lambda;
    h.gamma = gamma;
    return h;
}

}  // namespace

TEST_CASE("CART splits match exhaustive enumeration at every node") {
    std::mt19937_64 rng(11);
    int internal = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const auto in = test::random_instance(rng);
        CartParams p;
        p.max_depth = std::uniform_int_distribution<int>(1, 4)(rng);
        p.min_samples_leaf = std::uniform_int_distribution<int>(1, 3)(rng);
        p.min_samples_split = std::uniform_int_distribution<int>(2, 5)(rng);
        const auto tree = fit_cart(in.X, in.y, in.w, p, 5);
        tree.validate(static_cast<int>(in.X.cols()));
        const auto rep = test::check_cart(tree, in.X, in.y, in.w, {p.max_depth, p.min_samples_split, p.min_samples_leaf});
        INFO("trial " << trial);
        CHECK_MESSAGE(rep.error.empty(), rep.error);
        internal += rep.internal_nodes;
    }
    CHECK(internal > 300);
}

TEST_CASE("boosting splits and leaves match exhaustive enumeration") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 300; ++trial) {
        const auto in = test::random_instance(rng);
        const int depth = std::uniform_int_distribution<int>(1, 4)(rng);
        const double mcw = std::uniform_int_distribution<int>(0, 3)(rng);
        const double lambda = std::uniform_int_distribution<int>(0, 2)(rng);
        const double gamma = std::uniform_int_distribution<int>(0, 1)(rng) * 0.05;
        const auto h = one_round(depth, mcw, lambda, gamma);
        const auto m = fit_gbdt(in.X, in.y, in.w, in.X, in.y, in.w, h, 3);
        REQUIRE(m.trees.size() == 1);
        const double base = in.w.dot(in.y) / in.w.sum();
        CHECK(m.base_score == doctest::Approx(base).epsilon(1e-12));
        std::vector<double> g, hh;
        for (Eigen::Index i = 0; i < in.y.size(); ++i) {
            g.push_back(in.w(i) * (m.base_score - in.y(i)));
            hh.push_back(in.w(i));
        }
        const auto rep = test::check_boost_tree(m.trees[0], in.X, g, hh, {depth, mcw, lambda, gamma});
        INFO("trial " << trial);
        CHECK_MESSAGE(rep.error.empty(), rep.error);
    }
}

TEST_CASE("squared error gradients match finite differences") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    const int n = 20;
    Vector pred(n), y(n), w(n);
    for (int i = 0; i < n; ++i) {
        pred(i) = nd(rng);
        y(i) = nd(rng);
        w(i) = 0.5 + std::abs(nd(rng));
    }
    const auto loss = [&](const Vector& p) { return 0.5 * (w.array() * (p - y).array().square()).sum(); };
    const auto gr = squared_error_gradients(pred, y, w);
    const double eps = 1e-4;
    for (int i = 0; i < n; ++i) {
        Vector up = pred, down = pred;
        up(i) += eps;
        down(i) -= eps;
        const double fd_g = (loss(up) - loss(down)) / (2 * eps);
        const double fd_h =
            (squared_error_gradients(up, y, w).g(i) - squared_error_gradients(down, y, w).g(i)) / (2 * eps);
        CHECK(std::abs(fd_g - gr.g(i)) <= 1e-6 * std::max(1.0, std::abs(gr.g(i))));
        CHECK(std::abs(fd_h - gr.h(i)) <= 1e-6 * std::max(1.0, std::abs(gr.h(i))));
    }
}

TEST_CASE("a single-leaf boosting model predicts base - G/(H + lambda)") {
    std::mt19937_64 rng(4);
    const auto in = test::random_instance(rng);
    auto h = one_round(0, 0.0, 2.0, 0.0);
    h.n_estimators = 5;
    const auto m = fit_gbdt(in.X, in.y, in.w, in.X, in.y, in.w, h, 1);
    double G = 0, H = 0;
    const double base = in.w.dot(in.y) / in.w.sum();
    for (Eigen::Index i = 0; i < in.y.size(); ++i) {
        G += in.w(i) * (base - in.y(i));
        H += in.w(i);
    }
    const auto p = predict(m, in.X.topRows(1));
    CHECK(std::abs(p(0) - (base - G / (H + 2.0))) <= 1e-12);
}

TEST_CASE("fitting does not depend on row order") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto in = test::random_instance(rng);
        std::vector<int> perm(static_cast<std::size_t>(in.X.rows()));
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Matrix X2 = in.X;
        Vector y2 = in.y, w2 = in.w;
        for (std::size_t i = 0; i < perm.size(); ++i) {
            X2.row(static_cast<Eigen::Index>(i)) = in.X.row(perm[i]);
            y2(static_cast<Eigen::Index>(i)) = in.y(perm[i]);
            w2(static_cast<Eigen::Index>(i)) = in.w(perm[i]);
        }
        RfHyperparams rf;
        rf.n_estimators = 5;
        rf.max_depth = 3;
        CHECK(fit_random_forest(in.X, in.y, in.w, rf, 9) == fit_random_forest(X2, y2, w2, rf, 9));
        GbdtHyperparams gb;
        gb.n_estimators = 10;
        gb.subsample = 0.7;
        gb.colsample_bytree = 0.6;
        CHECK(fit_gbdt(in.X, in.y, in.w, in.X, in.y, in.w, gb, 9) == fit_gbdt(X2, y2, w2, X2, y2, w2, gb, 9));
    }
}

TEST_CASE("early stopping counts rounds from one") {
    SUBCASE("minimum then thirty flat rounds") {
        EarlyStopping s(30);
        CHECK_FALSE(s.update(0.5));
        for (int r = 2; r <= 30; ++r) CHECK_FALSE(s.update(0.5));
        CHECK(s.update(0.5));
        CHECK(s.rounds() == 31);
        CHECK(s.best_round() == 1);
    }
    SUBCASE("improvement on round two") {
        std::vector<double> curve{1.0, 0.9};
        curve.resize(60, 0.9);
        EarlyStopping s(30);
        int stopped = 0;
        for (std::size_t i = 0; i < curve.size(); ++i)
            if (s.update(curve[i])) {
                stopped = static_cast<int>(i) + 1;
                break;
            }
        CHECK(stopped == 32);
        CHECK(s.best_round() == 2);
        CHECK(s.best_score() == 0.9);
    }
    SUBCASE("never stops while improving") {
        EarlyStopping s(3);
        for (int r = 0; r < 100; ++r) CHECK_FALSE(s.update(1.0 / (r + 1)));
    }
}

TEST_CASE("boosting truncates to the best iteration") {
    // Exactly representable data: round one fits the training set exactly and
    // every later round adds zero, so the validation curve is flat.
    Matrix X(8, 1);
    Vector y(8), w = Vector::Ones(8);
    for (int i = 0; i < 8; ++i) {
        X(i, 0) = i;
        y(i) = i;
    }
    GbdtHyperparams h = one_round(4, 0.0, 0.0, 0.0);
    h.n_estimators = 200;
    const auto m = fit_gbdt(X, y, w, X, y, w, h, 1);
    CHECK(m.rounds_trained == 31);
    CHECK(m.best_iteration == 1);
    CHECK(m.trees.size() == 1);
    CHECK(m.valid_curve.size() == 31);
    CHECK(m.valid_curve.front() == 0.0);

    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        const auto a = test::random_instance(rng), b = test::random_instance(rng, 64, 4);
        if (a.X.cols() != b.X.cols()) continue;
        GbdtHyperparams g;
        g.n_estimators = 150;
        g.learning_rate = 0.3;
        const auto fit = fit_gbdt(a.X, a.y, a.w, b.X, b.y, b.w, g, 2);
        const auto best = std::min_element(fit.valid_curve.begin(), fit.valid_curve.end()) - fit.valid_curve.begin() + 1;
        CHECK(fit.best_iteration == best);
        CHECK(static_cast<int>(fit.trees.size()) == fit.best_iteration);
        CHECK((fit.rounds_trained == g.n_estimators || fit.rounds_trained - fit.best_iteration == 30));
    }
}

TEST_CASE("random forest behaviour") {
    std::mt19937_64 rng(6);
    const auto in = test::random_instance(rng, 64, 4);
    RfHyperparams h;
    h.n_estimators = 7;
    SUBCASE("same seed, same forest; different seed, different forest") {
        CHECK(fit_random_forest(in.X, in.y, in.w, h, 1) == fit_random_forest(in.X, in.y, in.w, h, 1));
        CHECK_FALSE(fit_random_forest(in.X, in.y, in.w, h, 1) == fit_random_forest(in.X, in.y, in.w, h, 2));
    }
    SUBCASE("no bootstrap and all features gives identical trees") {
        h.bootstrap = false;
        h.max_features = MaxFeatures::of(1.0);
        const auto m = fit_random_forest(in.X, in.y, in.w, h, 1);
        for (const auto& t : m.trees) CHECK(t == m.trees.front());
        CartParams cp;
        CHECK(m.trees.front() == fit_cart(in.X, in.y, in.w, cp, 0));
    }
    SUBCASE("prediction is the mean of the trees") {
        const auto m = fit_random_forest(in.X, in.y, in.w, h, 3);
        const auto p = predict(m, in.X);
        for (Eigen::Index i = 0; i < in.X.rows(); ++i) {
            double s = 0;
            for (const auto& t : m.trees) s += t.predict(in.X.row(i));
            CHECK(p(i) == doctest::Approx(s / 7));
        }
    }
    SUBCASE("depth limit is honoured") {
        h.max_depth = 2;
        for (const auto& t : fit_random_forest(in.X, in.y, in.w, h, 3).trees) CHECK(t.depth() <= 2);
    }
}

TEST_CASE("max_features counts") {
    CHECK(MaxFeatures::square_root().count(196) == 14);
    CHECK(MaxFeatures::square_root().count(206) == 15);
    CHECK(MaxFeatures::of(0.2).count(10) == 2);
    CHECK(MaxFeatures::of(0.2).count(206) == 42);
    CHECK(MaxFeatures::of(1.0).count(122) == 122);
    CHECK(MaxFeatures::of(0.01).count(3) == 1);
}

TEST_CASE("model archives round-trip and detect corruption") {
    std::mt19937_64 rng(7);
    const auto in = test::random_instance(rng);
    GbdtHyperparams g;
    g.n_estimators = 20;
    const auto m = fit_gbdt(in.X, in.y, in.w, in.X, in.y, in.w, g, 4);
    const auto bytes = serialize(m, "schema-x");
    std::string schema;
    CHECK(deserialize(bytes, std::nullopt, &schema) == m);
    CHECK(schema == "schema-x");
    CHECK(serialize(m, "schema-x") == bytes);
    CHECK_THROWS(deserialize(bytes, static_cast<int>(in.X.cols()) + 1));
    auto broken = bytes;
    broken[broken.size() / 2] ^= 0x1;
    CHECK_THROWS(deserialize(broken));
    CHECK_THROWS(deserialize(bytes.substr(0, bytes.size() - 10)));

    test::TempDir dir("trees");
    save_model(dir / "m.model", m);
    CHECK(load_model(dir / "m.model") == m);
    try {
        (void)load_model(dir / "missing.model");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::missing_artifact);
    }
}

TEST_CASE("predict rejects bad inputs") {
    Matrix X = Matrix::Random(10, 3);
    Vector y = Vector::Random(10), w = Vector::Ones(10);
    RfHyperparams h;
    h.n_estimators = 2;
    const auto m = fit_random_forest(X, y, w, h, 1);
    CHECK_THROWS(predict(m, Matrix::Zero(2, 4)));
    FittedModel empty = m;
    empty.trees.clear();
    CHECK_THROWS(predict(empty, X));
    Vector bad = w;
    bad(0) = 0.0;
    CHECK_THROWS(fit_random_forest(X, y, bad, h, 1));
}

TEST_CASE("uniform_below stays in range and covers it") {
    std::mt19937_64 rng(1);
    std::vector<int> seen(7, 0);
    for (int i = 0; i < 7000; ++i) {
        const auto v = uniform_below(rng, 7);
        REQUIRE(v < 7);
        ++seen[v];
    }
    for (int c : seen) CHECK(c > 800);
}
