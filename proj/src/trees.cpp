#include "fplf/trees.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace fplf::trees {

static_assert(std::endian::native == std::endian::little, "model archives assume a little-endian host");

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
    if (n == 0) throw Error(ErrorKind::internal, "uniform_below(0)");
    std::uint64_t x = rng();
    auto m = static_cast<unsigned __int128>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
        const std::uint64_t t = (0 - n) % n;
        while (low < t) {
            x = rng();
            m = static_cast<unsigned __int128>(x) * n;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

int MaxFeatures::count(int n_features) const {
    const double raw = sqrt ? std::sqrt(static_cast<double>(n_features)) : fraction * n_features;
    // Guard against 0.2 * 10 landing a hair above 2.
    const int k = static_cast<int>(std::ceil(raw - 1e-9));
    return std::clamp(k, 1, std::max(n_features, 1));
}

std::string MaxFeatures::to_string() const { return sqrt ? "sqrt" : format_double(fraction); }

std::string_view to_string(ModelKind kind) noexcept {
    return kind == ModelKind::random_forest ? "random_forest" : "gbdt";
}

// ---------------------------------------------------------------------------
// Hyperparameter JSON

nlohmann::json to_json(const RfHyperparams& h) {
    nlohmann::json j;
    j["n_estimators"] = h.n_estimators;
    j["max_depth"] = h.max_depth ? nlohmann::json(*h.max_depth) : nlohmann::json(nullptr);
    j["min_samples_split"] = h.min_samples_split;
    j["min_samples_leaf"] = h.min_samples_leaf;
    j["max_features"] = h.max_features.sqrt ? nlohmann::json("sqrt") : nlohmann::json(h.max_features.fraction);
    j["bootstrap"] = h.bootstrap;
    return j;
}

nlohmann::json to_json(const GbdtHyperparams& h) {
    return {{"n_estimators", h.n_estimators},       {"max_depth", h.max_depth},
            {"learning_rate", h.learning_rate},     {"subsample", h.subsample},
            {"colsample_bytree", h.colsample_bytree}, {"min_child_weight", h.min_child_weight},
            {"gamma", h.gamma},                     {"reg_lambda", h.reg_lambda}};
}

RfHyperparams rf_from_json(const nlohmann::json& j) {
    RfHyperparams h;
    h.n_estimators = j.at("n_estimators").get<int>();
    if (!j.at("max_depth").is_null()) h.max_depth = j.at("max_depth").get<int>();
    h.min_samples_split = j.at("min_samples_split").get<int>();
    h.min_samples_leaf = j.at("min_samples_leaf").get<int>();
    const auto& mf = j.at("max_features");
    h.max_features = mf.is_string() ? MaxFeatures::square_root() : MaxFeatures::of(mf.get<double>());
    h.bootstrap = j.at("bootstrap").get<bool>();
    return h;
}

GbdtHyperparams gbdt_from_json(const nlohmann::json& j) {
    GbdtHyperparams h;
    h.n_estimators = j.at("n_estimators").get<int>();
    h.max_depth = j.at("max_depth").get<int>();
    h.learning_rate = j.at("learning_rate").get<double>();
    h.subsample = j.at("subsample").get<double>();
    h.colsample_bytree = j.at("colsample_bytree").get<double>();
    h.min_child_weight = j.at("min_child_weight").get<double>();
    h.gamma = j.at("gamma").get<double>();
    h.reg_lambda = j.at("reg_lambda").get<double>();
    return h;
}

// ---------------------------------------------------------------------------
// Tree structure

std::size_t TreeModel::n_leaves() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const auto& n) { return n.is_leaf(); }));
}

int TreeModel::depth() const {
    if (nodes.empty()) return 0;
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        best = std::max(best, d[i]);
        if (!nodes[i].is_leaf()) {
            d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
        }
    }
    return best;
}

void TreeModel::validate(int n_features) const {
    if (nodes.empty()) fail("tree has no nodes");
    const auto n = static_cast<std::int32_t>(nodes.size());
    std::vector<int> parents(nodes.size(), 0);
    for (std::int32_t i = 0; i < n; ++i) {
        const auto& node = nodes[static_cast<std::size_t>(i)];
        if (node.is_leaf()) {
            if (!std::isfinite(node.value)) fail("tree leaf value is not finite");
            continue;
        }
        // Children always follow their parent, which rules out cycles.
        if (node.feature >= n_features || node.left <= i || node.right <= i || node.left >= n || node.right >= n ||
            node.left == node.right || !std::isfinite(node.threshold))
            fail("malformed tree node " + std::to_string(i));
        ++parents[static_cast<std::size_t>(node.left)];
        ++parents[static_cast<std::size_t>(node.right)];
    }
    for (std::size_t i = 1; i < parents.size(); ++i)
        if (parents[i] != 1) fail("tree node " + std::to_string(i) + " is not referenced exactly once");
}

// ---------------------------------------------------------------------------
// Growing

namespace {

constexpr double kCartRelTol = 1e-12;
constexpr double kMinBoostGain = 1e-10;

std::uint64_t hash_double(std::uint64_t h, double v) {
    std::byte bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof v);
    return fnv1a(bytes, h);
}

// Row order by content hash so that fitting ignores how rows were supplied.
std::vector<Eigen::Index> canonical_order(const Matrix& X, const Vector& y, const Vector& w) {
    const Eigen::Index n = X.rows();
    std::vector<std::uint64_t> keys(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (Eigen::Index j = 0; j < X.cols(); ++j) h = hash_double(h, X(i, j));
        h = hash_double(hash_double(h, y(i)), w.size() ? w(i) : 1.0);
        keys[static_cast<std::size_t>(i)] = h;
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        const auto ka = keys[static_cast<std::size_t>(a)], kb = keys[static_cast<std::size_t>(b)];
        if (ka != kb) return ka < kb;
        for (Eigen::Index j = 0; j < X.cols(); ++j)
            if (X(a, j) != X(b, j)) return X(a, j) < X(b, j);
        if (y(a) != y(b)) return y(a) < y(b);
        if (w.size() && w(a) != w(b)) return w(a) < w(b);
        return false;
    });
    return order;
}

struct Canonical {
    Matrix X;
    Vector y;
    Vector w;
};

Canonical canonicalize(const Matrix& X, const Vector& y, const Vector& w) {
    const auto order = canonical_order(X, y, w);
    Canonical c{Matrix(X.rows(), X.cols()), Vector(y.size()), Vector(w.size())};
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        c.X.row(r) = X.row(order[i]);
        c.y(r) = y(order[i]);
        c.w(r) = w(order[i]);
    }
    return c;
}

void check_inputs(const Matrix& X, const Vector& y, const Vector& w, const char* what) {
    if (X.rows() == 0) fail(std::string(what) + ": empty training set");
    if (y.size() != X.rows() || w.size() != X.rows())
        fail(std::string(what) + ": X, y and w must have the same number of rows");
    if (X.cols() == 0) fail(std::string(what) + ": no features");
    if (!X.allFinite() || !y.allFinite() || !w.allFinite()) fail(std::string(what) + ": non-finite input");
    if ((w.array() <= 0.0).any()) fail(std::string(what) + ": weights must be positive");
}

// Per feature, all row indices sorted by value (ties by row).
std::vector<std::vector<int>> presort(const Matrix& X) {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index f = 0; f < X.cols(); ++f) {
        auto& v = out[static_cast<std::size_t>(f)];
        v.resize(static_cast<std::size_t>(X.rows()));
        std::iota(v.begin(), v.end(), 0);
        const double* col = X.col(f).data();
        std::sort(v.begin(), v.end(), [col](int a, int b) { return col[a] < col[b] || (col[a] == col[b] && a < b); });
    }
    return out;
}

struct Stats {
    double a = 0.0;  // CART: sum w*y, boosting: G
    double b = 0.0;  // CART: sum w,   boosting: H
    double n = 0.0;  // row count (with multiplicity)

    Stats& operator+=(const Stats& o) {
        a += o.a;
        b += o.b;
        n += o.n;
        return *this;
    }
    Stats operator-(const Stats& o) const { return {a - o.a, b - o.b, n - o.n}; }
};

struct GrowParams {
    bool boosting = false;
    std::optional<int> max_depth;
    int min_samples_split = 2;
    int min_samples_leaf = 1;
    double min_child_weight = 0.0;
    double lambda = 0.0;
    double gamma = 0.0;
    int features_per_split = 0;
};

class Grower {
public:
    Grower(const Matrix& X, const std::vector<std::vector<int>>& sorted) : X_(X), sorted_(sorted) {}

    // `row` holds per-row statistics; rows with n == 0 are excluded. `y` is
    // used by CART to detect constant nodes and compute node impurity.
    TreeModel grow(std::vector<Stats> row, const std::vector<double>* y, std::vector<int> features,
                   const GrowParams& p, std::uint64_t seed) {
        row_ = std::move(row);
        y_ = y;
        p_ = p;
        seed_ = seed;
        features_ = std::move(features);
        lists_.assign(static_cast<std::size_t>(X_.cols()), {});
        for (int f : features_) {
            auto& l = lists_[static_cast<std::size_t>(f)];
            l.reserve(sorted_[static_cast<std::size_t>(f)].size());
            for (int r : sorted_[static_cast<std::size_t>(f)])
                if (row_[static_cast<std::size_t>(r)].n > 0) l.push_back(r);
        }
        goes_left_.assign(row_.size(), 0);
        scratch_.clear();
        tree_ = {};
        const auto n = lists_[static_cast<std::size_t>(features_.front())].size();
        if (n == 0) fail("tree has no active rows");
        build(0, n, 0);
        return std::move(tree_);
    }

private:
    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double gain = 0.0;
        std::size_t n_left = 0;
    };

    double score(const Stats& s) const { return s.a * s.a / (s.b + p_.lambda); }

    double leaf_value(const Stats& s) const { return p_.boosting ? -s.a / (s.b + p_.lambda) : s.a / s.b; }

    double gain(const Stats& l, const Stats& r, const Stats& t) const {
        const double raw = score(l) + score(r) - score(t);
        return p_.boosting ? 0.5 * raw - p_.gamma : raw;
    }

    bool children_ok(const Stats& l, const Stats& r) const {
        if (p_.boosting) return l.b >= p_.min_child_weight && r.b >= p_.min_child_weight;
        return l.n >= p_.min_samples_leaf && r.n >= p_.min_samples_leaf;
    }

    std::vector<int> candidate_features(std::uint64_t node_id) const {
        const int k = std::min<int>(p_.features_per_split, static_cast<int>(features_.size()));
        if (k >= static_cast<int>(features_.size())) return features_;
        std::vector<int> pool = features_;
        std::mt19937_64 rng(mix_seed(seed_, node_id));
        for (int i = 0; i < k; ++i) {
            const auto j = static_cast<std::size_t>(i) + uniform_below(rng, pool.size() - static_cast<std::size_t>(i));
            std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
        }
        pool.resize(static_cast<std::size_t>(k));
        std::sort(pool.begin(), pool.end());
        return pool;
    }

    std::int32_t make_leaf(const Stats& t) {
        TreeNode leaf;
        leaf.value = leaf_value(t);
        tree_.nodes.push_back(leaf);
        return static_cast<std::int32_t>(tree_.nodes.size() - 1);
    }

    std::int32_t build(std::size_t begin, std::size_t end, int depth) {
        const auto node_id = static_cast<std::uint64_t>(tree_.nodes.size());
        const auto& ref = lists_[static_cast<std::size_t>(features_.front())];
        Stats total;
        for (std::size_t k = begin; k < end; ++k) total += row_[static_cast<std::size_t>(ref[k])];

        const bool depth_ok = !p_.max_depth || depth < *p_.max_depth;
        bool splittable = depth_ok && end - begin >= 2;
        double impurity = 0.0;
        if (splittable && !p_.boosting) {
            splittable = total.n >= p_.min_samples_split;
            if (splittable) {
                const double mean = total.a / total.b;
                bool constant = true;
                const double y0 = (*y_)[static_cast<std::size_t>(ref[begin])];
                for (std::size_t k = begin; k < end; ++k) {
                    const auto r = static_cast<std::size_t>(ref[k]);
                    const double d = (*y_)[r] - mean;
                    impurity += row_[r].b * d * d;
                    constant = constant && (*y_)[r] == y0;
                }
                splittable = !constant;
            }
        }
        if (!splittable) return make_leaf(total);

        Split best;
        bool found = false;
        for (int f : candidate_features(node_id)) {
            const auto& list = lists_[static_cast<std::size_t>(f)];
            const double* col = X_.col(f).data();
            Stats left;
            for (std::size_t k = begin; k + 1 < end; ++k) {
                const int r = list[k];
                left += row_[static_cast<std::size_t>(r)];
                const double lo = col[r], hi = col[list[k + 1]];
                if (lo == hi) continue;
                const Stats right = total - left;
                if (!children_ok(left, right)) continue;
                const double g = gain(left, right, total);
                if (!found || g > best.gain) {
                    double thr = lo + (hi - lo) / 2.0;
                    if (!(thr < hi)) thr = lo;
                    best = {f, thr, g, k + 1 - begin};
                    found = true;
                }
            }
        }
        const bool accept = found && (p_.boosting ? best.gain > kMinBoostGain : best.gain > kCartRelTol * impurity);
        if (!accept) return make_leaf(total);

        const auto self = static_cast<std::int32_t>(tree_.nodes.size());
        TreeNode node;
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.value = leaf_value(total);
        tree_.nodes.push_back(node);

        const std::size_t mid = begin + best.n_left;
        const auto& chosen = lists_[static_cast<std::size_t>(best.feature)];
        for (std::size_t k = begin; k < end; ++k) goes_left_[static_cast<std::size_t>(chosen[k])] = k < mid;
        for (int f : features_) {
            auto& list = lists_[static_cast<std::size_t>(f)];
            scratch_.clear();
            std::size_t out = begin;
            for (std::size_t k = begin; k < end; ++k) {
                if (goes_left_[static_cast<std::size_t>(list[k])]) list[out++] = list[k];
                else scratch_.push_back(list[k]);
            }
            std::copy(scratch_.begin(), scratch_.end(), list.begin() + static_cast<std::ptrdiff_t>(out));
        }
        const auto l = build(begin, mid, depth + 1);
        const auto r = build(mid, end, depth + 1);
        tree_.nodes[static_cast<std::size_t>(self)].left = l;
        tree_.nodes[static_cast<std::size_t>(self)].right = r;
        return self;
    }

    const Matrix& X_;
    const std::vector<std::vector<int>>& sorted_;
    std::vector<Stats> row_;
    const std::vector<double>* y_ = nullptr;
    GrowParams p_;
    std::uint64_t seed_ = 0;
    std::vector<int> features_;
    std::vector<std::vector<int>> lists_;
    std::vector<char> goes_left_;
    std::vector<int> scratch_;
    TreeModel tree_;
};

std::vector<int> all_features(Eigen::Index d) {
    std::vector<int> f(static_cast<std::size_t>(d));
    std::iota(f.begin(), f.end(), 0);
    return f;
}

GrowParams cart_grow_params(const CartParams& p, int d) {
    GrowParams g;
    g.max_depth = p.max_depth;
    g.min_samples_split = p.min_samples_split;
    g.min_samples_leaf = p.min_samples_leaf;
    g.features_per_split = p.max_features.count(d);
    return g;
}

std::vector<Stats> cart_rows(const Canonical& c, const std::vector<int>* multiplicity) {
    std::vector<Stats> rows(static_cast<std::size_t>(c.y.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double m = multiplicity ? (*multiplicity)[i] : 1.0;
        const auto r = static_cast<Eigen::Index>(i);
        rows[i] = {c.w(r) * m * c.y(r), c.w(r) * m, m};
    }
    return rows;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector predict_trees(const std::vector<TreeModel>& trees, const std::vector<double>* shrinkage, double base,
                     const Matrix& X, bool average) {
    Vector out = Vector::Constant(X.rows(), average ? 0.0 : base);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const auto row = X.row(i);
        double s = 0.0;
        for (std::size_t t = 0; t < trees.size(); ++t)
            s += (shrinkage ? (*shrinkage)[t] : 1.0) * trees[t].predict(row);
        out(i) = average ? s / static_cast<double>(trees.size()) : base + s;
    }
    return out;
}

}  // namespace

TreeModel fit_cart(const Matrix& X, const Vector& y, const Vector& w, const CartParams& params, std::uint64_t seed) {
    check_inputs(X, y, w, "fit_cart");
    const auto c = canonicalize(X, y, w);
    const auto sorted = presort(c.X);
    const auto ys = to_std(c.y);
    Grower grower(c.X, sorted);
    return grower.grow(cart_rows(c, nullptr), &ys, all_features(c.X.cols()),
                       cart_grow_params(params, static_cast<int>(c.X.cols())), seed);
}

FittedModel fit_random_forest(const Matrix& X, const Vector& y, const Vector& w, const RfHyperparams& h,
                              std::uint64_t seed) {
    check_inputs(X, y, w, "fit_random_forest");
    if (h.n_estimators < 1) throw Error(ErrorKind::config, "n_estimators must be positive");
    const auto c = canonicalize(X, y, w);
    const auto sorted = presort(c.X);
    const auto ys = to_std(c.y);
    const int d = static_cast<int>(c.X.cols());
    const CartParams cp{h.max_depth, h.min_samples_split, h.min_samples_leaf, h.max_features};
    const auto gp = cart_grow_params(cp, d);
    const auto n = static_cast<std::size_t>(c.y.size());

    FittedModel m;
    m.kind = ModelKind::random_forest;
    m.hyperparams = h;
    m.n_features = d;
    m.seed = seed;
    Grower grower(c.X, sorted);
    const bool deterministic_trees = !h.bootstrap && gp.features_per_split >= d;
    for (int t = 0; t < h.n_estimators; ++t) {
        if (deterministic_trees && t > 0) {
            m.trees.push_back(m.trees.front());
            continue;
        }
        const std::uint64_t tree_seed = mix_seed(seed, static_cast<std::uint64_t>(t));
        std::vector<int> mult;
        if (h.bootstrap) {
            mult.assign(n, 0);
            std::mt19937_64 rng(tree_seed);
            for (std::size_t k = 0; k < n; ++k) ++mult[uniform_below(rng, n)];
        }
        m.trees.push_back(grower.grow(cart_rows(c, h.bootstrap ? &mult : nullptr), &ys, all_features(d), gp,
                                      mix_seed(tree_seed, 0x6e6f6465ULL)));
    }
    return m;
}

bool EarlyStopping::update(double metric) {
    ++rounds_;
    if (rounds_ == 1 || metric < best_) {
        best_ = metric;
        best_round_ = rounds_;
    }
    return rounds_ - best_round_ >= patience_;
}

Gradients squared_error_gradients(const Vector& pred, const Vector& y, const Vector& w) {
    return {w.cwiseProduct(pred - y), w};
}

double weighted_rmse(const Vector& pred, const Vector& y, const Vector& w) {
    if (pred.size() != y.size() || w.size() != y.size()) fail("weighted_rmse: size mismatch");
    if (y.size() == 0) fail("weighted_rmse of an empty sample");
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double e = pred(i) - y(i);
        num += w(i) * e * e;
        den += w(i);
    }
    return std::sqrt(num / den);
}

FittedModel fit_gbdt(const Matrix& X_train, const Vector& y_train, const Vector& w_train, const Matrix& X_valid,
                     const Vector& y_valid, const Vector& w_valid, const GbdtHyperparams& h, std::uint64_t seed,
                     int early_stopping_rounds) {
    check_inputs(X_train, y_train, w_train, "fit_gbdt");
    if (X_valid.rows() == 0) fail("fit_gbdt: empty validation set, early stopping is undefined");
    check_inputs(X_valid, y_valid, w_valid, "fit_gbdt validation");
    if (X_valid.cols() != X_train.cols()) fail("fit_gbdt: validation width differs from training width");
    if (h.n_estimators < 1 || h.max_depth < 0 || !(h.learning_rate > 0) || !(h.subsample > 0 && h.subsample <= 1) ||
        !(h.colsample_bytree > 0 && h.colsample_bytree <= 1) || h.reg_lambda < 0 || h.gamma < 0)
        throw Error(ErrorKind::config, "invalid gradient boosting hyperparameters");

    const auto c = canonicalize(X_train, y_train, w_train);
    const auto v = canonicalize(X_valid, y_valid, w_valid);
    const auto sorted = presort(c.X);
    const auto n = static_cast<std::size_t>(c.y.size());
    const int d = static_cast<int>(c.X.cols());

    FittedModel m;
    m.kind = ModelKind::gbdt;
    m.hyperparams = h;
    m.n_features = d;
    m.seed = seed;
    m.base_score = c.w.dot(c.y) / c.w.sum();

    GrowParams gp;
    gp.boosting = true;
    gp.max_depth = h.max_depth;
    gp.min_child_weight = h.min_child_weight;
    gp.lambda = h.reg_lambda;
    gp.gamma = h.gamma;
    gp.features_per_split = d;

    Vector pred_t = Vector::Constant(c.y.size(), m.base_score);
    Vector pred_v = Vector::Constant(v.y.size(), m.base_score);
    EarlyStopping stopper(early_stopping_rounds);
    Grower grower(c.X, sorted);
    const auto n_rows = static_cast<std::size_t>(std::ceil(h.subsample * static_cast<double>(n) - 1e-9));
    const int n_cols = MaxFeatures::of(h.colsample_bytree).count(d);

    for (int round = 0; round < h.n_estimators; ++round) {
        std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(round)));
        std::vector<char> active(n, 1);
        if (n_rows < n) {
            std::vector<std::size_t> idx(n);
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            for (std::size_t i = 0; i < n_rows; ++i) std::swap(idx[i], idx[i + uniform_below(rng, n - i)]);
            active.assign(n, 0);
            for (std::size_t i = 0; i < n_rows; ++i) active[idx[i]] = 1;
        }
        std::vector<int> features = all_features(d);
        if (n_cols < d) {
            for (int i = 0; i < n_cols; ++i)
                std::swap(features[static_cast<std::size_t>(i)],
                          features[static_cast<std::size_t>(i) + uniform_below(rng, static_cast<std::uint64_t>(d - i))]);
            features.resize(static_cast<std::size_t>(n_cols));
            std::sort(features.begin(), features.end());
        }
        const auto grad = squared_error_gradients(pred_t, c.y, c.w);
        std::vector<Stats> rows(n);
        for (std::size_t i = 0; i < n; ++i)
            if (active[i]) rows[i] = {grad.g(static_cast<Eigen::Index>(i)), grad.h(static_cast<Eigen::Index>(i)), 1.0};
        auto tree = grower.grow(std::move(rows), nullptr, std::move(features), gp, mix_seed(seed, 0x74726565ULL + round));
        for (Eigen::Index i = 0; i < pred_t.size(); ++i) pred_t(i) += h.learning_rate * tree.predict(c.X.row(i));
        for (Eigen::Index i = 0; i < pred_v.size(); ++i) pred_v(i) += h.learning_rate * tree.predict(v.X.row(i));
        m.trees.push_back(std::move(tree));
        m.shrinkage.push_back(h.learning_rate);
        m.train_curve.push_back(weighted_rmse(pred_t, c.y, c.w));
        m.valid_curve.push_back(weighted_rmse(pred_v, v.y, v.w));
        if (stopper.update(m.valid_curve.back())) break;
    }
    m.rounds_trained = stopper.rounds();
    m.best_iteration = stopper.best_round();
    m.trees.resize(static_cast<std::size_t>(m.best_iteration));
    m.shrinkage.resize(static_cast<std::size_t>(m.best_iteration));
    return m;
}

Vector predict(const FittedModel& model, const Matrix& X) {
    if (X.cols() != model.n_features)
        fail("feature width " + std::to_string(X.cols()) + " does not match model width " +
             std::to_string(model.n_features));
    if (model.trees.empty()) fail("model has no trees");
    Vector out = model.kind == ModelKind::random_forest
                     ? predict_trees(model.trees, nullptr, 0.0, X, true)
                     : predict_trees(model.trees, &model.shrinkage, model.base_score, X, false);
    if (!out.allFinite()) fail("model produced a non-finite prediction");
    return out;
}

// ---------------------------------------------------------------------------
// Archive

namespace {

constexpr char kMagic[8] = {'F', 'P', 'L', 'F', 'M', 'O', 'D', 'L'};
constexpr std::uint32_t kArchiveVersion = 1;

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}

    template <typename T>
    T get() {
        if (pos_ + sizeof(T) > data_.size()) fail("model archive is truncated");
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string_view bytes(std::size_t n) {
        if (pos_ + n > data_.size()) fail("model archive is truncated");
        auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const noexcept { return pos_ == data_.size(); }

private:
    std::string_view data_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string serialize(const FittedModel& m, const std::string& schema) {
    nlohmann::json header;
    header["kind"] = to_string(m.kind);
    header["hyperparams"] = m.kind == ModelKind::random_forest ? to_json(std::get<RfHyperparams>(m.hyperparams))
                                                               : to_json(std::get<GbdtHyperparams>(m.hyperparams));
    header["n_features"] = m.n_features;
    header["seed"] = std::to_string(m.seed);
    header["base_score"] = m.base_score;
    header["best_iteration"] = m.best_iteration;
    header["rounds_trained"] = m.rounds_trained;
    header["n_trees"] = m.trees.size();
    header["schema"] = schema;
    header["train_curve"] = m.train_curve;
    header["valid_curve"] = m.valid_curve;
    const std::string text = header.dump();

    std::string out(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kArchiveVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
    out += text;
    for (std::size_t t = 0; t < m.trees.size(); ++t) {
        const auto& tree = m.trees[t];
        put<std::uint32_t>(out, static_cast<std::uint32_t>(tree.nodes.size()));
        for (const auto& n : tree.nodes) {
            put<std::int32_t>(out, n.feature);
            put<double>(out, n.threshold);
            put<std::int32_t>(out, n.left);
            put<std::int32_t>(out, n.right);
            put<double>(out, n.value);
        }
        put<double>(out, m.shrinkage.empty() ? 1.0 : m.shrinkage[t]);
    }
    out += sha256_hex(out);
    return out;
}

FittedModel deserialize(const std::string& bytes, std::optional<int> expected_features, std::string* schema) {
    if (bytes.size() < sizeof kMagic + 8 + 64) fail("model archive is truncated");
    const std::string_view body(bytes.data(), bytes.size() - 64);
    if (sha256_hex(body) != std::string_view(bytes).substr(bytes.size() - 64))
        fail("model archive checksum mismatch");
    Reader in(body);
    if (in.bytes(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) fail("not a model archive");
    if (const auto version = in.get<std::uint32_t>(); version != kArchiveVersion)
        fail("unsupported model archive version " + std::to_string(version));
    const auto header_len = in.get<std::uint32_t>();
    const auto header = nlohmann::json::parse(in.bytes(header_len));

    FittedModel m;
    const auto kind = header.at("kind").get<std::string>();
    if (kind == "random_forest") {
        m.kind = ModelKind::random_forest;
        m.hyperparams = rf_from_json(header.at("hyperparams"));
    } else if (kind == "gbdt") {
        m.kind = ModelKind::gbdt;
        m.hyperparams = gbdt_from_json(header.at("hyperparams"));
    } else {
        fail("unknown model kind '" + kind + "'");
    }
    m.n_features = header.at("n_features").get<int>();
    m.seed = std::stoull(header.at("seed").get<std::string>());
    m.base_score = header.at("base_score").get<double>();
    m.best_iteration = header.at("best_iteration").get<int>();
    m.rounds_trained = header.at("rounds_trained").get<int>();
    m.train_curve = header.at("train_curve").get<std::vector<double>>();
    m.valid_curve = header.at("valid_curve").get<std::vector<double>>();
    if (schema) *schema = header.at("schema").get<std::string>();
    const auto n_trees = header.at("n_trees").get<std::size_t>();
    for (std::size_t t = 0; t < n_trees; ++t) {
        TreeModel tree;
        const auto n_nodes = in.get<std::uint32_t>();
        tree.nodes.resize(n_nodes);
        for (auto& n : tree.nodes) {
            n.feature = in.get<std::int32_t>();
            n.threshold = in.get<double>();
            n.left = in.get<std::int32_t>();
            n.right = in.get<std::int32_t>();
            n.value = in.get<double>();
        }
        tree.validate(m.n_features);
        const double s = in.get<double>();
        if (m.kind == ModelKind::gbdt) m.shrinkage.push_back(s);
        m.trees.push_back(std::move(tree));
    }
    if (!in.done()) fail("trailing bytes in model archive");
    if (m.trees.empty()) fail("model archive holds no trees");
    if (expected_features && *expected_features != m.n_features)
        fail("model expects " + std::to_string(m.n_features) + " features, data has " +
             std::to_string(*expected_features));
    return m;
}

void save_model(const std::filesystem::path& path, const FittedModel& model, const std::string& schema) {
    const auto bytes = serialize(model, schema);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error(ErrorKind::internal, "cannot write " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

FittedModel load_model(const std::filesystem::path& path, std::optional<int> expected_features, std::string* schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::missing_artifact, "model file not found: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return deserialize(ss.str(), expected_features, schema);
    } catch (const nlohmann::json::exception& e) {
        fail(path.string() + ": bad model header: " + e.what());
    }
}

}  // namespace fplf::trees
