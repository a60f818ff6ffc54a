#pragma once

// Brute-force split search used to check fitted trees node by node.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "fplf/trees.hpp"

namespace fplf::test {

struct OracleSplit {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

struct OracleBest {
    std::optional<OracleSplit> best;
    bool unique = true;  // no other split within tolerance of the best gain
};

struct NodeRows {
    std::vector<std::vector<int>> rows;  // per node, training rows reaching it
    std::vector<int> depth;
};

inline NodeRows route(const trees::TreeModel& tree, const trees::Matrix& X) {
    NodeRows out;
    out.rows.assign(tree.nodes.size(), {});
    out.depth.assign(tree.nodes.size(), 0);
    for (int i = 0; i < X.rows(); ++i) {
        std::size_t n = 0;
        out.rows[0].push_back(i);
        while (!tree.nodes[n].is_leaf()) {
            const auto& node = tree.nodes[n];
            const auto next = static_cast<std::size_t>(X(i, node.feature) <= node.threshold ? node.left : node.right);
            out.depth[next] = out.depth[n] + 1;
            n = next;
            out.rows[n].push_back(i);
        }
    }
    return out;
}

// gain(left, right, total) receives (sum_a, sum_b, count) of each side,
// where (a, b) = (w*y, w) for least squares or (g, h) for boosting. `ok`
// says whether a pair of children is admissible.
template <typename Gain, typename Ok>
OracleBest enumerate_splits(const trees::Matrix& X, const std::vector<int>& rows, const std::vector<double>& a,
                            const std::vector<double>& b, const Gain& gain, const Ok& ok) {
    double ta = 0, tb = 0;
    for (int r : rows) {
        ta += a[static_cast<std::size_t>(r)];
        tb += b[static_cast<std::size_t>(r)];
    }
    OracleBest out;
    std::vector<OracleSplit> all;
    for (int f = 0; f < X.cols(); ++f) {
        std::vector<double> values;
        for (int r : rows) values.push_back(X(r, f));
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        for (std::size_t i = 0; i + 1 < values.size(); ++i) {
            const double thr = values[i] + (values[i + 1] - values[i]) / 2.0;
            double la = 0, lb = 0, ln = 0;
            for (int r : rows)
                if (X(r, f) <= thr) {
                    la += a[static_cast<std::size_t>(r)];
                    lb += b[static_cast<std::size_t>(r)];
                    ln += 1;
                }
            const double rn = static_cast<double>(rows.size()) - ln;
            if (!ok(la, lb, ln, ta - la, tb - lb, rn)) continue;
            all.push_back({f, thr, gain(la, lb, ta - la, tb - lb, ta, tb)});
        }
    }
    for (const auto& s : all)
        if (!out.best || s.gain > out.best->gain) out.best = s;
    if (out.best) {
        const double tol = 1e-9 * (1.0 + std::abs(out.best->gain));
        int near = 0;
        for (const auto& s : all)
            if (std::abs(s.gain - out.best->gain) <= tol) ++near;
        out.unique = near == 1;
    }
    return out;
}

/// Result of checking one tree; `error` is empty when every node agrees.
struct OracleReport {
    std::string error;
    int internal_nodes = 0;
    int leaves = 0;
};

struct CartOracleParams {
    std::optional<int> max_depth;
    int min_samples_split = 2;
    int min_samples_leaf = 1;
};

inline OracleReport check_cart(const trees::TreeModel& tree, const trees::Matrix& X, const trees::Vector& y,
                               const trees::Vector& w, const CartOracleParams& p) {
    OracleReport rep;
    const auto routed = route(tree, X);
    std::vector<double> a(static_cast<std::size_t>(y.size())), b(a.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        a[static_cast<std::size_t>(i)] = w(i) * y(i);
        b[static_cast<std::size_t>(i)] = w(i);
    }
    const auto gain = [](double la, double lb, double ra, double rb, double ta, double tb) {
        return la * la / lb + ra * ra / rb - ta * ta / tb;
    };
    const auto ok = [&](double, double, double ln, double, double, double rn) {
        return ln >= p.min_samples_leaf && rn >= p.min_samples_leaf;
    };
    for (std::size_t n = 0; n < tree.nodes.size(); ++n) {
        const auto& node = tree.nodes[n];
        const auto& rows = routed.rows[n];
        const std::string where = "node " + std::to_string(n) + ": ";
        if (rows.empty()) {
            rep.error = where + "no training rows reach it";
            return rep;
        }
        double sa = 0, sb = 0;
        for (int r : rows) {
            sa += a[static_cast<std::size_t>(r)];
            sb += b[static_cast<std::size_t>(r)];
        }
        const double mean = sa / sb;
        double impurity = 0;
        bool constant = true;
        for (int r : rows) {
            impurity += w(r) * (y(r) - mean) * (y(r) - mean);
            constant = constant && y(r) == y(rows.front());
        }
        const bool may_split = (!p.max_depth || routed.depth[n] < *p.max_depth) &&
                               static_cast<int>(rows.size()) >= std::max(2, p.min_samples_split) && !constant;
        const auto best = may_split ? enumerate_splits(X, rows, a, b, gain, ok) : OracleBest{};
        const bool should_split = best.best && best.best->gain > 1e-12 * impurity;
        if (node.is_leaf()) {
            ++rep.leaves;
            if (should_split && best.best->gain > 1e-9 * (1.0 + impurity)) {
                rep.error = where + "leaf, but a split with gain " + std::to_string(best.best->gain) + " exists";
                return rep;
            }
            if (std::abs(node.value - mean) > 1e-9 * (1.0 + std::abs(mean))) {
                rep.error = where + "leaf value " + std::to_string(node.value) + " != mean " + std::to_string(mean);
                return rep;
            }
            continue;
        }
        ++rep.internal_nodes;
        if (!should_split) {
            rep.error = where + "split, but no admissible split improves the node";
            return rep;
        }
        const auto& chosen = tree.nodes[n];
        std::vector<int> left, right;
        for (int r : rows) (X(r, chosen.feature) <= chosen.threshold ? left : right).push_back(r);
        double la = 0, lb = 0;
        for (int r : left) {
            la += a[static_cast<std::size_t>(r)];
            lb += b[static_cast<std::size_t>(r)];
        }
        const double g = gain(la, lb, sa - la, sb - lb, sa, sb);
        if (std::abs(g - best.best->gain) > 1e-9 * (1.0 + std::abs(best.best->gain))) {
            rep.error = where + "chosen gain " + std::to_string(g) + " below best " + std::to_string(best.best->gain);
            return rep;
        }
        if (best.unique && (chosen.feature != best.best->feature || chosen.threshold != best.best->threshold)) {
            rep.error = where + "chose feature " + std::to_string(chosen.feature) + " <= " +
                        std::to_string(chosen.threshold) + ", oracle " + std::to_string(best.best->feature) +
                        " <= " + std::to_string(best.best->threshold);
            return rep;
        }
    }
    return rep;
}

struct BoostOracleParams {
    int max_depth = 3;
    double min_child_weight = 1.0;
    double lambda = 1.0;
    double gamma = 0.0;
};

// Checks the first boosting tree, grown from gradients at the weighted mean.
inline OracleReport check_boost_tree(const trees::TreeModel& tree, const trees::Matrix& X,
                                     const std::vector<double>& g, const std::vector<double>& h,
                                     const BoostOracleParams& p) {
    OracleReport rep;
    const auto routed = route(tree, X);
    const auto score = [&](double G, double H) { return G * G / (H + p.lambda); };
    const auto gain = [&](double la, double lb, double ra, double rb, double ta, double tb) {
        return 0.5 * (score(la, lb) + score(ra, rb) - score(ta, tb)) - p.gamma;
    };
    const auto ok = [&](double, double lb, double, double, double rb, double) {
        return lb >= p.min_child_weight && rb >= p.min_child_weight;
    };
    for (std::size_t n = 0; n < tree.nodes.size(); ++n) {
        const auto& node = tree.nodes[n];
        const auto& rows = routed.rows[n];
        const std::string where = "node " + std::to_string(n) + ": ";
        if (rows.empty()) {
            rep.error = where + "no training rows reach it";
            return rep;
        }
        double G = 0, H = 0;
        for (int r : rows) {
            G += g[static_cast<std::size_t>(r)];
            H += h[static_cast<std::size_t>(r)];
        }
        const bool may_split = routed.depth[n] < p.max_depth && rows.size() >= 2;
        const auto best = may_split ? enumerate_splits(X, rows, g, h, gain, ok) : OracleBest{};
        const bool should_split = best.best && best.best->gain > 1e-10;
        if (node.is_leaf()) {
            ++rep.leaves;
            if (should_split && best.best->gain > 1e-8) {
                rep.error = where + "leaf, but a split with gain " + std::to_string(best.best->gain) + " exists";
                return rep;
            }
            const double want = -G / (H + p.lambda);
            if (std::abs(node.value - want) > 1e-9 * (1.0 + std::abs(want))) {
                rep.error = where + "leaf value " + std::to_string(node.value) + " != " + std::to_string(want);
                return rep;
            }
            continue;
        }
        ++rep.internal_nodes;
        if (!should_split) {
            rep.error = where + "split, but no admissible split has positive gain";
            return rep;
        }
        double GL = 0, HL = 0;
        for (int r : rows)
            if (X(r, node.feature) <= node.threshold) {
                GL += g[static_cast<std::size_t>(r)];
                HL += h[static_cast<std::size_t>(r)];
            }
        const double chosen = gain(GL, HL, G - GL, H - HL, G, H);
        if (std::abs(chosen - best.best->gain) > 1e-9 * (1.0 + std::abs(best.best->gain))) {
            rep.error = where + "chosen gain " + std::to_string(chosen) + " below best " + std::to_string(best.best->gain);
            return rep;
        }
        if (best.unique && (node.feature != best.best->feature || node.threshold != best.best->threshold)) {
            rep.error = where + "chose feature " + std::to_string(node.feature) + ", oracle " +
                        std::to_string(best.best->feature);
            return rep;
        }
    }
    return rep;
}

/// Random instance with a few distinct values per feature, so ties occur.
struct Instance {
    trees::Matrix X;
    trees::Vector y;
    trees::Vector w;
};

inline Instance random_instance(std::mt19937_64& rng, int max_rows = 64, int max_features = 4) {
    std::uniform_int_distribution<int> rows(2, max_rows), cols(1, max_features), levels(2, 9);
    const int n = rows(rng), d = cols(rng);
    Instance in{trees::Matrix(n, d), trees::Vector(n), trees::Vector(n)};
    for (int j = 0; j < d; ++j) {
        std::uniform_int_distribution<int> v(0, levels(rng));
        for (int i = 0; i < n; ++i) in.X(i, j) = v(rng) * 0.5;
    }
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> wd(0.2, 3.0);
    for (int i = 0; i < n; ++i) {
        in.y(i) = std::round(4.0 * (in.X(i, 0) + noise(rng))) / 4.0;
        in.w(i) = std::round(wd(rng) * 8.0) / 8.0;
    }
    return in;
}

}  // namespace fplf::test
