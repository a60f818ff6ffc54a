#include "fplf/weighting.hpp"

#include <algorithm>
#include <cmath>

namespace fplf::weighting {

int WeightingConfig::bins(Position p) const {
    auto it = bins_per_position.find(p);
    if (it == bins_per_position.end())
        throw Error(ErrorKind::config, "no bin count for position " + std::string(to_string(p)));
    return it->second;
}

void WeightingConfig::validate() const {
    for (auto p : kAllPositions)
        if (bins(p) < 2) throw Error(ErrorKind::config, "bin count must be at least 2 for " + std::string(to_string(p)));
    if (!(clip_quantile > 0.0 && clip_quantile < 1.0))
        throw Error(ErrorKind::config, "clip_quantile must lie strictly between 0 and 1");
}

double quantile_linear(const Eigen::Ref<const Eigen::VectorXd>& values, double q) {
    if (values.size() == 0) fail("quantile of an empty sample");
    std::vector<double> v(values.data(), values.data() + values.size());
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

QuantileBins QuantileBins::fit(const Eigen::Ref<const Eigen::VectorXd>& targets, int n_bins) {
    if (n_bins < 2) fail("discretization needs at least 2 bins");
    if (targets.size() == 0) fail("cannot discretize an empty target sample");
    if (!targets.allFinite()) fail("non-finite target in discretization");
    std::vector<double> edges;
    for (int i = 0; i <= n_bins; ++i) edges.push_back(quantile_linear(targets, static_cast<double>(i) / n_bins));
    std::vector<double> kept{edges.front()};
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (edges[i] - kept.back() > 1e-8) kept.push_back(edges[i]);
    QuantileBins b;
    // Interior edges only; the outer two are open.
    if (kept.size() > 2) b.interior_.assign(kept.begin() + 1, kept.end() - 1);
    return b;
}

std::vector<int> QuantileBins::assign(const Eigen::Ref<const Eigen::VectorXd>& targets) const {
    std::vector<int> labels(static_cast<std::size_t>(targets.size()));
    for (Eigen::Index i = 0; i < targets.size(); ++i)
        labels[static_cast<std::size_t>(i)] =
            static_cast<int>(std::upper_bound(interior_.begin(), interior_.end(), targets(i)) - interior_.begin());
    return labels;
}

std::vector<int> compact_labels(const std::vector<int>& labels) {
    std::vector<int> present(labels.begin(), labels.end());
    std::sort(present.begin(), present.end());
    present.erase(std::unique(present.begin(), present.end()), present.end());
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
        out[i] = static_cast<int>(std::lower_bound(present.begin(), present.end(), labels[i]) - present.begin());
    return out;
}

std::vector<int> discretize_targets(const Eigen::Ref<const Eigen::VectorXd>& targets, int n_bins) {
    return compact_labels(QuantileBins::fit(targets, n_bins).assign(targets));
}

Eigen::VectorXd balanced_weights(const std::vector<int>& labels) {
    if (labels.empty()) fail("balanced weights of an empty label set");
    std::map<int, std::size_t> counts;
    for (int l : labels) ++counts[l];
    const double n = static_cast<double>(labels.size());
    const double k = static_cast<double>(counts.size());
    Eigen::VectorXd w(static_cast<Eigen::Index>(labels.size()));
    for (std::size_t i = 0; i < labels.size(); ++i)
        w(static_cast<Eigen::Index>(i)) = n / (k * static_cast<double>(counts[labels[i]]));
    return w;
}

Eigen::VectorXd clip_and_rescale(const Eigen::Ref<const Eigen::VectorXd>& weights, double clip_quantile) {
    if (weights.size() == 0) fail("cannot rescale an empty weight vector");
    if ((weights.array() <= 0.0).any() || !weights.allFinite()) fail("weights must be finite and positive");
    const double cap = quantile_linear(weights, clip_quantile);
    Eigen::VectorXd out = weights.cwiseMin(cap);
    return out / out.mean();
}

Eigen::VectorXd sample_weights(const Eigen::Ref<const Eigen::VectorXd>& targets, const QuantileBins& bins,
                               double clip_quantile) {
    return clip_and_rescale(balanced_weights(compact_labels(bins.assign(targets))), clip_quantile);
}

FoldWeights fold_weights(const Eigen::Ref<const Eigen::VectorXd>& train_targets,
                         const Eigen::Ref<const Eigen::VectorXd>& valid_targets, int n_bins,
                         double clip_quantile) {
    const auto bins = QuantileBins::fit(train_targets, n_bins);
    FoldWeights w;
    w.train = sample_weights(train_targets, bins, clip_quantile);
    if (valid_targets.size() > 0) w.valid = sample_weights(valid_targets, bins, clip_quantile);
    return w;
}

}  // namespace fplf::weighting
