#pragma once

#include <map>
#include <vector>

#include <Eigen/Dense>

#include "fplf/core.hpp"

namespace fplf::weighting {

struct WeightingConfig {
    std::map<Position, int> bins_per_position{
        {Position::GK, 2}, {Position::DEF, 3}, {Position::MID, 4}, {Position::FWD, 3}, {Position::AM, 5}};
    double clip_quantile = 0.95;

    int bins(Position p) const;
    void validate() const;
};

// Empirical quantile with linear interpolation between order statistics
// (q in [0,1]).
double quantile_linear(const Eigen::Ref<const Eigen::VectorXd>& values, double q);

/// Monotone bin edges computed once from a reference sample and reusable on
/// other samples. Edges closer than 1e-8 are merged so no bin is empty on
/// the reference sample.
class QuantileBins {
public:
    static QuantileBins fit(const Eigen::Ref<const Eigen::VectorXd>& targets, int n_bins);

    // Labels 0..n-1 before compaction; values beyond the edges go to the end bins.
    std::vector<int> assign(const Eigen::Ref<const Eigen::VectorXd>& targets) const;
    int n_bins() const noexcept { return static_cast<int>(interior_.size()) + 1; }
    const std::vector<double>& interior_edges() const noexcept { return interior_; }

private:
    std::vector<double> interior_;
};

// Renumbers labels so the present bins are contiguous from 0, keeping order.
std::vector<int> compact_labels(const std::vector<int>& labels);

std::vector<int> discretize_targets(const Eigen::Ref<const Eigen::VectorXd>& targets, int n_bins);

// weight(b) = N / (bins present * count(b)).
Eigen::VectorXd balanced_weights(const std::vector<int>& labels);

Eigen::VectorXd clip_and_rescale(const Eigen::Ref<const Eigen::VectorXd>& weights, double clip_quantile);

/// Training and validation weights for one fold problem. Bin edges come from
/// the training targets; balancing and clipping run on each set separately.
struct FoldWeights {
    Eigen::VectorXd train;
    Eigen::VectorXd valid;
};

Eigen::VectorXd sample_weights(const Eigen::Ref<const Eigen::VectorXd>& targets, const QuantileBins& bins,
                               double clip_quantile);
FoldWeights fold_weights(const Eigen::Ref<const Eigen::VectorXd>& train_targets,
                         const Eigen::Ref<const Eigen::VectorXd>& valid_targets, int n_bins,
                         double clip_quantile);

}  // namespace fplf::weighting
