#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fplf/features.hpp"
#include "fplf/trees.hpp"
#include "fplf/weighting.hpp"

namespace fplf::search {

using trees::FittedModel;
using trees::GbdtHyperparams;
using trees::ModelKind;
using trees::RfHyperparams;

struct Candidate {
    ModelKind kind = ModelKind::random_forest;
    std::variant<RfHyperparams, GbdtHyperparams> hyperparams;
    std::size_t index = 0;  // position in enumerate_space()

    // e.g. "rf:n=200,depth=10,mss=2,msl=1,mf=sqrt,bootstrap=1"
    std::string encoding() const;
    static Candidate decode(const std::string& text);
    bool operator==(const Candidate&) const = default;
};

// The 324 random-forest settings followed by the 1944 boosting settings.
const std::vector<Candidate>& enumerate_space();
std::size_t index_of(const std::string& encoding);

/// Normalized, weighted train/validation split for one held-out fold.
struct FoldProblem {
    Position position = Position::GK;
    int fold = 0;
    features::ScalerParams scaler;
    trees::Matrix X_train;
    trees::Vector y_train;
    trees::Vector w_train;
    trees::Matrix X_valid;
    trees::Vector y_valid;
    trees::Vector w_valid;
};

// `folds[k]` holds the position's feature rows of fold k. Train = all other
// folds; scalers and bin edges are fit on the training union.
FoldProblem make_fold_problem(std::span<const features::FeatureMatrix> folds, int fold,
                              const weighting::WeightingConfig& weighting);

FittedModel train_candidate(const Candidate& c, const FoldProblem& p, std::uint64_t seed);
double validation_rmse(const FittedModel& model, const FoldProblem& p);

struct Evaluated {
    double rmse = 0.0;
    std::optional<FittedModel> model;
};

Evaluated evaluate_candidate(const Candidate& c, const FoldProblem& p, std::uint64_t seed);

enum class StopRule {
    qualifying_count,  // K candidates at or below the threshold after phase 1
    budget,            // run until the budget or the space is exhausted
};
std::string_view to_string(StopRule rule) noexcept;
StopRule parse_stop_rule(std::string_view text);

struct SearchConfig {
    int k = 10;
    int budget = 200;
    std::uint64_t seed = 42;
    StopRule stop = StopRule::qualifying_count;
    int jobs = 1;
};

struct Evaluation {
    int fold = 0;
    std::size_t order = 0;  // position in the shuffled stream
    std::size_t candidate_index = 0;
    std::string encoding;
    double rmse = 0.0;
    std::uint64_t seed = 0;

    bool operator==(const Evaluation&) const = default;
};

struct Ranked {
    Candidate candidate;
    double rmse = 0.0;
    std::optional<FittedModel> model;
};

struct SearchResult {
    int fold = 0;
    double threshold = 0.0;
    std::vector<double> threshold_trace;  // threshold after each evaluation from K on
    std::vector<Ranked> top;              // ascending RMSE, ties by candidate index
    std::vector<Evaluation> log;
};

// Deterministic permutation of 0..n-1 for a (seed, fold) pair.
std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed, int fold);

using Evaluator = std::function<Evaluated(const Candidate&, std::uint64_t seed)>;
// Called for each fresh evaluation in stream order with its wall time in seconds.
using EvaluationSink = std::function<void(const Evaluation&, double wall_seconds)>;

// Evaluations in `prior` (same fold, order, candidate and seed) are reused
// instead of recomputed; models missing for the final top-K are refit.
SearchResult kbest_search(std::span<const Candidate> space, int fold, const SearchConfig& config,
                          const Evaluator& evaluate, std::span<const Evaluation> prior = {},
                          const EvaluationSink& sink = {});

// Search log CSV: fold,order,candidate_index,encoding,rmse,seed.
std::vector<Evaluation> read_log(const std::filesystem::path& path);
void write_log(const std::filesystem::path& path, std::span<const Evaluation> log);
void append_log(const std::filesystem::path& path, const Evaluation& e);

}  // namespace fplf::search
