#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "fplf/core.hpp"

namespace fplf::trees {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Features examined per split: ceil(sqrt(d)) or ceil(fraction * d).
struct MaxFeatures {
    bool sqrt = false;
    double fraction = 1.0;

    static MaxFeatures square_root() { return {true, 1.0}; }
    static MaxFeatures of(double fraction) { return {false, fraction}; }
    int count(int n_features) const;
    std::string to_string() const;
    bool operator==(const MaxFeatures&) const = default;
};

struct RfHyperparams {
    int n_estimators = 200;
    std::optional<int> max_depth;  // empty = unlimited
    int min_samples_split = 2;
    int min_samples_leaf = 1;
    MaxFeatures max_features = MaxFeatures::square_root();
    bool bootstrap = true;

    bool operator==(const RfHyperparams&) const = default;
};

struct GbdtHyperparams {
    int n_estimators = 300;
    int max_depth = 3;
    double learning_rate = 0.1;
    double subsample = 1.0;
    double colsample_bytree = 1.0;
    double min_child_weight = 1.0;
    double gamma = 0.0;
    double reg_lambda = 1.0;

    bool operator==(const GbdtHyperparams&) const = default;
};

nlohmann::json to_json(const RfHyperparams& h);
nlohmann::json to_json(const GbdtHyperparams& h);
RfHyperparams rf_from_json(const nlohmann::json& j);
GbdtHyperparams gbdt_from_json(const nlohmann::json& j);

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // rows with x <= threshold go left
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;

    bool is_leaf() const noexcept { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

struct TreeModel {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    template <typename Derived>
    double predict(const Eigen::MatrixBase<Derived>& x) const {
        std::int32_t i = 0;
        while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
            const auto& n = nodes[static_cast<std::size_t>(i)];
            i = x(n.feature) <= n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(i)].value;
    }

    std::size_t n_leaves() const;
    int depth() const;
    // Checks indices, acyclicity and finite values.
    void validate(int n_features) const;
    bool operator==(const TreeModel&) const = default;
};

struct CartParams {
    std::optional<int> max_depth;
    int min_samples_split = 2;
    int min_samples_leaf = 1;
    MaxFeatures max_features = MaxFeatures::of(1.0);
};

// Weighted least-squares regression tree. Rows are put into a canonical
// content order first, so the result does not depend on input row order.
TreeModel fit_cart(const Matrix& X, const Vector& y, const Vector& w, const CartParams& params,
                   std::uint64_t seed);

enum class ModelKind { random_forest, gbdt };
std::string_view to_string(ModelKind kind) noexcept;

struct FittedModel {
    ModelKind kind = ModelKind::random_forest;
    std::variant<RfHyperparams, GbdtHyperparams> hyperparams;
    int n_features = 0;
    std::uint64_t seed = 0;
    std::vector<TreeModel> trees;
    std::vector<double> shrinkage;  // gbdt only, one per tree
    double base_score = 0.0;        // gbdt only
    int best_iteration = 0;         // gbdt: number of trees kept (1-based best round)
    int rounds_trained = 0;         // gbdt: rounds run before early stopping
    std::vector<double> train_curve;
    std::vector<double> valid_curve;

    bool operator==(const FittedModel&) const = default;
};

FittedModel fit_random_forest(const Matrix& X, const Vector& y, const Vector& w, const RfHyperparams& h,
                              std::uint64_t seed);

inline constexpr int kEarlyStoppingRounds = 30;

FittedModel fit_gbdt(const Matrix& X_train, const Vector& y_train, const Vector& w_train,
                     const Matrix& X_valid, const Vector& y_valid, const Vector& w_valid,
                     const GbdtHyperparams& h, std::uint64_t seed,
                     int early_stopping_rounds = kEarlyStoppingRounds);

Vector predict(const FittedModel& model, const Matrix& X);

/// Patience rule over a metric to minimize. Rounds are 1-based; training
/// stops once `patience` rounds have passed without a strict improvement.
class EarlyStopping {
public:
    explicit EarlyStopping(int patience) : patience_(patience) {}

    // Records the metric of the next round; true when training should stop.
    bool update(double metric);
    int rounds() const noexcept { return rounds_; }
    int best_round() const noexcept { return best_round_; }
    double best_score() const noexcept { return best_; }

private:
    int patience_;
    int rounds_ = 0;
    int best_round_ = 0;
    double best_ = 0.0;
};

struct Gradients {
    Vector g;
    Vector h;
};

// Weighted squared error 0.5 * sum w (pred - y)^2: g = w (pred - y), h = w.
Gradients squared_error_gradients(const Vector& pred, const Vector& y, const Vector& w);
double weighted_rmse(const Vector& pred, const Vector& y, const Vector& w);

// Binary archive with a JSON header and a trailing SHA-256.
std::string serialize(const FittedModel& model, const std::string& schema = "");
// Throws if the checksum fails or, when given, the feature width differs.
FittedModel deserialize(const std::string& bytes, std::optional<int> expected_features = std::nullopt,
                        std::string* schema = nullptr);
void save_model(const std::filesystem::path& path, const FittedModel& model, const std::string& schema = "");
FittedModel load_model(const std::filesystem::path& path, std::optional<int> expected_features = std::nullopt,
                       std::string* schema = nullptr);

// Unbiased integer in [0, n) from a 64-bit engine.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n);

}  // namespace fplf::trees
