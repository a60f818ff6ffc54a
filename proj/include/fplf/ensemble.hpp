#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fplf/features.hpp"
#include "fplf/search.hpp"
#include "fplf/trees.hpp"

namespace fplf::ensemble {

using dataset::PlayerMatchRecord;
using features::ScalerParams;
using trees::FittedModel;

// Mean of the two middle order statistics for even sizes.
template <typename Derived>
typename Derived::Scalar median(const Eigen::DenseBase<Derived>& values) {
    using Scalar = typename Derived::Scalar;
    if (values.size() == 0) fail("median of an empty set");
    std::vector<Scalar> v(static_cast<std::size_t>(values.size()));
    for (Eigen::Index i = 0; i < values.size(); ++i) v[static_cast<std::size_t>(i)] = values(i);
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / Scalar(2);
}

struct Member {
    int fold = 0;
    int rank = 0;  // 1-based within the fold's top-K
    std::string encoding;
    double validation_rmse = 0.0;
    FittedModel model;
};

struct PositionEnsemble {
    Position position = Position::GK;
    std::string schema_version;
    int n_features = 0;
    std::map<int, ScalerParams> fold_scalers;
    std::vector<Member> members;  // ordered by (fold, rank)
    std::string data_checksum;
    std::uint64_t seed = 42;
    int k = 10;
    int budget = 0;

    // Denormalized output of every member for each row (rows x members).
    Eigen::MatrixXd member_outputs(const Eigen::MatrixXd& X) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
    double predict_points(const Eigen::VectorXd& row) const;
    void validate() const;
};

// Bundles the per-fold search results (each carrying fitted models) with the
// scalers of the matching fold problems.
PositionEnsemble assemble(Position position, std::span<const search::SearchResult> results,
                          std::span<const search::FoldProblem> problems, const search::SearchConfig& config,
                          const std::string& data_checksum);

// Runs the search on every fold and bundles the winners.
PositionEnsemble train_position_ensemble(std::span<const features::FeatureMatrix> folds,
                                         const weighting::WeightingConfig& weighting,
                                         const search::SearchConfig& config, const std::string& data_checksum);

// Directory with manifest.json and one archive per member.
void save_ensemble(const std::filesystem::path& dir, const PositionEnsemble& e);
PositionEnsemble load_ensemble(const std::filesystem::path& dir);

nlohmann::json scaler_to_json(const ScalerParams& s);
ScalerParams scaler_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Forecasting

struct PlayerState {
    std::string season;
    std::string player_id;
    std::string name;
    Position position = Position::GK;
    std::string team;
    int availability_pct = 100;
};

// Players seen in `season` up to `gameweek`, each with its latest known
// club, position and availability.
std::vector<PlayerState> players_at_deadline(std::span<const PlayerMatchRecord> records, const std::string& season,
                                             int gameweek);

// Earliest deadline among the gameweek's fixtures; throws if it has none.
Timestamp gameweek_deadline(std::span<const ingest::Fixture> fixtures, const std::string& season, int gameweek);

/// One (player, fixture, horizon) to forecast, with history frozen at the
/// deadline gameweek.
struct ForecastSlot {
    PlayerState player;
    int deadline_gameweek = 0;
    int horizon = 1;
    int gameweek = 0;  // target gameweek = deadline + horizon - 1
    features::FeatureContext context;
};

std::vector<ForecastSlot> forecast_slots(std::span<const PlayerMatchRecord> records,
                                         std::span<const ingest::Fixture> fixtures, const std::string& season,
                                         int deadline_gameweek, std::span<const int> horizons,
                                         std::vector<std::string>* warnings = nullptr);

struct Forecast {
    std::string season;
    int gameweek = 0;
    int horizon = 1;
    std::string player_id;
    std::string name;
    Position position = Position::GK;
    std::string team;
    std::string opponent;
    bool was_home = false;
    double predicted_points = 0.0;
    std::vector<double> member_points;

    bool operator==(const Forecast&) const = default;
};

Forecast make_forecast(const ForecastSlot& slot, double points);

std::vector<Forecast> forecast_with_ensembles(const std::map<Position, PositionEnsemble>& ensembles,
                                              const features::HistoryIndex& index, std::span<const ForecastSlot> slots);

// Columns: season,gameweek,horizon,player_id,name,position,team,opponent,was_home,predicted_points.
void write_forecasts(const std::filesystem::path& path, std::span<const Forecast> forecasts);
std::vector<Forecast> read_forecasts(const std::filesystem::path& path);
// Long-format audit file with one row per member output.
void write_member_outputs(const std::filesystem::path& path, std::span<const Forecast> forecasts,
                          const std::map<Position, PositionEnsemble>& ensembles);

}  // namespace fplf::ensemble
