#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fplf/ensemble.hpp"

namespace fplf::evaluation {

using ensemble::Forecast;

enum class ReturnCategory { Zeros, Blanks, Tickers, Haulers };
inline constexpr std::array<ReturnCategory, 4> kCategories{ReturnCategory::Zeros, ReturnCategory::Blanks,
                                                           ReturnCategory::Tickers, ReturnCategory::Haulers};
std::string_view to_string(ReturnCategory c) noexcept;

ReturnCategory classify_return(int minutes, int points);

template <typename A, typename B>
double rmse(const Eigen::MatrixBase<A>& pred, const Eigen::MatrixBase<B>& actual) {
    if (pred.size() != actual.size()) fail("rmse: length mismatch");
    if (pred.size() == 0) fail("rmse of an empty sample");
    return std::sqrt((pred - actual).squaredNorm() / static_cast<double>(pred.size()));
}

template <typename A, typename B, typename W>
double rmse(const Eigen::MatrixBase<A>& pred, const Eigen::MatrixBase<B>& actual, const Eigen::MatrixBase<W>& w) {
    if (pred.size() != actual.size() || w.size() != pred.size()) fail("rmse: length mismatch");
    if (pred.size() == 0) fail("rmse of an empty sample");
    return std::sqrt((w.array() * (pred - actual).array().square()).sum() / w.sum());
}

template <typename A, typename B>
double mae(const Eigen::MatrixBase<A>& pred, const Eigen::MatrixBase<B>& actual) {
    if (pred.size() != actual.size()) fail("mae: length mismatch");
    if (pred.size() == 0) fail("mae of an empty sample");
    return (pred - actual).cwiseAbs().sum() / static_cast<double>(pred.size());
}

// Mean of up to `window` most recent values; 0 for an empty history.
double last5_baseline(std::span<const double> most_recent_first, int window = 5);

std::vector<Forecast> last5_forecasts(const features::HistoryIndex& index,
                                      std::span<const ensemble::ForecastSlot> slots, bool played_only = false);

/// A realized (player, fixture) outcome that a forecast at `horizon` targets.
struct Actual {
    std::string season;
    int gameweek = 0;
    int horizon = 1;
    std::string player_id;
    std::string name;
    Position position = Position::GK;
    std::string team;
    std::string opponent;
    bool was_home = false;
    int minutes = 0;
    int points = 0;
};

// For each deadline gameweek d in the window and horizon h, the records of
// gameweek d + h - 1 when it is still inside the window.
std::vector<Actual> window_actuals(const dataset::EvalDataset& eval, std::span<const int> horizons);

struct Cell {
    std::string method;
    int horizon = 1;
    std::optional<Position> position;  // empty = all positions
    std::string category;              // a ReturnCategory name or "All"
    double rmse = 0.0;
    double mae = 0.0;
    std::size_t count = 0;
};

struct Coverage {
    std::string method;
    std::size_t joined = 0;
    std::size_t excluded = 0;  // assistant-manager rows without a managed match
    std::vector<std::string> unmatched_forecasts;
    std::vector<std::string> unforecast_actuals;
};

struct EvalReport {
    std::vector<std::string> methods;
    std::vector<int> horizons;
    std::vector<Cell> cells;
    std::vector<Coverage> coverage;

    const Cell* find(const std::string& method, int horizon, std::optional<Position> position,
                     const std::string& category) const;
};

// Forecasts join actuals on (season, gameweek, player_id, opponent, venue,
// horizon). Overall cells per method x horizon x category (+ "All"), and
// position x category cells at the first horizon.
EvalReport evaluate(const std::map<std::string, std::vector<Forecast>>& forecasts_by_method,
                    std::span<const Actual> actuals, std::span<const int> horizons);

void write_report_csv(const std::filesystem::path& path, const EvalReport& report);
std::string format_report(const EvalReport& report);
void write_coverage(const std::filesystem::path& path, const EvalReport& report);

// External forecasts with columns season,gameweek,name,team,predicted_points
// [,horizon] joined to actuals by normalized name + team + gameweek. The
// optional alias file maps external names to player ids (columns name,player_id).
std::vector<Forecast> convert_external_forecasts(const std::filesystem::path& path, std::span<const Actual> actuals,
                                                 const std::optional<std::filesystem::path>& aliases = std::nullopt,
                                                 std::vector<std::string>* unmatched = nullptr);

std::string normalize_player_name(std::string_view name);

}  // namespace fplf::evaluation
