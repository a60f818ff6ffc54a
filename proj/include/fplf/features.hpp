#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "fplf/dataset.hpp"

namespace fplf::features {

using dataset::PlayerMatchRecord;

inline constexpr std::array<int, 5> kHorizons{1, 3, 5, 10, 38};
inline constexpr const char* kSchemaVersion = "fplf-features-v1";

enum class PlayerStat {
    points, relevant_points, minutes, influence, creativity, threat, goals_scored,
    penalties_missed, assists, goals_conceded, own_goals, saves, penalties_saved,
    yellow_cards, red_cards, bps, bonus, shots, xg, xg_chain, xg_buildup, key_passes, xa,
};

enum class TeamStat {
    goals_scored, goals_conceded, league_rank, opponent_league_rank, xg, deep_allowed,
    ppda_allowed_att, ppda_allowed_def, xga, deep, ppda_att, ppda_def,
};

enum class StatusStat { availability, team_league_rank, opponent_league_rank };

struct PositionSchema {
    Position position = Position::GK;
    std::vector<PlayerStat> player;
    std::vector<TeamStat> team;
    std::vector<TeamStat> opponent;
    std::vector<StatusStat> status;
    std::vector<std::string> names;
    std::size_t expected_count = 0;

    std::size_t size() const noexcept { return names.size(); }
    // e.g. "fplf-features-v1/GK/196"
    std::string version() const;
};

// GK: 196, DEF/MID/FWD: 206, AM: 122.
const PositionSchema& schema_for(Position position);

double rolling_mean(std::span<const double> most_recent_first, int horizon);

struct VenuePoints {
    bool home = false;
    double points = 0.0;
};
// Keeps past values earned at the upcoming match's venue, preserving recency order.
std::vector<double> relevant_points_history(std::span<const VenuePoints> most_recent_first, bool upcoming_home);

/// Standings from goals only: goal difference, then goals scored; tied teams
/// share the mean of the rank positions they span.
class LeagueTable {
public:
    struct Standing {
        int goals_scored = 0;
        int goals_conceded = 0;
        double rank = 0.0;
    };
    struct Result {
        std::string home, away;
        int home_goals = 0, away_goals = 0;
    };

    LeagueTable() = default;
    LeagueTable(std::span<const std::string> teams, std::span<const Result> results);

    double rank(const std::string& team) const;
    const std::map<std::string, Standing>& standings() const noexcept { return table_; }

private:
    std::map<std::string, Standing> table_;
};

double league_rank(const LeagueTable& table, const std::string& team);

/// One club's view of one match.
struct TeamMatchEntry {
    std::string season;
    int gameweek = 0;
    Timestamp kickoff = 0;
    Timestamp deadline = 0;
    std::string team;
    std::string opponent;
    bool home = false;
    ingest::RawUnderstatTeamMatch stats;
    double rank_at_match = 0.0;
    double opponent_rank_at_match = 0.0;
};

/// Time-ordered histories for players, clubs and league tables. Everything
/// queried through it is cut strictly before a reference time.
class HistoryIndex {
public:
    explicit HistoryIndex(std::span<const PlayerMatchRecord> records,
                          std::span<const ingest::Fixture> fixtures = {});

    // Most recent first, kickoff < cutoff.
    std::vector<const PlayerMatchRecord*> player_history(const std::string& key, Timestamp cutoff) const;
    std::vector<const TeamMatchEntry*> team_history(const std::string& team, Timestamp cutoff) const;
    // Table of `season` from matches kicked off before `cutoff`.
    LeagueTable table(const std::string& season, Timestamp cutoff) const;

private:
    std::unordered_map<std::string, std::vector<const PlayerMatchRecord*>> players_;
    std::unordered_map<std::string, std::vector<TeamMatchEntry>> teams_;
    std::map<std::string, std::vector<std::string>> season_teams_;
    std::map<std::string, std::vector<const TeamMatchEntry*>> season_home_matches_;
    mutable std::mutex cache_mutex_;
    mutable std::map<std::pair<std::string, Timestamp>, LeagueTable> cache_;
};

/// Inputs for one feature row: who, against whom, where, and the history cutoff.
struct FeatureContext {
    std::string season;
    std::string player_key;
    Position position = Position::GK;
    std::string team;
    std::string opponent;
    bool was_home = false;
    int availability_pct = 100;
    Timestamp cutoff = 0;
};

FeatureContext context_for(const PlayerMatchRecord& record);

Eigen::VectorXd build_feature_row(const HistoryIndex& index, const FeatureContext& ctx,
                                  const PositionSchema& schema);

struct RowMeta {
    std::string season;
    int gameweek = 0;
    std::string player_id;
    std::string name;
    std::string team;
    std::string opponent;
    bool was_home = false;
    Timestamp kickoff = 0;
    int minutes = 0;
    int points = 0;
};

struct FeatureMatrix {
    Position position = Position::GK;
    Eigen::MatrixXd values;  // rows = samples, unnormalized
    Eigen::VectorXd target;  // raw FPL points
    std::vector<RowMeta> meta;

    Eigen::Index rows() const noexcept { return values.rows(); }
};

FeatureMatrix build_feature_matrix(const HistoryIndex& index, std::span<const PlayerMatchRecord> records,
                                   Position position);
FeatureMatrix concat(std::span<const FeatureMatrix* const> parts);

void export_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& m,
                           const Eigen::VectorXd* weights = nullptr);

/// Column-wise min-max scaling to [0,1] with clipping, plus an independent
/// target scale.
template <typename Scalar>
struct MinMaxScaler {
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    Vector feature_min;
    Vector feature_max;
    Scalar target_min = 0;
    Scalar target_max = 0;

    template <typename DerivedX, typename DerivedY>
    static MinMaxScaler fit(const Eigen::MatrixBase<DerivedX>& X, const Eigen::MatrixBase<DerivedY>& y) {
        if (X.rows() == 0 || y.size() == 0) fail("cannot fit a scaler on an empty training set");
        MinMaxScaler s;
        s.feature_min = X.colwise().minCoeff().transpose();
        s.feature_max = X.colwise().maxCoeff().transpose();
        s.target_min = y.minCoeff();
        s.target_max = y.maxCoeff();
        return s;
    }

    template <typename Derived>
    Matrix transform(const Eigen::MatrixBase<Derived>& X) const {
        if (X.cols() != feature_min.size()) fail("scaler width does not match feature width");
        Matrix out(X.rows(), X.cols());
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
            const Scalar range = feature_max(j) - feature_min(j);
            if (range > 0)
                out.col(j) = ((X.col(j).array() - feature_min(j)) / range).cwiseMax(Scalar(0)).cwiseMin(Scalar(1)).matrix();
            else
                out.col(j).setZero();
        }
        return out;
    }

    template <typename Derived>
    Vector transform_row(const Eigen::MatrixBase<Derived>& x) const {
        return transform(x.transpose()).transpose();
    }

    Scalar normalize_target(Scalar y) const {
        const Scalar range = target_max - target_min;
        if (!(range > 0)) return Scalar(0);
        return std::clamp((y - target_min) / range, Scalar(0), Scalar(1));
    }

    template <typename Derived>
    Vector normalize_targets(const Eigen::MatrixBase<Derived>& y) const {
        Vector out(y.size());
        for (Eigen::Index i = 0; i < y.size(); ++i) out(i) = normalize_target(y(i));
        return out;
    }

    Scalar denormalize_target(Scalar y) const { return y * (target_max - target_min) + target_min; }

    bool operator==(const MinMaxScaler& o) const {
        return feature_min == o.feature_min && feature_max == o.feature_max &&
               target_min == o.target_min && target_max == o.target_max;
    }
};

using ScalerParams = MinMaxScaler<double>;

}  // namespace fplf::features
