#include "fplf/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "fplf/csv.hpp"

namespace fplf::evaluation {

std::string_view to_string(ReturnCategory c) noexcept {
    switch (c) {
        case ReturnCategory::Zeros: return "Zeros";
        case ReturnCategory::Blanks: return "Blanks";
        case ReturnCategory::Tickers: return "Tickers";
        case ReturnCategory::Haulers: return "Haulers";
    }
    return "?";
}

ReturnCategory classify_return(int minutes, int points) {
    if (minutes < 0) fail("negative minutes");
    if (minutes == 0) return ReturnCategory::Zeros;
    if (points <= 2) return ReturnCategory::Blanks;
    if (points <= 4) return ReturnCategory::Tickers;
    return ReturnCategory::Haulers;
}

double last5_baseline(std::span<const double> most_recent_first, int window) {
    return features::rolling_mean(most_recent_first, window);
}

std::vector<Forecast> last5_forecasts(const features::HistoryIndex& index,
                                      std::span<const ensemble::ForecastSlot> slots, bool played_only) {
    std::vector<Forecast> out;
    out.reserve(slots.size());
    for (const auto& s : slots) {
        std::vector<double> points;
        for (const auto* r : index.player_history(s.context.player_key, s.context.cutoff))
            if (!played_only || r->fpl.minutes > 0) points.push_back(r->fpl.total_points);
        out.push_back(ensemble::make_forecast(s, last5_baseline(points)));
    }
    return out;
}

std::vector<Actual> window_actuals(const dataset::EvalDataset& eval, std::span<const int> horizons) {
    std::vector<Actual> out;
    const auto& w = eval.window;
    for (int d = w.first_gameweek; d <= w.last_gameweek; ++d)
        for (int h : horizons) {
            const int t = d + h - 1;
            if (t > w.last_gameweek) continue;
            for (const auto& r : eval.records) {
                if (r.fpl.season != w.season || r.fpl.gameweek != t) continue;
                out.push_back({r.fpl.season, t, h, r.fpl.player_id, r.fpl.player_name, r.fpl.position, r.fpl.team,
                               r.fpl.opponent_team, r.fpl.was_home, r.fpl.minutes, r.fpl.total_points});
            }
        }
    return out;
}

namespace {

using Key = std::tuple<std::string, int, std::string, std::string, bool, int>;

Key key_of(const Forecast& f) { return {f.season, f.gameweek, f.player_id, f.opponent, f.was_home, f.horizon}; }
Key key_of(const Actual& a) { return {a.season, a.gameweek, a.player_id, a.opponent, a.was_home, a.horizon}; }

std::string describe(const Key& k) {
    return std::get<0>(k) + " gw" + std::to_string(std::get<1>(k)) + " h" + std::to_string(std::get<5>(k)) +
           " player " + std::get<2>(k) + " vs " + std::get<3>(k) + (std::get<4>(k) ? " (H)" : " (A)");
}

struct Sample {
    int horizon;
    Position position;
    ReturnCategory category;
    double predicted;
    double actual;
};

Cell make_cell(const std::string& method, int horizon, std::optional<Position> position, std::string category,
               const std::vector<const Sample*>& samples) {
    Cell c{method, horizon, position, std::move(category), std::numeric_limits<double>::quiet_NaN(),
           std::numeric_limits<double>::quiet_NaN(), samples.size()};
    if (samples.empty()) return c;
    Eigen::VectorXd p(static_cast<Eigen::Index>(samples.size())), a(p.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        p(static_cast<Eigen::Index>(i)) = samples[i]->predicted;
        a(static_cast<Eigen::Index>(i)) = samples[i]->actual;
    }
    c.rmse = rmse(p, a);
    c.mae = mae(p, a);
    return c;
}

}  // namespace

const Cell* EvalReport::find(const std::string& method, int horizon, std::optional<Position> position,
                             const std::string& category) const {
    for (const auto& c : cells)
        if (c.method == method && c.horizon == horizon && c.position == position && c.category == category) return &c;
    return nullptr;
}

EvalReport evaluate(const std::map<std::string, std::vector<Forecast>>& forecasts_by_method,
                    std::span<const Actual> actuals, std::span<const int> horizons) {
    if (horizons.empty()) throw Error(ErrorKind::config, "no horizons to evaluate");
    EvalReport report;
    report.horizons.assign(horizons.begin(), horizons.end());
    const std::set<int> wanted(horizons.begin(), horizons.end());
    std::size_t total = 0;
    for (const auto& [method, forecasts] : forecasts_by_method) {
        report.methods.push_back(method);
        std::map<Key, const Forecast*> by_key;
        for (const auto& f : forecasts) {
            if (!wanted.count(f.horizon)) continue;
            if (!by_key.emplace(key_of(f), &f).second)
                fail("method '" + method + "' has duplicate forecasts for " + describe(key_of(f)));
        }
        Coverage cov;
        cov.method = method;
        std::set<Key> used;
        std::vector<Sample> samples;
        for (const auto& a : actuals) {
            if (!wanted.count(a.horizon)) continue;
            if (a.position == Position::AM && a.minutes == 0) {
                ++cov.excluded;
                continue;
            }
            const auto k = key_of(a);
            auto it = by_key.find(k);
            if (it == by_key.end()) {
                cov.unforecast_actuals.push_back(describe(k));
                continue;
            }
            used.insert(k);
            samples.push_back({a.horizon, a.position, classify_return(a.minutes, a.points),
                               it->second->predicted_points, static_cast<double>(a.points)});
        }
        for (const auto& [k, f] : by_key)
            if (!used.count(k)) cov.unmatched_forecasts.push_back(describe(k));
        cov.joined = samples.size();
        total += samples.size();
        report.coverage.push_back(std::move(cov));

        const auto select = [&](int h, std::optional<Position> pos, std::optional<ReturnCategory> cat) {
            std::vector<const Sample*> out;
            for (const auto& s : samples)
                if (s.horizon == h && (!pos || s.position == *pos) && (!cat || s.category == *cat)) out.push_back(&s);
            return out;
        };
        for (int h : report.horizons) {
            for (auto cat : kCategories)
                report.cells.push_back(make_cell(method, h, std::nullopt, std::string(to_string(cat)),
                                                 select(h, std::nullopt, cat)));
            report.cells.push_back(make_cell(method, h, std::nullopt, "All", select(h, std::nullopt, std::nullopt)));
        }
        const int h0 = report.horizons.front();
        for (auto pos : kAllPositions) {
            for (auto cat : kCategories) {
                if (pos == Position::AM && cat == ReturnCategory::Zeros) continue;
                report.cells.push_back(make_cell(method, h0, pos, std::string(to_string(cat)), select(h0, pos, cat)));
            }
            report.cells.push_back(make_cell(method, h0, pos, "All", select(h0, pos, std::nullopt)));
        }
    }
    if (total == 0) fail("no forecasts could be joined to actual outcomes");
    return report;
}

void write_report_csv(const std::filesystem::path& path, const EvalReport& report) {
    csv::Table t({"method", "horizon", "position", "category", "count", "rmse", "mae"});
    const auto num = [](double v) { return std::isnan(v) ? std::string() : format_double(v); };
    for (const auto& c : report.cells)
        t.add_row({c.method, std::to_string(c.horizon), c.position ? std::string(to_string(*c.position)) : "All",
                   c.category, std::to_string(c.count), num(c.rmse), num(c.mae)});
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    t.write(path);
}

namespace {

std::string cell_text(const Cell* c) {
    if (!c || c->count == 0) return "N/A";
    std::ostringstream s;
    s << std::fixed << std::setprecision(3) << c->rmse << " (" << c->mae << ")";
    return s.str();
}

void table(std::ostringstream& out, const std::vector<std::string>& header,
           const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width(header.size());
    for (std::size_t j = 0; j < header.size(); ++j) width[j] = header[j].size();
    for (const auto& r : rows)
        for (std::size_t j = 0; j < r.size(); ++j) width[j] = std::max(width[j], r[j].size());
    const auto line = [&](const std::vector<std::string>& r) {
        for (std::size_t j = 0; j < r.size(); ++j)
            out << (j ? "  " : "") << std::left << std::setw(static_cast<int>(width[j])) << r[j];
        out << "\n";
    };
    line(header);
    std::size_t total = 0;
    for (auto w : width) total += w;
    out << std::string(total + 2 * (width.size() - 1), '-') << "\n";
    for (const auto& r : rows) line(r);
}

}  // namespace

std::string format_report(const EvalReport& report) {
    std::ostringstream out;
    out << "Overall accuracy, RMSE (MAE)\n\n";
    std::vector<std::string> header{"Category"};
    for (int h : report.horizons)
        for (const auto& m : report.methods) header.push_back(m + " h" + std::to_string(h));
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> categories;
    for (auto c : kCategories) categories.emplace_back(to_string(c));
    categories.emplace_back("All");
    for (const auto& cat : categories) {
        std::vector<std::string> row{cat};
        for (int h : report.horizons)
            for (const auto& m : report.methods) row.push_back(cell_text(report.find(m, h, std::nullopt, cat)));
        rows.push_back(std::move(row));
    }
    table(out, header, rows);

    const int h0 = report.horizons.front();
    out << "\nAccuracy by position at horizon " << h0 << ", RMSE (MAE)\n\n";
    header = {"Position", "Category"};
    for (const auto& m : report.methods) header.push_back(m);
    rows.clear();
    for (auto pos : kAllPositions)
        for (const auto& cat : categories) {
            std::vector<std::string> row{std::string(to_string(pos)), cat};
            for (const auto& m : report.methods) row.push_back(cell_text(report.find(m, h0, pos, cat)));
            rows.push_back(std::move(row));
        }
    table(out, header, rows);

    out << "\nCoverage\n\n";
    for (const auto& c : report.coverage)
        out << c.method << ": " << c.joined << " joined, " << c.unmatched_forecasts.size() << " unmatched forecasts, "
            << c.unforecast_actuals.size() << " unforecast outcomes, " << c.excluded
            << " assistant-manager rows without a managed match excluded\n";
    return out.str();
}

void write_coverage(const std::filesystem::path& path, const EvalReport& report) {
    csv::Table t({"method", "kind", "record"});
    for (const auto& c : report.coverage) {
        for (const auto& r : c.unmatched_forecasts) t.add_row({c.method, "unmatched_forecast", r});
        for (const auto& r : c.unforecast_actuals) t.add_row({c.method, "unforecast_actual", r});
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    t.write(path);
}

std::string normalize_player_name(std::string_view name) {
    std::string out;
    bool space = false;
    for (char ch : trim(name)) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c) || c == '-' || c == '.' || c == '\'') {
            space = !out.empty();
            continue;
        }
        if (space) out.push_back(' ');
        space = false;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

std::vector<Forecast> convert_external_forecasts(const std::filesystem::path& path, std::span<const Actual> actuals,
                                                 const std::optional<std::filesystem::path>& aliases,
                                                 std::vector<std::string>* unmatched) {
    if (!std::filesystem::exists(path)) throw Error(ErrorKind::missing_artifact, "external forecast file not found: " + path.string());
    std::map<std::string, std::string> alias;
    if (aliases) {
        const auto a = csv::Table::read(*aliases);
        a.require_columns({"name", "player_id"});
        for (std::size_t r = 0; r < a.size(); ++r) alias[normalize_player_name(a.cell(r, "name"))] = a.cell(r, "player_id");
    }
    const auto t = csv::Table::read(path);
    t.require_columns({"season", "gameweek", "name", "team", "predicted_points"});
    const bool has_horizon = t.has_column("horizon");

    std::map<std::tuple<std::string, int, int, std::string, std::string>, std::vector<const Actual*>> by_name;
    std::map<std::tuple<std::string, int, int, std::string>, std::vector<const Actual*>> by_id;
    for (const auto& a : actuals) {
        by_name[{a.season, a.gameweek, a.horizon, normalize_player_name(a.name), dataset::normalize_team_name(a.team)}]
            .push_back(&a);
        by_id[{a.season, a.gameweek, a.horizon, a.player_id}].push_back(&a);
    }
    std::vector<Forecast> out;
    for (std::size_t r = 0; r < t.size(); ++r) {
        const std::string season = t.cell(r, "season");
        const int gw = static_cast<int>(t.get_int(r, "gameweek"));
        const int h = has_horizon ? static_cast<int>(t.get_int(r, "horizon")) : 1;
        const std::string name = normalize_player_name(t.cell(r, "name"));
        const std::vector<const Actual*>* hits = nullptr;
        if (auto it = alias.find(name); it != alias.end()) {
            if (auto m = by_id.find({season, gw, h, it->second}); m != by_id.end()) hits = &m->second;
        } else if (auto m = by_name.find({season, gw, h, name, dataset::normalize_team_name(t.cell(r, "team"))});
                   m != by_name.end()) {
            hits = &m->second;
        }
        if (!hits) {
            if (unmatched) unmatched->push_back(season + " gw" + std::to_string(gw) + " " + t.cell(r, "name"));
            continue;
        }
        // A per-gameweek figure applies to each fixture the player had that gameweek.
        for (const auto* a : *hits) {
            Forecast f;
            f.season = a->season;
            f.gameweek = a->gameweek;
            f.horizon = a->horizon;
            f.player_id = a->player_id;
            f.name = a->name;
            f.position = a->position;
            f.team = a->team;
            f.opponent = a->opponent;
            f.was_home = a->was_home;
            f.predicted_points = t.get_double(r, "predicted_points");
            out.push_back(std::move(f));
        }
    }
    return out;
}

}  // namespace fplf::evaluation
