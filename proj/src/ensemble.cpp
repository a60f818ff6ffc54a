#include "fplf/ensemble.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "fplf/csv.hpp"

namespace fplf::ensemble {

Eigen::MatrixXd PositionEnsemble::member_outputs(const Eigen::MatrixXd& X) const {
    if (X.cols() != n_features)
        fail("feature width " + std::to_string(X.cols()) + " does not match ensemble schema " + schema_version);
    Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(members.size()));
    for (const auto& [fold, scaler] : fold_scalers) {
        const Eigen::MatrixXd Xn = scaler.transform(X);
        for (std::size_t m = 0; m < members.size(); ++m) {
            if (members[m].fold != fold) continue;
            const auto y = trees::predict(members[m].model, Xn);
            for (Eigen::Index i = 0; i < y.size(); ++i)
                out(i, static_cast<Eigen::Index>(m)) = scaler.denormalize_target(y(i));
        }
    }
    return out;
}

Eigen::VectorXd PositionEnsemble::predict(const Eigen::MatrixXd& X) const {
    const auto outputs = member_outputs(X);
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = median(outputs.row(i));
    return out;
}

double PositionEnsemble::predict_points(const Eigen::VectorXd& row) const {
    return predict(row.transpose())(0);
}

void PositionEnsemble::validate() const {
    const std::string what = "ensemble " + std::string(to_string(position));
    if (members.empty()) fail(what + " has no members");
    if (schema_version != features::schema_for(position).version())
        fail(what + " schema " + schema_version + " differs from " + features::schema_for(position).version());
    for (const auto& m : members) {
        if (!fold_scalers.count(m.fold)) fail(what + " lacks scalers for fold " + dataset::fold_label(m.fold));
        if (m.model.n_features != n_features) fail(what + " member width mismatch");
    }
    if (members.size() != fold_scalers.size() * static_cast<std::size_t>(k))
        fail(what + " has " + std::to_string(members.size()) + " members, expected " +
             std::to_string(fold_scalers.size() * static_cast<std::size_t>(k)));
}

PositionEnsemble assemble(Position position, std::span<const search::SearchResult> results,
                          std::span<const search::FoldProblem> problems, const search::SearchConfig& config,
                          const std::string& data_checksum) {
    if (results.size() != problems.size()) throw Error(ErrorKind::internal, "search results and folds differ in count");
    PositionEnsemble e;
    e.position = position;
    e.schema_version = features::schema_for(position).version();
    e.n_features = static_cast<int>(features::schema_for(position).size());
    e.data_checksum = data_checksum;
    e.seed = config.seed;
    e.k = config.k;
    e.budget = config.budget;
    for (std::size_t f = 0; f < results.size(); ++f) {
        const auto& r = results[f];
        if (r.fold != problems[f].fold) throw Error(ErrorKind::internal, "search result fold mismatch");
        e.fold_scalers[r.fold] = problems[f].scaler;
        int rank = 0;
        for (const auto& t : r.top) {
            if (!t.model) throw Error(ErrorKind::internal, "search result lacks a fitted model");
            e.members.push_back({r.fold, ++rank, t.candidate.encoding(), t.rmse, *t.model});
        }
    }
    e.validate();
    return e;
}

PositionEnsemble train_position_ensemble(std::span<const features::FeatureMatrix> folds,
                                         const weighting::WeightingConfig& weighting,
                                         const search::SearchConfig& config, const std::string& data_checksum) {
    if (folds.empty()) fail("no folds to train on");
    const Position position = folds.front().position;
    std::vector<search::FoldProblem> problems;
    std::vector<search::SearchResult> results;
    const auto& space = search::enumerate_space();
    for (int f = 0; f < static_cast<int>(folds.size()); ++f) {
        try {
            problems.push_back(search::make_fold_problem(folds, f, weighting));
            const auto& p = problems.back();
            results.push_back(search::kbest_search(
                space, f, config, [&p](const search::Candidate& c, std::uint64_t seed) {
                    return search::evaluate_candidate(c, p, seed);
                }));
        } catch (const Error& err) {
            throw Error(err.kind(), "fold " + dataset::fold_label(f) + ": " + err.what());
        }
    }
    return assemble(position, results, problems, config, data_checksum);
}

// ---------------------------------------------------------------------------

nlohmann::json scaler_to_json(const ScalerParams& s) {
    const auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    return {{"feature_min", vec(s.feature_min)},
            {"feature_max", vec(s.feature_max)},
            {"target_min", s.target_min},
            {"target_max", s.target_max}};
}

ScalerParams scaler_from_json(const nlohmann::json& j) {
    const auto vec = [](const nlohmann::json& a) {
        const auto v = a.get<std::vector<double>>();
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    };
    ScalerParams s;
    s.feature_min = vec(j.at("feature_min"));
    s.feature_max = vec(j.at("feature_max"));
    s.target_min = j.at("target_min").get<double>();
    s.target_max = j.at("target_max").get<double>();
    if (s.feature_min.size() != s.feature_max.size()) fail("scaler bounds differ in length");
    return s;
}

namespace {

std::string member_file(const Member& m) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_rank%02d.model", dataset::fold_label(m.fold).c_str(), m.rank);
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out) throw Error(ErrorKind::internal, "cannot write " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

void save_ensemble(const std::filesystem::path& dir, const PositionEnsemble& e) {
    e.validate();
    std::filesystem::create_directories(dir / "models");
    nlohmann::json manifest;
    manifest["position"] = to_string(e.position);
    manifest["schema_version"] = e.schema_version;
    manifest["n_features"] = e.n_features;
    manifest["data_checksum"] = e.data_checksum;
    manifest["seed"] = std::to_string(e.seed);
    manifest["k"] = e.k;
    manifest["budget"] = e.budget;
    manifest["scalers"] = nlohmann::json::array();
    for (const auto& [fold, s] : e.fold_scalers) {
        auto j = scaler_to_json(s);
        j["fold"] = dataset::fold_label(fold);
        manifest["scalers"].push_back(j);
    }
    manifest["members"] = nlohmann::json::array();
    for (const auto& m : e.members) {
        const auto bytes = trees::serialize(m.model, e.schema_version);
        const auto file = "models/" + member_file(m);
        write_text(dir / file, bytes);
        manifest["members"].push_back({{"fold", dataset::fold_label(m.fold)},
                                       {"rank", m.rank},
                                       {"encoding", m.encoding},
                                       {"validation_rmse", m.validation_rmse},
                                       {"file", file},
                                       {"sha256", sha256_hex(bytes)}});
    }
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

PositionEnsemble load_ensemble(const std::filesystem::path& dir) {
    const auto path = dir / "manifest.json";
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::missing_artifact, "ensemble manifest not found: " + path.string() +
                                                          " (run train-ensembles first)");
    PositionEnsemble e;
    try {
        const auto manifest = nlohmann::json::parse(in);
        e.position = parse_position(manifest.at("position").get<std::string>());
        e.schema_version = manifest.at("schema_version").get<std::string>();
        e.n_features = manifest.at("n_features").get<int>();
        e.data_checksum = manifest.at("data_checksum").get<std::string>();
        e.seed = std::stoull(manifest.at("seed").get<std::string>());
        e.k = manifest.at("k").get<int>();
        e.budget = manifest.at("budget").get<int>();
        for (const auto& s : manifest.at("scalers"))
            e.fold_scalers[dataset::parse_fold(s.at("fold").get<std::string>())] = scaler_from_json(s);
        for (const auto& m : manifest.at("members")) {
            Member member;
            member.fold = dataset::parse_fold(m.at("fold").get<std::string>());
            member.rank = m.at("rank").get<int>();
            member.encoding = m.at("encoding").get<std::string>();
            member.validation_rmse = m.at("validation_rmse").get<double>();
            std::string schema;
            member.model = trees::load_model(dir / m.at("file").get<std::string>(), e.n_features, &schema);
            if (schema != e.schema_version) fail("member " + m.at("file").get<std::string>() + " has schema " + schema);
            e.members.push_back(std::move(member));
        }
    } catch (const nlohmann::json::exception& ex) {
        fail(path.string() + ": malformed manifest: " + ex.what());
    }
    e.validate();
    return e;
}

// ---------------------------------------------------------------------------

std::vector<PlayerState> players_at_deadline(std::span<const PlayerMatchRecord> records, const std::string& season,
                                             int gameweek) {
    std::map<std::string, const PlayerMatchRecord*> latest;
    for (const auto& r : records) {
        if (r.fpl.season != season || r.fpl.gameweek > gameweek) continue;
        auto& slot = latest[r.fpl.player_id];
        if (!slot || std::tie(r.fpl.gameweek, r.kickoff) > std::tie(slot->fpl.gameweek, slot->kickoff)) slot = &r;
    }
    std::vector<PlayerState> out;
    for (const auto& [id, r] : latest)
        out.push_back({season, id, r->fpl.player_name, r->fpl.position, r->fpl.team, r->fpl.availability_pct});
    return out;
}

Timestamp gameweek_deadline(std::span<const ingest::Fixture> fixtures, const std::string& season, int gameweek) {
    std::optional<Timestamp> best;
    for (const auto& f : fixtures)
        if (f.season == season && f.gameweek == gameweek) best = best ? std::min(*best, f.deadline) : f.deadline;
    if (!best) fail("no fixtures for " + season + " gameweek " + std::to_string(gameweek));
    return *best;
}

std::vector<ForecastSlot> forecast_slots(std::span<const PlayerMatchRecord> records,
                                         std::span<const ingest::Fixture> fixtures, const std::string& season,
                                         int deadline_gameweek, std::span<const int> horizons,
                                         std::vector<std::string>* warnings) {
    const Timestamp cutoff = gameweek_deadline(fixtures, season, deadline_gameweek);
    const auto players = players_at_deadline(records, season, deadline_gameweek);
    std::vector<ForecastSlot> out;
    for (int h : horizons) {
        if (h < 1) throw Error(ErrorKind::config, "horizon must be at least 1");
        const int target = deadline_gameweek + h - 1;
        std::vector<const ingest::Fixture*> round;
        for (const auto& f : fixtures)
            if (f.season == season && f.gameweek == target) round.push_back(&f);
        if (round.empty()) {
            if (warnings)
                warnings->push_back("no fixtures known for " + season + " gameweek " + std::to_string(target) +
                                    " (horizon " + std::to_string(h) + "), skipped");
            continue;
        }
        std::sort(round.begin(), round.end(), [](const auto* a, const auto* b) {
            return std::tie(a->kickoff, a->home_team) < std::tie(b->kickoff, b->home_team);
        });
        for (const auto& p : players) {
            for (const auto* f : round) {
                const bool home = f->home_team == p.team;
                if (!home && f->away_team != p.team) continue;
                ForecastSlot s;
                s.player = p;
                s.deadline_gameweek = deadline_gameweek;
                s.horizon = h;
                s.gameweek = target;
                s.context.season = season;
                s.context.player_key = p.player_id + "|" + p.team;
                s.context.position = p.position;
                s.context.team = p.team;
                s.context.opponent = home ? f->away_team : f->home_team;
                s.context.was_home = home;
                s.context.availability_pct = p.availability_pct;
                s.context.cutoff = cutoff;
                out.push_back(std::move(s));
            }
        }
    }
    return out;
}

Forecast make_forecast(const ForecastSlot& slot, double points) {
    Forecast f;
    f.season = slot.player.season;
    f.gameweek = slot.gameweek;
    f.horizon = slot.horizon;
    f.player_id = slot.player.player_id;
    f.name = slot.player.name;
    f.position = slot.player.position;
    f.team = slot.context.team;
    f.opponent = slot.context.opponent;
    f.was_home = slot.context.was_home;
    f.predicted_points = points;
    return f;
}

std::vector<Forecast> forecast_with_ensembles(const std::map<Position, PositionEnsemble>& ensembles,
                                              const features::HistoryIndex& index, std::span<const ForecastSlot> slots) {
    std::vector<Forecast> out(slots.size());
    std::vector<bool> filled(slots.size(), false);
    for (const auto& [position, e] : ensembles) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < slots.size(); ++i)
            if (slots[i].player.position == position) rows.push_back(i);
        if (rows.empty()) continue;
        const auto& schema = features::schema_for(position);
        Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(schema.size()));
        for (std::size_t r = 0; r < rows.size(); ++r)
            X.row(static_cast<Eigen::Index>(r)) = features::build_feature_row(index, slots[rows[r]].context, schema).transpose();
        const auto outputs = e.member_outputs(X);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const auto row = outputs.row(static_cast<Eigen::Index>(r));
            auto f = make_forecast(slots[rows[r]], median(row));
            for (Eigen::Index m = 0; m < row.size(); ++m) f.member_points.push_back(row(m));
            out[rows[r]] = std::move(f);
            filled[rows[r]] = true;
        }
    }
    std::vector<Forecast> kept;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (filled[i]) kept.push_back(std::move(out[i]));
    return kept;
}

namespace {

const std::vector<std::string> kForecastColumns{"season", "gameweek", "horizon", "player_id", "name",
                                                "position", "team", "opponent", "was_home", "predicted_points"};

}  // namespace

void write_forecasts(const std::filesystem::path& path, std::span<const Forecast> forecasts) {
    csv::Table t(kForecastColumns);
    for (const auto& f : forecasts)
        t.add_row({f.season, std::to_string(f.gameweek), std::to_string(f.horizon), f.player_id, f.name,
                   std::string(to_string(f.position)), f.team, f.opponent, f.was_home ? "true" : "false",
                   format_double(f.predicted_points)});
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    t.write(path);
}

std::vector<Forecast> read_forecasts(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error(ErrorKind::missing_artifact, "forecast file not found: " + path.string());
    const auto t = csv::Table::read(path);
    t.require_columns(kForecastColumns);
    std::vector<Forecast> out;
    for (std::size_t r = 0; r < t.size(); ++r) {
        Forecast f;
        f.season = t.cell(r, "season");
        f.gameweek = static_cast<int>(t.get_int(r, "gameweek"));
        f.horizon = static_cast<int>(t.get_int(r, "horizon"));
        f.player_id = t.cell(r, "player_id");
        f.name = t.cell(r, "name");
        f.position = parse_position(t.cell(r, "position"));
        f.team = t.cell(r, "team");
        f.opponent = t.cell(r, "opponent");
        f.was_home = t.get_bool(r, "was_home");
        f.predicted_points = t.get_double(r, "predicted_points");
        out.push_back(std::move(f));
    }
    return out;
}

void write_member_outputs(const std::filesystem::path& path, std::span<const Forecast> forecasts,
                          const std::map<Position, PositionEnsemble>& ensembles) {
    csv::Table t({"season", "gameweek", "horizon", "player_id", "opponent", "was_home", "fold", "rank", "points"});
    for (const auto& f : forecasts) {
        auto it = ensembles.find(f.position);
        if (it == ensembles.end()) continue;
        for (std::size_t m = 0; m < f.member_points.size() && m < it->second.members.size(); ++m) {
            const auto& member = it->second.members[m];
            t.add_row({f.season, std::to_string(f.gameweek), std::to_string(f.horizon), f.player_id, f.opponent,
                       f.was_home ? "true" : "false", dataset::fold_label(member.fold), std::to_string(member.rank),
                       format_double(f.member_points[m])});
        }
    }
    t.write(path);
}

}  // namespace fplf::ensemble
